"""
Compiled RBF kernel routines.

k(a, b) = exp(-||a - b||^2 / (2 sigma^2)); callers pass inv = 1 / (2 sigma^2).
The parallel variants use prange and belong on the main thread; worker
threads (grid search) call the serial nogil variants.
"""

import math
import threading

import numpy as np
from numba import njit, prange


@njit(cache=True, nogil=True)
def rbf_row(X, i, inv, out):
    m, n = X.shape
    for j in range(m):
        d = 0.0
        for k in range(n):
            t = X[i, k] - X[j, k]
            d += t * t
        out[j] = math.exp(-d * inv)


@njit(cache=True, nogil=True)
def kernel_weighted_sum(X, alpha, inv):
    """G = K alpha, skipping zero coefficients"""
    m, n = X.shape
    G = np.zeros(m)
    for s in range(m):
        a = alpha[s]
        if a == 0.0:
            continue
        for j in range(m):
            d = 0.0
            for k in range(n):
                t = X[s, k] - X[j, k]
                d += t * t
            G[j] += a * math.exp(-d * inv)
    return G


@njit(cache=True, nogil=True)
def _decision_serial(Q, SV, alpha, rho, inv):
    nq, n = Q.shape
    out = np.empty(nq)
    for p in range(nq):
        acc = 0.0
        for s in range(SV.shape[0]):
            d = 0.0
            for k in range(n):
                t = Q[p, k] - SV[s, k]
                d += t * t
            acc += alpha[s] * math.exp(-d * inv)
        out[p] = acc - rho
    return out


@njit(cache=True, parallel=True)
def _decision_parallel(Q, SV, alpha, rho, inv):
    nq, n = Q.shape
    out = np.empty(nq)
    for p in prange(nq):
        acc = 0.0
        for s in range(SV.shape[0]):
            d = 0.0
            for k in range(n):
                t = Q[p, k] - SV[s, k]
                d += t * t
            acc += alpha[s] * math.exp(-d * inv)
        out[p] = acc - rho
    return out


@njit(cache=True, nogil=True)
def _gradient_serial(Q, SV, alpha, inv):
    nq, n = Q.shape
    out = np.zeros((nq, n))
    scale = 2.0 * inv  # 1 / sigma^2
    for p in range(nq):
        for s in range(SV.shape[0]):
            d = 0.0
            for k in range(n):
                t = Q[p, k] - SV[s, k]
                d += t * t
            w = alpha[s] * math.exp(-d * inv) * scale
            for k in range(n):
                out[p, k] += w * (SV[s, k] - Q[p, k])
    return out


@njit(cache=True, parallel=True)
def _gradient_parallel(Q, SV, alpha, inv):
    nq, n = Q.shape
    out = np.zeros((nq, n))
    scale = 2.0 * inv
    for p in prange(nq):
        for s in range(SV.shape[0]):
            d = 0.0
            for k in range(n):
                t = Q[p, k] - SV[s, k]
                d += t * t
            w = alpha[s] * math.exp(-d * inv) * scale
            for k in range(n):
                out[p, k] += w * (SV[s, k] - Q[p, k])
    return out


def _on_main_thread() -> bool:
    return threading.current_thread() is threading.main_thread()


def decision_values(Q: np.ndarray, SV: np.ndarray, alpha: np.ndarray, rho: float, sigma: float) -> np.ndarray:
    inv = 1.0 / (2.0 * sigma * sigma)
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    if _on_main_thread() and len(Q) > 256:
        return _decision_parallel(Q, SV, alpha, float(rho), inv)
    return _decision_serial(Q, SV, alpha, float(rho), inv)


def decision_gradients(Q: np.ndarray, SV: np.ndarray, alpha: np.ndarray, sigma: float) -> np.ndarray:
    inv = 1.0 / (2.0 * sigma * sigma)
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    if _on_main_thread() and len(Q) > 256:
        return _gradient_parallel(Q, SV, alpha, inv)
    return _gradient_serial(Q, SV, alpha, inv)
