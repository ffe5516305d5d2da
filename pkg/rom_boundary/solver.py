"""
SMO solver for the normalized one-class SVM dual

    min 1/2 a^T K a   s.t.  0 <= a_i <= C = 1/(nu m),  sum(a) = 1

Each update moves weight between the maximal violating pair: i with the
smallest gradient among coefficients below C, j with the largest gradient
among coefficients above 0. Kernel rows come from an LRU cache of fixed
slots so memory stays at O(slots * m).
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConvergenceError, DegenerateDataError
from .kernel import kernel_weighted_sum, rbf_row
from .logger import logger

TAU = 1e-12
MAX_PASSES = 3


@njit(cache=True, nogil=True)
def _cached_row(X, i, inv, cache_rows, slot_of, owner, last_used, clock):
    s = slot_of[i]
    if s < 0:
        s = 0
        oldest = last_used[0]
        for t in range(1, owner.shape[0]):
            if last_used[t] < oldest:
                oldest = last_used[t]
                s = t
        if owner[s] >= 0:
            slot_of[owner[s]] = -1
        owner[s] = i
        slot_of[i] = s
        rbf_row(X, i, inv, cache_rows[s])
    last_used[s] = clock
    return cache_rows[s]


@njit(cache=True, nogil=True)
def _smo_loop(X, alpha, G, C, inv, tol, max_iter, cache_rows, slot_of, owner, last_used, clock):
    m = X.shape[0]
    it = 0
    gap = np.inf
    while it < max_iter:
        i = -1
        j = -1
        g_min = np.inf
        g_max = -np.inf
        for t in range(m):
            if alpha[t] < C and G[t] < g_min:
                g_min = G[t]
                i = t
            if alpha[t] > 0.0 and G[t] > g_max:
                g_max = G[t]
                j = t
        if i < 0 or j < 0:
            return it, 0.0, clock
        gap = g_max - g_min
        if gap < tol:
            return it, gap, clock

        clock += 1
        Ki = _cached_row(X, i, inv, cache_rows, slot_of, owner, last_used, clock)
        clock += 1
        Kj = _cached_row(X, j, inv, cache_rows, slot_of, owner, last_used, clock)

        quad = 2.0 - 2.0 * Ki[j]
        if quad < TAU:
            quad = TAU
        delta = gap / quad

        room_i = C - alpha[i]
        if delta >= room_i and room_i <= alpha[j]:
            delta = room_i
            alpha[i] = C
            alpha[j] -= delta
        elif delta >= alpha[j]:
            delta = alpha[j]
            alpha[i] += delta
            alpha[j] = 0.0
        else:
            alpha[i] += delta
            alpha[j] -= delta

        for t in range(m):
            G[t] += delta * (Ki[t] - Kj[t])
        it += 1
    return it, gap, clock


def max_violation(alpha: np.ndarray, G: np.ndarray, C: float) -> float:
    up = alpha < C
    low = alpha > 0.0
    if not up.any() or not low.any():
        return 0.0
    return max(0.0, float(G[low].max() - G[up].min()))


def recover_rho(alpha: np.ndarray, G: np.ndarray, C: float) -> float:
    """Mean gradient over free coefficients, else the midpoint of the KKT interval"""
    free = (alpha > 0.0) & (alpha < C)
    if free.any():
        return float(G[free].mean())

    at_bound = alpha >= C
    at_zero = alpha <= 0.0
    lower = float(G[at_bound].max()) if at_bound.any() else None
    upper = float(G[at_zero].min()) if at_zero.any() else None
    if lower is None:
        return upper
    if upper is None:
        return lower
    return 0.5 * (lower + upper)


def initial_alpha(m: int, nu: float) -> np.ndarray:
    """floor(nu m) coefficients at C, the remainder on the next sample"""
    C = 1.0 / (nu * m)
    alpha = np.zeros(m)
    n_full = min(int(np.floor(nu * m)), m)
    alpha[:n_full] = C
    if n_full < m:
        alpha[n_full] = min(C, max(0.0, 1.0 - n_full * C))
    return alpha


@dataclass
class SolverResult:
    alpha: np.ndarray
    rho: float
    gradient: np.ndarray
    iterations: int
    max_violation: float
    upper_bound: float


def solve(X: np.ndarray, nu: float, sigma: float, tolerance: float = 1e-6,
          max_iterations: int = 10_000_000, cache_rows: int = 256) -> SolverResult:
    X = np.ascontiguousarray(X, dtype=np.float64)
    m = X.shape[0]
    if m < 2:
        raise DegenerateDataError(f"training needs at least 2 samples, got {m}")
    if not np.any(np.ptp(X, axis=0) > 0.0):
        raise DegenerateDataError("all training samples are identical")

    inv = 1.0 / (2.0 * sigma * sigma)
    C = 1.0 / (nu * m)
    alpha = initial_alpha(m, nu)
    G = kernel_weighted_sum(X, alpha, inv)

    slots = int(min(max(2, cache_rows), m))
    rows = np.empty((slots, m))
    slot_of = np.full(m, -1, dtype=np.int64)
    owner = np.full(slots, -1, dtype=np.int64)
    last_used = np.full(slots, -1, dtype=np.int64)
    clock = 0

    iterations = 0
    violation = max_violation(alpha, G, C)
    for pass_index in range(MAX_PASSES):
        done, _, clock = _smo_loop(X, alpha, G, C, inv, tolerance, max_iterations - iterations,
                                   rows, slot_of, owner, last_used, clock)
        iterations += done

        # incremental updates drift; certify on an exact gradient
        G = kernel_weighted_sum(X, alpha, inv)
        violation = max_violation(alpha, G, C)
        logger.debug(f"SMO pass {pass_index + 1}: updates={iterations}, exact violation={violation:.3e}")

        if violation <= tolerance:
            break
        if iterations >= max_iterations:
            raise ConvergenceError(violation, iterations, tolerance)
    else:
        raise ConvergenceError(violation, iterations, tolerance)

    return SolverResult(
        alpha=alpha,
        rho=recover_rho(alpha, G, C),
        gradient=G,
        iterations=iterations,
        max_violation=violation,
        upper_bound=C,
    )
