"""
RoM datasets and their CSV files

Frame CSV: `timestamp`, then seven columns per bone named
`<bone>.qw,<bone>.qx,<bone>.qy,<bone>.qz,<bone>.px,<bone>.py,<bone>.pz`.

Angle CSV: `timestamp`, one column per joint angle (names from DOF_NAMES, in
degrees), optional `gimbal` (bitmask: 1 shoulder, 2 elbow, 4 wrist) and
optional `provenance` (clinical | exploration | test).

Row numbers in schema errors count data rows from 1.
"""

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DimensionMismatchError, RejectedInputError, SchemaError
from .kinematics import (
    DOF_NAMES,
    JOINTS,
    BonePose,
    KinematicChain,
    Quaternion,
    Side,
    SkeletonFrame,
    extract_sequence,
    wrap_degrees,
)
from .logger import logger

FRAME_FIELDS = ("qw", "qx", "qy", "qz", "px", "py", "pz")
GIMBAL_BITS = {joint: 1 << i for i, joint in enumerate(JOINTS)}

# quaternions are renormalized on ingestion; larger deviations mean a broken export
INGEST_NORM_TOLERANCE = 1e-2

FLOAT_FORMAT = "%.17g"


class Provenance(str, Enum):
    CLINICAL = "clinical"
    EXPLORATION = "exploration"
    TEST = "test"


@dataclass(frozen=True)
class RomDataset:
    """Immutable set of joint vectors with per-sample provenance"""

    samples: np.ndarray  # (m, N) degrees
    provenance: Tuple[Provenance, ...]
    dofs: Tuple[int, ...]
    subject: str = ""
    arm: str = ""
    timestamps: Optional[np.ndarray] = None
    gimbal: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.samples.ndim != 2:
            raise RejectedInputError(f"samples must be a 2-D array, got shape {self.samples.shape}")
        m, n = self.samples.shape
        if len(self.provenance) != m:
            raise RejectedInputError(f"{len(self.provenance)} provenance labels for {m} samples")
        if len(self.dofs) != n:
            raise DimensionMismatchError(n, len(self.dofs), "dof index list")
        if not np.all(np.isfinite(self.samples)):
            raise RejectedInputError("samples must be finite")

    @classmethod
    def from_array(cls, samples, provenance: Provenance = Provenance.CLINICAL,
                   dofs: Optional[Sequence[int]] = None, **kwargs) -> "RomDataset":
        samples = np.ascontiguousarray(np.atleast_2d(np.asarray(samples, dtype=float)))
        if dofs is None:
            dofs = range(samples.shape[1])
        return cls(
            samples=samples,
            provenance=(Provenance(provenance),) * len(samples),
            dofs=tuple(int(d) for d in dofs),
            **kwargs,
        )

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    @property
    def dof_names(self) -> List[str]:
        return [DOF_NAMES[d] for d in self.dofs]

    def take(self, indices: Sequence[int]) -> "RomDataset":
        idx = np.asarray(indices, dtype=int)
        return replace(
            self,
            samples=np.ascontiguousarray(self.samples[idx]),
            provenance=tuple(self.provenance[i] for i in idx),
            timestamps=None if self.timestamps is None else self.timestamps[idx],
            gimbal=None if self.gimbal is None else self.gimbal[idx],
        )

    def select_dofs(self, dofs: Sequence[int]) -> "RomDataset":
        """Keep only the given joint angles (global DoF indices, 0-based)"""
        missing = [d for d in dofs if d not in self.dofs]
        if missing:
            raise RejectedInputError(f"dataset has no DoF {missing} (available: {list(self.dofs)})")
        if len(set(dofs)) != len(dofs):
            raise RejectedInputError(f"duplicate DoF indices in {list(dofs)}")
        columns = [self.dofs.index(d) for d in dofs]
        return replace(self, samples=np.ascontiguousarray(self.samples[:, columns]), dofs=tuple(dofs))

    def with_provenance(self, provenance: Provenance) -> "RomDataset":
        return replace(self, provenance=(Provenance(provenance),) * len(self))


@dataclass(frozen=True)
class DofRanges:
    minimum: np.ndarray
    maximum: np.ndarray
    mean: np.ndarray
    dofs: Tuple[int, ...] = field(default=())

    def to_dict(self) -> Dict:
        return {
            DOF_NAMES[d]: {"min": float(lo), "max": float(hi), "mean": float(mu)}
            for d, lo, hi, mu in zip(self.dofs, self.minimum, self.maximum, self.mean)
        }


def _read_csv(path: Union[str, Path]) -> pd.DataFrame:
    try:
        return pd.read_csv(path)
    except FileNotFoundError:
        raise
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SchemaError(f"{path}: unreadable CSV: {e}")


def _numeric_block(df: pd.DataFrame, columns: Sequence[str], path) -> np.ndarray:
    """Columns as float, rejecting text, NaN and inf with the first offending cell"""
    block = df[list(columns)].apply(pd.to_numeric, errors='coerce').to_numpy(dtype=float)
    bad = ~np.isfinite(block)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise SchemaError(f"{path}: non-finite or non-numeric value {df.iloc[row][columns[col]]!r}",
                          row=int(row) + 1, column=columns[col])
    return block


def load_frames(path: Union[str, Path]) -> List[SkeletonFrame]:
    df = _read_csv(path)
    if "timestamp" not in df.columns:
        raise SchemaError(f"{path}: missing column", column="timestamp")

    bones: Dict[str, List[str]] = {}
    for column in df.columns:
        if column == "timestamp":
            continue
        bone, sep, suffix = column.rpartition(".")
        if not sep or suffix not in FRAME_FIELDS:
            raise SchemaError(f"{path}: unexpected column", column=column)
        bones.setdefault(bone, [])
    if not bones:
        raise SchemaError(f"{path}: no bone columns")

    columns = ["timestamp"]
    for bone in bones:
        bones[bone] = [f"{bone}.{suffix}" for suffix in FRAME_FIELDS]
        for column in bones[bone]:
            if column not in df.columns:
                raise SchemaError(f"{path}: missing column", column=column)
        columns.extend(bones[bone])

    block = _numeric_block(df, columns, path)
    timestamps = block[:, 0]

    poses: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
    for b, bone in enumerate(bones):
        values = block[:, 1 + 7 * b:8 + 7 * b]
        quats = values[:, :4]
        norms = np.linalg.norm(quats, axis=1)
        off = np.abs(norms - 1.0) > INGEST_NORM_TOLERANCE
        if off.any():
            row = int(np.argmax(off))
            raise SchemaError(f"{path}: quaternion norm {norms[row]:.4f} is not close to 1",
                              row=row + 1, column=f"{bone}.qw")
        poses[bone] = (quats / norms[:, None], values[:, 4:])

    frames = []
    for t in range(len(df)):
        frames.append(SkeletonFrame(
            timestamp=float(timestamps[t]),
            bones={
                bone: BonePose(position=positions[t].copy(), orientation=Quaternion.from_array(quats[t]))
                for bone, (quats, positions) in poses.items()
            },
        ))
    logger.debug(f"Loaded {len(frames)} frames with {len(bones)} bones from {path}")
    return frames


def save_frames(frames: Sequence[SkeletonFrame], path: Union[str, Path]) -> Path:
    if not frames:
        raise RejectedInputError("no frames to write")
    bones = list(frames[0].bones)
    rows = []
    for frame in frames:
        row = {"timestamp": frame.timestamp}
        for bone in bones:
            pose = frame.bones[bone]
            values = list(pose.orientation.as_array()) + list(np.asarray(pose.position, dtype=float))
            row.update({f"{bone}.{suffix}": v for suffix, v in zip(FRAME_FIELDS, values)})
        rows.append(row)
    pd.DataFrame(rows).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def load_angles(path: Union[str, Path], provenance: Provenance = Provenance.CLINICAL,
                subject: str = "", arm: str = "") -> RomDataset:
    df = _read_csv(path)
    if "timestamp" not in df.columns:
        raise SchemaError(f"{path}: missing column", column="timestamp")

    angle_columns = []
    for column in df.columns:
        if column in ("timestamp", "gimbal", "provenance"):
            continue
        if column not in DOF_NAMES:
            raise SchemaError(f"{path}: unknown angle column (expected one of {', '.join(DOF_NAMES)})",
                              column=column)
        angle_columns.append(column)
    if not angle_columns:
        raise SchemaError(f"{path}: no joint-angle columns")

    block = _numeric_block(df, ["timestamp"] + angle_columns, path)

    gimbal = None
    if "gimbal" in df.columns:
        gimbal = _numeric_block(df, ["gimbal"], path)[:, 0].astype(int)

    if "provenance" in df.columns:
        labels = []
        for row, value in enumerate(df["provenance"]):
            try:
                labels.append(Provenance(str(value).strip()))
            except ValueError:
                raise SchemaError(f"{path}: unknown provenance {value!r}", row=row + 1, column="provenance")
        labels = tuple(labels)
    else:
        labels = (Provenance(provenance),) * len(df)

    return RomDataset(
        samples=np.ascontiguousarray(wrap_degrees(block[:, 1:]).reshape(len(df), len(angle_columns))),
        provenance=labels,
        dofs=tuple(DOF_NAMES.index(c) for c in angle_columns),
        subject=subject,
        arm=arm,
        timestamps=block[:, 0],
        gimbal=gimbal,
    )


def save_angles(data: RomDataset, path: Union[str, Path]) -> Path:
    df = pd.DataFrame({
        "timestamp": data.timestamps if data.timestamps is not None else np.arange(len(data), dtype=float)
    })
    for i, name in enumerate(data.dof_names):
        df[name] = data.samples[:, i]
    if data.gimbal is not None:
        df["gimbal"] = data.gimbal.astype(int)
    df["provenance"] = [p.value for p in data.provenance]
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def from_frames(frames: Sequence[SkeletonFrame], chain: KinematicChain, side: Union[Side, str],
                provenance: Provenance = Provenance.CLINICAL, subject: str = "") -> RomDataset:
    """Extract the 7-DoF joint vectors of one arm from a recording"""
    side = Side(side)
    vectors = extract_sequence(frames, chain, side)
    samples = np.array([v.q for v in vectors]).reshape(len(vectors), len(DOF_NAMES))
    gimbal = np.array([sum(GIMBAL_BITS[j] for j in v.gimbal) for v in vectors], dtype=int)
    if gimbal.any():
        logger.warning(f"{int(np.count_nonzero(gimbal))} of {len(frames)} frames are near gimbal lock")
    return RomDataset(
        samples=np.ascontiguousarray(samples),
        provenance=(Provenance(provenance),) * len(vectors),
        dofs=tuple(range(len(DOF_NAMES))),
        subject=subject,
        arm=side.value,
        timestamps=np.array([f.timestamp for f in frames], dtype=float),
        gimbal=gimbal,
    )


def _concat_optional(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if a is None or b is None:
        return None
    return np.concatenate([a, b])


def assemble(clinical: RomDataset, exploration: RomDataset) -> RomDataset:
    """Union of clinical and exploration samples, provenance kept per sample"""
    if len(clinical) == 0:
        return exploration
    if len(exploration) == 0:
        return clinical
    if clinical.dimension != exploration.dimension:
        raise DimensionMismatchError(clinical.dimension, exploration.dimension, "exploration dataset")
    if clinical.dofs != exploration.dofs:
        raise RejectedInputError(f"DoF sets differ: {list(clinical.dofs)} vs {list(exploration.dofs)}")

    return RomDataset(
        samples=np.ascontiguousarray(np.vstack([clinical.samples, exploration.samples])),
        provenance=clinical.provenance + exploration.provenance,
        dofs=clinical.dofs,
        subject=clinical.subject or exploration.subject,
        arm=clinical.arm or exploration.arm,
        timestamps=_concat_optional(clinical.timestamps, exploration.timestamps),
        gimbal=_concat_optional(clinical.gimbal, exploration.gimbal),
    )


def assemble_all(datasets: Iterable[RomDataset]) -> RomDataset:
    result = None
    for data in datasets:
        result = data if result is None else assemble(result, data)
    if result is None:
        raise RejectedInputError("nothing to assemble")
    return result


def _farthest_point_indices(X: np.ndarray, target: int) -> np.ndarray:
    chosen = np.empty(target, dtype=int)
    chosen[0] = 0
    nearest = np.sum((X - X[0]) ** 2, axis=1)
    for k in range(1, target):
        chosen[k] = int(np.argmax(nearest))
        nearest = np.minimum(nearest, np.sum((X - X[chosen[k]]) ** 2, axis=1))
    return np.sort(chosen)


def subsample(data: RomDataset, target: int, method: str = "farthest") -> RomDataset:
    """
    Reduce to min(target, m) samples.

    method "stride" keeps every (m // target)-th sample from the first;
    "farthest" is greedy farthest-point sampling seeded with the first sample.
    """
    if target < 2:
        raise RejectedInputError(f"subsample target must be >= 2, got {target}")
    if method not in ("stride", "farthest"):
        raise RejectedInputError(f"unknown subsample method {method!r}")
    m = len(data)
    if target >= m:
        return data

    if method == "stride":
        indices = np.arange(0, m, m // target)[:target]
    else:
        indices = _farthest_point_indices(data.samples, target)
    logger.debug(f"Subsampled {m} -> {len(indices)} samples ({method})")
    return data.take(indices)


def dof_ranges(data: RomDataset) -> DofRanges:
    if len(data) == 0:
        raise RejectedInputError("dof_ranges needs a nonempty dataset")
    return DofRanges(
        minimum=data.samples.min(axis=0),
        maximum=data.samples.max(axis=0),
        mean=data.samples.mean(axis=0),
        dofs=data.dofs,
    )


def load_manifest(path: Union[str, Path]) -> RomDataset:
    """
    Assemble the dataset described by a manifest JSON:
    {"subject": ..., "arm": ..., "sources": [{"path": ..., "provenance": ...}]}
    Source paths are relative to the manifest's directory.
    """
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding='utf-8'))
        subject = str(manifest.get("subject", ""))
        arm = str(manifest.get("arm", ""))
        sources = manifest["sources"]
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON: {e}")
    except (KeyError, AttributeError):
        raise SchemaError(f"{path}: manifest needs a 'sources' list", column="sources")
    if not sources:
        raise SchemaError(f"{path}: manifest lists no sources", column="sources")

    datasets = []
    for i, source in enumerate(sources):
        try:
            source_path = path.parent / source["path"]
            provenance = Provenance(source.get("provenance", Provenance.CLINICAL.value))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"{path}: bad source entry: {e}", row=i + 1, column="sources")
        datasets.append(load_angles(source_path, provenance=provenance, subject=subject, arm=arm))

    clinical = [d for d in datasets if d.provenance and d.provenance[0] == Provenance.CLINICAL]
    others = [d for d in datasets if not (d.provenance and d.provenance[0] == Provenance.CLINICAL)]
    return assemble_all(clinical + others)
