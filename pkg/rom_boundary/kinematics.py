"""
Joint-angle extraction

Turns global bone orientations (unit quaternions, scalar first) into the
7-DoF arm joint vector through relative rotations and the ZXY Euler
sequence. All angles are degrees.

Canonical joint table (right arm; the left arm negates x and y, which is the
mirror image about the sagittal plane):

    joint     proximal -> distal      z           x           y
    shoulder  chest -> upper arm      q2 flex     q1 abd      q3 rotation
    elbow     upper arm -> forearm    q4 flex     (carrying)  q5 pronation
    wrist     forearm -> hand         q6 flex     q7 dev      (twist)
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, RejectedInputError, SchemaError

RotationMatrix = NDArray[np.float64]

UNIT_TOLERANCE = 1e-6
ROTATION_TOLERANCE = 1e-6
GIMBAL_THRESHOLD = math.sin(math.radians(1.0))

DOF_NAMES = (
    "shoulder_abduction",
    "shoulder_flexion",
    "shoulder_rotation",
    "elbow_flexion",
    "elbow_pronation",
    "wrist_flexion",
    "wrist_deviation",
)

JOINTS = ("shoulder", "elbow", "wrist")

# DoF index fed by each ZXY angle, None when the angle is not a DoF
JOINT_TABLE: Dict[str, Tuple[Optional[int], Optional[int], Optional[int]]] = {
    "shoulder": (1, 0, 2),
    "elbow": (3, None, 4),
    "wrist": (5, 6, None),
}


class Side(str, Enum):
    RIGHT = "right"
    LEFT = "left"


SIDE_SIGNS: Dict[Side, Tuple[float, float, float]] = {
    Side.RIGHT: (1.0, 1.0, 1.0),
    Side.LEFT: (1.0, -1.0, -1.0),
}


def wrap_degrees(angles):
    """Wrap angles to (-180, 180]"""
    a = np.asarray(angles, dtype=float)
    wrapped = np.mod(a + 180.0, 360.0) - 180.0
    wrapped = np.where(wrapped == -180.0, 180.0, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion, scalar first"""

    w: float
    x: float
    y: float
    z: float

    @classmethod
    def identity(cls) -> "Quaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Quaternion":
        w, x, y, z = (float(v) for v in values)
        return cls(w, x, y, z)

    @classmethod
    def from_rotmat(cls, R: RotationMatrix) -> "Quaternion":
        """Shepperd's method, returns the representative with w >= 0"""
        m00, m01, m02 = R[0]
        m10, m11, m12 = R[1]
        m20, m21, m22 = R[2]

        tr = m00 + m11 + m22
        if tr > 0.0:
            s = 0.5 / math.sqrt(tr + 1.0)
            q = (0.25 / s, (m21 - m12) * s, (m02 - m20) * s, (m10 - m01) * s)
        elif m00 > m11 and m00 > m22:
            s = 2.0 * math.sqrt(1.0 + m00 - m11 - m22)
            q = ((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s)
        elif m11 > m22:
            s = 2.0 * math.sqrt(1.0 + m11 - m00 - m22)
            q = ((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s)
        else:
            s = 2.0 * math.sqrt(1.0 + m22 - m00 - m11)
            q = ((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s)

        quat = cls.from_array(q).normalized()
        return -quat if quat.w < 0 else quat

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.w, self.x, self.y, self.z], dtype=float)

    @property
    def norm(self) -> float:
        return math.sqrt(self.w ** 2 + self.x ** 2 + self.y ** 2 + self.z ** 2)

    def normalized(self) -> "Quaternion":
        n = self.norm
        if not math.isfinite(n) or n == 0.0:
            raise RejectedInputError(f"cannot normalize quaternion {self}")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def dot(self, other: "Quaternion") -> float:
        return self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.w, -self.x, -self.y, -self.z)


def _require_unit(q: Quaternion):
    if not abs(q.norm - 1.0) <= UNIT_TOLERANCE:
        raise RejectedInputError(f"quaternion norm {q.norm:.9f} deviates from 1 by more than {UNIT_TOLERANCE}")


def _require_rotation(R, name: str) -> RotationMatrix:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise RejectedInputError(f"{name} must be a finite 3x3 matrix")
    if np.max(np.abs(R.T @ R - np.eye(3))) > ROTATION_TOLERANCE:
        raise RejectedInputError(f"{name} is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > ROTATION_TOLERANCE:
        raise RejectedInputError(f"{name} is not a proper rotation (det != 1)")
    return R


def hemisphere_align(frames: Sequence[Quaternion]) -> List[Quaternion]:
    """Flip signs so consecutive quaternions of one bone have a non-negative dot"""
    if len(frames) == 0:
        raise RejectedInputError("hemisphere_align needs at least one quaternion")

    for q in frames:
        _require_unit(q)

    aligned = [frames[0]]
    for q in frames[1:]:
        aligned.append(-q if q.dot(aligned[-1]) < 0.0 else q)
    return aligned


def quat_to_rotmat(q: Quaternion) -> RotationMatrix:
    _require_unit(q)
    w, x, y, z = q.normalized().as_array()
    return np.array([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])


def relative_rotation(R_prox: RotationMatrix, R_dist: RotationMatrix) -> RotationMatrix:
    """Distal frame expressed in the proximal frame: R_prox^T R_dist"""
    R_prox = _require_rotation(R_prox, "R_prox")
    R_dist = _require_rotation(R_dist, "R_dist")
    return R_prox.T @ R_dist


def _rot_x(deg: float) -> RotationMatrix:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(deg: float) -> RotationMatrix:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(deg: float) -> RotationMatrix:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def compose_zxy(z: float, x: float, y: float) -> RotationMatrix:
    """Rz(z) Rx(x) Ry(y)"""
    return _rot_z(z) @ _rot_x(x) @ _rot_y(y)


@dataclass(frozen=True)
class EulerZXY:
    z: float
    x: float
    y: float
    gimbal: bool = False


def rotmat_to_euler_zxy(R: RotationMatrix, previous_y: Optional[float] = None) -> EulerZXY:
    """
    Decompose R = Rz(z) Rx(x) Ry(y), x on the [-90, 90] branch.

    Near gimbal lock (|cos x| < sin 1 deg) y is held at previous_y (0 without
    history), z absorbs the remaining rotation and the result is flagged.
    """
    R = _require_rotation(R, "R")

    cx = math.hypot(R[2, 0], R[2, 2])
    x = math.degrees(math.atan2(R[2, 1], cx))

    if cx < GIMBAL_THRESHOLD:
        y = 0.0 if previous_y is None else float(previous_y)
        sx = 1.0 if R[2, 1] >= 0.0 else -1.0
        z = math.degrees(math.atan2(R[1, 0], R[0, 0])) - sx * y
        return EulerZXY(wrap_degrees(z), x, wrap_degrees(y), gimbal=True)

    z = math.degrees(math.atan2(-R[0, 1], R[1, 1]))
    y = math.degrees(math.atan2(-R[2, 0], R[2, 2]))
    return EulerZXY(wrap_degrees(z), x, wrap_degrees(y))


@dataclass(frozen=True)
class BonePose:
    position: NDArray[np.float64]  # (3,) meters, global frame
    orientation: Quaternion


@dataclass(frozen=True)
class SkeletonFrame:
    timestamp: float
    bones: Mapping[str, BonePose]


@dataclass(frozen=True)
class JointVector:
    """Joint angles in degrees plus the per-joint Euler decomposition"""

    q: NDArray[np.float64]
    gimbal: Tuple[str, ...] = ()
    euler: Mapping[str, EulerZXY] = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        return bool(self.gimbal)


@dataclass(frozen=True)
class KinematicChain:
    """
    Upper-body chain per side: (bone, parent) pairs ordered root first
    (pelvis, thorax, upper arm, forearm, hand) and the zero-pose orientation
    of every bone in global coordinates.
    """

    links: Mapping[Side, Tuple[Tuple[str, Optional[str]], ...]]
    rest: Mapping[str, Quaternion]

    def __post_init__(self):
        for side, links in self.links.items():
            if len(links) != 5:
                raise ConfigError(f"{side.value} chain needs 5 links (pelvis..hand), got {len(links)}")
            seen = set()
            for bone, parent in links:
                if bone in seen:
                    raise ConfigError(f"bone {bone!r} appears twice in the {side.value} chain")
                if parent is not None and parent not in seen:
                    raise ConfigError(f"parent {parent!r} of {bone!r} must precede it")
                seen.add(bone)
            for (bone, _), (_, parent) in zip(links[:-1], links[1:]):
                if parent != bone:
                    raise ConfigError(f"{side.value} chain is not a single path at {bone!r}")

    @classmethod
    def default(cls) -> "KinematicChain":
        links = {}
        for side in Side:
            links[side] = (
                ("hip", None),
                ("chest", "hip"),
                (f"{side.value}_upper_arm", "chest"),
                (f"{side.value}_forearm", f"{side.value}_upper_arm"),
                (f"{side.value}_hand", f"{side.value}_forearm"),
            )
        return cls(links=links, rest={})

    def bones(self, side: Side) -> List[str]:
        return [bone for bone, _ in self.links[Side(side)]]

    def joints(self, side: Side) -> Dict[str, Tuple[str, str]]:
        """(proximal, distal) bone names for shoulder, elbow and wrist"""
        links = self.links[Side(side)]
        return {joint: (links[i][1], links[i][0]) for joint, i in zip(JOINTS, (2, 3, 4))}

    def rest_matrix(self, bone: str) -> RotationMatrix:
        return quat_to_rotmat(self.rest.get(bone, Quaternion.identity()))

    def to_dict(self) -> Dict:
        return {
            "links": {side.value: [[b, p] for b, p in links] for side, links in self.links.items()},
            "rest": {bone: list(q.as_array()) for bone, q in self.rest.items()},
        }


def load_chain(path: Union[str, Path]) -> KinematicChain:
    """Read a chain config JSON; missing rest entries mean identity"""
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"chain config {path} is not valid JSON: {e}")

    try:
        links = {
            Side(side): tuple((str(b), None if p is None else str(p)) for b, p in pairs)
            for side, pairs in data["links"].items()
        }
        rest = {bone: Quaternion.from_array(q).normalized() for bone, q in data.get("rest", {}).items()}
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"chain config {path} is malformed: {e}")
    return KinematicChain(links=links, rest=rest)


def _anatomical_frames(frame: SkeletonFrame, chain: KinematicChain, side: Side) -> Dict[str, RotationMatrix]:
    frames = {}
    for bone in chain.bones(side):
        pose = frame.bones.get(bone)
        if pose is None:
            raise SchemaError(f"frame at t={frame.timestamp} is missing bone {bone!r}", column=bone)
        frames[bone] = quat_to_rotmat(pose.orientation) @ chain.rest_matrix(bone).T
    return frames


def extract_joint_angles(frame: SkeletonFrame, chain: KinematicChain, side: Union[Side, str],
                         previous: Optional[JointVector] = None) -> JointVector:
    """Joint vector of one arm; pass the previous frame's result for gimbal continuity"""
    side = Side(side)
    frames = _anatomical_frames(frame, chain, side)
    signs = SIDE_SIGNS[side]

    q = np.zeros(len(DOF_NAMES))
    euler = {}
    flagged = []
    for joint, (prox, dist) in chain.joints(side).items():
        previous_y = previous.euler[joint].y if previous is not None and joint in previous.euler else None
        angles = rotmat_to_euler_zxy(relative_rotation(frames[prox], frames[dist]), previous_y)
        euler[joint] = angles
        if angles.gimbal:
            flagged.append(joint)
        for dof, sign, value in zip(JOINT_TABLE[joint], signs, (angles.z, angles.x, angles.y)):
            if dof is not None:
                q[dof] = sign * value

    return JointVector(q=wrap_degrees(q), gimbal=tuple(flagged), euler=euler)


def pose_frame(q: Sequence[float], chain: KinematicChain, side: Union[Side, str],
               root: Optional[RotationMatrix] = None, timestamp: float = 0.0,
               segment_length: float = 0.3) -> SkeletonFrame:
    """Forward-compose a frame whose extracted joint vector is q"""
    side = Side(side)
    q = np.asarray(q, dtype=float)
    if q.shape != (len(DOF_NAMES),):
        raise RejectedInputError(f"pose_frame needs a {len(DOF_NAMES)}-vector, got shape {q.shape}")
    A_root = np.eye(3) if root is None else _require_rotation(root, "root")
    signs = SIDE_SIGNS[side]

    anatomical = {}
    positions = {}
    links = chain.links[side]
    for bone, parent in links[:2]:
        anatomical[bone] = A_root
        positions[bone] = np.zeros(3) if parent is None else positions[parent] + A_root @ [0.0, segment_length, 0.0]

    for joint, (prox, dist) in chain.joints(side).items():
        zxy = [0.0 if dof is None else sign * q[dof] for dof, sign in zip(JOINT_TABLE[joint], signs)]
        anatomical[dist] = anatomical[prox] @ compose_zxy(*zxy)
        positions[dist] = positions[prox] + anatomical[prox] @ [0.0, -segment_length, 0.0]

    bones = {
        bone: BonePose(position=positions[bone],
                       orientation=Quaternion.from_rotmat(anatomical[bone] @ chain.rest_matrix(bone)))
        for bone in anatomical
    }
    return SkeletonFrame(timestamp=timestamp, bones=bones)


def extract_sequence(frames: Sequence[SkeletonFrame], chain: KinematicChain,
                     side: Union[Side, str]) -> List[JointVector]:
    """Hemisphere-align every bone over time, then extract frame by frame"""
    side = Side(side)
    if not frames:
        return []

    aligned: Dict[str, List[Quaternion]] = {}
    for bone in chain.bones(side):
        series = []
        for frame in frames:
            pose = frame.bones.get(bone)
            if pose is None:
                raise SchemaError(f"frame at t={frame.timestamp} is missing bone {bone!r}", column=bone)
            series.append(pose.orientation)
        aligned[bone] = hemisphere_align(series)

    results: List[JointVector] = []
    previous = None
    for t, frame in enumerate(frames):
        bones = dict(frame.bones)
        for bone, series in aligned.items():
            bones[bone] = BonePose(position=frame.bones[bone].position, orientation=series[t])
        previous = extract_joint_angles(SkeletonFrame(frame.timestamp, bones), chain, side, previous)
        results.append(previous)
    return results
