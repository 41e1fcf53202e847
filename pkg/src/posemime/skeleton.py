"""14-part body model, pose normalization, and manifold encoding.

A raw frame holds keypoints in image or world units. Normalization removes
the camera frame: positions become offsets from the spine shoulder divided
by the spine bone length (spine shoulder to hip midpoint), and each bone is
reduced to its unit direction. The result is invariant under global
translation and uniform positive scaling of the input.

2D input keeps whatever vertical convention the upstream estimator used
(typically y growing downward); nothing here flips axes.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBone, DegenerateSpine, MissingKeypoint
from .manifold import Euclidean, ManifoldPoint, Product, Sphere

DETECTION_THRESHOLD = 0.1


class BodyPart(enum.IntEnum):
    Head = 0
    SpineShoulder = 1
    RShoulder = 2
    RElbow = 3
    RWrist = 4
    LShoulder = 5
    LElbow = 6
    LWrist = 7
    RHip = 8
    RKnee = 9
    RAnkle = 10
    LHip = 11
    LKnee = 12
    LAnkle = 13


BODY_PART_COUNT = 14

# Tree rooted at the spine shoulder; order is fixed and used everywhere a
# per-bone array appears (directions, wire payloads, rendering).
BONE_EDGES = (
    (BodyPart.SpineShoulder, BodyPart.Head),
    (BodyPart.SpineShoulder, BodyPart.RShoulder),
    (BodyPart.SpineShoulder, BodyPart.LShoulder),
    (BodyPart.SpineShoulder, BodyPart.RHip),
    (BodyPart.SpineShoulder, BodyPart.LHip),
    (BodyPart.RShoulder, BodyPart.RElbow),
    (BodyPart.RElbow, BodyPart.RWrist),
    (BodyPart.LShoulder, BodyPart.LElbow),
    (BodyPart.LElbow, BodyPart.LWrist),
    (BodyPart.RHip, BodyPart.RKnee),
    (BodyPart.RKnee, BodyPart.RAnkle),
    (BodyPart.LHip, BodyPart.LKnee),
    (BodyPart.LKnee, BodyPart.LAnkle),
)

# Sanity: every part except the root has exactly one parent.
assert len(BONE_EDGES) == 13
assert {child for _, child in BONE_EDGES} == set(BodyPart) - {BodyPart.SpineShoulder}

# Display-only bone lengths in spine-length units, used to rebuild joint
# positions from a direction-encoded pose for rendering.
DISPLAY_BONE_LENGTHS = (0.35, 0.40, 0.40, 1.05, 1.05, 0.55, 0.50, 0.55, 0.50, 0.95, 0.90, 0.95, 0.90)

# Ordinals of the 13 non-root parts, the storage order of relative positions.
RELATIVE_PARTS = tuple(p for p in BodyPart if p != BodyPart.SpineShoulder)


@dataclass
class Keypoint:
    position: np.ndarray
    confidence: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        if self.position.shape not in ((2,), (3,)):
            raise ValueError(f"keypoint must be 2D or 3D, got shape {self.position.shape}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0,1], got {self.confidence}")

    def __eq__(self, other):
        return (
            isinstance(other, Keypoint)
            and self.confidence == other.confidence
            and np.array_equal(self.position, other.position)
        )


@dataclass
class Body14Frame:
    """One timestamped skeleton observation; keypoints indexed by BodyPart."""

    timestamp: float
    keypoints: tuple

    def __post_init__(self):
        self.keypoints = tuple(self.keypoints)
        if len(self.keypoints) != BODY_PART_COUNT:
            raise ValueError(f"expected {BODY_PART_COUNT} keypoints, got {len(self.keypoints)}")
        if self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")
        dims = {kp.position.shape[0] for kp in self.keypoints if kp is not None}
        if len(dims) > 1:
            raise ValueError(f"mixed keypoint dimensions: {sorted(dims)}")

    @property
    def dimension(self):
        for kp in self.keypoints:
            if kp is not None:
                return kp.position.shape[0]
        return None

    def is_detected(self, part, threshold=DETECTION_THRESHOLD):
        kp = self.keypoints[part]
        return kp is not None and kp.confidence >= threshold

    def detected_count(self, threshold=DETECTION_THRESHOLD):
        return sum(1 for p in BodyPart if self.is_detected(p, threshold))


@dataclass
class NormalizedPose:
    """Translation/scale-free pose: 13 relative positions + 13 bone directions."""

    relative_positions: np.ndarray  # (13, d), BodyPart ordinal order minus the root
    bone_directions: np.ndarray  # (13, d), BONE_EDGES order, unit rows
    spine_length: float  # in input units
    timestamp: float


class EncodingKind(enum.Enum):
    DIRECTIONS = "directions"
    POSITIONS = "positions"


@dataclass(frozen=True)
class PoseEncoding:
    kind: EncodingKind
    dimension: int = 2

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError("keypoint dimension must be 2 or 3")

    def pose_manifold(self):
        if self.kind is EncodingKind.DIRECTIONS:
            return Product([Sphere(self.dimension - 1)] * 13)
        return Euclidean(13 * self.dimension)

    def to_json(self):
        return {"kind": self.kind.value, "dimension": self.dimension}

    @classmethod
    def from_json(cls, obj):
        return cls(EncodingKind(obj["kind"]), int(obj["dimension"]))


def normalize_frame(frame, threshold=DETECTION_THRESHOLD):
    """Spine-relative, spine-length-scaled pose with unit bone directions.

    Requires all 14 parts detected: both encodings consume every joint.
    """
    for part in (BodyPart.SpineShoulder, BodyPart.RHip, BodyPart.LHip):
        if not frame.is_detected(part, threshold):
            raise MissingKeypoint(part)
    for part in BodyPart:
        if not frame.is_detected(part, threshold):
            raise MissingKeypoint(part)

    pos = np.stack([frame.keypoints[p].position for p in BodyPart])
    scale = float(np.abs(pos).max())
    origin = pos[BodyPart.SpineShoulder]
    hip_mid = (pos[BodyPart.RHip] + pos[BodyPart.LHip]) / 2.0
    spine = float(np.linalg.norm(origin - hip_mid))
    if spine <= 1e-9 * scale or spine == 0.0:
        raise DegenerateSpine(f"spine length {spine:.3e} at coordinate scale {scale:.3e}")

    rel = (pos[list(RELATIVE_PARTS)] - origin) / spine

    dirs = np.empty((13, pos.shape[1]))
    for i, (parent, child) in enumerate(BONE_EDGES):
        bone = pos[child] - pos[parent]
        length = float(np.linalg.norm(bone))
        if length <= 1e-9 * scale:
            raise DegenerateBone((parent, child))
        dirs[i] = bone / length

    return NormalizedPose(
        relative_positions=rel,
        bone_directions=dirs,
        spine_length=spine,
        timestamp=frame.timestamp,
    )


def encode_pose(pose, encoding):
    """Manifold point for a normalized pose.

    Directions: one point per bone on S^(d-1), concatenated in BONE_EDGES
    order. Positions: the 13 relative-position vectors flattened in BodyPart
    ordinal order.
    """
    d = pose.bone_directions.shape[1]
    if d != encoding.dimension:
        raise ValueError(f"pose is {d}D but encoding expects {encoding.dimension}D")
    if encoding.kind is EncodingKind.DIRECTIONS:
        norms = np.linalg.norm(pose.bone_directions, axis=1)
        bad = np.nonzero(np.abs(norms - 1.0) > 1e-9)[0]
        if bad.size:
            raise DegenerateBone(BONE_EDGES[int(bad[0])])
        coords = pose.bone_directions.reshape(-1)
    else:
        coords = pose.relative_positions.reshape(-1)
    return ManifoldPoint(encoding.pose_manifold(), coords)


def encode_sequence(frames, encoding, threshold=DETECTION_THRESHOLD):
    """(timestamp, PosePoint) pairs for a list of complete frames."""
    return [
        (f.timestamp, encode_pose(normalize_frame(f, threshold), encoding)) for f in frames
    ]


def pose_point_to_joints(point, encoding):
    """(14, d) joint positions in spine-length units, for display only.

    The spine shoulder sits at the origin. Direction encodings are fleshed
    out with the canonical DISPLAY_BONE_LENGTHS template.
    """
    d = encoding.dimension
    joints = np.zeros((BODY_PART_COUNT, d))
    if encoding.kind is EncodingKind.POSITIONS:
        rel = point.coords.reshape(13, d)
        for i, part in enumerate(RELATIVE_PARTS):
            joints[part] = rel[i]
        return joints
    dirs = point.coords.reshape(13, d)
    for i, (parent, child) in enumerate(BONE_EDGES):
        joints[child] = joints[parent] + DISPLAY_BONE_LENGTHS[i] * dirs[i]
    return joints
