"""Per-frame relational features between the two object boxes and the hand.

Real-valued features: size, speed (offset magnitude), normalised overlap,
offset distance, offset angle, centre distance.  Binary features: present,
moving, touching, contained, centre-on-top / centre-underneath, and the three
relative-movement tests (move-with-hand, hand-move-relative,
object-move-relative).  Offsets compare the current frame against the
immediately preceding annotated frame; the first frame of a track, and any
frame where an entity was absent in the previous frame, yield a zero offset.

All thresholds live in :class:`RelationConfig` so they can be overridden from
configuration files; the 0.1 overlap normaliser is a named constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, NamedTuple

from .errors import ConfigError, ContractError
from .tracks import BoundingBox, FrameAnnotation, VideoTrack

__all__ = [
    "OVERLAP_NORMALISER",
    "RelationConfig",
    "FrameRelations",
    "AngleResult",
    "size",
    "overlap_area",
    "overlap_normalised",
    "edge_gap",
    "centre_dist",
    "offset_between",
    "offset",
    "offset_dist",
    "offset_angle",
    "frame_relations",
    "binary_relations",
    "relation_keys",
    "feature_key",
    "feature_kind",
    "validate_feature",
    "ENTITIES",
]

# Denominator constant from the normalised-overlap definition:
# overlap
# = (x overlap * y overlap) / (OVERLAP_NORMALISER * size of the smaller box).
OVERLAP_NORMALISER = 0.1

ENTITIES = ("object1", "object2", "hand")
_ENTITY_RANK = {e: i for i, e in enumerate(ENTITIES)}


@dataclass(frozen=True)
class RelationConfig:
    """Pixel thresholds for the binary relations.

    touch_tol: max gap between nearest edges still counted as touching.
    containment_fraction: min overlap_area/area(inner) for containment.
    move_threshold: min offset magnitude (px/frame) to count as moving.
    move_with_hand_tol: max offset difference for moving together, and min
        offset difference for moving relative to one another.
    """

    touch_tol: float = 5.0
    containment_fraction: float = 0.9
    move_threshold: float = 3.0
    move_with_hand_tol: float = 4.0

    def __post_init__(self) -> None:
        if self.touch_tol < 0 or self.move_threshold < 0 or self.move_with_hand_tol < 0:
            raise ConfigError("relation thresholds must be non-negative")
        if not 0.0 < self.containment_fraction <= 1.0:
            raise ConfigError("containment_fraction must lie in (0, 1]")

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> "RelationConfig":
        unknown = set(data) - {
            "touch_tol",
            "containment_fraction",
            "move_threshold",
            "move_with_hand_tol",
        }
        if unknown:
            raise ConfigError(f"unknown threshold fields: {sorted(unknown)}")
        return replace(cls(), **dict(data))


DEFAULT_CONFIG = RelationConfig()


class AngleResult(NamedTuple):
    radians: float
    stationary: bool


def size(box: BoundingBox) -> float:
    """Box area (width times height)."""
    return box.area


def overlap_area(b1: BoundingBox, b2: BoundingBox) -> float:
    xo = max(0.0, min(b1.x2, b2.x2) - max(b1.x, b2.x))
    yo = max(0.0, min(b1.y2, b2.y2) - max(b1.y, b2.y))
    return xo * yo


def overlap_normalised(b1: BoundingBox, b2: BoundingBox) -> float:
    """Overlap area divided by ``OVERLAP_NORMALISER`` times the smaller area.

    Returns 0.0 when the denominator vanishes: the smaller box has zero area
    (its overlap is zero too) or the scaled area underflows to zero.
    """
    denominator = OVERLAP_NORMALISER * min(size(b1), size(b2))
    if denominator == 0.0:
        return 0.0
    return overlap_area(b1, b2) / denominator


def edge_gap(b1: BoundingBox, b2: BoundingBox) -> float:
    """Distance between nearest edges; 0.0 when the boxes overlap."""
    dx = max(b1.x - b2.x2, b2.x - b1.x2, 0.0)
    dy = max(b1.y - b2.y2, b2.y - b1.y2, 0.0)
    return math.hypot(dx, dy)


def centre_dist(b1: BoundingBox, b2: BoundingBox) -> float:
    (x1, y1), (x2, y2) = b1.centre, b2.centre
    return math.hypot(x1 - x2, y1 - y2)


def offset_between(current: BoundingBox, previous: BoundingBox) -> tuple[float, float]:
    (cx, cy), (px, py) = current.centre, previous.centre
    return (cx - px, cy - py)


def offset(track: VideoTrack, entity: str, frame_index: int) -> tuple[float, float]:
    """Centre displacement of ``entity`` since the previous annotated frame.

    Zero at the first frame and after an absence.  Raises
    :class:`ContractError` when the entity is absent at ``frame_index``.
    """
    frame = track.frames[frame_index]
    box = frame.box(entity)
    if box is None:
        raise ContractError(
            f"video {track.video_id!r}: {entity} absent at frame "
            f"{frame.frame_index}"
        )
    if frame_index == 0:
        return (0.0, 0.0)
    prev = track.frames[frame_index - 1].box(entity)
    if prev is None:
        return (0.0, 0.0)
    return offset_between(box, prev)


def offset_dist(o1: tuple[float, float], o2: tuple[float, float]) -> float:
    """Euclidean norm of the difference between two offset vectors."""
    return math.hypot(o1[0] - o2[0], o1[1] - o2[1])


def offset_angle(
    o1: tuple[float, float],
    o2: tuple[float, float],
    move_threshold: float = DEFAULT_CONFIG.move_threshold,
) -> AngleResult:
    """Absolute angle between two offset vectors, folded into [0, pi].

    Either offset below ``move_threshold`` yields ``AngleResult(0.0, True)``:
    the direction of a near-stationary box is meaningless.
    """
    if math.hypot(*o1) <= move_threshold or math.hypot(*o2) <= move_threshold:
        return AngleResult(0.0, True)
    diff = abs(math.atan2(o1[1], o1[0]) - math.atan2(o2[1], o2[0]))
    if diff > math.pi:
        diff = 2.0 * math.pi - diff
    return AngleResult(diff, False)


# --- feature catalogue -----------------------------------------------------
#
# Canonical keys look like "touching(object1,hand)".  Symmetric pair features
# are stored once, with arguments in entity order (object1 < object2 < hand);
# lookups through feature_key() accept either order.

_UNARY_REAL = ("size", "speed")
_UNARY_BOOL = ("present", "moving")
_PAIR_REAL = ("overlap", "offset_dist", "offset_angle", "centre_dist")
_PAIR_BOOL_SYMMETRIC = ("touching",)
_PAIR_BOOL_ORDERED = (
    "contained",
    "centre_on_top",
    "centre_underneath",
    "object_move_relative",
)
_HAND_BOOL = ("move_with_hand", "hand_move_relative")

_SYMMETRIC = set(_PAIR_REAL) | set(_PAIR_BOOL_SYMMETRIC)
BOOLEAN_FEATURES = (
    set(_UNARY_BOOL)
    | set(_PAIR_BOOL_SYMMETRIC)
    | set(_PAIR_BOOL_ORDERED)
    | set(_HAND_BOOL)
)
_ARITY = {name: 1 for name in _UNARY_REAL + _UNARY_BOOL + _HAND_BOOL}
_ARITY.update({name: 2 for name in _PAIR_REAL + _PAIR_BOOL_SYMMETRIC + _PAIR_BOOL_ORDERED})
FEATURE_NAMES = tuple(sorted(_ARITY))


def validate_feature(name: str, args: tuple[str, ...]) -> None:
    if name not in _ARITY:
        raise ConfigError(f"unknown feature {name!r}")
    if len(args) != _ARITY[name]:
        raise ConfigError(
            f"feature {name!r} takes {_ARITY[name]} argument(s), got {list(args)}"
        )
    for a in args:
        if a not in ENTITIES:
            raise ConfigError(f"unknown entity {a!r} in feature {name!r}")
    if name in _HAND_BOOL and args[0] == "hand":
        raise ConfigError(f"feature {name!r} expects an object argument, not 'hand'")
    if _ARITY[name] == 2 and args[0] == args[1]:
        raise ConfigError(f"feature {name!r} needs two distinct entities")


def feature_key(name: str, args: tuple[str, ...]) -> str:
    """Canonical dictionary key for a feature reference."""
    validate_feature(name, args)
    if name in _SYMMETRIC:
        args = tuple(sorted(args, key=_ENTITY_RANK.__getitem__))
    return f"{name}({','.join(args)})"


def feature_kind(name: str) -> str:
    if name not in _ARITY:
        raise ConfigError(f"unknown feature {name!r}")
    return "boolean" if name in BOOLEAN_FEATURES else "real"


def relation_keys() -> tuple[str, ...]:
    """All canonical feature keys, in deterministic order."""
    keys: list[str] = []
    for name in _UNARY_REAL + _UNARY_BOOL:
        keys.extend(feature_key(name, (e,)) for e in ENTITIES)
    pairs = [("object1", "object2"), ("object1", "hand"), ("object2", "hand")]
    for name in _PAIR_REAL + _PAIR_BOOL_SYMMETRIC:
        keys.extend(feature_key(name, p) for p in pairs)
    ordered = [(a, b) for a in ENTITIES for b in ENTITIES if a != b]
    for name in _PAIR_BOOL_ORDERED:
        keys.extend(feature_key(name, p) for p in ordered)
    for name in _HAND_BOOL:
        keys.extend(feature_key(name, (o,)) for o in ("object1", "object2"))
    return tuple(keys)


@dataclass(frozen=True)
class FrameRelations:
    """All relational features of one frame, keyed canonically.

    Booleans are stored as 0.0/1.0 so that phase models can take weighted
    sums without special cases; ``offsets`` keeps the raw offset vectors.
    """

    frame_index: int
    values: Mapping[str, float]
    offsets: Mapping[str, tuple[float, float]]

    def value(self, name: str, *args: str) -> float:
        return self.values[feature_key(name, tuple(args))]


def _centre_on_top(a: BoundingBox, b: BoundingBox) -> bool:
    cx, cy = a.centre
    return b.x <= cx <= b.x2 and cy < b.centre[1]


def _centre_underneath(a: BoundingBox, b: BoundingBox) -> bool:
    cx, cy = a.centre
    return b.x <= cx <= b.x2 and cy > b.centre[1]


def frame_relations(
    track: VideoTrack,
    frame_index: int,
    config: RelationConfig = DEFAULT_CONFIG,
) -> FrameRelations:
    """Compute every catalogued feature for one frame of a track.

    Binary relations involving an absent entity are false; real pair features
    involving an absent entity are 0.0.
    """
    frame = track.frames[frame_index]
    prev = track.frames[frame_index - 1] if frame_index > 0 else None
    boxes = {e: frame.box(e) for e in ENTITIES}

    offsets: dict[str, tuple[float, float]] = {}
    for e in ENTITIES:
        box = boxes[e]
        prev_box = prev.box(e) if prev is not None else None
        if box is None or prev_box is None:
            offsets[e] = (0.0, 0.0)
        else:
            offsets[e] = offset_between(box, prev_box)

    values: dict[str, float] = {}

    def put(name: str, args: tuple[str, ...], value: float | bool) -> None:
        values[feature_key(name, args)] = float(value)

    speed = {e: math.hypot(*offsets[e]) for e in ENTITIES}
    moving = {
        e: boxes[e] is not None and speed[e] > config.move_threshold for e in ENTITIES
    }
    for e in ENTITIES:
        put("present", (e,), boxes[e] is not None)
        put("size", (e,), size(boxes[e]) if boxes[e] is not None else 0.0)
        put("speed", (e,), speed[e] if boxes[e] is not None else 0.0)
        put("moving", (e,), moving[e])

    pairs = [("object1", "object2"), ("object1", "hand"), ("object2", "hand")]
    for a, b in pairs:
        ba, bb = boxes[a], boxes[b]
        both = ba is not None and bb is not None
        put("overlap", (a, b), overlap_normalised(ba, bb) if both else 0.0)
        put("centre_dist", (a, b), centre_dist(ba, bb) if both else 0.0)
        put(
            "offset_dist",
            (a, b),
            offset_dist(offsets[a], offsets[b]) if both else 0.0,
        )
        angle = (
            offset_angle(offsets[a], offsets[b], config.move_threshold).radians
            if both
            else 0.0
        )
        put("offset_angle", (a, b), angle)
        put("touching", (a, b), both and edge_gap(ba, bb) <= config.touch_tol)

    for a in ENTITIES:
        for b in ENTITIES:
            if a == b:
                continue
            ba, bb = boxes[a], boxes[b]
            both = ba is not None and bb is not None
            contained = (
                both
                and ba.area > 0
                and overlap_area(ba, bb) / ba.area >= config.containment_fraction
            )
            put("contained", (a, b), contained)
            put("centre_on_top", (a, b), both and _centre_on_top(ba, bb))
            put("centre_underneath", (a, b), both and _centre_underneath(ba, bb))
            put(
                "object_move_relative",
                (a, b),
                both
                and moving[a]
                and offset_dist(offsets[a], offsets[b]) > config.move_with_hand_tol,
            )

    for o in ("object1", "object2"):
        bo, bh = boxes[o], boxes["hand"]
        both = bo is not None and bh is not None
        put(
            "move_with_hand",
            (o,),
            both
            and moving[o]
            and moving["hand"]
            and edge_gap(bo, bh) <= config.touch_tol
            and offset_dist(offsets[o], offsets["hand"]) <= config.move_with_hand_tol,
        )
        put(
            "hand_move_relative",
            (o,),
            both
            and moving["hand"]
            and offset_dist(offsets[o], offsets["hand"]) > config.move_with_hand_tol,
        )

    return FrameRelations(
        frame_index=frame.frame_index, values=values, offsets=offsets
    )


def binary_relations(
    track: VideoTrack,
    frame_index: int,
    config: RelationConfig = DEFAULT_CONFIG,
) -> dict[str, bool]:
    """The boolean subset of :func:`frame_relations`, as actual bools."""
    rel = frame_relations(track, frame_index, config)
    out: dict[str, bool] = {}
    for key, value in rel.values.items():
        name = key.split("(", 1)[0]
        if name in BOOLEAN_FEATURES:
            out[key] = bool(value)
    return out
