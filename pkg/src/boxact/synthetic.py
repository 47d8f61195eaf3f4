"""Synthetic bounding-box videos for five manipulation archetypes.

Each archetype is realised as a piecewise trajectory over a fixed stage:
object2 sits still, object1 and the hand enter from the left, manipulate,
and leave.  Motion segments use smoothstep easing, so the speed profile is a
symmetric bell whose peak falls on the segment midpoint; segment boundaries
are derived from the scripted phase centres (b = approach midpoint,
c = manipulation-dwell midpoint, d = exit midpoint, a = 0, e = last frame).
The hand clears the frame edge eight frames before the end so the
result-evident plateau stays short.

Noise models annotation artifacts: per-frame Gaussian jitter of box
coordinates, and a copy-lag artifact where a whole frame's annotation is
copied unchanged from the previous frame and snaps back on the next one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError
from .phases import ARCHETYPES, PHASES
from .relations import (
    DEFAULT_CONFIG,
    RelationConfig,
    edge_gap,
    overlap_area,
)
from .tracks import BoundingBox, FrameAnnotation, VideoTrack

__all__ = [
    "FRAME_WIDTH",
    "FRAME_HEIGHT",
    "NOISE_PRESETS",
    "NoiseParams",
    "SyntheticScript",
    "script_from_dict",
    "script_to_dict",
    "random_script",
    "generate_synthetic",
    "generate_dataset",
    "verify_archetype_geometry",
]

FRAME_WIDTH = 320.0
FRAME_HEIGHT = 240.0

EXIT_CLEAR_MARGIN = 8  # frames between the hand clearing the frame and the end


@dataclass(frozen=True)
class NoiseParams:
    """Annotation-noise model.

    jitter_sigma: stddev of per-frame Gaussian noise on x, y, w, h (pixels).
    copy_lag_prob: probability per frame that the whole annotation is copied
        unchanged from the previous frame, then snaps back on the next frame.
    """

    jitter_sigma: float = 0.0
    copy_lag_prob: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.jitter_sigma < 0:
            raise ContractError("jitter_sigma must be non-negative")
        if not 0.0 <= self.copy_lag_prob < 1.0:
            raise ContractError("copy_lag_prob must lie in [0, 1)")


NOISE_PRESETS: dict[str, NoiseParams] = {
    "zero": NoiseParams(),
    "moderate": NoiseParams(jitter_sigma=2.0, copy_lag_prob=0.15),
    "crowd-artifacts": NoiseParams(jitter_sigma=1.0, copy_lag_prob=0.5),
}


@dataclass(frozen=True)
class SyntheticScript:
    """Everything needed to deterministically realise one synthetic video."""

    archetype: str
    num_frames: int
    true_phase_centers: Mapping[str, int]
    noise: NoiseParams = field(default_factory=NoiseParams)
    video_id: str = "synthetic-0"
    layout_seed: int = 0

    def __post_init__(self) -> None:
        if self.archetype not in ARCHETYPES:
            raise ContractError(
                f"unknown archetype {self.archetype!r}, expected one of {ARCHETYPES}"
            )
        missing = [p for p in PHASES if p not in self.true_phase_centers]
        if missing:
            raise ContractError(f"true_phase_centers is missing phases {missing}")
        centers = [self.true_phase_centers[p] for p in PHASES]
        if any(not isinstance(c, int) for c in centers):
            raise ContractError("phase centres must be integers")
        if centers[0] < 0 or centers[-1] >= self.num_frames:
            raise ContractError("phase centres must lie within [0, num_frames)")
        for p1, p2, c1, c2 in zip(PHASES, PHASES[1:], centers, centers[1:]):
            if c2 <= c1:
                raise ContractError(
                    f"phase centres must be strictly increasing, got "
                    f"{p1}={c1}, {p2}={c2}"
                )


def script_from_dict(data: Mapping) -> SyntheticScript:
    """Decode a script record: archetype header plus centres and noise."""
    if not isinstance(data, Mapping):
        raise ContractError("script record must be an object")
    unknown = set(data) - {
        "archetype",
        "num_frames",
        "true_phase_centers",
        "noise",
        "video_id",
        "layout_seed",
    }
    if unknown:
        raise ContractError(f"script record has unknown fields {sorted(unknown)}")
    try:
        centers = {p: int(c) for p, c in dict(data["true_phase_centers"]).items()}
        noise_data = dict(data.get("noise", {}))
        return SyntheticScript(
            archetype=data["archetype"],
            num_frames=int(data["num_frames"]),
            true_phase_centers=centers,
            noise=NoiseParams(
                jitter_sigma=float(noise_data.get("jitter_sigma", 0.0)),
                copy_lag_prob=float(noise_data.get("copy_lag_prob", 0.0)),
                seed=int(noise_data.get("seed", 0)),
            ),
            video_id=str(data.get("video_id", "synthetic-0")),
            layout_seed=int(data.get("layout_seed", 0)),
        )
    except KeyError as exc:
        raise ContractError(f"script record missing {exc}") from None


def script_to_dict(script: SyntheticScript) -> dict:
    return {
        "archetype": script.archetype,
        "num_frames": script.num_frames,
        "true_phase_centers": dict(script.true_phase_centers),
        "noise": {
            "jitter_sigma": script.noise.jitter_sigma,
            "copy_lag_prob": script.noise.copy_lag_prob,
            "seed": script.noise.seed,
        },
        "video_id": script.video_id,
        "layout_seed": script.layout_seed,
    }


# --- trajectory machinery ----------------------------------------------------

Point = tuple[float, float]


@dataclass(frozen=True)
class _Segment:
    t0: int
    t1: int
    p0: Point
    p1: Point


def _smoothstep(u: float) -> float:
    return u * u * (3.0 - 2.0 * u)


def _position(segments: Sequence[_Segment], t: int) -> Point:
    if t <= segments[0].t0:
        return segments[0].p0
    for seg in segments:
        if seg.t0 <= t <= seg.t1:
            if seg.t1 == seg.t0:
                return seg.p1
            u = _smoothstep((t - seg.t0) / (seg.t1 - seg.t0))
            return (
                seg.p0[0] + u * (seg.p1[0] - seg.p0[0]),
                seg.p0[1] + u * (seg.p1[1] - seg.p0[1]),
            )
    return segments[-1].p1


def _box_at(centre: Point, size: Point) -> BoundingBox:
    return BoundingBox(
        x=centre[0] - size[0] / 2.0,
        y=centre[1] - size[1] / 2.0,
        w=size[0],
        h=size[1],
    )


def _visible(box: BoundingBox) -> bool:
    return box.x < FRAME_WIDTH and box.x2 > 0 and box.y < FRAME_HEIGHT and box.y2 > 0


# --- stage layout ------------------------------------------------------------


@dataclass(frozen=True)
class _Layout:
    o2_centre: Point
    o2_size: Point
    o1_size: Point
    hand_size: Point
    grip: Point  # hand centre relative to object1 centre while carrying
    o1_target: Point  # object1 centre at/after the manipulation
    rest: Point  # pretend only: object1 centre after being put back


def _draw_layout(archetype: str, rng: np.random.Generator) -> _Layout:
    o2_size = (float(rng.uniform(60, 80)), float(rng.uniform(52, 68)))
    o2_centre = (float(rng.uniform(205, 240)), float(rng.uniform(130, 160)))
    o1_size = (float(rng.uniform(20, 26)), float(rng.uniform(16, 22)))
    hand_size = (float(rng.uniform(28, 34)), float(rng.uniform(22, 28)))
    grip = (float(rng.uniform(-8, -4)), float(rng.uniform(-12, -8)))
    o2_left = o2_centre[0] - o2_size[0] / 2.0
    o2_top = o2_centre[1] - o2_size[1] / 2.0
    if archetype in ("put-into", "take-out-of"):
        target = (
            o2_centre[0] + float(rng.uniform(-8, 8)),
            o2_centre[1] + float(rng.uniform(2, 8)),
        )
    elif archetype in ("put-next-to", "pretend-put-next-to"):
        gap = float(rng.uniform(2, 4))
        target = (
            o2_left - gap - o1_size[0] / 2.0,
            o2_centre[1] + float(rng.uniform(-6, 6)),
        )
    else:  # put-behind: partial overlap with the top edge, centre above
        overlap_px = float(rng.uniform(4, 8))
        target = (
            o2_centre[0] + float(rng.uniform(-8, 8)),
            o2_top + overlap_px - o1_size[1] / 2.0,
        )
    rest = (float(rng.uniform(95, 110)), target[1])
    return _Layout(
        o2_centre=o2_centre,
        o2_size=o2_size,
        o1_size=o1_size,
        hand_size=hand_size,
        grip=grip,
        o1_target=target,
        rest=rest,
    )


def _hand_entry(layout: _Layout, y: float) -> Point:
    # deep enough that a carried object1 (offset by -grip) is also off-frame
    return (-(layout.hand_size[0] / 2.0) - 10.0, y)


def _hand_exit(layout: _Layout, y: float) -> Point:
    # right edge settles at -2: the box clears the frame on the exit's last step
    return (-(layout.hand_size[0] / 2.0) - 2.0, y)


def _shift(p: Point, d: Point) -> Point:
    return (p[0] + d[0], p[1] + d[1])


# --- segment derivation from phase centres -----------------------------------


def _carry_boundaries(script: SyntheticScript) -> tuple[int, int, int, int]:
    """(t1, t2, t3, te) for put-into / take-out-of / put-next-to / put-behind."""
    n = script.num_frames
    b = script.true_phase_centers["b"]
    c = script.true_phase_centers["c"]
    d = script.true_phase_centers["d"]
    te = n - EXIT_CLEAR_MARGIN
    t3 = 2 * d - te
    t2 = 2 * c - t3
    t1 = 2 * b - t2
    if not (1 <= t1 <= t2 - 6 and t2 <= t3 - 4 and t3 <= te - 5 and te <= n - 2):
        raise ContractError(
            f"{script.archetype}: phase centres {dict(script.true_phase_centers)} "
            f"imply invalid segments (t1={t1}, t2={t2}, t3={t3}, te={te})"
        )
    return t1, t2, t3, te


def _pretend_boundaries(script: SyntheticScript) -> tuple[int, int, int, int, int, int]:
    """(t1, h0, h1, r1, x0, te): approach, hover, retreat, put-down, exit."""
    n = script.num_frames
    b = script.true_phase_centers["b"]
    c = script.true_phase_centers["c"]
    d = script.true_phase_centers["d"]
    te = n - EXIT_CLEAR_MARGIN
    h0, h1 = c - 6, c + 6
    t1 = 2 * b - h0
    x0 = 2 * d - te
    r1 = x0 - 4
    if not (1 <= t1 <= h0 - 6 and h1 <= r1 - 4 and x0 <= te - 5 and te <= n - 2):
        raise ContractError(
            f"pretend-put-next-to: phase centres "
            f"{dict(script.true_phase_centers)} imply invalid segments "
            f"(t1={t1}, hover=[{h0},{h1}], r1={r1}, x0={x0}, te={te})"
        )
    return t1, h0, h1, r1, x0, te


def _entity_segments(
    script: SyntheticScript, layout: _Layout
) -> dict[str, list[_Segment]]:
    n = script.num_frames
    target = layout.o1_target
    grip_at = lambda p: _shift(p, layout.grip)  # noqa: E731 - tiny local helper
    if script.archetype == "pretend-put-next-to":
        t1, h0, h1, r1, x0, te = _pretend_boundaries(script)
        o1_entry = _shift(_hand_entry(layout, target[1]), (-layout.grip[0], 0.0))
        o1_entry = (o1_entry[0], target[1])
        o1 = [
            _Segment(0, t1, o1_entry, o1_entry),
            _Segment(t1, h0, o1_entry, target),
            _Segment(h0, h1, target, target),
            _Segment(h1, r1, target, layout.rest),
            _Segment(r1, n - 1, layout.rest, layout.rest),
        ]
        hand = [
            _Segment(0, t1, grip_at(o1_entry), grip_at(o1_entry)),
            _Segment(t1, h0, grip_at(o1_entry), grip_at(target)),
            _Segment(h0, h1, grip_at(target), grip_at(target)),
            _Segment(h1, r1, grip_at(target), grip_at(layout.rest)),
            _Segment(r1, x0, grip_at(layout.rest), grip_at(layout.rest)),
            _Segment(x0, te, grip_at(layout.rest), _hand_exit(layout, target[1])),
            _Segment(te, n - 1, _hand_exit(layout, target[1]), _hand_exit(layout, target[1])),
        ]
    elif script.archetype == "take-out-of":
        t1, t2, t3, te = _carry_boundaries(script)
        hand_entry = _hand_entry(layout, grip_at(target)[1])
        # the wider of hand / carried object1 settles with right edge at -2,
        # so the pair clears the frame on the exit's last step
        trailing_half = max(
            layout.hand_size[0] / 2.0, -layout.grip[0] + layout.o1_size[0] / 2.0
        )
        hand_exit = (-2.0 - trailing_half, grip_at(target)[1])
        o1_exit = _shift(hand_exit, (-layout.grip[0], -layout.grip[1]))
        o1 = [
            _Segment(0, t3, target, target),
            _Segment(t3, te, target, o1_exit),
            _Segment(te, n - 1, o1_exit, o1_exit),
        ]
        hand = [
            _Segment(0, t1, hand_entry, hand_entry),
            _Segment(t1, t2, hand_entry, grip_at(target)),
            _Segment(t2, t3, grip_at(target), grip_at(target)),
            _Segment(t3, te, grip_at(target), hand_exit),
            _Segment(te, n - 1, hand_exit, hand_exit),
        ]
    else:  # put-into / put-next-to / put-behind share the carry-in shape
        t1, t2, t3, te = _carry_boundaries(script)
        o1_entry = _shift(_hand_entry(layout, target[1]), (-layout.grip[0], 0.0))
        o1_entry = (o1_entry[0], target[1])
        hand_exit = _hand_exit(layout, grip_at(target)[1])
        o1 = [
            _Segment(0, t1, o1_entry, o1_entry),
            _Segment(t1, t2, o1_entry, target),
            _Segment(t2, n - 1, target, target),
        ]
        hand = [
            _Segment(0, t1, grip_at(o1_entry), grip_at(o1_entry)),
            _Segment(t1, t2, grip_at(o1_entry), grip_at(target)),
            _Segment(t2, t3, grip_at(target), grip_at(target)),
            _Segment(t3, te, grip_at(target), hand_exit),
            _Segment(te, n - 1, hand_exit, hand_exit),
        ]
    o2 = [_Segment(0, n - 1, layout.o2_centre, layout.o2_centre)]
    return {"object1": o1, "object2": o2, "hand": hand}


# --- generation ----------------------------------------------------------------


def _apply_noise(
    frames: list[dict[str, BoundingBox]], noise: NoiseParams
) -> list[dict[str, BoundingBox]]:
    rng = np.random.default_rng(noise.seed)
    out: list[dict[str, BoundingBox]] = []
    if noise.jitter_sigma > 0:
        for boxes in frames:
            jittered: dict[str, BoundingBox] = {}
            for role in ("object1", "object2", "hand"):
                if role not in boxes:
                    continue
                b = boxes[role]
                dx, dy, dw, dh = rng.normal(0.0, noise.jitter_sigma, size=4)
                jittered[role] = BoundingBox(
                    x=b.x + dx,
                    y=b.y + dy,
                    w=max(1.0, b.w + dw),
                    h=max(1.0, b.h + dh),
                )
            out.append(jittered)
    else:
        out = [dict(boxes) for boxes in frames]
    if noise.copy_lag_prob > 0:
        lagged = False
        for t in range(1, len(out)):
            u = rng.random()
            same_roles = set(out[t]) == set(out[t - 1])
            if not lagged and same_roles and u < noise.copy_lag_prob:
                out[t] = dict(out[t - 1])
                lagged = True
            else:
                lagged = False
    return out


def generate_synthetic(script: SyntheticScript) -> tuple[VideoTrack, dict[str, int]]:
    """Realise a script as a track plus its ground-truth phase centres.

    Pure: the same script always yields the same track.
    """
    layout = _draw_layout(script.archetype, np.random.default_rng(script.layout_seed))
    segments = _entity_segments(script, layout)
    sizes = {
        "object1": layout.o1_size,
        "object2": layout.o2_size,
        "hand": layout.hand_size,
    }
    frames: list[dict[str, BoundingBox]] = []
    for t in range(script.num_frames):
        boxes: dict[str, BoundingBox] = {}
        for entity, segs in segments.items():
            box = _box_at(_position(segs, t), sizes[entity])
            if _visible(box):
                boxes[entity] = box
        frames.append(boxes)
    frames = _apply_noise(frames, script.noise)
    track = VideoTrack(
        video_id=script.video_id,
        frames=tuple(
            FrameAnnotation(frame_index=t, **frames[t])
            for t in range(script.num_frames)
        ),
        frame_width=FRAME_WIDTH,
        frame_height=FRAME_HEIGHT,
        label=script.archetype,
    )
    return track, dict(script.true_phase_centers)


def random_script(
    archetype: str,
    seed: int,
    num_frames: int = 60,
    noise: NoiseParams | None = None,
    video_id: str | None = None,
) -> SyntheticScript:
    """Draw a valid script with randomised layout and phase centres.

    Centres are chosen so the derived motion segments keep the speed-bell
    peaks well separated and the manipulation dwell 13 frames long.
    """
    if archetype not in ARCHETYPES:
        raise ContractError(
            f"unknown archetype {archetype!r}, expected one of {ARCHETYPES}"
        )
    if num_frames < 58:
        raise ContractError("random_script needs num_frames >= 58")
    rng = np.random.default_rng(seed)
    n = num_frames
    te = n - EXIT_CLEAR_MARGIN
    if archetype == "pretend-put-next-to":
        combos = []
        for t1 in (6, 7, 8):
            for la in (10,):
                for lr in range(10, 13):
                    if (t1 + lr + n) % 2 == 0 and t1 + la + lr <= n - 32:
                        combos.append((t1, la, lr))
        t1, la, lr = combos[int(rng.integers(len(combos)))]
        h0 = t1 + la
        c = h0 + 6
        x0 = h0 + 16 + lr
        centers = {
            "a": 0,
            "b": t1 + la // 2,
            "c": c,
            "d": (x0 + te) // 2,
            "e": n - 1,
        }
    else:
        combos = []
        for t2 in range(te - 30, te - 25):
            for la in (10, 12, 14):
                if t2 % 2 == n % 2 and t2 - la >= 8:
                    combos.append((t2, la))
        t2, la = combos[int(rng.integers(len(combos)))]
        t1 = t2 - la
        t3 = t2 + 14
        centers = {
            "a": 0,
            "b": t1 + la // 2,
            "c": t2 + 7,
            "d": (t3 + te) // 2,
            "e": n - 1,
        }
    return SyntheticScript(
        archetype=archetype,
        num_frames=num_frames,
        true_phase_centers=centers,
        noise=noise if noise is not None else NoiseParams(),
        video_id=video_id if video_id is not None else f"{archetype}-{seed}",
        layout_seed=int(rng.integers(2**31)),
    )


def generate_dataset(
    archetypes: Sequence[str],
    per_archetype: int,
    num_frames: int = 60,
    noise: NoiseParams | None = None,
    seed: int = 0,
    id_prefix: str = "syn",
) -> tuple[list[VideoTrack], dict[str, dict[str, int]]]:
    """Generate ``per_archetype`` videos per archetype; returns ground truth too.

    Each video gets its own layout and noise stream, derived deterministically
    from ``seed``.
    """
    tracks: list[VideoTrack] = []
    ground_truth: dict[str, dict[str, int]] = {}
    counter = 0
    for archetype in archetypes:
        for i in range(per_archetype):
            base = noise if noise is not None else NoiseParams()
            per_video_noise = NoiseParams(
                jitter_sigma=base.jitter_sigma,
                copy_lag_prob=base.copy_lag_prob,
                seed=seed * 1_000_003 + counter,
            )
            script = random_script(
                archetype,
                seed=seed * 7_919 + counter,
                num_frames=num_frames,
                noise=per_video_noise,
                video_id=f"{id_prefix}-{archetype}-{i:04d}",
            )
            track, truth = generate_synthetic(script)
            tracks.append(track)
            ground_truth[track.video_id] = truth
            counter += 1
    return tracks, ground_truth


# --- archetype postconditions -------------------------------------------------


def _contained_fraction(inner: BoundingBox, outer: BoundingBox) -> float:
    return overlap_area(inner, outer) / inner.area if inner.area > 0 else 0.0


def verify_archetype_geometry(
    track: VideoTrack,
    script: SyntheticScript,
    config: RelationConfig = DEFAULT_CONFIG,
) -> None:
    """Assert the geometric postconditions of an archetype on a clean track.

    Meant for zero-noise tracks; raises :class:`ContractError` on violation.
    """

    def fail(msg: str) -> None:
        raise ContractError(f"{script.archetype} ({track.video_id}): {msg}")

    first, last = track.frames[0], track.frames[-1]
    c_frame = track.frames[script.true_phase_centers["c"]]
    if first.hand is not None:
        fail("hand visible in the first frame")
    if last.hand is not None:
        fail("hand visible in the last frame")
    if first.object2 is None or last.object2 is None:
        fail("object2 must be visible throughout")

    a = script.archetype
    if a == "put-into":
        if first.object1 is not None:
            fail("object1 visible before being carried in")
        for name, frame in (("c", c_frame), ("final", last)):
            if frame.object1 is None or frame.object2 is None:
                fail(f"object1/object2 missing at {name} frame")
            if _contained_fraction(frame.object1, frame.object2) < config.containment_fraction:
                fail(f"object1 not contained in object2 at {name} frame")
        if last.object1.centre[1] <= last.object2.centre[1]:
            fail("object1 centre should sit below object2 centre at the end")
    elif a == "take-out-of":
        if first.object1 is None:
            fail("object1 must start inside object2")
        if _contained_fraction(first.object1, first.object2) < config.containment_fraction:
            fail("object1 not contained in object2 at the start")
        if last.object1 is not None:
            fail("object1 should have been carried out of the frame")
    elif a == "put-next-to":
        if first.object1 is not None:
            fail("object1 visible before being carried in")
        if last.object1 is None:
            fail("object1 missing in the final frame")
        if overlap_area(last.object1, last.object2) > 0:
            fail("object1 must not overlap object2")
        if edge_gap(last.object1, last.object2) > config.touch_tol:
            fail("object1 must end adjacent to object2")
    elif a == "pretend-put-next-to":
        if last.object1 is None:
            fail("object1 missing in the final frame")
        for frame in track.frames:
            if frame.object1 is not None and frame.object2 is not None:
                if overlap_area(frame.object1, frame.object2) > 0:
                    fail(f"object1 overlaps object2 at frame {frame.frame_index}")
        if last.object1.centre[0] >= last.object2.x - 3 * config.touch_tol:
            fail("object1 must end back on its entry side, clear of object2")
    elif a == "put-behind":
        if last.object1 is None:
            fail("object1 missing in the final frame")
        if overlap_area(last.object1, last.object2) <= 0:
            fail("object1 must end overlapping object2")
        if _contained_fraction(last.object1, last.object2) >= config.containment_fraction:
            fail("object1 should only partially overlap object2")
        if last.object1.centre[1] >= last.object2.centre[1]:
            fail("object1 centre must end above object2 centre")
