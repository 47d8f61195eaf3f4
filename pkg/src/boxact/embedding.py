"""Fixed-length per-video embeddings built from phase-assigned windows.

Each of the five phases contributes four statistics (mean, median, max, min)
of its raw score over the assigned window, the same four statistics for every
relational feature the action model mentions, and a presence flag.  Phases
the assignment could not place contribute zeros with the flag down, so the
layout never changes shape for a given model.

A ``scores_only`` switch drops the per-feature blocks and keeps just the
score statistics and flags.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import AnnotationError, ContractError
from .phases import (
    DEFAULT_SIGMA,
    DEFAULT_WINDOW_HALF_WIDTH,
    PHASES,
    ActionModel,
    PhaseAssignment,
    PhaseScoreMatrix,
    best_assignment,
    relation_sequence,
    score_frames,
)
from .relations import FrameRelations
from .tracks import VideoTrack

__all__ = [
    "STAT_NAMES",
    "PhaseFeature",
    "VideoEmbedding",
    "phase_feature",
    "embedding_layout",
    "embedding_length",
    "embed_video",
    "embed_track",
    "dump_embeddings",
    "load_embeddings",
]

STAT_NAMES = ("mean", "med", "max", "min")


def _stats(values: np.ndarray) -> tuple[float, float, float, float]:
    return (
        float(values.mean()),
        float(np.median(values)),
        float(values.max()),
        float(values.min()),
    )


@dataclass(frozen=True)
class PhaseFeature:
    """One phase's statistics block: score stats, per-feature stats, flag."""

    phase: str
    score_stats: tuple[float, float, float, float]
    feature_stats: Mapping[str, tuple[float, float, float, float]]
    assigned: bool

    def flat(self, feature_list: Sequence[str], scores_only: bool) -> list[float]:
        out = list(self.score_stats)
        if not scores_only:
            for key in feature_list:
                out.extend(self.feature_stats[key])
        out.append(1.0 if self.assigned else 0.0)
        return out


@dataclass(frozen=True)
class VideoEmbedding:
    """Flat feature vector plus its named layout, one per video per action."""

    action_id: str
    video_id: str
    values: np.ndarray
    layout: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.layout),):
            raise ContractError(
                f"embedding for {self.video_id!r}: got {self.values.shape[0]} "
                f"values for a layout of {len(self.layout)} names"
            )

    @property
    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.layout)}

    def assigned_flags(self) -> dict[str, bool]:
        idx = self.index
        return {p: bool(self.values[idx[f"{p}:assigned"]]) for p in PHASES}


def phase_feature(
    phase: str,
    scores: np.ndarray | Sequence[float],
    window_relations: Sequence[FrameRelations],
    feature_list: Sequence[str],
) -> PhaseFeature:
    """Statistics of one phase's scores and features over its window.

    An empty window is the unassigned path: all statistics zero, flag down.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        zeros = (0.0, 0.0, 0.0, 0.0)
        return PhaseFeature(
            phase=phase,
            score_stats=zeros,
            feature_stats={key: zeros for key in feature_list},
            assigned=False,
        )
    if scores.size != len(window_relations):
        raise ContractError(
            f"phase {phase!r}: {scores.size} scores but "
            f"{len(window_relations)} frames of relations"
        )
    per_feature = {}
    for key in feature_list:
        vals = np.array([rel.values[key] for rel in window_relations])
        per_feature[key] = _stats(vals)
    return PhaseFeature(
        phase=phase,
        score_stats=_stats(scores),
        feature_stats=per_feature,
        assigned=True,
    )


def embedding_layout(model: ActionModel, scores_only: bool = False) -> tuple[str, ...]:
    """Dimension names, a pure function of the action model."""
    names: list[str] = []
    for p in PHASES:
        for stat in STAT_NAMES:
            names.append(f"{p}:score:{stat}")
        if not scores_only:
            for key in model.feature_list:
                for stat in STAT_NAMES:
                    names.append(f"{p}:{key}:{stat}")
        names.append(f"{p}:assigned")
    return tuple(names)


def embedding_length(model: ActionModel, scores_only: bool = False) -> int:
    if scores_only:
        return len(PHASES) * 4 + len(PHASES)
    return len(PHASES) * (1 + len(model.feature_list)) * 4 + len(PHASES)


def embed_video(
    track: VideoTrack,
    assignment: PhaseAssignment,
    matrix: PhaseScoreMatrix,
    model: ActionModel,
    scores_only: bool = False,
    relations: Sequence[FrameRelations] | None = None,
) -> VideoEmbedding:
    """Build the embedding from an existing assignment and score matrix.

    Raw (unsmoothed, unstandardised) score rows feed the statistics.
    """
    if assignment.action_id != model.action_id or matrix.action_id != model.action_id:
        raise ContractError(
            f"action mismatch: assignment {assignment.action_id!r}, "
            f"matrix {matrix.action_id!r}, model {model.action_id!r}"
        )
    if assignment.object_order != matrix.object_order:
        raise ContractError(
            f"object order mismatch: assignment {assignment.object_order!r} "
            f"vs matrix {matrix.object_order!r}"
        )
    if relations is None:
        relations = relation_sequence(track, assignment.object_order, model.thresholds)
    if len(relations) != matrix.num_frames:
        raise ContractError(
            f"{track.video_id!r}: {len(relations)} relation frames vs "
            f"{matrix.num_frames} score frames"
        )
    feature_list = model.feature_list
    values: list[float] = []
    for p in PHASES:
        window = assignment.windows[p]
        if window is None:
            block = phase_feature(p, np.empty(0), (), feature_list)
        else:
            lo, hi = window
            block = phase_feature(
                p,
                matrix.row(p, kind="raw")[lo : hi + 1],
                relations[lo : hi + 1],
                feature_list,
            )
        values.extend(block.flat(feature_list, scores_only))
    return VideoEmbedding(
        action_id=model.action_id,
        video_id=track.video_id,
        values=np.asarray(values),
        layout=embedding_layout(model, scores_only),
    )


def embed_track(
    track: VideoTrack,
    model: ActionModel,
    n: int = DEFAULT_WINDOW_HALF_WIDTH,
    sigma: float = DEFAULT_SIGMA,
    scores_only: bool = False,
) -> tuple[VideoEmbedding, PhaseAssignment]:
    """Assign phases (both object orders, both b choices) and embed."""
    assignment = best_assignment(track, model, n=n, sigma=sigma)
    relations = relation_sequence(track, assignment.object_order, model.thresholds)
    matrix = score_frames(
        track, model, assignment.object_order, sigma=sigma, relations=relations
    )
    embedding = embed_video(
        track, assignment, matrix, model, scores_only=scores_only, relations=relations
    )
    return embedding, assignment


def dump_embeddings(
    embeddings: Sequence[VideoEmbedding],
    path: str | Path,
    provenance: Mapping[str, object] | None = None,
) -> None:
    records = []
    for e in embeddings:
        records.append(
            {
                "video_id": e.video_id,
                "action_id": e.action_id,
                "values": [float(v) for v in e.values],
                "assigned_flags": [
                    1 if e.assigned_flags()[p] else 0 for p in PHASES
                ],
                "layout": list(e.layout),
            }
        )
    doc = {"format": "boxact-embeddings", "version": 1, "records": records}
    if provenance is not None:
        doc["provenance"] = dict(provenance)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_embeddings(path: str | Path) -> list[VideoEmbedding]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != "boxact-embeddings":
        raise AnnotationError(f"{path}: not an embedding dump")
    out = []
    for rec in doc.get("records", []):
        out.append(
            VideoEmbedding(
                action_id=rec["action_id"],
                video_id=rec["video_id"],
                values=np.asarray(rec["values"], dtype=float),
                layout=tuple(rec["layout"]),
            )
        )
    return out
