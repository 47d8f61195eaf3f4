"""Ranking metrics, confusion matrices, and probability-level late fusion.

Average precision uses a pessimistic tie rule: when scores tie, negatives are
ranked ahead of positives, so reported numbers never benefit from tie luck.
Mean AP is support-weighted; the unweighted macro mean is reported alongside.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import AnnotationError, ContractError

__all__ = [
    "VideoPrediction",
    "PredictionSet",
    "EvalReport",
    "average_precision",
    "evaluate",
    "fuse",
    "report_to_dict",
    "report_table",
    "confusion_csv",
    "save_predictions",
    "load_predictions",
]

PREDICTIONS_FORMAT = "boxact-predictions"


@dataclass(frozen=True)
class VideoPrediction:
    video_id: str
    true_label: str
    probabilities: Mapping[str, float]

    def __post_init__(self) -> None:
        for action, p in self.probabilities.items():
            if not math.isfinite(p):
                raise ContractError(
                    f"video {self.video_id!r}: non-finite probability for "
                    f"{action!r}"
                )


@dataclass(frozen=True)
class PredictionSet:
    """Per-video probability maps sharing one action universe."""

    videos: tuple[VideoPrediction, ...]

    def __post_init__(self) -> None:
        if not self.videos:
            raise ContractError("prediction set is empty")
        universe = set(self.videos[0].probabilities)
        for v in self.videos[1:]:
            if set(v.probabilities) != universe:
                raise ContractError(
                    f"video {v.video_id!r} scores actions "
                    f"{sorted(v.probabilities)} but {self.videos[0].video_id!r} "
                    f"scores {sorted(universe)}"
                )
        ids = [v.video_id for v in self.videos]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ContractError(f"duplicate video ids in prediction set: {dupes}")

    @property
    def actions(self) -> tuple[str, ...]:
        return tuple(sorted(self.videos[0].probabilities))

    def __len__(self) -> int:
        return len(self.videos)


def average_precision(
    scores: Sequence[float], labels: Sequence[int]
) -> float | None:
    """AP of a ranked list; ties rank negatives first (pessimistic).

    Returns None (with a warning) when there are no positives, so callers can
    exclude the class from aggregate means.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(int)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ContractError("average_precision expects matching 1-d inputs")
    num_pos = int(labels.sum())
    if num_pos == 0:
        warnings.warn("average precision undefined without positives", stacklevel=2)
        return None
    # sort by descending score; at equal scores negatives come first
    order = sorted(range(scores.size), key=lambda i: (-scores[i], labels[i]))
    hits = 0
    total = 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i] == 1:
            hits += 1
            total += hits / rank
    return total / num_pos


@dataclass(frozen=True)
class EvalReport:
    actions: tuple[str, ...]
    per_action_ap: Mapping[str, float | None]
    weighted_map: float
    macro_map: float
    support: Mapping[str, int]
    confusion: np.ndarray  # rows: true action, cols: predicted action
    accuracy: float


def _argmax_action(probabilities: Mapping[str, float], actions: Sequence[str]) -> str:
    return max(actions, key=lambda a: probabilities[a])  # ties: first = lowest id


def evaluate(preds: PredictionSet) -> EvalReport:
    """One-vs-rest AP per action, support-weighted and macro mAP, confusion."""
    actions = preds.actions
    labels = {v.video_id: v.true_label for v in preds.videos}
    unknown = sorted(set(labels.values()) - set(actions))
    if unknown:
        raise ContractError(
            f"true labels {unknown} have no probability column; "
            f"scored actions are {list(actions)}"
        )
    support = {a: sum(1 for v in preds.videos if v.true_label == a) for a in actions}
    per_action_ap: dict[str, float | None] = {}
    for a in actions:
        scores = [v.probabilities[a] for v in preds.videos]
        binary = [1 if v.true_label == a else 0 for v in preds.videos]
        per_action_ap[a] = average_precision(scores, binary)
    defined = [a for a in actions if per_action_ap[a] is not None]
    weight_sum = sum(support[a] for a in defined)
    weighted = sum(support[a] * per_action_ap[a] for a in defined) / weight_sum
    macro = sum(per_action_ap[a] for a in defined) / len(defined)
    index = {a: i for i, a in enumerate(actions)}
    confusion = np.zeros((len(actions), len(actions)), dtype=int)
    correct = 0
    for v in preds.videos:
        predicted = _argmax_action(v.probabilities, actions)
        confusion[index[v.true_label], index[predicted]] += 1
        correct += int(predicted == v.true_label)
    return EvalReport(
        actions=actions,
        per_action_ap=per_action_ap,
        weighted_map=float(weighted),
        macro_map=float(macro),
        support=support,
        confusion=confusion,
        accuracy=correct / len(preds),
    )


def fuse(a: PredictionSet, b: PredictionSet) -> PredictionSet:
    """Element-wise sum of two probability maps over the same videos."""
    ids_a = {v.video_id for v in a.videos}
    ids_b = {v.video_id for v in b.videos}
    if ids_a != ids_b:
        only_a = sorted(ids_a - ids_b)
        only_b = sorted(ids_b - ids_a)
        raise ContractError(
            f"prediction sets cover different videos: "
            f"only in first {only_a}, only in second {only_b}"
        )
    if a.actions != b.actions:
        raise ContractError(
            f"prediction sets score different actions: "
            f"{list(a.actions)} vs {list(b.actions)}"
        )
    by_id = {v.video_id: v for v in b.videos}
    fused = []
    for v in a.videos:
        other = by_id[v.video_id]
        if other.true_label != v.true_label:
            raise ContractError(
                f"video {v.video_id!r} labeled {v.true_label!r} in one set "
                f"and {other.true_label!r} in the other"
            )
        fused.append(
            VideoPrediction(
                video_id=v.video_id,
                true_label=v.true_label,
                probabilities={
                    act: v.probabilities[act] + other.probabilities[act]
                    for act in v.probabilities
                },
            )
        )
    return PredictionSet(videos=tuple(fused))


# --- report output -------------------------------------------------------------


def report_to_dict(report: EvalReport) -> dict:
    return {
        "actions": list(report.actions),
        "per_action_ap": {
            a: report.per_action_ap[a] for a in report.actions
        },
        "weighted_map": report.weighted_map,
        "macro_map": report.macro_map,
        "support": dict(report.support),
        "accuracy": report.accuracy,
        "confusion": report.confusion.tolist(),
    }


def report_table(report: EvalReport) -> str:
    """Human-readable per-action AP table plus both mAP variants."""
    width = max(len(a) for a in report.actions)
    lines = [f"{'action':<{width}}  {'support':>7}  {'AP':>7}"]
    for a in report.actions:
        ap = report.per_action_ap[a]
        ap_text = f"{ap:7.4f}" if ap is not None else "    n/a"
        lines.append(f"{a:<{width}}  {report.support[a]:>7d}  {ap_text}")
    lines.append(f"{'weighted mAP':<{width}}  {'':>7}  {report.weighted_map:7.4f}")
    lines.append(f"{'macro mAP':<{width}}  {'':>7}  {report.macro_map:7.4f}")
    lines.append(f"{'accuracy':<{width}}  {'':>7}  {report.accuracy:7.4f}")
    return "\n".join(lines)


def confusion_csv(report: EvalReport) -> str:
    """Confusion grid as CSV: rows true actions, columns predicted."""
    header = "true\\predicted," + ",".join(report.actions)
    lines = [header]
    for i, a in enumerate(report.actions):
        lines.append(a + "," + ",".join(str(int(c)) for c in report.confusion[i]))
    return "\n".join(lines) + "\n"


def save_predictions(
    preds: PredictionSet,
    path: str | Path,
    provenance: Mapping[str, object] | None = None,
) -> None:
    doc: dict = {
        "format": PREDICTIONS_FORMAT,
        "version": 1,
        "records": [
            {
                "video_id": v.video_id,
                "true_label": v.true_label,
                "probabilities": {a: float(p) for a, p in v.probabilities.items()},
            }
            for v in preds.videos
        ],
    }
    if provenance is not None:
        doc["provenance"] = dict(provenance)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_predictions(path: str | Path) -> PredictionSet:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != PREDICTIONS_FORMAT:
        raise AnnotationError(f"{path}: not a predictions file")
    videos = tuple(
        VideoPrediction(
            video_id=rec["video_id"],
            true_label=rec["true_label"],
            probabilities={a: float(p) for a, p in rec["probabilities"].items()},
        )
        for rec in doc.get("records", [])
    )
    return PredictionSet(videos=videos)
