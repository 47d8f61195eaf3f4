"""End-to-end orchestration: embed, split, train, predict, evaluate.

Everything here is a deterministic function of (inputs, config, seed).
Output files carry a provenance block with the config fingerprint and seed
instead of timestamps, so re-running a stage with unchanged inputs yields
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__ as _pkg_version
from .embedding import VideoEmbedding, embed_video, embedding_layout
from .errors import BoxactError, ConfigError, ContractError
from .evaluation import PredictionSet, VideoPrediction
from .forest import ForestModel, ForestParams, layout_fingerprint, predict_proba, train_forest
from .phases import (
    DEFAULT_SIGMA,
    DEFAULT_WINDOW_HALF_WIDTH,
    ActionModel,
    PhaseAssignment,
    assign_with_alternatives,
    builtin_models,
    load_action_model,
    relation_sequence,
    score_frames,
)
from .tracks import VideoTrack

__all__ = [
    "PipelineConfig",
    "EMBEDDING_MODES",
    "load_models",
    "make_provenance",
    "assign_track",
    "embed_all",
    "stratified_split",
    "train_forests",
    "predict_set",
]

EMBEDDING_MODES = ("full", "scores_only")


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs shared by the pipeline stages."""

    n: int = DEFAULT_WINDOW_HALF_WIDTH
    sigma: float = DEFAULT_SIGMA
    embedding_mode: str = "full"
    forest: ForestParams = field(default_factory=ForestParams)
    val_fraction: float = 0.25
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ConfigError("window half-width n must be non-negative")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.embedding_mode not in EMBEDDING_MODES:
            raise ConfigError(
                f"embedding_mode must be one of {EMBEDDING_MODES}, "
                f"got {self.embedding_mode!r}"
            )
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie strictly between 0 and 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @property
    def scores_only(self) -> bool:
        return self.embedding_mode == "scores_only"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "sigma": self.sigma,
            "embedding_mode": self.embedding_mode,
            "forest": {
                "num_trees": self.forest.num_trees,
                "max_depth": self.forest.max_depth,
                "min_samples_split": self.forest.min_samples_split,
                "features_per_split": self.forest.features_per_split,
                "bootstrap": self.forest.bootstrap,
                "seed": self.forest.seed,
                "class_weight": self.forest.class_weight,
            },
            "val_fraction": self.val_fraction,
            "seed": self.seed,
            "workers": self.workers,
        }


def make_provenance(config: PipelineConfig, stage: str) -> dict:
    """Deterministic provenance block: fingerprint and seed, no timestamps.

    The worker count is an execution detail with no effect on results, so it
    stays out of the fingerprint.
    """
    significant = {k: v for k, v in config.to_dict().items() if k != "workers"}
    canonical = json.dumps(significant, sort_keys=True)
    fingerprint = hashlib.sha256(canonical.encode()).hexdigest()[:16]
    return {
        "tool": "boxact",
        "version": _pkg_version,
        "stage": stage,
        "config_fingerprint": fingerprint,
        "seed": config.seed,
    }


def load_models(source: str) -> dict[str, ActionModel]:
    """Resolve a model source: 'builtin', a directory, or file paths."""
    if source == "builtin":
        return builtin_models()
    paths: list[Path] = []
    candidates = [Path(p) for p in source.split(",") if p]
    for p in candidates:
        if p.is_dir():
            found = sorted(p.glob("*.json"))
            if not found:
                raise ConfigError(f"model directory {p} contains no .json files")
            paths.extend(found)
        elif p.is_file():
            paths.append(p)
        else:
            raise ConfigError(f"action model path {p} does not exist")
    models: dict[str, ActionModel] = {}
    for path in paths:
        model = load_action_model(path)
        if model.action_id in models:
            raise ConfigError(
                f"duplicate action model {model.action_id!r} (from {path})"
            )
        models[model.action_id] = model
    if not models:
        raise ConfigError("no action models resolved")
    return models


# --- assignment and embedding ---------------------------------------------------


def assign_track(
    track: VideoTrack,
    models: Mapping[str, ActionModel],
    n: int = DEFAULT_WINDOW_HALF_WIDTH,
    sigma: float = DEFAULT_SIGMA,
    scores_only: bool = False,
) -> dict[str, tuple[VideoEmbedding, PhaseAssignment]]:
    """Embed one track under every action model.

    Both object orders share the per-frame relations, which are computed once
    per order rather than once per model (all reference models use the same
    thresholds; models with custom thresholds get their own pass).
    """
    cache: dict[tuple, tuple] = {}
    out: dict[str, tuple[VideoEmbedding, PhaseAssignment]] = {}
    for action in sorted(models):
        model = models[action]
        cfg_key = model.thresholds
        if (cfg_key, "as_annotated") not in cache:
            for order in ("as_annotated", "swapped"):
                cache[(cfg_key, order)] = relation_sequence(track, order, model.thresholds)
        rel_ann = cache[(cfg_key, "as_annotated")]
        rel_swap = cache[(cfg_key, "swapped")]
        matrix_ann = score_frames(track, model, "as_annotated", sigma, rel_ann)
        matrix_swap = score_frames(track, model, "swapped", sigma, rel_swap)
        assignment = assign_with_alternatives(matrix_ann, matrix_swap, n=n)
        matrix = matrix_ann if assignment.object_order == "as_annotated" else matrix_swap
        rels = rel_ann if assignment.object_order == "as_annotated" else rel_swap
        embedding = embed_video(
            track, assignment, matrix, model, scores_only=scores_only, relations=rels
        )
        out[action] = (embedding, assignment)
    return out


def _embed_worker(
    payload: tuple[VideoTrack, dict[str, ActionModel], int, float, bool],
) -> tuple[str, dict[str, tuple[VideoEmbedding, PhaseAssignment]]]:
    track, models, n, sigma, scores_only = payload
    try:
        return track.video_id, assign_track(track, models, n, sigma, scores_only)
    except BoxactError as exc:
        raise type(exc)(f"video {track.video_id!r}: {exc}") from None


def embed_all(
    tracks: Sequence[VideoTrack],
    models: Mapping[str, ActionModel],
    config: PipelineConfig,
) -> dict[str, dict[str, tuple[VideoEmbedding, PhaseAssignment]]]:
    """Per-video, per-action embeddings and assignments, optionally parallel."""
    ids = [t.video_id for t in tracks]
    if len(set(ids)) != len(ids):
        raise ContractError("duplicate video ids in track list")
    payloads = [
        (track, dict(models), config.n, config.sigma, config.scores_only)
        for track in tracks
    ]
    results: dict[str, dict[str, tuple[VideoEmbedding, PhaseAssignment]]] = {}
    if config.workers > 1 and len(tracks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for video_id, per_action in pool.map(_embed_worker, payloads, chunksize=8):
                results[video_id] = per_action
    else:
        for payload in payloads:
            video_id, per_action = _embed_worker(payload)
            results[video_id] = per_action
    return results


# --- splitting and training -----------------------------------------------------


def stratified_split(
    labels: Mapping[str, str], val_fraction: float, seed: int
) -> tuple[list[str], list[str]]:
    """Per-class shuffle and split; every class keeps at least one train video.

    Classes with a single video go entirely to the train side.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ConfigError("val_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    by_label: dict[str, list[str]] = {}
    for video_id in sorted(labels):
        by_label.setdefault(labels[video_id], []).append(video_id)
    train: list[str] = []
    val: list[str] = []
    for label in sorted(by_label):
        ids = by_label[label]
        order = rng.permutation(len(ids))
        k = int(round(val_fraction * len(ids)))
        k = min(k, len(ids) - 1)  # never strip a class of training videos
        val.extend(ids[i] for i in order[:k])
        train.extend(ids[i] for i in order[k:])
    return sorted(train), sorted(val)


def train_forests(
    embeddings: Mapping[str, Mapping[str, tuple[VideoEmbedding, PhaseAssignment]]],
    labels: Mapping[str, str],
    models: Mapping[str, ActionModel],
    config: PipelineConfig,
    video_ids: Sequence[str] | None = None,
) -> tuple[dict[str, ForestModel], list[str], dict[str, dict[str, int]]]:
    """One-vs-rest forest per action; single-class actions skipped with warning.

    Returns (forests, skipped actions, per-action sample counts).
    """
    ids = sorted(embeddings) if video_ids is None else list(video_ids)
    missing = [v for v in ids if v not in embeddings]
    if missing:
        raise ContractError(f"no embeddings for videos {missing}")
    forests: dict[str, ForestModel] = {}
    skipped: list[str] = []
    counts: dict[str, dict[str, int]] = {}
    for action in sorted(models):
        fingerprint = layout_fingerprint(
            embedding_layout(models[action], config.scores_only)
        )
        values = np.array([embeddings[v][action][0].values for v in ids])
        binary = np.array([1 if labels[v] == action else 0 for v in ids])
        counts[action] = {
            "positive": int(binary.sum()),
            "negative": int((1 - binary).sum()),
        }
        if binary.min() == binary.max():
            warnings.warn(
                f"action {action!r}: training data is single-class "
                f"({counts[action]}), skipping its detector",
                stacklevel=2,
            )
            skipped.append(action)
            continue
        forests[action] = train_forest(
            values,
            binary,
            params=config.forest,
            action_id=action,
            fingerprint=fingerprint,
        )
    return forests, skipped, counts


def predict_set(
    embeddings: Mapping[str, Mapping[str, tuple[VideoEmbedding, PhaseAssignment]]],
    labels: Mapping[str, str],
    forests: Mapping[str, ForestModel],
    models: Mapping[str, ActionModel],
    config: PipelineConfig,
    video_ids: Sequence[str] | None = None,
) -> PredictionSet:
    """Score every video with every action's forest on its own embedding."""
    if not forests:
        raise ContractError("no forests supplied")
    for action, forest in forests.items():
        if action not in models:
            raise ContractError(f"forest {action!r} has no matching action model")
        expected = layout_fingerprint(embedding_layout(models[action], config.scores_only))
        if forest.fingerprint and forest.fingerprint != expected:
            raise ContractError(
                f"forest {action!r} was trained on embedding layout "
                f"{forest.fingerprint} but the current model/mode produces "
                f"{expected}; retrain or fix --models/--mode"
            )
    ids = sorted(embeddings) if video_ids is None else list(video_ids)
    videos = []
    for video_id in ids:
        per_action = embeddings[video_id]
        probs = {
            action: predict_proba(forest, per_action[action][0].values)
            for action, forest in forests.items()
        }
        videos.append(
            VideoPrediction(
                video_id=video_id,
                true_label=labels.get(video_id, ""),
                probabilities=probs,
            )
        )
    return PredictionSet(videos=tuple(videos))
