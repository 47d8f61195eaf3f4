"""From-scratch binary random forest over video embeddings.

One forest per action detects that action's presence; multi-class decisions
take the forest with the highest probability.  Trees are grown by greedy
binary splitting on weighted Gini impurity, with candidate thresholds at
midpoints between consecutive distinct feature values.  Ties between equally
good splits break toward the lowest feature index, then the lowest threshold,
which makes training independent of sample order.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, ContractError

__all__ = [
    "ForestParams",
    "Leaf",
    "Split",
    "ForestModel",
    "layout_fingerprint",
    "train_tree",
    "train_forest",
    "predict_proba",
    "classify",
    "forest_to_dict",
    "forest_from_dict",
    "save_forest",
    "load_forest",
]

FOREST_FORMAT = "boxact-forest"
FOREST_VERSION = 1


@dataclass(frozen=True)
class ForestParams:
    num_trees: int = 200
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: int | str = "sqrt"
    bootstrap: bool = True
    seed: int = 0
    class_weight: str | None = None  # None or "balanced"

    def __post_init__(self) -> None:
        if self.num_trees < 1:
            raise ConfigError("num_trees must be at least 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be at least 1 when set")
        if self.min_samples_split < 2:
            raise ConfigError("min_samples_split must be at least 2")
        if isinstance(self.features_per_split, str):
            if self.features_per_split != "sqrt":
                raise ConfigError(
                    "features_per_split must be a positive integer or 'sqrt'"
                )
        elif self.features_per_split < 1:
            raise ConfigError("features_per_split must be a positive integer or 'sqrt'")
        if self.class_weight not in (None, "balanced"):
            raise ConfigError("class_weight must be None or 'balanced'")

    def resolve_features_per_split(self, num_features: int) -> int:
        if self.features_per_split == "sqrt":
            return max(1, int(math.sqrt(num_features)))
        return min(int(self.features_per_split), num_features)


@dataclass(frozen=True)
class Leaf:
    positive_fraction: float
    weight: float


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Leaf | Split"
    right: "Leaf | Split"


def _leaf(weights: np.ndarray, labels: np.ndarray) -> Leaf:
    total = float(weights.sum())
    pos = float(weights[labels == 1].sum())
    return Leaf(positive_fraction=pos / total, weight=total)


def _best_split(
    values: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    candidates: np.ndarray,
) -> tuple[float, int, float] | None:
    """Lowest weighted-Gini split over candidate features.

    Returns (impurity, feature, threshold) or None when every candidate
    feature is constant on this node.
    """
    best: tuple[float, int, float] | None = None
    total = weights.sum()
    for f in sorted(int(c) for c in candidates):
        col = values[:, f]
        order = np.argsort(col, kind="stable")
        v = col[order]
        w = weights[order]
        wp = np.where(labels[order] == 1, w, 0.0)
        cw = np.cumsum(w)
        cwp = np.cumsum(wp)
        # split after position i: left = [0..i], right = (i..n)
        distinct = np.nonzero(v[1:] > v[:-1])[0]
        if distinct.size == 0:
            continue
        wl = cw[distinct]
        wpl = cwp[distinct]
        wr = total - wl
        wpr = cwp[-1] - wpl
        pl = wpl / wl
        pr = wpr / wr
        gini = wl * 2.0 * pl * (1.0 - pl) + wr * 2.0 * pr * (1.0 - pr)
        gini = gini / total
        thresholds = (v[distinct] + v[distinct + 1]) / 2.0
        i = int(np.argmin(gini))
        # exact ties within one feature resolve to the lowest threshold,
        # which argmin's first-hit rule already gives on sorted thresholds
        cand = (float(gini[i]), f, float(thresholds[i]))
        if best is None or cand[0] < best[0] - 1e-12:
            best = cand
    return best


def _grow(
    values: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    params: ForestParams,
    rng: np.random.Generator,
    depth: int,
) -> Leaf | Split:
    n = labels.size
    pure = labels.min() == labels.max()
    if (
        pure
        or n < params.min_samples_split
        or (params.max_depth is not None and depth >= params.max_depth)
    ):
        return _leaf(weights, labels)
    m = params.resolve_features_per_split(values.shape[1])
    candidates = rng.choice(values.shape[1], size=m, replace=False)
    found = _best_split(values, labels, weights, candidates)
    if found is None:
        return _leaf(weights, labels)
    _, f, threshold = found
    mask = values[:, f] <= threshold
    left = _grow(values[mask], labels[mask], weights[mask], params, rng, depth + 1)
    right = _grow(values[~mask], labels[~mask], weights[~mask], params, rng, depth + 1)
    return Split(feature=f, threshold=threshold, left=left, right=right)


def train_tree(
    values: np.ndarray,
    labels: np.ndarray,
    params: ForestParams,
    rng: np.random.Generator,
    weights: np.ndarray | None = None,
) -> Leaf | Split:
    """Grow one tree on the given sample (no bootstrap at this level)."""
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels).astype(int)
    if values.ndim != 2 or labels.shape != (values.shape[0],):
        raise ContractError("train_tree expects values (n, d) and labels (n,)")
    if labels.size == 0:
        raise ContractError("train_tree needs at least one sample")
    if weights is None:
        weights = np.ones(labels.size)
    return _grow(values, labels, weights, params, rng, depth=0)


@dataclass(frozen=True)
class ForestModel:
    action_id: str
    trees: tuple[Leaf | Split, ...]
    params: ForestParams
    num_features: int
    fingerprint: str = ""

    def with_fingerprint(self, fingerprint: str) -> "ForestModel":
        return replace(self, fingerprint=fingerprint)


def layout_fingerprint(layout: Sequence[str]) -> str:
    digest = hashlib.sha256("\n".join(layout).encode())
    return digest.hexdigest()[:16]


def train_forest(
    values: np.ndarray,
    labels: np.ndarray,
    params: ForestParams = ForestParams(),
    action_id: str = "",
    fingerprint: str = "",
) -> ForestModel:
    """Train ``num_trees`` trees on deterministic per-tree random sub-streams."""
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels).astype(int)
    if values.ndim != 2 or labels.shape != (values.shape[0],):
        raise ContractError("train_forest expects values (n, d) and labels (n,)")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ContractError(
            f"forest {action_id or '(unnamed)'}: training data has "
            f"{n_pos} positive and {n_neg} negative samples; a binary "
            "detector needs both classes"
        )
    n = labels.size
    if params.class_weight == "balanced":
        per_class = {0: n / (2.0 * n_neg), 1: n / (2.0 * n_pos)}
        weights = np.array([per_class[int(y)] for y in labels])
    else:
        weights = np.ones(n)
    streams = np.random.SeedSequence(params.seed).spawn(params.num_trees)
    trees = []
    for stream in streams:
        rng = np.random.default_rng(stream)
        if params.bootstrap:
            idx = rng.integers(0, n, size=n)
            sample = (values[idx], labels[idx], weights[idx])
        else:
            sample = (values, labels, weights)
        trees.append(train_tree(sample[0], sample[1], params, rng, sample[2]))
    return ForestModel(
        action_id=action_id,
        trees=tuple(trees),
        params=params,
        num_features=values.shape[1],
        fingerprint=fingerprint,
    )


def _tree_predict(node: Leaf | Split, v: np.ndarray) -> float:
    while isinstance(node, Split):
        node = node.left if v[node.feature] <= node.threshold else node.right
    return node.positive_fraction


def predict_proba(model: ForestModel, values: np.ndarray) -> float:
    """Mean of the trees' leaf fractions for one embedding vector."""
    v = np.asarray(values, dtype=float)
    if v.shape != (model.num_features,):
        raise ContractError(
            f"forest {model.action_id!r} expects {model.num_features} features, "
            f"got shape {v.shape}"
        )
    return float(np.mean([_tree_predict(t, v) for t in model.trees]))


def classify(
    models: Mapping[str, ForestModel],
    embeddings: Mapping[str, np.ndarray],
) -> tuple[str, dict[str, float]]:
    """Highest-probability action; exact ties go to the lowest action id."""
    if not models:
        raise ContractError("classify needs at least one model")
    missing = sorted(set(models) - set(embeddings))
    if missing:
        raise ContractError(f"no embedding supplied for actions {missing}")
    probs = {
        action: predict_proba(model, embeddings[action])
        for action, model in models.items()
    }
    winner = max(sorted(probs), key=lambda a: probs[a])
    return winner, probs


# --- serialization -------------------------------------------------------------


def _node_to_dict(node: Leaf | Split) -> dict:
    if isinstance(node, Leaf):
        return {"fraction": node.positive_fraction, "weight": node.weight}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(data: Mapping, num_features: int) -> Leaf | Split:
    if "fraction" in data:
        fraction = float(data["fraction"])
        if not 0.0 <= fraction <= 1.0:
            raise ConfigError(f"leaf fraction {fraction} outside [0, 1]")
        return Leaf(positive_fraction=fraction, weight=float(data.get("weight", 0.0)))
    feature = int(data["feature"])
    if not 0 <= feature < num_features:
        raise ConfigError(
            f"node feature index {feature} outside embedding length {num_features}"
        )
    return Split(
        feature=feature,
        threshold=float(data["threshold"]),
        left=_node_from_dict(data["left"], num_features),
        right=_node_from_dict(data["right"], num_features),
    )


def forest_to_dict(model: ForestModel) -> dict:
    return {
        "format": FOREST_FORMAT,
        "version": FOREST_VERSION,
        "action_id": model.action_id,
        "num_features": model.num_features,
        "fingerprint": model.fingerprint,
        "params": {
            "num_trees": model.params.num_trees,
            "max_depth": model.params.max_depth,
            "min_samples_split": model.params.min_samples_split,
            "features_per_split": model.params.features_per_split,
            "bootstrap": model.params.bootstrap,
            "seed": model.params.seed,
            "class_weight": model.params.class_weight,
        },
        "trees": [_node_to_dict(t) for t in model.trees],
    }


def forest_from_dict(data: Mapping) -> ForestModel:
    if data.get("format") != FOREST_FORMAT:
        raise ConfigError("not a serialized forest model")
    if data.get("version") != FOREST_VERSION:
        raise ConfigError(f"unsupported forest version {data.get('version')!r}")
    params = ForestParams(**data["params"])
    num_features = int(data["num_features"])
    trees = tuple(_node_from_dict(t, num_features) for t in data["trees"])
    return ForestModel(
        action_id=str(data["action_id"]),
        trees=trees,
        params=params,
        num_features=num_features,
        fingerprint=str(data.get("fingerprint", "")),
    )


def save_forest(model: ForestModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(forest_to_dict(model), sort_keys=True) + "\n")


def load_forest(path: str | Path) -> ForestModel:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from None
    return forest_from_dict(data)
