from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boxact.embedding import (
    STAT_NAMES,
    VideoEmbedding,
    dump_embeddings,
    embed_track,
    embed_video,
    embedding_layout,
    embedding_length,
    load_embeddings,
    phase_feature,
)
from boxact.errors import AnnotationError, ContractError
from boxact.phases import (
    PHASES,
    ActionModel,
    Term,
    best_assignment,
    builtin_model,
    score_frames,
)
from boxact.synthetic import SyntheticScript, generate_synthetic

from conftest import moving_track


def _model() -> ActionModel:
    present = lambda e, **kw: Term("present", (e,), **kw)
    return ActionModel(
        action_id="tiny",
        phases={
            "a": (present("object2"),),
            "b": (present("hand", weight=2.0),),
            "c": (present("hand"), present("object1")),
            "d": (present("hand", negate=True),),
            "e": (present("object1"),),
        },
    )


def _clean_video():
    script = SyntheticScript(
        archetype="put-into",
        num_frames=60,
        true_phase_centers={"a": 0, "b": 15, "c": 29, "d": 44, "e": 59},
        video_id="v-embed",
        layout_seed=3,
    )
    return generate_synthetic(script)[0]


# --- statistics blocks ----------------------------------------------------------


def test_phase_feature_frozen_stats():
    block = phase_feature("b", np.array([2.0, 3.0, 4.0, 5.0]), (None,) * 4, ())
    assert block.score_stats == (3.5, 3.5, 5.0, 2.0)
    assert block.assigned


def test_phase_feature_empty_window_is_the_unassigned_path():
    block = phase_feature("c", np.empty(0), (), ("present(hand)",))
    assert not block.assigned
    assert block.score_stats == (0.0, 0.0, 0.0, 0.0)
    assert block.feature_stats["present(hand)"] == (0.0, 0.0, 0.0, 0.0)
    assert block.flat(("present(hand)",), scores_only=False) == [0.0] * 9


def test_phase_feature_length_mismatch():
    with pytest.raises(ContractError, match="2 scores but 1 frames"):
        phase_feature("b", np.array([1.0, 2.0]), (object(),), ())


@given(
    st.lists(
        st.floats(min_value=-100, max_value=100, allow_nan=False),
        min_size=1,
        max_size=20,
    )
)
@settings(max_examples=100, deadline=None)
def test_stat_ordering(scores):
    block = phase_feature("a", np.array(scores), [None] * len(scores), ())
    mean, med, mx, mn = block.score_stats
    assert mn <= med <= mx
    assert mn <= mean <= mx


# --- layout -----------------------------------------------------------------------


def test_layout_names_and_order():
    layout = embedding_layout(_model())
    # per phase: 4 score stats, 4 stats per referenced feature, 1 flag
    assert len(layout) == embedding_length(_model()) == 5 * (1 + 3) * 4 + 5
    assert layout[0] == "a:score:mean"
    assert layout[3] == "a:score:min"
    assert layout[4] == "a:present(hand):mean"
    assert layout[16] == "a:assigned"
    assert layout[17] == "b:score:mean"
    assert layout[-1] == "e:assigned"


def test_scores_only_layout():
    layout = embedding_layout(_model(), scores_only=True)
    assert len(layout) == embedding_length(_model(), scores_only=True) == 25
    assert all(":score:" in name or name.endswith(":assigned") for name in layout)


def test_builtin_model_layout_length():
    model = builtin_model("put-into")
    f = len(model.feature_list)
    assert embedding_length(model) == 5 * (1 + f) * 4 + 5


# --- embedding a track --------------------------------------------------------------


def test_embed_track_matches_manual_stats():
    track = _clean_video()
    model = _model()
    emb, assignment = embed_track(track, model)
    assert emb.action_id == "tiny" and emb.video_id == "v-embed"
    assert emb.values.shape == (embedding_length(model),)
    matrix = score_frames(track, model, assignment.object_order)
    idx = emb.index
    for p in assignment.assigned_phases():
        lo, hi = assignment.windows[p]
        window = matrix.row(p, kind="raw")[lo : hi + 1]
        assert emb.values[idx[f"{p}:score:mean"]] == pytest.approx(window.mean())
        assert emb.values[idx[f"{p}:score:max"]] == pytest.approx(window.max())
        assert emb.values[idx[f"{p}:score:min"]] == pytest.approx(window.min())
        assert emb.values[idx[f"{p}:score:med"]] == pytest.approx(np.median(window))
        assert emb.values[idx[f"{p}:assigned"]] == 1.0


def test_scores_only_is_a_subvector_of_full():
    track = _clean_video()
    model = _model()
    full, _ = embed_track(track, model)
    slim, _ = embed_track(track, model, scores_only=True)
    fidx = full.index
    for name, value in zip(slim.layout, slim.values):
        assert value == full.values[fidx[name]]


def test_unassigned_phases_embed_as_zero_blocks():
    # three frames cannot host five phases
    track = moving_track({"object2": [(50, 50)] * 3, "hand": [None, (20, 20), None]})
    emb, assignment = embed_track(track, _model())
    flags = emb.assigned_flags()
    assert not assignment.fully_assigned
    unassigned = [p for p in PHASES if assignment.centers[p] is None]
    assert unassigned
    idx = emb.index
    for p in unassigned:
        assert not flags[p]
        assert emb.values[idx[f"{p}:score:mean"]] == 0.0
        assert emb.values[idx[f"{p}:present(hand):max"]] == 0.0


def test_embed_video_validates_consistency():
    track = _clean_video()
    model = _model()
    emb, assignment = embed_track(track, model)
    matrix = score_frames(track, model, assignment.object_order)
    other = builtin_model("put-into")
    with pytest.raises(ContractError, match="action mismatch"):
        embed_video(track, assignment, matrix, other)
    swapped = score_frames(track, model, "swapped")
    if assignment.object_order == "as_annotated":
        with pytest.raises(ContractError, match="object order mismatch"):
            embed_video(track, assignment, swapped, model)


def test_embedding_shape_validation():
    with pytest.raises(ContractError, match="3 values for a layout of 2"):
        VideoEmbedding("a", "v", np.zeros(3), ("x", "y"))


# --- serialization -------------------------------------------------------------------


def test_dump_load_round_trip(tmp_path):
    track = _clean_video()
    emb, _ = embed_track(track, _model())
    path = tmp_path / "emb.json"
    dump_embeddings([emb], path, provenance={"stage": "test"})
    loaded = load_embeddings(path)
    assert len(loaded) == 1
    got = loaded[0]
    assert got.action_id == emb.action_id
    assert got.video_id == emb.video_id
    assert got.layout == emb.layout
    assert np.array_equal(got.values, emb.values)


def test_load_rejects_other_files(tmp_path):
    path = tmp_path / "other.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(AnnotationError, match="not an embedding dump"):
        load_embeddings(path)
