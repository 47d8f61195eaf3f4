"""End-to-end coverage of the command-line pipeline on small corpora."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from boxact.cli import main
from boxact.evaluation import load_predictions
from boxact.forest import load_forest
from boxact.tracks import load_annotation_file

GEN = [
    "generate",
    "--archetypes",
    "put-into,take-out-of",
    "--count",
    "4",
    "--seed",
    "1",
]


def _model_paths(root: Path) -> Path:
    """A model directory holding only the two generated archetypes."""
    from boxact.phases import builtin_models, save_action_model

    model_dir = root / "models"
    if not model_dir.exists():
        model_dir.mkdir()
        models = builtin_models()
        for action in ("put-into", "take-out-of"):
            save_action_model(models[action], model_dir / f"{action}.json")
    return model_dir


@pytest.fixture(scope="module")
def workdir(tmp_path_factory) -> Path:
    """One generated corpus with a trained forest directory."""
    root = tmp_path_factory.mktemp("cli")
    ann = root / "ann.json"
    truth = root / "truth.json"
    assert main(GEN + ["--out", str(ann), "--truth", str(truth)]) == 0
    assert (
        main(
            [
                "train",
                "--annotations",
                str(ann),
                "--models",
                str(_model_paths(root)),
                "--out-dir",
                str(root / "forests"),
                "--num-trees",
                "4",
                "--seed",
                "1",
            ]
        )
        == 0
    )
    return root


def test_generate_is_deterministic(tmp_path):
    for d in ("one", "two"):
        (tmp_path / d).mkdir()
        code = main(
            GEN
            + [
                "--out",
                str(tmp_path / d / "ann.json"),
                "--truth",
                str(tmp_path / d / "truth.json"),
            ]
        )
        assert code == 0
    assert (tmp_path / "one/ann.json").read_bytes() == (
        tmp_path / "two/ann.json"
    ).read_bytes()
    assert (tmp_path / "one/truth.json").read_bytes() == (
        tmp_path / "two/truth.json"
    ).read_bytes()


def test_generate_writes_labels_and_truth(workdir):
    tracks = load_annotation_file(workdir / "ann.json")
    assert len(tracks) == 8
    assert {t.label for t in tracks} == {"put-into", "take-out-of"}
    truth = json.loads((workdir / "truth.json").read_text())
    assert truth["format"] == "boxact-ground-truth"
    assert set(truth["videos"]) == {t.video_id for t in tracks}
    assert "provenance" in truth


def test_generate_count_zero_is_a_valid_empty_file(tmp_path):
    out = tmp_path / "empty.json"
    assert main(["generate", "--out", str(out), "--count", "0"]) == 0
    assert load_annotation_file(out) == []


def test_generate_rejects_unknown_archetype(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--out", str(tmp_path / "x.json"), "--archetypes", "juggle"])
    assert exc.value.code == 2


def test_generate_rejects_preset_and_explicit_noise(tmp_path):
    argv = [
        "generate",
        "--out",
        str(tmp_path / "x.json"),
        "--noise",
        "moderate",
        "--jitter",
        "1.0",
    ]
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_generate_rejects_unknown_preset(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--out", str(tmp_path / "x.json"), "--noise", "extreme"])
    assert exc.value.code == 2


def test_generate_from_scripts(tmp_path):
    scripts = [
        {
            "archetype": "put-into",
            "num_frames": 60,
            "true_phase_centers": {"a": 0, "b": 15, "c": 29, "d": 44, "e": 59},
            "video_id": "scripted-0",
            "layout_seed": 9,
        }
    ]
    scripts_path = tmp_path / "scripts.json"
    scripts_path.write_text(json.dumps(scripts))
    out = tmp_path / "ann.json"
    code = main(
        ["generate", "--out", str(out), "--from-scripts", str(scripts_path)]
    )
    assert code == 0
    tracks = load_annotation_file(out)
    assert [t.video_id for t in tracks] == ["scripted-0"]


def test_assign_writes_one_record_per_video_and_model(workdir, tmp_path):
    out = tmp_path / "assign.json"
    code = main(
        [
            "assign",
            "--annotations",
            str(workdir / "ann.json"),
            "--models",
            "builtin",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["format"] == "boxact-assignments"
    assert len(doc["records"]) == 8 * 5
    rec = doc["records"][0]
    assert set(rec) == {
        "video_id",
        "action_id",
        "object_order",
        "b_choice",
        "centers",
        "windows",
        "total_score",
        "degenerate",
    }


def test_assign_handles_empty_annotation_files(tmp_path):
    ann = tmp_path / "empty.json"
    ann.write_text("[]\n")
    out = tmp_path / "assign.json"
    assert main(["assign", "--annotations", str(ann), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["records"] == []


def test_assign_flags_short_tracks_as_degenerate(tmp_path):
    ann = tmp_path / "short.json"
    frames = [
        {
            "idx": i,
            "boxes": [{"role": "object2", "x": 100, "y": 80, "w": 40, "h": 30}],
        }
        for i in range(3)
    ]
    ann.write_text(
        json.dumps([{"id": "tiny", "width": 320, "height": 240, "frames": frames}])
    )
    out = tmp_path / "assign.json"
    assert main(["assign", "--annotations", str(ann), "--out", str(out)]) == 0
    records = json.loads(out.read_text())["records"]
    assert records and all(r["degenerate"] for r in records)


def test_embed_writes_records(workdir, tmp_path):
    out = tmp_path / "emb.json"
    code = main(
        ["embed", "--annotations", str(workdir / "ann.json"), "--out", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["format"] == "boxact-embeddings"
    assert len(doc["records"]) == 8 * 5


def test_train_outputs(workdir):
    forest_dir = workdir / "forests"
    files = sorted(p.name for p in forest_dir.glob("forest_*.json"))
    # only the two generated archetypes have positives; the other builtins
    # never appear as labels, so train was invoked with just these models
    assert files == ["forest_put-into.json", "forest_take-out-of.json"]
    split = json.loads((forest_dir / "split.json").read_text())
    assert split["format"] == "boxact-split"
    assert len(split["train"]) == 6 and len(split["val"]) == 2
    log = json.loads((forest_dir / "train_log.json").read_text())
    assert log["trained"] == ["put-into", "take-out-of"]
    assert log["counts"]["put-into"]["positive"] == 3
    forest = load_forest(forest_dir / "forest_put-into.json")
    assert forest.params.num_trees == 4


def test_train_is_deterministic(workdir, tmp_path):
    code = main(
        [
            "train",
            "--annotations",
            str(workdir / "ann.json"),
            "--models",
            str(_model_paths(workdir)),
            "--out-dir",
            str(tmp_path / "again"),
            "--num-trees",
            "4",
            "--seed",
            "1",
        ]
    )
    assert code == 0
    for name in ("forest_put-into.json", "forest_take-out-of.json", "split.json"):
        assert (tmp_path / "again" / name).read_bytes() == (
            workdir / "forests" / name
        ).read_bytes()


def test_train_exit_code_flags_skipped_actions(tmp_path):
    ann = tmp_path / "one-class.json"
    assert (
        main(
            [
                "generate",
                "--out",
                str(ann),
                "--archetypes",
                "put-into",
                "--count",
                "4",
            ]
        )
        == 0
    )
    with pytest.warns(UserWarning, match="single-class"):
        code = main(
            [
                "train",
                "--annotations",
                str(ann),
                "--out-dir",
                str(tmp_path / "forests"),
                "--num-trees",
                "4",
            ]
        )
    assert code == 1


def test_train_requires_labels(tmp_path):
    ann = tmp_path / "unlabeled.json"
    frames = [
        {"idx": 0, "boxes": [{"role": "object2", "x": 1, "y": 1, "w": 5, "h": 5}]}
    ]
    ann.write_text(
        json.dumps([{"id": "v0", "width": 320, "height": 240, "frames": frames}])
    )
    code = main(
        ["train", "--annotations", str(ann), "--out-dir", str(tmp_path / "f")]
    )
    assert code == 1


def test_predict_and_eval_chain(workdir, tmp_path, capsys):
    preds_path = tmp_path / "preds.json"
    code = main(
        [
            "predict",
            "--annotations",
            str(workdir / "ann.json"),
            "--models",
            str(_model_paths(workdir)),
            "--forest-dir",
            str(workdir / "forests"),
            "--split",
            str(workdir / "forests" / "split.json"),
            "--subset",
            "val",
            "--out",
            str(preds_path),
        ]
    )
    assert code == 0
    preds = load_predictions(preds_path)
    assert len(preds) == 2
    assert preds.actions == ("put-into", "take-out-of")

    report_dir = tmp_path / "report"
    capsys.readouterr()
    code = main(
        ["eval", "--predictions", str(preds_path), "--out-dir", str(report_dir)]
    )
    assert code == 0
    table = capsys.readouterr().out
    assert "weighted mAP" in table and "accuracy" in table
    assert (report_dir / "report.json").exists()
    assert (report_dir / "report.txt").exists()
    assert (report_dir / "confusion.csv").read_text().startswith("true\\predicted,")

    fused_path = tmp_path / "fused.json"
    code = main(
        [
            "fuse",
            "--predictions",
            str(preds_path),
            "--external",
            str(preds_path),
            "--out",
            str(fused_path),
        ]
    )
    assert code == 0
    fused = load_predictions(fused_path)
    by_id = {v.video_id: v for v in preds.videos}
    for v in fused.videos:
        for action, p in v.probabilities.items():
            assert p == pytest.approx(2 * by_id[v.video_id].probabilities[action])


def test_predict_rejects_mismatched_embedding_mode(workdir, tmp_path):
    code = main(
        [
            "predict",
            "--annotations",
            str(workdir / "ann.json"),
            "--models",
            str(_model_paths(workdir)),
            "--forest-dir",
            str(workdir / "forests"),
            "--mode",
            "scores_only",
            "--out",
            str(tmp_path / "preds.json"),
        ]
    )
    assert code == 1


def test_missing_input_file_exits_cleanly(tmp_path):
    assert main(["eval", "--predictions", str(tmp_path / "nope.json")]) == 1


def test_unknown_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["dance"])
    assert exc.value.code == 2


def test_sweep_writes_a_grid(workdir, tmp_path, capsys):
    out = tmp_path / "sweep.json"
    code = main(
        [
            "sweep",
            "--annotations",
            str(workdir / "ann.json"),
            "--models",
            str(_model_paths(workdir)),
            "--sigmas",
            "2",
            "--ns",
            "3",
            "--num-trees",
            "4",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["format"] == "boxact-sweep"
    assert len(doc["rows"]) == 1
    row = doc["rows"][0]
    assert set(row) >= {"sigma", "n", "accuracy", "weighted_map"}
    assert "accuracy" in capsys.readouterr().out
