import json
import random
import shutil

import pytest

from splp import cli, metrics
from splp.detections import make_rng, make_scene
from splp.model import DetectionSet, Mode, dumps, loads, make_classes, LSP14


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Six synthetic scenes, a trained model and predictions."""
    root = tmp_path_factory.mktemp("pipe")
    data = root / "data"
    assert cli.main(["synth", "--out", str(data), "--n", "6", "--seed", "4",
                     "--persons-min", "1", "--persons-max", "3"]) == 0
    model = root / "model.json"
    assert cli.main(["train", "--scenes", str(data), "--out", str(model)]) == 0
    pred = root / "pred"
    code = cli.main(["solve", "--scene", str(data), "--model", str(model), "--out", str(pred),
                     "--subset", "24", "--max-nodes", "40", "--time-limit", "600"])
    assert code in (cli.EXIT_OK, cli.EXIT_LIMIT)
    return root, data, model, pred


def test_synth_zero_scenes(tmp_path):
    assert cli.main(["synth", "--out", str(tmp_path), "--n", "0"]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.json"]
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seed"] == 0 and man["scenes"] == []


def test_synth_counts_and_determinism(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["synth", "--out", str(tmp_path / d), "--n", "10", "--seed", "9",
                         "--persons-min", "3", "--persons-max", "3"]) == 0
    a = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len([n for n in a if n.startswith("scene_")]) == 10
    assert len([n for n in a if n.startswith("gt_")]) == 10
    for name in a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    gt = loads((tmp_path / "a" / "gt_0000.json").read_text())
    assert len(gt.persons) == 3


def test_pipeline_outputs(corpus):
    root, data, model, pred = corpus
    preds = sorted(p.name for p in pred.glob("pred_*.json") if p.name.count(".") == 1)
    assert preds == [f"pred_{i:04d}.json" for i in range(6)]
    rep = json.loads((pred / "pred_0000.report.json").read_text())
    assert rep["status"] in ("optimal", "gap_reached", "limit")
    assert rep["lower_bound"] <= rep["best_objective"] + 1e-9
    out = root / "eval.json"
    assert cli.main(["eval", "--pred", str(pred), "--gt", str(data), "--out", str(out)]) == 0
    got = json.loads(out.read_text())
    assert got["scenes"] == 6 and 0.0 <= got["ap"]["mean"] <= 1.0


def test_train_is_byte_identical(corpus, tmp_path):
    _, data, model, _ = corpus
    again = tmp_path / "model.json"
    assert cli.main(["train", "--scenes", str(data), "--out", str(again)]) == 0
    assert again.read_bytes() == model.read_bytes()


def test_solve_is_byte_identical(corpus, tmp_path):
    _, data, model, pred = corpus
    out = tmp_path / "p.json"
    cli.main(["solve", "--scene", str(data / "scene_0001.json"), "--model", str(model), "--out", str(out),
              "--subset", "24", "--max-nodes", "40", "--time-limit", "600"])
    assert out.read_bytes() == (pred / "pred_0001.json").read_bytes()


def test_eval_matches_library(corpus):
    _, data, _, pred = corpus
    rep, _ = cli.evaluate_files(pred, data, Mode.MULTI, metrics.MatchConfig())
    P = [loads((pred / f"pred_{i:04d}.json").read_text()) for i in range(6)]
    G = [loads((data / f"gt_{i:04d}.json").read_text()) for i in range(6)]
    assert rep["ap"]["mean"] == metrics.map_multi(P, G).mean
    assert rep["aop"] == metrics.aop(P, G)


def test_eval_file_order_irrelevant(corpus, tmp_path):
    _, data, _, pred = corpus
    a, _ = cli.evaluate_files(pred, data, Mode.MULTI, metrics.MatchConfig())
    # same scenes under a shuffled creation order
    names = [p.name for p in pred.glob("pred_*.json")]
    random.Random(1).shuffle(names)
    for n in names:
        shutil.copy(pred / n, tmp_path / n)
    b, _ = cli.evaluate_files(tmp_path, data, Mode.MULTI, metrics.MatchConfig())
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_eval_gt_as_prediction_is_perfect(corpus, tmp_path):
    _, data, _, _ = corpus
    for i in range(6):
        gt = loads((data / f"gt_{i:04d}.json").read_text())
        (tmp_path / f"pred_{i:04d}.json").write_text(dumps(metrics.gt_as_prediction(gt)))
    rep, _ = cli.evaluate_files(tmp_path, data, Mode.MULTI, metrics.MatchConfig(), min_parts=1)
    assert rep["ap"]["mean"] == 1.0 and rep["aop"] == 1.0 and rep["person_count_accuracy"] == 1.0
    rep, _ = cli.evaluate_files(tmp_path, data, Mode.SINGLE, metrics.MatchConfig())
    assert rep["pck"]["mean"] == 1.0 and rep["pcp"]["mean"] == 1.0 and rep["auc"] == 1.0


def test_eval_mismatched_sets(corpus, tmp_path, capsys):
    _, data, _, pred = corpus
    shutil.copy(pred / "pred_0000.json", tmp_path / "pred_0000.json")
    shutil.copy(pred / "pred_0001.json", tmp_path / "pred_0007.json")
    assert cli.main(["eval", "--pred", str(tmp_path), "--gt", str(data)]) == cli.EXIT_ERROR
    err = capsys.readouterr().err
    assert "0001" in err and "0002" in err and "0007" in err


def test_empty_scene(corpus, tmp_path):
    _, _, model, _ = corpus
    scene = tmp_path / "scene_x.json"
    scene.write_text(dumps(DetectionSet((), make_classes(LSP14))))
    out = tmp_path / "poses.json"
    assert cli.main(["solve", "--scene", str(scene), "--model", str(model), "--out", str(out)]) == 0
    assert loads(out.read_text()).persons == ()
    assert json.loads(out.with_suffix(".report.json").read_text())["best_objective"] == 0.0


def test_single_mode_one_cluster(corpus, tmp_path):
    _, _, model, _ = corpus
    src = tmp_path / "one"
    cli.main(["synth", "--out", str(src), "--n", "1", "--seed", "2", "--persons-min", "1", "--persons-max", "1",
              "--clutter-rate", "0"])
    out = tmp_path / "p.json"
    cli.main(["solve", "--scene", str(src / "scene_0000.json"), "--model", str(model), "--out", str(out),
              "--mode", "single", "--subset", "20", "--max-nodes", "40", "--time-limit", "600"])
    assert len(loads(out.read_text()).persons) <= 1


def test_config_precedence(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"gap": 0.05, "time-limit": 7}))
    a = cli.parse_args(["--config", str(conf), "solve", "--scene", "s", "--model", "m", "--out", "o",
                        "--gap", "0.2"])
    assert a.gap == 0.2 and a.time_limit == 7
    a = cli.parse_args(["solve", "--scene", "s", "--model", "m", "--out", "o"])
    assert a.gap == 0.01 and a.subset == 100
    conf.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(SystemExit):
        cli.parse_args(["--config", str(conf), "solve", "--scene", "s", "--model", "m", "--out", "o"])


def test_train_names_class_pair_without_data(tmp_path, capsys):
    cli.main(["synth", "--out", str(tmp_path), "--n", "1", "--seed", "4", "--persons-min", "1",
              "--persons-max", "1"])
    assert cli.main(["train", "--scenes", str(tmp_path), "--out", str(tmp_path / "m.json")]) == cli.EXIT_ERROR
    assert "class pair" in capsys.readouterr().err


def test_missing_input_reports_path(tmp_path, capsys):
    assert cli.main(["train", "--scenes", str(tmp_path / "nope"), "--out", str(tmp_path / "m.json")]) == 1
    assert "nope" in capsys.readouterr().err


def test_oracle_command(tmp_path):
    out = tmp_path / "o.json"
    assert cli.main(["oracle", "--n", "4", "--classes", "2", "--seed", "3", "--compare", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["agree"] and abs(doc["objective"] - doc["solver_objective"]) <= 1e-9


def test_synth_scene_independent_of_count(tmp_path):
    cli.main(["synth", "--out", str(tmp_path / "a"), "--n", "2", "--seed", "5"])
    cli.main(["synth", "--out", str(tmp_path / "b"), "--n", "4", "--seed", "5"])
    assert (tmp_path / "a" / "scene_0001.json").read_bytes() == (tmp_path / "b" / "scene_0001.json").read_bytes()
    assert make_scene(make_rng([5, 0]), 1) is not None
