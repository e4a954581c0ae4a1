"""Command line: ``splp {synth,train,solve,eval,oracle,bench}``.

Options may also come from ``--config FILE`` (JSON object keyed by option
name, dashes or underscores); explicit flags win over the file, the file
wins over built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
import tempfile
from pathlib import Path

from . import metrics
from .detections import DEFAULT_SUBSET, NoiseConfig, generate_scene, make_rng, make_scene, select_subset
from .model import SCHEMA_VERSION, DetectionSet, GroundTruthScene, Mode, PoseResult, dumps, loads, random_instance
from .objective import build_instance
from .pairwise import PairwiseModel, TrainingConfig, train_model
from .solver import SolverConfig, Status, brute_force, extract_poses, solve

log = logging.getLogger("splp")

EXIT_OK, EXIT_ERROR, EXIT_LIMIT = 0, 1, 2


# ---------------------------------------------------------------------------
# files


def write_atomic(path, text: str):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_doc(path):
    try:
        return loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError) as e:
        raise CliError(f"{path}: {e}") from e


_ID = re.compile(r"^(?:scene|gt|pred|poses)_")


def scene_id(path) -> str:
    return _ID.sub("", Path(path).stem)


def collect(path, prefix="") -> dict:
    """``{scene id: file}`` for a file or every ``prefix*.json`` in a directory."""
    path = Path(path)
    if path.is_file():
        return {scene_id(path): path}
    if not path.is_dir():
        raise CliError(f"{path}: no such file or directory")
    # sidecars such as pred_0001.report.json carry a second suffix
    return {scene_id(p): p for p in sorted(path.glob(f"{prefix}*.json"))
            if p.name != "manifest.json" and "." not in p.stem}


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# commands


def cmd_synth(a):
    out = Path(a.out)
    noise = NoiseConfig(
        loc_sigma=a.loc_sigma, loc_sigma_h=a.loc_sigma_h, scale_sigma=a.scale_sigma,
        unary_concentration=a.concentration, clutter_rate=a.clutter_rate, miss_rate=a.miss_rate,
        dup_mean=a.dup_mean, normalization=a.normalization, rng_seed=a.seed,
    )
    files = []
    for i in range(a.n):
        # one independent stream per scene, so scene i does not depend on n
        rng = make_rng([a.seed, i])
        gt = make_scene(rng, int(rng.integers(a.persons_min, a.persons_max + 1)), (a.width, a.height))
        dets = generate_scene(gt, noise, rng)
        sid = f"{i:04d}"
        write_atomic(out / f"scene_{sid}.json", dumps(dets))
        write_atomic(out / f"gt_{sid}.json", dumps(gt))
        files.append(sid)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": "synth_manifest",
        "seed": a.seed,
        "n": a.n,
        "persons": [a.persons_min, a.persons_max],
        "image_size": [a.width, a.height],
        "noise": noise.to_dict(),
        "scenes": files,
    }
    write_atomic(out / "manifest.json", dumps(manifest))
    print(f"wrote {a.n} scenes to {out}")
    return EXIT_OK


def cmd_train(a):
    scenes = [read_doc(p) for p in collect(a.scenes, "scene_").values()]
    if not scenes:
        raise CliError(f"{a.scenes}: no scene files")
    nc = scenes[0].n_classes
    cfg = TrainingConfig(
        sigma=a.sigma, bins_s=a.bins_s, bins_r=a.bins_r, s_max=a.s_max, appearance=a.appearance,
        max_negatives=a.max_negatives, seed=a.seed,
    )
    try:
        model = train_model(scenes, nc, cfg)
    except ValueError as e:
        raise CliError(str(e)) from e
    write_atomic(a.out, dumps(model))
    manifest = {"schema_version": SCHEMA_VERSION, "kind": "train_manifest", "scenes": len(scenes), "config": cfg.to_dict()}
    write_atomic(Path(a.out).with_suffix(".manifest.json"), dumps(manifest))
    print(f"trained {len(model.theta)} class-pair models on {len(scenes)} scenes -> {a.out}")
    return EXIT_OK


def solve_scene(dets: DetectionSet, model: PairwiseModel, mode: Mode, cfg: SolverConfig, k=DEFAULT_SUBSET):
    """Subset, build costs, solve and extract poses for one scene."""
    sub = select_subset(dets, k)
    inst = build_instance(sub, model, mode)
    sol, rep = solve(inst, cfg)
    return sub, sol, rep, extract_poses(sol, sub)


def cmd_solve(a):
    model = PairwiseModel.from_dict(json.loads(Path(a.model).read_text(encoding="utf-8")))
    scenes = collect(a.scene, "scene_")
    if not scenes:
        raise CliError(f"{a.scene}: no scene files")
    cfg = SolverConfig(
        gap_tolerance=a.gap, max_nodes=a.max_nodes, max_wall_time=a.time_limit, rng_seed=a.seed,
        fractional_separation=a.fractional_separation,
    )
    mode = Mode(a.mode)
    out = Path(a.out)
    single_file = Path(a.scene).is_file() and out.suffix == ".json"
    worst = EXIT_OK
    for sid, path in scenes.items():
        dets = read_doc(path)
        sub, sol, rep, poses = solve_scene(dets, model, mode, cfg, a.subset)
        target = out if single_file else out / f"pred_{sid}.json"
        write_atomic(target, dumps(poses))
        report = {"schema_version": SCHEMA_VERSION, "kind": "solve_report", "scene": sid, "mode": mode.value,
                  "subset": len(sub), **rep.to_dict()}
        write_atomic(target.with_suffix(".report.json"), dumps(report))
        if a.log:
            write_atomic(target.with_suffix(".log.jsonl"), "".join(json.dumps(r, sort_keys=True) + "\n" for r in rep.log))
        print(f"{sid}: {rep.status.value} objective {rep.best_objective:.4f} bound {rep.lower_bound:.4f} "
              f"gap {rep.gap:.4f} persons {len(poses.persons)}")
        if rep.status == Status.LIMIT:
            worst = EXIT_LIMIT
    return worst


def evaluate_files(pred_path, gt_path, mode: Mode, cfg: metrics.MatchConfig, min_parts=2):
    preds = collect(pred_path, "pred_")
    gts = collect(gt_path, "gt_")
    missing_pred = sorted(set(gts) - set(preds))
    missing_gt = sorted(set(preds) - set(gts))
    if missing_pred or missing_gt:
        raise CliError(f"unmatched scenes: no prediction for {missing_pred}, no ground truth for {missing_gt}")
    ids = sorted(gts)
    P = [read_doc(preds[i]) for i in ids]
    G = [read_doc(gts[i]) for i in ids]
    for i, p, g in zip(ids, P, G):
        if not isinstance(p, PoseResult) or not isinstance(g, GroundTruthScene):
            raise CliError(f"scene {i}: expected a poses file and a ground-truth file")
    return evaluate_lists(P, G, mode, cfg, min_parts)


def evaluate_lists(P, G, mode: Mode, cfg: metrics.MatchConfig, min_parts=2):
    rep = {"schema_version": SCHEMA_VERSION, "kind": "eval_report", "mode": mode.value, "scenes": len(G)}
    tables = []
    if mode == Mode.SINGLE:
        p = metrics.pck(P, G, cfg)
        ts, curve = metrics.pck_curve(P, G, cfg)
        c = metrics.pcp(P, G, cfg)
        rep.update(pck=p.to_dict(), auc=metrics.auc(ts, curve), pcp=c.to_dict())
        tables += [p.table("PCK"), c.table("PCP"), f"AUC {100 * rep['auc']:.1f}"]
    else:
        m = metrics.map_multi(P, G, cfg)
        rep.update(
            ap=m.to_dict(), aop=metrics.aop(P, G, cfg),
            person_count_accuracy=metrics.person_count_accuracy(P, G, min_parts),
        )
        tables += [m.table("AP"), f"AOP {100 * rep['aop']:.1f}",
                   f"person count accuracy {100 * rep['person_count_accuracy']:.1f}"]
    return rep, "\n".join(tables)


def cmd_eval(a):
    cfg = metrics.MatchConfig(pck_threshold=a.pck_threshold, pckh_threshold=a.pckh_threshold, reference=a.reference)
    rep, text = evaluate_files(a.pred, a.gt, Mode(a.mode), cfg, a.min_parts)
    print(text)
    if a.out:
        write_atomic(a.out, json.dumps(rep, sort_keys=True, indent=1, default=_nan_none) + "\n")
    return EXIT_OK


def _nan_none(o):
    return None


def cmd_oracle(a):
    if a.instance:
        inst = read_doc(a.instance)
    else:
        inst = random_instance(make_rng(a.seed), a.n, a.classes, Mode(a.mode))
    try:
        sol, val = brute_force(inst)
    except ValueError as e:
        raise CliError(str(e)) from e
    out = {"objective": val, "labels": sol.labels().tolist(), "y": sol.y.tolist(), "instance": inst.to_dict()}
    if a.compare:
        _, rep = solve(inst, SolverConfig(gap_tolerance=1e-9))
        out["solver_objective"] = rep.best_objective
        out["agree"] = abs(rep.best_objective - val) <= 1e-9
    text = json.dumps(out, sort_keys=True, indent=1) + "\n"
    if a.out:
        write_atomic(a.out, text)
    print(f"brute-force objective {val:.10f}" + (f", solver {out['solver_objective']:.10f}" if a.compare else ""))
    return EXIT_OK if out.get("agree", True) else EXIT_ERROR


def cmd_bench(a):
    from .bench import run_bench

    res, text = run_bench(
        repeats=a.repeats, time_limit=a.time_limit, seed=a.seed, skip_python=a.skip_python,
        solve_runs=a.solve_runs, k=a.subset,
    )
    print(text)
    if a.out:
        write_atomic(a.out, json.dumps(res, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _parser():
    p = argparse.ArgumentParser(prog="splp", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON file with option defaults")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate synthetic scenes and ground truth")
    s.add_argument("--out", required=True)
    s.add_argument("--n", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--persons-min", type=int, default=1)
    s.add_argument("--persons-max", type=int, default=5)
    s.add_argument("--width", type=float, default=1000.0)
    s.add_argument("--height", type=float, default=400.0)
    d = NoiseConfig()
    s.add_argument("--loc-sigma", type=float, default=d.loc_sigma, help="pixels")
    s.add_argument("--loc-sigma-h", type=float, default=d.loc_sigma_h, help="fraction of part scale")
    s.add_argument("--scale-sigma", type=float, default=d.scale_sigma)
    s.add_argument("--concentration", type=float, default=d.unary_concentration)
    s.add_argument("--clutter-rate", type=float, default=d.clutter_rate)
    s.add_argument("--miss-rate", type=float, default=d.miss_rate)
    s.add_argument("--dup-mean", type=float, default=d.dup_mean)
    s.add_argument("--normalization", choices=["softmax", "sigmoid"], default="softmax")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="fit the pairwise model")
    t.add_argument("--scenes", required=True, help="scene file or directory")
    t.add_argument("--out", required=True)
    tc = TrainingConfig()
    t.add_argument("--sigma", type=float, default=tc.sigma)
    t.add_argument("--bins-s", type=int, default=tc.bins_s)
    t.add_argument("--bins-r", type=int, default=tc.bins_r)
    t.add_argument("--s-max", type=float, default=tc.s_max)
    t.add_argument("--appearance", choices=["none", "scalar", "full"], default="full")
    t.add_argument("--max-negatives", type=int, default=tc.max_negatives)
    t.add_argument("--seed", type=int, default=tc.seed)
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("solve", help="solve scenes and write poses")
    v.add_argument("--scene", required=True, help="scene file or directory")
    v.add_argument("--model", required=True)
    v.add_argument("--out", required=True, help="poses file (single scene) or directory")
    v.add_argument("--mode", choices=["single", "multi"], default="multi")
    sc = SolverConfig()
    v.add_argument("--gap", type=float, default=sc.gap_tolerance)
    v.add_argument("--time-limit", type=float, default=sc.max_wall_time)
    v.add_argument("--max-nodes", type=int, default=sc.max_nodes)
    v.add_argument("--seed", type=int, default=sc.rng_seed)
    v.add_argument("--subset", type=int, default=DEFAULT_SUBSET)
    v.add_argument("--fractional-separation", action="store_true")
    v.add_argument("--log", action="store_true", help="also write the node log as JSON lines")
    v.set_defaults(func=cmd_solve)

    e = sub.add_parser("eval", help="score predictions against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--mode", choices=["single", "multi"], default="multi")
    mc = metrics.MatchConfig()
    e.add_argument("--pck-threshold", type=float, default=mc.pck_threshold)
    e.add_argument("--pckh-threshold", type=float, default=mc.pckh_threshold)
    e.add_argument("--reference", choices=["torso", "head"], default="torso")
    e.add_argument("--min-parts", type=int, default=2, help="located parts for a prediction to count as a person")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    o = sub.add_parser("oracle", help="brute-force a small instance")
    o.add_argument("--instance", help="instance JSON; random when omitted")
    o.add_argument("--n", type=int, default=5)
    o.add_argument("--classes", type=int, default=2)
    o.add_argument("--mode", choices=["single", "multi"], default="multi")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--compare", action="store_true", help="also run the branch-and-cut solver")
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", help="kernel timings and the large-instance solve table")
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--time-limit", type=float, default=900.0)
    b.add_argument("--subset", type=int, default=DEFAULT_SUBSET)
    b.add_argument("--solve-runs", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--skip-python", action="store_true", help="skip the uncompiled kernel timings")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def parse_args(argv=None):
    p = _parser()
    a = p.parse_args(argv)
    if a.config:
        try:
            conf = json.loads(Path(a.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            p.error(f"--config {a.config}: {e}")
        conf = {k.replace("-", "_"): v for k, v in conf.items()}
        sub = p._subparsers._group_actions[0].choices[a.command]
        known = {act.dest for act in sub._actions}
        unknown = sorted(set(conf) - known)
        if unknown:
            p.error(f"--config {a.config}: unknown options {unknown}")
        sub.set_defaults(**conf)
        a = p.parse_args(argv)
    return a


def main(argv=None) -> int:
    a = parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(a.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except CliError as e:
        print(f"splp {a.command}: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"splp {a.command}: error: {e.filename or ''}: {e.strerror or e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
