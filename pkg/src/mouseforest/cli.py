"""``mouseforest`` command line.

Exit codes: 0 success, 1 usage error, 2 bad input data or files, 3 internal error.
Thread count for tree-parallel work comes from ``MOUSEFOREST_THREADS``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from . import gauss
from .config import ConfigError, ExperimentConfig, apply_overrides, load_config
from .disc import DiscResult, disc_train_forest, monotonicity_violations
from .forest import DepthFeatures, ForestFormatError, accuracy, forest_summary, load_forest, save_forest, train_forest
from .pose import experiments as px
from .pose.pixels import sample_pixels
from .results import FIGURES, ResultTable, SchemaError, emit_figure_data
from .runner import StageError, run_experiment
from .synth.dataset import make_synth_set
from .synth.imageio import ImageFormatError
from .synth.render import PART_NAMES, RenderError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
DATA_ERRORS = (ConfigError, ForestFormatError, ImageFormatError, SchemaError, RenderError, FileNotFoundError,
               IsADirectoryError, json.JSONDecodeError)

logger = logging.getLogger("mouseforest")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True, default=lambda v: v.tolist() if isinstance(v, np.ndarray) else v.item()))


def _overrides(items) -> dict:
    return apply_overrides({}, items)


def _replace(params, items):
    try:
        return replace(params, **_overrides(items))
    except TypeError as exc:
        raise UsageError(f"bad --set: {exc}") from None


def _write_log(path, result: DiscResult) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(result.log_lines())


# ---------------------------------------------------------------------------
# gauss


def _spec(args):
    if args.spec:
        return gauss.GaussianMixtureSpec.load(args.spec)
    return gauss.canonical_spec() if args.seed == gauss.CANONICAL_SEED else gauss.gen_mixture_spec(args.seed)


def _gauss_data(args):
    return gauss.make_datasets(_spec(args), args.n, args.seed)


def cmd_gauss_gen(args):
    spec = gauss.gen_mixture_spec(args.seed)
    spec.save(args.out)
    _emit({"seed": args.seed, "path": args.out})


def cmd_gauss_train(args):
    data = _gauss_data(args)
    forest = train_forest(data.train, _replace(gauss.default_train_params(args.seed), args.set))
    save_forest(forest, args.out)
    _emit({"trainAcc": accuracy(forest, data.train), "path": args.out})


def cmd_gauss_disc(args):
    data = _gauss_data(args)
    res = disc_train_forest(load_forest(args.forest), data.disc, _replace(gauss.default_disc_params(args.seed), args.set))
    save_forest(res.forest, args.out)
    _write_log(args.log, res)
    _emit({"path": args.out, "nodesVisited": len(res.log), "violations": monotonicity_violations(res.log)})


def cmd_gauss_eval(args):
    data = _gauss_data(args)
    _emit({"accuracy": accuracy(load_forest(args.forest), data.test), "n": len(data.test)})


def cmd_gauss_ablate(args):
    options = {"kind": args.kind, "n": args.n}
    if args.grid:
        options["grid"] = args.grid
    cfg = ExperimentConfig("gauss", "ablation", seed=args.seed, output_dir=args.out_dir, options=options,
                           train=_overrides(args.set))
    table = run_experiment(cfg)
    print(table.to_csv(), end="")


# ---------------------------------------------------------------------------
# pose and labeling


def _pose_setup(args):
    return px.PoseSetup(n_train=args.images, n_test=args.test_images, px_train=args.px, px_disc=args.disc_px, n_query=args.query, seed=args.seed)


def cmd_pose_train(args):
    setup = _pose_setup(args)
    train = make_synth_set(setup.n_train, setup.seed, "train", setup.camera)
    d_t, _ = px.training_pixels(train, setup)
    forest = train_forest(d_t, _replace(px.pose_train_params(args.seed), args.set), family=DepthFeatures())
    save_forest(forest, args.out)
    _emit({"path": args.out, "pixels": len(d_t)})


def cmd_pose_disc(args):
    setup = _pose_setup(args)
    train = make_synth_set(setup.n_train, setup.seed, "train", setup.camera)
    _, d_d = px.training_pixels(train, setup)
    res = disc_train_forest(load_forest(args.forest), d_d, _replace(px.pose_disc_params(args.seed), args.set))
    save_forest(res.forest, args.out)
    _write_log(args.log, res)
    _emit({"path": args.out, "nodesVisited": len(res.log), "violations": monotonicity_violations(res.log)})


def cmd_pose_eval(args):
    setup = _pose_setup(args)
    forest = load_forest(args.forest)
    test = make_synth_set(setup.n_test, setup.seed, "test", setup.camera)
    table = ResultTable(FIGURES["fig15"])
    for r in px.noise_sweep(forest, test, args.noise, setup.n_query, setup.seed):
        table.add(sigma=r["sigma"], meanError=r["mean"], **{f"joint{j + 1}": float(e) for j, e in enumerate(r["perJoint"])})
    if args.csv:
        emit_figure_data(table, "fig15", args.csv)
    print(table.to_csv(), end="")


def _label_setup(args):
    return px.LabelSetup(n_train=args.images, n_test=args.test_images, px_train=args.px, px_disc=args.disc_px, sigma=args.sigma, seed=args.seed)


def cmd_label_train(args):
    setup = _label_setup(args)
    train = px.make_label_set(setup, "train")
    d_t = sample_pixels(train, setup.px_train, setup.seed, "label", "labels")
    forest = train_forest(d_t, _replace(px.label_train_params(args.seed), args.set), family=DepthFeatures(), n_classes=6)
    if args.disc:
        d_d = sample_pixels(train, setup.px_disc, setup.seed, "label", "labels", skip=setup.px_train)
        res = disc_train_forest(forest, d_d, px.label_disc_params(args.seed, args.disc_m))
        _write_log(args.log, res)
        forest = res.forest
    save_forest(forest, args.out)
    _emit({"path": args.out, "pixels": len(d_t)})


def cmd_label_eval(args):
    setup = _label_setup(args)
    test = px.make_label_set(setup, "test")
    ev = px.evaluate_labels(load_forest(args.forest), test)
    table = ResultTable(FIGURES["fig26"])
    for i, name in enumerate(PART_NAMES):
        table.add(truth=name, **{p: float(ev["confusion"][i, k]) for k, p in enumerate(PART_NAMES)})
    if args.csv:
        emit_figure_data(table, "fig26", args.csv)
    _emit({"accuracy": ev["accuracy"], "diagonal": np.diag(ev["confusion"]), "support": ev["support"]})


def cmd_ik_demo(args):
    res = px.ik_limb_errors(args.poses, args.seed, args.jitter)
    _emit({k: v for k, v in res.items()})


# ---------------------------------------------------------------------------
# models and configured runs


def cmd_model_save(args):
    save_forest(load_forest(args.src), args.dst)
    _emit({"path": args.dst})


def cmd_model_load(args):
    forest = load_forest(args.path)
    _emit({"ok": True, "mode": forest.mode, "trees": len(forest.trees)})


def cmd_model_inspect(args):
    _emit(forest_summary(load_forest(args.path)))


def cmd_run(args):
    table = run_experiment(load_config(args.config, args.set))
    print(table.to_csv(), end="")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mouseforest", description="Random-forest pose estimation with discriminative retraining.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def sets(q):
        q.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="parameter override")

    g = sub.add_parser("gauss", help="Gaussian-mixture benchmark").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    q = g.add_parser("gen")
    q.add_argument("--seed", type=int, default=gauss.CANONICAL_SEED)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_gauss_gen)
    for name, func in (("train", cmd_gauss_train), ("disc", cmd_gauss_disc), ("eval", cmd_gauss_eval)):
        q = g.add_parser(name)
        q.add_argument("--spec")
        q.add_argument("--seed", type=int, default=gauss.CANONICAL_SEED)
        q.add_argument("--n", type=int, default=gauss.DESK_SIZE)
        if name != "train":
            q.add_argument("--forest", required=True)
        if name != "eval":
            q.add_argument("--out", required=True)
            sets(q)
        if name == "disc":
            q.add_argument("--log")
        q.set_defaults(func=func)
    q = g.add_parser("ablate")
    q.add_argument("--kind", required=True, choices=gauss.ABLATION_KINDS)
    q.add_argument("--grid", type=int, nargs="+")
    q.add_argument("--seed", type=int, default=gauss.CANONICAL_SEED)
    q.add_argument("--n", type=int, default=gauss.DESK_SIZE)
    q.add_argument("--out-dir", default="results")
    sets(q)
    q.set_defaults(func=cmd_gauss_ablate)

    def synth_args(q, images, px_default, disc_px_default):
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--images", type=int, default=images)
        q.add_argument("--test-images", type=int, default=images // 10)
        q.add_argument("--px", type=int, default=px_default, help="training pixels per image")
        q.add_argument("--disc-px", type=int, default=disc_px_default, help="retraining pixels per image")

    g = sub.add_parser("pose", help="joint regression").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func in (("train", cmd_pose_train), ("disc", cmd_pose_disc), ("eval", cmd_pose_eval)):
        q = g.add_parser(name)
        synth_args(q, 5000, 20, 40)
        q.add_argument("--query", type=int, default=200, help="query pixels per test image")
        if name != "train":
            q.add_argument("--forest", required=True)
        if name == "eval":
            q.add_argument("--noise", type=float, nargs="+", default=[0.0], metavar="SIGMA")
            q.add_argument("--csv")
        else:
            q.add_argument("--out", required=True)
            sets(q)
        if name == "disc":
            q.add_argument("--log")
        q.set_defaults(func=func)

    g = sub.add_parser("label", help="part labeling").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func in (("train", cmd_label_train), ("eval", cmd_label_eval)):
        q = g.add_parser(name)
        synth_args(q, 1000, 100, 100)
        q.add_argument("--sigma", type=float, default=16.0)
        if name == "train":
            q.add_argument("--out", required=True)
            q.add_argument("--disc", action="store_true", help="also retrain discriminatively")
            q.add_argument("--disc-m", type=int, default=100)
            q.add_argument("--log")
            sets(q)
        else:
            q.add_argument("--forest", required=True)
            q.add_argument("--csv")
        q.set_defaults(func=func)

    g = sub.add_parser("ik", help="limb completion").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    q = g.add_parser("demo")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--poses", type=int, default=1000)
    q.add_argument("--jitter", type=float, default=0.0, help="paw position noise (mm)")
    q.set_defaults(func=cmd_ik_demo)

    g = sub.add_parser("model", help="forest files").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    q = g.add_parser("save", help="re-save a forest in canonical form")
    q.add_argument("src")
    q.add_argument("dst")
    q.set_defaults(func=cmd_model_save)
    for name, func in (("load", cmd_model_load), ("inspect", cmd_model_inspect)):
        q = g.add_parser(name)
        q.add_argument("path")
        q.set_defaults(func=func)

    q = sub.add_parser("run", help="run a configured experiment")
    q.add_argument("--config", required=True)
    sets(q)
    q.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"mouseforest: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"mouseforest: {exc}", file=sys.stderr)
        if isinstance(exc.cause, DATA_ERRORS):
            return EXIT_DATA
        return EXIT_USAGE if isinstance(exc.cause, ValueError) else EXIT_INTERNAL
    except DATA_ERRORS as exc:
        print(f"mouseforest: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # parameter validation and unknown experiment names
        print(f"mouseforest: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"mouseforest: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
