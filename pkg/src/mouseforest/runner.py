"""Run one configured experiment end to end and write its result files."""
from __future__ import annotations

import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import gauss
from .config import ExperimentConfig, save_config
from .disc import disc_train_forest, monotonicity_violations
from .forest import accuracy, save_forest, train_forest
from .pose import experiments as px
from .results import ABLATION_FIGURES, FIGURES, ResultTable, config_hash, content_hash, emit_figure_data
from .synth.render import PART_NAMES

logger = logging.getLogger(__name__)

EXPERIMENTS = {
    "gauss": ("disc", "controls", "ablation"),
    "pose": ("pose", "noise", "forestSize", "m"),
    "label": ("label",),
    "ik": ("ik",),
}


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        logger.info("stage %s", self.name)
        return self

    def __exit__(self, kind, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _params(base, overrides: dict):
    try:
        return replace(base, **overrides)
    except TypeError as exc:
        raise ValueError(f"unknown parameter in {sorted(overrides)}: {exc}") from None


class _Run:
    """Collects the artifacts of one experiment and writes them at the end."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.out = Path(config.output_dir) / f"{config.task}-{config.experiment}"
        self.hash = config_hash(config.to_dict())
        self.data_hashes: dict = {}
        self.logs: dict = {}
        self.extra_tables: dict = {}
        self.forests: dict = {}
        self.summary: dict = {}

    def provenance(self) -> dict:
        return {"configHash": self.hash, "dataHashes": dict(sorted(self.data_hashes.items())), "seed": self.config.seed}

    def write(self, table: ResultTable, figure: str | None):
        out = self.out
        out.mkdir(parents=True, exist_ok=True)
        save_config(self.config, out / "config.json")
        table.write(out, "results")
        if figure:
            emit_figure_data(table, figure, out / f"{figure}.csv")
        for fig, t in self.extra_tables.items():
            t.provenance = table.provenance
            emit_figure_data(t, fig, out / f"{fig}.csv")
        for name, log in self.logs.items():
            (out / f"{name}.log.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in log))
        for name, forest in self.forests.items():
            save_forest(forest, out / f"{name}.forest.json")
        summary = {"summary": self.summary, "provenance": table.provenance}
        (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True, default=_plain) + "\n")


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(type(v).__name__)


# ---------------------------------------------------------------------------
# gaussian benchmark


def _gauss_spec(cfg: ExperimentConfig):
    if "spec" in cfg.paths:
        return gauss.GaussianMixtureSpec.load(cfg.paths["spec"])
    if cfg.seed == gauss.CANONICAL_SEED:
        return gauss.canonical_spec()
    return gauss.gen_mixture_spec(cfg.seed)


def _gauss(run: _Run):
    cfg = run.config
    n = int(cfg.options.get("n", gauss.FULL_SIZE if cfg.scale == "full" else gauss.DESK_SIZE))
    tp = _params(gauss.default_train_params(cfg.seed), cfg.train)
    dp = _params(gauss.default_disc_params(cfg.seed), cfg.disc)
    with _Stage("data"):
        spec = _gauss_spec(cfg)
        data = gauss.make_datasets(spec, n, cfg.seed)
        for name in ("train", "disc", "test"):
            s = getattr(data, name)
            run.data_hashes[name] = content_hash(s.X, s.y)
    if cfg.experiment == "disc":
        with _Stage("train"):
            base = train_forest(data.train, tp)
        with _Stage("disc"):
            res = disc_train_forest(base, data.disc, dp)
        with _Stage("evaluate"):
            row = {"seed": cfg.seed, "baselineAcc": accuracy(base, data.test), "discAcc": accuracy(res.forest, data.test)}
        run.logs["disc"] = res.log
        run.forests.update(baseline=base, disc=res.forest)
        run.summary.update(row, violations=monotonicity_violations(res.log))
        return ResultTable(["seed", "baselineAcc", "discAcc"], [row]), None
    if cfg.experiment == "controls":
        with _Stage("controls"):
            row = gauss.run_controls(spec, n, cfg.seed, tp, dp)
        run.summary.update(row)
        return ResultTable(["baselineAcc", "unionAcc", "gainVariantAcc", "discAcc"], [row]), None
    kind = cfg.options.get("kind", "forestSize")
    figure = ABLATION_FIGURES.get(kind)
    if figure is None:
        raise ValueError(f"unknown ablation kind {kind!r}")
    with _Stage("ablation"):
        rows = gauss._ablation_one(kind, gauss._check_grid(kind, cfg.options.get("grid", gauss.DEFAULT_GRIDS[kind])),
                                   data, cfg.seed, tp, dp)
    axis = FIGURES[figure][0]
    return ResultTable(FIGURES[figure], [{axis: v, "baselineAcc": b, "discAcc": d} for v, b, d in rows]), figure


# ---------------------------------------------------------------------------
# synthetic pose, labeling and limb completion


def _setup(cls, cfg: ExperimentConfig, full):
    base = full(cfg.seed) if cfg.scale == "full" else cls(seed=cfg.seed)
    knobs = {k: v for k, v in cfg.options.items() if k in base.to_dict()}
    return _params(base, knobs)


def _set_hashes(run, sets, names):
    for name, s in zip(names, sets):
        run.data_hashes[name] = content_hash(s.depth, s.labels, s.joints)


def _pose(run: _Run):
    cfg = run.config
    setup = _setup(px.PoseSetup, cfg, px.PoseSetup.full)
    tp = _params(px.pose_train_params(cfg.seed), cfg.train)
    dp = _params(px.pose_disc_params(cfg.seed), cfg.disc)
    with _Stage("data"):
        sets = px.make_pose_sets(setup)
        _set_hashes(run, sets, ("train", "test"))
    if cfg.experiment == "forestSize":
        with _Stage("sweep"):
            rows = px.pose_forest_size_sweep(setup, cfg.options.get("sizes", (1, 3, 5, 7, 9)), sets=sets)
        return ResultTable(FIGURES["fig11"], [{"forestSize": r["forestSize"], "meanJointError": r["meanError"]} for r in rows]), "fig11"
    if cfg.experiment == "m":
        with _Stage("sweep"):
            rows = px.pose_m_sweep(setup, cfg.options.get("ms", (25, 50, 100, 200)), sets=sets)
        return ResultTable(FIGURES["fig12"], [{"m": r["m"], "meanJointError": r["meanError"]} for r in rows]), "fig12"
    if cfg.experiment == "noise":
        train, test = sets
        with _Stage("train"):
            d_t, _ = px.training_pixels(train, setup)
            forest = train_forest(d_t, tp, family=px.DepthFeatures())
        with _Stage("noise"):
            rows = px.noise_sweep(forest, test, cfg.options.get("sigmas", (0, 1, 2, 3, 4, 5)), setup.n_query, cfg.seed)
        run.forests["baseline"] = forest
        table = ResultTable(FIGURES["fig15"])
        for r in rows:
            table.add(sigma=r["sigma"], meanError=r["mean"], **{f"joint{j + 1}": float(e) for j, e in enumerate(r["perJoint"])})
        return table, "fig15"
    with _Stage("pose"):
        res = px.run_pose(setup, tp, dp, sets=sets)
    run.logs["disc"] = res["log"]
    run.forests.update(zip(("baseline", "disc"), res["forests"]))
    b, d = res["baseline"], res["disc"]
    run.summary.update(baselineMean=b["mean"], discMean=d["mean"], baselineMissing=b["missing"], discMissing=d["missing"],
                       violations=monotonicity_violations(res["log"]))
    rows = [{"joint": j + 1, "baselineError": float(be), "discError": float(de)} for j, (be, de) in enumerate(zip(b["perJoint"], d["perJoint"]))]
    return ResultTable(FIGURES["fig13"], rows), "fig13"


def _label(run: _Run):
    cfg = run.config
    setup = _setup(px.LabelSetup, cfg, lambda seed: px.LabelSetup(n_train=10_000, n_test=1000, width=160, height=120, seed=seed))
    tp = _params(px.label_train_params(cfg.seed), cfg.train)
    ms = tuple(int(m) for m in cfg.options.get("disc_ms", (100,)))
    with _Stage("data"):
        sets = px.make_label_sets(setup)
        _set_hashes(run, sets, ("train", "test"))
    with _Stage("label"):
        res = px.run_labels(setup, tp, ms, sets=sets)
    base_acc = res["baseline"]["accuracy"]
    rows = [{"m": m, "baselineAcc": base_acc, "discAcc": res["disc"][m]["accuracy"]} for m in ms]
    best = res["disc"][ms[0]]
    conf = ResultTable(FIGURES["fig26"])
    for i, name in enumerate(PART_NAMES):
        conf.add(truth=name, **{p: float(best["confusion"][i, k]) for k, p in enumerate(PART_NAMES)})
    run.extra_tables["fig26"] = conf
    run.logs.update({f"disc-m{m}": log for m, log in res["logs"].items()})
    run.summary.update(baselineAcc=base_acc, discAcc={str(m): res["disc"][m]["accuracy"] for m in ms},
                       support=best["support"], baselineConfusion=res["baseline"]["confusion"])
    return ResultTable(FIGURES["fig25"], rows), "fig25"


def _ik(run: _Run):
    cfg = run.config
    with _Stage("ik"):
        res = px.ik_limb_errors(int(cfg.options.get("n_poses", 1000)), cfg.seed, float(cfg.options.get("paw_jitter", 0.0)))
    run.summary.update({k: v for k, v in res.items() if k not in ("joints", "meanError")})
    rows = [{"joint": j, "meanError": float(e)} for j, e in zip(res["joints"], res["meanError"])]
    return ResultTable(FIGURES["fig14"], rows), "fig14"


_TASKS = {"gauss": _gauss, "pose": _pose, "label": _label, "ik": _ik}


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Execute the configured experiment and write CSV, JSON, logs and forests under
    ``output_dir/<task>-<experiment>``.  Failures are re-raised as ``StageError``."""
    if config.experiment not in EXPERIMENTS[config.task]:
        raise ValueError(f"task {config.task!r} has experiments {EXPERIMENTS[config.task]}, not {config.experiment!r}")
    run = _Run(config)
    table, figure = _TASKS[config.task](run)
    table.provenance = run.provenance()
    with _Stage("write"):
        run.write(table, figure)
    return table

