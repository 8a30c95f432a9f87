"""Command-line entry point: ``seqtune diststudy|tune|compare --config FILE``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import dist_fit, tuner
from .data import FIXTURES, DataError, Dataset, load_csv, load_fixture, make_synthetic, require_rows
from .learners import LearnerKind
from .param_space import ParamSpace, sample_configs, validate_config
from .resampling import EvalCache, make_bootstrap_instance
from .seqtest import SETTINGS, SlrtConfig, setting

log = logging.getLogger("seqtune")

_PARAM = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "kind"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "kind": {"enum": ["continuous", "integer", "categorical", "log2"]},
        "lo": {"type": "number"},
        "hi": {"type": "number"},
        "values": {"type": "array", "minItems": 1},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["task", "learner"],
    "properties": {
        "task": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["fixture"],
                 "properties": {"fixture": {"enum": sorted(FIXTURES)}}},
                {"type": "object", "additionalProperties": False,
                 "required": ["path", "target", "task_kind"],
                 "properties": {
                     "path": {"type": "string"},
                     "target": {"type": "string"},
                     "task_kind": {"enum": ["classification", "regression"]},
                     "types": {"type": "object",
                               "additionalProperties": {"enum": ["numeric", "categorical"]}},
                 }},
                {"type": "object", "additionalProperties": False, "required": ["synthetic"],
                 "properties": {"synthetic": {
                     "type": "object", "additionalProperties": False,
                     "required": ["kind", "n", "p"],
                     "properties": {
                         "kind": {"enum": ["linear-regression", "two-gaussians-classification"]},
                         "n": {"type": "integer", "minimum": 10},
                         "p": {"type": "integer", "minimum": 1},
                         "noise": {"type": "number", "minimum": 0},
                         "separation": {"type": "number"},
                         "seed": {"type": "integer"},
                     }}}},
            ]
        },
        "learner": {"enum": [k.value for k in LearnerKind]},
        "space": {"type": "array", "minItems": 1, "items": _PARAM},
        "seed": {"type": "integer"},
        "output_dir": {"type": "string"},
        "tuner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "K": {"type": "integer", "minimum": 1},
                "n_configs": {"type": "integer", "minimum": 1},
                "n_max": {"type": "integer", "minimum": 2},
                "settings": {"type": "array", "minItems": 1, "items": {"enum": sorted(SETTINGS)}},
                "slrt": {
                    "type": "object", "additionalProperties": False,
                    "required": ["gamma0", "gamma1", "alpha", "beta"],
                    "properties": {k: {"type": "number"} for k in ("gamma0", "gamma1", "alpha", "beta")}
                    | {"n_min": {"type": "integer", "minimum": 2}},
                },
                "shift": {"oneOf": [{"type": "number", "minimum": 0}, {"const": "auto"}]},
                "log_transform": {"type": "boolean"},
                "replications": {"type": "integer", "minimum": 1},
                "mode": {"enum": ["fixed", "fresh"]},
                "max_candidates": {"type": "integer", "minimum": 1},
                "time_budget": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "dist_study": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_configs": {"type": "integer", "minimum": 1},
                "n_boot": {"type": "integer", "minimum": 30},
                "families": {"type": "array", "minItems": 1, "items": {"enum": list(dist_fit.FAMILIES)}},
                "shifts": {"type": "array", "items": {"type": "number", "minimum": 0}},
            },
        },
    },
}

TUNER_DEFAULTS = {
    "K": 10,
    "n_configs": 50,
    "settings": ["A", "B", "C", "D"],
    "shift": "auto",
    "log_transform": True,
    "replications": 100,
    "mode": "fixed",
}
STUDY_DEFAULTS = {"n_configs": 10, "n_boot": 1000}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    raw: dict
    dataset: Dataset
    learner: LearnerKind
    space: ParamSpace
    seed: int
    output_dir: Path
    tuner: dict
    study: dict

    @property
    def shift(self) -> float:
        s = self.tuner["shift"]
        return tuner.default_shift(self.dataset.task_kind) if s == "auto" else float(s)

    def slrt(self, n_max: int) -> tuple[str, SlrtConfig]:
        explicit = self.tuner.get("slrt")
        if explicit:
            return "custom", SlrtConfig(explicit["gamma0"], explicit["gamma1"], explicit["alpha"],
                                        explicit["beta"], n_max, explicit.get("n_min", 2))
        label = self.tuner["settings"][0]
        return label, setting(label, n_max)


def load_config(path, out: str | None = None) -> ExperimentConfig:
    """Parse and validate an experiment file before any computation."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    task = raw["task"]
    if "fixture" in task:
        ds = load_fixture(task["fixture"])
    elif "path" in task:
        p = Path(task["path"])
        if not p.is_absolute():
            p = path.parent / p
        ds = load_csv(p, task["target"], task["task_kind"], task.get("types"))
    else:
        s = task["synthetic"]
        ds = make_synthetic(s["kind"], s["n"], s["p"], s.get("noise", 1.0), s.get("seed", 0),
                            s.get("separation", 4.0))
    require_rows(ds)
    learner = LearnerKind(raw["learner"])
    space = ParamSpace.from_list(raw["space"]) if "space" in raw else learner.default_space
    missing = set(learner.hyperparameters) - set(space.names)
    if missing:
        raise ConfigError(f"search space lacks {sorted(missing)} required by {learner.value}")
    tcfg = {**TUNER_DEFAULTS, **raw.get("tuner", {})}
    scfg = {**STUDY_DEFAULTS, **raw.get("dist_study", {})}
    out_dir = Path(out or raw.get("output_dir", "out"))
    return ExperimentConfig(raw, ds, learner, space, raw.get("seed", 0), out_dir, tcfg, scfg)


def _fmt(v: float) -> str:
    return f"{v:.6g}" if math.isfinite(v) else str(v)


def cmd_diststudy(cfg: ExperimentConfig, jobs: int = 1) -> list[Path]:
    s = cfg.study
    rows = dist_fit.dist_study(cfg.dataset, cfg.learner, s["n_configs"], s["n_boot"], cfg.seed,
                               cfg.space, s.get("families"), tuple(s.get("shifts", dist_fit.SHIFTS)))
    summary = dist_fit.summarize_study(rows)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    table, summ = cfg.output_dir / "dist_study.csv", cfg.output_dir / "dist_summary.csv"
    dist_fit.write_study_csv(rows, table)
    dist_fit.write_summary_csv(summary, summ)
    print("family        median_cvm  rank")
    for fam, med, rank in summary:
        print(f"{fam:<12}  {_fmt(med):>10}  {rank}")
    return [table, summ]


def cmd_tune(cfg: ExperimentConfig, algorithm: str) -> dict[str, Any]:
    t = cfg.tuner
    ds = cfg.dataset
    K = t["K"]
    inst = make_bootstrap_instance(ds.n, K, tuner.substream_int(cfg.seed, 0, tuner.STREAM_INSTANCE),
                                   mode=t["mode"], fingerprint=ds.fingerprint())
    configs = sample_configs(cfg.space, tuner.substream(cfg.seed, 0, tuner.STREAM_CONFIGS), t["n_configs"])
    cache = EvalCache()
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    if algorithm == "rs":
        res = tuner.random_search(cfg.space, cfg.learner, ds, inst, cache=cache, configs=configs)
        winner, mean_loss, n_eval = res.best, res.best_mean, K
        result = {"algorithm": "rs", "fits": res.fits, "budget": len(configs) * K}
    else:
        n_max = t.get("n_max", K)
        label, slrt = cfg.slrt(n_max)
        res = tuner.sqrs(configs, cfg.learner, ds, inst, slrt, cfg.shift, t["log_transform"],
                         cache=cache, max_candidates=t.get("max_candidates"),
                         time_budget=t.get("time_budget"), reference_budget=len(configs) * n_max)
        winner = res.incumbent
        losses = [cache.get(winner.id, k) for k in range(K) if cache.get(winner.id, k) is not None]
        mean_loss = float(np.mean(losses)) if losses else math.nan
        n_eval = len(losses)
        res.write_log(cfg.output_dir / "decision_log.csv")
        result = {"algorithm": "sqrs", "fits": res.fits, "budget": res.budget,
                  "eval_ratio": res.eval_ratio, "setting": label,
                  "slrt": {"gamma0": slrt.gamma0, "gamma1": slrt.gamma1, "alpha": slrt.alpha,
                           "beta": slrt.beta, "n_max": slrt.n_max, "n_min": slrt.n_min},
                  "shift": cfg.shift, "log_transform": t["log_transform"],
                  "candidates": res.n_candidates}
    assert validate_config(cfg.space, winner)
    result.update({"winner": {"id": winner.id, "values": winner.as_dict()},
                   "mean_loss": mean_loss, "n_evaluations": n_eval, "seed": cfg.seed,
                   "learner": cfg.learner.value, "task_kind": ds.task_kind})
    cache.to_csv(cfg.output_dir / "evaluations.csv")
    (cfg.output_dir / "result.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(f"winner: config {winner.id} {json.dumps(winner.as_dict(), sort_keys=True)}")
    print(f"mean loss: {_fmt(mean_loss)} over {n_eval} partitions")
    print(f"fits: {result['fits']} of {result['budget']}")
    return result


def cmd_compare(cfg: ExperimentConfig, jobs: int = 1) -> tuner.PairedResult:
    t = cfg.tuner
    if t["mode"] != "fixed":
        raise ConfigError("compare requires mode 'fixed'")
    res = tuner.paired_compare(cfg.space, cfg.learner, cfg.dataset, K=t["K"], n_configs=t["n_configs"],
                               settings=t["settings"], shift=cfg.shift, log_transform=t["log_transform"],
                               replications=t["replications"], seed=cfg.seed, jobs=jobs,
                               n_max=t.get("n_max"))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    res.write_reports(cfg.output_dir / "paired_reports.csv")
    res.write_summary(cfg.output_dir / "aggregate.csv")
    print("setting  task            identical  median_eval_ratio  perf!=1  median_perf!=1")
    for s in res.summary:
        print(f"{s.setting:<8} {s.task_kind:<15} {s.prop_identical:>9.3f}  {s.median_eval_ratio:>17.3f}"
              f"  {s.n_perf_differs:>7}  {_fmt(s.median_perf_differs):>14}")
    return res


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqtune", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("diststudy", "fit loss distributions to bootstrap errors"),
                        ("tune", "run random search or SQRS once"),
                        ("compare", "paired RS vs SQRS replications")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        if name == "tune":
            p.add_argument("--algorithm", choices=("rs", "sqrs"), default="sqrs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.out)
        if args.command == "diststudy":
            cmd_diststudy(cfg, args.jobs)
        elif args.command == "tune":
            cmd_tune(cfg, args.algorithm)
        else:
            cmd_compare(cfg, args.jobs)
    except (ConfigError, DataError, ValueError) as exc:
        print(f"seqtune: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
