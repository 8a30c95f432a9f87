"""Random search, sequential random search (SQRS) and the paired RS/SQRS harness."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset, require_rows
from .learners import LearnerKind
from .param_space import Config, ParamSpace, sample_configs
from .resampling import EvalCache, ResamplingInstance, evaluate, make_bootstrap_instance
from .seqtest import Decision, SlrtConfig, SlrtState, setting, slrt_bound, slrt_statistic, slrt_step

# named random sub-streams of one root seed
STREAM_INSTANCE = 0
STREAM_CONFIGS = 1
STREAM_SHUFFLE = 2


def default_shift(task_kind: str) -> float:
    """0.5 for classification (losses can be 0), 0 for regression."""
    return 0.5 if task_kind == "classification" else 0.0


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def substream_int(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=tuple(key)).generate_state(1)[0])


@dataclass
class RsResult:
    best: Config
    best_mean: float
    configs: list[Config]
    table: np.ndarray  # len(configs) x K
    fits: int

    @property
    def means(self) -> np.ndarray:
        return self.table.mean(axis=1)


def random_search(space: ParamSpace, kind, ds: Dataset, inst: ResamplingInstance,
                  n_configs: int | None = None, rng: np.random.Generator | None = None,
                  cache: EvalCache | None = None, configs: Sequence[Config] | None = None) -> RsResult:
    """Evaluate every configuration on all K partitions and keep the lowest mean loss.

    Either ``configs`` is given or ``n_configs`` are sampled from ``space`` with
    ``rng``. Ties go to the lower config id.
    """
    if configs is None:
        if n_configs is None or n_configs < 1:
            raise ValueError("n_configs must be >= 1")
        configs = sample_configs(space, rng if rng is not None else np.random.default_rng(), n_configs)
    configs = list(configs)
    if not configs:
        raise ValueError("random search needs at least one configuration")
    cache = cache if cache is not None else EvalCache()
    table = np.array([[evaluate(c, kind, ds, inst, k, cache) for k in range(inst.K)] for c in configs])
    means = table.mean(axis=1)
    i = min(range(len(configs)), key=lambda r: (means[r], configs[r].id))
    return RsResult(configs[i], float(means[i]), configs, table, len(configs) * inst.K)


@dataclass(frozen=True)
class DuelRecord:
    candidate_id: int
    incumbent_id: int
    decision: Decision
    steps: int
    statistic: float
    bound: float
    winner_id: int


@dataclass
class SqrsResult:
    incumbent: Config
    duels: list[DuelRecord]
    fits: int
    budget: int
    n_candidates: int
    shift: float
    log_transform: bool
    evaluated: set = field(default_factory=set, repr=False)

    @property
    def eval_ratio(self) -> float:
        return self.fits / self.budget if self.budget else math.nan

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["candidate_id", "incumbent_id", "decision", "steps", "statistic", "bound", "winner_id"])
            for d in self.duels:
                w.writerow([d.candidate_id, d.incumbent_id, d.decision.value, d.steps,
                            repr(d.statistic), repr(d.bound), d.winner_id])


def _transform(value: float, shift: float, log_transform: bool) -> float:
    v = value + shift
    if not log_transform:
        return v
    if v <= 0:
        raise ValueError(f"cannot take log of shifted loss {v}; use a positive shift")
    return math.log(v)


def sqrs(candidates: Iterable[Config], kind, ds: Dataset, inst: ResamplingInstance,
         slrt: SlrtConfig, shift: float = 0.0, log_transform: bool = True,
         cache: EvalCache | None = None, max_candidates: int | None = None,
         time_budget: float | None = None, reference_budget: int | None = None) -> SqrsResult:
    """Sequential random search.

    The first candidate becomes the incumbent; each later candidate duels it
    with the sequential test on ``log(loss + shift)`` (or ``loss + shift`` when
    ``log_transform`` is off), one partition per step. Incumbent losses come
    from the cache when available. If the test reaches ``n_max`` without a
    decision, the configuration with the lower mean shifted loss wins and the
    incumbent keeps exact ties.

    ``fits`` counts the distinct (config, partition) pairs the duels touched,
    whether or not they were already cached. ``reference_budget`` defaults to
    candidates consumed times ``n_max``.
    """
    if inst.mode == "fixed" and slrt.n_max > inst.K:
        raise ValueError(f"n_max={slrt.n_max} exceeds the {inst.K} partitions of the instance")
    if inst.mode == "fresh" and slrt.n_max > inst.K:
        raise ValueError(f"n_max={slrt.n_max} exceeds K={inst.K} of the fresh instance")
    cache = cache if cache is not None else EvalCache()
    it = iter(candidates)
    try:
        incumbent = next(it)
    except StopIteration:
        raise ValueError("sqrs needs at least one candidate") from None
    start = time.monotonic()
    touched: set = set()
    duels: list[DuelRecord] = []
    consumed = 1

    def loss_at(cfg: Config, k: int) -> float:
        touched.add((cfg.id, k))
        return evaluate(cfg, kind, ds, inst, k, cache)

    for cand in it:
        if max_candidates is not None and consumed >= max_candidates:
            break
        if time_budget is not None and time.monotonic() - start >= time_budget:
            break
        consumed += 1
        state = SlrtState()
        raw_u = raw_w = 0.0
        dec = Decision.CONTINUE
        for k in range(slrt.n_max):
            lu, lw = loss_at(incumbent, k), loss_at(cand, k)
            raw_u += lu
            raw_w += lw
            state, dec = slrt_step(state, _transform(lu, shift, log_transform),
                                   _transform(lw, shift, log_transform), slrt)
            if dec.final:
                break
        if dec.forced:
            # forced choice compares mean shifted losses, not transformed ones
            dec = Decision.FORCED_CANDIDATE if raw_w < raw_u else Decision.FORCED_INCUMBENT
        z = slrt_statistic(state, slrt)
        a = slrt_bound(state, slrt) if state.n >= 2 else math.nan
        winner = cand if dec.candidate_wins else incumbent
        duels.append(DuelRecord(cand.id, incumbent.id, dec, state.n, z, a, winner.id))
        incumbent = winner
    budget = reference_budget if reference_budget is not None else consumed * slrt.n_max
    return SqrsResult(incumbent, duels, len(touched), budget, consumed, shift, log_transform, touched)


# ---------------------------------------------------------------------------
# paired comparison


@dataclass(frozen=True)
class PairedReport:
    setting: str
    task_kind: str
    replication: int
    identical: bool
    perf_ratio: float
    eval_ratio: float
    rs_winner: int
    sqrs_winner: int
    sqrs_fits: int


def performance_ratio(sqrs_mean: float, rs_mean: float) -> float:
    if sqrs_mean == rs_mean:
        return 1.0
    if rs_mean == 0.0:
        return math.inf
    return sqrs_mean / rs_mean


@dataclass(frozen=True)
class _Job:
    space: ParamSpace
    kind: LearnerKind
    ds: Dataset
    K: int
    n_configs: int
    settings: tuple[str, ...]
    shift: float
    log_transform: bool
    seed: int
    n_max: int


def _replicate(job: _Job, rep: int) -> list[PairedReport]:
    inst = make_bootstrap_instance(job.ds.n, job.K, substream_int(job.seed, rep, STREAM_INSTANCE),
                                   fingerprint=job.ds.fingerprint())
    configs = sample_configs(job.space, substream(job.seed, rep, STREAM_CONFIGS), job.n_configs)
    cache = EvalCache()
    rs = random_search(job.space, job.kind, job.ds, inst, cache=cache, configs=configs)
    order = substream(job.seed, rep, STREAM_SHUFFLE).permutation(job.n_configs)
    stream = [configs[i] for i in order]
    means = rs.means
    budget = job.n_configs * job.K
    out = []
    for label in job.settings:
        res = sqrs(stream, job.kind, job.ds, inst, setting(label, job.n_max), job.shift,
                   job.log_transform, cache=cache, reference_budget=budget)
        assert cache.fits == budget, "paired SQRS must only replay cached losses"
        win = res.incumbent.id
        out.append(PairedReport(label, job.ds.task_kind, rep, win == rs.best.id,
                                performance_ratio(float(means[win]), rs.best_mean),
                                res.eval_ratio, rs.best.id, win, res.fits))
    return out


@dataclass(frozen=True)
class SettingSummary:
    setting: str
    task_kind: str
    replications: int
    prop_identical: float
    median_eval_ratio: float
    share_fewer_evals: float
    share_at_most_half: float
    n_perf_differs: int
    median_perf_differs: float
    max_perf_ratio: float


def aggregate(reports: Sequence[PairedReport]) -> list[SettingSummary]:
    """Per-setting summary; performance statistics exclude ratios equal to 1."""
    out = []
    keys = sorted({(r.setting, r.task_kind) for r in reports})
    for label, task in keys:
        rs = [r for r in reports if r.setting == label and r.task_kind == task]
        ev = np.array([r.eval_ratio for r in rs])
        perf = np.array([r.perf_ratio for r in rs])
        differs = perf[perf != 1.0]
        out.append(SettingSummary(
            label, task, len(rs),
            float(np.mean([r.identical for r in rs])),
            float(np.median(ev)),
            float(np.mean(ev < 1.0)),
            float(np.mean(ev <= 0.5)),
            int(differs.size),
            float(np.median(differs)) if differs.size else math.nan,
            float(perf.max()),
        ))
    return out


@dataclass
class PairedResult:
    reports: list[PairedReport]
    summary: list[SettingSummary]

    def write_reports(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["setting", "task_kind", "replication", "identical", "perf_ratio", "eval_ratio"])
            for r in self.reports:
                w.writerow([r.setting, r.task_kind, r.replication, int(r.identical),
                            repr(r.perf_ratio), repr(r.eval_ratio)])

    def write_summary(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["setting", "task_kind", "replications", "prop_identical", "median_eval_ratio",
                        "share_fewer_evals", "share_at_most_half", "n_perf_differs",
                        "median_perf_differs", "max_perf_ratio"])
            for s in self.summary:
                w.writerow([s.setting, s.task_kind, s.replications, repr(s.prop_identical),
                            repr(s.median_eval_ratio), repr(s.share_fewer_evals),
                            repr(s.share_at_most_half), s.n_perf_differs,
                            repr(s.median_perf_differs), repr(s.max_perf_ratio)])


def paired_compare(space: ParamSpace | None, kind, ds: Dataset, K: int = 10, n_configs: int = 50,
                   settings: Sequence[str] = ("A", "B", "C", "D"), shift: float | None = None,
                   log_transform: bool = True, replications: int = 100, seed: int = 0,
                   jobs: int = 1, n_max: int | None = None) -> PairedResult:
    """Run random search and SQRS on identical configurations and partitions.

    Each replication draws a fixed K-partition instance and ``n_configs``
    configurations, runs random search over the full table, then replays SQRS
    for every setting on one shuffled order of the same configurations.
    """
    if n_configs < 2:
        raise ValueError("n_configs must be >= 2")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    require_rows(ds)
    kind = LearnerKind.parse(kind)
    job = _Job(space or kind.default_space, kind, ds, K, n_configs, tuple(settings),
               default_shift(ds.task_kind) if shift is None else float(shift),
               log_transform, int(seed), n_max or K)
    reps = range(replications)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_replicate, [job] * replications, reps))
    else:
        chunks = [_replicate(job, r) for r in reps]
    reports = [r for chunk in chunks for r in chunk]
    return PairedResult(reports, aggregate(reports))
