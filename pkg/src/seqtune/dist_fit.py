"""Maximum-likelihood fits of loss distributions and Cramer-von Mises scoring.

Parameter vectors per family (stable CSV column order):

============  ===================  =====================================
family        params               relation to the base family
============  ===================  =====================================
normal        (mean, sd)           -
lognormal     (meanlog, sdlog)     log(x) ~ normal
gamma         (shape, rate)        -
loggamma      (shape, rate)        log(x) ~ gamma, support x > 1
invgamma      (shape, rate)        1/x ~ gamma
weibull       (shape, scale)       -
invweibull    (shape, scale)       1/x ~ weibull
beta          (a, b)               support 0 < x < 1
============  ===================  =====================================

Log-likelihoods are always reported on the scale of the shifted losses,
i.e. transformed families include the Jacobian term.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import optimize, special, stats

from .data import Dataset, require_rows
from .param_space import ParamSpace, sample_configs
from .resampling import EvalCache, evaluate, make_bootstrap_instance

log = logging.getLogger(__name__)

FAMILIES = ("normal", "lognormal", "gamma", "loggamma", "invgamma", "weibull", "invweibull", "beta")
SHIFTS = (0.001, 0.01, 0.1, 0.15, 0.25, 0.5, 1.0, 1.5)
NM_XATOL = 1e-8
NM_MAXITER = 2000


class DistFitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    family: str
    params: tuple[float, ...]
    shift: float
    loglik: float
    cvm: float
    n: int = 0
    start_loglik: float = math.nan

    def cdf(self, x):
        return family_cdf(self.family, self.params, np.asarray(x, dtype=np.float64) + self.shift)


def cvm_criterion(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """``1/(12n) + sum_i ((2i-1)/(2n) - F(x_(i)))**2`` over the sorted sample."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n < 1:
        raise DistFitError("criterion needs at least one sample")
    F = np.asarray(cdf(x), dtype=np.float64)
    expected = (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)
    return float(1.0 / (12.0 * n) + np.sum((expected - F) ** 2))


# --- base-family pieces -----------------------------------------------------

def _gamma_nll(theta, n, s, slog):
    a, r = np.exp(theta)
    return n * (special.gammaln(a) - a * math.log(r)) - (a - 1.0) * slog + r * s


def _weibull_nll(theta, y, slog):
    k, lam = np.exp(theta)
    z = np.power(y / lam, k)
    return -(y.size * (math.log(k) - k * math.log(lam)) + (k - 1.0) * slog - z.sum())


def _beta_nll(theta, n, slog, slog1m):
    a, b = np.exp(theta)
    return n * special.betaln(a, b) - (a - 1.0) * slog - (b - 1.0) * slog1m


def _gamma_start(y):
    m, v = y.mean(), y.var()
    return (m * m / v, m / v)


def _weibull_start(y):
    m, sd = y.mean(), y.std()
    k = (sd / m) ** -1.086
    return (k, m / math.gamma(1.0 + 1.0 / k))


def _beta_start(y):
    m, v = y.mean(), y.var()
    common = m * (1.0 - m) / v - 1.0
    if common <= 0:
        return (1.0, 1.0)
    return (m * common, (1.0 - m) * common)


def _nelder_mead(nll, start):
    theta0 = np.log(np.asarray(start, dtype=np.float64))
    f0 = float(nll(theta0))
    if not math.isfinite(f0):
        raise DistFitError("negative log-likelihood is not finite at the starting point")

    def safe(theta):
        v = nll(theta)
        return v if np.isfinite(v) else np.inf

    res = optimize.minimize(safe, theta0, method="Nelder-Mead",
                            options={"xatol": NM_XATOL, "fatol": np.inf, "maxiter": NM_MAXITER,
                                     "maxfev": 10 * NM_MAXITER})
    if not res.success:
        raise DistFitError(f"Nelder-Mead did not converge: {res.message}")
    return tuple(float(v) for v in np.exp(res.x)), -float(res.fun), -f0


def _transform(family: str, x: np.ndarray):
    """(base family, transformed data, log-Jacobian sum) for a family."""
    if family in ("lognormal", "loggamma"):
        y = np.log(x)
        return ("normal" if family == "lognormal" else "gamma"), y, -float(np.sum(y))
    if family in ("invgamma", "invweibull"):
        return family[3:], 1.0 / x, -2.0 * float(np.sum(np.log(x)))
    return family, x, 0.0


def _check_support(family: str, x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise DistFitError("samples must be finite")
    if family == "normal":
        return
    if np.any(x <= 0):
        raise DistFitError(f"{family}: shifted samples must be > 0")
    if family == "loggamma" and np.any(x <= 1):
        raise DistFitError("loggamma: shifted samples must be > 1")
    if family == "beta" and np.any(x >= 1):
        raise DistFitError("beta: shifted samples must lie in (0, 1)")


def admissible(family: str, samples, shift: float) -> bool:
    try:
        _check_support(family, np.asarray(samples, dtype=np.float64) + shift)
    except DistFitError:
        return False
    return True


def family_cdf(family: str, params, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    p1, p2 = params
    with np.errstate(divide="ignore", invalid="ignore"):
        if family == "normal":
            return stats.norm.cdf(x, p1, p2)
        if family == "lognormal":
            return stats.norm.cdf(np.log(np.maximum(x, 0)), p1, p2)
        if family == "gamma":
            return stats.gamma.cdf(x, p1, scale=1.0 / p2)
        if family == "loggamma":
            return stats.gamma.cdf(np.log(np.maximum(x, 1.0)), p1, scale=1.0 / p2)
        if family == "invgamma":
            return np.where(x > 0, stats.gamma.sf(1.0 / x, p1, scale=1.0 / p2), 0.0)
        if family == "weibull":
            return stats.weibull_min.cdf(x, p1, scale=p2)
        if family == "invweibull":
            return np.where(x > 0, stats.weibull_min.sf(1.0 / x, p1, scale=p2), 0.0)
        if family == "beta":
            return stats.beta.cdf(x, p1, p2)
    raise DistFitError(f"unknown family {family!r}")


def family_loglik(family: str, params, x) -> float:
    """Log-likelihood of (already shifted) data ``x``."""
    x = np.asarray(x, dtype=np.float64)
    base, y, jac = _transform(family, x)
    p1, p2 = params
    if base == "normal":
        ll = stats.norm.logpdf(y, p1, p2).sum()
    elif base == "gamma":
        ll = -_gamma_nll(np.log([p1, p2]), y.size, y.sum(), np.log(y).sum())
    elif base == "weibull":
        ll = -_weibull_nll(np.log([p1, p2]), y, np.log(y).sum())
    else:
        ll = -_beta_nll(np.log([p1, p2]), y.size, np.log(y).sum(), np.log1p(-y).sum())
    return float(ll + jac)


def fit_mle(samples, family: str, shift: float = 0.0) -> FitResult:
    """Maximum-likelihood fit of ``family`` to ``samples + shift``.

    Normal and lognormal use the closed form (mean and 1/n variance of the raw
    or logged data). The other families run Nelder-Mead on log-parameters from
    moment-based starting values; inverse families are fitted on reciprocals
    and loggamma on logs.
    """
    if family not in FAMILIES:
        raise DistFitError(f"unknown family {family!r}")
    x = np.asarray(samples, dtype=np.float64) + shift
    if x.size < 3:
        raise DistFitError("need at least 3 samples")
    _check_support(family, x)
    base, y, jac = _transform(family, x)
    if base == "normal":
        mu = float(y.mean())
        sd = float(np.sqrt(np.mean((y - mu) ** 2)))
        if not sd > 0:
            raise DistFitError(f"{family}: degenerate sample (zero variance)")
        params = (mu, sd)
        ll = float(stats.norm.logpdf(y, mu, sd).sum()) + jac
        start_ll = ll
    else:
        if not np.ptp(y) > 0:
            raise DistFitError(f"{family}: degenerate sample (zero variance)")
        slog = float(np.log(y).sum())
        if base == "gamma":
            n, s = y.size, float(y.sum())
            params, ll, start_ll = _nelder_mead(lambda t: _gamma_nll(t, n, s, slog), _gamma_start(y))
        elif base == "weibull":
            params, ll, start_ll = _nelder_mead(lambda t: _weibull_nll(t, y, slog), _weibull_start(y))
        else:
            n, slog1m = y.size, float(np.log1p(-y).sum())
            params, ll, start_ll = _nelder_mead(lambda t: _beta_nll(t, n, slog, slog1m), _beta_start(y))
        ll += jac
        start_ll += jac
    cvm = cvm_criterion(x, lambda v: family_cdf(family, params, v))
    return FitResult(family, params, float(shift), float(ll), cvm, int(x.size), float(start_ll))


def candidate_shifts(shifts: Sequence[float] = SHIFTS) -> tuple[float, ...]:
    return (0.0,) + tuple(c for c in shifts if c != 0.0)


def shift_search(samples, family: str, shifts: Sequence[float] = SHIFTS) -> FitResult:
    """Fit at every admissible shift (0 included) and keep the lowest criterion.

    Ties keep the smaller shift. Shifts whose fit fails are skipped with a log
    message.
    """
    x = np.asarray(samples, dtype=np.float64)
    best = None
    for c in candidate_shifts(shifts):
        if not admissible(family, x, c):
            continue
        try:
            res = fit_mle(x, family, c)
        except DistFitError as exc:
            log.info("skipping %s at c=%g: %s", family, c, exc)
            continue
        if best is None or res.cvm < best.cvm:
            best = res
    if best is None:
        raise DistFitError(f"{family}: no admissible shift among {candidate_shifts(shifts)}")
    return best


@dataclass(frozen=True)
class StudyRow:
    config_id: int
    family: str
    shift: float
    loglik: float
    cvm: float
    params: tuple[float, ...]


def default_families(task_kind: str) -> tuple[str, ...]:
    if task_kind == "classification":
        return FAMILIES
    return tuple(f for f in FAMILIES if f != "beta")


def study_losses(ds: Dataset, kind, configs, n_boot: int, seed: int) -> dict[int, np.ndarray]:
    """Bootstrap losses per configuration, each on its own fresh partitions."""
    inst = make_bootstrap_instance(ds.n, n_boot, seed, mode="fresh", fingerprint=ds.fingerprint())
    cache = EvalCache()
    return {cfg.id: np.array([evaluate(cfg, kind, ds, inst, k, cache) for k in range(n_boot)])
            for cfg in configs}


def dist_study(ds: Dataset, kind, n_configs: int, n_boot: int, seed: int,
               space: ParamSpace | None = None, families: Iterable[str] | None = None,
               shifts: Sequence[float] = SHIFTS) -> list[StudyRow]:
    """Sample configurations, collect their bootstrap losses and fit every family."""
    from .learners import LearnerKind

    if n_boot < 30:
        raise DistFitError(f"n_boot must be >= 30, got {n_boot}")
    require_rows(ds)
    kind = LearnerKind.parse(kind)
    space = space or kind.default_space
    fams = tuple(families) if families is not None else default_families(ds.task_kind)
    ss = np.random.SeedSequence(seed)
    cfg_seed, boot_seed = ss.spawn(2)
    configs = sample_configs(space, np.random.default_rng(cfg_seed), n_configs)
    losses = study_losses(ds, kind, configs, n_boot, int(boot_seed.generate_state(1)[0]))
    rows = []
    for cfg in configs:
        for fam in fams:
            try:
                r = shift_search(losses[cfg.id], fam, shifts)
                rows.append(StudyRow(cfg.id, fam, r.shift, r.loglik, r.cvm, r.params))
            except DistFitError as exc:
                log.warning("config %d, %s: %s", cfg.id, fam, exc)
                rows.append(StudyRow(cfg.id, fam, math.nan, math.nan, math.nan, (math.nan, math.nan)))
    return rows


def summarize_study(rows: Sequence[StudyRow]) -> list[tuple[str, float, int]]:
    """(family, median criterion, rank) sorted best first; failed fits are ignored."""
    by_fam: dict[str, list[float]] = {}
    for r in rows:
        by_fam.setdefault(r.family, [])
        if math.isfinite(r.cvm):
            by_fam[r.family].append(r.cvm)
    med = {f: (float(np.median(v)) if v else math.inf) for f, v in by_fam.items()}
    ordered = sorted(med, key=lambda f: (med[f], f))
    return [(f, med[f], i + 1) for i, f in enumerate(ordered)]


def write_study_csv(rows: Sequence[StudyRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config_id", "family", "c", "loglik", "cvm", "param1", "param2"])
        for r in rows:
            w.writerow([r.config_id, r.family, repr(r.shift), repr(r.loglik), repr(r.cvm),
                        repr(r.params[0]), repr(r.params[1])])


def write_summary_csv(summary, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["family", "median_cvm", "rank"])
        for fam, med, rank in summary:
            w.writerow([fam, repr(med), rank])
