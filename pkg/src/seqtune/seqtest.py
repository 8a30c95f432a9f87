"""Sequential tests: Wald's SPRT and a two-sample sequential likelihood-ratio
test for the difference of normal means with unknown, unequal variances.

In the two-sample test stream ``u`` belongs to the incumbent and ``w`` to the
candidate (both are losses, smaller is better) and the hypotheses are
``H0: mu_u - mu_w = gamma0`` against ``H1: mu_u - mu_w = gamma1`` with
``gamma0 < gamma1``. Accepting H1 therefore means the candidate is better.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable


class Decision(enum.Enum):
    CONTINUE = "continue"
    ACCEPT_H0 = "accept_h0"
    ACCEPT_H1 = "accept_h1"
    FORCED_INCUMBENT = "forced_incumbent"
    FORCED_CANDIDATE = "forced_candidate"

    @property
    def final(self) -> bool:
        return self is not Decision.CONTINUE

    @property
    def forced(self) -> bool:
        return self in (Decision.FORCED_INCUMBENT, Decision.FORCED_CANDIDATE)

    @property
    def candidate_wins(self) -> bool:
        return self in (Decision.ACCEPT_H1, Decision.FORCED_CANDIDATE)


@dataclass(frozen=True)
class SlrtConfig:
    gamma0: float
    gamma1: float
    alpha: float
    beta: float
    n_max: int
    n_min: int = 2

    def __post_init__(self):
        if not self.gamma0 < self.gamma1:
            raise ValueError(f"need gamma0 < gamma1, got {self.gamma0}, {self.gamma1}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 0.5:
                raise ValueError(f"{name} must lie in (0, 0.5), got {v}")
        if not 2 <= self.n_min <= self.n_max:
            raise ValueError(f"need 2 <= n_min <= n_max, got n_min={self.n_min}, n_max={self.n_max}")

    @property
    def log_ratio(self) -> float:
        return math.log((1.0 - self.alpha) / self.beta)


# gamma1 = -gamma0, alpha = beta
SETTINGS = {
    "A": (0.02, 0.05),
    "B": (0.02, 0.01),
    "C": (0.01, 0.05),
    "D": (0.01, 0.01),
}


def setting(label: str, n_max: int, n_min: int = 2) -> SlrtConfig:
    """Preset A-D: A=(+-0.02, 0.05), B=(+-0.02, 0.01), C=(+-0.01, 0.05), D=(+-0.01, 0.01)."""
    try:
        g, a = SETTINGS[label]
    except KeyError:
        raise ValueError(f"unknown setting {label!r}; expected one of {sorted(SETTINGS)}") from None
    return SlrtConfig(-g, g, a, a, n_max, n_min)


@dataclass(frozen=True)
class SlrtState:
    """Running mean and sum of squared deviations (Welford) for both streams."""

    n: int = 0
    mean_u: float = 0.0
    m2_u: float = 0.0
    mean_w: float = 0.0
    m2_w: float = 0.0

    @property
    def var_u(self) -> float:
        return self.m2_u / (self.n - 1) if self.n > 1 else math.nan

    @property
    def var_w(self) -> float:
        return self.m2_w / (self.n - 1) if self.n > 1 else math.nan

    def push(self, u: float, w: float) -> "SlrtState":
        n = self.n + 1
        du = u - self.mean_u
        mu = self.mean_u + du / n
        dw = w - self.mean_w
        mw = self.mean_w + dw / n
        return SlrtState(n, mu, self.m2_u + du * (u - mu), mw, self.m2_w + dw * (w - mw))


def slrt_bound(state: SlrtState, cfg: SlrtConfig) -> float:
    """Half-width A of the continuation region (-A, A)."""
    if state.n < 2:
        raise ValueError("bound needs at least two observations per stream")
    return (state.var_u + state.var_w) / (cfg.gamma1 - cfg.gamma0) * cfg.log_ratio


def slrt_statistic(state: SlrtState, cfg: SlrtConfig) -> float:
    return state.n * (state.mean_u - state.mean_w - 0.5 * (cfg.gamma0 + cfg.gamma1))


def slrt_step(state: SlrtState, u: float, w: float, cfg: SlrtConfig) -> tuple[SlrtState, Decision]:
    """Add one incumbent observation ``u`` and one candidate observation ``w``."""
    if not (math.isfinite(u) and math.isfinite(w)):
        raise ValueError(f"non-finite observation u={u}, w={w}")
    if state.n + 1 > cfg.n_max:
        raise ValueError(f"test already reached n_max={cfg.n_max}")
    state = state.push(u, w)
    if state.n < cfg.n_min:
        return state, Decision.CONTINUE
    z = slrt_statistic(state, cfg)
    a = slrt_bound(state, cfg)
    # with a == 0 any nonzero statistic decides and z == 0 continues
    if z >= a and z > 0.0:
        return state, Decision.ACCEPT_H1
    if z <= -a and z < 0.0:
        return state, Decision.ACCEPT_H0
    if state.n == cfg.n_max:
        if state.mean_w < state.mean_u:
            return state, Decision.FORCED_CANDIDATE
        return state, Decision.FORCED_INCUMBENT
    return state, Decision.CONTINUE


@dataclass(frozen=True)
class TraceRow:
    n: int
    z: float
    bound: float
    decision: Decision


def run_slrt(u: Iterable[float], w: Iterable[float], cfg: SlrtConfig,
             trace: list | None = None) -> tuple[Decision, int]:
    """Feed paired observations until a decision; returns (decision, steps used)."""
    state = SlrtState()
    for ui, wi in zip(u, w):
        state, dec = slrt_step(state, ui, wi, cfg)
        if trace is not None:
            n = state.n
            trace.append(TraceRow(n, slrt_statistic(state, cfg),
                                  slrt_bound(state, cfg) if n >= 2 else math.nan, dec))
        if dec.final:
            return dec, state.n
    return Decision.CONTINUE, state.n


def write_trace(rows: Iterable[TraceRow], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["n", "z", "bound", "decision"])
        for r in rows:
            wr.writerow([r.n, repr(r.z), repr(r.bound), r.decision.value])


@dataclass(frozen=True)
class SprtResult:
    decision: Decision
    n: int
    z: float


def wald_sprt(observations: Iterable[float], logpdf0: Callable[[float], float],
              logpdf1: Callable[[float], float], alpha: float, beta: float,
              n_max: int) -> SprtResult:
    """Wald's SPRT of ``theta0`` (H0) against ``theta1`` (H1) for i.i.d. data.

    Uses Wald's thresholds ``a = ln((1-beta)/alpha)`` and
    ``b = ln(beta/(1-alpha))``. If no boundary is crossed by ``n_max`` the
    decision is forced by the sign of the log-likelihood ratio
    (``FORCED_CANDIDATE`` for H1, ``FORCED_INCUMBENT`` for H0, including 0).
    """
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("alpha and beta must lie in (0, 1)")
    upper = math.log((1.0 - beta) / alpha)
    lower = math.log(beta / (1.0 - alpha))
    z = 0.0
    n = 0
    for x in observations:
        if n >= n_max:
            break
        step = logpdf1(x) - logpdf0(x)
        if not math.isfinite(step):
            raise ValueError(f"non-finite log-likelihood ratio at observation {n + 1}")
        z += step
        n += 1
        if z > upper:
            return SprtResult(Decision.ACCEPT_H1, n, z)
        if z < lower:
            return SprtResult(Decision.ACCEPT_H0, n, z)
    if n < n_max:
        return SprtResult(Decision.CONTINUE, n, z)
    return SprtResult(Decision.FORCED_CANDIDATE if z > 0 else Decision.FORCED_INCUMBENT, n, z)
