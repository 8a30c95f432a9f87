"""Bootstrap partitions, loss functions and the evaluation cache."""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import learners
from .data import Dataset
from .param_space import Config

MAX_REDRAWS = 100


class ResamplingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Partition:
    train_indices: np.ndarray  # size n, drawn with replacement
    test_indices: np.ndarray  # rows never drawn, ascending

    def __eq__(self, other):
        return (isinstance(other, Partition)
                and np.array_equal(self.train_indices, other.train_indices)
                and np.array_equal(self.test_indices, other.test_indices))

    @property
    def test_fraction(self) -> float:
        return self.test_indices.size / self.train_indices.size


def _draw_partition(n: int, rng: np.random.Generator) -> tuple[Partition, int]:
    for attempt in range(MAX_REDRAWS):
        train = rng.integers(0, n, size=n)
        seen = np.zeros(n, dtype=bool)
        seen[train] = True
        test = np.flatnonzero(~seen)
        if test.size:
            return Partition(train, test), attempt
    raise ResamplingError(f"no non-empty test set after {MAX_REDRAWS} bootstrap draws (n={n})")


@dataclass(frozen=True, eq=False)
class ResamplingInstance:
    """K bootstrap partitions of an n-row dataset.

    In ``fixed`` mode the partitions are drawn once and shared by every
    configuration. In ``fresh`` mode partition k of configuration i is drawn on
    demand from ``(seed, i, k)``, so different configurations never share a
    split while replays stay reproducible.
    """

    n: int
    K: int
    seed: int
    partitions: tuple[Partition, ...] = ()
    mode: str = "fixed"
    fingerprint: str = ""
    redraws: int = 0

    def partition(self, k: int, config_id: int = 0) -> Partition:
        if not 0 <= k < self.K:
            raise ResamplingError(f"partition index {k} out of range for K={self.K}")
        if self.mode == "fixed":
            return self.partitions[k]
        rng = np.random.default_rng([self.seed, config_id, k])
        return _draw_partition(self.n, rng)[0]

    def __iter__(self) -> Iterator[Partition]:
        return iter(self.partitions)

    def __eq__(self, other):
        return (isinstance(other, ResamplingInstance)
                and (self.n, self.K, self.seed, self.mode) == (other.n, other.K, other.seed, other.mode)
                and self.partitions == other.partitions)


def make_bootstrap_instance(n: int, K: int, seed: int, mode: str = "fixed",
                            fingerprint: str = "") -> ResamplingInstance:
    if n < 2:
        raise ResamplingError(f"need n >= 2 rows for bootstrap, got {n}")
    if K < 1:
        raise ResamplingError(f"need K >= 1, got {K}")
    if mode not in ("fixed", "fresh"):
        raise ResamplingError(f"unknown mode {mode!r}")
    if mode == "fresh":
        return ResamplingInstance(n, K, seed, (), mode, fingerprint)
    rng = np.random.default_rng(seed)
    parts, redraws = [], 0
    for _ in range(K):
        part, r = _draw_partition(n, rng)
        parts.append(part)
        redraws += r
    return ResamplingInstance(n, K, seed, tuple(parts), mode, fingerprint, redraws)


def loss(y_true, y_pred, kind: str) -> float:
    """Mean misclassification error (``mmce``) or mean squared error (``mse``)."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ResamplingError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ResamplingError("loss of an empty set is undefined")
    if kind == "mmce":
        return float(np.mean(y_true != y_pred))
    if kind == "mse":
        d = y_true.astype(np.float64) - y_pred.astype(np.float64)
        return float(np.mean(d * d))
    raise ResamplingError(f"unknown loss {kind!r}")


def loss_kind_for(ds: Dataset) -> str:
    return "mmce" if ds.task_kind == "classification" else "mse"


@dataclass
class EvalCache:
    """Write-once store of losses keyed by ``(config id, partition index)``.

    ``fits`` counts learner trainings performed through :func:`evaluate`, i.e.
    cache misses.
    """

    values: dict = field(default_factory=dict)
    fits: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __contains__(self, key) -> bool:
        return key in self.values

    def __len__(self) -> int:
        return len(self.values)

    def get(self, config_id: int, k: int) -> float | None:
        return self.values.get((config_id, k))

    def put(self, config_id: int, k: int, value: float) -> None:
        key = (int(config_id), int(k))
        with self._lock:
            if key in self.values:
                raise ResamplingError(f"cache key {key} already written")
            self.values[key] = float(value)

    def table(self, config_ids, K: int) -> np.ndarray:
        """Losses as a len(config_ids) x K array (NaN where missing)."""
        out = np.full((len(config_ids), K), np.nan)
        for r, cid in enumerate(config_ids):
            for k in range(K):
                v = self.values.get((cid, k))
                if v is not None:
                    out[r, k] = v
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["config_id", "partition", "loss"])
            for (cid, k), v in sorted(self.values.items()):
                w.writerow([cid, k, repr(v)])

    @classmethod
    def from_csv(cls, path) -> "EvalCache":
        cache = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["config_id", "partition", "loss"]:
                raise ResamplingError(f"{path}: expected header config_id,partition,loss")
            for row in reader:
                cache.put(int(row["config_id"]), int(row["partition"]), float(row["loss"]))
        return cache


def evaluate(cfg: Config, kind, ds: Dataset, inst: ResamplingInstance, k: int,
             cache: EvalCache) -> float:
    """Loss of ``cfg`` trained on partition ``k``'s bootstrap rows and scored out-of-bag."""
    hit = cache.get(cfg.id, k)
    if hit is not None:
        return hit
    part = inst.partition(k, cfg.id)
    model = learners.fit(kind, cfg, ds.take(part.train_indices))
    test = ds.take(part.test_indices)
    value = loss(test.target, learners.predict(model, test), loss_kind_for(ds))
    cache.put(cfg.id, k, value)
    with cache._lock:
        cache.fits += 1
    return value
