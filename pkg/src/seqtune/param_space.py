"""Hyperparameter search spaces and uniform sampling of configurations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Any, Mapping, Sequence

import numpy as np

KINDS = ("continuous", "integer", "categorical", "log2")


class SpaceError(ValueError):
    pass


@dataclass(frozen=True)
class ParamDef:
    """One dimension of a search space.

    ``lo``/``hi`` bound continuous and integer dimensions; for ``log2`` they
    bound the exponent, so the value is ``2**x`` with ``x`` in ``[lo, hi]``.
    """

    name: str
    kind: str
    lo: float | None = None
    hi: float | None = None
    values: tuple = ()

    def __post_init__(self):
        if not self.name:
            raise SpaceError("parameter name must be non-empty")
        if self.kind not in KINDS:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            vals = tuple(self.values)
            if not vals:
                raise SpaceError(f"{self.name}: categorical list is empty")
            if len(set(vals)) != len(vals):
                raise SpaceError(f"{self.name}: categorical values not distinct")
            object.__setattr__(self, "values", vals)
            return
        if self.lo is None or self.hi is None:
            raise SpaceError(f"{self.name}: lo and hi are required")
        if not self.lo < self.hi:
            raise SpaceError(f"{self.name}: need lo < hi, got [{self.lo}, {self.hi}]")
        if self.kind == "integer":
            if int(self.lo) != self.lo or int(self.hi) != self.hi:
                raise SpaceError(f"{self.name}: integer bounds must be whole numbers")
            object.__setattr__(self, "lo", int(self.lo))
            object.__setattr__(self, "hi", int(self.hi))

    def sample(self, rng: np.random.Generator) -> Any:
        if self.kind == "continuous":
            return float(rng.uniform(self.lo, self.hi))
        if self.kind == "integer":
            return int(rng.integers(self.lo, self.hi, endpoint=True))
        if self.kind == "log2":
            return float(2.0 ** rng.uniform(self.lo, self.hi))
        return self.values[int(rng.integers(len(self.values)))]

    def contains(self, value: Any) -> bool:
        if self.kind == "categorical":
            return value in self.values
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            return False
        if not math.isfinite(value):
            return False
        if self.kind == "integer":
            return int(value) == value and self.lo <= value <= self.hi
        if self.kind == "log2":
            if value <= 0:
                return False
            x = math.log2(value)
            # 2**hi can round a hair past hi after log2
            return self.lo - 1e-12 <= x <= self.hi + 1e-12
        return self.lo <= value <= self.hi

    def to_dict(self) -> dict:
        if self.kind == "categorical":
            return {"name": self.name, "kind": self.kind, "values": list(self.values)}
        return {"name": self.name, "kind": self.kind, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ParamDef":
        allowed = {"name", "kind", "lo", "hi", "values"}
        extra = set(d) - allowed
        if extra:
            raise SpaceError(f"unknown keys in parameter definition: {sorted(extra)}")
        return cls(d["name"], d["kind"], d.get("lo"), d.get("hi"), tuple(d.get("values", ())))


@dataclass(frozen=True)
class ParamSpace:
    params: tuple[ParamDef, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise SpaceError(f"duplicate parameter names in {names}")

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def __getitem__(self, name: str) -> ParamDef:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def to_list(self) -> list[dict]:
        return [p.to_dict() for p in self.params]

    @classmethod
    def from_list(cls, items: Sequence[Mapping[str, Any]]) -> "ParamSpace":
        return cls(tuple(ParamDef.from_dict(d) for d in items))


@dataclass(frozen=True)
class Config:
    values: Mapping[str, Any]
    id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", MappingProxyType(dict(self.values)))

    def __getitem__(self, name: str) -> Any:
        return self.values[name]

    def __hash__(self):
        return hash((self.id, tuple(sorted(self.values.items(), key=lambda kv: kv[0]))))

    def __reduce__(self):
        # mappingproxy is not picklable; needed for worker pools
        return (Config, (dict(self.values), self.id))

    def as_dict(self) -> dict:
        return dict(self.values)


def sample_config(space: ParamSpace, rng: np.random.Generator, config_id: int = 0) -> Config:
    """Draw one configuration, each dimension independently and uniformly."""
    return Config({p.name: p.sample(rng) for p in space.params}, config_id)


def sample_configs(space: ParamSpace, rng: np.random.Generator, n: int, start_id: int = 0) -> list[Config]:
    return [sample_config(space, rng, start_id + i) for i in range(n)]


def validate_config(space: ParamSpace, cfg: Config) -> bool:
    if set(cfg.values) != set(space.names):
        return False
    return all(p.contains(cfg.values[p.name]) for p in space.params)


# Search spaces used for the two bundled learners.
ELASTIC_NET_SPACE = ParamSpace((
    ParamDef("lambda", "log2", -15, 15),
    ParamDef("alpha", "continuous", 0.0, 1.0),
))

CART_SPACE = ParamSpace((
    ParamDef("cp", "continuous", 0.0, 0.5),
    ParamDef("maxdepth", "integer", 1, 30),
))
