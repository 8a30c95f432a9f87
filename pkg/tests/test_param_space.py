import pickle

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from seqtune.param_space import (
    CART_SPACE,
    ELASTIC_NET_SPACE,
    Config,
    ParamDef,
    ParamSpace,
    SpaceError,
    sample_config,
    sample_configs,
    validate_config,
)


def test_cp_sample_in_range():
    rng = np.random.default_rng(1)
    for _ in range(200):
        v = sample_config(CART_SPACE, rng)["cp"]
        assert 0.0 <= v <= 0.5


def test_maxdepth_integer_in_range_and_endpoints_reached():
    rng = np.random.default_rng(2)
    seen = {sample_config(CART_SPACE, rng)["maxdepth"] for _ in range(3000)}
    assert all(isinstance(v, int) for v in seen)
    assert seen == set(range(1, 31))


def test_same_seed_same_config():
    a = sample_config(ELASTIC_NET_SPACE, np.random.default_rng(42))
    b = sample_config(ELASTIC_NET_SPACE, np.random.default_rng(42))
    assert a == b


def test_validate_examples():
    assert validate_config(CART_SPACE, Config({"cp": 0.3, "maxdepth": 4}))
    assert not validate_config(CART_SPACE, Config({"cp": 0.7, "maxdepth": 4}))
    assert not validate_config(CART_SPACE, Config({"cp": 0.3}))
    assert not validate_config(CART_SPACE, Config({"cp": 0.3, "maxdepth": 4, "extra": 1}))
    assert not validate_config(CART_SPACE, Config({"cp": 0.3, "maxdepth": 4.5}))


@pytest.mark.parametrize("bad", [
    dict(name="x", kind="continuous", lo=1.0, hi=1.0),
    dict(name="x", kind="integer", lo=3, hi=1),
    dict(name="x", kind="categorical", values=()),
    dict(name="x", kind="categorical", values=("a", "a")),
    dict(name="x", kind="weird", lo=0, hi=1),
    dict(name="", kind="continuous", lo=0, hi=1),
])
def test_paramdef_invariants(bad):
    with pytest.raises(SpaceError):
        ParamDef(**bad)


def test_duplicate_names_rejected():
    with pytest.raises(SpaceError):
        ParamSpace((ParamDef("a", "continuous", 0, 1), ParamDef("a", "integer", 0, 3)))


def test_round_trip_and_unknown_keys():
    space = ParamSpace((ParamDef("a", "continuous", 0, 1), ParamDef("k", "categorical", values=("x", "y")),
                        ParamDef("lam", "log2", -3, 3)))
    assert ParamSpace.from_list(space.to_list()) == space
    with pytest.raises(SpaceError):
        ParamSpace.from_list([{"name": "a", "kind": "continuous", "lo": 0, "hi": 1, "prior": "x"}])


def test_categorical_uniform():
    space = ParamSpace((ParamDef("k", "categorical", values=("a", "b", "c")),))
    rng = np.random.default_rng(3)
    draws = [sample_config(space, rng)["k"] for _ in range(6000)]
    counts = np.array([draws.count(v) for v in "abc"])
    assert stats.chisquare(counts).pvalue > 1e-3


def test_config_pickles_and_ids_sequential():
    cfgs = sample_configs(CART_SPACE, np.random.default_rng(0), 5, start_id=10)
    assert [c.id for c in cfgs] == [10, 11, 12, 13, 14]
    assert pickle.loads(pickle.dumps(cfgs[0])) == cfgs[0]


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1),
       lo=st.floats(-100, 100, allow_nan=False),
       width=st.floats(0.01, 50, allow_nan=False))
def test_continuous_uniform_ks(seed, lo, width):
    hi = lo + width
    pd = ParamDef("x", "continuous", lo, hi)
    rng = np.random.default_rng(seed)
    xs = np.array([pd.sample(rng) for _ in range(10_000)])
    assert xs.min() >= lo and xs.max() <= hi
    assert stats.kstest(xs, stats.uniform(lo, hi - lo).cdf).statistic < 0.02


@settings(max_examples=5, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_log2_exponent_uniform_ks(seed):
    pd = ELASTIC_NET_SPACE["lambda"]
    rng = np.random.default_rng(seed)
    xs = np.log2([pd.sample(rng) for _ in range(10_000)])
    assert xs.min() >= -15 - 1e-9 and xs.max() <= 15 + 1e-9
    assert stats.kstest(xs, stats.uniform(-15, 30).cdf).statistic < 0.02
