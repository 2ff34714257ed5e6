"""Popularity model checks: hand values, partitions, monotonicity."""

import numpy as np
import pytest

from hetqos.content import ContentConfig, f_pop, zipf_pmf
from hetqos.errors import ConfigError


def cfg(n=1000, m1=10, m2=100, skew=0.8):
    return ContentConfig(catalog_size=n, cache_d2d=m1, cache_sbs=m2, skew=skew)


def test_hand_value_two_contents():
    c = cfg(n=2, m1=1, m2=1, skew=1.0)
    assert zipf_pmf(1, c) == pytest.approx(2.0 / 3.0, rel=1e-14)
    assert zipf_pmf(2, c) == pytest.approx(1.0 / 3.0, rel=1e-14)


def test_uniform_when_skew_zero():
    c = cfg(n=50, m1=5, m2=10, skew=0.0)
    for i in (1, 17, 50):
        assert zipf_pmf(i, c) == pytest.approx(1.0 / 50.0, rel=1e-14)


def test_pmf_normalizes():
    c = cfg()
    total = zipf_pmf(np.arange(1, 1001), c).sum()
    assert total == pytest.approx(1.0, abs=1e-12)


def test_pmf_nonincreasing():
    c = cfg(skew=1.2)
    p = zipf_pmf(np.arange(1, 1001), c)
    assert np.all(np.diff(p) <= 0)


def test_f_pop_full_support():
    c = cfg()
    assert f_pop(1, c.catalog_size, c) == pytest.approx(1.0, abs=1e-12)


def test_f_pop_disjoint_partition():
    c = cfg()
    m1 = c.cache_d2d
    assert f_pop(1, m1, c) + f_pop(m1 + 1, c.catalog_size, c) == pytest.approx(
        1.0, abs=1e-12)


def test_f_pop_direct_summation_oracle():
    c = cfg()
    direct = sum(i ** -0.8 for i in range(1, 101)) / sum(
        i ** -0.8 for i in range(1, 1001))
    assert f_pop(1, 100, c) == pytest.approx(direct, abs=1e-12)


def test_three_way_partition_identity():
    rng = np.random.default_rng(42)
    for _ in range(25):
        n = int(rng.integers(2, 5000))
        m1 = int(rng.integers(1, n + 1))
        m2 = int(rng.integers(m1, n + 1))
        c = ContentConfig(n, m1, m2, skew=float(rng.uniform(0, 2.5)))
        total = (f_pop(1, m1, c) + f_pop(m1 + 1, m2, c)
                 + f_pop(m2 + 1, n, c))
        assert total == pytest.approx(1.0, abs=1e-12)


def test_head_mass_monotonicity():
    c = cfg()
    masses = [f_pop(1, k, c) for k in (1, 10, 100, 500, 1000)]
    assert all(x <= y for x, y in zip(masses, masses[1:]))
    # steeper skew concentrates mass on the cached head
    flat = cfg(skew=0.2)
    steep = cfg(skew=1.5)
    assert f_pop(1, 10, steep) > f_pop(1, 10, flat)


def test_empty_tail_when_cache_covers_catalog():
    c = cfg(n=100, m1=10, m2=100)
    assert f_pop(101, 100, c) == 0.0


def test_domain_errors():
    c = cfg()
    with pytest.raises(ValueError):
        zipf_pmf(0, c)
    with pytest.raises(ValueError):
        zipf_pmf(1001, c)
    with pytest.raises(ValueError):
        f_pop(5, 3, c)
    with pytest.raises(ConfigError):
        ContentConfig(100, 50, 20, 0.8)
    with pytest.raises(ConfigError):
        ContentConfig(100, 10, 20, -0.1)
