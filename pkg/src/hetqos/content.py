"""Zipf content popularity and cache-partition probabilities.

The catalog holds N equally sized contents ranked by popularity; cache-enabled
user devices store the top M1, small cells the top M2 (M1 <= M2 <= N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ContentConfig:
    """Catalog size, cache sizes, Zipf skew and content size in bits."""

    catalog_size: int
    cache_d2d: int
    cache_sbs: int
    skew: float
    content_size_bits: float = 1.0e8

    def __post_init__(self):
        if self.catalog_size < 1:
            raise ConfigError("content.catalog_size", "must be >= 1")
        if not 1 <= self.cache_d2d <= self.cache_sbs <= self.catalog_size:
            raise ConfigError(
                "content.cache_d2d",
                "need 1 <= cache_d2d <= cache_sbs <= catalog_size")
        if self.skew < 0:
            raise ConfigError("content.zipf_skew", "must be >= 0")
        if not self.content_size_bits > 0:
            raise ConfigError("content.content_size_bits", "must be > 0")


# Normalization constants are cached per config: catalogs stay below ~1e5 in
# every scenario, so direct summation is exact enough and cheap.
_NORM_CACHE: dict[tuple[int, float], float] = {}


def _zipf_norm(cfg: ContentConfig) -> float:
    key = (cfg.catalog_size, cfg.skew)
    if key not in _NORM_CACHE:
        ranks = np.arange(1, cfg.catalog_size + 1, dtype=float)
        _NORM_CACHE[key] = float(np.sum(ranks ** -cfg.skew))
    return _NORM_CACHE[key]


def zipf_pmf(rank, cfg: ContentConfig):
    """Probability that the typical request is for the rank-th content."""
    r = np.asarray(rank)
    if np.any(r < 1) or np.any(r > cfg.catalog_size):
        raise ValueError(f"rank out of range 1..{cfg.catalog_size}")
    out = np.asarray(r, dtype=float) ** -cfg.skew / _zipf_norm(cfg)
    return out if out.ndim else float(out)


def f_pop(a: int, b: int, cfg: ContentConfig) -> float:
    """Probability mass of popularity ranks a..b inclusive.

    Empty ranges are allowed via b = a - 1 (mass 0), which is how the cache
    partition behaves when a cache already spans the catalog.
    """
    if a < 1 or b > cfg.catalog_size:
        raise ValueError(f"range [{a}, {b}] outside 1..{cfg.catalog_size}")
    if b == a - 1:
        return 0.0
    if a > b:
        raise ValueError(f"empty range [{a}, {b}]")
    ranks = np.arange(a, b + 1, dtype=float)
    return float(np.sum(ranks ** -cfg.skew) / _zipf_norm(cfg))
