"""Flat key = value configuration files and scenario construction.

Keys use dotted sections and carry explicit unit suffixes (sigma_m,
bandwidth_hz, ...) so normalized-density presets cannot be silently
misread.  A scenario bundles the three config objects plus sweep axis,
deployment mode and seed.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

from .association import NetworkConfig
from .content import ContentConfig
from .errors import ConfigError
from .geometry import TierLayout
from .rates import NumericsProfile
from .traffic import TrafficConfig

__all__ = ["Scenario", "parse_config_text", "load_config", "build_scenario",
           "resolve_config_path", "PRESET_NAMES"]

PRESET_NAMES = ("fig3", "fig4", "fig5", "fig6", "fig7")

_DEFAULTS = {
    "mode": "clustered",
    "seed": "1",
    "network.pathloss_beta": "4",
    "network.noise_w": "0",
    "network.d2d_exclusion_m": "0",
    "content.content_size_bits": "1e8",
    "traffic.request_rate_per_s": "0.2",
    "traffic.contents_per_request": "1",
    "traffic.bandwidth_hz": "7e7",
    "traffic.backhaul_scale": "0.8",
    "traffic.weights_d2d": "1",
    "traffic.weights_sbs": "1",
    "traffic.weights_mbs": "1",
    "traffic.weights_local": "1",
    "numerics.cluster_model": "palm",
    "numerics.s_nodes": "40",
    "numerics.offset_nodes": "32",
    "numerics.outer_rel_tol": "2e-4",
    "sweep.parameter": "",
    "sweep.values": "",
}

_REQUIRED = (
    "network.user_intensity_per_m2",
    "network.cache_ratio",
    "network.sbs_parent_intensity_per_m2",
    "network.sbs_mean_daughters",
    "network.sbs_sigma_m",
    "network.mbs_intensity_per_m2",
    "network.power_d2d_w",
    "network.power_sbs_w",
    "network.power_mbs_w",
    "content.catalog_size",
    "content.cache_d2d",
    "content.cache_sbs",
    "content.zipf_skew",
)


def parse_config_text(text):
    """Parse flat `key = value` lines; '#' starts a comment."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}", f"expected key = value: {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve_config_path(name_or_path):
    """A filesystem path, or a packaged preset name like 'fig3'."""
    import os
    if os.path.exists(name_or_path):
        with open(name_or_path) as fh:
            return fh.read()
    if name_or_path in PRESET_NAMES:
        ref = importlib.resources.files("hetqos.presets").joinpath(
            f"{name_or_path}.cfg")
        return ref.read_text()
    raise ConfigError("config", f"no such file or preset: {name_or_path}")


def load_config(name_or_path):
    return parse_config_text(resolve_config_path(name_or_path))


def _get_float(raw, key):
    try:
        return float(raw[key])
    except KeyError:
        raise ConfigError(key, "missing required key") from None
    except ValueError:
        raise ConfigError(key, f"not a number: {raw[key]!r}") from None


def _get_int(raw, key):
    v = _get_float(raw, key)
    if v != int(v):
        raise ConfigError(key, f"expected integer, got {raw[key]!r}")
    return int(v)


def _get_weights(raw, key):
    txt = raw.get(key, "1")
    try:
        vals = [float(tok) for tok in txt.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(key, f"bad weight list: {txt!r}") from None
    if len(vals) > 8:
        raise ConfigError(key, "at most 8 class weights per tier")
    return tuple(vals + [1.0] * (8 - len(vals)))


@dataclass(frozen=True)
class Scenario:
    """One resolved run: configs, sweep axis, mode, seed, raw keys."""

    network: NetworkConfig
    content: ContentConfig
    traffic: TrafficConfig
    numerics: NumericsProfile
    mode: str
    seed: int
    sweep_parameter: str | None
    sweep_values: tuple
    raw: tuple  # sorted (key, value) pairs of the resolved config

    def sweep_points(self):
        if not self.sweep_parameter:
            return ((None, self),)
        return tuple((v, self.at(self.sweep_parameter, v))
                     for v in self.sweep_values)

    def at(self, key, value):
        """Scenario with one config key overridden (rebuilds configs)."""
        raw = dict(self.raw)
        if key not in raw:
            raise ConfigError(key, "sweep parameter references unknown key")
        raw[key] = repr(float(value))
        return build_scenario(raw, mode=self.mode, seed=self.seed)


def build_scenario(raw, mode=None, seed=None) -> Scenario:
    merged = dict(_DEFAULTS)
    merged.update(raw)
    for key in _REQUIRED:
        if key not in merged:
            raise ConfigError(key, "missing required key")
    mode = mode if mode is not None else merged["mode"]
    if mode not in ("clustered", "baseline"):
        raise ConfigError("mode", f"must be clustered|baseline, got {mode!r}")
    merged["mode"] = mode
    seed = seed if seed is not None else int(_get_float(merged, "seed"))
    merged["seed"] = str(seed)

    sbs = TierLayout.thomas(
        parent_intensity=_get_float(merged,
                                    "network.sbs_parent_intensity_per_m2"),
        mean_daughters=_get_float(merged, "network.sbs_mean_daughters"),
        spread=_get_float(merged, "network.sbs_sigma_m"))
    if mode == "baseline":
        sbs = TierLayout.poisson(sbs.effective_intensity)
    network = NetworkConfig(
        user_intensity=_get_float(merged, "network.user_intensity_per_m2"),
        cache_ratio=_get_float(merged, "network.cache_ratio"),
        sbs_layout=sbs,
        mbs_intensity=_get_float(merged, "network.mbs_intensity_per_m2"),
        power_d2d=_get_float(merged, "network.power_d2d_w"),
        power_sbs=_get_float(merged, "network.power_sbs_w"),
        power_mbs=_get_float(merged, "network.power_mbs_w"),
        pathloss_beta=_get_float(merged, "network.pathloss_beta"),
        noise=_get_float(merged, "network.noise_w"),
        d2d_exclusion=_get_float(merged, "network.d2d_exclusion_m"))
    content = ContentConfig(
        catalog_size=_get_int(merged, "content.catalog_size"),
        cache_d2d=_get_int(merged, "content.cache_d2d"),
        cache_sbs=_get_int(merged, "content.cache_sbs"),
        skew=_get_float(merged, "content.zipf_skew"),
        content_size_bits=_get_float(merged, "content.content_size_bits"))
    weights = tuple(
        tuple(col[i] for col in (_get_weights(merged, "traffic.weights_d2d"),
                                 _get_weights(merged, "traffic.weights_sbs"),
                                 _get_weights(merged, "traffic.weights_mbs"),
                                 _get_weights(merged, "traffic.weights_local")))
        for i in range(8))
    traffic = TrafficConfig(
        request_rate=_get_float(merged, "traffic.request_rate_per_s"),
        contents_per_request=_get_float(merged,
                                        "traffic.contents_per_request"),
        bandwidth=_get_float(merged, "traffic.bandwidth_hz"),
        weights=weights,
        backhaul_scale=_get_float(merged, "traffic.backhaul_scale"))
    numerics = NumericsProfile(
        s_nodes=_get_int(merged, "numerics.s_nodes"),
        offset_nodes=_get_int(merged, "numerics.offset_nodes"),
        outer_rel_tol=_get_float(merged, "numerics.outer_rel_tol"),
        cluster_model=merged["numerics.cluster_model"])

    sweep_param = merged["sweep.parameter"].strip() or None
    values = tuple(float(tok) for tok in merged["sweep.values"].split(",")
                   if tok.strip())
    if sweep_param and sweep_param not in merged:
        raise ConfigError("sweep.parameter",
                          f"references unknown key {sweep_param!r}")
    if sweep_param and not values:
        raise ConfigError("sweep.values", "sweep parameter set but no values")
    return Scenario(network=network, content=content, traffic=traffic,
                    numerics=numerics, mode=mode, seed=seed,
                    sweep_parameter=sweep_param, sweep_values=values,
                    raw=tuple(sorted(merged.items())))
