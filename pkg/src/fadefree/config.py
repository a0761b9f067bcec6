"""Flat-key experiment configuration: [section] headers, key = value lines.

The whole experiment is one file plus one seed; CLI `--set section.key=value`
overrides land on top before anything is built.
"""

from __future__ import annotations

import configparser
import math

from .channel import ChannelConfig
from .errors import ConfigError
from .pipeline import PipelineConfig, SweepAxes, paper_scale_config

_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def _parse_bool(text: str) -> bool:
    try:
        return _BOOL[text.strip().lower()]
    except KeyError:
        raise ConfigError(f"expected a boolean, got '{text}'") from None


def _parse_float(text: str) -> float:
    text = text.strip().lower()
    if text in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got '{text}'") from None


def _parse_list(text: str, conv):
    items = [t for t in (p.strip() for p in text.split(",")) if t]
    return tuple(conv(t) for t in items)


# key -> (PipelineConfig field or special handler, converter)
_SCHEMA = {
    "channel.beta2_ps2_km": ("beta2", lambda t: _parse_float(t) * 1e-27),
    "channel.dispersion_ps_nm_km": ("_dispersion", _parse_float),
    "channel.fiber_length_km": ("fiber_length", lambda t: _parse_float(t) * 1e3),
    "channel.loss_db": ("loss_db", _parse_float),
    "channel.front_end_bandwidth_ghz":
        ("front_end_bandwidth", lambda t: _parse_float(t) * 1e9),
    "channel.snr_db": ("snr_db", _parse_float),
    "channel.front_end": ("front_end", _parse_bool),
    "channel.front_end_order": ("front_end_order", int),
    "channel.optical": ("optical", _parse_bool),
    "frame.n_training": ("n_training", int),
    "frame.n_payload": ("n_payload", int),
    "frame.symbol_rate_gbd": ("symbol_rate", lambda t: _parse_float(t) * 1e9),
    "frame.prbs_order": ("prbs_order", int),
    "shaping.rolloff": ("rolloff", _parse_float),
    "shaping.span": ("span", int),
    "shaping.sps": ("sps", int),
    "shaping.quantizer_bits": ("quantizer_bits", int),
    "shaping.mod_index": ("mod_index", _parse_float),
    "shaping.dac_rate_gsa": ("dac_rate", lambda t: _parse_float(t) * 1e9),
    "shaping.scope_rate_gsa": ("scope_rate", lambda t: _parse_float(t) * 1e9),
    "pnle.enabled": ("pnle_enabled", _parse_bool),
    "pnle.taps1": ("_pnle1", int),
    "pnle.taps2": ("_pnle2", int),
    "pnle.taps3": ("_pnle3", int),
    "pnle.step_size": ("pnle_step", _parse_float),
    "pnle.epochs": ("pnle_epochs", int),
    "dfe.enabled": ("dfe_enabled", _parse_bool),
    "dfe.ff_taps": ("dfe_ff_taps", int),
    "dfe.fb_taps": ("dfe_fb_taps", int),
    "dfe.step_size": ("dfe_step", _parse_float),
    "dfe.epochs": ("dfe_epochs", int),
    "detector.kinds": ("detectors", lambda t: _parse_list(t, str)),
    "detector.memory_length": ("memory_length", int),
    "detector.llr_max": ("llr_max", _parse_float),
    "detector.exact_jacobian": ("exact_jacobian", _parse_bool),
    "run.seed": ("seed", int),
    "run.min_bits": ("min_bits", lambda t: int(_parse_float(t))),
    "run.paper_scale": ("_paper_scale", _parse_bool),
    "sweep.m": ("_sweep_m", lambda t: _parse_list(t, int)),
    "sweep.l": ("_sweep_l", lambda t: _parse_list(t, int)),
    "sweep.snr_db": ("_sweep_snr", lambda t: _parse_list(t, _parse_float)),
}

_CHANNEL_FIELDS = {"beta2", "fiber_length", "loss_db", "front_end_bandwidth",
                   "snr_db"}


def read_config_file(path) -> dict:
    """Parse a config file into a flat {section.key: raw string} dict."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from exc
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[f"{section}.{key}"] = value
    return flat


def apply_overrides(flat: dict, overrides) -> dict:
    """Merge `--set section.key=value` pairs over the file contents."""
    merged = dict(flat)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"--set needs section.key=value, got '{item}'")
        key, value = item.split("=", 1)
        merged[key.strip()] = value.strip()
    return merged


def build_config(flat: dict) -> tuple:
    """Turn flat keys into (PipelineConfig, SweepAxes)."""
    values = {}
    for key, raw in flat.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key '{key}'")
        name, conv = _SCHEMA[key]
        try:
            values[name] = conv(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from exc
    base = paper_scale_config() if values.pop("_paper_scale", False) \
        else PipelineConfig()
    channel_kwargs = {}
    if "_dispersion" in values:
        ref = ChannelConfig.from_dispersion(values.pop("_dispersion"))
        channel_kwargs["beta2"] = ref.beta2
    pnle_taps = list(base.pnle_taps)
    for i in range(3):
        tap = values.pop(f"_pnle{i + 1}", None)
        if tap is not None:
            pnle_taps[i] = tap
    axes = SweepAxes(m=values.pop("_sweep_m", ()),
                     l=values.pop("_sweep_l", ()),
                     snr_db=values.pop("_sweep_snr", ()))
    for field_name in list(values):
        if field_name in _CHANNEL_FIELDS:
            channel_kwargs[field_name] = values.pop(field_name)
    try:
        cfg = base.with_(channel=base.channel.with_(**channel_kwargs),
                         pnle_taps=tuple(pnle_taps), **values)
        cfg.detector_specs()  # validate detector selectors eagerly
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, axes


def load_config(path=None, overrides=None) -> tuple:
    flat = read_config_file(path) if path else {}
    return build_config(apply_overrides(flat, overrides))
