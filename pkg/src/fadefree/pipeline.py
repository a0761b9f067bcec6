"""End-to-end receiver pipeline and Monte-Carlo BER measurement.

One repetition simulates a frame through the configured link and runs
the off-line DSP in fixed order: (resampling,) RRC matched filter, time
synchronization, PNLE & DFE, noise-whiten post-filter, detection, BER
counting.  Repetitions with distinct derived seeds accumulate until the
configured minimum bit count is reached.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .channel import (ChannelConfig, add_awgn, apply_fiber_cd, apply_front_end,
                      estimate_power_spectrum, mzm_modulate, square_law_detect)
from .detect import (DetectorRun, FixedStateLogMapDetector, LogMapDetector,
                     ViterbiDetector, hard_decide)
from .equalize import DfeEqualizer, PnleEqualizer, residual_noise
from .errors import ConfigError, StageError
from .signal_core import (SymbolFrame, matched_filter, quantize_uniform,
                          resample_rational, rrc_shape, shaping_delay,
                          synchronize)
from .whiten import fit_noise_whitener, postfilter_apply

Z95 = 1.959963984540054


@dataclass(frozen=True)
class DetectorSpec:
    """Parsed detector selector: mlse | logmap | fixed:<M>, optional @L."""

    kind: str
    surviving_states: int | None = None
    memory_length: int | None = None

    @classmethod
    def parse(cls, text: str) -> "DetectorSpec":
        text = text.strip()
        memory = None
        if "@" in text:
            text, mem = text.split("@", 1)
            memory = int(mem)
        if text == "mlse" or text == "logmap" or text == "threshold":
            return cls(text, None, memory)
        if text.startswith("fixed"):
            m = 16
            if ":" in text:
                m = int(text.split(":", 1)[1])
            return cls("fixed", m, memory)
        raise ConfigError(f"unknown detector '{text}' "
                          "(expected mlse | logmap | fixed:<M> | threshold)")

    def label(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.surviving_states}"
        return self.kind


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one experiment needs: channel, frame, DSP, detectors."""

    channel: ChannelConfig = field(
        default_factory=lambda: ChannelConfig(front_end_bandwidth=6e9,
                                              snr_db=16.0))
    n_training: int = 4000
    n_payload: int = 20000
    symbol_rate: float = 64e9
    prbs_order: int = 15
    sps: int = 2
    rolloff: float = 0.1
    span: int = 64
    quantizer_bits: int = 0          # 0 disables the DAC quantizer
    mod_index: float = 0.85
    dac_rate: float = 0.0            # 0 runs the whole chain at one rate
    scope_rate: float = 0.0
    optical: bool = True             # False: electrical AWGN sanity path
    front_end: bool = True
    front_end_order: int = 1         # analog chains roll off slowly
    pnle_enabled: bool = True
    pnle_taps: tuple = (161, 31, 9)
    pnle_step: float = 5e-4
    pnle_epochs: int = 30
    dfe_enabled: bool = True
    dfe_ff_taps: int = 41
    dfe_fb_taps: int = 21
    dfe_step: float = 5e-4
    dfe_epochs: int = 30
    detectors: tuple = ("fixed:16",)
    memory_length: int = 47
    exact_jacobian: bool = True
    llr_max: float = 50.0
    seed: int = 1
    min_bits: int = 100_000

    def detector_specs(self):
        return [DetectorSpec.parse(d) if isinstance(d, str) else d
                for d in self.detectors]

    def with_(self, **kwargs) -> "PipelineConfig":
        return replace(self, **kwargs)


def paper_scale_config(**overrides) -> PipelineConfig:
    """Operating point of the experimental system: 64 Gbit/s OOK, 100 km,
    full frame geometry, DAC/scope resampling, full equalizer tap counts."""
    base = PipelineConfig(
        channel=ChannelConfig(front_end_bandwidth=2.5e9, snr_db=18.0),
        n_training=5000, n_payload=77240, symbol_rate=64e9,
        quantizer_bits=8, dac_rate=90e9, scope_rate=80e9,
        pnle_taps=(291, 81, 41), pnle_step=2e-4, pnle_epochs=40,
        dfe_ff_taps=71, dfe_fb_taps=61, dfe_step=2e-4, dfe_epochs=40,
        detectors=("fixed:16",), memory_length=47)
    return base.with_(**overrides) if overrides else base


@dataclass(frozen=True)
class BerPoint:
    """One measured point plus the complexity row of the detector that made it."""

    detector: str
    memory_length: int
    surviving_states: int | None
    snr_db: float
    seed: int
    bits: int
    errors: int
    branch_evals_per_step: int
    states_stored: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else 0.0

    @property
    def confidence(self) -> tuple:
        return wilson_interval(self.errors, self.bits)


@dataclass
class BerReport:
    points: list

    def point(self, detector: str) -> BerPoint:
        for p in self.points:
            if p.detector == detector:
                return p
        raise KeyError(detector)


def wilson_interval(errors: int, n: int, z: float = Z95) -> tuple:
    """Wilson 95% score interval for a binomial proportion."""
    if n <= 0:
        return (0.0, 1.0)
    p = errors / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == n else min(1.0, center + half)
    return (lo, hi)


def net_rate(line_rate: float, n_payload: int = 77240, n_training: int = 5000,
             fec_overhead: float = 0.07) -> float:
    """Net information rate after framing and FEC overhead, bits/second."""
    if n_payload <= 0 or n_training < 0 or fec_overhead < 0:
        raise ValueError("invalid framing parameters")
    return line_rate * n_payload / (n_payload + n_training) / (1.0 + fec_overhead)


def _derive_seeds(seed: int, rep: int) -> tuple:
    state = np.random.SeedSequence([int(seed), int(rep)]).generate_state(2)
    return int(state[0]), int(state[1])


def _ratio(target: float, source: float) -> tuple:
    frac = Fraction(target / source).limit_denominator(512)
    return frac.numerator, frac.denominator


class _Stage:
    """Context manager tagging any failure with the stage name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def simulate_frame(cfg: PipelineConfig, rep: int = 0):
    """Transmit one frame through the link; return (frame, received waveform)."""
    noise_seed, prbs_entropy = _derive_seeds(cfg.seed, rep)
    prbs_seed = prbs_entropy % ((1 << cfg.prbs_order) - 1) + 1
    with _Stage("prbs"):
        frame = SymbolFrame.from_prbs(cfg.prbs_order, prbs_seed,
                                      cfg.n_training, cfg.n_payload,
                                      cfg.symbol_rate)
    with _Stage("shape"):
        tx = rrc_shape(frame, cfg.rolloff, cfg.span, cfg.sps)
        if cfg.quantizer_bits:
            tx = quantize_uniform(tx, cfg.quantizer_bits)
    fs0 = cfg.symbol_rate * cfg.sps
    if cfg.dac_rate:
        with _Stage("resample-dac"):
            tx = resample_rational(tx, *_ratio(cfg.dac_rate, fs0))
    if cfg.optical:
        with _Stage("modulate"):
            field_wave = mzm_modulate(tx, mod_index=cfg.mod_index)
        with _Stage("fiber"):
            field_wave = apply_fiber_cd(field_wave, cfg.channel)
        with _Stage("photodiode"):
            rx = square_law_detect(field_wave)
    else:
        rx = tx
    if cfg.front_end:
        with _Stage("front-end"):
            rx = apply_front_end(rx, cfg.channel, order=cfg.front_end_order)
    with _Stage("awgn"):
        rx = add_awgn(rx, cfg.channel.snr_db, noise_seed,
                      reference_power=float(np.var(rx.samples)))
    if cfg.scope_rate:
        with _Stage("resample-scope"):
            rx = resample_rational(rx, *_ratio(cfg.scope_rate, rx.sample_rate))
            rx = resample_rational(rx, *_ratio(fs0, rx.sample_rate))
    return frame, rx


def receive_frame(cfg: PipelineConfig, frame: SymbolFrame, rx):
    """Receiver front matter: matched filter, sync, downsample, normalize.

    Returns symbol-rate samples aligned so sample k corresponds to frame
    symbol k, normalized to unit symbol gain and zero mean over the
    training region.
    """
    with _Stage("matched-filter"):
        mf = matched_filter(rx, cfg.rolloff, cfg.span, cfg.sps)
    with _Stage("synchronize"):
        offset = synchronize(mf, frame.training, cfg.sps, cfg.rolloff, cfg.span)
        start = offset + shaping_delay(cfg.span, cfg.sps)
        z = mf.samples[start:start + len(frame) * cfg.sps:cfg.sps]
        if len(z) < len(frame):
            raise ValueError("captured record too short after synchronization")
    with _Stage("normalize"):
        # joint gain/offset regression against the known preamble: removes
        # the detection DC without leaking the preamble's own symbol average
        # into the slicer threshold, then scales to roughly unit eye
        train = frame.training.astype(np.float64)
        zt = z[:frame.n_training]
        du = train - train.mean()
        gain = float(np.dot(zt - zt.mean(), du) / np.dot(du, du))
        if gain == 0.0:
            raise ValueError("zero training-region gain")
        offset = float(zt.mean() - gain * train.mean())
        scale = float(np.std(zt - offset))
        z = (z - offset) / scale
        if gain < 0.0:
            z = -z
    return z


def equalize_frame(cfg: PipelineConfig, frame: SymbolFrame, z):
    """PNLE then DFE, each trained on the preamble and frozen."""
    train = frame.training
    x = z
    equalizers = {}
    if cfg.pnle_enabled:
        with _Stage("pnle"):
            pnle = PnleEqualizer(cfg.pnle_taps, cfg.pnle_step, cfg.pnle_epochs)
            x = pnle.fit(x, train).transform(x)
            equalizers["pnle"] = pnle
    if cfg.dfe_enabled:
        with _Stage("dfe"):
            dfe = DfeEqualizer(cfg.dfe_ff_taps, cfg.dfe_fb_taps,
                               cfg.dfe_step, cfg.dfe_epochs)
            x = dfe.fit(x, train).transform(x)
            equalizers["dfe"] = dfe
    return x, equalizers


def _make_detector(cfg: PipelineConfig, spec: DetectorSpec):
    memory = spec.memory_length if spec.memory_length is not None \
        else cfg.memory_length
    if spec.kind == "mlse":
        return ViterbiDetector(memory_length=memory)
    if spec.kind == "logmap":
        return LogMapDetector(memory_length=memory,
                              exact_jacobian=cfg.exact_jacobian,
                              llr_max=cfg.llr_max)
    if spec.kind == "fixed":
        return FixedStateLogMapDetector(memory_length=memory,
                                        surviving_states=spec.surviving_states,
                                        exact_jacobian=cfg.exact_jacobian,
                                        llr_max=cfg.llr_max)
    return None  # threshold


def detect_frame(cfg: PipelineConfig, spec: DetectorSpec, frame: SymbolFrame, x):
    """Whiten + detect the payload; returns (payload decisions, DetectorRun)."""
    if spec.kind == "threshold":
        with _Stage("detector:threshold"):
            decisions = hard_decide(x[frame.n_training:])
            run = DetectorRun(kind="threshold", memory_length=0,
                              surviving_states=None,
                              n_symbols=frame.n_payload, branch_metric_evals=0,
                              branch_evals_per_step=0, states_stored=0,
                              decisions=decisions)
        return decisions, run
    detector = _make_detector(cfg, spec)
    with _Stage("whiten"):
        detector.fit(x, frame.training)
    with _Stage(f"detector:{spec.label()}"):
        run, _ = detector.detect_run(x, start=frame.n_training)
    return run.decisions, run


def run_pipeline(cfg: PipelineConfig, min_bits: int | None = None,
                 diagnostics: dict | None = None) -> BerReport:
    """Monte-Carlo BER for every configured detector at one operating point.

    Frames with derived per-repetition seeds accumulate until `min_bits`
    payload bits have been counted for each detector.  Deterministic for a
    fixed (config, seed); pass a dict as `diagnostics` to capture spectra
    and eye samples of the first frame.
    """
    if min_bits is None:
        min_bits = cfg.min_bits
    specs = cfg.detector_specs()
    if not specs:
        raise ConfigError("no detectors configured")
    reps = max(1, math.ceil(min_bits / cfg.n_payload))
    errors = {s.label(): 0 for s in specs}
    bits = {s.label(): 0 for s in specs}
    runs: dict[str, DetectorRun] = {}
    for rep in range(reps):
        frame, rx = simulate_frame(cfg, rep)
        z = receive_frame(cfg, frame, rx)
        x, _ = equalize_frame(cfg, frame, z)
        if diagnostics is not None and rep == 0:
            _collect_diagnostics(cfg, frame, rx, z, x, diagnostics)
        for spec in specs:
            decisions, run = detect_frame(cfg, spec, frame, x)
            with _Stage("ber"):
                errs = int(np.sum(decisions != frame.payload))
            label = spec.label()
            errors[label] += errs
            bits[label] += frame.n_payload
            runs[label] = run
    points = []
    for spec in specs:
        label = spec.label()
        run = runs[label]
        points.append(BerPoint(
            detector=label, memory_length=run.memory_length,
            surviving_states=run.surviving_states,
            snr_db=cfg.channel.snr_db, seed=cfg.seed, bits=bits[label],
            errors=errors[label],
            branch_evals_per_step=run.branch_evals_per_step,
            states_stored=run.states_stored))
    return BerReport(points)


def _collect_diagnostics(cfg, frame, rx, z, x, out: dict):
    with _Stage("diagnostics"):
        seg = min(1024, len(rx.samples) // 4)
        out["rx_spectrum"] = estimate_power_spectrum(rx, seg)
        noise = residual_noise(x, frame.training)
        if len(noise) >= 64:
            out["noise_spectrum"] = estimate_power_spectrum(
                noise, min(256, len(noise) // 4), sample_rate=cfg.symbol_rate)
        n_traces = min(256, frame.n_training - 2)
        eye = np.empty((n_traces, 2 * cfg.sps))
        mf = matched_filter(rx, cfg.rolloff, cfg.span, cfg.sps)
        offset = synchronize(mf, frame.training, cfg.sps, cfg.rolloff, cfg.span)
        start = offset + shaping_delay(cfg.span, cfg.sps)
        for t in range(n_traces):
            lo = start + (t + 1) * cfg.sps - cfg.sps
            eye[t] = mf.samples[lo:lo + 2 * cfg.sps]
        out["eye"] = eye
        out["whitened_sigma2"] = fit_noise_whitener(
            noise, min(cfg.memory_length, len(noise) // 4)).sigma2


# ---------------------------------------------------------------------------
# Parameter sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepAxes:
    """Cartesian sweep coordinates; empty axis means 'use the config value'."""

    m: tuple = ()
    l: tuple = ()
    snr_db: tuple = ()


def _sweep_cells(cfg: PipelineConfig, axes: SweepAxes):
    l_axis = axes.l or (None,)
    snr_axis = axes.snr_db or (cfg.channel.snr_db,)
    for spec in cfg.detector_specs():
        # the M axis only applies to the fixed-state kind
        m_axis = (axes.m or (None,)) if spec.kind == "fixed" else (None,)
        for l in l_axis:
            for m in m_axis:
                for snr in snr_axis:
                    yield spec, l, m, snr


def _run_cell(args):
    cfg, spec, l, m, snr = args
    if spec.kind == "fixed" and m is not None:
        spec = DetectorSpec("fixed", int(m), spec.memory_length)
    if l is not None and spec.memory_length is None:
        cfg = cfg.with_(memory_length=int(l))
    cell_cfg = cfg.with_(channel=cfg.channel.with_(snr_db=float(snr)),
                         detectors=(spec,))
    report = run_pipeline(cell_cfg)
    p = report.points[0]
    coord_l = int(l) if l is not None else (spec.memory_length
                                            if spec.memory_length is not None
                                            else cfg.memory_length)
    return (spec.label(), coord_l, m, float(snr)), p


def sweep(cfg: PipelineConfig, axes: SweepAxes, workers: int | None = None):
    """Run every sweep cell; returns (sorted rows, failures).

    Rows are `(detector, L, M, snr_db, BerPoint)` sorted by coordinates so
    output files are byte-identical for a fixed config and seed.  Cell
    failures are recorded and the sweep continues.  `FADEFREE_THREADS`
    caps the worker pool; one worker runs inline.
    """
    cells = [(cfg, spec, l, m, snr) for spec, l, m, snr in _sweep_cells(cfg, axes)]
    if workers is None:
        workers = min(len(cells), os.cpu_count() or 1)
    env_cap = os.environ.get("FADEFREE_THREADS")
    if env_cap:
        workers = max(1, min(workers, int(env_cap)))
    results = []
    failures = []
    if workers <= 1:
        for cell in cells:
            try:
                results.append(_run_cell(cell))
            except Exception as exc:  # noqa: BLE001 - recorded, sweep continues
                failures.append((_cell_coord(cell), repr(exc)))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(cell, pool.submit(_run_cell, cell)) for cell in cells]
            for cell, fut in futures:
                try:
                    results.append(fut.result())
                except Exception as exc:  # noqa: BLE001
                    failures.append((_cell_coord(cell), repr(exc)))
    def sort_key(item):
        (det, l, m, snr), _ = item
        return (det, l, -1 if m is None else int(m), snr)
    results.sort(key=sort_key)
    return results, failures


def _cell_coord(cell):
    _, spec, l, m, snr = cell
    return (spec.label(), l, m, snr)
