"""Bit/symbol generation, framing, pulse shaping, and timing recovery.

The transmit chain starts here: PRBS bits are mapped to PAM2 symbols,
framed into a training preamble plus payload, and shaped with a
root-raised-cosine filter.  The receive side uses the same shaping taps
as a matched filter and locates the frame by correlating against the
shaped preamble.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, resample_poly

from .errors import SyncNotFoundError
from .validation import as_1d_array, check_bits, check_pam2, check_positive

# Canonical ITU-style PRBS feedback taps: x^n + x^k + 1.
PRBS_TAPS = {7: 6, 15: 14, 23: 18, 31: 28}

DEFAULT_ROLLOFF = 0.1
DEFAULT_SPAN = 64


@dataclass(frozen=True)
class SampledWaveform:
    """Uniformly sampled real or complex signal.

    Carries the analog-domain stages of the chain.  Construction rejects
    non-finite samples and non-positive sample rates.
    """

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if np.iscomplexobj(arr):
            arr = np.ascontiguousarray(arr, dtype=np.complex128)
        else:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("samples must be 1-d")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples contain non-finite values")
        check_positive(self.sample_rate, "sample_rate")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.samples)

    def with_samples(self, samples) -> "SampledWaveform":
        return SampledWaveform(samples, self.sample_rate)


@dataclass(frozen=True)
class SymbolFrame:
    """Training preamble plus payload PAM2 symbols at one sample per symbol."""

    training: np.ndarray
    payload: np.ndarray
    symbol_rate: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "training", check_pam2(self.training, "training"))
        object.__setattr__(self, "payload", check_pam2(self.payload, "payload"))
        check_positive(self.symbol_rate, "symbol_rate")

    @property
    def symbols(self) -> np.ndarray:
        return np.concatenate([self.training, self.payload])

    @property
    def n_training(self) -> int:
        return len(self.training)

    @property
    def n_payload(self) -> int:
        return len(self.payload)

    def __len__(self) -> int:
        return len(self.training) + len(self.payload)

    @classmethod
    def from_prbs(cls, order: int = 15, seed: int = 1,
                  n_training: int = 5000, n_payload: int = 77240,
                  symbol_rate: float = 1.0) -> "SymbolFrame":
        """Build a frame from one continuous PRBS run (training first)."""
        bits = prbs_generate(order, seed, n_training + n_payload)
        symbols = pam2_map(bits)
        return cls(symbols[:n_training], symbols[n_training:], symbol_rate)


def prbs_generate(order: int, seed: int, length: int) -> np.ndarray:
    """Generate a pseudo-random binary sequence from a Fibonacci LFSR.

    The register shifts left each step; the output bit is the old MSB and
    the feedback (XOR of the two canonical taps) enters at the LSB.
    Deterministic for fixed (order, seed).
    """
    if order not in PRBS_TAPS:
        raise ValueError(f"unsupported PRBS order {order}; choose from {sorted(PRBS_TAPS)}")
    if length < 1:
        raise ValueError("length must be >= 1")
    mask = (1 << order) - 1
    reg = int(seed) & mask
    if reg == 0:
        raise ValueError("seed must be nonzero (all-zero LFSR state is stuck)")
    tap = PRBS_TAPS[order]
    out = np.empty(length, dtype=np.int8)
    for i in range(length):
        msb = (reg >> (order - 1)) & 1
        fb = msb ^ ((reg >> (tap - 1)) & 1)
        out[i] = msb
        reg = ((reg << 1) | fb) & mask
    return out


def prbs_period(order: int, seed: int = 1) -> int:
    """Number of LFSR steps until the register state first repeats."""
    if order not in PRBS_TAPS:
        raise ValueError(f"unsupported PRBS order {order}")
    mask = (1 << order) - 1
    start = int(seed) & mask
    if start == 0:
        raise ValueError("seed must be nonzero")
    tap = PRBS_TAPS[order]
    reg = start
    steps = 0
    while True:
        fb = ((reg >> (order - 1)) & 1) ^ ((reg >> (tap - 1)) & 1)
        reg = ((reg << 1) | fb) & mask
        steps += 1
        if reg == start:
            return steps


def pam2_map(bits) -> np.ndarray:
    """Map bits to PAM2 symbols: 0 -> -1, 1 -> +1."""
    bits = check_bits(bits)
    return (2 * bits.astype(np.int8) - 1).astype(np.int8)


def pam2_demap(symbols) -> np.ndarray:
    """Inverse of :func:`pam2_map`: -1 -> 0, +1 -> 1."""
    symbols = check_pam2(symbols)
    return ((symbols + 1) // 2).astype(np.int8)


def rrc_taps(rolloff: float, span: int, sps: int) -> np.ndarray:
    """Root-raised-cosine taps, truncated to `span` symbols, unit energy.

    `span` must be even and `sps` >= 2; the filter has span*sps + 1 taps and
    is exactly symmetric.  rolloff = 0 degenerates to sampled sinc.
    """
    if not 0 <= rolloff <= 1:
        raise ValueError("rolloff must lie in [0, 1]")
    if span <= 0 or span % 2:
        raise ValueError("span must be a positive even symbol count")
    if sps < 2:
        raise ValueError("sps must be >= 2")
    n = span * sps + 1
    t = (np.arange(n) - (n - 1) / 2) / sps  # time in symbol periods
    if rolloff == 0:
        h = np.sinc(t)
    else:
        h = np.empty(n)
        t_sing = 1.0 / (4.0 * rolloff)
        for i, ti in enumerate(t):
            if ti == 0.0:
                h[i] = 1.0 - rolloff + 4.0 * rolloff / np.pi
            elif abs(abs(ti) - t_sing) < 1e-12:
                h[i] = (rolloff / np.sqrt(2.0)) * (
                    (1 + 2 / np.pi) * np.sin(np.pi / (4 * rolloff))
                    + (1 - 2 / np.pi) * np.cos(np.pi / (4 * rolloff))
                )
            else:
                num = np.sin(np.pi * ti * (1 - rolloff)) \
                    + 4 * rolloff * ti * np.cos(np.pi * ti * (1 + rolloff))
                den = np.pi * ti * (1 - (4 * rolloff * ti) ** 2)
                h[i] = num / den
    h = h / np.sqrt(np.sum(h * h))
    # Force exact symmetry (the formula is symmetric; this removes rounding skew).
    return 0.5 * (h + h[::-1])


def upsample(symbols: np.ndarray, sps: int) -> np.ndarray:
    """Zero-stuff to `sps` samples per symbol."""
    out = np.zeros(len(symbols) * sps)
    out[::sps] = symbols
    return out


def rrc_shape(frame, rolloff: float = DEFAULT_ROLLOFF, span: int = DEFAULT_SPAN,
              sps: int = 2, symbol_rate: float | None = None) -> SampledWaveform:
    """Upsample symbols by `sps` and convolve with unit-energy RRC taps.

    Accepts a :class:`SymbolFrame` (symbol rate taken from the frame) or a
    plain symbol array.  Full convolution: the output leads with the
    filter's half-span transient of span*sps/2 samples.
    """
    if isinstance(frame, SymbolFrame):
        symbols = frame.symbols.astype(np.float64)
        rate = frame.symbol_rate
    else:
        symbols = as_1d_array(frame, "symbols")
        rate = 1.0 if symbol_rate is None else symbol_rate
    taps = rrc_taps(rolloff, span, sps)
    samples = fftconvolve(upsample(symbols, sps), taps, mode="full")
    return SampledWaveform(samples, rate * sps)


def matched_filter(wave: SampledWaveform, rolloff: float = DEFAULT_ROLLOFF,
                   span: int = DEFAULT_SPAN, sps: int = 2) -> SampledWaveform:
    """Convolve with the same RRC taps; cascade of two is ISI-free."""
    taps = rrc_taps(rolloff, span, sps)
    return wave.with_samples(fftconvolve(wave.samples, taps, mode="full"))


def shaping_delay(span: int, sps: int) -> int:
    """Samples of group delay introduced by one RRC filter pass."""
    return span * sps // 2


def synchronize(received, training, sps: int = 2, rolloff: float = DEFAULT_ROLLOFF,
                span: int = DEFAULT_SPAN, min_correlation: float = 0.2) -> int:
    """Locate the frame: lag maximizing normalized cross-correlation.

    The reference is the shaped training sequence.  Both sides are mean
    removed so a detection DC offset does not bias the search.  Ties break
    toward the smallest lag; a peak below `min_correlation` raises
    :class:`SyncNotFoundError`.
    """
    rx = received.samples if isinstance(received, SampledWaveform) else received
    rx = as_1d_array(rx, "received")
    training = check_pam2(training, "training")
    ref = rrc_shape(training, rolloff, span, sps).samples
    if len(rx) < len(ref):
        raise ValueError("received record shorter than the shaped training sequence")
    rx = rx - rx.mean()
    ref = ref - ref.mean()
    num = fftconvolve(rx, ref[::-1], mode="valid")
    # Sliding window energy of rx over the reference length.
    csum = np.concatenate([[0.0], np.cumsum(rx * rx)])
    win = csum[len(ref):] - csum[:-len(ref)]
    denom = np.sqrt(win * np.sum(ref * ref))
    corr = np.where(denom > 0, num / np.maximum(denom, 1e-300), 0.0)
    best = int(np.argmax(corr))  # argmax returns the first (smallest) lag on ties
    if corr[best] < min_correlation:
        raise SyncNotFoundError(
            f"correlation peak {corr[best]:.3f} below floor {min_correlation}")
    return best


def resample_rational(wave: SampledWaveform, up: int, down: int) -> SampledWaveform:
    """Polyphase rational-ratio resampling (DAC <-> scope rate conversion)."""
    if up < 1 or down < 1:
        raise ValueError("up/down factors must be positive integers")
    samples = resample_poly(wave.samples, up, down)
    return SampledWaveform(samples, wave.sample_rate * up / down)


def quantize_uniform(wave: SampledWaveform, bits: int = 8) -> SampledWaveform:
    """Uniform mid-rise quantizer over the signal's own full scale."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    x = wave.samples
    if np.iscomplexobj(x):
        raise TypeError("quantizer models a real DAC/ADC")
    scale = np.max(np.abs(x))
    if scale == 0:
        return wave.with_samples(np.zeros_like(x))
    levels = 2 ** (bits - 1)
    q = np.round(x / scale * levels)
    q = np.clip(q, -levels, levels - 1)
    return wave.with_samples(q * scale / levels)


def save_waveform_csv(wave: SampledWaveform, path) -> None:
    """One sample per line under a `sample_rate=<float>` header row."""
    with open(path, "w") as fh:
        fh.write(f"sample_rate={float(wave.sample_rate)!r}\n")
        if wave.is_complex:
            for s in wave.samples:
                fh.write(f"{complex(s)!r}\n")
        else:
            for s in wave.samples:
                fh.write(f"{float(s)!r}\n")


def load_waveform_csv(path) -> SampledWaveform:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("sample_rate="):
            raise ValueError("missing sample_rate header")
        rate = float(header.split("=", 1)[1])
        values = [complex(line.strip().replace("(", "").replace(")", ""))
                  for line in fh if line.strip()]
    arr = np.asarray(values)
    if np.all(arr.imag == 0):
        arr = arr.real
    return SampledWaveform(arr, rate)
