"""Dispersive IM/DD channel model.

Chromatic dispersion acts on the optical field as an all-pass quadratic
phase; the photodiode squares the field, which turns that phase into
cosine-shaped power fading of the detected intensity:

    Re{H(f)} = cos(2 pi^2 beta2 L0 f^2)

so the small-signal response crosses zero at predictable frequencies.
Everything past the photodiode is electrical: a band-limited front end
and additive Gaussian noise at a configured electrical SNR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import butter, sosfilt, welch

from .signal_core import SampledWaveform
from .validation import as_1d_array, check_nonzero_signal, check_positive

C_LIGHT = 299792458.0  # m/s

#: beta2 for D = 17 ps/nm/km at 1550.116 nm, in s^2/m.
DEFAULT_BETA2 = -2.17e-26


@dataclass(frozen=True)
class ChannelConfig:
    """Fiber + receiver front-end parameters.

    beta2 is the group-velocity-dispersion coefficient in s^2/m (negative
    in C-band), fiber_length in meters, loss in dB (scalar power loss),
    front_end_bandwidth the 3 dB point of the electrical front end in Hz.
    snr_db is the post-detection electrical SNR; the experimental
    received-optical-power axis maps onto it nominally dB-for-dB.
    """

    beta2: float = DEFAULT_BETA2
    fiber_length: float = 100e3
    loss_db: float = 20.0
    front_end_bandwidth: float = 2.5e9
    snr_db: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.fiber_length < 0:
            raise ValueError("fiber_length must be >= 0")
        check_positive(self.front_end_bandwidth, "front_end_bandwidth")
        if not math.isfinite(self.beta2 * self.fiber_length):
            raise ValueError("beta2 * fiber_length must be finite")
        if math.isnan(self.snr_db) or np.isneginf(self.snr_db):
            raise ValueError("snr_db must be finite or +inf (noiseless)")

    @classmethod
    def from_dispersion(cls, dispersion_ps_nm_km: float,
                        wavelength_nm: float = 1550.116, **kwargs) -> "ChannelConfig":
        """Build from the engineering D parameter: beta2 = -D lambda^2 / (2 pi c)."""
        d_si = dispersion_ps_nm_km * 1e-6  # ps/nm/km -> s/m^2
        lam = wavelength_nm * 1e-9
        beta2 = -d_si * lam * lam / (2 * math.pi * C_LIGHT)
        return cls(beta2=beta2, **kwargs)

    @property
    def beta2_ps2_km(self) -> float:
        return self.beta2 * 1e27

    def with_(self, **kwargs) -> "ChannelConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class SpectrumEstimate:
    """Averaged periodogram, peak-normalized to 0 dB."""

    frequencies: np.ndarray
    power_db: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=np.float64)
        p = np.asarray(self.power_db, dtype=np.float64)
        if f.ndim != 1 or f.shape != p.shape:
            raise ValueError("frequencies/power_db must be matching 1-d arrays")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "power_db", p)

    @property
    def resolution(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("freq_hz,power_db\n")
            for f, p in zip(self.frequencies, self.power_db):
                fh.write(f"{f:.12g},{p:.12g}\n")


def apply_fiber_cd(field: SampledWaveform, cfg: ChannelConfig) -> SampledWaveform:
    """Propagate a complex baseband field through dispersive fiber.

    Frequency-domain multiplication by exp(-j 2 pi^2 beta2 L0 f^2): an
    all-pass, so energy is conserved before the scalar loss scaling.
    """
    x = np.asarray(field.samples)
    if not np.all(np.isfinite(x)):
        raise ValueError("field contains non-finite samples")
    x = x.astype(np.complex128, copy=False)
    if cfg.fiber_length == 0.0 and cfg.loss_db == 0.0:
        return SampledWaveform(x.copy(), field.sample_rate)
    f = np.fft.fftfreq(len(x), d=1.0 / field.sample_rate)
    phase = 2.0 * np.pi ** 2 * cfg.beta2 * cfg.fiber_length * f * f
    out = np.fft.ifft(np.fft.fft(x) * np.exp(-1j * phase))
    out *= 10.0 ** (-cfg.loss_db / 20.0)
    return SampledWaveform(out, field.sample_rate)


def smallsignal_response(f, cfg: ChannelConfig):
    """Small-signal intensity response of the dispersive IM/DD link.

    cos(2 pi^2 beta2 L0 f^2); even in f, unity at DC.
    """
    f = np.asarray(f, dtype=np.float64)
    return np.cos(2.0 * np.pi ** 2 * cfg.beta2 * cfg.fiber_length * f * f)


def spectral_null_frequencies(cfg: ChannelConfig, f_max: float) -> np.ndarray:
    """All power-fading null frequencies in (0, f_max].

    Zeros of the cosine response: f_n = sqrt((n + 1/2) / (2 pi |beta2| L0)).
    Dispersionless links have none.
    """
    check_positive(f_max, "f_max")
    bl = abs(cfg.beta2) * cfg.fiber_length
    if bl == 0.0:
        return np.empty(0)
    n_max = int(np.floor(2.0 * np.pi * bl * f_max ** 2 - 0.5))
    if n_max < 0:
        return np.empty(0)
    n = np.arange(n_max + 1)
    f = np.sqrt((n + 0.5) / (2.0 * np.pi * bl))
    return f[f <= f_max]


def square_law_detect(field: SampledWaveform) -> SampledWaveform:
    """Photodiode model: output_i = |field_i|^2."""
    x = np.asarray(field.samples)
    return SampledWaveform(np.abs(x) ** 2, field.sample_rate)


def apply_front_end(signal: SampledWaveform, cfg: ChannelConfig,
                    order: int = 4) -> SampledWaveform:
    """Band-limit with a smooth low-pass (Butterworth, 4th order default).

    The digital design places the measured 3 dB point on
    cfg.front_end_bandwidth exactly; bandwidth at or above Nyquist is
    rejected.
    """
    nyquist = signal.sample_rate / 2.0
    if cfg.front_end_bandwidth >= nyquist:
        raise ValueError(
            f"front_end_bandwidth {cfg.front_end_bandwidth:g} Hz must be below "
            f"Nyquist {nyquist:g} Hz")
    sos = butter(order, cfg.front_end_bandwidth, btype="low",
                 fs=signal.sample_rate, output="sos")
    return signal.with_samples(sosfilt(sos, signal.samples))


def add_awgn(signal, snr_db: float, seed: int,
             reference_power: float | None = None):
    """Add zero-mean Gaussian noise at the requested SNR; seeded, reproducible.

    Noise variance is reference_power / 10^(snr_db/10); the reference
    defaults to the mean-square power of the input.  snr_db = +inf returns
    the input unchanged.  Zero-power input is rejected.
    """
    wave = isinstance(signal, SampledWaveform)
    x = signal.samples if wave else as_1d_array(signal, "signal")
    check_nonzero_signal(x, "signal")
    if np.isposinf(snr_db):
        out = x.copy()
    else:
        power = float(np.mean(np.abs(x) ** 2)) if reference_power is None \
            else float(reference_power)
        check_positive(power, "reference_power")
        sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
        rng = np.random.default_rng(seed)
        out = x + sigma * rng.standard_normal(len(x))
    return signal.with_samples(out) if wave else out


def estimate_power_spectrum(signal, segment_length: int,
                            sample_rate: float | None = None) -> SpectrumEstimate:
    """Welch averaged periodogram, peak-normalized to 0 dB."""
    wave = isinstance(signal, SampledWaveform)
    x = signal.samples if wave else as_1d_array(signal, "signal")
    fs = signal.sample_rate if wave else (sample_rate or 1.0)
    if np.iscomplexobj(x):
        raise TypeError("spectrum estimate expects a real (detected) signal")
    if len(x) < 2 * segment_length:
        raise ValueError("signal must be at least 2 segments long")
    f, pxx = welch(x, fs=fs, nperseg=segment_length)
    # the half-weighted DC and Nyquist edge bins are not representative
    keep = slice(1, -1) if len(f) > 4 else slice(None)
    f, pxx = f[keep], np.maximum(pxx[keep], 1e-300)
    power_db = 10.0 * np.log10(pxx / pxx.max())
    return SpectrumEstimate(f, power_db)


def mzm_modulate(drive: SampledWaveform, bias: float = 1.0,
                 mod_index: float = 0.85, transfer: str = "linear") -> SampledWaveform:
    """Intensity-modulate an optical carrier with the electrical drive.

    Linear mode (the default operating assumption): intensity is
    bias * (1 + mod_index * drive/peak), clipped at zero, and the field is
    its square root.  'sinusoidal' applies the interferometric transfer
    around quadrature for stress tests.
    """
    x = np.asarray(drive.samples, dtype=np.float64)
    peak = np.max(np.abs(x))
    check_positive(peak, "drive peak amplitude")
    check_positive(bias, "bias")
    xn = x / peak
    if transfer == "linear":
        intensity = bias * np.maximum(1.0 + mod_index * xn, 0.0)
    elif transfer == "sinusoidal":
        intensity = bias * np.sin(np.pi / 4.0 * (1.0 + mod_index * xn)) ** 2 * 2.0
    else:
        raise ValueError("transfer must be 'linear' or 'sinusoidal'")
    field = np.sqrt(intensity).astype(np.complex128)
    return SampledWaveform(field, drive.sample_rate)
