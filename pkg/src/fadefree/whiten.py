"""Noise-whitening post-filter fitted from Yule-Walker equations.

The adaptive equalizers leave colored residual noise.  An AR(L) model of
that noise, solved by Levinson-Durbin, gives a monic prediction-error
filter h = [1, -a_1, ..., -a_L]; running the equalized samples through h
whitens the noise at the price of re-introducing a *known* ISI of memory
L, which the trellis detectors then resolve.  sigma2 is the final
prediction-error variance and scales the detector branch metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter, welch
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import NonStationaryFitError
from .validation import as_1d_array, check_nonzero_signal, check_positive


@dataclass(frozen=True)
class WhitenedChannel:
    """Post-filter taps h_0..h_L plus the whitened noise variance."""

    h: np.ndarray
    sigma2: float

    def __post_init__(self):
        h = as_1d_array(self.h, "h")
        if len(h) < 1 or h[0] == 0.0:
            raise ValueError("h must have a nonzero leading tap h_0")
        check_positive(self.sigma2, "sigma2")
        object.__setattr__(self, "h", h)

    @property
    def memory_length(self) -> int:
        return len(self.h) - 1

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"L={self.memory_length},sigma2={float(self.sigma2)!r}\n")
            for tap in self.h:
                fh.write(f"{float(tap)!r}\n")

    @classmethod
    def load_csv(cls, path) -> "WhitenedChannel":
        with open(path) as fh:
            header = fh.readline().strip()
            fields = dict(part.split("=") for part in header.split(","))
            sigma2 = float(fields["sigma2"])
            taps = [float(line) for line in fh if line.strip()]
        ch = cls(np.asarray(taps), sigma2)
        if ch.memory_length != int(fields["L"]):
            raise ValueError("tap count does not match the L header")
        return ch


def autocorrelation(noise, max_lag: int) -> np.ndarray:
    """Biased autocorrelation estimate r_0..r_maxlag.

    r_m = (1/N) sum_k n_k n_{k+m}; the biased form keeps the Toeplitz
    system positive semidefinite, which Levinson-Durbin needs.
    """
    x = as_1d_array(noise, "noise")
    if len(x) <= max_lag:
        raise ValueError("need more samples than max_lag")
    check_nonzero_signal(x, "noise")
    n = len(x)
    r = np.empty(max_lag + 1)
    for m in range(max_lag + 1):
        r[m] = np.dot(x[: n - m], x[m:]) / n
    return r


def yule_walker_fit(r, order: int) -> WhitenedChannel:
    """Solve the order-L Yule-Walker system by Levinson-Durbin.

    Returns the monic whitening filter h = [1, -a_1, ..., -a_L] and the
    final prediction-error variance.  Any reflection coefficient with
    |kappa| >= 1 marks a non-stationary (or rank-deficient) fit.
    """
    r = as_1d_array(r, "r")
    if order < 0:
        raise ValueError("order must be >= 0")
    if len(r) < order + 1:
        raise ValueError("need autocorrelations up to lag `order`")
    if r[0] <= 0:
        raise ValueError("r_0 must be positive")
    a = np.zeros(order)
    err = float(r[0])
    for i in range(1, order + 1):
        acc = r[i] - np.dot(a[: i - 1], r[i - 1:0:-1])
        kappa = acc / err
        if not np.isfinite(kappa) or abs(kappa) >= 1.0:
            raise NonStationaryFitError(
                f"reflection coefficient {kappa:.6g} at stage {i} leaves the unit circle")
        a_new = a.copy()
        a_new[i - 1] = kappa
        a_new[: i - 1] = a[: i - 1] - kappa * a[i - 2:: -1][: i - 1]
        a = a_new
        err *= 1.0 - kappa * kappa
    h = np.concatenate([[1.0], -a])
    return WhitenedChannel(h, err)


def fit_noise_whitener(noise, order: int) -> WhitenedChannel:
    """Autocorrelation + Yule-Walker in one step."""
    return yule_walker_fit(autocorrelation(noise, order), order)


def postfilter_apply(x, ch: WhitenedChannel) -> np.ndarray:
    """FIR post-filter v_k = h_0 x_k + sum_{i=1..L} h_i x_{k-i}.

    Zero prehistory; output length equals input length.
    """
    x = as_1d_array(x, "x")
    if len(x) < len(ch.h):
        raise ValueError("input shorter than the post-filter")
    return lfilter(ch.h, [1.0], x)


def spectral_flatness(noise, segment_length: int | None = None) -> float:
    """Geometric over arithmetic mean of the averaged periodogram, in (0, 1].

    1 means perfectly white.  Averaged (Welch) segments keep the estimator
    itself from biasing white noise far below 1.
    """
    x = as_1d_array(noise, "noise")
    check_nonzero_signal(x, "noise")
    if segment_length is None:
        segment_length = max(16, min(256, len(x) // 32))
    segment_length = min(segment_length, len(x))
    _, pxx = welch(x, nperseg=segment_length)
    pxx = pxx[1:-1] if len(pxx) > 4 else pxx  # DC/Nyquist bins are half-weighted
    pxx = np.maximum(pxx, 1e-300)
    return float(np.exp(np.mean(np.log(pxx))) / np.mean(pxx))


class NoiseWhitener(BaseEstimator, TransformerMixin):
    """Estimator wrapper: fit the AR model on a noise record, then filter.

    fit(X[, y]) accepts either the noise record itself (y omitted) or the
    equalized training samples plus the known symbols, in which case the
    residual X - y is what gets modeled.  After fitting, `taps_`,
    `noise_variance_`, and `channel_` hold the whitening filter.
    """

    def __init__(self, order: int = 16):
        self.order = order

    def fit(self, X, y=None):
        x = as_1d_array(X, "X")
        if y is not None:
            y = np.asarray(y, dtype=np.float64)
            if len(y) > len(x):
                raise ValueError("more symbols than samples")
            x = x[: len(y)] - y
        self.channel_ = fit_noise_whitener(x, self.order)
        self.taps_ = self.channel_.h
        self.noise_variance_ = self.channel_.sigma2
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "channel_"):
            raise NotFittedError("NoiseWhitener must be fitted before transform")
        return postfilter_apply(X, self.channel_)
