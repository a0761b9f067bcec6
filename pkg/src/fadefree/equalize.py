"""Adaptive equalizers trained on the frame preamble.

Two stages, both LMS-trained against the known training symbols and then
frozen for the payload: a memory-polynomial nonlinear equalizer (powers
of delayed samples, no cross terms) and a decision-feedback equalizer.
Feedforward windows are centered on the current sample; the DFE feedback
path is strictly causal and switches from known symbols to its own hard
decisions at the end of the preamble.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import UnstableEqualizerError
from .validation import as_1d_array, check_pam2


def _check_tap_count(n: int, name: str) -> int:
    n = int(n)
    if n < 0 or (n > 0 and n % 2 == 0):
        raise ValueError(f"{name} must be odd (or 0 to disable the kernel), got {n}")
    return n


@njit(cache=True)
def _poly_output(r, k, w, half):
    # One kernel's contribution at sample k; w[i] multiplies r[k + half - i]^p
    # (the power is baked into r).
    y = 0.0
    n = len(w)
    for i in range(n):
        idx = k + half - i
        if 0 <= idx < len(r):
            y += w[i] * r[idx]
    return y


@njit(cache=True)
def _pnle_train(r1, r2, r3, d, w1, w2, w3, mu, epochs):
    n1, n2, n3 = len(w1), len(w2), len(w3)
    h1, h2, h3 = n1 // 2, n2 // 2, n3 // 2
    n_train = len(d)
    mse = np.zeros(epochs)
    for ep in range(epochs):
        acc = 0.0
        for k in range(n_train):
            y = _poly_output(r1, k, w1, h1) + _poly_output(r2, k, w2, h2) \
                + _poly_output(r3, k, w3, h3)
            e = d[k] - y
            acc += e * e
            for i in range(n1):
                idx = k + h1 - i
                if 0 <= idx < len(r1):
                    w1[i] += mu * e * r1[idx]
            for i in range(n2):
                idx = k + h2 - i
                if 0 <= idx < len(r2):
                    w2[i] += mu * e * r2[idx]
            for i in range(n3):
                idx = k + h3 - i
                if 0 <= idx < len(r3):
                    w3[i] += mu * e * r3[idx]
        mse[ep] = acc / n_train
    return mse


@njit(cache=True)
def _pnle_apply(r1, r2, r3, w1, w2, w3):
    n = len(r1)
    h1, h2, h3 = len(w1) // 2, len(w2) // 2, len(w3) // 2
    y = np.empty(n)
    for k in range(n):
        y[k] = _poly_output(r1, k, w1, h1) + _poly_output(r2, k, w2, h2) \
            + _poly_output(r3, k, w3, h3)
    return y


@njit(cache=True)
def _dfe_train(x, d, a, b, mu, epochs):
    nf, nb = len(a), len(b)
    hf = nf // 2
    n_train = len(d)
    mse = np.zeros(epochs)
    for ep in range(epochs):
        acc = 0.0
        for k in range(n_train):
            y = _poly_output(x, k, a, hf)
            for j in range(nb):
                idx = k - 1 - j
                if idx >= 0:
                    y -= b[j] * d[idx]
            e = d[k] - y
            acc += e * e
            for i in range(nf):
                idx = k + hf - i
                if 0 <= idx < len(x):
                    a[i] += mu * e * x[idx]
            for j in range(nb):
                idx = k - 1 - j
                if idx >= 0:
                    b[j] -= mu * e * d[idx]
        mse[ep] = acc / n_train
    return mse


@njit(cache=True)
def _dfe_apply(x, known, a, b):
    # known symbols feed back over the training prefix, hard decisions after.
    n = len(x)
    nb = len(b)
    hf = len(a) // 2
    y = np.empty(n)
    fb = np.empty(n)
    n_known = len(known)
    for k in range(n):
        v = _poly_output(x, k, a, hf)
        for j in range(nb):
            idx = k - 1 - j
            if idx >= 0:
                v -= b[j] * fb[idx]
        y[k] = v
        if k < n_known:
            fb[k] = known[k]
        else:
            fb[k] = 1.0 if v >= 0.0 else -1.0
    return y


def _check_divergence(mse: np.ndarray, initial_mse: float) -> None:
    if np.any(~np.isfinite(mse)) or np.any(mse > 10.0 * initial_mse):
        raise UnstableEqualizerError(
            f"unstable step size: training MSE grew to {np.max(mse):.3g} "
            f"from {initial_mse:.3g}")


class PnleEqualizer(BaseEstimator, TransformerMixin):
    """3rd-order memory-polynomial equalizer, LMS-trained.

    y_k = sum_i w1_i r_{k-i} + sum_i w2_i r^2_{k-i} + sum_i w3_i r^3_{k-i}
    with each kernel's window centered on the current sample.  `taps` gives
    the three kernel lengths (odd, or 0 to disable an order).  Weights start
    from a center-spike linear kernel, so an undistorted input trains to the
    identity map.
    """

    def __init__(self, taps=(31, 11, 7), step_size: float = 1e-3, epochs: int = 3):
        self.taps = taps
        self.step_size = step_size
        self.epochs = epochs

    def _validate(self):
        if len(self.taps) != 3:
            raise ValueError("taps must be (taps1, taps2, taps3)")
        n1 = _check_tap_count(self.taps[0], "taps1")
        n2 = _check_tap_count(self.taps[1], "taps2")
        n3 = _check_tap_count(self.taps[2], "taps3")
        if n1 < 1:
            raise ValueError("the linear kernel needs at least one tap")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        return n1, n2, n3

    def fit(self, X, y):
        """Train on the preamble: X = received 1-sps samples aligned so that
        X[k] corresponds to training symbol y[k]."""
        n1, n2, n3 = self._validate()
        r = as_1d_array(X, "X")
        d = check_pam2(y, "y").astype(np.float64)
        if len(r) < len(d):
            raise ValueError("fewer received samples than training symbols")
        w1 = np.zeros(n1)
        w1[n1 // 2] = 1.0
        w2 = np.zeros(n2)
        w3 = np.zeros(n3)
        initial_mse = float(np.mean((r[: len(d)] - d) ** 2)) + 1e-30
        mse = _pnle_train(r, r * r, r ** 3, d, w1, w2, w3,
                          float(self.step_size), int(self.epochs))
        _check_divergence(mse, initial_mse)
        self.weights_ = {"w1": w1, "w2": w2, "w3": w3}
        self.mse_per_epoch_ = mse
        self.n_training_ = len(d)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "weights_"):
            raise NotFittedError("PnleEqualizer must be fitted before transform")
        r = as_1d_array(X, "X")
        w = self.weights_
        return _pnle_apply(r, r * r, r ** 3, w["w1"], w["w2"], w["w3"])


class DfeEqualizer(BaseEstimator, TransformerMixin):
    """Decision-feedback equalizer: y_k = sum a_i x_{k-i} - sum b_j d_{k-j}.

    Feedback uses the known symbols while training and hard decisions on
    the payload.  ff_taps is odd (centered window); fb_taps may be 0, which
    reduces the structure to a plain linear feedforward equalizer.
    """

    def __init__(self, ff_taps: int = 15, fb_taps: int = 11,
                 step_size: float = 1e-3, epochs: int = 3):
        self.ff_taps = ff_taps
        self.fb_taps = fb_taps
        self.step_size = step_size
        self.epochs = epochs

    def fit(self, X, y):
        nf = _check_tap_count(self.ff_taps, "ff_taps")
        if nf < 1:
            raise ValueError("ff_taps must be >= 1")
        nb = int(self.fb_taps)
        if nb < 0:
            raise ValueError("fb_taps must be >= 0")
        if self.step_size <= 0 or self.epochs < 1:
            raise ValueError("step_size must be positive and epochs >= 1")
        x = as_1d_array(X, "X")
        d = check_pam2(y, "y").astype(np.float64)
        if len(x) < len(d):
            raise ValueError("fewer samples than training symbols")
        a = np.zeros(nf)
        a[nf // 2] = 1.0
        b = np.zeros(nb)
        initial_mse = float(np.mean((x[: len(d)] - d) ** 2)) + 1e-30
        mse = _dfe_train(x, d, a, b, float(self.step_size), int(self.epochs))
        _check_divergence(mse, initial_mse)
        self.weights_ = {"ff": a, "fb": b}
        self.mse_per_epoch_ = mse
        self.training_symbols_ = d
        return self

    def transform(self, X) -> np.ndarray:
        """Equalize a frame-aligned record; the first len(training) feedback
        decisions come from the known preamble, the rest are self-decided."""
        if not hasattr(self, "weights_"):
            raise NotFittedError("DfeEqualizer must be fitted before transform")
        x = as_1d_array(X, "X")
        known = self.training_symbols_[: min(len(self.training_symbols_), len(x))]
        return _dfe_apply(x, known, self.weights_["ff"], self.weights_["fb"])


def residual_noise(x, symbols) -> np.ndarray:
    """Equalizer output minus known symbols over the training region."""
    x = as_1d_array(x, "x")
    symbols = check_pam2(symbols, "symbols").astype(np.float64)
    if len(x) < len(symbols):
        raise ValueError("fewer samples than symbols")
    return x[: len(symbols)] - symbols


def save_weights_csv(weights: dict, path) -> None:
    """One kernel per section: a `[name]` header, then taps one per line."""
    with open(path, "w") as fh:
        for name, taps in weights.items():
            fh.write(f"[{name}]\n")
            for t in np.asarray(taps, dtype=np.float64):
                fh.write(f"{float(t)!r}\n")


def load_weights_csv(path) -> dict:
    weights: dict[str, np.ndarray] = {}
    name = None
    values: list[float] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                if name is not None:
                    weights[name] = np.asarray(values)
                name = line[1:-1]
                values = []
            else:
                values.append(float(line))
    if name is not None:
        weights[name] = np.asarray(values)
    return weights
