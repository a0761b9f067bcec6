"""Trellis sequence detectors over the whitened ISI channel.

The whitening post-filter leaves a known FIR response h_0..h_L, so each
received sample is one branch of a 2^L-state trellis.  Three detectors
share that model:

* Viterbi MLSE: the classical baseline, full state space, hard output.
* Full Log-MAP (BCJR): forward/backward recursions in the log domain,
  per-symbol LLR output.
* Fixed-state Log-MAP: Log-MAP with only the M best states kept alive
  per step, so compute and live-state storage are O(2M)/O(M) regardless
  of L.  The backward pass runs strictly over the branches the forward
  pass retained, with no new path extensions.

States pack the last L symbols into an integer: bit (m-1) holds symbol
c_{k-m}, so the LSB is the newest symbol and state index i advances as
i' = ((i << 1) | bit) & (2^L - 1).  For L = 2 this enumerates
s0=(-1,-1), s1=(-1,+1), s2=(+1,-1), s3=(+1,+1) with the older symbol in
the high bit.

Every run carries complexity counters: `branch_metric_evals` counts
unique branch metrics computed (per-step 2^{L+1} for the full-state
detectors, at most 2M for fixed-state), `states_stored` the peak number
of live states in any step, and `selection_ops` the comparisons spent
picking M survivors (reported separately so the branch count stays
comparable across detectors).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import StateSpaceError
from .validation import as_1d_array, check_pam2, check_positive
from .whiten import NoiseWhitener, WhitenedChannel, postfilter_apply

DEFAULT_HARD_CAP = 20
DEFAULT_LLR_MAX = 50.0

#: (N+1) * 2^L guard for the full Log-MAP alpha/beta tables.
_LOGMAP_CELL_LIMIT = 1 << 24


# ---------------------------------------------------------------------------
# Trellis construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trellis:
    """Enumerated ISI trellis for the full-state detectors."""

    memory_length: int
    h: np.ndarray
    outputs: np.ndarray      # (S, 2): noiseless branch output for input bit j
    next_state: np.ndarray   # (S, 2)
    in_state: np.ndarray     # (S, 2): the two predecessors of each state
    in_bit: np.ndarray       # (S, 2): input bit carried by each incoming branch

    @property
    def n_states(self) -> int:
        return self.outputs.shape[0]

    def state_symbols(self, index: int) -> tuple:
        """Symbols (c_{k-L}, ..., c_{k-1}) of a state, oldest first."""
        L = self.memory_length
        return tuple(2 * ((index >> (m - 1)) & 1) - 1 for m in range(L, 0, -1))

    def branch(self, state: int, symbol: int):
        """Follow one branch: (state, input symbol) -> (next state, output)."""
        j = (symbol + 1) // 2
        return int(self.next_state[state, j]), float(self.outputs[state, j])


def state_index(prehistory) -> int:
    """Pack prehistory symbols (oldest first) into a state index."""
    syms = check_pam2(prehistory, "prehistory")
    idx = 0
    for m, c in enumerate(reversed(syms)):  # m = 0 is the newest symbol
        idx |= ((int(c) + 1) // 2) << m
    return idx


def build_trellis(ch: WhitenedChannel, hard_cap: int = DEFAULT_HARD_CAP) -> Trellis:
    """Enumerate all 2^L states and branch outputs from the whitened taps.

    Branch output is the convolution of h with the branch's symbol history:
    v' = h_0 c_k + sum_{m=1..L} h_m c_{k-m}.  Raises
    :class:`StateSpaceError` beyond the full-state cap; the fixed-state
    detector does not use this table and has no such cap.
    """
    L = ch.memory_length
    if L > hard_cap:
        raise StateSpaceError(
            f"state space too large: 2^{L} states exceeds the full-state cap "
            f"2^{hard_cap}")
    S = 1 << L
    states = np.arange(S, dtype=np.int64)
    tail = np.zeros(S)
    for m in range(1, L + 1):
        tail += ch.h[m] * (2.0 * ((states >> (m - 1)) & 1) - 1.0)
    outputs = np.empty((S, 2))
    outputs[:, 0] = -ch.h[0] + tail
    outputs[:, 1] = ch.h[0] + tail
    mask = S - 1
    next_state = np.empty((S, 2), dtype=np.int64)
    in_state = np.empty((S, 2), dtype=np.int64)
    in_bit = np.empty((S, 2), dtype=np.int8)
    if L == 0:
        next_state[0] = [0, 0]
        in_state[0] = [0, 0]
        in_bit[0] = [0, 1]
    else:
        for j in (0, 1):
            next_state[:, j] = ((states << 1) | j) & mask
        in_state[:, 0] = states >> 1
        in_state[:, 1] = (states >> 1) | (S >> 1)
        in_bit[:, 0] = states & 1
        in_bit[:, 1] = states & 1
    return Trellis(L, ch.h, outputs, next_state, in_state, in_bit)


# ---------------------------------------------------------------------------
# Branch metric and the Jacobian logarithm
# ---------------------------------------------------------------------------

def branch_metric(z_k: float, v_k: float, sigma2: float) -> float:
    """ln gamma for one branch: -(z - v')^2 / (2 sigma^2)."""
    check_positive(sigma2, "sigma2")
    d = z_k - v_k
    return -(d * d) / (2.0 * sigma2)


def max_star(a: float, b: float, exact: bool = True) -> float:
    """Jacobian logarithm ln(e^a + e^b), stable; max-log mode drops the
    correction term."""
    if a < b:
        a, b = b, a
    if not exact or b == -np.inf:
        return a
    return a + np.log1p(np.exp(b - a))


@njit(cache=True)
def _mstar(a, b, exact):
    if a < b:
        a, b = b, a
    if not exact or b == -np.inf:
        return a
    return a + np.log1p(np.exp(b - a))


# ---------------------------------------------------------------------------
# Run record and complexity accounting
# ---------------------------------------------------------------------------

@dataclass
class DetectorRun:
    """Output of one detector pass, with Table-1-style complexity counters."""

    kind: str
    memory_length: int
    surviving_states: int | None
    n_symbols: int
    branch_metric_evals: int
    branch_evals_per_step: int
    states_stored: int
    selection_ops: int = 0
    decisions: np.ndarray = field(default=None, repr=False)
    llr: np.ndarray | None = field(default=None, repr=False)

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("k,llr,decision\n")
            for k in range(self.n_symbols):
                llr = "" if self.llr is None else f"{self.llr[k]:.12g}"
                fh.write(f"{k},{llr},{int(self.decisions[k])}\n")


def complexity_report(run: DetectorRun) -> dict:
    """One comparison-table row for a completed run."""
    return {
        "kind": run.kind,
        "L": run.memory_length,
        "M": run.surviving_states,
        "branch_evals_per_step": run.branch_evals_per_step,
        "states_stored": run.states_stored,
    }


def hard_decide(llr) -> np.ndarray:
    """Sign rule on the LLR; the boundary LLR = 0 decides +1."""
    llr = np.asarray(llr, dtype=np.float64)
    return np.where(llr >= 0.0, 1, -1).astype(np.int8)


def _initial_log_alpha(n_states: int, initial_state, memory_length: int,
                       llr_max: float) -> np.ndarray:
    """Known start state gets ln alpha = 0; the rest are floored at
    -llr_max * L rather than -inf so no infinity enters the recursions."""
    if initial_state is None:
        return np.zeros(n_states)
    if not np.isscalar(initial_state):
        initial_state = state_index(initial_state)
    if not 0 <= initial_state < n_states:
        raise ValueError("initial_state out of range")
    alpha0 = np.full(n_states, -llr_max * max(memory_length, 1))
    alpha0[int(initial_state)] = 0.0
    return alpha0


# ---------------------------------------------------------------------------
# Viterbi MLSE
# ---------------------------------------------------------------------------

@njit(cache=True)
def _viterbi_kernel(z, outputs, in_state, in_bit, inv2s2, alpha0, depth):
    S = outputs.shape[0]
    N = len(z)
    alpha = alpha0.copy()
    new_alpha = np.empty(S)
    surv = np.zeros((depth, S), dtype=np.int8)
    decisions = np.empty(N, dtype=np.int8)
    for k in range(N):
        zk = z[k]
        row = k % depth
        for s in range(S):
            p0 = in_state[s, 0]
            p1 = in_state[s, 1]
            d0 = zk - outputs[p0, in_bit[s, 0]]
            d1 = zk - outputs[p1, in_bit[s, 1]]
            m0 = alpha[p0] - d0 * d0 * inv2s2
            m1 = alpha[p1] - d1 * d1 * inv2s2
            if m0 >= m1:
                new_alpha[s] = m0
                surv[row, s] = 0
            else:
                new_alpha[s] = m1
                surv[row, s] = 1
        mx = new_alpha[0]
        for s in range(1, S):
            if new_alpha[s] > mx:
                mx = new_alpha[s]
        for s in range(S):
            alpha[s] = new_alpha[s] - mx
        if k >= depth - 1 and k < N - 1:
            # commit the decision `depth` steps back from the current best state
            best = 0
            for s in range(1, S):
                if alpha[s] > alpha[best]:
                    best = s
            st = best
            for back in range(depth):
                i = surv[(k - back) % depth, st]
                if back == depth - 1:
                    decisions[k - back] = 2 * in_bit[st, i] - 1
                st = in_state[st, i]
    # final traceback from the best terminal state; mid-stream commits
    # covered indices up to N-1-depth, so the tail spans the last `depth`
    best = 0
    for s in range(1, S):
        if alpha[s] > alpha[best]:
            best = s
    st = best
    tail = depth if depth < N else N
    for back in range(tail):
        i = surv[(N - 1 - back) % depth, st]
        decisions[N - 1 - back] = 2 * in_bit[st, i] - 1
        st = in_state[st, i]
    return decisions


def viterbi_mlse(z, ch: WhitenedChannel, initial_state=None,
                 traceback_depth: int | None = None,
                 hard_cap: int = DEFAULT_HARD_CAP,
                 llr_max: float = DEFAULT_LLR_MAX) -> DetectorRun:
    """Maximum-likelihood sequence estimation by add-compare-select.

    Exhausts the 2^L-state trellis, so it carries the hard cap this whole
    library exists to escape.  With `traceback_depth=None` the survivor
    memory covers the entire block when that fits in a modest budget
    (exact traceback); longer blocks fall back to truncated traceback at
    depth max(128, 10 L), the standard engineering compromise.
    """
    z = as_1d_array(z, "z")
    if len(z) == 0:
        raise ValueError("empty input")
    check_positive(ch.sigma2, "sigma2")
    trellis = build_trellis(ch, hard_cap)
    S = trellis.n_states
    if traceback_depth is None:
        traceback_depth = len(z) if S * len(z) <= (1 << 25) \
            else max(128, 10 * ch.memory_length)
    traceback_depth = max(2, min(int(traceback_depth), len(z)))
    alpha0 = _initial_log_alpha(S, initial_state, ch.memory_length, llr_max)
    decisions = _viterbi_kernel(z, trellis.outputs, trellis.in_state,
                                trellis.in_bit, 1.0 / (2.0 * ch.sigma2),
                                alpha0, traceback_depth)
    return DetectorRun(
        kind="mlse", memory_length=ch.memory_length, surviving_states=None,
        n_symbols=len(z), branch_metric_evals=2 * S * len(z),
        branch_evals_per_step=2 * S, states_stored=S, decisions=decisions)


# ---------------------------------------------------------------------------
# Full Log-MAP (BCJR)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _logmap_kernel(z, outputs, next_state, in_state, in_bit, inv2s2,
                   alpha0, prior_half, exact):
    S = outputs.shape[0]
    N = len(z)
    alpha = np.empty((N + 1, S))
    alpha[0] = alpha0
    for k in range(1, N + 1):
        zk = z[k - 1]
        mx = -np.inf
        for s in range(S):
            acc = -np.inf
            for t in range(2):
                p = in_state[s, t]
                j = in_bit[s, t]
                d = zk - outputs[p, j]
                g = -d * d * inv2s2 + (2 * j - 1) * prior_half[k - 1]
                acc = _mstar(acc, alpha[k - 1, p] + g, exact)
            alpha[k, s] = acc
            if acc > mx:
                mx = acc
        for s in range(S):
            alpha[k, s] -= mx
    beta = np.empty((N + 1, S))
    beta[N] = 0.0
    for k in range(N, 0, -1):
        zk = z[k - 1]
        mx = -np.inf
        for sp in range(S):
            acc = -np.inf
            for j in range(2):
                d = zk - outputs[sp, j]
                g = -d * d * inv2s2 + (2 * j - 1) * prior_half[k - 1]
                acc = _mstar(acc, g + beta[k, next_state[sp, j]], exact)
            beta[k - 1, sp] = acc
            if acc > mx:
                mx = acc
        for sp in range(S):
            beta[k - 1, sp] -= mx
    llr = np.empty(N)
    for k in range(N):
        zk = z[k]
        num = -np.inf
        den = -np.inf
        # opposite iteration orders make the combine exactly antisymmetric
        # under the alphabet flip (state complement reverses the state scan)
        for sp in range(S - 1, -1, -1):
            d = zk - outputs[sp, 1]
            g = -d * d * inv2s2 + prior_half[k]
            num = _mstar(num, alpha[k, sp] + g + beta[k + 1, next_state[sp, 1]],
                         exact)
        for sp in range(S):
            d = zk - outputs[sp, 0]
            g = -d * d * inv2s2 - prior_half[k]
            den = _mstar(den, alpha[k, sp] + g + beta[k + 1, next_state[sp, 0]],
                         exact)
        llr[k] = num - den
    return llr


def logmap_full(z, ch: WhitenedChannel, prior=None, initial_state=None,
                exact_jacobian: bool = True, hard_cap: int = DEFAULT_HARD_CAP,
                llr_max: float = DEFAULT_LLR_MAX) -> DetectorRun:
    """Symbol-wise MAP detection over the full trellis.

    Forward and backward log recursions with per-step max-normalization;
    the per-symbol LLR combines ln alpha + ln gamma + ln beta over all
    branches carrying c_k = +1 against those carrying c_k = -1.  `prior`
    is an optional per-symbol prior LLR folded into the branch metric.
    Memory grows as N * 2^L; oversize requests are rejected up front.
    """
    z = as_1d_array(z, "z")
    if len(z) == 0:
        raise ValueError("empty input")
    check_positive(ch.sigma2, "sigma2")
    trellis = build_trellis(ch, hard_cap)
    S = trellis.n_states
    if (len(z) + 1) * S > _LOGMAP_CELL_LIMIT:
        raise StateSpaceError(
            f"state space too large: full Log-MAP needs {(len(z) + 1) * S:d} "
            f"alpha cells; use the fixed-state detector")
    if prior is None:
        prior_half = np.zeros(len(z))
    else:
        prior_half = as_1d_array(prior, "prior") / 2.0
        if len(prior_half) != len(z):
            raise ValueError("prior must have one LLR per symbol")
    alpha0 = _initial_log_alpha(S, initial_state, ch.memory_length, llr_max)
    llr = _logmap_kernel(z, trellis.outputs, trellis.next_state,
                         trellis.in_state, trellis.in_bit,
                         1.0 / (2.0 * ch.sigma2), alpha0, prior_half,
                         exact_jacobian)
    return DetectorRun(
        kind="logmap", memory_length=ch.memory_length, surviving_states=None,
        n_symbols=len(z), branch_metric_evals=2 * S * len(z),
        branch_evals_per_step=2 * S, states_stored=S,
        decisions=hard_decide(llr), llr=llr)


# ---------------------------------------------------------------------------
# Fixed-state Log-MAP (M-algorithm pruned BCJR)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _fixed_state_kernel(z, h, inv2s2, M, init_states, exact, llr_max):
    L = len(h) - 1
    N = len(z)
    mask = (np.int64(1) << L) - np.int64(1) if L > 0 else np.int64(0)
    cap = 2 * M

    surv_state = np.full((N + 1, M), np.int64(-1))
    surv_alpha = np.zeros((N + 1, M))
    surv_count = np.zeros(N + 1, dtype=np.int64)
    br_from = np.empty((N, cap), dtype=np.int32)
    br_to = np.empty((N, cap), dtype=np.int32)
    br_gamma = np.empty((N, cap))
    br_bit = np.empty((N, cap), dtype=np.int8)
    br_count = np.zeros(N, dtype=np.int64)

    n0 = len(init_states)
    surv_count[0] = n0
    for i in range(n0):
        surv_state[0, i] = init_states[i]

    cand_state = np.empty(cap, dtype=np.int64)
    cand_metric = np.empty(cap)
    cand_from = np.empty(cap, dtype=np.int32)
    cand_bit = np.empty(cap, dtype=np.int8)
    cand_gamma = np.empty(cap)
    merged_state = np.empty(cap, dtype=np.int64)
    merged_metric = np.empty(cap)
    taken = np.empty(cap, dtype=np.bool_)

    branch_evals = np.int64(0)
    selection_ops = np.int64(0)
    max_evals_per_step = np.int64(0)
    max_states = np.int64(n0)

    for k in range(1, N + 1):
        m_prev = surv_count[k - 1]
        zk = z[k - 1]
        nc = 0
        for i in range(m_prev):
            sp = surv_state[k - 1, i]
            tail = 0.0
            for m in range(1, L + 1):
                tail += h[m] * (2.0 * np.float64((sp >> (m - 1)) & 1) - 1.0)
            for j in range(2):
                v = h[0] * (2.0 * j - 1.0) + tail
                d = zk - v
                g = -d * d * inv2s2
                branch_evals += 1
                if L > 0:
                    ns = ((sp << 1) | j) & mask
                else:
                    ns = np.int64(0)
                cand_state[nc] = ns
                cand_metric[nc] = surv_alpha[k - 1, i] + g
                cand_from[nc] = i
                cand_bit[nc] = j
                cand_gamma[nc] = g
                nc += 1
        if 2 * m_prev > max_evals_per_step:
            max_evals_per_step = 2 * m_prev

        # merge candidates that landed on the same state (Jacobian sum)
        order = np.argsort(cand_state[:nc], kind="mergesort")
        n_merged = 0
        for t in range(nc):
            ci = order[t]
            st = cand_state[ci]
            if n_merged > 0 and merged_state[n_merged - 1] == st:
                merged_metric[n_merged - 1] = _mstar(
                    merged_metric[n_merged - 1], cand_metric[ci], exact)
            else:
                merged_state[n_merged] = st
                merged_metric[n_merged] = cand_metric[ci]
                n_merged += 1

        # keep the M best; scan order is state-ascending, so a strict
        # comparison breaks metric ties toward the smallest state index
        m_new = M if n_merged > M else n_merged
        for t in range(n_merged):
            taken[t] = False
        for slot in range(m_new):
            best = -1
            best_metric = -np.inf
            for t in range(n_merged):
                selection_ops += 1
                if not taken[t] and merged_metric[t] > best_metric:
                    best = t
                    best_metric = merged_metric[t]
            taken[best] = True
            surv_state[k, slot] = merged_state[best]
            surv_alpha[k, slot] = best_metric
        surv_count[k] = m_new
        if m_new > max_states:
            max_states = m_new

        # normalize so the best survivor sits at 0
        mx = surv_alpha[k, 0]
        for slot in range(1, m_new):
            if surv_alpha[k, slot] > mx:
                mx = surv_alpha[k, slot]
        for slot in range(m_new):
            surv_alpha[k, slot] -= mx

        # record the branches whose successor survived
        nb = 0
        for t in range(nc):
            st = cand_state[t]
            for slot in range(m_new):
                if surv_state[k, slot] == st:
                    br_from[k - 1, nb] = cand_from[t]
                    br_to[k - 1, nb] = slot
                    br_gamma[k - 1, nb] = cand_gamma[t]
                    br_bit[k - 1, nb] = cand_bit[t]
                    nb += 1
                    break
        br_count[k - 1] = nb

    # backward pass over retained branches only, LLR combine on the way
    llr = np.empty(N)
    beta_cur = np.zeros(M)
    beta_prev = np.empty(M)
    for k in range(N, 0, -1):
        nb = br_count[k - 1]
        num = -np.inf
        den = -np.inf
        for t in range(nb):
            val = surv_alpha[k - 1, br_from[k - 1, t]] + br_gamma[k - 1, t] \
                + beta_cur[br_to[k - 1, t]]
            if br_bit[k - 1, t] == 1:
                num = _mstar(num, val, exact)
            else:
                den = _mstar(den, val, exact)
        if num == -np.inf:
            llr[k - 1] = -llr_max
        elif den == -np.inf:
            llr[k - 1] = llr_max
        else:
            llr[k - 1] = num - den

        m_prev = surv_count[k - 1]
        for i in range(m_prev):
            beta_prev[i] = -np.inf
        for t in range(nb):
            i = br_from[k - 1, t]
            beta_prev[i] = _mstar(
                beta_prev[i], br_gamma[k - 1, t] + beta_cur[br_to[k - 1, t]],
                exact)
        # a survivor whose successors were all pruned terminates here with
        # ln beta = 0 on the normalized scale (an uninformative future, not
        # a dominating one)
        mx = -np.inf
        for i in range(m_prev):
            if beta_prev[i] > mx:
                mx = beta_prev[i]
        if mx == -np.inf:
            mx = 0.0
        for i in range(m_prev):
            if beta_prev[i] == -np.inf:
                beta_cur[i] = 0.0
            else:
                beta_cur[i] = beta_prev[i] - mx

    return llr, branch_evals, max_evals_per_step, max_states, selection_ops


def fixed_state_logmap(z, ch: WhitenedChannel, surviving_states: int,
                       initial_state=None, exact_jacobian: bool = True,
                       llr_max: float = DEFAULT_LLR_MAX) -> DetectorRun:
    """Log-MAP detection keeping only the M most probable states per step.

    The forward recursion extends just the 2M branches leaving the current
    survivors, merges branches that meet in a state, and retains the M
    best successors (metric ties resolve toward the smallest state index).
    The backward recursion and the LLR combine run over the retained
    branches only.  If every branch carrying one symbol hypothesis was
    pruned at some step, that symbol's LLR saturates at +/-llr_max instead
    of +/-inf.  Compute is O(2M) per step and live-state storage O(M),
    independent of L, so there is no memory-length cap here.
    """
    z = as_1d_array(z, "z")
    if len(z) == 0:
        raise ValueError("empty input")
    M = int(surviving_states)
    if M < 1:
        raise ValueError("surviving_states must be >= 1")
    check_positive(ch.sigma2, "sigma2")
    L = ch.memory_length
    if L > 62:
        raise ValueError("state packing supports memory lengths up to 62")
    n_states = 1 << L
    if initial_state is None:
        init = np.arange(min(M, n_states), dtype=np.int64)
    else:
        if not np.isscalar(initial_state):
            initial_state = state_index(initial_state)
        if not 0 <= int(initial_state) < n_states:
            raise ValueError("initial_state out of range")
        init = np.asarray([int(initial_state)], dtype=np.int64)
    llr, evals, evals_step, states, sel = _fixed_state_kernel(
        z, ch.h, 1.0 / (2.0 * ch.sigma2), M, init, exact_jacobian,
        float(llr_max))
    return DetectorRun(
        kind="fixed-logmap", memory_length=L, surviving_states=M,
        n_symbols=len(z), branch_metric_evals=int(evals),
        branch_evals_per_step=int(evals_step), states_stored=int(states),
        selection_ops=int(sel), decisions=hard_decide(llr), llr=llr)


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BruteForceResult:
    """Exhaustive-enumeration ML sequence and exact posterior marginals."""

    ml_sequence: np.ndarray
    llr: np.ndarray
    posterior_pos: np.ndarray  # P(c_k = +1 | z)


def brute_force_oracles(z, ch: WhitenedChannel, prehistory=None,
                        max_bits: int = 16) -> BruteForceResult:
    """Enumerate every candidate sequence under the Gaussian branch model.

    With `prehistory` (the L symbols before the block) the enumeration
    conditions on the known start; without it the prehistory is
    marginalized uniformly, which costs an extra 2^L in the enumeration.
    Strictly independent of the trellis detectors: plain convolution plus
    scipy's logsumexp.
    """
    z = as_1d_array(z, "z")
    N = len(z)
    L = ch.memory_length
    free = N if prehistory is not None else N + L
    if N < 1:
        raise ValueError("empty input")
    if free > max_bits:
        raise ValueError(f"{free} free symbols exceeds brute-force limit {max_bits}")
    check_positive(ch.sigma2, "sigma2")
    n_seq = 1 << free
    grid = np.arange(n_seq)[:, None] >> np.arange(free - 1, -1, -1)[None, :]
    seqs = (2 * (grid & 1) - 1).astype(np.float64)  # (n_seq, free)
    if prehistory is not None:
        pre = check_pam2(prehistory, "prehistory").astype(np.float64)
        if len(pre) != L:
            raise ValueError(f"prehistory must supply exactly L={L} symbols")
        full = np.concatenate(
            [np.broadcast_to(pre, (n_seq, L)), seqs], axis=1)
    else:
        full = seqs
    data = full[:, -N:]
    v = np.zeros((n_seq, N))
    for i in range(L + 1):
        lo = L - i
        v += ch.h[i] * full[:, lo:lo + N]
    loglik = -np.sum((z[None, :] - v) ** 2, axis=1) / (2.0 * ch.sigma2)
    ml = data[int(np.argmax(loglik))].astype(np.int8)
    llr = np.empty(N)
    for k in range(N):
        pos = data[:, k] > 0
        llr[k] = logsumexp(loglik[pos]) - logsumexp(loglik[~pos])
    with np.errstate(over="ignore"):
        posterior = np.where(llr >= 0, 1.0 / (1.0 + np.exp(-llr)),
                             np.exp(llr) / (1.0 + np.exp(llr)))
    return BruteForceResult(ml, llr, posterior)


# ---------------------------------------------------------------------------
# Estimator wrappers: fit the whitener on the preamble, detect the payload
# ---------------------------------------------------------------------------

class _TrellisDetector(BaseEstimator):
    """Shared fit/predict plumbing for the trellis detectors.

    fit(X, y) takes the equalized 1-sps samples X (frame-aligned: X[k]
    corresponds to symbol k, training first) and the known training
    symbols y; it fits the order-L noise whitener on the residual.
    predict(X) post-filters the frame, detects from the end of the region
    it can seed with known symbols, and returns a full-length decision
    array whose first `start` entries are the known preamble symbols.
    """

    def _fit_whitener(self, X, y, order: int):
        y = check_pam2(y, "y")
        whitener = NoiseWhitener(order=order).fit(X, y.astype(np.float64))
        self.channel_ = whitener.channel_
        self.training_symbols_ = y
        return self

    def _segment(self, X, start):
        if not hasattr(self, "channel_"):
            raise NotFittedError("detector must be fitted before predict")
        x = as_1d_array(X, "X")
        L = self.channel_.memory_length
        n_train = len(self.training_symbols_)
        if start is None:
            start = min(n_train, len(x) - 1)
        if not L <= start <= n_train:
            raise ValueError(f"start must lie in [{L}, {n_train}]")
        v = postfilter_apply(x, self.channel_)
        prehistory = self.training_symbols_[start - L:start] if L else None
        return v[start:], prehistory, start

    def _assemble(self, run: DetectorRun, start: int) -> np.ndarray:
        head = self.training_symbols_[:start].astype(np.int8)
        return np.concatenate([head, run.decisions])

    def predict(self, X, start=None) -> np.ndarray:
        run, start = self.detect_run(X, start)
        return self._assemble(run, start)


class ViterbiDetector(_TrellisDetector):
    """MLSE baseline as an estimator; carries the full-state hard cap."""

    def __init__(self, memory_length: int = 15,
                 traceback_depth: int | None = None,
                 hard_cap: int = DEFAULT_HARD_CAP):
        self.memory_length = memory_length
        self.traceback_depth = traceback_depth
        self.hard_cap = hard_cap

    def fit(self, X, y):
        return self._fit_whitener(X, y, self.memory_length)

    def detect_run(self, X, start=None):
        v, pre, start = self._segment(X, start)
        run = viterbi_mlse(v, self.channel_, initial_state=pre,
                           traceback_depth=self.traceback_depth,
                           hard_cap=self.hard_cap)
        return run, start


class LogMapDetector(_TrellisDetector):
    """Full Log-MAP as an estimator; decision_function returns LLRs."""

    def __init__(self, memory_length: int = 10, exact_jacobian: bool = True,
                 hard_cap: int = DEFAULT_HARD_CAP,
                 llr_max: float = DEFAULT_LLR_MAX):
        self.memory_length = memory_length
        self.exact_jacobian = exact_jacobian
        self.hard_cap = hard_cap
        self.llr_max = llr_max

    def fit(self, X, y):
        return self._fit_whitener(X, y, self.memory_length)

    def detect_run(self, X, start=None):
        v, pre, start = self._segment(X, start)
        run = logmap_full(v, self.channel_, initial_state=pre,
                          exact_jacobian=self.exact_jacobian,
                          hard_cap=self.hard_cap, llr_max=self.llr_max)
        return run, start

    def decision_function(self, X, start=None) -> np.ndarray:
        run, start = self.detect_run(X, start)
        head = self.training_symbols_[:start].astype(np.float64) * self.llr_max
        return np.concatenate([head, run.llr])


class FixedStateLogMapDetector(_TrellisDetector):
    """Fixed-state Log-MAP estimator: memory length without the state blowup."""

    def __init__(self, memory_length: int = 31, surviving_states: int = 16,
                 exact_jacobian: bool = True, llr_max: float = DEFAULT_LLR_MAX):
        self.memory_length = memory_length
        self.surviving_states = surviving_states
        self.exact_jacobian = exact_jacobian
        self.llr_max = llr_max

    def fit(self, X, y):
        return self._fit_whitener(X, y, self.memory_length)

    def detect_run(self, X, start=None):
        v, pre, start = self._segment(X, start)
        run = fixed_state_logmap(v, self.channel_,
                                 surviving_states=self.surviving_states,
                                 initial_state=pre,
                                 exact_jacobian=self.exact_jacobian,
                                 llr_max=self.llr_max)
        return run, start

    def decision_function(self, X, start=None) -> np.ndarray:
        run, start = self.detect_run(X, start)
        head = self.training_symbols_[:start].astype(np.float64) * self.llr_max
        return np.concatenate([head, run.llr])
