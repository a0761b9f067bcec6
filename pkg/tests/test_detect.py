"""Tests for the trellis detectors against exhaustive oracles."""

import itertools

import numpy as np
import pytest
from scipy.special import logsumexp

from fadefree import (StateSpaceError, WhitenedChannel, branch_metric,
                      brute_force_oracles, build_trellis, complexity_report,
                      fixed_state_logmap, hard_decide, logmap_full, max_star,
                      pam2_map, state_index, viterbi_mlse)


def random_instance(n, h, sigma2, seed):
    """Symbols, known prehistory, and a noisy whitened-channel observation."""
    rng = np.random.default_rng(seed)
    L = len(h) - 1
    u = pam2_map(rng.integers(0, 2, n + L))
    pre, data = u[:L], u[L:]
    v = np.convolve(u.astype(float), np.asarray(h))[L:L + n]
    z = v + rng.normal(0.0, np.sqrt(sigma2), n)
    return pre, data, z


def oracle_by_itertools(z, h, sigma2, pre):
    """Second, independent enumeration order for cross-checking the oracle."""
    h = np.asarray(h)
    L = len(h) - 1
    n = len(z)
    best, best_ll = None, -np.inf
    ll_pos = [[] for _ in range(n)]
    ll_neg = [[] for _ in range(n)]
    for cand in itertools.product((-1, 1), repeat=n):
        full = np.concatenate([pre, cand]).astype(float)
        v = np.convolve(full, h)[L:L + n]
        ll = float(-np.sum((z - v) ** 2) / (2 * sigma2))
        if ll > best_ll:
            best, best_ll = cand, ll
        for k in range(n):
            (ll_pos if cand[k] > 0 else ll_neg)[k].append(ll)
    llr = np.array([logsumexp(ll_pos[k]) - logsumexp(ll_neg[k])
                    for k in range(n)])
    return np.asarray(best, dtype=np.int8), llr


class TestMaxStar:
    def test_equal_arguments(self):
        assert max_star(0.0, 0.0) == pytest.approx(np.log(2.0), abs=1e-15)

    def test_absorbing_minus_inf(self):
        assert max_star(3.5, -np.inf) == 3.5
        assert max_star(-np.inf, -2.0) == -2.0
        assert max_star(-np.inf, -np.inf) == -np.inf

    def test_against_extended_precision(self):
        import mpmath
        mpmath.mp.dps = 60
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b = rng.uniform(-50, 50, 2)
            exact = float(mpmath.log(mpmath.e ** mpmath.mpf(a)
                                     + mpmath.e ** mpmath.mpf(b)))
            assert abs(max_star(a, b) - exact) < 1e-12

    def test_max_log_mode(self):
        assert max_star(1.0, 0.5, exact=False) == 1.0


class TestBranchMetric:
    def test_exact_match_is_zero(self):
        assert branch_metric(0.7, 0.7, 1.3) == 0.0

    def test_arithmetic(self):
        assert branch_metric(3.0, 1.0, 1.0) == -2.0

    def test_shift_invariance(self):
        # exactly representable shifts keep the test itself rounding-free
        for c in (0.25, -8.0, 128.0):
            assert branch_metric(1.0 + c, 0.25 + c, 0.5) == \
                branch_metric(1.0, 0.25, 0.5)

    def test_rejects_bad_sigma2(self):
        with pytest.raises(ValueError):
            branch_metric(1.0, 0.0, 0.0)


class TestTrellis:
    def test_memoryless(self):
        tr = build_trellis(WhitenedChannel(np.array([1.0]), 1.0))
        assert tr.n_states == 1
        assert sorted(tr.outputs[0].tolist()) == [-1.0, 1.0]

    def test_single_tap_memory(self):
        tr = build_trellis(WhitenedChannel(np.array([1.0, 0.5]), 1.0))
        assert sorted(tr.outputs.ravel().tolist()) == [-1.5, -0.5, 0.5, 1.5]

    def test_figure_state_enumeration(self):
        # L=2 states: s0=(-1,-1), s1=(-1,+1), s2=(+1,-1), s3=(+1,+1)
        tr = build_trellis(WhitenedChannel(np.array([1.0, 0.5, 0.25]), 1.0))
        assert tr.state_symbols(0) == (-1, -1)
        assert tr.state_symbols(1) == (-1, 1)
        assert tr.state_symbols(2) == (1, -1)
        assert tr.state_symbols(3) == (1, 1)
        next_state, output = tr.branch(3, -1)
        assert output == pytest.approx(-1.0 + 0.5 + 0.25)
        assert next_state == 2

    def test_two_in_two_out(self):
        tr = build_trellis(WhitenedChannel(np.array([1.0, -0.3, 0.2]), 1.0))
        for s in range(tr.n_states):
            assert len(set(tr.next_state[s])) == 2
        incoming = np.zeros(tr.n_states, dtype=int)
        for s in range(tr.n_states):
            for j in range(2):
                incoming[tr.next_state[s, j]] += 1
        assert np.all(incoming == 2)

    def test_outputs_negate_under_alphabet_flip(self):
        tr = build_trellis(WhitenedChannel(np.array([1.0, 0.5, 0.25]), 1.0))
        mask = tr.n_states - 1
        for s in range(tr.n_states):
            for j in range(2):
                assert tr.outputs[s, j] == pytest.approx(
                    -tr.outputs[~s & mask, 1 - j])

    def test_state_index_round_trip(self):
        tr = build_trellis(WhitenedChannel(np.array([1.0, 0.1, 0.1, 0.1]), 1.0))
        for s in range(tr.n_states):
            assert state_index(tr.state_symbols(s)) == s

    def test_hard_cap(self):
        ch = WhitenedChannel(np.ones(23), 1.0)
        with pytest.raises(StateSpaceError, match="state space too large"):
            build_trellis(ch)
        with pytest.raises(StateSpaceError):
            viterbi_mlse(np.zeros(10), ch)


class TestHardDecide:
    def test_sign_rule_with_boundary(self):
        assert hard_decide([0.3, -0.1, 0.0]).tolist() == [1, -1, 1]

    def test_all_positive(self):
        assert np.all(hard_decide(np.full(64, 17.0)) == 1)

    def test_antisymmetry_except_zero(self):
        rng = np.random.default_rng(0)
        llr = rng.standard_normal(100)
        assert np.array_equal(hard_decide(-llr), -hard_decide(llr))


class TestBruteForceOracle:
    def test_cross_checked_by_independent_enumeration(self):
        h = [1.0, 0.5, 0.25]
        for seed in range(8):
            pre, data, z = random_instance(6, h, 0.4, seed)
            res = brute_force_oracles(z, WhitenedChannel(np.array(h), 0.4),
                                      prehistory=pre)
            ml2, llr2 = oracle_by_itertools(z, h, 0.4, pre)
            assert np.array_equal(res.ml_sequence, ml2)
            assert np.max(np.abs(res.llr - llr2)) < 1e-9

    def test_posterior_normalization(self):
        pre, data, z = random_instance(8, [1.0, 0.4], 0.3, 99)
        res = brute_force_oracles(z, WhitenedChannel(np.array([1.0, 0.4]), 0.3),
                                  prehistory=pre)
        p_neg = 1.0 - res.posterior_pos
        assert np.allclose(res.posterior_pos + p_neg, 1.0, atol=1e-12)

    def test_zero_noise_concentrates(self):
        pre, data, z = random_instance(8, [1.0, 0.5], 1.0, 5)
        h = np.array([1.0, 0.5])
        v = np.convolve(np.concatenate([pre, data]).astype(float), h)[1:9]
        res = brute_force_oracles(v, WhitenedChannel(h, 1e-6), prehistory=pre)
        assert np.array_equal(res.ml_sequence, data)
        assert np.all(res.posterior_pos[data > 0] > 1.0 - 1e-9)
        assert np.all(res.posterior_pos[data < 0] < 1e-9)

    def test_size_guard(self):
        with pytest.raises(ValueError, match="brute-force"):
            brute_force_oracles(np.zeros(20), WhitenedChannel(np.array([1.0]), 1.0))


class TestViterbi:
    def test_noiseless_exact_recovery(self):
        for h in ([1.0], [1.0, 0.5], [1.0, 0.5, 0.25, 0.125]):
            pre, data, _ = random_instance(200, h, 1.0, 1)
            L = len(h) - 1
            full = np.concatenate([pre, data]).astype(float)
            z = np.convolve(full, np.asarray(h))[L:L + 200]
            run = viterbi_mlse(z, WhitenedChannel(np.asarray(h), 0.1),
                               initial_state=pre if L else None)
            assert np.array_equal(run.decisions, data)

    def test_matches_brute_force_ml(self):
        h = [1.0, 0.6, -0.3]
        ch = WhitenedChannel(np.asarray(h), 0.5)
        for seed in range(30):
            pre, data, z = random_instance(10, h, 0.5, seed)
            run = viterbi_mlse(z, ch, initial_state=pre)
            oracle = brute_force_oracles(z, ch, prehistory=pre)
            assert np.array_equal(run.decisions, oracle.ml_sequence)

    def test_paper_counter_values_at_l15(self):
        ch = WhitenedChannel(np.concatenate([[1.0], np.full(15, 0.01)]), 1.0)
        run = viterbi_mlse(np.zeros(4), ch)
        assert run.branch_evals_per_step == 65536
        assert run.states_stored == 32768

    def test_truncated_traceback_matches_full(self):
        h = np.array([1.0, 0.5, 0.25])
        pre, data, z = random_instance(3000, h, 0.05, 3)
        ch = WhitenedChannel(h, 0.05)
        full = viterbi_mlse(z, ch, initial_state=pre, traceback_depth=3000)
        trunc = viterbi_mlse(z, ch, initial_state=pre, traceback_depth=64)
        assert np.array_equal(full.decisions, trunc.decisions)


class TestLogMapFull:
    def test_matches_brute_force_posteriors(self):
        h = [1.0, 0.5, 0.25]
        ch = WhitenedChannel(np.asarray(h), 0.4)
        for seed in range(30):
            pre, data, z = random_instance(8, h, 0.4, seed)
            run = logmap_full(z, ch, initial_state=pre)
            oracle = brute_force_oracles(z, ch, prehistory=pre)
            assert np.max(np.abs(run.llr - oracle.llr)) < 1e-9

    def test_isi_free_closed_form(self):
        rng = np.random.default_rng(2)
        z = rng.standard_normal(50)
        sigma2 = 0.37
        run = logmap_full(z, WhitenedChannel(np.array([1.0]), sigma2))
        assert np.max(np.abs(run.llr - 2.0 * z / sigma2)) < 1e-12

    def test_prior_enters_additively_when_isi_free(self):
        rng = np.random.default_rng(3)
        z = rng.standard_normal(40)
        prior = rng.standard_normal(40)
        run = logmap_full(z, WhitenedChannel(np.array([1.0]), 0.5), prior=prior)
        assert np.max(np.abs(run.llr - (2.0 * z / 0.5 + prior))) < 1e-12

    def test_flipping_observation_flips_llr_exactly(self):
        h = np.array([1.0, 0.5, 0.25])
        pre, data, z = random_instance(64, h, 0.3, 7)
        ch = WhitenedChannel(h, 0.3)
        a = logmap_full(z, ch)
        b = logmap_full(-z, ch)
        assert np.array_equal(a.llr, -b.llr)
        a = logmap_full(z, ch, initial_state=pre)
        b = logmap_full(-z, ch, initial_state=-pre)
        assert np.array_equal(a.llr, -b.llr)

    def test_no_nan_inf_even_at_tiny_noise(self):
        h = np.array([1.0, 0.5])
        pre, data, z = random_instance(100, h, 1e-6, 11)
        run = logmap_full(z, WhitenedChannel(h, 1e-6), initial_state=pre)
        assert np.all(np.isfinite(run.llr))

    def test_memory_guard(self):
        ch = WhitenedChannel(np.concatenate([[1.0], np.zeros(18) + 0.01]), 1.0)
        with pytest.raises(StateSpaceError):
            logmap_full(np.zeros(200000), ch)


class TestFixedState:
    def test_degenerate_pruning_equals_full(self):
        for L, sigma2 in ((1, 0.3), (2, 0.4), (3, 0.5)):
            h = np.array([1.0] + [0.5 ** i for i in range(1, L + 1)])
            ch = WhitenedChannel(h, sigma2)
            for seed in range(10):
                pre, data, z = random_instance(24, h.tolist(), sigma2, seed)
                full = logmap_full(z, ch)
                fixed = fixed_state_logmap(z, ch, surviving_states=2 ** L)
                assert np.max(np.abs(full.llr - fixed.llr)) < 1e-12

    def test_counters_within_table_bounds(self):
        h = np.array([1.0, 0.5, 0.25, 0.125, 0.06, 0.03])
        ch = WhitenedChannel(h, 0.2)
        pre, data, z = random_instance(500, h.tolist(), 0.2, 0)
        for M in (1, 2, 4, 16):
            run = fixed_state_logmap(z, ch, surviving_states=M,
                                     initial_state=pre)
            assert run.branch_evals_per_step <= 2 * M
            assert run.states_stored <= M
            assert run.branch_metric_evals <= 2 * M * len(z)

    def test_counters_independent_of_memory_length(self):
        # the whole point: with M fixed, complexity does not grow with L
        per_step = set()
        states = set()
        for L in (15, 31, 47):
            h = np.concatenate([[1.0], 0.3 ** np.arange(1, L + 1)])
            ch = WhitenedChannel(h, 0.2)
            pre, data, z = random_instance(200, h.tolist(), 0.2, L)
            run = fixed_state_logmap(z, ch, surviving_states=16,
                                     initial_state=pre)
            per_step.add(run.branch_evals_per_step)
            states.add(run.states_stored)
        assert per_step == {32}
        assert states == {16}

    def test_monotone_ber_in_m(self):
        # paired noisy instances: more survivors never hurt (McNemar-style
        # one-sided check at 95%)
        from scipy.stats import binomtest
        h = np.array([1.0, 0.55, -0.35, 0.28, -0.2, 0.14, -0.1])
        ch = WhitenedChannel(h, 0.16)
        pre, data, z = random_instance(30000, h.tolist(), 0.16, 7)
        errors = {}
        wrong = {}
        for M in (1, 2, 4, 8, 16, 32):
            run = fixed_state_logmap(z, ch, surviving_states=M,
                                     initial_state=pre)
            wrong[M] = run.decisions != data
            errors[M] = int(wrong[M].sum())
        ms = sorted(errors)
        for m_small, m_big in zip(ms, ms[1:]):
            n01 = int((wrong[m_small] & ~wrong[m_big]).sum())  # fixed by big M
            n10 = int((~wrong[m_small] & wrong[m_big]).sum())  # broken by big M
            if n01 + n10 == 0:
                continue
            p = binomtest(n10, n10 + n01, 0.5, alternative="greater").pvalue
            assert p >= 0.05, (
                f"BER increased from M={m_small} to M={m_big}: "
                f"n01={n01} n10={n10}")

    def test_llr_saturates_when_hypothesis_pruned(self):
        # with one survivor every LLR is a saturated hard decision
        h = np.array([1.0, 0.5, 0.25])
        pre, data, z = random_instance(100, h.tolist(), 0.2, 13)
        run = fixed_state_logmap(z, WhitenedChannel(h, 0.2),
                                 surviving_states=1, initial_state=pre,
                                 llr_max=50.0)
        assert np.all(np.abs(run.llr) == 50.0)

    def test_flipping_observation_and_prehistory_flips_llr(self):
        h = np.array([1.0, 0.4, -0.2])
        pre, data, z = random_instance(128, h.tolist(), 0.3, 17)
        ch = WhitenedChannel(h, 0.3)
        a = fixed_state_logmap(z, ch, surviving_states=4, initial_state=pre)
        b = fixed_state_logmap(-z, ch, surviving_states=4, initial_state=-pre)
        assert np.array_equal(a.llr, -b.llr)

    def test_no_memory_cap(self):
        # L = 47 is far beyond the full-state cap but runs fine here
        L = 47
        h = np.concatenate([[1.0], 0.5 ** np.arange(1, L + 1)])
        pre, data, z = random_instance(300, h.tolist(), 0.1, 23)
        run = fixed_state_logmap(z, WhitenedChannel(h, 0.1),
                                 surviving_states=8, initial_state=pre)
        assert run.memory_length == 47
        assert np.all(np.isfinite(run.llr))

    def test_rejects_bad_m(self):
        with pytest.raises(ValueError):
            fixed_state_logmap(np.zeros(4), WhitenedChannel(np.array([1.0]), 1.0),
                               surviving_states=0)


class TestWhitenedChannelFixture:
    def test_detector_consumes_channel_csv(self, tmp_path):
        # the whiten module's CSV format feeds a detector run directly
        h = np.array([1.0, 0.5, 0.25])
        WhitenedChannel(h, 0.3).save_csv(tmp_path / "ch.csv")
        ch = WhitenedChannel.load_csv(tmp_path / "ch.csv")
        pre, data, z = random_instance(400, h.tolist(), 0.3, 41)
        run = viterbi_mlse(z, ch, initial_state=pre)
        assert np.mean(run.decisions != data) < 0.05
        fixed = fixed_state_logmap(z, ch, surviving_states=4,
                                   initial_state=pre)
        assert np.mean(fixed.decisions != data) < 0.05


class TestMaxLogConsistency:
    def test_hard_decisions_track_viterbi_at_high_snr(self):
        h = np.array([1.0, 0.5, 0.25])
        sigma2 = float(np.sum(h * h) / 10 ** 1.2)  # 12 dB
        pre, data, z = random_instance(5000, h.tolist(), sigma2, 29)
        ch = WhitenedChannel(h, sigma2)
        vit = viterbi_mlse(z, ch, initial_state=pre)
        ml = logmap_full(z, ch, initial_state=pre, exact_jacobian=False)
        assert np.mean(vit.decisions == ml.decisions) >= 0.99


class TestComplexityReport:
    def test_mlse_l2(self):
        ch = WhitenedChannel(np.array([1.0, 0.5, 0.25]), 1.0)
        run = viterbi_mlse(np.zeros(8), ch)
        row = complexity_report(run)
        assert row == {"kind": "mlse", "L": 2, "M": None,
                       "branch_evals_per_step": 8, "states_stored": 4}

    def test_fixed_state_any_l(self):
        h = np.concatenate([[1.0], np.full(31, 0.01)])
        run = fixed_state_logmap(np.zeros(16), WhitenedChannel(h, 1.0),
                                 surviving_states=16)
        row = complexity_report(run)
        assert row["branch_evals_per_step"] <= 32
        assert row["states_stored"] <= 16

    def test_paper_ratio_mlse15_vs_fixed16(self):
        mlse_evals = 2 ** 16
        fixed_evals = 32
        assert mlse_evals // fixed_evals == 2048

    def test_run_csv(self, tmp_path):
        ch = WhitenedChannel(np.array([1.0, 0.5]), 0.5)
        pre, data, z = random_instance(6, [1.0, 0.5], 0.5, 31)
        run = logmap_full(z, ch, initial_state=pre)
        run.save_csv(tmp_path / "run.csv")
        lines = (tmp_path / "run.csv").read_text().splitlines()
        assert lines[0] == "k,llr,decision"
        assert len(lines) == 7
