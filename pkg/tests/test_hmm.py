import json

import numpy as np
import pytest

import oracles
from hmm_ensemble import (
    DataError,
    HmmParams,
    ParameterError,
    TrainConfig,
    Vocabulary,
    baum_welch,
    init_random,
    log_likelihood,
    sample,
    viterbi,
)
from hmm_ensemble.hmm import logsumexp


TWO_STATE = HmmParams(
    pi=[0.6, 0.4], A=[[0.7, 0.3], [0.4, 0.6]], B=[[0.9, 0.1], [0.2, 0.8]]
)


class TestVocabulary:
    def test_roundtrip(self):
        vocab = Vocabulary.from_texts(["ACGT", "NNNN"])
        assert vocab.tokens == ("A", "C", "G", "T", "N")
        assert vocab.size == 5
        assert vocab.decode(vocab.encode("GATTAN")) == "GATTAN"

    def test_first_seen_order(self):
        assert Vocabulary.from_texts(["BA", "AC"]).tokens == ("B", "A", "C")

    def test_unknown_token(self):
        vocab = Vocabulary.from_texts(["AB"])
        with pytest.raises(DataError):
            vocab.encode("AXB")

    def test_too_small(self):
        with pytest.raises(ParameterError):
            Vocabulary(["A"])


class TestHmmParams:
    def test_invalid_rows_rejected(self):
        with pytest.raises(ParameterError):
            HmmParams(pi=[0.5, 0.4], A=np.eye(2), B=np.full((2, 2), 0.5))
        with pytest.raises(ParameterError):
            HmmParams(pi=[1.0], A=[[1.0]], B=[[1.2, -0.2]])

    def test_arrays_read_only(self):
        with pytest.raises(ValueError):
            TWO_STATE.A[0, 0] = 0.5

    def test_json_roundtrip_bit_exact(self):
        rng = np.random.default_rng(123)
        model = init_random(4, 6, rng)
        blob = json.dumps(model.to_dict())
        back = HmmParams.from_dict(json.loads(blob))
        assert np.array_equal(back.pi, model.pi)
        assert np.array_equal(back.A, model.A)
        assert np.array_equal(back.B, model.B)


class TestInitRandom:
    def test_single_state_is_forced(self):
        model = init_random(1, 2, np.random.default_rng(0))
        assert model.pi.tolist() == [1.0]
        assert model.A.tolist() == [[1.0]]
        assert abs(model.B.sum() - 1.0) < 1e-12

    def test_deterministic_for_seed(self):
        a = init_random(3, 4, np.random.default_rng(99))
        b = init_random(3, 4, np.random.default_rng(99))
        assert np.array_equal(a.pi, b.pi)
        assert np.array_equal(a.A, b.A)
        assert np.array_equal(a.B, b.B)

    def test_rows_normalized(self):
        model = init_random(3, 5, np.random.default_rng(7))
        assert np.all(np.abs(model.A.sum(1) - 1) < 1e-12)
        assert np.all(np.abs(model.B.sum(1) - 1) < 1e-12)
        assert abs(model.pi.sum() - 1) < 1e-12

    def test_invalid_sizes(self):
        with pytest.raises(ParameterError):
            init_random(0, 3, np.random.default_rng(0))
        with pytest.raises(ParameterError):
            init_random(2, 1, np.random.default_rng(0))


class TestLogsumexp:
    def test_all_neg_inf_rows(self):
        arr = np.array([[-np.inf, -np.inf], [0.0, -np.inf]])
        out = logsumexp(arr, axis=1)
        assert out[0] == -np.inf
        assert out[1] == 0.0

    def test_matches_naive(self):
        rng = np.random.default_rng(1)
        arr = rng.normal(size=(5, 7))
        expect = np.log(np.exp(arr).sum(axis=1))
        assert np.allclose(logsumexp(arr, axis=1), expect, rtol=1e-12)


class TestLogLikelihood:
    def test_single_state_product_of_emissions(self):
        model = HmmParams(pi=[1.0], A=[[1.0]], B=[[0.5, 0.5]])
        assert log_likelihood(model, [0, 0]) == pytest.approx(np.log(0.25), abs=1e-12)

    def test_two_state_hand_enumeration(self):
        # sum over the 4 paths of pi * B * A * B
        expect = sum(
            TWO_STATE.pi[a1]
            * TWO_STATE.B[a1, 0]
            * TWO_STATE.A[a1, a2]
            * TWO_STATE.B[a2, 1]
            for a1 in range(2)
            for a2 in range(2)
        )
        assert log_likelihood(TWO_STATE, [0, 1]) == pytest.approx(np.log(expect), rel=1e-12)

    def test_matches_brute_force_small_models(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(2, 5))
            T = int(rng.integers(1, 9))
            model = oracles.random_model(rng, n, m)
            seq = rng.integers(0, m, size=T)
            expect = oracles.brute_likelihood(model, seq)
            got = np.exp(log_likelihood(model, seq))
            assert got == pytest.approx(expect, rel=1e-10)

    def test_total_probability_sums_to_one(self):
        rng = np.random.default_rng(5)
        model = oracles.random_model(rng, 3, 2)
        seqs = oracles.enumerate_tuples(2, 6)
        total = sum(np.exp(log_likelihood(model, s)) for s in seqs)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_out_of_range_token(self):
        with pytest.raises(DataError):
            log_likelihood(TWO_STATE, [0, 2])

    def test_empty_sequence(self):
        with pytest.raises(ParameterError):
            log_likelihood(TWO_STATE, [])


class TestViterbi:
    def test_single_state_path(self):
        model = HmmParams(pi=[1.0], A=[[1.0]], B=[[0.3, 0.7]])
        path, _ = viterbi(model, [0, 1, 1])
        assert path.tolist() == [0, 0, 0]

    def test_matches_brute_force(self):
        rng = np.random.default_rng(77)
        for _ in range(40):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(2, 5))
            T = int(rng.integers(1, 8))
            model = oracles.random_model(rng, n, m)
            seq = rng.integers(0, m, size=T)
            best_path, best_lp = oracles.brute_viterbi(model, seq)
            path, lp = viterbi(model, seq)
            assert lp == pytest.approx(best_lp, rel=1e-10)
            assert path.tolist() == best_path.tolist()
            assert len(path) == T

    def test_path_prob_below_total_likelihood(self):
        rng = np.random.default_rng(3)
        model = oracles.random_model(rng, 3, 3)
        seq = rng.integers(0, 3, size=6)
        _, lp = viterbi(model, seq)
        assert lp <= log_likelihood(model, seq) + 1e-12

    def test_single_state_path_carries_all_mass(self):
        model = oracles.random_model(np.random.default_rng(13), 1, 3)
        seq = np.array([0, 2, 1, 1])
        _, lp = viterbi(model, seq)
        assert lp == pytest.approx(log_likelihood(model, seq), abs=1e-12)

    def test_tie_breaks_toward_lower_state(self):
        # fully symmetric model: every path has equal probability
        model = HmmParams(
            pi=[0.5, 0.5], A=[[0.5, 0.5], [0.5, 0.5]], B=[[0.5, 0.5], [0.5, 0.5]]
        )
        path, _ = viterbi(model, [0, 1, 0])
        assert path.tolist() == [0, 0, 0]


class TestBaumWelch:
    def test_single_token_converges_to_floored_point_mass(self):
        cfg = TrainConfig(n_states=1, max_iters=10, seed=0, floor=1e-10)
        seqs = [np.zeros(5, dtype=np.int64) for _ in range(3)]
        model, _ = baum_welch(seqs, 3, cfg)
        floored = oracles.floor_renormalize(np.array([[1.0, 0.0, 0.0]]), 1e-10)[0]
        assert model.B[0] == pytest.approx(floored, rel=1e-12)

    def test_one_iteration_matches_brute_force_posteriors(self):
        rng = np.random.default_rng(11)
        for trial in range(10):
            m = int(rng.integers(2, 4))
            n_seqs = int(rng.integers(1, 4))
            seqs = [rng.integers(0, m, size=int(rng.integers(2, 7))) for _ in range(n_seqs)]
            cfg = TrainConfig(n_states=2, max_iters=1, seed=trial, floor=1e-10)
            model, _ = baum_welch(seqs, m, cfg)
            # replicate the random start, then re-estimate via enumeration
            start = init_random(2, m, np.random.default_rng(trial))
            pi_c, trans_c, emit_c = oracles.brute_em_counts(start, seqs)
            assert model.pi == pytest.approx(
                oracles.floor_renormalize(pi_c, cfg.floor)[0], abs=1e-8
            )
            assert model.A == pytest.approx(
                oracles.floor_renormalize(trans_c, cfg.floor), abs=1e-8
            )
            assert model.B == pytest.approx(
                oracles.floor_renormalize(emit_c, cfg.floor), abs=1e-8
            )

    def test_history_non_decreasing(self):
        rng = np.random.default_rng(4)
        generator = oracles.random_model(rng, 2, 2)
        seqs = [sample(generator, 6, rng) for _ in range(20)]
        _, history = baum_welch(seqs, 2, TrainConfig(n_states=2, max_iters=25, seed=1))
        diffs = np.diff(history)
        assert np.all(diffs >= -1e-6)

    def test_history_non_decreasing_floor_zero(self):
        rng = np.random.default_rng(8)
        generator = oracles.random_model(rng, 3, 3)
        seqs = [sample(generator, 8, rng) for _ in range(15)]
        _, history = baum_welch(
            seqs, 3, TrainConfig(n_states=2, max_iters=25, seed=2, floor=0.0)
        )
        assert np.all(np.diff(history) >= -1e-8)

    def test_stochastic_invariants_after_training(self):
        rng = np.random.default_rng(6)
        seqs = [rng.integers(0, 4, size=10) for _ in range(8)]
        model, _ = baum_welch(seqs, 4, TrainConfig(n_states=3, max_iters=5, seed=3))
        assert np.all(model.A >= 0) and np.all(model.B >= 0)
        assert np.all(np.abs(model.A.sum(1) - 1) < 1e-9)
        assert np.all(np.abs(model.B.sum(1) - 1) < 1e-9)
        assert abs(model.pi.sum() - 1) < 1e-9

    def test_empty_sequence_list(self):
        with pytest.raises(ParameterError):
            baum_welch([], 3, TrainConfig(n_states=2))

    def test_rerun_is_bit_identical(self):
        rng = np.random.default_rng(9)
        seqs = [rng.integers(0, 3, size=t) for t in (4, 7, 4, 5, 7)]
        cfg = TrainConfig(n_states=2, max_iters=3, seed=5)
        a, hist_a = baum_welch(seqs, 3, cfg)
        b, hist_b = baum_welch(seqs, 3, cfg)
        assert np.array_equal(a.A, b.A) and np.array_equal(a.B, b.B)
        assert hist_a == hist_b

    def test_input_order_does_not_change_result(self):
        rng = np.random.default_rng(9)
        seqs = [rng.integers(0, 3, size=t) for t in (4, 7, 4, 5, 7)]
        cfg = TrainConfig(n_states=2, max_iters=3, seed=5)
        a, _ = baum_welch(seqs, 3, cfg)
        b, _ = baum_welch(list(reversed(seqs)), 3, cfg)
        assert np.allclose(a.A, b.A, rtol=1e-9) and np.allclose(a.B, b.B, rtol=1e-9)

    def test_recovers_generator_likelihood(self):
        # well-separated 2-state generator; trained model should explain
        # held-out data nearly as well per token
        generator = HmmParams(
            pi=[0.5, 0.5], A=[[0.9, 0.1], [0.1, 0.9]], B=[[0.95, 0.05], [0.05, 0.95]]
        )
        rng = np.random.default_rng(10)
        train = [sample(generator, 20, rng) for _ in range(5000)]
        heldout = [sample(generator, 20, rng) for _ in range(300)]
        model, _ = baum_welch(train, 2, TrainConfig(n_states=2, max_iters=25, seed=0))
        tokens = sum(len(s) for s in heldout)
        got = sum(log_likelihood(model, s) for s in heldout) / tokens
        want = sum(log_likelihood(generator, s) for s in heldout) / tokens
        assert abs(got - want) < 0.05


class TestSample:
    def test_point_mass_model_is_deterministic(self):
        model = HmmParams(pi=[0, 1.0], A=[[0, 1.0], [1.0, 0]], B=[[1.0, 0], [0, 1.0]])
        seq = sample(model, 6, np.random.default_rng(0))
        assert seq.tolist() == [1, 0, 1, 0, 1, 0]

    def test_same_seed_same_sequence(self):
        rng = np.random.default_rng(12)
        model = oracles.random_model(rng, 3, 4)
        a = sample(model, 50, np.random.default_rng(42))
        b = sample(model, 50, np.random.default_rng(42))
        assert np.array_equal(a, b)

    def test_marginal_frequency(self):
        model = HmmParams(pi=[1.0], A=[[1.0]], B=[[0.3, 0.7]])
        rng = np.random.default_rng(2024)
        draws = np.array([sample(model, 1, rng)[0] for _ in range(100_000)])
        assert np.mean(draws == 0) == pytest.approx(0.3, abs=0.01)

    def test_zero_length_rejected(self):
        with pytest.raises(ParameterError):
            sample(TWO_STATE, 0, np.random.default_rng(0))
