import copy
import math

import numpy as np
import pytest

from mobvec.corpus import Visit, build_trajectories, build_vocabulary
from mobvec.embedding import (
    RATE_FLOOR_FACTOR,
    TrainConfig,
    _draw_negatives,
    _log_sigmoid,
    _Progress,
    context_pairs,
    in_vector,
    init_model,
    load_model,
    negative_table,
    save_model,
    sgns_objective,
    sgns_update,
    train,
)
from mobvec.errors import DomainError, InputError, ParseError

from conftest import trajectory, vocabulary_of


def tiny_model(n=6, d=4, seed=0):
    vocab = vocabulary_of(*(f"t{i}" for i in range(n)))
    rng = np.random.default_rng(seed)
    model = init_model(TrainConfig(dim=d, f_min=1), vocab, rng)
    # nonzero out-vectors so gradients flow through both matrices
    model.out_vectors[:] = rng.normal(scale=0.3, size=model.out_vectors.shape)
    return model


def chain_corpus(n_entities=120, seed=0):
    """Entities alternating between two halves of a 6-token vocabulary."""
    rng = np.random.default_rng(seed)
    visits = []
    for e in range(n_entities):
        group = ("t0", "t1", "t2") if e % 2 == 0 else ("t3", "t4", "t5")
        for period in range(4):
            visits.append(Visit(f"e{e}", group[rng.integers(3)], period))
    return build_trajectories(visits)


class TestTrainConfig:
    def test_defaults(self):
        config = TrainConfig()
        assert (config.dim, config.window, config.negatives) == (300, 1, 5)
        assert config.initial_rate == 0.025
        assert config.epochs == 5
        assert config.smoothing == 0.75
        assert config.f_min == 50
        assert config.subsample == 0.0

    def test_zero_epochs_allowed(self):
        assert TrainConfig(epochs=0).epochs == 0

    @pytest.mark.parametrize("kwargs", [
        {"dim": 1}, {"window": 0}, {"negatives": 0}, {"initial_rate": 0.0},
        {"epochs": -1}, {"workers": 0}, {"smoothing": -0.1}, {"f_min": 0},
        {"subsample": -1e-5},
    ])
    def test_invalid_fields_rejected(self, kwargs):
        with pytest.raises(InputError):
            TrainConfig(**kwargs)


class TestInitModel:
    def test_shapes_and_ranges(self):
        vocab = vocabulary_of("a", "b", "c")
        model = init_model(TrainConfig(dim=8, f_min=1), vocab, np.random.default_rng(0))
        assert model.in_vectors.shape == (3, 8)
        assert model.out_vectors.shape == (3, 8)
        assert np.all(np.abs(model.in_vectors) <= 0.5 / 8)
        assert np.all(model.out_vectors == 0.0)

    def test_empty_vocabulary_rejected(self):
        empty = vocabulary_of()
        with pytest.raises(InputError):
            init_model(TrainConfig(dim=4, f_min=1), empty, np.random.default_rng(0))


class TestContextPairs:
    def test_window_one(self):
        assert context_pairs([0, 1, 2], 1) == [(0, 1), (1, 0), (1, 2), (2, 1)]

    def test_window_truncates_at_edges(self):
        pairs = context_pairs([5, 6, 7], 2)
        assert (5, 7) in pairs and (7, 5) in pairs
        assert len(pairs) == 6

    def test_short_sequences(self):
        assert context_pairs([3], 1) == []
        assert context_pairs([], 1) == []

    def test_window_validated(self):
        with pytest.raises(InputError):
            context_pairs([0, 1], 0)


class TestNegativeTable:
    def test_smoothed_unigram(self):
        vocab = vocabulary_of("a", "b", counts={"a": 16, "b": 1})
        table = negative_table(vocab, 0.75)
        raw = np.array([16.0 ** 0.75, 1.0])
        assert np.allclose(table, raw / raw.sum(), atol=1e-15)

    def test_exponent_zero_is_uniform(self):
        vocab = vocabulary_of("a", "b", "c", counts={"a": 100, "b": 10, "c": 1})
        assert np.allclose(negative_table(vocab, 0.0), 1.0 / 3.0)

    def test_sums_to_one(self):
        vocab = vocabulary_of(*(f"t{i}" for i in range(30)),
                              counts={f"t{i}": i + 1 for i in range(30)})
        assert negative_table(vocab).sum() == pytest.approx(1.0, abs=1e-12)

    def test_negative_exponent_rejected(self):
        with pytest.raises(InputError):
            negative_table(vocabulary_of("a"), -0.5)


class TestLogSigmoid:
    def test_matches_direct_formula_in_safe_range(self):
        xs = np.linspace(-30, 30, 301)
        direct = np.array([math.log(1.0 / (1.0 + math.exp(-x))) for x in xs])
        assert np.allclose(_log_sigmoid(xs), direct, atol=1e-12)

    def test_extreme_tails_stay_finite(self):
        values = _log_sigmoid(np.array([-1e4, -750.0, 750.0, 1e4]))
        assert np.all(np.isfinite(values))
        assert values[0] == pytest.approx(-1e4)
        assert values[-1] == pytest.approx(0.0, abs=1e-300)


def numeric_gradient(model, center, context, negatives, matrix, row, eps=1e-5):
    """Central finite difference of the objective along one parameter row."""
    grad = np.zeros(matrix.shape[1])
    for i in range(matrix.shape[1]):
        saved = matrix[row, i]
        matrix[row, i] = saved + eps
        up = sgns_objective(model, center, context, negatives)
        matrix[row, i] = saved - eps
        down = sgns_objective(model, center, context, negatives)
        matrix[row, i] = saved
        grad[i] = (up - down) / (2.0 * eps)
    return grad


def analytic_gradients(model, center, context, negatives):
    """Extract the update's gradient via a rate-1 step on a copy."""
    stepped = copy.deepcopy(model)
    sgns_update(stepped, center, context, negatives, rate=1.0)
    return (stepped.in_vectors - model.in_vectors,
            stepped.out_vectors - model.out_vectors)


def relative_error(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / scale


class TestGradients:
    def test_in_vector_gradient(self):
        model = tiny_model()
        rng = np.random.default_rng(1)
        for _ in range(30):
            center, context = rng.integers(6, size=2)
            negatives = rng.integers(6, size=5)
            d_in, _ = analytic_gradients(model, center, context, negatives)
            numeric = numeric_gradient(model, center, context, negatives,
                                       model.in_vectors, center)
            assert relative_error(d_in[center], numeric) < 1e-5

    def test_out_vector_gradients(self):
        model = tiny_model(seed=2)
        rng = np.random.default_rng(3)
        for _ in range(30):
            center, context = rng.integers(6, size=2)
            negatives = rng.integers(6, size=5)
            _, d_out = analytic_gradients(model, center, context, negatives)
            touched = {int(context), *map(int, negatives)}
            for row in range(6):
                numeric = numeric_gradient(model, center, context, negatives,
                                           model.out_vectors, row)
                assert relative_error(d_out[row], numeric) < 1e-5
                if row not in touched:
                    assert np.all(d_out[row] == 0.0)

    def test_duplicate_negatives_accumulate(self):
        model = tiny_model(seed=4)
        negatives = np.array([3, 3, 3])
        _, d_out = analytic_gradients(model, 0, 1, negatives)
        numeric = numeric_gradient(model, 0, 1, negatives, model.out_vectors, 3)
        assert relative_error(d_out[3], numeric) < 1e-5
        _, d_single = analytic_gradients(model, 0, 1, np.array([3]))
        assert np.allclose(d_out[3], 3.0 * d_single[3], atol=1e-12)

    def test_context_among_negatives(self):
        model = tiny_model(seed=5)
        negatives = np.array([1, 2, 1])
        d_in, d_out = analytic_gradients(model, 0, 1, negatives)
        for row in (1, 2):
            numeric = numeric_gradient(model, 0, 1, negatives, model.out_vectors, row)
            assert relative_error(d_out[row], numeric) < 1e-5
        numeric_v = numeric_gradient(model, 0, 1, negatives, model.in_vectors, 0)
        assert relative_error(d_in[0], numeric_v) < 1e-5


class TestSgnsUpdate:
    def test_returns_pre_update_objective(self):
        model = tiny_model(seed=6)
        before = sgns_objective(model, 0, 1, [2, 3])
        returned = sgns_update(model, 0, 1, [2, 3], rate=0.05)
        assert returned == pytest.approx(before, abs=1e-15)

    def test_untouched_rows_unchanged(self):
        model = tiny_model(seed=7)
        v_before = model.in_vectors.copy()
        u_before = model.out_vectors.copy()
        sgns_update(model, 0, 1, [2, 3], rate=0.1)
        assert np.all(model.in_vectors[1:] == v_before[1:])
        untouched = [i for i in range(6) if i not in (1, 2, 3)]
        assert np.all(model.out_vectors[untouched] == u_before[untouched])

    def test_objective_increases_along_step(self):
        model = tiny_model(seed=8)
        before = sgns_objective(model, 0, 1, [2, 3])
        sgns_update(model, 0, 1, [2, 3], rate=0.01)
        assert sgns_objective(model, 0, 1, [2, 3]) > before

    def test_rate_validated(self):
        model = tiny_model()
        with pytest.raises(InputError):
            sgns_update(model, 0, 1, [2], rate=0.0)

    def test_objective_formula(self):
        model = tiny_model(seed=9)
        v = model.in_vectors[2]
        expected = math.log(1.0 / (1.0 + math.exp(-float(model.out_vectors[4] @ v))))
        for n in (0, 5):
            s = float(model.out_vectors[n] @ v)
            expected += math.log(1.0 / (1.0 + math.exp(s)))
        assert sgns_objective(model, 2, 4, [0, 5]) == pytest.approx(expected, rel=1e-12)


class TestNegativeDraws:
    def test_distribution_follows_table(self):
        probabilities = np.array([0.5, 0.3, 0.2])
        cumulative = np.cumsum(probabilities)
        cumulative[-1] = 1.0
        rng = np.random.default_rng(0)
        draws = _draw_negatives(rng, cumulative, 20000, 1).ravel()
        counts = np.bincount(draws, minlength=3) / len(draws)
        # three-sigma band for each cell
        for k in range(3):
            sigma = math.sqrt(probabilities[k] * (1 - probabilities[k]) / len(draws))
            assert abs(counts[k] - probabilities[k]) < 3.5 * sigma

    def test_shape(self):
        cumulative = np.array([0.5, 1.0])
        out = _draw_negatives(np.random.default_rng(1), cumulative, 7, 4)
        assert out.shape == (7, 4)
        assert np.all((out >= 0) & (out < 2))


class TestRateSchedule:
    def test_linear_decay_to_floor(self):
        progress = _Progress(total=1000)
        assert progress.rate(0.025) == pytest.approx(0.025)
        progress.done = 500
        expected_mid = 0.025 * (1.0 - (1.0 - RATE_FLOOR_FACTOR) * 0.5)
        assert progress.rate(0.025) == pytest.approx(expected_mid, rel=1e-12)
        progress.done = 1000
        assert progress.rate(0.025) == pytest.approx(0.025 * RATE_FLOOR_FACTOR, rel=1e-12)

    def test_overshoot_clamped(self):
        progress = _Progress(total=100)
        progress.done = 250
        assert progress.rate(0.025) == pytest.approx(0.025 * RATE_FLOOR_FACTOR, rel=1e-12)


class TestTrain:
    def test_deterministic_with_one_worker(self):
        trajectories = chain_corpus()
        config = TrainConfig(dim=8, epochs=2, f_min=1, seed=11)
        first = train(trajectories, config)
        second = train(trajectories, config)
        assert np.array_equal(first.in_vectors, second.in_vectors)
        assert np.array_equal(first.out_vectors, second.out_vectors)

    def test_seed_changes_model(self):
        trajectories = chain_corpus()
        a = train(trajectories, TrainConfig(dim=8, epochs=1, f_min=1, seed=0))
        b = train(trajectories, TrainConfig(dim=8, epochs=1, f_min=1, seed=1))
        assert not np.array_equal(a.in_vectors, b.in_vectors)

    def test_zero_epochs_keeps_initialization(self):
        trajectories = chain_corpus()
        model = train(trajectories, TrainConfig(dim=8, epochs=0, f_min=1, seed=0))
        assert np.all(model.out_vectors == 0.0)
        assert np.all(np.abs(model.in_vectors) <= 0.5 / 8)

    def test_training_separates_cooccurring_halves(self):
        # entities never cross halves, so vectors should cluster by half
        trajectories = chain_corpus()
        model = train(trajectories, TrainConfig(dim=8, epochs=5, f_min=1, seed=3))
        def cosine(a, b):
            u, v = in_vector(model, a), in_vector(model, b)
            return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))
        within = [cosine("t0", "t1"), cosine("t1", "t2"), cosine("t3", "t4"),
                  cosine("t4", "t5")]
        across = [cosine("t0", "t3"), cosine("t1", "t4"), cosine("t2", "t5")]
        assert min(within) > max(across)

    def test_multiple_workers_run_and_stay_finite(self):
        trajectories = chain_corpus()
        model = train(trajectories, TrainConfig(dim=8, epochs=2, f_min=1,
                                                seed=0, workers=3))
        assert np.all(np.isfinite(model.in_vectors))
        assert np.all(np.isfinite(model.out_vectors))

    def test_subsample_is_deterministic_and_finite(self):
        trajectories = chain_corpus()
        config = TrainConfig(dim=8, epochs=2, f_min=1, seed=5, subsample=0.05)
        a = train(trajectories, config)
        b = train(trajectories, config)
        assert np.array_equal(a.in_vectors, b.in_vectors)
        assert np.all(np.isfinite(a.in_vectors))

    def test_f_min_prunes_vocabulary(self):
        trajectories = chain_corpus(n_entities=4)
        extra = trajectory("rare", (0, "t0", "zz"), (1, "t1"))
        model = train(trajectories + [extra], TrainConfig(dim=4, epochs=1, f_min=2))
        assert "zz" not in model.vocabulary


class TestInVector:
    def test_returns_copy(self):
        model = tiny_model()
        vec = in_vector(model, "t0")
        vec[:] = 99.0
        assert not np.any(model.in_vectors == 99.0)

    def test_unknown_location(self):
        model = tiny_model()
        with pytest.raises(DomainError, match="missing"):
            in_vector(model, "missing")


class TestSerialization:
    def test_round_trip_is_exact(self, tmp_path):
        trajectories = chain_corpus(n_entities=20)
        model = train(trajectories, TrainConfig(dim=6, epochs=1, f_min=1, seed=2))
        path = tmp_path / "model.txt"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.vocabulary.tokens == model.vocabulary.tokens
        assert np.array_equal(loaded.in_vectors, model.in_vectors)
        assert np.array_equal(loaded.out_vectors, model.out_vectors)

    def test_save_load_save_is_byte_identical(self, tmp_path):
        trajectories = chain_corpus(n_entities=20)
        model = train(trajectories, TrainConfig(dim=6, epochs=1, f_min=1, seed=2))
        first = tmp_path / "a.txt"
        second = tmp_path / "b.txt"
        save_model(model, first)
        save_model(load_model(first), second)
        assert first.read_bytes() == second.read_bytes()
        assert (tmp_path / "a.out.txt").read_bytes() == (tmp_path / "b.out.txt").read_bytes()

    def test_header_line(self, tmp_path):
        model = tiny_model()
        path = tmp_path / "m.txt"
        save_model(model, path)
        assert path.read_text().splitlines()[0] == "6 4"

    def test_out_vectors_in_sibling_file(self, tmp_path):
        model = tiny_model()
        save_model(model, tmp_path / "m.txt")
        assert (tmp_path / "m.out.txt").exists()

    def test_missing_out_file_loads_zeros(self, tmp_path):
        model = tiny_model()
        path = tmp_path / "m.txt"
        save_model(model, path)
        (tmp_path / "m.out.txt").unlink()
        loaded = load_model(path)
        assert np.all(loaded.out_vectors == 0.0)

    def test_whitespace_token_rejected(self, tmp_path):
        model = tiny_model()
        bad = model.vocabulary.tokens[:-1] + ("has space",)
        object.__setattr__(model.vocabulary, "tokens", bad)
        with pytest.raises(InputError):
            save_model(model, tmp_path / "m.txt")

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError, match="model file not found"):
            load_model(tmp_path / "absent.txt")

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("not a header\n")
        with pytest.raises(ParseError):
            load_model(path)

    def test_short_row(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("1 3\ntok 0.5 0.25\n")
        with pytest.raises(ParseError, match="line 2"):
            load_model(path)

    def test_mismatched_sibling_rejected(self, tmp_path):
        model = tiny_model()
        path = tmp_path / "m.txt"
        save_model(model, path)
        out = tmp_path / "m.out.txt"
        text = out.read_text().splitlines()
        text[1] = "other" + text[1][text[1].index(" "):]
        out.write_text("\n".join(text) + "\n")
        with pytest.raises(ParseError):
            load_model(path)
