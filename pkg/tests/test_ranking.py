import math

import numpy as np
import pytest

from chronorank.errors import InvalidInputError, InvalidParameterError, UndefinedMetricError
from chronorank.ranking import (
    LossConfig,
    ScoredList,
    average_precision,
    exact_dcg,
    ideal_dcg,
    mean_absolute_error,
    mean_average_precision,
    relevance_log,
    relevance_thresholded,
    sigmoid_temp,
    smooth_dcg,
    smooth_ndcg,
    smooth_ndcg_grad,
)

from oracles import brute_average_precision, brute_dcg, brute_ndcg, central_difference_grad


def scored(scores, relevances):
    return ScoredList(np.asarray(scores, dtype=float), np.asarray(relevances, dtype=float))


class TestSigmoidTemp:
    def test_zero_is_half(self):
        for temperature in (1.0, 0.1, 1e-4):
            assert sigmoid_temp(0.0, temperature) == 0.5

    def test_saturates_to_one(self):
        assert sigmoid_temp(30.0, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_high_precision_value(self):
        # 1 / (1 + e^-10), frozen from a 40-digit evaluation
        assert sigmoid_temp(0.1, 0.01) == pytest.approx(0.99995460213129757, abs=1e-6)

    def test_extreme_arguments_do_not_overflow(self):
        with np.errstate(over="raise"):
            assert sigmoid_temp(-700.0, 1.0) < 1e-300
            assert sigmoid_temp(700.0, 1.0) == 1.0
            assert sigmoid_temp(-7.0, 0.01) < 1e-300
            assert sigmoid_temp(-2000.0, 1.0) == 0.0
            assert sigmoid_temp(2000.0, 1.0) == 1.0

    def test_monotone_in_x(self):
        xs = np.linspace(-5, 5, 101)
        ys = sigmoid_temp(xs, 0.3)
        assert np.all(np.diff(ys) > 0)
        assert np.all((ys > 0) & (ys < 1))

    def test_rejects_bad_temperature(self):
        with pytest.raises(InvalidParameterError):
            sigmoid_temp(1.0, 0.0)
        with pytest.raises(InvalidParameterError):
            sigmoid_temp(1.0, -2.0)


class TestRelevanceFunctions:
    def test_thresholded_zero_distance_returns_window(self):
        assert relevance_thresholded(1900, 1900, 10) == 10.0

    def test_thresholded_linear_decay(self):
        assert relevance_thresholded(1900, 1905, 10) == 5.0

    def test_thresholded_clamps_to_zero(self):
        assert relevance_thresholded(1900, 1950, 10) == 0.0

    def test_thresholded_rejects_bad_window(self):
        with pytest.raises(InvalidParameterError):
            relevance_thresholded(1900, 1901, 0)

    def test_log_zero_distance_is_maximum(self):
        assert relevance_log(1400, 1400, 250) == pytest.approx(5.5254529391317839, abs=1e-12)

    def test_log_maximal_distance_is_zero(self):
        assert relevance_log(1300, 1550, 250) == pytest.approx(0.0, abs=1e-12)

    def test_log_intermediate_value(self):
        # log(251) - log(26), frozen from a 40-digit evaluation
        assert relevance_log(1400, 1425, 250) == pytest.approx(2.2673564011103018, abs=1e-3)

    def test_log_rejects_bad_span(self):
        with pytest.raises(InvalidParameterError):
            relevance_log(1400, 1425, 0)
        with pytest.raises(InvalidParameterError):
            relevance_log(1400, 1425, 10)

    def test_both_are_symmetric(self):
        for a, b in [(1900, 1912), (1300, 1550), (1444, 1400)]:
            assert relevance_thresholded(a, b, 20) == relevance_thresholded(b, a, 20)
            assert relevance_log(a, b, 250) == relevance_log(b, a, 250)


class TestSmoothDcg:
    def test_single_element(self):
        assert smooth_dcg(scored([0.9], [3.0]), LossConfig()) == pytest.approx(3.0)

    def test_two_separated_items_at_tiny_temperature(self):
        value = smooth_dcg(scored([1.0, -1.0], [1.0, 0.0]), LossConfig(temperature=1e-4))
        assert value == pytest.approx(1.0, abs=1e-6)

    def test_all_tied(self):
        value = smooth_dcg(scored([0.5, 0.5, 0.5], [1.0, 1.0, 1.0]), LossConfig(temperature=0.37))
        assert value == pytest.approx(1.8927892607143723, abs=1e-12)

    def test_matches_brute_force_on_separated_random_lists(self):
        rng = np.random.default_rng(7)
        cfg = LossConfig(temperature=1e-5)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            scores = np.linspace(-0.8, 0.8, n) + rng.uniform(-0.004, 0.004, n)
            rng.shuffle(scores)
            rels = rng.uniform(0, 5, n)
            sl = scored(scores, rels)
            assert smooth_dcg(sl, cfg) == pytest.approx(
                brute_dcg(scores.tolist(), rels.tolist()), abs=1e-4
            )

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            scored([0.1, 0.2], [1.0])


class TestExactDcg:
    def test_single_element(self):
        assert exact_dcg(scored([0.3], [2.5])) == pytest.approx(2.5)

    def test_two_items_explicit(self):
        assert exact_dcg(scored([1.0, -1.0], [1.0, 0.0])) == pytest.approx(1.0)

    def test_ties_get_half_credit(self):
        # two tied items: each sees 0.5 items above it
        value = exact_dcg(scored([0.2, 0.2], [1.0, 1.0]))
        assert value == pytest.approx(2.0 / math.log2(2.5))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(1, 10))
            scores = rng.choice(np.linspace(-1, 1, 7), size=n)  # forces ties
            rels = rng.uniform(0, 4, n)
            sl = scored(scores, rels)
            assert exact_dcg(sl) == pytest.approx(
                brute_dcg(scores.tolist(), rels.tolist()), abs=1e-12
            )

    def test_permutation_equivariant(self):
        rng = np.random.default_rng(3)
        scores = rng.uniform(-1, 1, 8)
        rels = rng.uniform(0, 3, 8)
        base = exact_dcg(scored(scores, rels))
        for _ in range(10):
            perm = rng.permutation(8)
            assert exact_dcg(scored(scores[perm], rels[perm])) == pytest.approx(base, abs=1e-12)


class TestSmoothNdcg:
    def test_perfectly_ordered_list_scores_one(self):
        sl = scored([0.9, 0.3, -0.3, -0.9], [3.0, 2.0, 1.0, 0.0])
        assert smooth_ndcg(sl, LossConfig(temperature=1e-5)) == pytest.approx(1.0, abs=1e-4)

    def test_all_zero_relevances_guarded_to_zero(self):
        sl = scored([0.5, -0.5], [0.0, 0.0])
        assert smooth_ndcg(sl, LossConfig()) == 0.0

    def test_reversed_order_matches_sort_oracle(self):
        scores = [-0.9, -0.3, 0.3, 0.9]
        rels = [3.0, 2.0, 1.0, 0.0]
        value = smooth_ndcg(scored(scores, rels), LossConfig(temperature=1e-5))
        assert value == pytest.approx(brute_ndcg(scores, rels), abs=1e-6)
        assert value == pytest.approx(0.61382731334410861, abs=1e-6)

    def test_ideal_dcg_equals_exact_dcg_of_resorted_list(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            rels = rng.uniform(0, 5, int(rng.integers(1, 10)))
            planted = np.sort(rels)[::-1]
            resorted = scored(np.linspace(1.0, -1.0, rels.size), planted)
            assert ideal_dcg(rels) == pytest.approx(exact_dcg(resorted), abs=1e-12)


class TestSmoothNdcgGrad:
    def test_fully_symmetric_input_has_zero_gradient(self):
        sl = scored([0.25] * 5, [2.0] * 5)
        grad = smooth_ndcg_grad(sl, LossConfig(temperature=0.05))
        assert np.all(np.abs(grad) <= 1e-10)

    def test_single_element_gradient_is_zero(self):
        grad = smooth_ndcg_grad(scored([0.4], [1.0]), LossConfig())
        assert grad.shape == (1,) and grad[0] == 0.0

    def test_matches_central_differences(self):
        rng = np.random.default_rng(23)
        for trial in range(30):
            n = int(rng.integers(2, 9))
            scores = rng.uniform(-0.9, 0.9, n)
            rels = rng.uniform(0, 4, n)
            temperature = float(rng.choice([1e-2, 5e-2, 1e-1]))
            cfg = LossConfig(temperature=temperature)
            grad = smooth_ndcg_grad(scored(scores, rels), cfg)

            def loss(xs):
                return smooth_ndcg(scored(np.asarray(xs), rels), cfg)

            fd = np.asarray(central_difference_grad(loss, scores.tolist(), step=1e-5))
            # Below ~1e-6 the finite differences sit at their own rounding
            # floor, so the relative check degrades to a 1e-10 absolute one.
            scale = np.maximum(np.abs(fd), 1e-6)
            assert np.all(np.abs(grad - fd) / scale <= 1e-4), f"trial {trial}"

    def test_zero_relevance_list_has_zero_gradient(self):
        grad = smooth_ndcg_grad(scored([0.1, -0.4, 0.7], [0.0, 0.0, 0.0]), LossConfig())
        assert np.all(grad == 0.0)


class TestMeanAbsoluteError:
    def test_identical_vectors(self):
        assert mean_absolute_error([1900, 1950], [1900, 1950]) == 0.0

    def test_hand_computed(self):
        assert mean_absolute_error([1900, 1910], [1905, 1900]) == pytest.approx(7.5)

    def test_pairing_is_positional(self):
        assert mean_absolute_error([1900, 1910], [1905, 1900]) != mean_absolute_error(
            [1910, 1900], [1905, 1900]
        )

    def test_rejects_empty_and_mismatched(self):
        with pytest.raises(InvalidInputError):
            mean_absolute_error([], [])
        with pytest.raises(InvalidInputError):
            mean_absolute_error([1900], [1900, 1901])


class TestAveragePrecision:
    def test_all_relevant_first_is_perfect(self):
        assert average_precision(["a", "b", "c", "d"], {"a", "b"}) == 1.0

    def test_textbook_example(self):
        assert average_precision(["r1", "n", "r2"], {"r1", "r2"}) == pytest.approx(5.0 / 6.0)

    def test_matches_brute_force_exhaustively_for_four_items(self):
        import itertools

        relevant = {"a", "b"}
        for perm in itertools.permutations(["a", "b", "c", "d"]):
            assert average_precision(list(perm), relevant) == pytest.approx(
                brute_average_precision(list(perm), relevant), abs=1e-12
            )

    def test_empty_ranking_rejected(self):
        with pytest.raises(InvalidInputError):
            average_precision([], {"a"})


class TestMeanAveragePrecision:
    def test_skips_queries_with_empty_relevant_sets(self):
        value = mean_average_precision(
            [["a", "b"], ["c", "d"]],
            [{"a"}, set()],
        )
        assert value == 1.0

    def test_all_empty_is_undefined(self):
        with pytest.raises(UndefinedMetricError):
            mean_average_precision([["a"], ["b"]], [set(), set()])

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(41)
        ids = [f"d{i}" for i in range(8)]
        for _ in range(200):
            n = int(rng.integers(1, 9))
            ranking = list(rng.permutation(ids[:n]))
            relevant = {doc for doc in ranking if rng.random() < 0.4}
            if not relevant:
                relevant = {ranking[0]}
            assert mean_average_precision([ranking], [relevant]) == pytest.approx(
                brute_average_precision(ranking, relevant), abs=1e-12
            )
