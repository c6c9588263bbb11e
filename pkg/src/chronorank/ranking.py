"""Smooth-nDCG ranking objective, graded relevance functions, and exact metrics.

Everything here is a pure function of its arguments. The smooth DCG of a
scored list replaces each item's hard rank with a temperature-scaled sigmoid
count of the items that outrank it:

    smooth_dcg = sum_i  r(i) / log2(2 + sum_{j != i} sigmoid((s_j - s_i) / t))

As the temperature t -> 0 the sigmoid count converges to the hard rank count
and smooth_dcg converges to exact_dcg (ties counted half, matching
sigmoid(0) = 0.5).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, UndefinedMetricError

_LN2 = math.log(2.0)

# Scores are cosine similarities; allow a hair of accumulated rounding.
_SCORE_SLACK = 1e-9


class RelevanceKind(enum.Enum):
    THRESHOLDED = "thresholded"
    LOG_SCALED = "log_scaled"
    CUSTOM = "custom"


@dataclass(frozen=True)
class RelevanceSpec:
    """How to grade the relevance of an item year against a query year.

    ``window_years`` is the cutoff for THRESHOLDED grading (relevance falls
    linearly from the window size at zero distance to 0 at the window edge).
    LOG_SCALED grading is monotone decreasing in year distance: the maximum
    value at zero distance, zero at the largest distance in the vocabulary.
    CUSTOM carries a user callable (year_q, year_n) -> relevance >= 0 and is
    not persistable.
    """

    kind: RelevanceKind
    window_years: float | None = None
    custom_fn: Callable[[int, int], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind is RelevanceKind.THRESHOLDED:
            if self.window_years is None or self.window_years <= 0:
                raise InvalidParameterError("thresholded relevance needs window_years > 0")
        if self.kind is RelevanceKind.CUSTOM and self.custom_fn is None:
            raise InvalidParameterError("custom relevance needs a callable")


@dataclass(frozen=True)
class LossConfig:
    """Temperature of the rank-smoothing sigmoid and the zero-IDCG guard."""

    temperature: float = 0.01
    idcg_epsilon: float = 1e-12

    def __post_init__(self):
        if self.temperature <= 0:
            raise InvalidParameterError(f"temperature must be > 0, got {self.temperature}")
        if self.idcg_epsilon <= 0:
            raise InvalidParameterError(f"idcg_epsilon must be > 0, got {self.idcg_epsilon}")


@dataclass(frozen=True, eq=False)
class ScoredList:
    """A query's candidate list: cosine scores paired with graded relevances."""

    scores: np.ndarray
    relevances: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        relevances = np.asarray(self.relevances, dtype=np.float64)
        if scores.ndim != 1 or relevances.ndim != 1:
            raise InvalidInputError("scores and relevances must be 1-D")
        if scores.shape != relevances.shape:
            raise InvalidInputError(
                f"length mismatch: {scores.shape[0]} scores vs {relevances.shape[0]} relevances"
            )
        if not (np.all(np.isfinite(scores)) and np.all(np.isfinite(relevances))):
            raise InvalidInputError("scores and relevances must be finite")
        if np.any(relevances < 0):
            raise InvalidInputError("relevances must be nonnegative")
        if np.any(np.abs(scores) > 1.0 + _SCORE_SLACK):
            raise InvalidInputError("scores must be cosine similarities in [-1, 1]")
        object.__setattr__(self, "scores", np.clip(scores, -1.0, 1.0))
        object.__setattr__(self, "relevances", relevances)

    def __len__(self) -> int:
        return self.scores.shape[0]


def sigmoid_temp(x, temperature: float):
    """Sigmoid 1 / (1 + exp(-x / temperature)), stable for any |x / temperature|.

    Accepts scalars or arrays; the positive and negative branches are
    evaluated with exp of a nonpositive argument only, so nothing overflows
    and extreme inputs saturate cleanly to 0.0 or 1.0.
    """
    if temperature <= 0:
        raise InvalidParameterError(f"temperature must be > 0, got {temperature}")
    z = np.asarray(x, dtype=np.float64) / temperature
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def relevance_thresholded(year_q: float, year_n: float, window: float) -> float:
    """Linear relevance max(0, window - |year_q - year_n|)."""
    if window <= 0:
        raise InvalidParameterError(f"window must be > 0, got {window}")
    return max(0.0, window - abs(year_q - year_n))


def relevance_log(year_q: float, year_n: float, span: float) -> float:
    """Log-scaled relevance log(1 + span) - log(1 + |year_q - year_n|).

    Decreasing in year distance: the maximum log(1 + span) at zero distance,
    exactly 0 at the maximal distance ``span``.
    """
    if span <= 0:
        raise InvalidParameterError(f"span must be > 0, got {span}")
    distance = abs(year_q - year_n)
    if distance > span:
        raise InvalidParameterError(f"|year_q - year_n| = {distance} exceeds span {span}")
    return math.log1p(span) - math.log1p(distance)


def _smooth_rank_counts(scores: np.ndarray, temperature: float) -> np.ndarray:
    """For each item i, the smoothed number of items scoring above it."""
    n = scores.shape[0]
    diff = scores[None, :] - scores[:, None]  # diff[i, j] = s_j - s_i
    counts = sigmoid_temp(diff, temperature)
    counts[np.diag_indices(n)] = 0.0
    return counts


def smooth_dcg(scored: ScoredList, cfg: LossConfig) -> float:
    """Differentiable DCG with sigmoid-smoothed rank counts."""
    n = len(scored)
    if n == 0:
        return 0.0
    counts = _smooth_rank_counts(scored.scores, cfg.temperature).sum(axis=1)
    return float(np.sum(scored.relevances / np.log2(2.0 + counts)))


def exact_dcg(scored: ScoredList) -> float:
    """Hard-rank DCG: sum of r(i) / log2(2 + c_i).

    c_i counts items strictly above item i plus half a credit per tied item,
    so smooth_dcg converges to this value as the temperature goes to 0.
    """
    s = scored.scores
    above = (s[None, :] > s[:, None]).sum(axis=1)
    tied = (s[None, :] == s[:, None]).sum(axis=1) - 1  # discount self
    counts = above + 0.5 * tied
    return float(np.sum(scored.relevances / np.log2(2.0 + counts)))


def ideal_dcg(relevances: Sequence[float] | np.ndarray) -> float:
    """Best achievable DCG: relevances sorted descending at ranks 0, 1, ..."""
    rel = np.sort(np.asarray(relevances, dtype=np.float64))[::-1]
    if rel.size and rel[-1] < 0:
        raise InvalidInputError("relevances must be nonnegative")
    ranks = np.arange(rel.size, dtype=np.float64)
    return float(np.sum(rel / np.log2(2.0 + ranks)))


def smooth_ndcg(scored: ScoredList, cfg: LossConfig) -> float:
    """smooth_dcg normalized by the ideal DCG; 0 when the ideal is ~zero.

    May exceed 1.0 by a small smoothing slack that vanishes with the
    temperature.
    """
    ideal = ideal_dcg(scored.relevances)
    if ideal < cfg.idcg_epsilon:
        return 0.0
    return smooth_dcg(scored, cfg) / ideal


def smooth_ndcg_grad(scored: ScoredList, cfg: LossConfig) -> np.ndarray:
    """Analytic gradient of smooth_ndcg with respect to each score.

    With T_i the smoothed count of items above i and A_i = 2 + T_i:

        d(smooth_dcg)/dT_i = -r_i * ln2 / (A_i * ln(A_i)^2)

    and dT_i/ds_k assembles from sigmoid derivatives of pairwise score
    differences, which are symmetric in (i, k).
    """
    n = len(scored)
    ideal = ideal_dcg(scored.relevances)
    if n <= 1 or ideal < cfg.idcg_epsilon:
        return np.zeros(n, dtype=np.float64)

    counts = _smooth_rank_counts(scored.scores, cfg.temperature)
    totals = counts.sum(axis=1)
    a = 2.0 + totals
    log_a = np.log(a)
    coeff = -scored.relevances * _LN2 / (a * log_a * log_a)

    # sig_deriv[i, k] = sigmoid'((s_k - s_i) / t); symmetric, zero diagonal.
    sig_deriv = counts * (1.0 - counts)
    grad = (sig_deriv @ coeff - coeff * sig_deriv.sum(axis=1)) / cfg.temperature
    return grad / ideal


def mean_absolute_error(predicted, actual) -> float:
    """Mean |predicted_i - actual_i| over positionally paired year vectors."""
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.ndim != 1 or a.ndim != 1 or p.shape != a.shape or p.size == 0:
        raise InvalidInputError("predicted and actual must be equal-length nonempty vectors")
    return float(np.mean(np.abs(p - a)))


def average_precision(ranking: Sequence[str], relevant: set[str]) -> float:
    """AP of one ranking: mean precision-at-hit over the relevant hits.

    A relevant document absent from the ranking contributes nothing; a
    nonempty relevant set with zero hits yields 0.0.
    """
    if len(ranking) == 0:
        raise InvalidInputError("ranking must be nonempty")
    hits = 0
    precision_sum = 0.0
    for position, doc_id in enumerate(ranking, start=1):
        if doc_id in relevant:
            hits += 1
            precision_sum += hits / position
    if hits == 0:
        return 0.0
    return precision_sum / hits


def mean_average_precision(
    rankings: Sequence[Sequence[str]], relevant_sets: Sequence[set[str]]
) -> float:
    """Mean AP over queries; queries with an empty relevant set are skipped."""
    if len(rankings) != len(relevant_sets):
        raise InvalidInputError("rankings and relevant_sets must pair up")
    scores = [
        average_precision(ranking, relevant)
        for ranking, relevant in zip(rankings, relevant_sets)
        if relevant
    ]
    if not scores:
        raise UndefinedMetricError("every query has an empty relevant set")
    return float(np.mean(scores))
