"""Candidate change point search.

The split metric for a window spanning ``[start, t]`` and a split point
``tau`` is the sum of the averaged log-likelihoods of two models fitted on
``[start, tau - 1]`` and ``[tau, t]``. For data containing a single change
the metric is unimodal in ``tau``, so its argmax can be located with a
discrete ternary search in ``O(log n)`` evaluations instead of a linear
scan. Searches are warm-started from the best split of the previous
iteration: the saved candidate both truncates the domain (the optimum
never moves left of it) and serves as a comparison point inside the
recursion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import EmptyDomain, TooFewPoints
from .models import ModelParams, ObservationModel
from .window import TimeSeriesWindow

DEFAULT_TOL = 2


@dataclass
class SplitScore:
    """Metric value at one split point, with the two fitted parameter sets."""

    tau: int
    score: float
    left_params: ModelParams
    right_params: ModelParams


@dataclass
class CandidateState:
    """Saved candidate change point carried across iterations."""

    candidate: int
    candidate_score: float
    persistence: int = 0
    eval_count_last_iter: int = 0


def effective_interval(t: int, last_change: int, prev_candidate: int,
                       min_fit_points: int = 3) -> range:
    """Admissible split points at time ``t``, as an inclusive integer range.

    Combines the split-point domain ``[last_change + 1, t - 1]``, the
    minimum size of both fitted segments, and the saved-candidate
    truncation: timestamps before ``prev_candidate`` are never searched
    again. The result may be empty.
    """
    lo = max(prev_candidate, last_change + min_fit_points)
    hi = t - min_fit_points
    if hi < lo:
        return range(lo, lo)
    return range(lo, hi + 1)


class SplitScorer:
    """Memoized evaluator of the split metric over one window.

    Scores depend on the window's right edge, so a scorer is valid for a
    single iteration; build a fresh one when the stream advances. Each
    evaluation fits the left/right models, warm-starting from the nearest
    previously evaluated split of this iteration (or, for the first
    evaluation, from the models' current parameters).
    """

    def __init__(self, window: TimeSeriesWindow, left_model: ObservationModel,
                 right_model: ObservationModel, warm_start: bool = True):
        self.window = window
        self.left_model = left_model
        self.right_model = right_model
        self.warm_start = warm_start
        self.cache: dict[int, SplitScore] = {}
        self.eval_count = 0

    def score(self, tau: int) -> float:
        return self.evaluate(tau).score

    def evaluate(self, tau: int) -> SplitScore:
        hit = self.cache.get(tau)
        if hit is not None:
            return hit
        win = self.window
        if not (win.start_index < tau <= win.end_index):
            raise ValueError(f"split {tau} outside window ({win.start_index}, {win.end_index}]")
        warm = self.warm_start
        if warm and self.cache:
            nearest = min(self.cache, key=lambda seen: abs(seen - tau))
            self.left_model.params = self.cache[nearest].left_params.copy()
            self.right_model.params = self.cache[nearest].right_params.copy()
        left = win.slice(win.start_index, tau - 1)
        right = win.slice(tau, win.end_index)
        self.left_model.fit(left, warm_start=warm)
        self.right_model.fit(right, warm_start=warm)
        value = (self.left_model.avg_log_likelihood(left)
                 + self.right_model.avg_log_likelihood(right))
        record = SplitScore(
            tau=tau,
            score=float(value),
            left_params=self.left_model.params.copy(),
            right_params=self.right_model.params.copy(),
        )
        self.cache[tau] = record
        self.eval_count += 1
        return record


def split_score(window: TimeSeriesWindow, tau: int, left_model: ObservationModel,
                right_model: ObservationModel, warm_start: bool = False) -> SplitScore:
    """Fit the two segment models at split ``tau`` and return the metric.

    Raises TooFewPoints when either segment is below the models' fitting
    minimum.
    """
    min_fit = max(left_model.min_fit_points, right_model.min_fit_points)
    left_len = tau - window.start_index
    right_len = window.end_index - tau + 1
    if left_len < min_fit or right_len < min_fit:
        raise TooFewPoints(
            f"split at {tau} leaves segments of {left_len} and {right_len} points; "
            f"minimum is {min_fit}"
        )
    scorer = SplitScorer(window, left_model, right_model, warm_start=warm_start)
    return scorer.evaluate(tau)


def ternary_argmax(score: Callable[[int], float], lo: int, hi: int,
                   prev: int, tol: int = DEFAULT_TOL) -> int:
    """Argmax of a unimodal integer-indexed sequence on ``[lo, hi]``.

    Follows the saved-candidate recursion: besides the two interior probe
    points, the previous candidate (clamped into the domain) is compared
    against the left probe, and the bracket collapses onto it when it
    still dominates. When the probes come within ``tol`` of each other the
    remaining bracket is scanned linearly, so the returned index is the
    exact argmax of the final bracket. ``score`` should memoize: the
    anchor is re-examined at every level.
    """
    if lo > hi:
        raise EmptyDomain(f"empty search domain [{lo}, {hi}]")
    if lo == hi:
        score(lo)
        return lo
    anchor = min(max(prev, lo), hi)
    left, right = lo, hi
    while True:
        third = (right - left) // 3
        t1 = left + third
        t2 = right - third
        # Once the probes come within tol of each other -- or land on the
        # bracket ends, where the update cannot shrink it -- scan what is left.
        if t2 - t1 < tol or third == 0:
            return max(range(left, right + 1), key=lambda tau: (score(tau), -tau))
        s1 = score(t1)
        s2 = score(t2)
        # Collapse onto the saved candidate only while it dominates both
        # probes. For a unimodal sequence s(anchor) > s(t1) already implies
        # s(t2) <= s(t1), so this is the plain candidate-comparison branch;
        # requiring it to also beat s(t2) keeps transiently bimodal scores
        # from discarding a lobe growing on the right.
        if anchor < t1 and score(anchor) > s1 and score(anchor) >= s2:
            left, right = anchor, t1
            continue
        if s1 < s2:
            left = t1
        elif s1 > s2:
            right = t2
        else:
            left, right = t1, t2


def ternary_search(window: TimeSeriesWindow, prev_candidate: int,
                   left_model: ObservationModel, right_model: ObservationModel,
                   tol: int = DEFAULT_TOL, warm_start: bool = True) -> CandidateState:
    """Locate the best split of ``window`` given the saved candidate.

    The window spans the data since the last detected change. Raises
    EmptyDomain when no admissible split exists (the caller keeps its
    previous candidate).
    """
    min_fit = max(left_model.min_fit_points, right_model.min_fit_points)
    domain = effective_interval(window.end_index, window.start_index,
                                prev_candidate, min_fit)
    if len(domain) == 0:
        raise EmptyDomain(
            f"no admissible split in window [{window.start_index}, {window.end_index}] "
            f"with candidate {prev_candidate}"
        )
    scorer = SplitScorer(window, left_model, right_model, warm_start=warm_start)
    tau = ternary_argmax(scorer.score, domain[0], domain[-1], prev_candidate, tol)
    return CandidateState(
        candidate=tau,
        candidate_score=scorer.score(tau),
        eval_count_last_iter=scorer.eval_count,
    )
