"""Online change point detection loop.

Per arriving batch the detector: (1) waits out the warm-up and any
post-detection quiet period, (2) refits the single-model hypothesis on all
data since the last detected change, (3) updates the candidate change
point with a warm-started ternary search over the effective interval, and
(4) applies a two-segment acceptance test: the modified Mahalanobis
distance of the data before and after the candidate, measured against the
single model, must exceed thresholds ``nu1`` and ``nu2`` while the
candidate stays put. Only after ``k_max`` consecutive such iterations is
the change declared, the pre-change data dropped, and every model reset to
its priors.

The two-segment test is what gives robustness to outliers: an isolated
spike only raises the distance of the segment containing it, so the
conjunction fails and the persistence counter restarts.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, asdict
from typing import Iterable, Iterator

import numpy as np

from .errors import (ConfigError, NonContiguousBatch, NonPositiveDefinite,
                     TooFewPoints)
from .models import (GaussianProcessModel, IidGaussianModel, Kernel,
                     ModelParams, ObservationModel)
from .search import CandidateState, SplitScorer, effective_interval, ternary_argmax
from .window import TimeSeriesWindow

logger = logging.getLogger("gocpd.detector")


@dataclass
class ModelSpec:
    """Observation-model choice and priors, JSON-serializable."""

    family: str = "iid"
    kernel: str = "rbf"
    lengthscale: float = 1.0
    output_scale: float = 1.0
    noise_std: float = 0.1
    mean: list[float] = field(default_factory=lambda: [0.0])
    channels: int = 1
    fix_noise: bool = False
    fix_mean: bool = False
    fix_kernel: bool = False
    fix_output_scale: bool = False
    min_fit_points: int = 3
    max_fit_iters: int = 50

    def __post_init__(self):
        if self.family not in ("iid", "gp"):
            raise ConfigError(f"model.family must be 'iid' or 'gp', got {self.family!r}")
        if self.kernel not in ("rbf", "dirac"):
            raise ConfigError(f"model.kernel must be 'rbf' or 'dirac', got {self.kernel!r}")
        if len(self.mean) != self.channels:
            if len(self.mean) == 1:
                self.mean = list(self.mean) * self.channels
            else:
                raise ConfigError(
                    f"model.mean has {len(self.mean)} entries for {self.channels} channels"
                )
        if self.min_fit_points < 1:
            raise ConfigError("model.min_fit_points must be >= 1")

    def build(self, role: str) -> ObservationModel:
        params = ModelParams(
            mean=np.asarray(self.mean, dtype=float),
            noise_std=self.noise_std,
            lengthscale=self.lengthscale,
            output_scale=self.output_scale,
            kernel=Kernel(self.kernel) if self.family == "gp" else None,
        )
        if self.family == "iid":
            return IidGaussianModel(
                params, min_fit_points=self.min_fit_points,
                fix_noise=self.fix_noise, fix_mean=self.fix_mean, role=role,
            )
        return GaussianProcessModel(
            params, min_fit_points=self.min_fit_points,
            fix_noise=self.fix_noise, fix_mean=self.fix_mean,
            fix_kernel=self.fix_kernel, fix_output_scale=self.fix_output_scale,
            max_fit_iters=self.max_fit_iters, role=role,
        )


@dataclass
class DetectorConfig:
    """Thresholds and timing of the online loop.

    ``nu1``/``nu2`` gate the pre-/post-candidate segment distances;
    ``k_max`` is the persistence requirement; ``t_ini`` the warm-up length
    after a change; ``wait`` the extra quiet period after each detection;
    ``search_tol`` both terminates the ternary search and bounds the
    candidate jitter still counted as "stable".
    """

    nu1: float = 2.0
    nu2: float = 2.0
    k_max: int = 10
    t_ini: int = 30
    wait: int = 80
    search_tol: int = 2
    batch_size: int = 1
    freeze_on_candidate_move: bool = False
    model: ModelSpec = field(default_factory=ModelSpec)

    REQUIRED = ("nu1", "nu2", "k_max", "t_ini", "wait")

    def __post_init__(self):
        if self.nu1 <= 0 or self.nu2 <= 0:
            raise ConfigError("nu1 and nu2 must be > 0")
        if self.k_max < 1:
            raise ConfigError("k_max must be >= 1")
        if self.t_ini < 2 * self.model.min_fit_points:
            raise ConfigError(
                f"t_ini must be >= {2 * self.model.min_fit_points} "
                f"(twice model.min_fit_points)"
            )
        if self.wait < 0:
            raise ConfigError("wait must be >= 0")
        if self.search_tol < 1:
            raise ConfigError("search_tol must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "DetectorConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        missing = [name for name in cls.REQUIRED if name not in doc]
        if missing:
            raise ConfigError(f"config missing required field(s): {', '.join(missing)}")
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"config has unknown field(s): {', '.join(sorted(unknown))}")
        kwargs = dict(doc)
        model_doc = kwargs.pop("model", {})
        if not isinstance(model_doc, dict):
            raise ConfigError("config field 'model' must be an object")
        model_known = {f.name for f in ModelSpec.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        model_unknown = set(model_doc) - model_known
        if model_unknown:
            raise ConfigError(
                f"config.model has unknown field(s): {', '.join(sorted(model_unknown))}"
            )
        try:
            spec = ModelSpec(**model_doc)
            return cls(model=spec, **kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class DetectionEvent:
    """A declared change: where it happened and when it was declared."""

    change_point: int
    declared_at: int
    candidate_score: float
    distance_left: float
    distance_right: float

    def to_dict(self) -> dict:
        return {
            "kind": "detection",
            "change_point": self.change_point,
            "declared_at": self.declared_at,
            "candidate_score": self.candidate_score,
            "distance_left": self.distance_left,
            "distance_right": self.distance_right,
        }


class Detector:
    """Stateful online detector over one stream.

    Instances are strictly sequential: feed contiguous batches through
    ``step``. Separate streams need separate instances.
    """

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.m0 = config.model.build("m0")
        self.m1 = config.model.build("m1")
        self.m2 = config.model.build("m2")
        self.window: TimeSeriesWindow | None = None
        self.last_change: int = 0
        self.candidate: CandidateState | None = None
        self.anchor: int | None = None
        self.wait_remaining: int = 0
        self.events: list[DetectionEvent] = []
        self.instrumentation: list[dict] = []

    # -- stream plumbing -----------------------------------------------------

    def _absorb(self, batch: TimeSeriesWindow) -> None:
        if self.window is None:
            self.window = batch
            self.last_change = batch.start_index
        else:
            if batch.start_index != self.window.end_index + 1:
                raise NonContiguousBatch(
                    f"batch starts at {batch.start_index}, expected "
                    f"{self.window.end_index + 1}"
                )
            self.window = self.window.extend(batch)

    def _record(self, t: int, **fields) -> None:
        base = {
            "kind": "iteration",
            "t": t,
            "interval": t - self.last_change,
            "effective": (t - self.candidate.candidate) if self.candidate else None,
            "candidate": self.candidate.candidate if self.candidate else None,
            "score": self.candidate.candidate_score if self.candidate else None,
            "k": self.candidate.persistence if self.candidate else 0,
            "searched": False,
            "domain_size": 0,
            "evals": 0,
            "criterion": None,
            "stable": None,
            "distance_left": None,
            "distance_right": None,
            "elapsed_s": None,
            "error": None,
        }
        base.update(fields)
        self.instrumentation.append(base)

    # -- one step of the online loop ------------------------------------------

    def step(self, batch: TimeSeriesWindow) -> DetectionEvent | None:
        """Advance the detector by one contiguous batch.

        Returns the DetectionEvent if this batch's iteration declared a
        change, else None. Numerical failures inside the search or the
        criterion degrade to a logged no-op; the stream stays alive.
        """
        started = time.perf_counter()
        self._absorb(batch)
        t = self.window.end_index

        if self.wait_remaining > 0:
            self.wait_remaining = max(0, self.wait_remaining - len(batch))
            self._record(t, elapsed_s=time.perf_counter() - started)
            return None
        if t - self.last_change < self.config.t_ini:
            self._record(t, elapsed_s=time.perf_counter() - started)
            return None

        try:
            event = self._search_and_test(t)
        except (NonPositiveDefinite, TooFewPoints) as exc:
            logger.warning("degraded step at t=%d: %s", t, exc)
            self._record(t, error=str(exc), elapsed_s=time.perf_counter() - started)
            return None
        self.instrumentation[-1]["elapsed_s"] = time.perf_counter() - started
        return event

    def _search_and_test(self, t: int) -> DetectionEvent | None:
        cfg = self.config
        data = self.window
        self.m0.fit(data, warm_start=True)

        prev_candidate = self.candidate.candidate if self.candidate else self.last_change
        prev_k = self.candidate.persistence if self.candidate else 0
        min_fit = max(self.m1.min_fit_points, self.m2.min_fit_points)
        domain = effective_interval(t, self.last_change, prev_candidate, min_fit)

        if len(domain) == 0:
            self._record(t, searched=False)
            return None

        scorer = SplitScorer(data, self.m1, self.m2, warm_start=True)
        tau = ternary_argmax(scorer.score, domain[0], domain[-1],
                             prev_candidate, cfg.search_tol)
        state = CandidateState(
            candidate=tau,
            candidate_score=scorer.score(tau),
            persistence=prev_k,
            eval_count_last_iter=scorer.eval_count,
        )

        satisfied, d_left, d_right = self.criterion(state.candidate)
        had_candidate = self.candidate is not None
        stable = had_candidate and abs(tau - prev_candidate) <= cfg.search_tol
        if stable and self.anchor is not None:
            stable = abs(tau - self.anchor) <= cfg.search_tol

        if satisfied and stable:
            state.persistence = prev_k + 1
            if self.anchor is None:
                self.anchor = tau
        elif not satisfied:
            state.persistence = 0
            self.anchor = None
        else:  # criterion holds but the candidate moved
            state.persistence = prev_k if cfg.freeze_on_candidate_move else 0
            if not cfg.freeze_on_candidate_move:
                self.anchor = None

        self.candidate = state
        self._record(
            t, searched=True, domain_size=len(domain), evals=state.eval_count_last_iter,
            criterion=satisfied, stable=stable, distance_left=d_left,
            distance_right=d_right,
        )

        if state.persistence > cfg.k_max:
            event = DetectionEvent(
                change_point=state.candidate,
                declared_at=t,
                candidate_score=state.candidate_score,
                distance_left=d_left,
                distance_right=d_right,
            )
            self.events.append(event)
            self._reset_after_detection(state.candidate, t)
            return event
        return None

    def criterion(self, candidate: int) -> tuple[bool, float, float]:
        """Two-segment acceptance test against the single-model fit.

        Distances are the modified Mahalanobis of each segment under the
        current single-model parameters; segments are treated
        independently (no cross-segment covariance).
        """
        t = self.window.end_index
        left = self.window.slice(self.last_change, candidate)
        right = self.window.slice(candidate + 1, t)
        d_left = self.m0.modified_mahalanobis(left)
        d_right = self.m0.modified_mahalanobis(right)
        ok = d_left > self.config.nu1 and d_right > self.config.nu2
        return ok, d_left, d_right

    def _reset_after_detection(self, change_point: int, t: int) -> None:
        self.last_change = change_point
        self.window = self.window.slice(change_point, t)
        self.m0.reset()
        self.m1.reset()
        self.m2.reset()
        self.candidate = None
        self.anchor = None
        self.wait_remaining = self.config.wait


def stream_batches(window: TimeSeriesWindow, batch_size: int) -> Iterator[TimeSeriesWindow]:
    """Cut a window into contiguous batches for simulated-online replay."""
    for start in range(window.start_index, window.end_index + 1, batch_size):
        stop = min(start + batch_size - 1, window.end_index)
        yield window.slice(start, stop)


def run_stream(source: Iterable, config: DetectorConfig,
               start_index: int = 0) -> tuple[list[DetectionEvent], list[dict]]:
    """Fold the detector over a stream of ``(x_t, y_t)`` samples.

    ``source`` may also be a TimeSeriesWindow, which is replayed batch by
    batch. Returns all detection events plus the per-iteration
    instrumentation records.
    """
    detector = Detector(config)
    if isinstance(source, TimeSeriesWindow):
        for batch in stream_batches(source, config.batch_size):
            detector.step(batch)
        return detector.events, detector.instrumentation

    xs: list = []
    ys: list = []
    next_start = start_index
    for item in source:
        try:
            x, y = item
        except (TypeError, ValueError) as exc:
            raise ValueError(
                f"stream item at timestamp {next_start + len(xs)} is not an "
                f"(x, y) pair: {item!r}"
            ) from exc
        xs.append(np.atleast_1d(np.asarray(x, dtype=float)))
        ys.append(np.atleast_1d(np.asarray(y, dtype=float)))
        if len(xs) == config.batch_size:
            detector.step(TimeSeriesWindow(np.vstack(xs), np.vstack(ys), next_start))
            next_start += len(xs)
            xs, ys = [], []
    if xs:
        detector.step(TimeSeriesWindow(np.vstack(xs), np.vstack(ys), next_start))
    return detector.events, detector.instrumentation


def grid_search_thresholds(series: TimeSeriesWindow, truth: list[int],
                           base_config: DetectorConfig,
                           nu_grid: Iterable,
                           k_max_grid: Iterable[int] | None = None,
                           train_frac: float = 0.3,
                           tolerance: int = 25) -> DetectorConfig:
    """Tune (nu1, nu2, k_max) on the leading fraction of a labeled series.

    ``nu_grid`` entries are either scalars (symmetric thresholds) or
    ``(nu1, nu2)`` pairs. Each grid point is scored by the F1 of its
    matched detections on the train split; ties prefer stricter (larger)
    thresholds. Returns a new config with the winning values.
    """
    from .metrics import match_detections, rates

    split_at = series.start_index + max(1, int(len(series) * train_frac)) - 1
    train = series.slice(series.start_index, split_at)
    train_truth = [c for c in truth if c <= split_at]

    k_values = list(k_max_grid) if k_max_grid is not None else [base_config.k_max]
    best = None
    for k_max in k_values:
        for nu in nu_grid:
            nu1, nu2 = nu if isinstance(nu, (tuple, list)) else (nu, nu)
            doc = base_config.to_dict()
            doc.update(nu1=nu1, nu2=nu2, k_max=k_max)
            candidate_config = DetectorConfig.from_dict(doc)
            events, _ = run_stream(train, candidate_config)
            detected = [e.change_point for e in events]
            report = match_detections(train_truth, detected, tolerance)
            tpr, ppv, _ = rates(report)
            f1 = 0.0 if (tpr + ppv) == 0 else 2 * tpr * ppv / (tpr + ppv)
            key = (f1, nu1, nu2, k_max)
            if best is None or key > best[0]:
                best = (key, candidate_config)
    return best[1]
