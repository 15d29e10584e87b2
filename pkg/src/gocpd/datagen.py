"""Seeded synthetic time series with piecewise-constant GP hyperparameters.

A regime script lists segment boundaries and, for one chosen
hyperparameter, a multiplicative factor per segment. Each segment is an
independent draw from a GP with the scripted hyperparameters on a
unit-spaced input grid, so consecutive segments are statistically
independent. Also provides the 101-point mean-step example stream and the
standardize/downsample preprocessing used before detection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroVariance
from .models import Kernel, ModelParams, chol_with_jitter
from .window import TimeSeriesWindow

VARIABLE_PARAMS = ("lengthscale", "output_scale", "mean", "noise_std")

# Segment boundary grid shared by the bundled 1000-point scripts.
DEFAULT_CHANGE_LOCATIONS = [0, 60, 150, 240, 450, 650, 800, 890]
DEFAULT_BASE = dict(lengthscale=1.0, output_scale=0.5, mean=1.0, noise_std=0.01)

# Per-segment factors for each scripted hyperparameter change.
FACTOR_TABLES = {
    "lengthscale": [10, 2, 10, 1, 5, 1 / 5, 1, 20],
    "output_scale": [1 / 10, 10, 1 / 20, 1, 10, 1 / 10, 3, 1 / 8],
    "mean": [0, 2, -1, 3, 0, -1.4, 3.5, 0.2],
    "noise_std": [1 / 5, 10, 1 / 5, 10, 1 / 5, 5, 1 / 5, 5],
}

MIN_SEGMENT_GAP = 50


@dataclass
class RegimeScript:
    """Recipe for one piecewise-stationary series.

    ``factors`` multiply ``base_params.<vary>`` segment by segment; for the
    mean this is equivalent to absolute levels when the base mean is 1.
    """

    length: int
    change_locations: list[int]
    vary: str
    factors: list[float]
    seed: int = 0
    base_params: ModelParams = field(default_factory=lambda: ModelParams(
        mean=[DEFAULT_BASE["mean"]],
        noise_std=DEFAULT_BASE["noise_std"],
        lengthscale=DEFAULT_BASE["lengthscale"],
        output_scale=DEFAULT_BASE["output_scale"],
        kernel=Kernel.RBF,
    ))

    def __post_init__(self):
        if self.vary not in VARIABLE_PARAMS:
            raise ValueError(f"vary must be one of {VARIABLE_PARAMS}, got {self.vary!r}")
        locs = list(self.change_locations)
        if not locs or locs[0] != 0:
            raise ValueError("change_locations must start at 0")
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError("change_locations must be strictly increasing")
        if any(b - a < MIN_SEGMENT_GAP for a, b in zip(locs, locs[1:])):
            raise ValueError(f"change points must be at least {MIN_SEGMENT_GAP} apart")
        if self.length <= locs[-1]:
            raise ValueError("length must exceed the last change location")
        if len(self.factors) != len(locs):
            raise ValueError(
                f"{len(locs)} segments but {len(self.factors)} factors"
            )

    def segment_bounds(self) -> list[tuple[int, int]]:
        """Half-open (start, stop) index pairs covering 0..length."""
        starts = list(self.change_locations)
        stops = starts[1:] + [self.length]
        return list(zip(starts, stops))

    def interior_changes(self) -> list[int]:
        """Ground-truth change locations (the leading 0 is not a change)."""
        return list(self.change_locations[1:])

    def segment_params(self, index: int) -> ModelParams:
        p = self.base_params.copy()
        factor = self.factors[index]
        if self.vary == "mean":
            p.mean = p.mean * factor
        else:
            setattr(p, self.vary, getattr(p, self.vary) * factor)
        return p


def standard_script(vary: str, seed: int = 0, length: int = 1000) -> RegimeScript:
    """The bundled 1000-point script varying one hyperparameter."""
    return RegimeScript(
        length=length,
        change_locations=list(DEFAULT_CHANGE_LOCATIONS),
        vary=vary,
        factors=list(FACTOR_TABLES[vary]),
        seed=seed,
    )


def sample_piecewise_gp(script: RegimeScript) -> tuple[TimeSeriesWindow, list[int]]:
    """Draw the scripted series; returns the window and true change locations.

    Each segment is an independent GP sample: outputs are drawn from
    ``N(mean, K + noise_std^2 I)`` with the segment's hyperparameters
    evaluated on the segment's own unit grid.
    """
    rng = np.random.default_rng(script.seed)
    pieces = []
    for index, (start, stop) in enumerate(script.segment_bounds()):
        params = script.segment_params(index)
        n = stop - start
        x = np.arange(n, dtype=float)[:, None]
        if params.kernel == Kernel.DIRAC_DELTA:
            gram = np.eye(n)
        else:
            sq = (x - x.T) ** 2
            gram = params.output_scale**2 * np.exp(-0.5 * sq / params.lengthscale**2)
        cov = gram + params.noise_std**2 * np.eye(n)
        lower = chol_with_jitter(cov)
        pieces.append(params.mean[0] + lower @ rng.standard_normal(n))
    y = np.concatenate(pieces)
    t = np.arange(script.length, dtype=float)[:, None]
    return TimeSeriesWindow(t, y, start_index=0), script.interior_changes()


def step_example(seed: int = 0) -> TimeSeriesWindow:
    """Seeded 101-point stream with a unit mean step at t = 50.

    The first 50 points are ``N(0, 0.1^2)`` and points 50..100 are
    ``N(1, 0.1^2)``.
    """
    rng = np.random.default_rng(seed)
    y = np.concatenate([
        rng.normal(0.0, 0.1, size=50),
        rng.normal(1.0, 0.1, size=51),
    ])
    t = np.arange(101, dtype=float)[:, None]
    return TimeSeriesWindow(t, y, start_index=0)


def standardize(window: TimeSeriesWindow) -> tuple[TimeSeriesWindow, list[tuple[float, float]]]:
    """Scale each channel to zero mean and unit standard deviation.

    Returns the transformed window and the per-channel ``(mean, std)``
    pairs needed to invert the transform. Raises ZeroVariance for a
    constant channel.
    """
    y = window.outputs
    transform = []
    cols = []
    for c in range(window.channel_count):
        mu = float(y[:, c].mean())
        sd = float(y[:, c].std())
        if sd <= 0.0:
            raise ZeroVariance(f"channel {c} has zero variance")
        transform.append((mu, sd))
        cols.append((y[:, c] - mu) / sd)
    out = TimeSeriesWindow(window.inputs.copy(), np.column_stack(cols),
                           start_index=window.start_index)
    return out, transform


def downsample(window: TimeSeriesWindow, rate: int) -> TimeSeriesWindow:
    """Keep every ``rate``-th sample.

    The result is a new contiguous stream (indices 0, 1, ...) whose inputs
    still carry the original sampling positions, so original timestamps
    remain recoverable through the ``x0 = t`` convention.
    """
    if rate < 1:
        raise ValueError(f"rate must be >= 1, got {rate}")
    if rate == 1:
        return window
    return TimeSeriesWindow(window.inputs[::rate], window.outputs[::rate],
                            start_index=window.start_index)
