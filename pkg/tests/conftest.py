"""Shared generators and oracle helpers for the test suite."""

import numpy as np

from gocpd.models import IidGaussianModel, ModelParams
from gocpd.window import TimeSeriesWindow


def fixed_iid(noise=0.001, min_fit=3, mean=0.0):
    """Learned-mean, fixed-variance Gaussian model family."""
    params = ModelParams(mean=[mean], noise_std=noise)
    return IidGaussianModel(params, min_fit_points=min_fit, fix_noise=True)


def mean_shift_window(n, change, delta, noise=0.1, seed=0, start=0):
    rng = np.random.default_rng(seed)
    y = np.concatenate([
        rng.normal(0.0, noise, change - start),
        rng.normal(delta, noise, n - (change - start)),
    ])
    return TimeSeriesWindow(np.arange(start, start + n, dtype=float), y, start_index=start)


def scan_is_unimodal(scan, rel_prominence=0.20):
    """Single-peak check by topographic prominence.

    A secondary local maximum disqualifies the scan when it rises more than
    ``rel_prominence`` of the scan's range above the saddle separating it
    from the global maximum; smaller wiggles are treated as noise.
    """
    scan = np.asarray(scan, dtype=float)
    spread = scan.max() - scan.min()
    if spread == 0:
        return True
    top = int(scan.argmax())
    for i in range(len(scan)):
        if i == top:
            continue
        left_ok = i == 0 or scan[i] > scan[i - 1]
        right_ok = i == len(scan) - 1 or scan[i] > scan[i + 1]
        if not (left_ok and right_ok):
            continue
        a, b = (i, top) if i < top else (top, i)
        saddle = scan[a:b + 1].min()
        if scan[i] - saddle > rel_prominence * spread:
            return False
    return True
