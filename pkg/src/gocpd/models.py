"""Gaussian observation models.

Two model families share one interface so the search and detection layers
stay model-agnostic:

* ``IidGaussianModel`` -- independent ``N(mu_c, sigma_n^2)`` per channel,
  with closed-form maximum-likelihood fitting.
* ``GaussianProcessModel`` -- a GP per channel with a shared kernel (RBF or
  Dirac-delta) and per-channel constant mean; channels are modeled as
  independent outputs, so joint covariances are block-diagonal.

Every model exposes:

* ``fit(window, warm_start=...)`` -- maximum-likelihood parameter fitting;
* ``log_likelihood(window)`` -- exact Gaussian (marginal) log-density;
* ``avg_log_likelihood(window)`` -- log-likelihood divided by window length;
* ``posterior(query_inputs, train=...)`` -- predictive mean and covariance,
  either the marginal under the fitted parameters (``train=None``) or the
  conditional Gaussian given a training window;
* ``mahalanobis(window)`` / ``modified_mahalanobis(window)`` -- the distance
  ``sqrt(r^T Sigma^{-1} r)`` of the observations from the predictive mean,
  and the length-corrected variant ``d^(2/n)``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import NonPositiveDefinite, TooFewPoints
from .window import TimeSeriesWindow

LOG_2PI = math.log(2.0 * math.pi)

# Diagonal jitter ladder applied when a Gram matrix fails to factorize.
JITTER_INITIAL = 1e-8
JITTER_MAX = 1e-4

# Stability bounds for log-parameterized hyperparameters during fitting.
_NOISE_FLOOR = 1e-6
_LOG_BOUNDS = {
    "lengthscale": (math.log(1e-3), math.log(1e5)),
    "output_scale": (math.log(1e-6), math.log(1e5)),
    "noise_std": (math.log(_NOISE_FLOOR), math.log(1e5)),
}


class Kernel(str, Enum):
    """Covariance function kinds for the GP family."""

    RBF = "rbf"
    DIRAC_DELTA = "dirac"


@dataclass
class ModelParams:
    """Hyperparameters of a Gaussian observation model.

    ``lengthscale`` and ``output_scale`` are ignored by the Dirac-delta
    kernel, whose covariance is the indicator ``K(x, x') = 1 if x == x'``.
    ``mean`` holds one constant per channel.
    """

    mean: np.ndarray
    noise_std: float
    lengthscale: float = 1.0
    output_scale: float = 1.0
    kernel: Kernel | None = None

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if self.lengthscale <= 0:
            raise ValueError(f"lengthscale must be > 0, got {self.lengthscale}")
        if self.output_scale <= 0:
            raise ValueError(f"output_scale must be > 0, got {self.output_scale}")
        if self.noise_std <= 0:
            raise ValueError(f"noise_std must be > 0, got {self.noise_std}")

    @property
    def channel_count(self) -> int:
        return len(self.mean)

    def copy(self) -> "ModelParams":
        return ModelParams(
            mean=self.mean.copy(),
            noise_std=self.noise_std,
            lengthscale=self.lengthscale,
            output_scale=self.output_scale,
            kernel=self.kernel,
        )

    def equals(self, other: "ModelParams") -> bool:
        return (
            self.kernel == other.kernel
            and self.noise_std == other.noise_std
            and self.lengthscale == other.lengthscale
            and self.output_scale == other.output_scale
            and np.array_equal(self.mean, other.mean)
        )


@dataclass
class PosteriorSummary:
    """Predictive mean and covariance over flattened outputs.

    Outputs are flattened channel-major: all timestamps of channel 0, then
    channel 1, and so on. The covariance is block-diagonal across channels.
    """

    mean: np.ndarray
    cov: np.ndarray


def chol_with_jitter(mat: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter on failure.

    Jitter starts at ``JITTER_INITIAL`` and doubles until ``JITTER_MAX``;
    past that the matrix is declared not positive definite.
    """
    try:
        return cholesky(mat, lower=True)
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(len(mat))
    eps = JITTER_INITIAL
    while eps <= JITTER_MAX:
        try:
            return cholesky(mat + eps * eye, lower=True)
        except np.linalg.LinAlgError:
            eps *= 2.0
    raise NonPositiveDefinite(
        f"matrix of size {len(mat)} not positive definite after jitter {JITTER_MAX}"
    )


def _mvn_logpdf_chol(residual: np.ndarray, chol_lower: np.ndarray) -> float:
    z = solve_triangular(chol_lower, residual, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(chol_lower)))
    return -0.5 * (z @ z + logdet + len(residual) * LOG_2PI)


class ObservationModel:
    """Base class: parameter bookkeeping plus the shared distance metrics.

    Concrete families implement ``fit``, ``log_likelihood`` and
    ``posterior``. Instances are single-writer: do not fit and predict
    concurrently on the same object.
    """

    def __init__(self, prior_params: ModelParams, min_fit_points: int = 3,
                 role: str | None = None):
        self.prior_params = prior_params.copy()
        self.params = prior_params.copy()
        self.min_fit_points = int(min_fit_points)
        self.role = role
        self.fitted_span: tuple[int, int] | None = None

    def reset(self) -> None:
        """Restore parameters to the priors, exactly."""
        self.params = self.prior_params.copy()
        self.fitted_span = None

    def clone(self) -> "ObservationModel":
        return copy.deepcopy(self)

    @property
    def channel_count(self) -> int:
        return self.params.channel_count

    def _check_window(self, window: TimeSeriesWindow) -> None:
        if window.channel_count != self.channel_count:
            raise ValueError(
                f"window has {window.channel_count} channels, model expects "
                f"{self.channel_count}"
            )

    def _check_fit_size(self, window: TimeSeriesWindow) -> None:
        if len(window) < self.min_fit_points:
            raise TooFewPoints(
                f"window of {len(window)} points is below the fitting minimum "
                f"of {self.min_fit_points}"
            )

    # -- interface implemented by families ---------------------------------

    def fit(self, window: TimeSeriesWindow, warm_start: bool = False) -> "ObservationModel":
        raise NotImplementedError

    def log_likelihood(self, window: TimeSeriesWindow) -> float:
        raise NotImplementedError

    def posterior(self, query_inputs, train: TimeSeriesWindow | None = None) -> PosteriorSummary:
        raise NotImplementedError

    # -- derived quantities -------------------------------------------------

    def avg_log_likelihood(self, window: TimeSeriesWindow) -> float:
        """Log-likelihood divided by the number of observations."""
        return self.log_likelihood(window) / len(window)

    def mahalanobis(self, window: TimeSeriesWindow,
                    train: TimeSeriesWindow | None = None) -> float:
        """Distance of the outputs from the predictive mean.

        ``sqrt(r^T Sigma^{-1} r)`` with ``r`` the flattened residuals and
        ``Sigma`` the predictive covariance on ``window.inputs``. With
        ``train=None`` the predictive is the marginal under the fitted
        parameters; channels contribute independent blocks.
        """
        summary = self.posterior(window.inputs, train=train)
        residual = _flatten_channel_major(window.outputs) - summary.mean
        chol_lower = chol_with_jitter(summary.cov)
        z = solve_triangular(chol_lower, residual, lower=True)
        return float(np.sqrt(z @ z))

    def modified_mahalanobis(self, window: TimeSeriesWindow,
                             train: TimeSeriesWindow | None = None) -> float:
        """Length-corrected distance ``d^(2 / n)``; 0 stays 0."""
        d = self.mahalanobis(window, train=train)
        if d == 0.0:
            return 0.0
        return float(d ** (2.0 / len(window)))


def _flatten_channel_major(outputs: np.ndarray) -> np.ndarray:
    return outputs.T.reshape(-1)


class IidGaussianModel(ObservationModel):
    """Independent Gaussians ``N(mu_c, sigma_n^2)``, one mean per channel.

    ``fix_noise=True`` keeps ``noise_std`` at its prior value during
    fitting, reproducing fixed-variance model families; otherwise the
    noise is the maximum-likelihood standard deviation pooled over
    channels.
    """

    def __init__(self, prior_params: ModelParams, min_fit_points: int = 1,
                 fix_noise: bool = False, fix_mean: bool = False,
                 role: str | None = None):
        super().__init__(prior_params, min_fit_points=min_fit_points, role=role)
        self.fix_noise = fix_noise
        self.fix_mean = fix_mean

    def fit(self, window: TimeSeriesWindow, warm_start: bool = False) -> "IidGaussianModel":
        self._check_window(window)
        self._check_fit_size(window)
        y = window.outputs
        if not self.fix_mean:
            self.params.mean = y.mean(axis=0)
        if not self.fix_noise:
            resid = y - self.params.mean
            self.params.noise_std = max(float(np.sqrt(np.mean(resid**2))), _NOISE_FLOOR)
        self.fitted_span = (window.start_index, window.end_index)
        return self

    def log_likelihood(self, window: TimeSeriesWindow) -> float:
        self._check_window(window)
        resid = window.outputs - self.params.mean
        var = self.params.noise_std**2
        n_total = resid.size
        return float(-0.5 * (np.sum(resid**2) / var + n_total * (math.log(var) + LOG_2PI)))

    def posterior(self, query_inputs, train: TimeSeriesWindow | None = None) -> PosteriorSummary:
        # Conditioning is a no-op for independent observations.
        q = np.asarray(query_inputs, dtype=float)
        if q.ndim == 1:
            q = q[:, None]
        n = len(q)
        mean = np.repeat(self.params.mean, n)
        cov = self.params.noise_std**2 * np.eye(n * self.channel_count)
        return PosteriorSummary(mean=mean, cov=cov)

    def mahalanobis(self, window: TimeSeriesWindow,
                    train: TimeSeriesWindow | None = None) -> float:
        # Diagonal predictive covariance; skip the generic factorization.
        self._check_window(window)
        resid = (window.outputs - self.params.mean) / self.params.noise_std
        return float(np.sqrt(np.sum(resid**2)))


class GaussianProcessModel(ObservationModel):
    """GP regression with a shared kernel over independent channels.

    The RBF kernel is ``output_scale^2 * exp(-|x - x'|^2 / (2 l^2))``; the
    Dirac-delta kernel is the indicator ``1[x == x']`` and ignores both
    ``lengthscale`` and ``output_scale``. Observation noise ``noise_std``
    is added on the diagonal, and all predictive covariances are for the
    noisy outputs.

    Fitting is gradient ascent on the log marginal likelihood in the log
    of each positive hyperparameter, with the per-channel means set to
    their exact conditional optimum each iteration. Iterations are capped
    (``max_fit_iters``) and stop early when the gradient norm falls below
    ``grad_tol``.
    """

    def __init__(self, prior_params: ModelParams, min_fit_points: int = 3,
                 fix_noise: bool = False, fix_mean: bool = False,
                 fix_kernel: bool = False, fix_output_scale: bool = False,
                 max_fit_iters: int = 50, grad_tol: float = 1e-5,
                 role: str | None = None):
        if prior_params.kernel is None:
            raise ValueError("GaussianProcessModel requires a kernel kind")
        super().__init__(prior_params, min_fit_points=min_fit_points, role=role)
        self.fix_noise = fix_noise
        self.fix_mean = fix_mean
        self.fix_kernel = fix_kernel
        self.fix_output_scale = fix_output_scale
        self.max_fit_iters = int(max_fit_iters)
        self.grad_tol = float(grad_tol)

    # -- kernel -------------------------------------------------------------

    def _sqdist(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        diff = a[:, None, :] - b[None, :, :]
        return np.sum(diff**2, axis=-1)

    def _gram(self, a: np.ndarray, b: np.ndarray | None = None,
              params: ModelParams | None = None) -> np.ndarray:
        p = params or self.params
        bb = a if b is None else b
        if p.kernel == Kernel.DIRAC_DELTA:
            return (self._sqdist(a, bb) == 0.0).astype(float)
        sq = self._sqdist(a, bb)
        return p.output_scale**2 * np.exp(-0.5 * sq / p.lengthscale**2)

    def _noisy_gram(self, x: np.ndarray, params: ModelParams | None = None) -> np.ndarray:
        p = params or self.params
        k = self._gram(x, params=p)
        return k + p.noise_std**2 * np.eye(len(x))

    # -- likelihood ----------------------------------------------------------

    def log_likelihood(self, window: TimeSeriesWindow) -> float:
        self._check_window(window)
        return self._log_likelihood_for(window, self.params)

    def _log_likelihood_for(self, window: TimeSeriesWindow, params: ModelParams) -> float:
        ky = self._noisy_gram(window.inputs, params)
        chol_lower = chol_with_jitter(ky)
        total = 0.0
        for c in range(self.channel_count):
            resid = window.outputs[:, c] - params.mean[c]
            total += _mvn_logpdf_chol(resid, chol_lower)
        return float(total)

    # -- fitting -------------------------------------------------------------

    def _active_names(self) -> list[str]:
        names = []
        if not self.fix_kernel and self.params.kernel == Kernel.RBF:
            names.append("lengthscale")
            if not self.fix_output_scale:
                names.append("output_scale")
        if not self.fix_noise:
            names.append("noise_std")
        return names

    def _grad_dmats(self, x: np.ndarray, params: ModelParams) -> dict[str, np.ndarray]:
        """Derivatives of the noisy Gram matrix w.r.t. each active log-parameter."""
        out: dict[str, np.ndarray] = {}
        n = len(x)
        if not self.fix_kernel and params.kernel == Kernel.RBF:
            sq = self._sqdist(x, x)
            ks = params.output_scale**2 * np.exp(-0.5 * sq / params.lengthscale**2)
            out["lengthscale"] = ks * (sq / params.lengthscale**2)
            if not self.fix_output_scale:
                out["output_scale"] = 2.0 * ks
        if not self.fix_noise:
            out["noise_std"] = 2.0 * params.noise_std**2 * np.eye(n)
        return out

    def _objective(self, window: TimeSeriesWindow, params: ModelParams) -> float:
        """Marginal log-likelihood, with the means set to their exact optimum."""
        x, y = window.inputs, window.outputs
        n = len(x)
        ky = self._noisy_gram(x, params)
        chol_lower = chol_with_jitter(ky)
        if not self.fix_mean:
            ones = np.ones(n)
            z_one = solve_triangular(chol_lower, ones, lower=True)
            denom = z_one @ z_one
            params.mean = np.array([
                float(z_one @ solve_triangular(chol_lower, y[:, c], lower=True) / denom)
                for c in range(self.channel_count)
            ])
        logdet = 2.0 * np.sum(np.log(np.diag(chol_lower)))
        total = 0.0
        for c in range(self.channel_count):
            z = solve_triangular(chol_lower, y[:, c] - params.mean[c], lower=True)
            total += -0.5 * (z @ z + logdet + n * LOG_2PI)
        return float(total)

    def _gradient(self, window: TimeSeriesWindow, params: ModelParams,
                  active: list[str]) -> np.ndarray:
        """Gradient of the marginal log-likelihood in the active log-parameters."""
        x, y = window.inputs, window.outputs
        n = len(x)
        ky = self._noisy_gram(x, params)
        chol_lower = chol_with_jitter(ky)
        kinv = cho_solve((chol_lower, True), np.eye(n))
        alphas = [kinv @ (y[:, c] - params.mean[c]) for c in range(self.channel_count)]
        dmats = self._grad_dmats(x, params)
        grad = []
        for name in active:
            dmat = dmats[name]
            quad = sum(a @ dmat @ a for a in alphas)
            trace = float(np.sum(kinv * dmat))  # dmat symmetric
            grad.append(0.5 * quad - 0.5 * self.channel_count * trace)
        return np.array(grad)

    def fit(self, window: TimeSeriesWindow, warm_start: bool = False) -> "GaussianProcessModel":
        self._check_window(window)
        self._check_fit_size(window)
        params = self.params.copy() if warm_start else self.prior_params.copy()

        active = self._active_names()
        objective = self._objective(window, params)
        step = 0.25  # step length in log-parameter units
        for _ in range(self.max_fit_iters):
            if not active:
                break
            gvec = self._gradient(window, params, active)
            gnorm = float(np.linalg.norm(gvec))
            if gnorm < self.grad_tol:
                break
            direction = gvec / gnorm
            # Backtracking on the objective only; gradients are recomputed
            # once per accepted step.
            improved = False
            for _ in range(8):
                trial = params.copy()
                for i, name in enumerate(active):
                    lo, hi = _LOG_BOUNDS[name]
                    new_log = min(max(math.log(getattr(params, name)) + step * direction[i], lo), hi)
                    setattr(trial, name, math.exp(new_log))
                try:
                    trial_objective = self._objective(window, trial)
                except NonPositiveDefinite:
                    step *= 0.5
                    continue
                if trial_objective > objective:
                    params, objective = trial, trial_objective
                    step = min(step * 1.5, 1.0)
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break

        self.params = params
        self.fitted_span = (window.start_index, window.end_index)
        return self

    # -- prediction ----------------------------------------------------------

    def posterior(self, query_inputs, train: TimeSeriesWindow | None = None) -> PosteriorSummary:
        q = np.asarray(query_inputs, dtype=float)
        if q.ndim == 1:
            q = q[:, None]
        n_q = len(q)
        p = self.params

        if train is None:
            block_cov = self._noisy_gram(q)
            block_means = [np.full(n_q, p.mean[c]) for c in range(self.channel_count)]
            block_covs = [block_cov] * self.channel_count
        else:
            self._check_window(train)
            k_tt = self._noisy_gram(train.inputs)
            k_tq = self._gram(train.inputs, q)
            k_qq = self._gram(q)
            chol_lower = chol_with_jitter(k_tt)
            solved = cho_solve((chol_lower, True), k_tq)
            cov = k_qq - k_tq.T @ solved + p.noise_std**2 * np.eye(n_q)
            cov = 0.5 * (cov + cov.T)
            block_covs = [cov] * self.channel_count
            block_means = []
            for c in range(self.channel_count):
                resid = train.outputs[:, c] - p.mean[c]
                block_means.append(p.mean[c] + solved.T @ resid)

        mean = np.concatenate(block_means)
        if self.channel_count == 1:
            full_cov = block_covs[0]
        else:
            from scipy.linalg import block_diag

            full_cov = block_diag(*block_covs)
        return PosteriorSummary(mean=mean, cov=full_cov)
