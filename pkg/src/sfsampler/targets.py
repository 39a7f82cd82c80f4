"""Target distribution zoo.

Gaussian mixtures with full covariance structure, the shaped 2-D densities
(ring, funnel, a cross-shaped polynomial potential), and a Bayesian ridge
posterior. Every target exposes an unnormalized potential V (batched over
points), an analytic gradient where available, and the log density ratio
against N(0, beta I) used by the diffusion drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigError, GradientUnavailable
from .numerics import SpdMatrix, log_sum_exp, softmax

WEIGHT_SUM_TOL = 1e-9

_LOG_2PI = np.log(2.0 * np.pi)


def _as_spd(cov, dim=None) -> SpdMatrix:
    """Accept a scalar variance, a diagonal vector, or a full matrix."""
    if isinstance(cov, SpdMatrix):
        return cov
    a = np.asarray(cov, dtype=float)
    if a.ndim == 0:
        if dim is None:
            dim = 1
        a = np.eye(dim) * float(a)
    elif a.ndim == 1:
        a = np.diag(a)
    return SpdMatrix.from_matrix(a)


@dataclass(frozen=True)
class GaussianMixture:
    """A mixture sum_i theta_i N(alpha_i, Sigma_i) with normalized weights."""

    weights: np.ndarray        # (kappa,)
    means: np.ndarray          # (kappa, d)
    covs: tuple                # kappa SpdMatrix instances

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def is_diagonal(self) -> bool:
        return all(c.is_diagonal for c in self.covs)

    def diag_variances(self):
        """(kappa, d) diagonal variances; only valid when is_diagonal."""
        return np.stack([c.diagonal_part for c in self.covs])

    def max_std(self) -> float:
        return float(np.sqrt(max(np.max(c.diagonal_part) for c in self.covs)))

    def component_log_densities(self, x):
        """log N(x; alpha_i, Sigma_i) for each component; x shape (..., d) -> (..., kappa)."""
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        xf = x.reshape(-1, self.dim)
        out = np.empty((xf.shape[0], self.n_components))
        for i, cov in enumerate(self.covs):
            z = solve_triangular(cov.chol, (xf - self.means[i]).T, lower=True)
            out[:, i] = -0.5 * (self.dim * _LOG_2PI + cov.logdet() + np.sum(z * z, axis=0))
        return out.reshape(lead + (self.n_components,))

    def log_density(self, x):
        comp = self.component_log_densities(x) + np.log(self.weights)
        return log_sum_exp(comp, axis=-1)

    def potential(self, x):
        return -self.log_density(x)

    def grad_potential(self, x):
        """grad V = sum_i p_i(x) Sigma_i^{-1} (x - alpha_i) with posterior weights p_i."""
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        xf = x.reshape(-1, self.dim)
        p = softmax(self.component_log_densities(xf) + np.log(self.weights), axis=-1)
        g = np.zeros_like(xf)
        for i, cov in enumerate(self.covs):
            g += p[:, i : i + 1] * cov.solve((xf - self.means[i]).T).T
        return g.reshape(lead + (self.dim,))

    def sample(self, n, gen):
        """n i.i.d. draws from the mixture."""
        idx = gen.choice(self.n_components, size=n, p=self.weights)
        out = np.empty((n, self.dim))
        for i, cov in enumerate(self.covs):
            mask = idx == i
            if np.any(mask):
                out[mask] = cov.sample(self.means[i], gen, int(mask.sum()))
        return out


@dataclass(frozen=True)
class TargetSpec:
    """An unnormalized target density exp(-V) with optional gradient and mixture structure.

    rho > 0 mixes a constant floor into the (unnormalized) density ratio
    against N(0, beta I), which keeps Monte Carlo drift weights away from
    total underflow far in the tails.
    """

    kind: str
    dim: int
    potential: Callable
    grad: Optional[Callable] = None
    mixture: Optional[GaussianMixture] = None
    params: dict = field(default_factory=dict)
    rho: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.rho < 1.0):
            raise ConfigError(f"rho must be in [0, 1), got {self.rho}")

    def log_g_beta(self, beta, x):
        return log_g_beta(self, beta, x)

    def grad_potential(self, x):
        return grad_potential(self, x)


def log_g_beta(target: TargetSpec, beta, x):
    """log of the density ratio of the target against N(0, beta I).

    Computed as -V(x) + ||x||^2 / (2 beta), dropping the x-independent
    normalization; the dropped constant cancels in every drift ratio.
    """
    beta = _check_beta(beta)
    x = np.asarray(x, dtype=float)
    v = target.potential(x)
    base = -v + np.sum(x * x, axis=-1) / (2.0 * beta)
    if target.rho == 0.0:
        return base
    return np.logaddexp(np.log1p(-target.rho) + base, np.log(target.rho))


def grad_potential(target: TargetSpec, x):
    """Analytic gradient of V; raises GradientUnavailable for gradient-free customs."""
    if target.grad is None:
        raise GradientUnavailable(
            f"target kind '{target.kind}' provides no analytic gradient"
        )
    return target.grad(np.asarray(x, dtype=float))


def _check_beta(beta) -> float:
    beta = float(beta)
    if not (beta > 0.0 and np.isfinite(beta)):
        raise ConfigError(f"temperature beta must be positive and finite, got {beta}")
    return beta


def make_gaussian_mixture(weights, means, covs, rho=0.0) -> TargetSpec:
    """Build a Gaussian-mixture target; weights renormalized if off by <= 1e-9."""
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.size == 0:
        raise ConfigError("weights must be a nonempty 1-D sequence")
    if np.any(weights < 0):
        raise ConfigError("weights must be nonnegative")
    total = float(weights.sum())
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise ConfigError(f"weights must sum to 1 within {WEIGHT_SUM_TOL}, got {total}")
    weights = weights / total

    means = np.asarray(means, dtype=float)
    if means.ndim == 1:
        means = means[:, None]
    if means.shape[0] != weights.shape[0]:
        raise ConfigError("means and weights disagree on the component count")
    d = means.shape[1]
    if len(covs) != weights.shape[0]:
        raise ConfigError("covs and weights disagree on the component count")
    spd = tuple(_as_spd(c, dim=d) for c in covs)
    for c in spd:
        if c.dim != d:
            raise ConfigError("covariance dimension does not match the means")

    weights.setflags(write=False)
    means.setflags(write=False)
    gmm = GaussianMixture(weights=weights, means=means, covs=spd)
    return TargetSpec(
        kind="gaussian_mixture",
        dim=d,
        potential=gmm.potential,
        grad=gmm.grad_potential,
        mixture=gmm,
        params={},
        rho=rho,
    )


def make_two_mode_gmm(d, separation=6.0, variance=0.25, weights=(0.5, 0.5), rho=0.0) -> TargetSpec:
    """Symmetric-mean two-component mixture with means +-separation * 1_d."""
    if d < 1:
        raise ConfigError("dimension must be >= 1")
    means = np.stack([-separation * np.ones(d), separation * np.ones(d)])
    covs = [variance * np.eye(d), variance * np.eye(d)]
    spec = make_gaussian_mixture(weights, means, covs, rho=rho)
    params = {
        "d": int(d),
        "separation": float(separation),
        "variance": float(variance),
        "weights": list(map(float, weights)),
    }
    return replace(spec, kind="two_mode_gmm", params=params)


def _make_ring(r0=2.0, sigma=0.2):
    if sigma <= 0:
        raise ConfigError("ring sigma must be positive")
    r0 = float(r0)
    inv = 1.0 / (sigma * sigma)

    def potential(x):
        r = np.sqrt(np.sum(x * x, axis=-1))
        return 0.5 * inv * (r - r0) ** 2

    def grad(x):
        r = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
        safe_r = np.where(r > 0, r, 1.0)
        return np.where(r > 0, inv * (r - r0) * x / safe_r, 0.0)

    return potential, grad


def _make_funnel(alpha=0.6):
    if alpha <= 0:
        raise ConfigError("funnel alpha must be positive")
    alpha = float(alpha)

    def potential(x):
        x1, x2 = x[..., 0], x[..., 1]
        return 0.5 * x1 * x1 + 0.5 * x2 * x2 * np.exp(-2.0 * alpha * x1)

    def grad(x):
        x1, x2 = x[..., 0], x[..., 1]
        e = np.exp(-2.0 * alpha * x1)
        return np.stack([x1 - alpha * x2 * x2 * e, x2 * e], axis=-1)

    return potential, grad


def _make_example64():
    # V(x) = ((x1 x2)^2 + x1^2 + x2^2 - 8 (x1 + x2)) / 2, a cross-shaped density
    def potential(x):
        x1, x2 = x[..., 0], x[..., 1]
        return 0.5 * ((x1 * x2) ** 2 + x1 * x1 + x2 * x2 - 8.0 * (x1 + x2))

    def grad(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack(
            [x1 * x2 * x2 + x1 - 4.0, x1 * x1 * x2 + x2 - 4.0], axis=-1
        )

    return potential, grad


def _make_bayes_ridge(y, sigma1=1.0, sigma2=1.0):
    # posterior of ridge regression with design X = I_d and n = d observations y
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if sigma1 <= 0 or sigma2 <= 0:
        raise ConfigError("sigma1 and sigma2 must be positive")
    a, b = 1.0 / (sigma1 * sigma1), 1.0 / (sigma2 * sigma2)

    def potential(eta):
        return 0.5 * a * np.sum((y - eta) ** 2, axis=-1) + 0.5 * b * np.sum(
            eta * eta, axis=-1
        )

    def grad(eta):
        return a * (eta - y) + b * eta

    return y, potential, grad


BUILTIN_KINDS = ("gaussian_mixture", "two_mode_gmm", "ring", "funnel", "example64", "bayes_ridge")


def make_builtin(kind, rho=0.0, **params) -> TargetSpec:
    """Construct a zoo target by name; see BUILTIN_KINDS."""
    if kind == "gaussian_mixture":
        return make_gaussian_mixture(rho=rho, **params)
    if kind == "two_mode_gmm":
        return make_two_mode_gmm(rho=rho, **params)
    if kind == "ring":
        potential, grad = _make_ring(**params)
        return TargetSpec("ring", 2, potential, grad, params=dict(params), rho=rho)
    if kind == "funnel":
        potential, grad = _make_funnel(**params)
        return TargetSpec("funnel", 2, potential, grad, params=dict(params), rho=rho)
    if kind == "example64":
        potential, grad = _make_example64(**params)
        return TargetSpec("example64", 2, potential, grad, params=dict(params), rho=rho)
    if kind == "bayes_ridge":
        y, potential, grad = _make_bayes_ridge(**params)
        p = dict(params)
        p["y"] = y.tolist()
        return TargetSpec("bayes_ridge", y.shape[0], potential, grad, params=p, rho=rho)
    raise ConfigError(f"unknown target kind '{kind}' (known: {', '.join(BUILTIN_KINDS)})")


def make_custom(potential, dim, grad=None, rho=0.0) -> TargetSpec:
    """Wrap a user potential (batched over the last axis) as a target."""
    return TargetSpec("custom_potential", int(dim), potential, grad, rho=rho)


def target_from_dict(doc: dict) -> TargetSpec:
    """Build a target from its JSON document form."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("target document must be an object with a 'kind' field")
    doc = dict(doc)
    kind = doc.pop("kind")
    if kind == "gaussian_mixture":
        for key in ("weights", "means", "covs"):
            if key not in doc:
                raise ConfigError(f"gaussian_mixture target is missing '{key}'")
    try:
        return make_builtin(kind, **doc)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for target kind '{kind}': {exc}") from exc


def target_to_dict(target: TargetSpec) -> dict:
    """Serialize a built-in target to its JSON document form."""
    if target.kind == "gaussian_mixture":
        gmm = target.mixture
        doc = {
            "kind": "gaussian_mixture",
            "weights": gmm.weights.tolist(),
            "means": gmm.means.tolist(),
            "covs": [c.entries.tolist() for c in gmm.covs],
        }
    elif target.kind in ("two_mode_gmm", "ring", "funnel", "example64", "bayes_ridge"):
        doc = {"kind": target.kind, **target.params}
    else:
        raise ConfigError(f"target kind '{target.kind}' is not serializable")
    if target.rho:
        doc["rho"] = target.rho
    return doc
