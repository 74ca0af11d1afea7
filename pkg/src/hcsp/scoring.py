"""Discriminative scoring per level: Fisher weights over the
log-variance features and category-conditional Gaussian densities.

The default weighting treats each feature component as its own 1-D
two-class problem: w[K] = (var_neg[K] + var_pos[K])^-1 *
(mean_pos[K] - mean_neg[K]), and the multivariate Gaussian is then fit
over the stacked per-component scores.  A joint mode collapses the
feature vector to a single scalar score through a full-covariance
weight vector instead.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigError, NumericalError, TrainingError

#: Pooled per-component variances are floored at this fraction of the
#: largest pooled variance before inversion, so identical categories
#: yield zero weights instead of an error.
FISHER_VARIANCE_FLOOR = 1e-12

#: Ridge added to fitted density covariances, relative to the mean
#: diagonal (absolute when the samples have zero spread).
DENSITY_REGULARIZATION = 1e-6

_LOG_2PI = math.log(2.0 * math.pi)


def _as_feature_rows(features, name: str) -> np.ndarray:
    F = np.asarray(features, dtype=np.float64)
    if F.ndim == 1:
        F = F[None, :]
    if F.ndim != 2 or F.shape[0] == 0:
        raise ConfigError(f"{name} must be a non-empty set of feature vectors")
    return F


def fit_fisher(features_neg, features_pos) -> np.ndarray:
    """Per-component Fisher weights.

    Parameters
    ----------
    features_neg, features_pos : (n, K) arrays
        Feature vectors of the two categories (rows are observations).

    Returns
    -------
    (K,) ndarray
        w[K] = (mean_pos[K] - mean_neg[K]) / (var_neg[K] + var_pos[K]),
        population variances, proportionality constant fixed to 1.
    """
    Fn = _as_feature_rows(features_neg, "features_neg")
    Fp = _as_feature_rows(features_pos, "features_pos")
    if Fn.shape[1] != Fp.shape[1]:
        raise ConfigError(
            f"component count mismatch: {Fn.shape[1]} vs {Fp.shape[1]}"
        )
    pooled = Fn.var(axis=0) + Fp.var(axis=0)
    top = float(pooled.max()) if pooled.size else 0.0
    floor = FISHER_VARIANCE_FLOOR * (top if top > 0 else 1.0)
    pooled = np.maximum(pooled, floor)
    return (Fp.mean(axis=0) - Fn.mean(axis=0)) / pooled


def fit_fisher_joint(features_neg, features_pos) -> np.ndarray:
    """Joint Fisher direction: (C_neg + C_pos)^-1 (mean_pos - mean_neg)
    with full population covariances, lightly ridged."""
    Fn = _as_feature_rows(features_neg, "features_neg")
    Fp = _as_feature_rows(features_pos, "features_pos")
    if Fn.shape[1] != Fp.shape[1]:
        raise ConfigError(
            f"component count mismatch: {Fn.shape[1]} vs {Fp.shape[1]}"
        )
    dim = Fn.shape[1]

    def pop_cov(F):
        Z = F - F.mean(axis=0)
        return (Z.T @ Z) / F.shape[0]

    pooled = pop_cov(Fn) + pop_cov(Fp)
    reg = float(np.mean(np.diag(pooled)))
    pooled = pooled + DENSITY_REGULARIZATION * (reg if reg > 0 else 1.0) * np.eye(dim)
    return np.linalg.solve(pooled, Fp.mean(axis=0) - Fn.mean(axis=0))


def score(weights, features) -> np.ndarray:
    """Componentwise Fisher scores F[K] = w[K] * f[K]."""
    w = np.asarray(weights, dtype=np.float64)
    f = np.asarray(features, dtype=np.float64)
    if w.shape != f.shape:
        raise ConfigError(f"weight/feature shape mismatch: {w.shape} vs {f.shape}")
    return w * f


def score_joint(weights, features) -> np.ndarray:
    """Scalar joint score as a length-1 vector."""
    w = np.asarray(weights, dtype=np.float64)
    f = np.asarray(features, dtype=np.float64)
    if w.shape != f.shape:
        raise ConfigError(f"weight/feature shape mismatch: {w.shape} vs {f.shape}")
    return np.atleast_1d(w @ f)


@dataclass(frozen=True)
class GaussianDensity:
    """Multivariate normal with a cached Cholesky factor."""

    mean: np.ndarray
    covariance: np.ndarray
    chol_lower: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=np.float64))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ConfigError(
                f"density mean/covariance shapes inconsistent: {mean.shape} vs {cov.shape}"
            )
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"density covariance not positive definite: {exc}") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "chol_lower", chol)

    @property
    def dim(self) -> int:
        return self.mean.size


def fit_density(scores) -> GaussianDensity:
    """Fit a Gaussian to score vectors.

    Sample mean and sample covariance (n-1 normalization), with
    DENSITY_REGULARIZATION * mean(diagonal) added to the diagonal
    (falling back to an absolute 1e-6 ridge for zero-spread samples).
    Needs at least 2 samples.
    """
    S = np.asarray(scores, dtype=np.float64)
    if S.ndim == 1:
        S = S[:, None]
    if S.ndim != 2:
        raise ConfigError(f"scores must stack into a 2-D array, got shape {S.shape}")
    n, d = S.shape
    if n < 2:
        raise TrainingError(f"density fit needs at least 2 score vectors, got {n}")
    mean = S.mean(axis=0)
    cov = np.atleast_2d(np.cov(S, rowvar=False, ddof=1))
    reg = float(np.mean(np.diag(cov)))
    cov = cov + DENSITY_REGULARIZATION * (reg if reg > 0 else 1.0) * np.eye(d)
    return GaussianDensity(mean=mean, covariance=cov)


def log_likelihood(density: GaussianDensity, score_vector) -> float:
    """Exact multivariate normal log-density at one score vector."""
    F = np.atleast_1d(np.asarray(score_vector, dtype=np.float64))
    if F.shape != density.mean.shape:
        raise ConfigError(
            f"score dimension {F.shape} does not match density dimension "
            f"{density.mean.shape}"
        )
    L = density.chol_lower
    z = solve_triangular(L, F - density.mean, lower=True)
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    return float(-0.5 * (density.dim * _LOG_2PI + logdet + z @ z))


def log_likelihoods(density: GaussianDensity, score_rows) -> np.ndarray:
    """Vectorized ``log_likelihood`` over rows of an (n, d) array."""
    S = np.asarray(score_rows, dtype=np.float64)
    if S.ndim == 1:
        S = S[:, None]
    if S.shape[1] != density.dim:
        raise ConfigError(
            f"score dimension {S.shape[1]} does not match density dimension {density.dim}"
        )
    L = density.chol_lower
    Z = solve_triangular(L, (S - density.mean).T, lower=True)
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    return -0.5 * (density.dim * _LOG_2PI + logdet + np.einsum("dn,dn->n", Z, Z))
