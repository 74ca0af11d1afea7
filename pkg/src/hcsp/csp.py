"""Common-spatial-patterns core: covariance estimation, the
simultaneous-diagonalization solve, projection, and log-variance-ratio
features.

The solver whitens by the composite covariance (symmetric inverse
square root via its eigendecomposition) and then orthogonally
diagonalizes the whitened first-category covariance.  The result V
satisfies, up to floating point,

    V' (S_neg + S_pos) V = I    and    V' S_neg V = diag(D)

with D descending in [0, 1]; large-D columns concentrate variance in
the negative category, small-D columns in the positive one.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateTrialError, NumericalError

#: Row variances are floored at this fraction of the total variance
#: before the log, so degenerate projections give large-negative
#: features instead of -inf.
VARIANCE_FLOOR_RATIO = 1e-12

#: Ridge added to the composite covariance (relative to trace/m) when
#: it is numerically singular.  Well-conditioned inputs are solved
#: unregularized so the diagonalization constraints hold to ~1e-13.
REGULARIZATION = 1e-6

_SINGULAR_RTOL = 1e-10


def _as_matrix(trial_or_array) -> np.ndarray:
    arr = np.asarray(getattr(trial_or_array, "data", trial_or_array), dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigError(f"expected a 2-D channels x samples array, got shape {arr.shape}")
    return arr


def normalized_covariance(trial_or_array) -> np.ndarray:
    """Trace-normalized second-moment matrix E E' / trace(E E').

    Parameters
    ----------
    trial_or_array : TrialMatrix or (m, n) array
        One trial's (or window's) signal.

    Returns
    -------
    (m, m) ndarray
        Unit-trace symmetric PSD matrix.
    """
    X = _as_matrix(trial_or_array)
    S = X @ X.T
    tr = float(np.trace(S))
    if not tr > 0:
        raise DegenerateTrialError("trial carries no energy (all-zero signal)")
    S /= tr
    return 0.5 * (S + S.T)


def category_covariance(covs, counts) -> np.ndarray:
    """Trial-count-weighted mean of per-class average covariances.

    Parameters
    ----------
    covs : sequence of (m, m) arrays
        Per-class average covariance matrices.
    counts : sequence of int
        Trial count behind each class average; must be positive.
    """
    covs = [np.asarray(c, dtype=np.float64) for c in covs]
    counts = np.asarray(counts, dtype=np.float64)
    if len(covs) == 0 or counts.size == 0:
        raise ConfigError("category_covariance needs at least one class")
    if len(covs) != counts.size:
        raise ConfigError(f"{len(covs)} covariances but {counts.size} counts")
    if np.any(counts <= 0):
        raise ConfigError("trial counts must be positive")
    stack = np.stack(covs)
    if stack.shape[1] != stack.shape[2]:
        raise ConfigError(f"covariances must be square, got shape {stack.shape[1:]}")
    return np.einsum("j,jmn->mn", counts, stack) / counts.sum()


@dataclass(frozen=True)
class SpatialFilter:
    """Solved spatial transform for one binary split.

    V's columns are the spatial filters (descending D); k is the
    per-side retained count used when projecting (first k and last k
    columns, 2k features total).
    """

    V: np.ndarray
    D: np.ndarray
    k: int

    def __post_init__(self):
        V = np.asarray(self.V, dtype=np.float64)
        D = np.asarray(self.D, dtype=np.float64)
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise ConfigError(f"V must be square, got shape {V.shape}")
        if D.shape != (V.shape[0],):
            raise ConfigError(f"D must have one entry per filter, got shape {D.shape}")
        if not (1 <= self.k and 2 * self.k <= V.shape[0]):
            raise ConfigError(f"k must satisfy 1 <= k and 2k <= m={V.shape[0]}, got k={self.k}")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "D", D)

    @property
    def n_channels(self) -> int:
        return self.V.shape[0]


def solve_csp(sigma_neg, sigma_pos, k: int | None = None) -> SpatialFilter:
    """Simultaneously diagonalize a category covariance pair.

    Parameters
    ----------
    sigma_neg, sigma_pos : (m, m) arrays
        Category-average covariances (label -1 and +1).
    k : int, optional
        Per-side retained filter count stored on the result; defaults
        to m // 2 (all filters).

    Returns
    -------
    SpatialFilter
        Deterministic output: columns ordered by descending D, ties
        kept in whitened-basis order, and each column scaled so its
        largest-magnitude entry is positive.

    Raises
    ------
    NumericalError
        If the composite covariance is singular beyond the ridge.
    """
    Sn = np.asarray(sigma_neg, dtype=np.float64)
    Sp = np.asarray(sigma_pos, dtype=np.float64)
    if Sn.shape != Sp.shape or Sn.ndim != 2 or Sn.shape[0] != Sn.shape[1]:
        raise ConfigError(f"covariances must be square and same shape, got {Sn.shape} and {Sp.shape}")
    if not (np.all(np.isfinite(Sn)) and np.all(np.isfinite(Sp))):
        raise ConfigError("covariances must be finite")
    m = Sn.shape[0]

    R = Sn + Sp
    R = 0.5 * (R + R.T)
    s, U = np.linalg.eigh(R)
    scale = float(np.trace(R)) / m
    if not scale > 0:
        raise NumericalError("composite covariance has non-positive trace")
    if s[0] <= _SINGULAR_RTOL * scale:
        s = s + REGULARIZATION * scale
        if s[0] <= 0:
            cond = s[-1] / max(s[0], np.finfo(np.float64).tiny)
            raise NumericalError(
                f"composite covariance singular beyond regularization "
                f"(condition estimate {cond:.3e})"
            )
    # Symmetric inverse square root of the composite covariance.
    W = (U / np.sqrt(s)) @ U.T
    T = W @ (0.5 * (Sn + Sn.T)) @ W
    T = 0.5 * (T + T.T)
    d, Q = np.linalg.eigh(T)

    order = np.argsort(-d, kind="stable")
    d = d[order]
    V = (W @ Q)[:, order]

    # Fixed sign convention: largest-magnitude entry of each column positive.
    peaks = np.abs(V).argmax(axis=0)
    signs = np.sign(V[peaks, np.arange(m)])
    signs[signs == 0] = 1.0
    V = V * signs

    if k is None:
        k = m // 2
    return SpatialFilter(V=V, D=np.clip(d, 0.0, 1.0), k=int(k))


def selected_columns(filt: SpatialFilter, k: int | None = None) -> np.ndarray:
    """The first k and last k columns of V as an (m, 2k) matrix."""
    k = filt.k if k is None else int(k)
    m = filt.n_channels
    if not (1 <= k and 2 * k <= m):
        raise ConfigError(f"k must satisfy 1 <= k and 2k <= m={m}, got k={k}")
    return np.concatenate([filt.V[:, :k], filt.V[:, m - k :]], axis=1)


def project(filt: SpatialFilter, trial_or_array, k: int | None = None) -> np.ndarray:
    """Project a trial through the retained filters.

    Rows 1..k are the k largest-D filters, rows k+1..2k the k
    smallest-D filters; each row is one spatial filter applied
    channel-wise.
    """
    X = _as_matrix(trial_or_array)
    W = selected_columns(filt, k)
    if X.shape[0] != W.shape[0]:
        raise ConfigError(
            f"trial has {X.shape[0]} channels, filter expects {W.shape[0]}"
        )
    return W.T @ X


def csp_features(projected: np.ndarray) -> np.ndarray:
    """Log variance-ratio features of a projected trial.

    f[K] = log(var(row K) / sum_q var(row q)) with population (1/n),
    mean-removed row variances; row variances are floored at
    VARIANCE_FLOOR_RATIO of the total before the log.  exp(f) sums to
    one whenever no row hits the floor.
    """
    P = np.asarray(projected, dtype=np.float64)
    if P.ndim != 2:
        raise ConfigError(f"projected trial must be 2-D, got shape {P.shape}")
    centered = P - P.mean(axis=1, keepdims=True)
    v = np.mean(centered * centered, axis=1)
    total = float(v.sum())
    if not total > 0:
        raise DegenerateTrialError("projection carries no variance")
    v = np.maximum(v, VARIANCE_FLOOR_RATIO * total)
    return np.log(v / total)


def centered_covariance(trial_or_array) -> np.ndarray:
    """Mean-removed population covariance of a window, (m, m).

    The variance of any spatial filter v applied to the window equals
    v' C v, which lets feature extraction run as batched quadratic
    forms (see ``features_from_covariances``).
    """
    X = _as_matrix(trial_or_array)
    Xc = X - X.mean(axis=1, keepdims=True)
    C = (Xc @ Xc.T) / X.shape[1]
    return 0.5 * (C + C.T)


def features_from_covariances(W: np.ndarray, covariances: np.ndarray) -> np.ndarray:
    """Batched log variance-ratio features from window covariances.

    Parameters
    ----------
    W : (m, 2k) array
        Retained filter columns (``selected_columns``).
    covariances : (..., m, m) array
        Mean-removed window covariances (``centered_covariance``).

    Returns
    -------
    (..., 2k) ndarray
        Same values as ``csp_features(W.T @ X)`` per window, batched.
    """
    covariances = np.asarray(covariances, dtype=np.float64)
    v = np.einsum("mk,...mn,nk->...k", W, covariances, W, optimize=True)
    total = v.sum(axis=-1, keepdims=True)
    if not np.all(total > 0):
        raise DegenerateTrialError("projection carries no variance")
    v = np.maximum(v, VARIANCE_FLOOR_RATIO * total)
    return np.log(v / total)
