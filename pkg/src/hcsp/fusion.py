"""Posterior fusion over the gesture tree and the sequential decision
policy.

Each level contributes a pair of category log-likelihoods that add
across evidence intervals (conditional independence across the
evidence plate).  A leaf's unnormalized log mass chains the three level
terms with the inter-level priors,

    ll_1(l1) + ll_2(l2) + ll_3(l3)
        + log P(l1) + log P(l2 | l1) + log P(l3 | l2),

and the 8-leaf PMF is normalized in log space with max subtraction so
products of many densities cannot underflow.  Decisions are sequential
MAP: commit at the first interval whose maximum posterior clears the
confidence threshold, otherwise fall back to the interval whose
maximum posterior was largest.
"""

from dataclasses import dataclass

import numpy as np

from .dataio import TrialMatrix
from .errors import ConfigError, NumericalError
from .hierarchy import N_GESTURES, GestureClass
from .preprocess import samples_per_interval

#: (8, 3) table of axis bits per leaf: 0 encodes category -1, 1 encodes +1.
LEAF_BITS = np.array(
    [[(i >> 2) & 1, (i >> 1) & 1, i & 1] for i in range(N_GESTURES)], dtype=np.intp
)


def _check_pmf_rows(arr: np.ndarray, name: str) -> np.ndarray:
    if np.any(arr < 0):
        raise ConfigError(f"{name} entries must be non-negative")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-12):
        raise ConfigError(f"{name} rows must sum to 1 within 1e-12, got sums {sums}")
    return arr


@dataclass(frozen=True)
class InterLevelPrior:
    """Chained priors over the tree: P(L1), P(L2|L1), P(L3|L2).

    Index 0 always refers to category -1 and index 1 to +1; conditional
    tables are row-stochastic with rows indexed by the parent sign.
    """

    p_l1: np.ndarray
    p_l2_given_l1: np.ndarray
    p_l3_given_l2: np.ndarray

    def __post_init__(self):
        p1 = np.asarray(self.p_l1, dtype=np.float64)
        p2 = np.asarray(self.p_l2_given_l1, dtype=np.float64)
        p3 = np.asarray(self.p_l3_given_l2, dtype=np.float64)
        if p1.shape != (2,) or p2.shape != (2, 2) or p3.shape != (2, 2):
            raise ConfigError(
                "prior shapes must be (2,), (2, 2), (2, 2); got "
                f"{p1.shape}, {p2.shape}, {p3.shape}"
            )
        _check_pmf_rows(p1, "p_l1")
        _check_pmf_rows(p2, "p_l2_given_l1")
        _check_pmf_rows(p3, "p_l3_given_l2")
        object.__setattr__(self, "p_l1", p1)
        object.__setattr__(self, "p_l2_given_l1", p2)
        object.__setattr__(self, "p_l3_given_l2", p3)

    @classmethod
    def uniform(cls) -> "InterLevelPrior":
        half = np.full(2, 0.5)
        table = np.full((2, 2), 0.5)
        return cls(p_l1=half, p_l2_given_l1=table, p_l3_given_l2=table)

    @classmethod
    def from_dict(cls, doc: dict) -> "InterLevelPrior":
        try:
            return cls(
                p_l1=doc["p_l1"],
                p_l2_given_l1=doc["p_l2_given_l1"],
                p_l3_given_l2=doc["p_l3_given_l2"],
            )
        except KeyError as exc:
            raise ConfigError(f"prior table is missing field {exc}") from None

    def to_dict(self) -> dict:
        return {
            "p_l1": self.p_l1.tolist(),
            "p_l2_given_l1": self.p_l2_given_l1.tolist(),
            "p_l3_given_l2": self.p_l3_given_l2.tolist(),
        }


def _leaf_log_prior(prior: InterLevelPrior) -> np.ndarray:
    b = LEAF_BITS
    with np.errstate(divide="ignore"):
        lp1 = np.log(prior.p_l1)
        lp2 = np.log(prior.p_l2_given_l1)
        lp3 = np.log(prior.p_l3_given_l2)
    return lp1[b[:, 0]] + lp2[b[:, 0], b[:, 1]] + lp3[b[:, 1], b[:, 2]]


def _normalize_log_mass(log_mass: np.ndarray) -> np.ndarray:
    top = log_mass.max()
    if not np.isfinite(top):
        raise NumericalError("posterior has no support (all leaves at zero mass)")
    p = np.exp(log_mass - top)
    return p / p.sum()


def posterior(loglik_l1, loglik_l2, loglik_l3, prior: InterLevelPrior) -> np.ndarray:
    """PMF over the 8 gestures from per-level log-likelihood pairs.

    Parameters
    ----------
    loglik_l1, loglik_l2, loglik_l3 : pairs of floats
        (log P(evidence | l = -1), log P(evidence | l = +1)) per level.
    prior : InterLevelPrior

    Returns
    -------
    (8,) ndarray indexed by leaf, non-negative, summing to 1 within
    1e-12.  Leaves gated off by a zero conditional prior get exactly
    zero mass.
    """
    lls = np.asarray([loglik_l1, loglik_l2, loglik_l3], dtype=np.float64)
    if lls.shape != (3, 2) or not np.all(np.isfinite(lls)):
        raise ConfigError("log-likelihoods must be three finite pairs")
    b = LEAF_BITS
    leaf_lls = lls[0, b[:, 0]] + lls[1, b[:, 1]] + lls[2, b[:, 2]]
    return _normalize_log_mass(leaf_lls + _leaf_log_prior(prior))


def level_log_likelihoods(clf, windows) -> tuple[float, float]:
    """Category log-likelihoods of an evidence-window sequence.

    Sums per-window Gaussian log-likelihoods of the Fisher scores under
    each category density (windows are conditionally independent given
    the category).
    """
    windows = list(windows)
    if not windows:
        raise ConfigError("level_log_likelihoods needs at least one window")
    from .csp import centered_covariance

    moments = np.stack([centered_covariance(w.data) for w in windows])
    pairs = clf.log_likelihood_pairs(moments)
    return float(pairs[:, 0].sum()), float(pairs[:, 1].sum())


def leaf_log_likelihoods(model, moments: np.ndarray) -> np.ndarray:
    """(n_windows, 8) log-likelihood contributions per window and leaf.

    For the pooled topology each level has one classifier whose pair is
    broadcast to the leaves through the leaf's axis bit.  For the
    per-branch topology, levels 2 and 3 read the classifier on the
    branch selected by the leaf's higher-level signs.
    """
    moments = np.asarray(moments, dtype=np.float64)
    if moments.ndim == 2:
        moments = moments[None]
    n = moments.shape[0]
    b = LEAF_BITS
    out = np.zeros((n, N_GESTURES))
    if model.topology == "pooled":
        for level in (1, 2, 3):
            pairs = model.classifier_for(level, ()).log_likelihood_pairs(moments)
            out += pairs[:, b[:, level - 1]]
    else:
        pairs1 = model.classifier_for(1, ()).log_likelihood_pairs(moments)
        pairs2 = {
            s1: model.classifier_for(2, (s1,)).log_likelihood_pairs(moments)
            for s1 in (-1, 1)
        }
        pairs3 = {
            (s1, s2): model.classifier_for(3, (s1, s2)).log_likelihood_pairs(moments)
            for s1 in (-1, 1)
            for s2 in (-1, 1)
        }
        out += pairs1[:, b[:, 0]]
        for leaf in range(N_GESTURES):
            l1, l2 = 2 * int(b[leaf, 0]) - 1, 2 * int(b[leaf, 1]) - 1
            out[:, leaf] += (
                pairs2[l1][:, b[leaf, 1]] + pairs3[(l1, l2)][:, b[leaf, 2]]
            )
    return out


def decision_policy(max_posteriors, threshold: float) -> tuple[int, bool]:
    """Pick the deciding interval from a stream of maximum posteriors.

    Returns (0-based interval index, threshold_met).  The first
    interval whose maximum clears the threshold wins; if none does, the
    interval with the largest maximum wins (earliest on ties).
    """
    maxima = [float(x) for x in max_posteriors]
    if not maxima:
        raise ConfigError("decision_policy needs at least one interval")
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError(f"threshold must be in [0, 1], got {threshold}")
    for i, top in enumerate(maxima):
        if top >= threshold:
            return i, True
    return int(np.argmax(maxima)), False


@dataclass(frozen=True)
class EpochDecision:
    """One epoch's outcome: the MAP gesture, the PMF it came from, the
    interval whose posterior backed the decision, and whether the
    confidence threshold was met."""

    gesture: GestureClass
    pmf: np.ndarray
    intervals_used: int
    threshold_met: bool

    def to_dict(self, epoch: int = 0) -> dict:
        return {
            "epoch": int(epoch),
            "gesture": self.gesture.to_names(),
            "gesture_index": self.gesture.leaf_index,
            "pmf": [float(p) for p in self.pmf],
            "intervals_used": self.intervals_used,
            "threshold_met": self.threshold_met,
        }


def interval_posteriors(
    model, interval_moments: np.ndarray, prior: InterLevelPrior
) -> list[np.ndarray]:
    """Per-interval posteriors from precomputed window covariances.

    ``interval_moments[t]`` is interval t+1's centered window
    covariance: per-interval evidence under the subwindow scheme
    (likelihoods accumulate across intervals), or the prefix window of
    length t+1 under the growing scheme (each interval re-reads the
    whole prefix as one term).
    """
    log_prior = _leaf_log_prior(prior)
    lls = leaf_log_likelihoods(model, interval_moments)
    if model.evidence_mode == "subwindows":
        lls = np.cumsum(lls, axis=0)
    return [_normalize_log_mass(row + log_prior) for row in lls]


def _decide_from_moments(
    model, interval_moments: np.ndarray, prior: InterLevelPrior, threshold: float
) -> EpochDecision:
    pmfs = interval_posteriors(model, interval_moments, prior)
    idx, met = decision_policy([p.max() for p in pmfs], threshold)
    pmf = pmfs[idx]
    return EpochDecision(
        gesture=GestureClass.from_index(int(np.argmax(pmf))),
        pmf=pmf,
        intervals_used=idx + 1,
        threshold_met=met,
    )


def decide(
    trial: TrialMatrix,
    model,
    prior: InterLevelPrior,
    threshold: float,
    n_intervals: int,
) -> EpochDecision:
    """Sequential MAP decision over a filtered trial.

    At each interval t = 1..N (N capped by the evidence the trial
    provides) the posterior from intervals 1..t is formed; the decision
    commits at the first t whose maximum posterior reaches the
    threshold, else at the interval whose maximum was largest.  Argmax
    ties break toward the lowest leaf index.
    """
    if n_intervals < 1:
        raise ConfigError(f"n_intervals must be >= 1, got {n_intervals}")
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError(f"threshold must be in [0, 1], got {threshold}")
    from .csp import centered_covariance
    from .preprocess import evidence_windows, growing_window

    w = samples_per_interval(trial.sample_rate_hz)
    available = trial.n_samples // w
    n_use = min(n_intervals, available)
    if n_use < 1:
        raise ConfigError(
            f"trial provides no full evidence interval: {trial.n_samples} samples "
            f"< {w} (1 s at {trial.sample_rate_hz} Hz)"
        )
    if model.evidence_mode == "subwindows":
        windows = evidence_windows(trial, n_use)
    else:
        windows = [growing_window(trial, t) for t in range(1, n_use + 1)]
    moments = np.stack([centered_covariance(win.data) for win in windows])
    return _decide_from_moments(model, moments, prior, threshold)
