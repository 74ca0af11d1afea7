"""Trained classifier bundles and the training pipeline.

A bundle holds one LevelClassifier per (level, branch): the solved
spatial filter, the Fisher weights, and the two category score
densities.  Training runs band-pass filtering, evidence windowing,
covariance accumulation, the per-level solve, and density fits; the
same precomputed per-window covariances drive both full training and
the leave-one-out folds (which only exclude one trial from the
averages).
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import scoring
from .config import RunConfig
from .csp import (
    SpatialFilter,
    centered_covariance,
    features_from_covariances,
    normalized_covariance,
    selected_columns,
    solve_csp,
)
from .dataio import Dataset
from .errors import (
    ConfigError,
    DataIOError,
    ModelError,
    SchemaError,
    TrainingError,
)
from .hierarchy import AXIS_NAMES, CategoryScope, check_level
from .preprocess import (
    apply_filter,
    design_bandpass,
    evidence_windows,
    growing_window,
    samples_per_interval,
)
from .scoring import GaussianDensity

MODEL_FORMAT_VERSION = 1

BranchKey = tuple[int, ...]


@dataclass(frozen=True)
class LevelClassifier:
    """One binary category classifier: spatial filter + Fisher weights
    + category-conditional score densities."""

    level: int
    branch: BranchKey
    spatial_filter: SpatialFilter
    k: int
    lda_mode: str
    weights: np.ndarray
    density_neg: GaussianDensity
    density_pos: GaussianDensity

    def __post_init__(self):
        check_level(self.level)
        object.__setattr__(self, "branch", tuple(self.branch))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))

    @property
    def n_channels(self) -> int:
        return self.spatial_filter.n_channels

    def feature_rows(self, moments: np.ndarray) -> np.ndarray:
        """Log-variance features, one row per window covariance."""
        moments = np.asarray(moments, dtype=np.float64)
        if moments.shape[-1] != self.n_channels:
            raise ModelError(
                f"evidence has {moments.shape[-1]} channels, classifier "
                f"expects {self.n_channels}"
            )
        W = selected_columns(self.spatial_filter, self.k)
        return features_from_covariances(W, moments)

    def score_rows(self, features: np.ndarray) -> np.ndarray:
        if self.lda_mode == "per_component":
            return features * self.weights
        return (features @ self.weights)[..., None]

    def log_likelihood_pairs(self, moments: np.ndarray) -> np.ndarray:
        """(n, 2) array of (log P(window | -1), log P(window | +1))."""
        moments = np.asarray(moments, dtype=np.float64)
        if moments.ndim == 2:
            moments = moments[None]
        scores = self.score_rows(self.feature_rows(moments))
        return np.stack(
            [
                scoring.log_likelihoods(self.density_neg, scores),
                scoring.log_likelihoods(self.density_pos, scores),
            ],
            axis=1,
        )


@dataclass(frozen=True)
class TrainedModel:
    """All level classifiers plus the configuration they were fit under."""

    classifiers: dict
    topology: str
    evidence_mode: str
    sample_rate_hz: float
    n_channels: int
    channel_names: tuple[str, ...]
    config: dict

    def classifier_for(self, level: int, branch: BranchKey = ()) -> LevelClassifier:
        key = (check_level(level), tuple(branch))
        try:
            return self.classifiers[key]
        except KeyError:
            raise ModelError(
                f"model has no classifier for level {level}, branch {tuple(branch)} "
                f"(topology: {self.topology})"
            ) from None


def required_scopes(topology: str) -> list[tuple[int, BranchKey]]:
    """The (level, branch) classifiers a topology trains: 3 pooled or
    1 + 2 + 4 per-branch."""
    if topology == "pooled":
        return [(1, ()), (2, ()), (3, ())]
    if topology == "per_branch":
        scopes: list[tuple[int, BranchKey]] = [(1, ())]
        scopes += [(2, (s1,)) for s1 in (-1, 1)]
        scopes += [(3, (s1, s2)) for s1 in (-1, 1) for s2 in (-1, 1)]
        return scopes
    raise ConfigError(f"unknown classifier topology {topology!r}")


@dataclass(frozen=True)
class TrainingData:
    """Per-window covariances shared by full training and LOOCV folds.

    ``train_raw``/``train_cen`` hold the Eq-style normalized and the
    mean-removed covariance of each training evidence instance (t
    1-second windows per trial under the subwindow scheme, one
    t-second window under the growing scheme).  ``decide_cen`` holds
    the per-interval covariances the sequential decision consumes.
    """

    leaf: np.ndarray
    signs: np.ndarray  # (n_trials, 3) axis signs per level
    train_raw: np.ndarray  # (n_trials, n_train_win, m, m)
    train_cen: np.ndarray  # (n_trials, n_train_win, m, m)
    decide_cen: np.ndarray  # (n_trials, t, m, m)
    t_intervals: int
    sample_rate_hz: float
    channel_names: tuple[str, ...]
    subject_id: str

    @property
    def n_trials(self) -> int:
        return self.leaf.size

    @property
    def n_channels(self) -> int:
        return self.train_raw.shape[-1]


def prepare_training_data(ds: Dataset, cfg: RunConfig) -> TrainingData:
    """Filter every trial and precompute its per-window covariances."""
    if len(ds.trials) == 0:
        raise TrainingError("dataset holds no trials")
    fs = ds.sample_rate_hz
    kernel = design_bandpass(fs, cfg.band[0], cfg.band[1], cfg.kernel_taps(fs))
    t = cfg.t_max
    w = samples_per_interval(fs)

    leaf = np.empty(len(ds.trials), dtype=np.intp)
    signs = np.empty((len(ds.trials), 3), dtype=np.intp)
    train_raw, train_cen, decide_cen = [], [], []
    for i, (meta, mat) in enumerate(ds.trials):
        leaf[i] = meta.gesture.leaf_index
        signs[i] = [meta.gesture.axis_sign(level) for level in (1, 2, 3)]
        filtered = apply_filter(kernel, mat)
        if cfg.evidence_mode == "subwindows":
            wins = evidence_windows(filtered, t)
            cen = np.stack([centered_covariance(win.data) for win in wins])
            raw = np.stack([normalized_covariance(win.data) for win in wins])
            dec = cen
        else:
            full = growing_window(filtered, t)
            raw = normalized_covariance(full.data)[None]
            cen = centered_covariance(full.data)[None]
            dec = np.stack(
                [
                    centered_covariance(filtered.data[:, : tau * w])
                    for tau in range(1, t + 1)
                ]
            )
        train_raw.append(raw)
        train_cen.append(cen)
        decide_cen.append(dec)

    return TrainingData(
        leaf=leaf,
        signs=signs,
        train_raw=np.stack(train_raw),
        train_cen=np.stack(train_cen),
        decide_cen=np.stack(decide_cen),
        t_intervals=t,
        sample_rate_hz=fs,
        channel_names=ds.channel_names,
        subject_id=ds.subject_id,
    )


def _scope_for(level: int, branch: BranchKey) -> CategoryScope:
    return CategoryScope.pooled() if not branch else CategoryScope.branch(*branch)


def _train_level(
    prep: TrainingData,
    level: int,
    branch: BranchKey,
    cfg: RunConfig,
    exclude: int | None = None,
) -> LevelClassifier:
    in_scope = np.ones(prep.n_trials, dtype=bool)
    for parent_level, sign in enumerate(branch, start=1):
        in_scope &= prep.signs[:, parent_level - 1] == sign
    if exclude is not None:
        in_scope[exclude] = False

    level_signs = prep.signs[:, level - 1]
    masks = {
        -1: in_scope & (level_signs == -1),
        1: in_scope & (level_signs == 1),
    }
    scope = _scope_for(level, branch)
    for label, mask in masks.items():
        if not mask.any():
            raise TrainingError(
                f"no trials in category '{AXIS_NAMES[level][label]}' "
                f"at level {level} (scope: {scope})"
            )

    m = prep.n_channels
    sigma = {
        label: prep.train_raw[mask].reshape(-1, m, m).mean(axis=0)
        for label, mask in masks.items()
    }
    filt = solve_csp(sigma[-1], sigma[1], k=cfg.k)
    W = selected_columns(filt, cfg.k)

    feats = {
        label: features_from_covariances(W, prep.train_cen[mask].reshape(-1, m, m))
        for label, mask in masks.items()
    }
    if cfg.lda_mode == "per_component":
        weights = scoring.fit_fisher(feats[-1], feats[1])
        score_rows = {label: f * weights for label, f in feats.items()}
    else:
        weights = scoring.fit_fisher_joint(feats[-1], feats[1])
        score_rows = {label: (f @ weights)[:, None] for label, f in feats.items()}

    return LevelClassifier(
        level=level,
        branch=branch,
        spatial_filter=filt,
        k=cfg.k,
        lda_mode=cfg.lda_mode,
        weights=weights,
        density_neg=scoring.fit_density(score_rows[-1]),
        density_pos=scoring.fit_density(score_rows[1]),
    )


def train_from_data(
    prep: TrainingData, cfg: RunConfig, exclude: int | None = None
) -> TrainedModel:
    """Train every classifier the topology requires, optionally holding
    one trial out of all estimates."""
    if 2 * cfg.k > prep.n_channels:
        raise ConfigError(
            f"k={cfg.k} retains 2k={2 * cfg.k} filters but the data has only "
            f"{prep.n_channels} channels"
        )
    classifiers = {
        (level, branch): _train_level(prep, level, branch, cfg, exclude=exclude)
        for level, branch in required_scopes(cfg.classifier_topology)
    }
    return TrainedModel(
        classifiers=classifiers,
        topology=cfg.classifier_topology,
        evidence_mode=cfg.evidence_mode,
        sample_rate_hz=prep.sample_rate_hz,
        n_channels=prep.n_channels,
        channel_names=prep.channel_names,
        config=cfg.to_dict(),
    )


def train_model(ds: Dataset, cfg: RunConfig) -> TrainedModel:
    """Fit the full classifier bundle on every trial of a dataset."""
    return train_from_data(prepare_training_data(ds, cfg), cfg)


def _density_to_dict(d: GaussianDensity) -> dict:
    return {"mean": d.mean.tolist(), "covariance": d.covariance.tolist()}


def _density_from_dict(doc: dict) -> GaussianDensity:
    return GaussianDensity(mean=doc["mean"], covariance=doc["covariance"])


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "topology": model.topology,
        "evidence_mode": model.evidence_mode,
        "sample_rate_hz": model.sample_rate_hz,
        "n_channels": model.n_channels,
        "channel_names": list(model.channel_names),
        "config": model.config,
        "classifiers": [
            {
                "level": clf.level,
                "branch": list(clf.branch),
                "k": clf.k,
                "lda_mode": clf.lda_mode,
                "weights": clf.weights.tolist(),
                "filter": {
                    "V": clf.spatial_filter.V.tolist(),
                    "D": clf.spatial_filter.D.tolist(),
                    "k": clf.spatial_filter.k,
                },
                "density_neg": _density_to_dict(clf.density_neg),
                "density_pos": _density_to_dict(clf.density_pos),
            }
            for _, clf in sorted(model.classifiers.items())
        ],
    }


def model_from_dict(doc: dict) -> TrainedModel:
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelError(
            f"unsupported model format_version {version!r}, "
            f"expected {MODEL_FORMAT_VERSION}"
        )
    try:
        classifiers = {}
        for entry in doc["classifiers"]:
            clf = LevelClassifier(
                level=int(entry["level"]),
                branch=tuple(int(s) for s in entry["branch"]),
                spatial_filter=SpatialFilter(
                    V=entry["filter"]["V"],
                    D=entry["filter"]["D"],
                    k=int(entry["filter"]["k"]),
                ),
                k=int(entry["k"]),
                lda_mode=str(entry["lda_mode"]),
                weights=entry["weights"],
                density_neg=_density_from_dict(entry["density_neg"]),
                density_pos=_density_from_dict(entry["density_pos"]),
            )
            classifiers[(clf.level, clf.branch)] = clf
        return TrainedModel(
            classifiers=classifiers,
            topology=str(doc["topology"]),
            evidence_mode=str(doc["evidence_mode"]),
            sample_rate_hz=float(doc["sample_rate_hz"]),
            n_channels=int(doc["n_channels"]),
            channel_names=tuple(doc["channel_names"]),
            config=dict(doc["config"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"model file is malformed: {exc}") from exc


def save_model(model: TrainedModel, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(model_to_dict(model), indent=2, sort_keys=True),
            encoding="utf-8",
        )
    except OSError as exc:
        raise DataIOError(f"cannot write model file {path}: {exc}") from exc
    return path


def load_model(path) -> TrainedModel:
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_dict(doc)
