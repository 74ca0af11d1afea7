"""Run configuration: every field optional in JSON, per-module defaults
applied, and the effective values echoed into every report so grid
results stay reproducible."""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError, DataIOError, SchemaError
from .fusion import InterLevelPrior
from .preprocess import default_num_taps

EVIDENCE_MODES = ("subwindows", "growing")
TOPOLOGIES = ("pooled", "per_branch")
LDA_MODES = ("per_component", "joint")


@dataclass(frozen=True)
class SynthSettings:
    """Generator knobs for the `synth` subcommand."""

    m: int = 16
    sample_rate_hz: float = 256.0
    trials_per_gesture: int = 20
    snr: float = 1.0

    def validate(self):
        if self.m < 4:
            raise ConfigError(f"synth.m must be >= 4, got {self.m}")
        if not self.sample_rate_hz > 0:
            raise ConfigError(f"synth.sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if self.trials_per_gesture < 2:
            raise ConfigError(
                f"synth.trials_per_gesture must be >= 2, got {self.trials_per_gesture}"
            )
        if self.snr < 0:
            raise ConfigError(f"synth.snr must be >= 0, got {self.snr}")

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "sample_rate_hz": self.sample_rate_hz,
            "trials_per_gesture": self.trials_per_gesture,
            "snr": self.snr,
        }


@dataclass(frozen=True)
class RunConfig:
    band: tuple[float, float] = (3.0, 30.0)
    num_taps: int | None = None
    k: int = 3
    t_max: int = 5
    evidence_mode: str = "subwindows"
    classifier_topology: str = "pooled"
    lda_mode: str = "per_component"
    threshold: float = 0.9
    n_intervals: int = 5
    priors: InterLevelPrior = field(default_factory=InterLevelPrior.uniform)
    seed: int = 0
    synth: SynthSettings = field(default_factory=SynthSettings)

    def __post_init__(self):
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))
        self.validate()

    def validate(self):
        low, high = self.band
        if not (0 < low < high):
            raise ConfigError(f"band must satisfy 0 < low < high, got ({low}, {high})")
        if self.num_taps is not None and (self.num_taps < 3 or self.num_taps % 2 == 0):
            raise ConfigError(f"num_taps must be an odd integer >= 3, got {self.num_taps}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.t_max < 1:
            raise ConfigError(f"t_max must be >= 1, got {self.t_max}")
        if self.evidence_mode not in EVIDENCE_MODES:
            raise ConfigError(
                f"evidence_mode must be one of {EVIDENCE_MODES}, got {self.evidence_mode!r}"
            )
        if self.classifier_topology not in TOPOLOGIES:
            raise ConfigError(
                f"classifier_topology must be one of {TOPOLOGIES}, "
                f"got {self.classifier_topology!r}"
            )
        if self.lda_mode not in LDA_MODES:
            raise ConfigError(f"lda_mode must be one of {LDA_MODES}, got {self.lda_mode!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.n_intervals < 1:
            raise ConfigError(f"n_intervals must be >= 1, got {self.n_intervals}")
        self.synth.validate()

    def kernel_taps(self, sample_rate_hz: float) -> int:
        return self.num_taps if self.num_taps is not None else default_num_taps(sample_rate_hz)

    def with_cell(self, two_k: int, t: int) -> "RunConfig":
        """Config for one grid cell (feature count 2k, window length t)."""
        if two_k % 2 != 0 or two_k < 2:
            raise ConfigError(f"feature count must be an even integer >= 2, got {two_k}")
        return replace(self, k=two_k // 2, t_max=t)

    def to_dict(self) -> dict:
        return {
            "band": list(self.band),
            "num_taps": self.num_taps,
            "k": self.k,
            "t_max": self.t_max,
            "evidence_mode": self.evidence_mode,
            "classifier_topology": self.classifier_topology,
            "lda_mode": self.lda_mode,
            "threshold": self.threshold,
            "n_intervals": self.n_intervals,
            "priors": self.priors.to_dict(),
            "seed": self.seed,
            "synth": self.synth.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {
            "band",
            "num_taps",
            "k",
            "t_max",
            "evidence_mode",
            "classifier_topology",
            "lda_mode",
            "threshold",
            "n_intervals",
            "priors",
            "seed",
            "synth",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        kwargs: dict = {}
        if "band" in doc:
            band = doc["band"]
            if not (isinstance(band, (list, tuple)) and len(band) == 2):
                raise ConfigError(f"band must be a [low_hz, high_hz] pair, got {band!r}")
            kwargs["band"] = (float(band[0]), float(band[1]))
        for key in ("num_taps", "k", "t_max", "n_intervals", "seed"):
            if key in doc and doc[key] is not None:
                kwargs[key] = int(doc[key])
        for key in ("evidence_mode", "classifier_topology", "lda_mode"):
            if key in doc:
                kwargs[key] = str(doc[key])
        if "threshold" in doc:
            kwargs["threshold"] = float(doc["threshold"])
        if "priors" in doc:
            priors = doc["priors"]
            if priors == "uniform":
                kwargs["priors"] = InterLevelPrior.uniform()
            elif isinstance(priors, dict):
                kwargs["priors"] = InterLevelPrior.from_dict(priors)
            else:
                raise ConfigError(
                    f"priors must be \"uniform\" or a prior-table object, got {priors!r}"
                )
        if "synth" in doc:
            synth = doc["synth"]
            if not isinstance(synth, dict):
                raise ConfigError(f"synth must be an object, got {synth!r}")
            unknown = set(synth) - {"m", "sample_rate_hz", "trials_per_gesture", "snr"}
            if unknown:
                raise ConfigError(f"unknown synth field(s): {sorted(unknown)}")
            kwargs["synth"] = SynthSettings(
                m=int(synth.get("m", 16)),
                sample_rate_hz=float(synth.get("sample_rate_hz", 256.0)),
                trials_per_gesture=int(synth.get("trials_per_gesture", 20)),
                snr=float(synth.get("snr", 1.0)),
            )
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise DataIOError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return cls.from_dict(doc)
