"""Datasets of labeled motor-imagery trials on disk.

A dataset directory holds one ``manifest.json`` plus one file per
trial.  Manifest schema::

    {"subject_id": str,
     "sample_rate_hz": number,
     "channels": [str, ...],
     "trials": [{"file": str,
                 "gesture": {"hand": "left"|"right",
                             "fingers": "extension"|"flexion",
                             "thumb": "abduction"|"adduction"},
                 "onset_s": number,
                 "duration_s": number}, ...]}

Trial files come in two flavours: ``.f32`` (headerless little-endian
float32, row-major samples x channels, sample count inferred from the
file size) for speed, and ``.csv`` (header row of channel names, one
sample per row) for inspectability.  Loading windows each trial to
[onset_s, onset_s + duration_s]; files shorter than the requested
window are rejected with a named error rather than zero-padded, since
padding would bias downstream variance features.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataIOError, SchemaError
from .hierarchy import ALL_GESTURES, GestureClass

MANIFEST_NAME = "manifest.json"
TRIAL_FORMATS = ("f32", "csv")


@dataclass(frozen=True)
class TrialMatrix:
    """One trial's multichannel signal, channels x samples."""

    data: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ConfigError(f"trial data must be 2-D (channels x samples), got shape {arr.shape}")
        m, n = arr.shape
        if m < 2:
            raise ConfigError(f"trial needs at least 2 channels, got {m}")
        if n < 1:
            raise ConfigError("trial needs at least 1 sample")
        if not np.all(np.isfinite(arr)):
            raise ConfigError("trial data must be finite")
        if not self.sample_rate_hz > 0:
            raise ConfigError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True)
class TrialMeta:
    """Label and timing of one trial: which gesture, and where the
    imagery window sits inside the trial file."""

    file_path: Path
    gesture: GestureClass
    onset_s: float
    duration_s: float

    def __post_init__(self):
        if self.onset_s < 0:
            raise ConfigError(f"onset_s must be >= 0, got {self.onset_s}")
        if not self.duration_s > 0:
            raise ConfigError(f"duration_s must be > 0, got {self.duration_s}")
        object.__setattr__(self, "file_path", Path(self.file_path))


@dataclass(frozen=True)
class Dataset:
    """An immutable collection of labeled trials sharing one montage.

    Read-only after construction; safe to share across parallel
    evaluation workers without synchronization.
    """

    subject_id: str
    sample_rate_hz: float
    channel_names: tuple[str, ...]
    trials: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        object.__setattr__(self, "trials", tuple(self.trials))
        m = len(self.channel_names)
        for meta, mat in self.trials:
            if mat.n_channels != m:
                raise SchemaError(
                    f"trial {meta.file_path} has {mat.n_channels} channels, "
                    f"dataset declares {m}"
                )

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    def __len__(self) -> int:
        return len(self.trials)


def gesture_counts(ds: Dataset) -> dict[GestureClass, int]:
    """Trial count per gesture, with all 8 leaves present as keys."""
    counts = {g: 0 for g in ALL_GESTURES}
    for meta, _ in ds.trials:
        counts[meta.gesture] += 1
    return counts


def _read_f32(path: Path, n_channels: int) -> np.ndarray:
    size = path.stat().st_size
    frame = 4 * n_channels
    if size == 0 or size % frame != 0:
        raise SchemaError(
            f"trial file {path} has {size} bytes, not a multiple of "
            f"{frame} (4 bytes x {n_channels} channels)"
        )
    raw = np.fromfile(path, dtype="<f4")
    return raw.reshape(-1, n_channels).T.astype(np.float64)


def _read_csv(path: Path, channel_names: tuple[str, ...]) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        names = tuple(h.strip() for h in header.split(","))
        if len(names) != len(channel_names):
            raise SchemaError(
                f"trial file {path} has {len(names)} channel columns, "
                f"dataset declares {len(channel_names)}"
            )
        try:
            body = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=np.float64)
        except ValueError as exc:
            raise SchemaError(f"trial file {path} is not numeric CSV: {exc}") from exc
    if body.size == 0:
        raise SchemaError(f"trial file {path} contains no samples")
    return body.T


def read_trial_file(path, n_channels: int, channel_names=None) -> np.ndarray:
    """Read one trial file (.f32 or .csv) into a channels x samples array."""
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"trial file missing: {path}")
    if path.suffix == ".f32":
        return _read_f32(path, n_channels)
    if path.suffix == ".csv":
        names = channel_names or tuple(f"ch{i:02d}" for i in range(n_channels))
        return _read_csv(path, tuple(names))
    raise SchemaError(f"unsupported trial file extension {path.suffix!r} ({path})")


def _window_indices(onset_s: float, duration_s: float, fs: float) -> tuple[int, int]:
    start = round(onset_s * fs)
    count = round(duration_s * fs)
    return start, count


def load_manifest(path) -> Dataset:
    """Load a dataset directory or manifest file.

    Every trial is windowed to [onset_s, onset_s + duration_s].  Raises
    DataIOError for missing files, SchemaError for malformed manifests,
    unknown gesture labels, channel-count mismatches, and trials
    shorter than their declared window.
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.is_file():
        raise DataIOError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest {path} is not valid JSON: {exc}") from exc
    for key in ("subject_id", "sample_rate_hz", "channels", "trials"):
        if key not in doc:
            raise SchemaError(f"manifest {path} is missing the '{key}' field")
    fs = float(doc["sample_rate_hz"])
    if not fs > 0:
        raise SchemaError(f"manifest {path}: sample_rate_hz must be positive, got {fs}")
    channels = tuple(str(c) for c in doc["channels"])
    base = path.parent

    trials = []
    for i, entry in enumerate(doc["trials"]):
        try:
            rel = entry["file"]
            gesture_names = entry["gesture"]
            onset_s = float(entry["onset_s"])
            duration_s = float(entry["duration_s"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"manifest {path}: trial entry {i} is malformed: {exc}") from exc
        try:
            gesture = GestureClass.from_names(
                hand=gesture_names.get("hand"),
                fingers=gesture_names.get("fingers"),
                thumb=gesture_names.get("thumb"),
            )
        except AttributeError:
            raise SchemaError(
                f"manifest {path}: trial entry {i} gesture must be an object"
            ) from None
        except ConfigError as exc:
            raise SchemaError(f"manifest {path}: trial entry {i}: {exc}") from None

        fpath = base / rel
        data = read_trial_file(fpath, len(channels), channels)
        start, count = _window_indices(onset_s, duration_s, fs)
        if count < 1:
            raise SchemaError(f"trial {fpath}: window shorter than one sample")
        if start + count > data.shape[1]:
            raise SchemaError(
                f"trial {fpath}: window [{onset_s}, {onset_s + duration_s}] s "
                f"needs {start + count} samples but the file holds {data.shape[1]}"
            )
        meta = TrialMeta(Path(rel), gesture, onset_s, duration_s)
        mat = TrialMatrix(data[:, start : start + count], fs)
        trials.append((meta, mat))

    return Dataset(
        subject_id=str(doc["subject_id"]),
        sample_rate_hz=fs,
        channel_names=channels,
        trials=tuple(trials),
    )


def write_dataset(ds: Dataset, out_dir, fmt: str = "f32") -> Path:
    """Write a dataset directory and return the manifest path.

    Trials are stored as already-windowed signals (onset 0, full
    duration), so write -> load round-trips bit-exactly for the binary
    format and to better than 1e-12 per sample for CSV.
    """
    if fmt not in TRIAL_FORMATS:
        raise ConfigError(f"fmt must be one of {TRIAL_FORMATS}, got {fmt!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"cannot create dataset directory {out}: {exc}") from exc

    entries = []
    try:
        for i, (meta, mat) in enumerate(ds.trials):
            name = f"trial_{i:04d}.{fmt}"
            target = out / name
            samples = mat.data.T
            if fmt == "f32":
                samples.astype("<f4").tofile(target)
            else:
                np.savetxt(
                    target,
                    samples,
                    delimiter=",",
                    header=",".join(ds.channel_names),
                    comments="",
                    fmt="%.17g",
                )
            entries.append(
                {
                    "file": name,
                    "gesture": meta.gesture.to_names(),
                    "onset_s": 0.0,
                    "duration_s": mat.n_samples / ds.sample_rate_hz,
                }
            )
        manifest = {
            "subject_id": ds.subject_id,
            "sample_rate_hz": ds.sample_rate_hz,
            "channels": list(ds.channel_names),
            "trials": entries,
        }
        manifest_path = out / MANIFEST_NAME
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"failed to write dataset to {out}: {exc}") from exc
    return manifest_path
