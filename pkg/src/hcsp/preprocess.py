"""Band-pass filtering and evidence-window extraction.

Filtering keeps the 3-30 Hz range where motor-imagery activity lives
(alpha/mu and beta rhythms).  Kernels are linear-phase windowed-sinc
designs with a Hamming window; application trims the group delay so
outputs stay time-aligned with inputs.  Evidence windows are the
non-overlapping 1-second intervals consumed by the sequential decision
loop; a growing-window variant covers the alternative single-window
evidence reading.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .dataio import TrialMatrix
from .errors import ConfigError

INTERVAL_S = 1.0


@dataclass(frozen=True)
class FilterKernel:
    """Linear-phase FIR band-pass kernel."""

    taps: np.ndarray
    low_hz: float
    high_hz: float
    sample_rate_hz: float

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size % 2 == 0:
            raise ConfigError(f"kernel taps must be a 1-D odd-length sequence, got shape {taps.shape}")
        scale = float(np.max(np.abs(taps))) or 1.0
        if np.max(np.abs(taps - taps[::-1])) > 1e-12 * scale:
            raise ConfigError("kernel taps must be symmetric (linear phase)")
        object.__setattr__(self, "taps", taps)

    @property
    def num_taps(self) -> int:
        return self.taps.size

    @property
    def group_delay(self) -> int:
        return (self.num_taps - 1) // 2


def default_num_taps(sample_rate_hz: float) -> int:
    """Next odd integer >= the sample rate (roughly a 1-second kernel)."""
    n = math.ceil(sample_rate_hz)
    return n if n % 2 == 1 else n + 1


def design_bandpass(
    sample_rate_hz: float,
    low_hz: float,
    high_hz: float,
    num_taps: int,
) -> FilterKernel:
    """Design a windowed-sinc band-pass filter.

    Parameters
    ----------
    sample_rate_hz : float
        Sampling rate of the signals the kernel will filter.
    low_hz, high_hz : float
        Pass-band edges; must satisfy 0 < low_hz < high_hz < Nyquist.
    num_taps : int
        Odd kernel length.  ``default_num_taps`` gives a ~1 s kernel.

    Returns
    -------
    FilterKernel
        Symmetric taps: difference of two Hamming-windowed sinc
        low-pass kernels, -6 dB at each band edge.
    """
    if num_taps < 3 or num_taps % 2 == 0:
        raise ConfigError(f"num_taps must be an odd integer >= 3, got {num_taps}")
    nyquist = sample_rate_hz / 2.0
    if not (0 < low_hz < high_hz < nyquist):
        raise ConfigError(
            f"band edges must satisfy 0 < low_hz < high_hz < {nyquist} "
            f"(Nyquist), got low_hz={low_hz}, high_hz={high_hz}"
        )
    n = np.arange(num_taps) - (num_taps - 1) // 2

    def lowpass(cutoff_hz):
        x = 2.0 * cutoff_hz / sample_rate_hz
        return x * np.sinc(x * n)

    taps = (lowpass(high_hz) - lowpass(low_hz)) * np.hamming(num_taps)
    return FilterKernel(
        taps=taps,
        low_hz=float(low_hz),
        high_hz=float(high_hz),
        sample_rate_hz=float(sample_rate_hz),
    )


def frequency_response(kernel: FilterKernel, freqs_hz) -> np.ndarray:
    """Complex response of the kernel at the given frequencies."""
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
    n = np.arange(kernel.num_taps)
    phase = np.exp(-2j * np.pi * np.outer(f, n) / kernel.sample_rate_hz)
    return phase @ kernel.taps


def apply_filter(kernel: FilterKernel, trial: TrialMatrix) -> TrialMatrix:
    """Filter each channel, trimming the group delay to keep alignment.

    Output length equals input length; the head (and tail) of the
    convolution sees implicit zero padding.
    """
    if trial.sample_rate_hz != kernel.sample_rate_hz:
        raise ConfigError(
            f"sample-rate mismatch: trial at {trial.sample_rate_hz} Hz, "
            f"kernel designed for {kernel.sample_rate_hz} Hz"
        )
    full = fftconvolve(trial.data, kernel.taps[None, :], mode="full", axes=1)
    d = kernel.group_delay
    return TrialMatrix(full[:, d : d + trial.n_samples], trial.sample_rate_hz)


@dataclass(frozen=True)
class EvidenceWindow:
    """One evidence interval's signal slice (channels x samples)."""

    data: np.ndarray
    index_i: int
    length_s: float


def samples_per_interval(sample_rate_hz: float) -> int:
    return round(sample_rate_hz * INTERVAL_S)


def evidence_windows(trial: TrialMatrix, t_intervals: int) -> list[EvidenceWindow]:
    """Cut the first ``t_intervals`` consecutive non-overlapping
    1-second windows, starting at the trial's first sample (imagery
    onset after dataio windowing).

    Concatenating the returned windows reproduces the trial's first
    ``t_intervals`` seconds exactly.
    """
    if t_intervals < 1:
        raise ConfigError(f"t_intervals must be >= 1, got {t_intervals}")
    w = samples_per_interval(trial.sample_rate_hz)
    needed = t_intervals * w
    if needed > trial.n_samples:
        raise ConfigError(
            f"trial too short: {t_intervals} evidence intervals need "
            f"{needed / trial.sample_rate_hz:.3f} s ({needed} samples), "
            f"trial provides {trial.duration_s:.3f} s ({trial.n_samples} samples)"
        )
    return [
        EvidenceWindow(trial.data[:, (i - 1) * w : i * w], index_i=i, length_s=INTERVAL_S)
        for i in range(1, t_intervals + 1)
    ]


def growing_window(trial: TrialMatrix, t_intervals: int) -> EvidenceWindow:
    """A single window spanning intervals 1..t (the growing-evidence
    reading: one likelihood term over the whole span)."""
    if t_intervals < 1:
        raise ConfigError(f"t_intervals must be >= 1, got {t_intervals}")
    w = samples_per_interval(trial.sample_rate_hz)
    needed = t_intervals * w
    if needed > trial.n_samples:
        raise ConfigError(
            f"trial too short: a {t_intervals} s growing window needs "
            f"{needed} samples, trial provides {trial.n_samples}"
        )
    return EvidenceWindow(
        trial.data[:, :needed], index_i=t_intervals, length_s=float(t_intervals)
    )
