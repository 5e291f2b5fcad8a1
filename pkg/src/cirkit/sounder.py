"""Channel sounding: from a received IQ capture to CIRs and an averaged PDP.

The transmit side tiles a prime-length Zadoff-Chu sequence; the receive side
removes capture artifacts, aligns to the sequence, deconvolves one channel
impulse response per period and averages squared magnitudes into a power
delay profile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import PowerDelayProfile
from .errors import ValidationError
from .signal import IqSignal, _frozen_complex, is_prime, zadoff_chu

DEFAULT_SEQUENCE_LENGTH = 353
DEFAULT_ROOT = 1
DEFAULT_REPETITIONS = 3
DEFAULT_SAMPLE_RATE_HZ = 25.6e6
DEFAULT_TAPER_FRACTION = 0.1

# ridge term as a fraction of the mean reference spectral power
_AUTO_REGULARIZATION = 1e-6

_SPIKE_THRESHOLD = 6.0

# circular pre-shift applied with tapering so the taper kernel's pre-cursor
# ringing stays causal instead of wrapping to the far end of the delay axis
_TAPER_GUARD_TAPS = 16


@dataclass(frozen=True)
class SoundingWaveform:
    """A Zadoff-Chu base sequence tiled ``repetitions`` times."""

    base_sequence: np.ndarray
    repetitions: int
    sample_rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "base_sequence", _frozen_complex(self.base_sequence))
        if not is_prime(self.base_sequence.size):
            raise ValidationError(
                f"base sequence length must be prime, got {self.base_sequence.size}"
            )
        if self.repetitions < 1:
            raise ValidationError("repetitions must be >= 1")
        if not np.isfinite(self.sample_rate_hz) or self.sample_rate_hz <= 0:
            raise ValidationError("sample_rate_hz must be finite and positive")

    @property
    def period(self) -> int:
        return self.base_sequence.size


def zadoff_chu_waveform(
    root: int = DEFAULT_ROOT,
    length: int = DEFAULT_SEQUENCE_LENGTH,
    repetitions: int = DEFAULT_REPETITIONS,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
) -> SoundingWaveform:
    """Build the standard sounding waveform (353 samples at 25.6 MS/s by default)."""
    return SoundingWaveform(zadoff_chu(root, length), repetitions, sample_rate_hz)


@dataclass(frozen=True)
class ChannelImpulseResponse:
    """One estimation snapshot: complex taps on a uniform delay grid."""

    taps: np.ndarray
    delay_step_s: float
    timestamp_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "taps", _frozen_complex(self.taps))
        if self.taps.ndim != 1 or self.taps.size == 0:
            raise ValidationError("CIR taps must be a non-empty 1-D vector")
        if self.delay_step_s <= 0:
            raise ValidationError("delay_step_s must be positive")

    def __len__(self) -> int:
        return self.taps.size


def build_sounding_signal(
    waveform: SoundingWaveform, center_frequency_hz: float = 0.0
) -> IqSignal:
    """Concatenate ``repetitions`` copies of the base sequence."""
    samples = np.tile(waveform.base_sequence, waveform.repetitions)
    return IqSignal(samples, waveform.sample_rate_hz, center_frequency_hz)


def mitigate_artifacts(rx: IqSignal, spike_threshold: float = _SPIKE_THRESHOLD) -> IqSignal:
    """Simplified capture clean-up: DC offset removal and spike suppression.

    The complex mean is subtracted, then any sample whose magnitude exceeds
    ``spike_threshold`` times the median magnitude is replaced by linear
    interpolation of its neighbours. This is a deliberately simple stand-in
    for full iterative restoration of hardware artifacts.
    """
    x = rx.samples
    if not np.any(x):
        return rx
    x = x - np.mean(x)
    mag = np.abs(x)
    median = float(np.median(mag))
    bad = mag > spike_threshold * median
    if np.any(bad):
        good = np.nonzero(~bad)[0]
        if good.size == 0:
            raise ValidationError("every sample flagged as a spike; capture unusable")
        idx = np.arange(x.size)
        x = x.copy()
        x[bad] = np.interp(idx[bad], good, x.real[good]) + 1j * np.interp(
            idx[bad], good, x.imag[good]
        )
    return IqSignal(x, rx.sample_rate_hz, rx.center_frequency_hz)


def synchronize(rx: IqSignal, waveform: SoundingWaveform) -> int:
    """Locate the start of the first sequence period in the capture.

    Correlates the first full window against the base sequence and returns
    the lag with the largest correlation magnitude, in [0, period).
    """
    n = waveform.period
    if len(rx) < 2 * n:
        raise ValidationError(
            f"capture too short to synchronize: {len(rx)} samples < 2 x {n}"
        )
    window = rx.samples[:n]
    corr = np.fft.ifft(np.fft.fft(window) * np.conj(np.fft.fft(waveform.base_sequence)))
    return int(np.argmax(np.abs(corr)))


def _taper_window(n: int, taper_fraction: float) -> np.ndarray | None:
    """Raised-cosine roll-off over the outer ``taper_fraction`` of band edges.

    Built on the shifted (monotonic-frequency) axis and returned in DFT bin
    order; None when the taper is disabled.
    """
    if taper_fraction <= 0.0:
        return None
    if not 0.0 < taper_fraction <= 0.5:
        raise ValidationError("taper fraction must lie in (0, 0.5]")
    edge = max(1, int(round(n * taper_fraction)))
    window = np.ones(n)
    ramp = 0.5 * (1.0 - np.cos(np.pi * (np.arange(edge) + 0.5) / edge))
    window[:edge] = ramp
    window[n - edge :] = ramp[::-1]
    return np.fft.ifftshift(window)


def estimate_cirs(
    rx: IqSignal,
    waveform: SoundingWaveform,
    regularization: float | None = None,
    taper_fraction: float = DEFAULT_TAPER_FRACTION,
) -> list[ChannelImpulseResponse]:
    """Estimate one CIR per complete sequence period in the capture.

    H[k] = Y[k] conj(X[k]) / (|X[k]|^2 + regularization), optionally edge
    tapered, then inverse transformed. ``regularization=None`` selects the
    default ridge term of 1e-6 times the mean reference spectral power;
    pass 0 for plain division. If the capture holds fewer complete periods
    than ``waveform.repetitions`` the shorter list is returned.

    With tapering enabled each CIR is additionally rotated right by a small
    guard so the taper kernel's two-sided ringing lands at causal delays;
    downstream normalization re-references delay zero, so only the raw tap
    indices shift.
    """
    n = waveform.period
    x_spec = np.fft.fft(waveform.base_sequence)
    ref_power = np.abs(x_spec) ** 2
    if not np.any(ref_power):
        raise ValidationError("reference sequence has zero energy")
    if regularization is None:
        regularization = _AUTO_REGULARIZATION * float(np.mean(ref_power))
    if regularization < 0:
        raise ValidationError("regularization must be >= 0")

    n_periods = len(rx) // n
    if n_periods == 0:
        raise ValidationError(f"capture holds no complete period of {n} samples")

    window = _taper_window(n, taper_fraction)
    guard = min(_TAPER_GUARD_TAPS, n // 2) if window is not None else 0
    denom = ref_power + regularization
    step = 1.0 / rx.sample_rate_hz
    cirs = []
    for p in range(n_periods):
        y_spec = np.fft.fft(rx.samples[p * n : (p + 1) * n])
        h_spec = y_spec * np.conj(x_spec) / denom
        if window is not None:
            h_spec = h_spec * window
        taps = np.fft.ifft(h_spec)
        if guard:
            taps = np.roll(taps, guard)
        cirs.append(ChannelImpulseResponse(taps, step, timestamp_index=p))
    return cirs


def average_pdp(cirs: list[ChannelImpulseResponse]) -> PowerDelayProfile:
    """Average squared CIR magnitudes into a power delay profile.

    All snapshots must share length and delay step. The noise floor is left
    unset; it is estimated downstream.
    """
    if not cirs:
        raise ValidationError("average_pdp needs at least one CIR")
    first = cirs[0]
    for cir in cirs[1:]:
        if len(cir) != len(first) or cir.delay_step_s != first.delay_step_s:
            raise ValidationError("CIRs differ in length or delay step")
    powers = np.mean([np.abs(c.taps) ** 2 for c in cirs], axis=0)
    delays = np.arange(len(first)) * first.delay_step_s
    return PowerDelayProfile(delays, powers)
