"""Synthetic channel application and noise injection.

This is the desk-scale stand-in for over-the-air propagation: it lets the
whole sounding chain be exercised and verified without SDR hardware.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .signal import IqSignal, _frozen_complex


@dataclass(frozen=True)
class SyntheticChannel:
    """Ground-truth impulse response on the signal's sample grid."""

    taps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "taps", _frozen_complex(self.taps))
        if self.taps.ndim != 1 or self.taps.size == 0:
            raise ValidationError("channel taps must be a non-empty 1-D vector")
        if not np.all(np.isfinite(self.taps)):
            raise ValidationError("channel taps must be finite")


def apply_channel(tx: IqSignal, channel: SyntheticChannel) -> IqSignal:
    """Circularly convolve a signal with a synthetic channel.

    Circular (not linear) convolution matches the periodic sounding
    waveform: every period sees the same steady-state channel and there are
    no edge transients to discard.
    """
    n = len(tx)
    if channel.taps.size > n:
        raise ValidationError(
            f"channel ({channel.taps.size} taps) longer than signal ({n} samples)"
        )
    h = np.zeros(n, dtype=np.complex128)
    h[: channel.taps.size] = channel.taps
    out = np.fft.ifft(np.fft.fft(tx.samples) * np.fft.fft(h))
    return IqSignal(out, tx.sample_rate_hz, tx.center_frequency_hz)


def add_awgn(signal: IqSignal, snr_db: float, rng_seed) -> IqSignal:
    """Add circularly-symmetric complex Gaussian noise at the requested SNR.

    ``snr_db=inf`` disables noise and returns the input unchanged. The noise
    is a deterministic function of the seed.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return signal
    power = float(np.mean(np.abs(signal.samples) ** 2))
    if power <= 0.0:
        raise ValidationError("cannot set an SNR on a zero-energy signal")
    noise_var = power / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(rng_seed)
    scale = math.sqrt(noise_var / 2.0)
    noise = scale * (
        rng.standard_normal(len(signal)) + 1j * rng.standard_normal(len(signal))
    )
    return IqSignal(
        signal.samples + noise, signal.sample_rate_hz, signal.center_frequency_hz
    )
