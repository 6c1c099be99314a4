"""Magnitude spectrum of an incidence series and selection of dominant frequencies."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import SeasonalForcing
from .timeseries import IncidenceSeries


class SpectrumError(ValueError):
    pass


class NoPeaksFound(SpectrumError):
    pass


@dataclass(frozen=True)
class Spectrum:
    """One-sided DFT magnitudes of a mean-removed series.

    ``frequencies[k] = k / n`` cycles per sample period for k = 0..n//2.
    """

    frequencies: np.ndarray
    magnitudes: np.ndarray
    n: int

    def __post_init__(self):
        if self.frequencies.shape != self.magnitudes.shape:
            raise SpectrumError("frequencies and magnitudes differ in length")
        if self.frequencies.size != self.n // 2 + 1:
            raise SpectrumError("spectrum must hold bins 0..n//2")

    def bin_fraction(self, k: int) -> Fraction:
        return Fraction(k, self.n)

    def total_power(self) -> float:
        """Sum of |X_k|^2 over all n bins, recovered from the one-sided half."""
        power = self.magnitudes**2
        mirrored = power[1: (self.n + 1) // 2].sum()  # bins with a distinct conjugate partner
        return float(power.sum() + mirrored)


@dataclass(frozen=True)
class SpectralPeak:
    frequency: float
    period: float
    magnitude: float
    rank: int
    bin: int

    def __post_init__(self):
        if not self.frequency > 0:
            raise SpectrumError("peak frequency must be positive")
        if self.rank < 1:
            raise SpectrumError("rank starts at 1")

    @classmethod
    def at(cls, frequency: float, magnitude: float, rank: int, bin: int) -> "SpectralPeak":
        return cls(frequency, 1.0 / frequency, magnitude, rank, bin)


def dft_magnitude(series: IncidenceSeries) -> Spectrum:
    x = np.asarray(series.counts, dtype=float)
    n = x.size
    if n < 4:
        raise SpectrumError(f"series needs at least 4 samples, got {n}")
    centered = x - x.mean()
    mags = np.abs(np.fft.rfft(centered))
    freqs = np.arange(n // 2 + 1) / n
    return Spectrum(freqs, mags, n)


def top_peaks(spectrum: Spectrum, m: int, min_separation: float | None = None) -> list[SpectralPeak]:
    """Strict interior local maxima, chosen greedily by magnitude.

    A candidate is dropped if it lies closer than ``min_separation`` (default
    two bins) to an already selected peak. The DC bin is never a candidate.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if min_separation is None:
        min_separation = 2.0 / spectrum.n
    if min_separation < 0:
        raise ValueError("min_separation must be nonnegative")
    mag = spectrum.magnitudes
    k = np.arange(1, mag.size - 1)
    is_max = (mag[k] > mag[k - 1]) & (mag[k] > mag[k + 1])
    candidates = k[is_max]
    if candidates.size == 0:
        raise NoPeaksFound("spectrum has no strict local maximum")
    order = candidates[np.argsort(-mag[candidates], kind="stable")]
    chosen: list[int] = []
    for c in order:
        f = spectrum.frequencies[c]
        if all(abs(f - spectrum.frequencies[s]) >= min_separation - 1e-15 for s in chosen):
            chosen.append(int(c))
        if len(chosen) == m:
            break
    return [SpectralPeak.at(float(spectrum.frequencies[c]), float(mag[c]), rank, c)
            for rank, c in enumerate(chosen, start=1)]


def peak_to_forcing_seed(peaks: Sequence[SpectralPeak], alpha0: float) -> SeasonalForcing:
    if not peaks:
        raise ValueError("at least one peak is required")
    if not alpha0 > 0:
        raise ValueError("alpha0 must be positive")
    return SeasonalForcing.build(alpha0, [0.0] * len(peaks), [p.frequency for p in peaks])


def format_spectrum(spectrum: Spectrum, peaks: Sequence[SpectralPeak]) -> str:
    lines = ["#peaks: rank,frequency,period,magnitude"]
    lines += [f"#peak: {p.rank},{p.frequency!r},{p.period!r},{p.magnitude!r}" for p in peaks]
    lines.append("frequency,magnitude")
    lines += [f"{f!r},{a!r}" for f, a in zip(spectrum.frequencies.tolist(), spectrum.magnitudes.tolist())]
    return "\n".join(lines) + "\n"
