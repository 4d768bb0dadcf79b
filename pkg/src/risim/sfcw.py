"""
SFCW range processing: Hann window, zero-padded IFFT, bin-to-range mapping.

The inverse transform carries the usual 1/fft_len normalisation, so without
a window ``sum |profile|^2 == sum |S21|^2 / fft_len``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measurement import SPEED_OF_LIGHT, MeasurementTensor, SweepConfig

__all__ = ["RangeProfile", "hanning_window", "range_profile", "process_tensor", "profile_of", "DEFAULT_PAD_FACTOR"]

DEFAULT_PAD_FACTOR = 4


def hanning_window(n: int) -> np.ndarray:
    """Symmetric Hann window, ``0.5 * (1 - cos(2 pi k / (n - 1)))``."""
    if int(n) != n or n < 1:
        raise ValueError(f"window length must be a positive integer, got {n}")
    n = int(n)
    if n == 1:
        return np.ones(1)
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / (n - 1)))


@dataclass(frozen=True, eq=False)
class RangeProfile:
    samples: np.ndarray
    bin_spacing: float
    beam_angles: tuple[float, float] = (0.0, 0.0)
    range_offset: float = 0.0

    @property
    def fft_len(self) -> int:
        return len(self.samples)

    @property
    def ranges(self) -> np.ndarray:
        return np.arange(self.fft_len) * self.bin_spacing - self.range_offset

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.samples)

    @property
    def peak_range(self) -> float:
        return float(self.ranges[int(np.argmax(self.magnitude))])


def _resolve_fft_len(points: int, fft_len: int | None) -> int:
    if fft_len is None:
        return DEFAULT_PAD_FACTOR * points
    if int(fft_len) != fft_len or fft_len < points:
        raise ValueError(f"fft_len must be an integer >= K={points}, got {fft_len}")
    return int(fft_len)


def _transform(rows: np.ndarray, fft_len: int, window: bool) -> np.ndarray:
    if window:
        rows = rows * hanning_window(rows.shape[1])
    return np.fft.ifft(rows, n=fft_len, axis=1)


def range_profile(
    sweep_row: np.ndarray,
    sweep: SweepConfig,
    fft_len: int | None = None,
    window: bool = True,
    beam_angles: tuple[float, float] = (0.0, 0.0),
    range_offset: float = 0.0,
) -> RangeProfile:
    """
    IFFT of the windowed sweep, zero-padded to ``fft_len`` (default 4K).

    Bin b sits at one-way range ``b * c / (2 fft_len step) - range_offset``.
    """
    row = np.asarray(sweep_row, dtype=np.complex128)
    if row.ndim != 1 or len(row) != sweep.points:
        raise ValueError(f"sweep row must have {sweep.points} points, got shape {row.shape}")
    n = _resolve_fft_len(sweep.points, fft_len)
    samples = _transform(row[None], n, window)[0]
    return RangeProfile(samples, SPEED_OF_LIGHT / (2.0 * n * sweep.step), tuple(beam_angles), range_offset)


def process_tensor(
    tensor: MeasurementTensor,
    fft_len: int | None = None,
    window: bool = True,
    range_offset: float | None = None,
) -> MeasurementTensor:
    """Range-process every beam; beam metadata is carried over unchanged."""
    if tensor.domain != "frequency":
        raise ValueError("tensor is already in the range domain")
    n = _resolve_fft_len(tensor.sweep.points, fft_len)
    data = _transform(tensor.data, n, window) if tensor.n_beams else np.zeros((0, n), complex)
    out = MeasurementTensor(
        tensor.beams.copy(), data, tensor.sweep, "range", n,
        tensor.range_offset if range_offset is None else float(range_offset),
        tensor.dwell_time, dict(tensor.metadata),
    )
    out.metadata["window"] = "hann" if window else "rect"
    return out


def profile_of(tensor: MeasurementTensor, beam: int) -> RangeProfile:
    """Single-beam view of a range-domain tensor."""
    phi, theta, _ = tensor.beams[beam]
    return RangeProfile(tensor.data[beam], tensor.bin_spacing, (float(phi), float(theta)), tensor.range_offset)
