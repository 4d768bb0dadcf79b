"""
Stepped-frequency sweep plans and the beam-indexed measurement tensor.

The tensor container is also the on-disk format shared by raw sweeps,
processed range profiles and dense voxel grids:

    offset  type        field
    0       8s          magic  b"RISMTNS\\0"
    8       <u4         format version (1)
    12      <u4         payload kind (0 sweep, 1 range profiles, 2 voxel grid)

Tensor payloads (kind 0/1) continue with

    <u8 K, <u8 beams, <u8 samples per beam, <u8 fft_len (0 for sweeps),
    <f8 f_start, <f8 step, <f8 range_offset, <f8 dwell_time (reserved),
    beams x (<f8 phi, <f8 theta, <f8 focus_R),
    beams x samples x (<f8 re, <f8 im)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from os import PathLike
from typing import BinaryIO

import numpy as np

__all__ = [
    "SPEED_OF_LIGHT",
    "SweepConfig",
    "MeasurementTensor",
    "MAGIC",
    "FORMAT_VERSION",
    "KIND_SWEEP",
    "KIND_RANGE",
    "KIND_VOXEL",
    "write_tensor",
    "read_tensor",
    "read_container_kind",
]

# Range arithmetic uses the rounded value; with it a 4 GHz / 256 point plan
# gives exactly 3.75 cm and 9.60 m.
SPEED_OF_LIGHT = 3.0e8

MAGIC = b"RISMTNS\x00"
FORMAT_VERSION = 1
KIND_SWEEP = 0
KIND_RANGE = 1
KIND_VOXEL = 2

_PREAMBLE = struct.Struct("<8sII")
_TENSOR_HEADER = struct.Struct("<QQQQdddd")


@dataclass(frozen=True)
class SweepConfig:
    """
    ``points`` tones starting at ``f_start`` spaced ``step`` Hz apart.

    Derived quantities are properties so they can never go stale.
    """

    f_start: float
    step: float
    points: int

    def __post_init__(self):
        if int(self.points) != self.points or self.points < 2:
            raise ValueError(f"a sweep needs at least 2 points, got {self.points}")
        if not self.step > 0:
            raise ValueError(f"frequency step must be positive, got {self.step}")
        if not self.f_start > 0:
            raise ValueError(f"start frequency must be positive, got {self.f_start}")
        object.__setattr__(self, "points", int(self.points))

    @classmethod
    def from_band(cls, f_min: float, f_max: float, points: int) -> "SweepConfig":
        if not f_max > f_min:
            raise ValueError(f"empty band [{f_min}, {f_max}]")
        return cls(float(f_min), (f_max - f_min) / (points - 1), points)

    @property
    def frequencies(self) -> np.ndarray:
        return self.f_start + np.arange(self.points) * self.step

    @property
    def f_stop(self) -> float:
        return self.f_start + (self.points - 1) * self.step

    @property
    def center_frequency(self) -> float:
        return 0.5 * (self.f_start + self.f_stop)

    @property
    def bandwidth(self) -> float:
        return self.step * (self.points - 1)

    @property
    def range_resolution(self) -> float:
        """c / 2B."""
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth)

    @property
    def max_range(self) -> float:
        """Observable span quoted for a plan: K range cells of c / 2B."""
        return self.points * self.range_resolution

    @property
    def unambiguous_range(self) -> float:
        """c / (2 step): the alias period of the IFFT range axis."""
        return SPEED_OF_LIGHT / (2.0 * self.step)


@dataclass(eq=False)
class MeasurementTensor:
    """
    Complex data indexed by beam.

    ``beams`` holds one ``(phi, theta, focus_R)`` row per beam. In the
    frequency domain ``data`` is beams x K raw S21; in the range domain it is
    beams x fft_len complex range profiles and ``range_offset`` (metres) is
    subtracted from the bin ranges to express them from the RIS.
    """

    beams: np.ndarray
    data: np.ndarray
    sweep: SweepConfig
    domain: str = "frequency"
    fft_len: int = 0
    range_offset: float = 0.0
    dwell_time: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beams = np.asarray(self.beams, dtype=np.float64).reshape(-1, 3)
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim == 1 and len(self.beams) == 0 and self.data.size == 0:
            width = self.sweep.points if self.domain == "frequency" else self.fft_len
            self.data = self.data.reshape(0, width)
        if self.data.ndim != 2 or self.data.shape[0] != len(self.beams):
            raise ValueError(
                f"data rows ({self.data.shape}) must match beam count ({len(self.beams)})"
            )
        if self.domain == "frequency":
            if self.data.shape[1] != self.sweep.points:
                raise ValueError(f"sweep rows must have {self.sweep.points} points, got {self.data.shape[1]}")
        elif self.domain == "range":
            if self.fft_len < self.sweep.points or self.data.shape[1] != self.fft_len:
                raise ValueError(f"range rows must have fft_len={self.fft_len} >= K samples")
        else:
            raise ValueError(f"unknown domain {self.domain!r}")

    @property
    def n_beams(self) -> int:
        return len(self.beams)

    @property
    def bin_spacing(self) -> float:
        if self.domain != "range":
            raise ValueError("bin spacing is only defined for range-domain tensors")
        return SPEED_OF_LIGHT / (2.0 * self.fft_len * self.sweep.step)

    @property
    def bin_ranges(self) -> np.ndarray:
        """One-way range of each bin measured from the RIS (offset removed)."""
        return np.arange(self.fft_len) * self.bin_spacing - self.range_offset

    def subset(self, index) -> "MeasurementTensor":
        return MeasurementTensor(
            self.beams[index], self.data[index], self.sweep, self.domain,
            self.fft_len, self.range_offset, self.dwell_time, dict(self.metadata),
        )

    def equals(self, other: "MeasurementTensor") -> bool:
        """Bit-exact comparison of everything that is serialised."""
        return (
            self.sweep == other.sweep
            and self.domain == other.domain
            and self.fft_len == other.fft_len
            and self.range_offset == other.range_offset
            and self.beams.tobytes() == other.beams.tobytes()
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )


def _write_preamble(fh: BinaryIO, kind: int) -> None:
    fh.write(_PREAMBLE.pack(MAGIC, FORMAT_VERSION, kind))


def _read_preamble(fh: BinaryIO) -> int:
    raw = fh.read(_PREAMBLE.size)
    if len(raw) != _PREAMBLE.size:
        raise ValueError("file too short for container preamble")
    magic, version, kind = _PREAMBLE.unpack(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported container version {version}")
    return kind


def read_container_kind(path: str | PathLike) -> int:
    with open(path, "rb") as fh:
        return _read_preamble(fh)


def write_tensor(path: str | PathLike, tensor: MeasurementTensor) -> None:
    kind = KIND_SWEEP if tensor.domain == "frequency" else KIND_RANGE
    samples = tensor.data.shape[1]
    with open(path, "wb") as fh:
        _write_preamble(fh, kind)
        fh.write(
            _TENSOR_HEADER.pack(
                tensor.sweep.points, tensor.n_beams, samples, tensor.fft_len,
                tensor.sweep.f_start, tensor.sweep.step, tensor.range_offset, tensor.dwell_time,
            )
        )
        fh.write(np.ascontiguousarray(tensor.beams, dtype="<f8").tobytes())
        interleaved = np.empty((tensor.n_beams, samples, 2), dtype="<f8")
        interleaved[..., 0] = tensor.data.real
        interleaved[..., 1] = tensor.data.imag
        fh.write(interleaved.tobytes())


def read_tensor(path: str | PathLike) -> MeasurementTensor:
    with open(path, "rb") as fh:
        kind = _read_preamble(fh)
        if kind not in (KIND_SWEEP, KIND_RANGE):
            raise ValueError(f"container kind {kind} is not a measurement tensor")
        raw = fh.read(_TENSOR_HEADER.size)
        if len(raw) != _TENSOR_HEADER.size:
            raise ValueError("truncated tensor header")
        k, n_beams, samples, fft_len, f_start, step, offset, dwell = _TENSOR_HEADER.unpack(raw)
        beams = np.frombuffer(fh.read(8 * 3 * n_beams), dtype="<f8")
        payload = np.frombuffer(fh.read(16 * n_beams * samples), dtype="<f8")
        if beams.size != 3 * n_beams or payload.size != 2 * n_beams * samples:
            raise ValueError("truncated tensor payload")
    payload = payload.reshape(n_beams, samples, 2)
    data = np.empty((n_beams, samples), dtype=np.complex128)
    data.real = payload[..., 0]
    data.imag = payload[..., 1]
    return MeasurementTensor(
        beams.reshape(n_beams, 3).astype(np.float64),
        data,
        SweepConfig(f_start, step, int(k)),
        "frequency" if kind == KIND_SWEEP else "range",
        int(fft_len),
        offset,
        dwell,
    )
