"""
Acquisition backends.

A backend answers three calls, always in this order per beam:
``set_pattern(i, entry)`` then ``sweep()``. ``detect()`` supplies the coarse
radar priors. Every call is appended to ``call_log`` so the ordering
contract can be audited after a run.
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

from .codebook import Codebook, CodebookEntry
from .detection import RadarDetection, mock_fmcw_detect
from .geometry import RisArray, Scene
from .measurement import MeasurementTensor, SweepConfig
from .simulate import SimOptions, simulate_phases, simulate_tensor

__all__ = ["BackendError", "AcquisitionBackend", "SimulatedBackend", "ReplayBackend"]


class BackendError(RuntimeError):
    """Acquisition failure; ``beam_index`` is set when a specific beam failed."""

    def __init__(self, message: str, beam_index: int | None = None):
        if beam_index is not None:
            message = f"beam {beam_index}: {message}"
        super().__init__(message)
        self.beam_index = beam_index


@runtime_checkable
class AcquisitionBackend(Protocol):
    capabilities: frozenset
    sweep_config: SweepConfig
    call_log: list

    def detect(self) -> list[RadarDetection]: ...

    def set_pattern(self, beam_index: int, entry: CodebookEntry) -> None: ...

    def sweep(self) -> np.ndarray: ...


class _LoggedBackend:
    capabilities = frozenset({"detect", "set_pattern", "sweep"})

    def __init__(self, sweep_config: SweepConfig):
        self.sweep_config = sweep_config
        self.call_log: list[tuple] = []
        self._current: tuple[int, CodebookEntry] | None = None

    def set_pattern(self, beam_index: int, entry: CodebookEntry) -> None:
        self.call_log.append(("set_pattern", beam_index))
        self._current = (beam_index, entry)

    def _take_pattern(self) -> tuple[int, CodebookEntry]:
        if self._current is None:
            raise BackendError("sweep requested before any pattern was set")
        current, self._current = self._current, None
        self.call_log.append(("sweep", current[0]))
        return current


class SimulatedBackend(_LoggedBackend):
    """
    Physics-backed stand-in for the RIS + VNA + FMCW rig.

    `prefetch` may batch-simulate a whole codebook up front (optionally with
    threads); `sweep` then serves the stored row for a pattern that matches
    the prefetched one bit for bit, and simulates on demand otherwise.
    """

    def __init__(
        self,
        scene: Scene,
        array: RisArray,
        sweep_config: SweepConfig,
        opts: SimOptions = SimOptions(),
        seed: int = 0,
        radar_noise: tuple[float, float] = (0.0, 0.0),
        cluster_radius: float = 0.3,
    ):
        super().__init__(sweep_config)
        self.scene = scene
        self.array = array
        self.opts = opts
        self.seed = seed
        self.radar_noise = radar_noise
        self.cluster_radius = cluster_radius
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @classmethod
    def from_config(cls, config) -> "SimulatedBackend":
        return cls(
            config.build_scene(), config.build_array(), config.sweep, config.sim, config.seed,
            (config.radar.sigma_r, config.radar.sigma_phi), config.radar.cluster_radius,
        )

    def detect(self) -> list[RadarDetection]:
        self.call_log.append(("detect",))
        return mock_fmcw_detect(self.scene, self.radar_noise, self.seed, self.cluster_radius)

    def prefetch(self, codebook: Codebook, threads: int = 1, start: int = 0) -> None:
        if len(codebook) <= start:
            return
        tensor = simulate_tensor(self.scene, self.array, codebook, self.sweep_config, self.opts, self.seed, threads)
        for entry, row in zip(codebook.entries[start:], tensor.data[start:]):
            self._cache[entry.beam_index] = (entry.profile.phases(self.opts.quantized), row)

    def sweep(self) -> np.ndarray:
        beam, entry = self._take_pattern()
        phases = entry.profile.phases(self.opts.quantized)
        cached = self._cache.pop(beam, None)
        if cached is not None and np.array_equal(cached[0], phases):
            return cached[1].copy()
        return simulate_phases(self.scene, self.array, phases[None], self.sweep_config, self.opts, self.seed, beam)[0]


class ReplayBackend(_LoggedBackend):
    """
    Serves sweeps from a recorded tensor.

    Each ``set_pattern`` is checked against the recorded beam geometry, so a
    replay against a different codebook fails loudly instead of silently
    mixing data.
    """

    def __init__(self, tensor: MeasurementTensor, detections: list[RadarDetection] | None = None):
        if tensor.domain != "frequency":
            raise BackendError("replay needs a raw frequency-domain tensor")
        super().__init__(tensor.sweep)
        self.tensor = tensor
        self.detections = list(detections or [])

    def detect(self) -> list[RadarDetection]:
        self.call_log.append(("detect",))
        return list(self.detections)

    def sweep(self) -> np.ndarray:
        beam, entry = self._take_pattern()
        if beam >= self.tensor.n_beams:
            raise BackendError(f"recording holds only {self.tensor.n_beams} beams", beam)
        recorded = self.tensor.beams[beam]
        if not np.array_equal(recorded, [entry.phi, entry.theta, entry.focus_r]):
            raise BackendError(
                f"pattern (phi={entry.phi}, theta={entry.theta}, R={entry.focus_r}) does not match "
                f"recorded beam {tuple(float(v) for v in recorded)}", beam,
            )
        return self.tensor.data[beam].copy()
