"""
Forward model: the S21 sweep a VNA would record through a configured RIS.

Each point scatterer q contributes

    sigma_q * F_tx,q(f) * F_q,rx(f)
    F_a,b(f) = sum_nm A_nm * exp(j psi_nm) * exp(-j 2 pi f / c * (r_a,nm + r_nm,b))

i.e. the RIS phase is applied on the way out and again on the way back.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .codebook import Codebook, PhaseProfile
from .geometry import CartesianPoint, RisArray, Scene
from .measurement import SPEED_OF_LIGHT, MeasurementTensor, SweepConfig

__all__ = ["SimOptions", "hop_sums", "simulate_s21", "simulate_tensor", "simulate_phases", "feed_offset",
           "reference_amplitude"]

# Beams per work unit; fixed so the floating-point result never depends on
# the worker count.
BEAM_CHUNK = 32


@dataclass(frozen=True)
class SimOptions:
    """
    Attributes
    ----------
    include_spreading_loss : bool
        Weight each element path by 1 / (r_feed,nm * r_nm,q).
    noise_std : float
        Std of the circular complex Gaussian noise added per frequency point,
        relative to `reference_amplitude` (a unit scatterer 1 m out on
        boresight with the surface focused on it).
    include_direct_leakage : bool
        Add a TX->RX tone of amplitude ``leakage_amplitude`` at one-way
        range ``leakage_range``.
    quantized : bool
        Drive the surface with the 1-bit states (False: continuous phases).
    """

    include_spreading_loss: bool = True
    noise_std: float = 0.0
    include_direct_leakage: bool = False
    leakage_amplitude: float = 1.0
    leakage_range: float = 0.0
    quantized: bool = True

    def __post_init__(self):
        if not self.noise_std >= 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if not self.leakage_range >= 0:
            raise ValueError(f"leakage_range must be >= 0, got {self.leakage_range}")


def _distances(array: RisArray, point: np.ndarray) -> np.ndarray:
    d = array.positions_flat - point
    return np.sqrt(np.einsum("ij,ij->i", d, d))


def _hop_matrix(
    array: RisArray, feed: np.ndarray, target: np.ndarray, freqs: np.ndarray, spreading: bool
) -> np.ndarray:
    """K x E propagation factors for feed -> element -> target."""
    r_feed = _distances(array, feed)
    r_tgt = _distances(array, target)
    path = r_feed + r_tgt
    prop = np.exp((-2j * math.pi / SPEED_OF_LIGHT) * np.outer(freqs, path))
    if spreading:
        prop *= 1.0 / (r_feed * r_tgt)
    return prop


def hop_sums(
    scene: Scene,
    array: RisArray,
    phases: np.ndarray,
    sweep: SweepConfig,
    spreading: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Per-scatterer one-way hop sums for a stack of phase patterns.

    Returns ``(F_tx, F_rx)``, each of shape (Q, K, B) for Q scatterers, K
    frequencies and B patterns. Intended for inspection; the simulator
    accumulates the same quantities without materialising them.
    """
    weights = _weights(phases, array)
    freqs = sweep.frequencies
    tx, rx = scene.tx_position.as_array(), scene.rx_position.as_array()
    f_tx, f_rx = [], []
    for p in scene.positions:
        f_tx.append(_hop_matrix(array, tx, p, freqs, spreading) @ weights)
        f_rx.append(_hop_matrix(array, rx, p, freqs, spreading) @ weights)
    shape = (0, sweep.points, weights.shape[1])
    return (np.array(f_tx) if f_tx else np.zeros(shape, complex),
            np.array(f_rx) if f_rx else np.zeros(shape, complex))


def _weights(phases: np.ndarray, array: RisArray) -> np.ndarray:
    """E x B matrix of exp(j psi) columns."""
    phases = np.asarray(phases, float).reshape(-1, array.size)
    return np.exp(1j * phases).T


def _simulate_block(
    scene: Scene, array: RisArray, phases: np.ndarray, sweep: SweepConfig, opts: SimOptions
) -> np.ndarray:
    """Noise-free B x K sweeps for a block of phase patterns."""
    weights = _weights(phases, array)
    freqs = sweep.frequencies
    out = np.zeros((sweep.points, weights.shape[1]), dtype=np.complex128)
    tx, rx = scene.tx_position.as_array(), scene.rx_position.as_array()
    reciprocal = scene.tx_position == scene.rx_position
    for p, sigma in zip(scene.positions, scene.reflectivities):
        if sigma == 0.0:
            continue
        f_tx = _hop_matrix(array, tx, p, freqs, opts.include_spreading_loss) @ weights
        if reciprocal:
            f_rx = f_tx
        else:
            f_rx = _hop_matrix(array, rx, p, freqs, opts.include_spreading_loss) @ weights
        out += sigma * (f_tx * f_rx)
    if opts.include_direct_leakage:
        tone = opts.leakage_amplitude * np.exp(
            (-2j * math.pi / SPEED_OF_LIGHT) * freqs * (2.0 * opts.leakage_range)
        )
        out += tone[:, None]
    return out.T


def _check_seed(seed) -> int:
    if seed is None:
        return 0
    if isinstance(seed, bool) or int(seed) != seed or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def reference_amplitude(scene: Scene, array: RisArray, sweep: SweepConfig, opts: SimOptions) -> float:
    """|S21| at the centre frequency for a unit scatterer at (1, 0, 0) m with the RIS focused on it."""
    from .codebook import make_profile

    target = CartesianPoint(1.0, 0.0, 0.0)
    wavelength = SPEED_OF_LIGHT / array.design_frequency
    prof = make_profile(array, scene.tx_position, target, wavelength)
    ref_scene = Scene.from_arrays(target.as_array()[None], [1.0], scene.tx_position, scene.rx_position)
    centre = SweepConfig(sweep.center_frequency, sweep.step, 2)
    quiet = SimOptions(opts.include_spreading_loss, quantized=opts.quantized)
    return float(abs(_simulate_block(ref_scene, array, prof.phases(opts.quantized)[None], centre, quiet)[0, 0]))


def _add_noise(rows: np.ndarray, opts: SimOptions, seed: int, first_beam: int, ref: float) -> np.ndarray:
    if opts.noise_std == 0.0:
        return rows
    scale = ref * opts.noise_std / math.sqrt(2.0)
    for i in range(rows.shape[0]):
        rng = np.random.default_rng(seed + first_beam + i)
        noise = rng.standard_normal((rows.shape[1], 2))
        rows[i] += scale * (noise[:, 0] + 1j * noise[:, 1])
    return rows


def simulate_phases(
    scene: Scene,
    array: RisArray,
    phases: np.ndarray,
    sweep: SweepConfig,
    opts: SimOptions = SimOptions(),
    seed: int | None = 0,
    first_beam: int = 0,
) -> np.ndarray:
    """
    Sweeps for a (B, rows, cols) stack of applied phases -> (B, K).

    Noise for row i is drawn from a generator seeded with
    ``seed + first_beam + i`` so any beam can be reproduced in isolation.
    """
    seed = _check_seed(seed)
    phases = np.asarray(phases, float).reshape(-1, array.rows, array.cols)
    rows = _simulate_block(scene, array, phases, sweep, opts)
    ref = reference_amplitude(scene, array, sweep, opts) if opts.noise_std else 1.0
    return _add_noise(rows, opts, seed, first_beam, ref)


def simulate_s21(
    scene: Scene,
    array: RisArray,
    profile: PhaseProfile,
    sweep: SweepConfig,
    opts: SimOptions = SimOptions(),
    seed: int | None = 0,
    beam_index: int = 0,
) -> np.ndarray:
    """Length-K complex S21 for a single RIS configuration."""
    phases = profile.phases(opts.quantized)[None]
    return simulate_phases(scene, array, phases, sweep, opts, seed, beam_index)[0]


def simulate_tensor(
    scene: Scene,
    array: RisArray,
    codebook: Codebook,
    sweep: SweepConfig,
    opts: SimOptions = SimOptions(),
    seed: int | None = 0,
    threads: int = 1,
) -> MeasurementTensor:
    """
    One sweep per codebook entry, in codebook order.

    Work is split into fixed chunks of `BEAM_CHUNK` beams, so results are
    bit-identical whatever ``threads`` is.
    """
    if len(codebook) == 0:
        raise ValueError("codebook is empty")
    seed = _check_seed(seed)
    phases = codebook.phase_stack(opts.quantized)
    starts = range(0, len(codebook), BEAM_CHUNK)

    def work(start):
        return simulate_phases(scene, array, phases[start:start + BEAM_CHUNK], sweep, opts, seed, start)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(work, starts))
    else:
        blocks = [work(s) for s in starts]
    return MeasurementTensor(codebook.beams, np.concatenate(blocks), sweep, "frequency")


def feed_offset(tx: CartesianPoint, rx: CartesianPoint, center: CartesianPoint | None = None) -> float:
    """Mean feed-to-RIS distance, the constant one-way range added by the feed legs."""
    c = center or CartesianPoint(0.0, 0.0, 0.0)
    return 0.5 * (tx.distance_to(c) + rx.distance_to(c))
