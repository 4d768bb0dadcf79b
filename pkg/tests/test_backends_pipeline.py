import math

import numpy as np
import pytest

from risim.backends import AcquisitionBackend, BackendError, ReplayBackend, SimulatedBackend
from risim.codebook import build_codebook
from risim.config import load_scenario, parse_scenario
from risim.detection import RadarDetection
from risim.geometry import CartesianPoint, build_ris_array
from risim.measurement import SPEED_OF_LIGHT, read_tensor
from risim.pipeline import DATA_ARTIFACTS, beam_report, codebook_for, rois_for, run_pipeline

TX = CartesianPoint(0.6, 0, 0)
LAM = SPEED_OF_LIGHT / 28.5e9

SMALL = {
    "name": "small",
    "seed": 4,
    "sweep": {"f_min": 26.5e9, "f_max": 30.5e9, "points": 128},
    "ris": {"rows": 8, "cols": 8},
    "targets": [
        {"name": "a", "shape": "point", "center": [2.0, 0.3, -0.2]},
        {"name": "b", "shape": "sphere", "center": [2.5, -0.9, -0.2], "radius": 0.1, "points": 8},
    ],
    "roi": {"step": 4.0, "span_phi": 8.0, "span_theta": 8.0},
    "imaging": {"voxel_size": 0.05, "tau_db": -20.0},
    "sim": {"noise_std": 0.01},
}


@pytest.fixture
def small():
    return parse_scenario(SMALL, "small")


class FlakyBackend(SimulatedBackend):
    """Simulated backend whose sweep fails once at a chosen beam."""

    def __init__(self, *args, fail_at, **kw):
        super().__init__(*args, **kw)
        self.fail_at = fail_at

    def sweep(self):
        if self._current is not None and self._current[0] == self.fail_at:
            self.fail_at = None
            self._current = None
            raise RuntimeError("VNA timeout")
        return super().sweep()


class ShortBackend(SimulatedBackend):
    def sweep(self):
        return super().sweep()[:-1]


def test_protocol_and_ordering(small):
    backend = SimulatedBackend.from_config(small)
    assert isinstance(backend, AcquisitionBackend)
    res = run_pipeline(small, backend)
    log = backend.call_log
    assert log[0] == ("detect",)
    pairs = log[1:]
    assert len(pairs) == 2 * len(res.codebook)
    for i in range(len(res.codebook)):
        assert pairs[2 * i] == ("set_pattern", i)
        assert pairs[2 * i + 1] == ("sweep", i)
    with pytest.raises(BackendError):
        backend.sweep()


def test_result_shapes(small):
    res = run_pipeline(small)
    assert len(res.detections) == 2
    n = sum(r.n_beams for r in res.rois)
    assert n == 2 * 9 == len(res.codebook) == res.tensor.n_beams
    assert res.tensor.data.shape == (n, 128)
    assert res.profiles.fft_len == 512
    assert res.report["beams"] == n
    assert set(res.report["timing_s"]) == {"detect", "codebook", "acquire", "process", "reconstruct"}


def test_determinism_and_replay(small, tmp_path):
    a = run_pipeline(small, out_dir=tmp_path / "a")
    run_pipeline(small, out_dir=tmp_path / "b", threads=3)
    for name in DATA_ARTIFACTS:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    replay = ReplayBackend(read_tensor(tmp_path / "a" / "tensor.bin"), a.detections)
    run_pipeline(small, replay, out_dir=tmp_path / "c")
    for name in DATA_ARTIFACTS:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "c" / name).read_bytes(), name
    assert replay.call_log[1::2] == [("set_pattern", i) for i in range(len(a.codebook))]


def test_replay_rejects_mismatch(small):
    res = run_pipeline(small)
    wrong = [RadarDetection(d.r, d.phi + 1.0) for d in res.detections]
    with pytest.raises(BackendError) as err:
        run_pipeline(small, ReplayBackend(res.tensor, wrong))
    assert err.value.beam_index == 0
    short = res.tensor.subset(slice(0, 3))
    with pytest.raises(BackendError, match="beam 3"):
        run_pipeline(small, ReplayBackend(short, res.detections))
    with pytest.raises(BackendError):
        ReplayBackend(res.profiles)


def test_failure_flush_and_resume(small, tmp_path):
    ref = run_pipeline(small, out_dir=tmp_path / "ref")
    flaky = FlakyBackend(*_sim_args(small), fail_at=7)
    with pytest.raises(BackendError) as err:
        run_pipeline(small, flaky, out_dir=tmp_path / "run")
    assert err.value.beam_index == 7
    assert "beam 7" in str(err.value)
    partial = read_tensor(tmp_path / "run" / "tensor.partial.bin")
    assert partial.n_beams == 7
    np.testing.assert_array_equal(partial.data, ref.tensor.data[:7])
    resumed_backend = SimulatedBackend.from_config(small)
    resumed = run_pipeline(small, resumed_backend, out_dir=tmp_path / "run")
    assert not (tmp_path / "run" / "tensor.partial.bin").exists()
    assert resumed_backend.call_log[1] == ("set_pattern", 7)
    for name in DATA_ARTIFACTS:
        assert (tmp_path / "ref" / name).read_bytes() == (tmp_path / "run" / name).read_bytes(), name


def test_wrong_sweep_length(small):
    with pytest.raises(BackendError, match="beam 0"):
        run_pipeline(small, ShortBackend(*_sim_args(small)))


def _sim_args(cfg):
    return (cfg.build_scene(), cfg.build_array(), cfg.sweep, cfg.sim, cfg.seed,
            (cfg.radar.sigma_r, cfg.radar.sigma_phi), cfg.radar.cluster_radius)


def test_uncached_sweep_matches_prefetched(small):
    # a backend asked for a beam it never prefetched simulates it on demand
    cold = SimulatedBackend.from_config(small)
    warm = SimulatedBackend.from_config(small)
    book = codebook_for(small, rois_for(small, warm.detect()))
    warm.prefetch(book)
    for e in book.entries[:4]:
        cold.set_pattern(e.beam_index, e)
        warm.set_pattern(e.beam_index, e)
        np.testing.assert_allclose(cold.sweep(), warm.sweep(), rtol=1e-12, atol=1e-18)


def test_empty_scene(tmp_path):
    cfg = parse_scenario({"ris": {"rows": 4, "cols": 4}, "sweep": {"f_min": 27e9, "f_max": 28e9, "points": 16}})
    res = run_pipeline(cfg, out_dir=tmp_path)
    assert len(res.codebook) == 0 and res.tensor.n_beams == 0
    assert res.voxels.values.size == 0
    assert (tmp_path / "report.json").exists()


def test_beam_report_examples():
    one = build_ris_array(1, 1, 0.005)
    book = build_codebook(one, TX, [(0, 90), (10, 95), (-20, 100)], 2.0, LAM)
    assert [r["ratio"] for r in beam_report(book, one, TX, LAM)] == pytest.approx([1, 1, 1])
    big = build_ris_array(40, 40, 0.005)
    grid = [(phi, theta) for theta in (93.0, 97.0, 101.0) for phi in (-20.0, -10.0, 0.0, 15.0)]
    rows = beam_report(build_codebook(big, TX, grid, 3.18, LAM), big, TX, LAM)
    ratios = np.array([r["ratio"] for r in rows])
    assert np.all(np.abs(ratios - 2 / math.pi) < 0.06)
    assert abs(ratios.mean() - 2 / math.pi) < 0.02
    assert all(r["continuous"] == pytest.approx(1600) for r in rows)
    from risim.codebook import Codebook
    assert beam_report(Codebook((), 40, 40), big, TX, LAM) == []


@pytest.fixture(scope="module")
def desk1():
    return run_pipeline(load_scenario("scenario1_desk"))


def _silhouette_gap(phi, theta):
    # angular distance from a direction to the nearest scatterer above the hips;
    # the extended arm pulls the strongest beam off the torso centroid
    from risim.geometry import cart_to_sph_array

    _, pts, _ = load_scenario("scenario1_desk").target_clouds()[0]
    _, p, t = cart_to_sph_array(pts[pts[:, 2] > -0.5]).T
    return float(np.min(np.hypot(p - phi, t - theta)))


def test_desk1_strongest_beam_points_at_target(desk1):
    energy = np.sum(np.abs(desk1.tensor.data) ** 2, axis=1)
    best = desk1.tensor.beams[int(np.argmax(energy))]
    assert _silhouette_gap(best[0], best[1]) <= 1.0
    assert abs(best[0] - -18.4) <= 2.0


def test_desk1_2d_peak(desk1):
    phi, theta = desk1.image_2d.peak_direction()
    assert _silhouette_gap(phi, theta) <= 1.0
    assert abs(phi - -18.4) <= 2.0


def test_desk1_sample_max_near_cloud(desk1):
    from risim.volumetric import samples_from_profiles

    cfg = load_scenario("scenario1_desk")
    s = samples_from_profiles(desk1.profiles, desk1.rois)
    peak = s.positions[int(np.argmax(s.magnitudes))]
    _, pts, _ = cfg.target_clouds()[0]
    nearest = np.min(np.linalg.norm(pts - peak, axis=1))
    # two range cells plus the lateral footprint of one beam step at the focus
    tol = 2 * cfg.sweep.range_resolution + desk1.rois[0].focus_r * math.radians(cfg.roi.step)
    assert nearest <= tol
