import numpy as np
import pytest

from risim.config import ConfigError, bundled_scenarios, load_scenario, parse_scenario
from risim.targets import PART_REFLECTIVITY, box_cloud, humanoid_cloud, make_cloud, sphere_cloud


def test_bundled_list():
    names = bundled_scenarios()
    for n in ("table1", "scenario1", "scenario2", "scenario3", "scenario1_desk", "scenario2_desk", "scenario3_desk"):
        assert n in names
    for n in names:
        load_scenario(n)


def test_table1():
    cfg = load_scenario("table1")
    assert cfg.sweep.f_start == 26.5e9
    assert cfg.sweep.f_stop == pytest.approx(30.5e9)
    assert cfg.sweep.points == 256
    assert (cfg.ris.rows, cfg.ris.cols, cfg.ris.pitch) == (40, 40, 0.005)
    assert cfg.tx.as_array().tolist() == [0.6, 0.0, 0.0]


def test_scenario1_reference_values():
    cfg = load_scenario("scenario1")
    (t,) = cfg.targets
    assert t.shape == "humanoid" and t.center == (3.0, -1.0, -0.38)
    assert cfg.roi.step == 0.5
    assert (cfg.imaging.voxel_size, cfg.imaging.sigma, cfg.imaging.tau_db) == (0.02, 2.0, -65.0)
    assert cfg.imaging.delta == 0.10
    _, pts, _ = cfg.target_clouds()[0]
    np.testing.assert_allclose(pts.mean(axis=0), [3.0, -1.0, -0.38], atol=1e-12)


@pytest.mark.parametrize("name,step,l,sigma,tau", [
    ("scenario2", 1.0, 0.04, 2.0, -79.0),
    ("scenario3", 3.0, 0.06, 0.8, -85.0),
])
def test_other_reference_scenarios(name, step, l, sigma, tau):
    cfg = load_scenario(name)
    assert cfg.roi.step == step
    assert (cfg.imaging.voxel_size, cfg.imaging.sigma, cfg.imaging.tau_db) == (l, sigma, tau)


def test_scenario_target_positions():
    s2 = {t.name: t.center for t in load_scenario("scenario2").targets}
    assert sorted(s2.values()) == [(2.0, 1.0, -0.3), (3.0, -1.0, -0.38)]
    s3 = sorted(t.center for t in load_scenario("scenario3").targets)
    assert s3 == [(2.0, -1.5, -0.47), (2.0, 1.0, -0.44), (3.0, 0.0, -0.4), (3.9, -1.2, -1.09)]


def test_desk_scenario1():
    cfg = load_scenario("scenario1_desk")
    assert (cfg.ris.rows, cfg.ris.cols) == (20, 20)
    assert (cfg.roi.step, cfg.roi.span_phi, cfg.roi.span_theta) == (2.0, 20.0, 20.0)
    _, pts, _ = cfg.target_clouds()[0]
    assert 40 <= len(pts) <= 60


def test_load_from_path_and_seed(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text('name = "x"\nseed = 5\n[sweep]\nf_start = 27e9\nstep = 1e8\npoints = 16\n')
    cfg = load_scenario(p)
    assert cfg.seed == 5 and cfg.sweep.points == 16 and cfg.source == str(p)
    assert cfg.build_scene().scatterers == ()


@pytest.mark.parametrize("text,where", [
    ("[sweep]\nf_min = 26e9\nf_max = 30e9\npoints = 256\nbogus = 1\n", "sweep.bogus"),
    ("[ris]\nrows = -4\n", "ris.rows"),
    ("[ris]\nrows = 2.5\n", "ris.rows"),
    ("[imaging]\ntau_db = 5.0\n", "imaging"),
    ("[[targets]]\nshape = \"cone\"\ncenter = [1, 0, 0]\n", "targets[0].shape"),
    ("[[targets]]\nshape = \"sphere\"\n", "targets[0].center"),
    ("[[targets]]\nshape = \"sphere\"\ncenter = [1, 0]\n", "targets[0].center"),
    ("[processing]\nfft_len = 10\n", "processing.fft_len"),
    ("[processing]\ngrid = \"cube\"\n", "processing.grid"),
    ("wat = 3\n", "wat"),
    ("[sweep]\nf_min = 30e9\nf_max = 26e9\npoints = 10\n", "sweep"),
    ("[sweep]\nf_min = 26e9\npoints = 10\n", "sweep.f_max"),
    ("[sim]\nnoise_std = -1\n", "sim.noise_std"),
    ("[sim]\nquantized = 1\n", "sim.quantized"),
])
def test_validation_names_field(tmp_path, text, where):
    p = tmp_path / "bad.toml"
    p.write_text(text)
    with pytest.raises(ConfigError) as err:
        load_scenario(p)
    assert where in str(err.value)
    assert str(p) in str(err.value)


def test_parse_error_names_line(tmp_path):
    p = tmp_path / "broken.toml"
    p.write_text("name = \"ok\"\n[sweep\npoints = 3\n")
    with pytest.raises(ConfigError, match="line 2"):
        load_scenario(p)


def test_missing_file():
    with pytest.raises(ConfigError, match="no such file"):
        load_scenario("/nonexistent/thing.toml")


def test_parse_defaults():
    cfg = parse_scenario({})
    assert cfg.sweep.points == 256 and cfg.ris.rows == 40
    assert cfg.wavelength == pytest.approx(3e8 / 28.5e9)


def test_clouds_deterministic_and_centred():
    for shape, kw in [("sphere", {"radius": 0.15, "points": 30}), ("box", {"size": (0.72, 0.61, 0.42), "points": 40}),
                      ("humanoid", {"height": 1.8, "width": 0.45, "points": 50}), ("point", {})]:
        a, wa = make_cloud(shape, (3.0, -1.0, -0.4), seed=3, **kw)
        b, wb = make_cloud(shape, (3.0, -1.0, -0.4), seed=3, **kw)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(wa, wb)
        np.testing.assert_allclose(a.mean(axis=0), [3.0, -1.0, -0.4], atol=1e-12)
    with pytest.raises(ValueError):
        make_cloud("cone", (1, 0, 0))


def test_clouds_face_the_ris():
    c = np.array([2.0, 1.0, -0.3])
    s = sphere_cloud(c, 0.15, 30, seed=0)
    # algebraic sphere fit: |p|^2 = 2 p.c0 + (r^2 - |c0|^2)
    A = np.column_stack([2 * s, np.ones(len(s))])
    sol = np.linalg.lstsq(A, np.sum(s * s, axis=1), rcond=None)[0]
    c0 = sol[:3]
    assert np.sqrt(sol[3] + c0 @ c0) == pytest.approx(0.15, rel=1e-6)
    # the shell centre lies behind the sampled cap, as seen from the RIS
    assert np.all((s - c0) @ (c0 / np.linalg.norm(c0)) < 0)
    b = box_cloud((3.9, -1.2, -1.09), (0.72, 0.61, 0.42), 40, seed=0)
    assert b.min(axis=0)[0] >= 3.9 - 0.36 - 0.2 and 25 <= len(b) <= 60
    pts, w = humanoid_cloud((3.0, -1.0, -0.38), 1.85, 0.5, 50, seed=1)
    assert np.ptp(pts[:, 2]) == pytest.approx(1.85, abs=0.15)
    assert set(np.unique(w)) <= set(PART_REFLECTIVITY.values())
    assert 40 <= len(pts) <= 60
