import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risim.measurement import (
    KIND_RANGE,
    KIND_SWEEP,
    SPEED_OF_LIGHT,
    MeasurementTensor,
    SweepConfig,
    read_container_kind,
    read_tensor,
    write_tensor,
)
from risim.sfcw import hanning_window, process_tensor, profile_of, range_profile

SWEEP = SweepConfig.from_band(26.5e9, 30.5e9, 256)


def tone(sweep, r):
    return np.exp(-2j * np.pi * sweep.frequencies * 2 * r / SPEED_OF_LIGHT)


def brute_idft(x, n):
    k = np.arange(len(x))
    return np.array([np.sum(x * np.exp(2j * np.pi * k * b / n)) / n for b in range(n)])


def first_sidelobe_db(mag):
    p = int(np.argmax(mag))
    i = p + 1
    while mag[i + 1] < mag[i]:
        i += 1
    return 20 * np.log10(mag[i:i + len(mag) // 8].max() / mag[p])


def width_3db(mag):
    p = int(np.argmax(mag))
    half = mag[p] / np.sqrt(2)
    lo = p
    while mag[lo] >= half:
        lo -= 1
    hi = p
    while mag[hi] >= half:
        hi += 1
    return hi - lo


def test_hann_examples():
    np.testing.assert_allclose(hanning_window(3), [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(hanning_window(5), [0, 0.5, 1, 0.5, 0], atol=1e-15)
    w = hanning_window(256)
    np.testing.assert_allclose(w, w[::-1], atol=1e-15)
    np.testing.assert_allclose(w, np.hanning(256), atol=1e-15)
    with pytest.raises(ValueError):
        hanning_window(0)


def test_table1_sweep():
    assert SWEEP.step == 4e9 / 255
    assert SWEEP.f_stop == pytest.approx(30.5e9)
    assert SWEEP.bandwidth == pytest.approx(4e9)
    assert SWEEP.range_resolution == pytest.approx(0.0375, abs=1e-12)
    assert SWEEP.max_range == pytest.approx(9.60, abs=1e-12)
    assert SWEEP.unambiguous_range == pytest.approx(SPEED_OF_LIGHT / (2 * SWEEP.step))
    with pytest.raises(ValueError):
        SweepConfig(1e9, 1e6, 1)
    with pytest.raises(ValueError):
        SweepConfig(1e9, 0.0, 10)


def test_dc_impulse():
    prof = range_profile(np.ones(256), SWEEP, fft_len=256, window=False)
    assert int(np.argmax(prof.magnitude)) == 0
    assert prof.magnitude[0] == pytest.approx(1.0)
    assert prof.magnitude[1:].max() < 1e-12


def test_on_grid_ramp_matches_brute_dft():
    n = 1024
    spacing = SPEED_OF_LIGHT / (2 * n * SWEEP.step)
    row = tone(SWEEP, 20 * spacing)
    prof = range_profile(row, SWEEP, fft_len=n, window=False)
    assert int(np.argmax(prof.magnitude)) == 20
    assert prof.bin_spacing == pytest.approx(spacing)
    ref = brute_idft(row, n)
    np.testing.assert_allclose(prof.samples, ref, atol=1e-12)


def test_sidelobes_and_mainlobe():
    row = tone(SWEEP, 3.0)
    rect = range_profile(row, SWEEP, fft_len=16 * 256, window=False).magnitude
    hann = range_profile(row, SWEEP, fft_len=16 * 256, window=True).magnitude
    assert first_sidelobe_db(rect) == pytest.approx(-13.3, abs=0.5)
    assert first_sidelobe_db(hann) <= -30
    ratio = width_3db(hann) / width_3db(rect)
    assert 1.4 <= ratio <= 1.7
    # default 4x padding resolves the sidelobe as well
    assert first_sidelobe_db(range_profile(row, SWEEP).magnitude) <= -30


def test_energy_convention():
    rng = np.random.default_rng(0)
    row = rng.normal(size=256) + 1j * rng.normal(size=256)
    for n in (256, 1024):
        prof = range_profile(row, SWEEP, fft_len=n, window=False)
        assert np.sum(np.abs(prof.samples) ** 2) == pytest.approx(np.sum(np.abs(row) ** 2) / n, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(r=st.floats(0.5, 9.0))
def test_peak_within_one_bin(r):
    prof = range_profile(tone(SWEEP, r), SWEEP)
    assert abs(prof.peak_range - r) <= prof.bin_spacing


@settings(max_examples=50, deadline=None)
@given(b=st.integers(10, 950))
def test_on_grid_exact(b):
    prof = range_profile(tone(SWEEP, b * SPEED_OF_LIGHT / (2 * 1024 * SWEEP.step)), SWEEP)
    assert int(np.argmax(prof.magnitude)) == b


def test_range_offset_shifts_axis():
    prof = range_profile(tone(SWEEP, 3.6), SWEEP, range_offset=0.6)
    assert prof.peak_range == pytest.approx(3.0, abs=prof.bin_spacing)


def make_tensor(rows, beams=None):
    rows = np.atleast_2d(rows)
    if beams is None:
        beams = np.column_stack([np.arange(len(rows), dtype=float), np.full(len(rows), 90.0), np.full(len(rows), 3.0)])
    return MeasurementTensor(beams, rows, SWEEP, "frequency")


def test_process_tensor_matches_single_row():
    row = tone(SWEEP, 2.2) + 0.3 * tone(SWEEP, 4.0)
    t = process_tensor(make_tensor(row), range_offset=0.6)
    prof = range_profile(row, SWEEP, range_offset=0.6)
    np.testing.assert_array_equal(t.data[0], prof.samples)
    assert t.fft_len == 1024 and t.bin_spacing == prof.bin_spacing
    view = profile_of(t, 0)
    assert view.peak_range == prof.peak_range
    assert t.metadata["window"] == "hann"
    with pytest.raises(ValueError):
        process_tensor(t)


def test_process_zero_and_pure():
    t = make_tensor(np.zeros((3, 256)))
    assert not process_tensor(t).data.any()
    rows = np.random.default_rng(2).normal(size=(4, 256)).astype(complex)
    a = process_tensor(make_tensor(rows))
    b = process_tensor(make_tensor(rows.copy()))
    assert a.equals(b)


def test_fft_len_validation():
    with pytest.raises(ValueError):
        range_profile(np.ones(256), SWEEP, fft_len=100)
    with pytest.raises(ValueError):
        range_profile(np.ones(10), SWEEP)


def test_tensor_io_round_trip(tmp_path):
    rows = np.random.default_rng(5).normal(size=(3, 256)) * (1 + 0.5j)
    t = make_tensor(rows)
    write_tensor(tmp_path / "t.bin", t)
    back = read_tensor(tmp_path / "t.bin")
    assert back.equals(t) and back.domain == "frequency"
    assert read_container_kind(tmp_path / "t.bin") == KIND_SWEEP
    p = process_tensor(t, fft_len=512, range_offset=0.6)
    write_tensor(tmp_path / "p.bin", p)
    pb = read_tensor(tmp_path / "p.bin")
    assert pb.equals(p) and pb.fft_len == 512 and pb.range_offset == 0.6
    assert read_container_kind(tmp_path / "p.bin") == KIND_RANGE
    (tmp_path / "bad.bin").write_bytes(b"nonsense" * 4)
    with pytest.raises(ValueError):
        read_tensor(tmp_path / "bad.bin")


def test_tensor_validation():
    with pytest.raises(ValueError):
        MeasurementTensor(np.zeros((2, 3)), np.zeros((3, 256), complex), SWEEP, "frequency")
    with pytest.raises(ValueError):
        MeasurementTensor(np.zeros((1, 3)), np.zeros((1, 100), complex), SWEEP, "frequency")
