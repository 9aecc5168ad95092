import math

import numpy as np
import pytest

from photon_correlator import (
    BiasCurvePoint,
    DetectorModel,
    TagStream,
    bias_lookup,
    detect,
    fwhm_to_sigma,
    read_bias_curve,
    sigma_to_fwhm,
    write_bias_curve,
)

from conftest import poisson_stream, random_stream


def ideal(name="det", **kw):
    base = dict(efficiency=1.0, dark_rate_hz=0.0, jitter_fwhm_ps=0.0, dead_time_ps=0)
    base.update(kw)
    return DetectorModel(name, **base)


def test_fwhm_sigma_conversion():
    assert fwhm_to_sigma(170.0) == pytest.approx(72.19, abs=0.01)
    assert sigma_to_fwhm(100.0) == pytest.approx(235.48, abs=0.01)
    assert fwhm_to_sigma(sigma_to_fwhm(3.7)) == pytest.approx(3.7, rel=1e-12)


def test_model_validation():
    with pytest.raises(ValueError, match="efficiency"):
        ideal(efficiency=1.5)
    with pytest.raises(ValueError, match="dark_rate"):
        ideal(dark_rate_hz=-1)
    with pytest.raises(ValueError, match="dead_time"):
        ideal(dead_time_ps=-5)


def test_detect_blind_detector_is_silent(rng):
    photons = random_stream(rng, 1000, 10**9)
    out = detect(photons, ideal(efficiency=0.0), seed=1)
    assert len(out) == 0


def test_detect_requires_duration():
    with pytest.raises(ValueError, match="duration"):
        detect(TagStream.empty(0), ideal(), seed=1)


def test_dead_time_forced_example():
    photons = TagStream.from_pairs([(0, 0), (0, 5_000), (0, 12_000)], 10**6)
    out = detect(photons, ideal(dead_time_ps=10_000), seed=1)
    assert list(out.times) == [0, 12_000]


def test_dark_counts_poisson():
    # photon-free 1 s run at 100 Hz dark rate: 100 +/- 30 tags
    empty = TagStream.empty(10**12)
    out = detect(empty, ideal(efficiency=0.0, dark_rate_hz=100.0), seed=3)
    assert abs(len(out) - 100) <= 30


def test_dead_time_invariant_random_runs():
    rng = np.random.default_rng(17)
    for i in range(100):
        n = int(rng.integers(0, 400))
        duration = int(rng.integers(10_000, 10**7))
        photons = random_stream(rng, n, duration, n_channels=1)
        model = ideal(
            efficiency=float(rng.uniform(0.2, 1.0)),
            dark_rate_hz=float(rng.uniform(0, 1e6)),
            jitter_fwhm_ps=float(rng.uniform(0, 500)),
            dead_time_ps=int(rng.integers(1, 20_000)),
        )
        out = detect(photons, model, seed=int(rng.integers(2**32)))
        if len(out) > 1:
            assert np.diff(out.times).min() >= model.dead_time_ps


def test_count_rate_sanity(rng):
    # eta*r + D within 4 sigma when r*dead_time << 1
    duration = 10**12  # 1 s
    rate = 50_000.0
    photons = poisson_stream(rng, rate, duration)
    model = ideal(efficiency=0.4, dark_rate_hz=1000.0, jitter_fwhm_ps=200.0,
                  dead_time_ps=100)
    out = detect(photons, model, seed=99)
    expected = model.efficiency * rate + model.dark_rate_hz
    assert abs(len(out) - expected) < 4 * math.sqrt(expected)


def test_jitter_calibration_fwhm():
    # sparse, widely spaced photons so output order matches input order
    n = 100_000
    spacing = 1_000_000
    times = np.arange(n, dtype=np.int64) * spacing + 500_000
    photons = TagStream(np.zeros(n, np.uint8), times, int(n * spacing + 10**6))
    model = ideal(jitter_fwhm_ps=170.0)
    out = detect(photons, model, seed=5)
    assert len(out) == n
    deltas = out.times - times
    measured = sigma_to_fwhm(float(np.std(deltas)))
    assert measured == pytest.approx(170.0, rel=0.02)


def test_darks_are_jittered_and_clamped():
    # all mass at the window edge: jitter would push tags outside, the
    # clamp keeps every tag inside [0, duration)
    empty = TagStream.empty(1000)
    out = detect(empty, ideal(efficiency=0.0, dark_rate_hz=1e13,
                              jitter_fwhm_ps=5000.0), seed=11)
    assert len(out) > 0
    assert out.times.min() >= 0
    assert out.times.max() < 1000


def test_detect_deterministic(rng):
    photons = random_stream(rng, 10_000, 10**9, n_channels=1)
    model = ideal(efficiency=0.5, dark_rate_hz=5000.0, jitter_fwhm_ps=300.0,
                  dead_time_ps=2000)
    a = detect(photons, model, seed=21)
    b = detect(photons, model, seed=21)
    c = detect(photons, model, seed=22)
    assert a == b
    assert a != c


class TestBiasCurve:
    CURVE = [
        BiasCurvePoint(0.6, 0.001, 1.0),
        BiasCurvePoint(0.8, 0.01, 100.0),
        BiasCurvePoint(0.95, 0.03, 1000.0),
    ]

    def test_exact_point(self):
        assert bias_lookup(self.CURVE, 0.8) == (0.01, 100.0)

    def test_midpoint_linear_and_log(self):
        eff, dark = bias_lookup(self.CURVE, 0.7)
        assert eff == pytest.approx(0.0055, rel=1e-12)
        assert dark == pytest.approx(10.0, rel=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError, match="outside tabulated range"):
            bias_lookup(self.CURVE, 0.5)
        with pytest.raises(ValueError, match="outside tabulated range"):
            bias_lookup(self.CURVE, 0.96)

    def test_unsorted_curve_rejected(self):
        with pytest.raises(ValueError, match="increasing"):
            bias_lookup(list(reversed(self.CURVE)), 0.8)

    def test_zero_dark_rejected(self):
        curve = [BiasCurvePoint(0.6, 0.001, 0.0), BiasCurvePoint(0.8, 0.01, 10.0)]
        with pytest.raises(ValueError, match="dark_rate_hz > 0"):
            bias_lookup(curve, 0.7)

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "bias.csv"
        write_bias_curve(self.CURVE, path)
        back = read_bias_curve(path)
        assert back == self.CURVE
        # re-emitting yields identical bytes
        path2 = tmp_path / "bias2.csv"
        write_bias_curve(back, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n0.5,0.1,10\n")
        from photon_correlator import FormatError
        with pytest.raises(FormatError, match="header"):
            read_bias_curve(path)
