#!/usr/bin/env python
"""Tests for SI-SDR, SI-SIR and scene evaluation"""
import numpy as np
import pytest

from pyfive.exceptions import LengthMismatchError
from pyfive.five import FiveConfig, extract_spectrum
from pyfive.metrics import DB_CAP, METRIC_COLUMNS, MetricReport, si_sdr, si_sir, evaluate_extraction, success
from pyfive.scene import SceneSpec, generate_scene
from pyfive.signal_io import MultichannelWave

SMALL = SceneSpec(num_channels=3, num_bins=16, num_frames=300, num_interferers=4, seed=2)


def orthogonal_noise(rng, reference, power_ratio):
    """Noise orthogonal to reference with energy power_ratio times the reference energy."""
    noise = rng.standard_normal(reference.shape)
    noise -= (noise @ reference) / (reference @ reference) * reference
    return noise * np.sqrt(power_ratio * (reference @ reference) / (noise @ noise))


def test_exact_match_is_capped():
    s = np.random.default_rng(0).standard_normal(1000)
    assert si_sdr(s, s) == DB_CAP
    assert si_sdr(0.5 * s, s) == DB_CAP
    assert si_sdr(np.zeros(1000), s) == -DB_CAP


def test_scale_invariance():
    rng = np.random.default_rng(1)
    s = rng.standard_normal(500)
    e = s + 0.3 * rng.standard_normal(500)
    for c in (2.0, -4.0, 0.25):
        assert si_sdr(c * e, s) == si_sdr(e, s)


def test_orthogonal_noise():
    rng = np.random.default_rng(2)
    s = rng.standard_normal(4000)
    assert si_sdr(s + orthogonal_noise(rng, s, 0.01), s) == pytest.approx(20.0, abs=1e-9)
    assert si_sdr(s + orthogonal_noise(rng, s, 1.0), s) == pytest.approx(0.0, abs=1e-9)


def test_more_noise_is_worse():
    rng = np.random.default_rng(3)
    s = rng.standard_normal(2000)
    noise = rng.standard_normal(2000)
    values = [si_sdr(s + level * noise, s) for level in (0.01, 0.1, 0.5, 1.0, 3.0)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_complex_signals_are_real_vectors():
    rng = np.random.default_rng(4)
    s = rng.standard_normal((8, 50)) + 1j * rng.standard_normal((8, 50))
    e = s + 0.2 * (rng.standard_normal((8, 50)) + 1j * rng.standard_normal((8, 50)))
    stacked_e = np.concatenate([e.real.ravel(), e.imag.ravel()])
    stacked_s = np.concatenate([s.real.ravel(), s.imag.ravel()])
    assert si_sdr(e, s) == pytest.approx(si_sdr(stacked_e, stacked_s), abs=1e-10)
    # a quarter turn is orthogonal in the real inner product
    assert si_sdr(1j * s, s) < -200


def test_sdr_errors():
    with pytest.raises(ValueError):
        si_sdr(np.ones(10), np.zeros(10))
    with pytest.raises(LengthMismatchError):
        si_sdr(np.ones(10), np.ones(11))


def test_si_sir():
    rng = np.random.default_rng(5)
    t = rng.standard_normal(1000)
    b = orthogonal_noise(rng, t, 1.0)
    assert si_sir(t, t, b) > 200
    assert si_sir(b, t, b) < -200
    assert si_sir(t + b, t, b) == pytest.approx(0.0, abs=1e-9)
    assert si_sir(3.0 * t + b, t, b) == pytest.approx(10 * np.log10(9.0), abs=1e-9)
    with pytest.raises(ValueError):
        si_sir(t, t, np.zeros(1000))
    with pytest.raises(LengthMismatchError):
        si_sir(t, t, b[:-1])


def test_reference_channel_has_no_improvement():
    scene = generate_scene(SMALL)
    report = evaluate_extraction(scene, scene.reference)
    assert report.delta_si_sdr_db == 0.0
    assert report.delta_si_sir_db == 0.0
    assert not success(report)


def test_perfect_extraction():
    scene = generate_scene(SMALL)
    baseline = evaluate_extraction(scene, scene.reference)
    report = evaluate_extraction(scene, scene.target_image)
    assert report.si_sdr_db == DB_CAP
    assert report.si_sir_db > 200
    assert report.delta_si_sdr_db == pytest.approx(DB_CAP - baseline.si_sdr_db)
    assert report.delta_si_sir_db == pytest.approx(report.si_sir_db - baseline.si_sir_db)
    assert success(report)


def test_input_sdr_matches_scene_sinr():
    scene = generate_scene(SceneSpec(num_channels=2, num_bins=8, num_frames=20000, seed=9))
    report = evaluate_extraction(scene, scene.reference)
    # target and background are independent, so the input SI-SDR is close to the SINR
    assert report.si_sdr_db == pytest.approx(scene.spec.input_sinr_db, abs=0.3)


def test_extraction_matches_direct_formula():
    scene = generate_scene(SMALL)
    projected, _, _ = extract_spectrum(scene.spectrum(), FiveConfig(max_iterations=3))
    report = evaluate_extraction(scene, projected)
    e, s = projected.ravel(), scene.target_image.ravel()
    alpha = np.real(np.vdot(s, e)) / np.real(np.vdot(s, s))
    direct = 10 * np.log10(np.sum(np.abs(alpha * s) ** 2) / np.sum(np.abs(e - alpha * s) ** 2))
    assert report.si_sdr_db == pytest.approx(direct, abs=1e-9)
    with pytest.raises(LengthMismatchError):
        evaluate_extraction(scene, projected[:, 1:])


def test_time_domain_evaluation():
    scene = generate_scene(SceneSpec(num_channels=2, num_bins=65, num_frames=40, num_interferers=2,
                                     mixing='convolutive', filter_length=32))
    report = evaluate_extraction(scene, MultichannelWave(scene.spec.sample_rate, scene.reference))
    assert report.delta_si_sdr_db == 0.0
    assert report.delta_si_sir_db == 0.0
    with pytest.raises(LengthMismatchError):
        evaluate_extraction(scene, scene.reference[:-1])


def test_report_rows():
    report = MetricReport(12.0, 15.0, 7.0, 9.5)
    row = report.as_row(3, 'five', 10)
    assert list(row) == METRIC_COLUMNS
    assert row['delta_si_sir'] == 9.5
    assert row['success'] is True
    assert MetricReport(12.0, 15.0, 7.0, 0.0).as_row(3, 'channel1', 0)['success'] is False
    assert success(report, threshold_db=9.5)
    assert not success(report, threshold_db=10.0)
