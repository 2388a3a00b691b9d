import numpy as np
import pytest

from config.settings import FrameConfig, PathLossModel, PathLossParams, load_scenario
from core.channel import (
    LargeScaleMatrix, contamination, estimate_quality, export_beta_csv, hata_cost231_constant,
    large_scale, pathloss_db, small_scale,
)
from core.scenario import build_layout

ONE_SLOPE = PathLossParams()
THREE_SLOPE = PathLossParams(model=PathLossModel.THREE_SLOPE)


def test_one_slope_reference_distance():
    assert pathloss_db(15.0, ONE_SLOPE) == pytest.approx(70.28)
    assert 10 ** (-pathloss_db(15.0, ONE_SLOPE) / 10) == pytest.approx(10 ** -7.028)


def test_one_slope_one_decade():
    assert pathloss_db(150.0, ONE_SLOPE) == pytest.approx(70.28 + 25.9)


def test_distance_clamped_at_one_metre():
    assert pathloss_db(0.0, ONE_SLOPE) == pytest.approx(pathloss_db(1.0, ONE_SLOPE))


@pytest.mark.parametrize("boundary", [10.0, 50.0])
def test_three_slope_continuous_at_breakpoints(boundary):
    below = pathloss_db(boundary, THREE_SLOPE)
    above = pathloss_db(boundary * (1 + 1e-12), THREE_SLOPE)
    assert above == pytest.approx(below, abs=1e-9)


def test_three_slope_monotone_in_distance():
    d = np.linspace(1, 2000, 5000)
    assert np.all(np.diff(pathloss_db(d, THREE_SLOPE)) >= -1e-12)


def test_three_slope_shadowing_only_beyond_d1():
    d = np.array([5.0, 30.0, 200.0])
    shadow = np.full(3, 8.0)
    delta = pathloss_db(d, THREE_SLOPE, shadow) - pathloss_db(d, THREE_SLOPE)
    np.testing.assert_allclose(delta, [0.0, 0.0, 8.0])


def test_hata_constant_for_default_three_slope():
    assert hata_cost231_constant(1.9e9, 15.0, 1.65) == pytest.approx(140.7151, abs=1e-3)


def test_large_scale_deterministic_and_positive(small_config):
    layout = build_layout(small_config, rng_seed=0)
    a = large_scale(layout, small_config, rng_seed=5)
    b = large_scale(layout, small_config, rng_seed=5)
    np.testing.assert_array_equal(a.beta, b.beta)
    assert a.shape == (16, 4)
    assert np.all(a.beta > 0)


def test_large_scale_matrix_rejects_zero():
    with pytest.raises(ValueError):
        LargeScaleMatrix(np.array([[0.1, 0.0]]))


def test_small_scale_unit_variance_and_zero_mean():
    beta = LargeScaleMatrix(np.ones((1, 100_000)))
    g = small_scale(beta, rng_seed=3).g
    assert np.mean(np.abs(g) ** 2) == pytest.approx(1.0, abs=0.01)
    # 3 standard errors of each quadrature component
    bound = 3 * np.sqrt(0.5 / g.size)
    assert abs(g.real.mean()) < bound and abs(g.imag.mean()) < bound


def test_small_scale_same_seed_same_draw():
    beta = LargeScaleMatrix(np.full((4, 3), 0.5))
    np.testing.assert_array_equal(small_scale(beta, rng_seed=9).g, small_scale(beta, rng_seed=9).g)


def test_small_scale_variance_tracks_beta():
    beta = LargeScaleMatrix(np.array([[0.2], [2.0]]))
    draws = np.stack([small_scale(beta, rng=np.random.default_rng(s)).g[:, 0] for s in range(20_000)])
    power = np.abs(draws) ** 2
    se = power.std(axis=0) / np.sqrt(len(power))
    assert np.all(np.abs(power.mean(axis=0) - beta.beta[:, 0]) < 3 * se)


def test_estimate_quality_substitution():
    frame = FrameConfig(tau=200, tau_up=10, tau_dd=190)
    gamma = estimate_quality(LargeScaleMatrix(np.array([[0.1]])), [0], frame, pilot_snr=1.0).gamma
    assert gamma[0, 0] == pytest.approx(0.05)


def test_estimate_quality_perfect_limit():
    frame = FrameConfig(tau=200, tau_up=2, tau_dd=198)
    beta = LargeScaleMatrix(np.array([[0.3, 0.7]]))
    gamma = estimate_quality(beta, [0, 1], frame, pilot_snr=1e12).gamma
    np.testing.assert_allclose(gamma, beta.beta, rtol=1e-9)


def test_copilot_users_degrade_estimate():
    frame = FrameConfig(tau=200, tau_up=10, tau_dd=190)
    beta = LargeScaleMatrix(np.array([[0.1, 0.1]]))
    shared = estimate_quality(beta, [0, 0], frame, pilot_snr=100.0).gamma
    alone = estimate_quality(beta, [0, 1], frame, pilot_snr=100.0).gamma
    tp = 10 * 100.0
    assert shared[0, 0] == pytest.approx(tp * 0.01 / (2 * tp * 0.1 + 1))
    assert shared[0, 0] < alone[0, 0]


def test_gamma_never_exceeds_beta(small_instance):
    assert np.all(small_instance["gamma"] <= small_instance["beta"])
    assert np.all(small_instance["gamma"] > 0)


def test_gamma_monotone_in_pilot_snr():
    frame = FrameConfig(tau=200, tau_up=2, tau_dd=198)
    beta = LargeScaleMatrix(np.array([[0.3, 0.7], [0.01, 0.2]]))
    low = estimate_quality(beta, [0, 0], frame, 1.0).gamma
    high = estimate_quality(beta, [0, 0], frame, 10.0).gamma
    assert np.all(high >= low)


def test_contamination_symmetric_and_reflexive():
    c = contamination([0, 1, 0, 2, 1])
    np.testing.assert_array_equal(c, c.T)
    assert np.all(np.diag(c))
    assert c[0, 2] and not c[0, 1]


def test_beta_csv_layout(tmp_path):
    path = tmp_path / "beta.csv"
    export_beta_csv(LargeScaleMatrix(np.array([[0.1, 0.2], [0.3, 0.4]])), str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "ap_id,ue_0,ue_1"
    assert lines[2].startswith("1,0.3")


def test_piazza_constant_matches_hata_at_two_gigahertz():
    stored = load_scenario("piazza").pathloss.three_slope.L_const_db
    assert hata_cost231_constant(2e9, 15.0, 1.65) == pytest.approx(stored, abs=1e-3)
