import numpy as np
import pytest

from config.settings import StripeConfig, load_scenario
from core.channel import large_scale
from core.scenario import build_layout
from core.stripe_bus import (
    ApuState, StreamFrame, backhaul_requirement, build_apus, dl_superposition, dl_transmit,
    fronthaul_requirement, segment_stripes, served_streams, stripe_load, ul_accumulate, ul_pipeline,
    verify_stripe,
)
from strategies.power_control import select_cqb


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def test_dl_transmit_single_stream():
    apu = ApuState(0, g_hat=[1 + 1j], sqrt_rho=[2.0])
    assert dl_transmit(apu, StreamFrame([3.0])) == pytest.approx(6 - 6j)


def test_ul_accumulate_adds_local_contribution():
    apu = ApuState(4, g_hat=[1j, 2.0], sqrt_rho=[1.0, 1.0])
    out = ul_accumulate(apu, 1 + 1j, StreamFrame([1.0, 0.5j]))
    np.testing.assert_allclose(out.streams, [1 + (1 - 1j), 0.5j + (2 + 2j)])


def test_ul_pipeline_equals_centralized_combining():
    rng = np.random.default_rng(0)
    g_hat, y = _cn(rng, (10, 3)), _cn(rng, 10)
    frame = ul_pipeline(build_apus(g_hat, np.ones((10, 3))), y)
    np.testing.assert_allclose(frame.streams, np.conj(g_hat).T @ y, rtol=1e-12)


def test_ul_result_independent_of_segmentation():
    rng = np.random.default_rng(1)
    g_hat, y = _cn(rng, (12, 4)), _cn(rng, 12)
    apus = build_apus(g_hat, np.ones((12, 4)))
    whole = ul_pipeline(apus, y).streams
    for per_stripe in (1, 5, 7, 12):
        frame = None
        for block in segment_stripes(12, per_stripe):
            frame = ul_pipeline([apus[m] for m in block], y[block], frame)
        np.testing.assert_allclose(frame.streams, whole, rtol=1e-12)


def test_dl_superposition_equals_centralized_precoding():
    rng = np.random.default_rng(2)
    g, g_hat = _cn(rng, (8, 3)), _cn(rng, (8, 3))
    rho = rng.uniform(0, 1, (8, 3))
    q = _cn(rng, 3)
    received = dl_superposition(build_apus(g_hat, rho), StreamFrame(q), g)
    expected = g.T @ ((np.sqrt(rho) * np.conj(g_hat)) @ q)
    np.testing.assert_allclose(received, expected, rtol=1e-12)


def test_verify_stripe_matches_centralized():
    assert verify_stripe(num_aps=50, num_ues=8, frames=100, seed=0) <= 1e-9


@pytest.mark.parametrize("segments", [1, 3, 50])
def test_verify_stripe_any_segmentation(segments):
    assert verify_stripe(num_aps=50, num_ues=4, frames=10, seed=1, segments=segments) <= 1e-9


def test_apus_must_follow_stripe_order():
    apus = build_apus(np.ones((3, 2)), np.ones((3, 2)))
    with pytest.raises(ValueError, match="increase"):
        ul_pipeline([apus[1], apus[0], apus[2]], np.ones(3))


def test_apu_rejects_negative_coefficients():
    with pytest.raises(ValueError):
        ApuState(0, g_hat=[1.0], sqrt_rho=[-0.1])


def test_apu_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        ApuState(0, g_hat=[1.0, 2.0], sqrt_rho=[1.0])


def test_frame_width_must_match_apu():
    apu = ApuState(0, g_hat=[1.0, 1.0], sqrt_rho=[1.0, 1.0])
    with pytest.raises(ValueError):
        dl_transmit(apu, StreamFrame([1.0]))
    with pytest.raises(ValueError):
        ul_accumulate(apu, 1.0, StreamFrame([1.0, 2.0, 3.0]))


def test_build_apus_numbers_from_offset():
    apus = build_apus(np.ones((3, 1)), np.full((3, 1), 4.0), first_index=10)
    assert [a.index for a in apus] == [10, 11, 12]
    np.testing.assert_array_equal(apus[0].sqrt_rho, [2.0])


def test_segment_stripes_covers_all_aps():
    blocks = segment_stripes(10, 4)
    assert [b.tolist() for b in blocks] == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]]
    with pytest.raises(ValueError):
        segment_stripes(10, 0)


def test_served_streams_counts_users_with_a_serving_ap():
    subsets = [[0, 1], [5], [2, 9], [7]]
    assert served_streams(subsets, range(0, 4)) == 2
    assert served_streams(subsets, range(4, 8)) == 2
    assert served_streams(subsets, range(10, 14)) == 0


def test_fronthaul_sized_for_busiest_frame():
    report = fronthaul_requirement([3, 8, 5], bandwidth_hz=20e6)
    assert report.streams == 8
    assert report.bit_rate == pytest.approx(8 * 20e6 * StripeConfig().bits_per_sample)


def test_fronthaul_custom_sample_width():
    report = fronthaul_requirement(4, 10e6, StripeConfig(bits_per_sample=24))
    assert report.bit_rate == pytest.approx(4 * 10e6 * 24)


def test_fronthaul_rejects_negative_counts():
    with pytest.raises(ValueError):
        fronthaul_requirement([-1], 20e6)


def test_stripe_load_counts_each_segment():
    load = stripe_load([[0, 1], [5], [2, 9], [7]], 10, 20e6, StripeConfig(aps_per_stripe=4))
    np.testing.assert_array_equal(load.served_per_segment, [2, 2, 1])
    assert load.mean_served == pytest.approx(5 / 3)
    assert load.fronthaul.streams == 2
    assert load.to_dict()["fronthaul_bit_rate"] == pytest.approx(2 * 20e6 * 32)


def test_indoor_channel_quality_selection_lightens_segments():
    cfg = load_scenario("indoor")
    beta = large_scale(build_layout(cfg, rng_seed=0), cfg, rng_seed=1).beta
    load = stripe_load(select_cqb(beta, 95), cfg.num_aps, cfg.bandwidth_hz)
    assert len(load.served_per_segment) == cfg.num_aps // StripeConfig().aps_per_stripe
    assert load.mean_served < cfg.num_ues
    assert load.fronthaul.streams <= cfg.num_ues


def test_backhaul_is_sum_rate_of_served_users():
    se = np.array([1.0, 2.0, 0.5, 4.0])
    assert backhaul_requirement(se, [0, 2], 20e6) == pytest.approx(1.5 * 20e6)
    assert backhaul_requirement(se, [], 20e6) == 0.0
