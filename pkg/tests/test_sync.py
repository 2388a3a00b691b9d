import numpy as np
import pytest

from config.settings import SyncConfig
from core.errors import MeasurementError
from core.sync import (
    Arrival, ClockBias, TimestampMatrix, calibrate_chain, differential, intergroup_offset,
    measure_round, partition_triplets, random_biases, recover, stripe_delays, sync_demo,
)

EXAMPLE = [ClockBias(1.0, 4.0), ClockBias(2.0, 5.0), ClockBias(3.0, 6.0)]


def _truth(biases):
    t = np.array([b.t for b in biases])
    r = np.array([b.r for b in biases])
    return t - r, np.array([t[0] - t[1], t[0] - t[2], t[1] - t[2]])


# ── Single triplet ─────────────────────────────────────────────

def test_measure_round_stamps():
    delta = measure_round(EXAMPLE).delta
    assert delta[0, 1] == -4.0
    assert delta[2, 0] == -1.0
    assert np.all(np.isnan(np.diag(delta)))


def test_recover_worked_example():
    result = recover(measure_round(EXAMPLE))
    np.testing.assert_array_equal(result.reciprocity, [-3.0, -3.0, -3.0])
    np.testing.assert_array_equal(result.sync, [-1.0, -2.0, -1.0])
    assert result.cycle_residual == 0.0
    np.testing.assert_array_equal(result.offsets_from_first(), [0.0, 1.0, 2.0])


def test_recover_round_trip_random_biases():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        biases = [ClockBias(*rng.uniform(-1, 1, 2)) for _ in range(3)]
        result = recover(measure_round(biases))
        reciprocity, sync = _truth(biases)
        np.testing.assert_allclose(result.reciprocity, reciprocity, rtol=0, atol=1e-12)
        np.testing.assert_allclose(result.sync, sync, rtol=0, atol=1e-12)
        assert abs(result.cycle_residual) < 1e-12


def test_common_shift_leaves_recovery_unchanged():
    shifted = [ClockBias(b.t + 7.0, b.r + 7.0) for b in EXAMPLE]
    np.testing.assert_array_equal(measure_round(shifted).delta, measure_round(EXAMPLE).delta)
    a, b = recover(measure_round(EXAMPLE)), recover(measure_round(shifted))
    np.testing.assert_array_equal(a.reciprocity, b.reciprocity)
    np.testing.assert_array_equal(a.sync, b.sync)


def test_differential_tracks_bias_drift():
    drift = [(0.5, -0.25), (1.0, 0.75), (-0.5, 0.0)]
    after = [ClockBias(b.t + dt, b.r + dr) for b, (dt, dr) in zip(EXAMPLE, drift)]
    result = differential(measure_round(EXAMPLE), measure_round(after))
    np.testing.assert_allclose(result.reciprocity, [0.75, 0.25, -0.5])
    np.testing.assert_allclose(result.sync, [-0.5, 1.0, 1.5])


def test_differential_without_change_is_zero():
    delta = measure_round(EXAMPLE)
    result = differential(delta, delta)
    np.testing.assert_array_equal(result.reciprocity, 0.0)
    np.testing.assert_array_equal(result.sync, 0.0)


def test_noise_spreads_by_number_of_stamps():
    rng = np.random.default_rng(1)
    sigma_ns = 2.0
    biases = random_biases(3, rng)
    reciprocity, sync = _truth(biases)
    errors_rec, errors_sync = [], []
    for _ in range(20_000):
        result = recover(measure_round(biases, sigma_ns, rng))
        errors_rec.append(result.reciprocity - reciprocity)
        errors_sync.append(result.sync - sync)
    sigma = sigma_ns * 1e-9
    np.testing.assert_allclose(np.std(errors_rec, axis=0), np.sqrt(3) * sigma, rtol=0.03)
    np.testing.assert_allclose(np.std(errors_sync, axis=0), np.sqrt(2) * sigma, rtol=0.03)


def test_known_delays_are_compensated():
    delays = stripe_delays([0.0, 5.0, 10.0])
    assert delays[0, 2] == pytest.approx(10.0 / SyncConfig.speed_of_light)
    delta = measure_round(EXAMPLE, delays=delays)
    result = recover(delta, delays)
    np.testing.assert_allclose(result.sync, [-1.0, -2.0, -1.0], atol=1e-14)
    assert not np.allclose(recover(delta).reciprocity, -3.0, rtol=0, atol=1e-12)


def test_round_needs_three_aps():
    with pytest.raises(MeasurementError):
        measure_round(EXAMPLE[:2])


def test_incomplete_timestamps_rejected():
    delta = np.zeros((3, 3))
    delta[1, 2] = np.nan
    with pytest.raises(MeasurementError):
        TimestampMatrix(delta)
    with pytest.raises(MeasurementError):
        TimestampMatrix(np.zeros((2, 3)))


# ── Inter-group linking ────────────────────────────────────────

def test_intergroup_offset_same_receiver():
    group_a = [ClockBias(0.3, 1.0), ClockBias(0.1, 0.2), ClockBias(0.0, 0.0)]
    group_b = [ClockBias(-0.4, 0.9), ClockBias(0.8, -0.2), ClockBias(0.6, 0.5)]
    cross = Arrival(group_a[0].t - group_b[2].r, transmitter=0, receiver=2)
    local = Arrival(group_b[1].t - group_b[2].r, transmitter=1, receiver=2)
    assert intergroup_offset(cross, local) == pytest.approx(group_a[0].t - group_b[1].t)


def test_common_shift_gives_identical_stamps_for_random_biases():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        t, r = rng.integers(-1000, 1000, (2, 3)) * 2.0 ** -20
        shift = rng.integers(-1000, 1000) * 2.0 ** -20
        base = [ClockBias(ti, ri) for ti, ri in zip(t, r)]
        moved = [ClockBias(ti + shift, ri + shift) for ti, ri in zip(t, r)]
        np.testing.assert_array_equal(measure_round(moved).delta, measure_round(base).delta)


def test_intergroup_offsets_compose_across_three_groups():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        a, b, c = ([ClockBias(*rng.uniform(-1e-3, 1e-3, 2)) for _ in range(3)] for _ in range(3))
        ab = intergroup_offset(Arrival(a[0].t - b[2].r, 0, 2), Arrival(b[1].t - b[2].r, 1, 2))
        bc = intergroup_offset(Arrival(b[1].t - c[2].r, 1, 2), Arrival(c[1].t - c[2].r, 1, 2))
        ac = intergroup_offset(Arrival(a[0].t - c[2].r, 0, 2), Arrival(c[1].t - c[2].r, 1, 2))
        assert abs(ab + bc - ac) < 1e-12
        assert ac == pytest.approx(a[0].t - c[1].t, abs=1e-12)


def test_intergroup_offset_rejects_different_receivers():
    with pytest.raises(MeasurementError):
        intergroup_offset(Arrival(0.0, 0, 1), Arrival(0.0, 1, 2))


@pytest.mark.parametrize("num_aps, expected", [
    (3, [[0, 1, 2]]),
    (6, [[0, 1, 2], [3, 4, 5]]),
    (7, [[0, 1, 2], [3, 4, 5], [4, 5, 6]]),
    (8, [[0, 1, 2], [3, 4, 5], [5, 6, 7]]),
])
def test_partition_triplets(num_aps, expected):
    assert partition_triplets(num_aps) == expected


def test_partition_needs_three_aps():
    with pytest.raises(MeasurementError):
        partition_triplets(2)


def test_chain_recovers_every_offset():
    rng = np.random.default_rng(2)
    biases = random_biases(12, rng)
    groups = [[biases[i] for i in tri] for tri in partition_triplets(12)]
    chain = calibrate_chain(groups, rng=rng)
    truth = np.array([b.t for b in biases]).reshape(4, 3) - biases[0].t
    np.testing.assert_allclose(chain.ap_offsets, truth, rtol=0, atol=1e-18)
    np.testing.assert_allclose(chain.group_offsets, truth[:, 0], rtol=0, atol=1e-18)
    assert len(chain.rounds) == 4


def test_chain_with_overlapping_last_triplet():
    rng = np.random.default_rng(3)
    biases = random_biases(7, rng)
    triplets = partition_triplets(7)
    chain = calibrate_chain([[biases[i] for i in tri] for tri in triplets], rng=rng)
    t = np.array([b.t for b in biases]) - biases[0].t
    for g, tri in enumerate(triplets):
        np.testing.assert_allclose(chain.ap_offsets[g], t[tri], rtol=0, atol=1e-18)


def test_single_group_chain():
    chain = calibrate_chain([EXAMPLE])
    np.testing.assert_array_equal(chain.group_offsets, [0.0])
    np.testing.assert_allclose(chain.ap_offsets[0], [0.0, 1.0, 2.0])


def test_chain_rejects_empty_input():
    with pytest.raises(MeasurementError):
        calibrate_chain([])


def test_chain_delay_compensation():
    rng = np.random.default_rng(4)
    biases = random_biases(9, rng)
    triplets = partition_triplets(9)
    groups = [[biases[i] for i in tri] for tri in triplets]
    positions = [[5.0 * i for i in tri] for tri in triplets]
    truth = np.array([b.t for b in biases]).reshape(3, 3) - biases[0].t

    raw = calibrate_chain(groups, positions_m=positions)
    fixed = calibrate_chain(groups, positions_m=positions, compensate_delay=True)
    np.testing.assert_allclose(fixed.ap_offsets, truth, rtol=0, atol=1e-17)
    assert np.max(np.abs(raw.ap_offsets - truth)) > 1e-9


# ── Demo ───────────────────────────────────────────────────────

def test_sync_demo_noiseless_is_exact():
    rows = sync_demo(4, seed=5)
    assert len(rows) == 12
    assert {r["group"] for r in rows} == {0, 1, 2, 3}
    assert max(abs(r["error"]) for r in rows) < 1e-18


def test_sync_demo_noise_grows_along_the_chain():
    worst_first, worst_last = [], []
    for seed in range(200):
        rows = sync_demo(6, SyncConfig(sigma_ns=1.0), seed=seed)
        worst_first.append(max(abs(r["error"]) for r in rows if r["group"] == 0))
        worst_last.append(max(abs(r["error"]) for r in rows if r["group"] == 5))
    assert np.mean(worst_last) > np.mean(worst_first)


def test_sync_demo_with_delay_compensation():
    rows = sync_demo(3, SyncConfig(compensate_delay=True), seed=6)
    assert max(abs(r["error"]) for r in rows) < 1e-17


def test_sync_demo_rejects_zero_groups():
    with pytest.raises(MeasurementError):
        sync_demo(0)
