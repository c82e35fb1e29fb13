import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from ccatrack.mobility import (
    G_ACCEL,
    MobilityParams,
    Trajectory,
    UavState,
    advance,
    attitude_from_motion,
    draw_leg,
    enforce_constraints,
    export_trajectory,
    import_trajectory,
    initial_state,
    simulate_formation,
    step,
)

P = MobilityParams()


def test_params_validation():
    with pytest.raises(ValueError):
        MobilityParams(d_min=60, d_max=10)
    with pytest.raises(ValueError):
        MobilityParams(dt=0)
    with pytest.raises(ValueError):
        MobilityParams(v_z_min=4, v_z_max=3)


def test_uav_state_wraps_and_validates():
    s = UavState([0, 0, 0], [3 * math.pi, 0, 0], [0, 0, 0], [0, 0, 0])
    assert -math.pi < s.Theta[0] <= math.pi
    with pytest.raises(ValueError):
        UavState([0, 0, np.nan], [0, 0, 0], [0, 0, 0], [0, 0, 0])


def test_zero_turn_variance_flies_straight():
    p = MobilityParams(sigma_r2=0.0)
    rng = np.random.default_rng(0)
    s = initial_state([0, 0, 0], p, rng, heading=0.3)
    headings = []
    for _ in range(300):
        s = step(s, p, rng)
        headings.append(s.heading)
    assert np.ptp(headings) < 1e-12


def test_constant_speed_along_leg():
    rng = np.random.default_rng(1)
    s = draw_leg(initial_state([0, 0, 0], P, rng), P, rng)
    s = replace(s, leg_left=10.0, kappa=0.2)
    pts = [s.position]
    for _ in range(100):
        s = advance(s, P.dt)
        pts.append(s.position)
    pts = np.array(pts)
    chord = np.linalg.norm(np.diff(pts[:, :2], axis=0), axis=1)
    # exact arcs: chord length 2 sin(k v dt / 2) / k is identical every step
    want = 2 * math.sin(s.kappa * s.speed * P.dt / 2) / s.kappa
    np.testing.assert_allclose(chord, want, rtol=1e-9)


def test_seed_reproducible():
    a = simulate_formation(2, P, 300, np.random.default_rng(5))
    b = simulate_formation(2, P, 300, np.random.default_rng(5))
    assert np.array_equal(a[0].positions, b[0].positions)
    assert all(np.array_equal(x.positions, y.positions) for x, y in zip(a[1], b[1]))


def test_in_range_unchanged():
    rng = np.random.default_rng(2)
    prev = initial_state([30.0, 0, 100], P, rng)
    prop = advance(draw_leg(prev, P, rng), P.dt)
    assert enforce_constraints(prev, prop, [0, 0, 100], P, rng) is prop


def test_violation_corrected():
    rng = np.random.default_rng(3)
    prev = initial_state([P.d_max - 0.01, 0, 100], P, rng, heading=0.0)
    prop = replace(prev, position=np.array([P.d_max + 0.2, 0, 100]))
    out = enforce_constraints(prev, prop, [0, 0, 100], P, rng)
    d = np.linalg.norm(out.position - [0, 0, 100])
    assert P.d_min <= d <= P.d_max


def test_distance_shell_long_run():
    r, ts, legs = simulate_formation(2, P, 50_000, np.random.default_rng(11))
    for t in ts:
        d = np.linalg.norm(t.positions - r.positions, axis=1)
        assert d.min() >= P.d_min - 1e-9
        assert d.max() <= P.d_max + 1e-9


def test_speed_bounds():
    r, ts, _ = simulate_formation(1, P, 20_000, np.random.default_rng(4))
    for tr in [r, *ts]:
        vxy = np.linalg.norm(tr.velocity[1:, :2], axis=1)
        assert vxy.max() <= P.v_xy_max + 1e-6


def test_free_flight_vertical_speed():
    rng = np.random.default_rng(8)
    s = initial_state([0, 0, 0], P, rng)
    vz = []
    for _ in range(5000):
        s = step(s, P, rng)
        vz.append(abs(s.v_z))
    assert min(vz) >= P.v_z_min and max(vz) <= P.v_z_max


def test_leg_durations_exponential():
    # a single KS test at 5% rejects a correct sampler for 1 in 20 seeds;
    # the seed is fixed so the check is deterministic
    rng = np.random.default_rng(0)
    s = initial_state([0, 0, 0], P, rng)
    for _ in range(10_000):
        s = draw_leg(s, P, rng)
    res = stats.kstest(np.array(s.legs), "expon", args=(0, P.mean_turn_duration))
    assert res.pvalue > 0.05


def test_attitude_cases():
    assert np.allclose(attitude_from_motion([3, 4, 0], [0, 0, 0]), [math.atan2(4, 3), 0, 0])
    th = attitude_from_motion([0, 0, 2], [0, 0, 0], prev_yaw=0.7)
    assert th[0] == pytest.approx(0.7) and th[1] == pytest.approx(math.pi / 2)


def test_coordinated_turn_roll():
    radius, speed = 40.0, 15.0
    dt = 0.01
    t = np.arange(2000) * dt
    w = speed / radius
    pos = np.column_stack([radius * np.sin(w * t), radius * (1 - np.cos(w * t)), np.zeros_like(t)])
    tr = Trajectory(pos, dt)
    roll = tr.attitude[100:-5, 2]
    # left turn (counter-clockwise) banks left, i.e. negative with right-positive roll
    np.testing.assert_allclose(roll, -math.atan(speed**2 / (radius * G_ACCEL)), rtol=1e-3)


def test_csv_roundtrip(tmp_path):
    r, _, _ = simulate_formation(1, P, 50, np.random.default_rng(6))
    path = tmp_path / "traj.csv"
    export_trajectory(r, path)
    back = import_trajectory(path, P.dt)
    assert np.array_equal(back.positions, r.positions)
    assert np.array_equal(back.attitude, r.attitude)
    assert path.read_text().splitlines()[0] == "slot,x,y,z,yaw,pitch,roll"
