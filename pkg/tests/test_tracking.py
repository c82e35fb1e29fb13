import json
import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from ccatrack.frames import body_to_global, unit_from_angles
from ccatrack.tracking import (
    AngleEstimate,
    MsiDistribution,
    MsiPredictor,
    gp_condition,
    gp_dump,
    gp_fit,
    gp_predict,
    geometric_angles,
    bound_tracking_error,
    prediction_error_band,
    sample_angles,
)


def test_two_point_closed_form():
    X = np.array([[0.0], [1.0]])
    y = np.array([1.0, 2.0])
    ell, sv, nv = 0.7, 2.0, 0.1
    model = gp_condition(X, y, ell, sv, nv, mean="zero", jitter=0.0)
    xs = 0.4
    r = math.exp(-0.5 / ell**2)
    a, b = sv + nv, sv * r
    det = a * a - b * b
    inv = np.array([[a, -b], [-b, a]]) / det
    ks = sv * np.exp(-0.5 * (xs - X[:, 0]) ** 2 / ell**2)
    want_mean = ks @ inv @ y
    want_var = sv - ks @ inv @ ks + nv
    m, v = gp_predict(model, [[xs]])
    assert abs(m[0, 0] - want_mean) < 1e-10
    assert abs(v[0, 0] - want_var) < 1e-10
    _, v0 = gp_predict(model, [[xs]], include_noise=False)
    assert abs(v0[0, 0] - (want_var - nv)) < 1e-10


def test_interpolates_training_points():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 5, (8, 2))
    y = np.sin(X).sum(1)
    model = gp_condition(X, y, [1.0, 1.2], 1.0, 0.0, mean="zero", jitter=1e-12)
    m, v = gp_predict(model, X, include_noise=False)
    np.testing.assert_allclose(m[:, 0], y, atol=1e-6)
    assert v.max() < 1e-6 and v.min() >= 0


def test_far_point_returns_prior():
    X = np.array([[0.0], [1.0], [2.0]])
    model = gp_condition(X, [0.5, 1.0, 0.2], 0.5, 3.0, 0.0, mean="zero")
    m, v = gp_predict(model, [[1e6]], include_noise=False)
    assert m[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert v[0, 0] == pytest.approx(3.0)


def test_condition_validation():
    with pytest.raises(ValueError):
        gp_condition([[0.0], [1.0]], [1.0], 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        gp_condition([[0.0]], [[1.0, 2.0]], 1.0, [1.0, 2.0], [0.1, 0.1])
    with pytest.raises(ValueError):
        gp_fit([[0.0]], [1.0])


def test_fit_constant_output():
    X = np.linspace(0, 1, 12)[:, None]
    model = gp_fit(X, np.full(12, 3.5))
    m, v = gp_predict(model, [[0.33], [0.77]])
    np.testing.assert_allclose(m[:, 0], 3.5, atol=1e-9)
    assert v.max() < 1e-12


def test_fit_linear_trend():
    X = np.linspace(0, 10, 30)[:, None]
    y = 2 * X[:, 0] + 1
    model = gp_fit(X, y, n_restarts=3)
    xs = np.linspace(0.5, 9.5, 13)[:, None]
    m, _ = gp_predict(model, xs)
    rel = np.abs(m[:, 0] - (2 * xs[:, 0] + 1)) / np.abs(2 * xs[:, 0] + 1)
    assert rel.max() < 0.01


def test_fit_beats_random_hyperparameters():
    rng = np.random.default_rng(4)
    X = rng.uniform(-2, 2, (25, 2))
    Y = np.column_stack([np.sin(X[:, 0]) + 0.05 * rng.normal(size=25), X[:, 1] ** 2])
    model = gp_fit(X, Y, n_restarts=3, rng=np.random.default_rng(1))
    best = model.log_marginal_likelihood()
    for _ in range(100):
        ell = np.exp(rng.uniform(-3, 3, 2))
        sv = np.exp(rng.uniform(-3, 3))
        eta = np.exp(rng.uniform(-8, 1))
        cand = gp_condition(X, Y, ell, sv, sv * eta, mean=model.mean)
        assert cand.log_marginal_likelihood() <= best + 1e-8


def test_dump_digest():
    X = np.linspace(0, 1, 5)[:, None]
    a = gp_condition(X, X[:, 0] ** 2, 0.3, 1.0, 0.01)
    b = gp_condition(X, X[:, 0] ** 3, 0.3, 1.0, 0.01)
    da, db = json.loads(gp_dump(a)), json.loads(gp_dump(b))
    assert da["n_train"] == 5 and da["noise_ratio"] == pytest.approx(0.01)
    assert da["training_sha256"] != db["training_sha256"]
    assert gp_dump(a) == gp_dump(a)


def test_band():
    lo, hi = prediction_error_band([2.0], [0.0])
    assert lo[0] == hi[0] == 2.0
    lo, hi = prediction_error_band(0.0, 1.0)
    assert hi - lo == pytest.approx(6.0)
    with pytest.raises(ValueError):
        prediction_error_band(0.0, -1.0)


def test_predictor_static_series():
    n = 400
    msi = np.tile([10.0, -4.0, 100.0, 0.3, 0.0, 0.0], (n, 1))
    z = np.zeros((n, 3))
    pred = MsiPredictor(horizon=20).fit(msi, z, z)
    out = pred.predict(msi, z, z)
    np.testing.assert_allclose(out.mean, np.tile(msi[0], (20, 1)), atol=1e-9)
    assert np.all(out.var >= 0)
    assert set(json.loads(pred.dump())) == {"x", "y", "z", "yaw", "pitch", "roll"}


# -------------------------------------------------------------- geometry


def test_angle_conventions():
    tx = np.zeros(6)
    up = np.array([0, 0, 10.0, 0, 0, 0])
    (aod_a, aod_b), _ = geometric_angles(tx, up)
    assert aod_b == pytest.approx(0.0, abs=1e-12)
    ahead = np.array([10.0, 0, 0, 0, 0, 0])
    (aod_a, aod_b), (aoa_a, aoa_b) = geometric_angles(tx, ahead)
    assert aod_a == pytest.approx(0.0, abs=1e-12) and aod_b == pytest.approx(math.pi / 2)
    assert aoa_a == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        geometric_angles(tx, tx)


def test_round_trip_recovers_los():
    rng = np.random.default_rng(5)
    for _ in range(50):
        tx = np.concatenate([rng.uniform(-50, 50, 3), rng.uniform(-math.pi, math.pi, 3)])
        rx = np.concatenate([rng.uniform(-50, 50, 3), rng.uniform(-math.pi, math.pi, 3)])
        u = (rx[:3] - tx[:3]) / np.linalg.norm(rx[:3] - tx[:3])
        aod, aoa = geometric_angles(tx, rx)
        back_t = body_to_global(*tx[3:]) @ unit_from_angles(*aod)
        back_r = body_to_global(*rx[3:]) @ unit_from_angles(*aoa)
        np.testing.assert_allclose(back_t, u, atol=1e-12)
        np.testing.assert_allclose(back_r, -u, atol=1e-12)


def _rotate_pose(Q, msi):
    R = Q @ body_to_global(*msi[3:])
    yaw, neg_pitch, roll = Rotation.from_matrix(R).as_euler("ZYX")
    return np.concatenate([Q @ msi[:3], [yaw, -neg_pitch, roll]])


def test_global_rotation_equivariance():
    rng = np.random.default_rng(6)
    for _ in range(20):
        tx = np.concatenate([rng.uniform(-50, 50, 3), rng.uniform(-1, 1, 3)])
        rx = np.concatenate([rng.uniform(-50, 50, 3), rng.uniform(-1, 1, 3)])
        Q = Rotation.random(random_state=rng.integers(1 << 30)).as_matrix()
        a = geometric_angles(tx, rx)
        b = geometric_angles(_rotate_pose(Q, tx), _rotate_pose(Q, rx))
        for (a1, e1), (a2, e2) in zip(a, b):
            assert abs(math.remainder(a1 - a2, 2 * math.pi)) < 1e-9
            assert e1 == pytest.approx(e2, abs=1e-9)


# -------------------------------------------------------------- bounding


def _dists(var_x=0.0):
    tx = MsiDistribution.exact([0, 0, 100, 0, 0, 0])
    rx = MsiDistribution([[0, 40, 100, 0.2, 0, 0]], [[var_x, 0, 0, 0, 0, 0]])
    return tx, rx


def test_zero_variance_gives_point():
    tx, rx = _dists()
    e = bound_tracking_error(tx, rx, rng=np.random.default_rng(0))
    assert e.alpha_min == e.alpha == e.alpha_max
    assert e.beta_min == e.beta == e.beta_max
    with pytest.raises(ValueError):
        bound_tracking_error(tx, rx, i_max=10)


def test_width_grows_with_std():
    widths = []
    for var in (0.25, 1.0, 4.0):
        e = bound_tracking_error(*_dists(var), side="rx", rng=np.random.default_rng(3))
        widths.append(e.half_widths[0])
    assert widths[0] < widths[1] < widths[2]


def test_hold_out_coverage():
    tx = MsiDistribution([[0, 0, 100, 0.1, 0.02, -0.03]], [[1, 1, 0.5, 1e-3, 1e-3, 1e-3]])
    rx = MsiDistribution([[30, 40, 105, 0.2, 0, 0]], [[2, 1, 0.5, 2e-3, 1e-3, 1e-3]])
    e = bound_tracking_error(tx, rx, p_alpha=0.99, p_beta=0.99, rng=np.random.default_rng(8))
    aod, _ = sample_angles(tx, rx, 20_000, np.random.default_rng(99))
    in_a, in_b = e.contains(aod[0][:, 0], aod[1][:, 0])
    assert in_a.mean() >= 0.98 and in_b.mean() >= 0.98


def test_intervals_nested():
    tx = MsiDistribution([[0, 0, 100, 0, 0, 0]], [[1, 1, 1, 1e-3, 1e-3, 1e-3]])
    rx = MsiDistribution([[20, 30, 90, 0, 0, 0]], [[1, 1, 1, 1e-3, 1e-3, 1e-3]])
    est = [bound_tracking_error(tx, rx, p_alpha=p, p_beta=p, rng=np.random.default_rng(2)) for p in (0.5, 0.9, 0.99)]
    for inner, outer in zip(est, est[1:]):
        assert outer.alpha_min <= inner.alpha_min and inner.alpha_max <= outer.alpha_max
        assert outer.beta_min <= inner.beta_min and inner.beta_max <= outer.beta_max


def test_estimate_invariants():
    e = AngleEstimate.centered(1.0, 1.2, 0.1, 0.05)
    assert (e.alpha_min + e.alpha_max) / 2 == pytest.approx(e.alpha)
    with pytest.raises(ValueError):
        AngleEstimate(1.0, 1.0, 1.1, 1.2, 0.9, 1.1)


def test_multi_slot_returns_list():
    tx = MsiDistribution(np.tile([0, 0, 100, 0, 0, 0], (3, 1)), np.full((3, 6), 0.01))
    rx = MsiDistribution(np.tile([10, 0, 100, 0, 0, 0], (3, 1)), np.full((3, 6), 0.01))
    out = bound_tracking_error(tx, rx, rng=np.random.default_rng(0), side="both")
    assert len(out[0]) == 3 and len(out[1]) == 3
