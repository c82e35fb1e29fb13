import json
import math
import time

import numpy as np
import pytest

from ccatrack.array import ArrayGeometry, ElementPattern, SubarraySpec, element_angular_position
from ccatrack.beamtrack import (
    ConflictMatrix,
    PartitionInfeasible,
    PartitionPlan,
    PlanEntry,
    detect_conflicts,
    exhaustive_layer_search,
    layer_objective,
    min_edge_gain,
    ring_distance,
    select_in_layer,
    select_ruav_unconstrained,
    select_tuav_codeword,
    spas_ruav,
    te_aware_select,
)
from ccatrack.codebook import Codebook, Codeword
from ccatrack.sim.config import SimConfig, codebooks
from ccatrack.tracking import AngleEstimate


@pytest.fixture(scope="module")
def cbs():
    return codebooks(SimConfig())


@pytest.fixture(scope="module")
def cb_t(cbs):
    return cbs[0]


@pytest.fixture(scope="module")
def cb_r(cbs):
    return cbs[1]


def _spec(M, N, m_act, n_act, m_c, n_c):
    return SubarraySpec.centered(M, N, m_act, n_act, m_c, n_c)


# ------------------------------------------------------------ selection


def test_tuav_index_formula(cb_t):
    res = select_tuav_codeword(cb_t, (math.pi, math.pi / 2))
    assert res.layer == cb_t.max_key
    assert res.codeword.indices[0] == 11


def test_on_centre_has_zero_residual(cb_t):
    cw = cb_t.max_layer.codeword(7, 2)
    res = select_tuav_codeword(cb_t, cw.beam_center)
    assert res.residual[0] == pytest.approx(0.0, abs=1e-12)
    assert res.codeword.indices == (7, 2)


def test_residual_within_half_beamwidth(cb_r):
    rng = np.random.default_rng(0)
    layer = cb_r.max_layer
    for _ in range(200):
        res = select_in_layer(layer, rng.uniform(0, 2 * math.pi), rng.uniform(0, math.pi))
        assert abs(res.residual[0]) <= layer.bw_a / 2 + 1e-12
        assert abs(res.residual[1]) <= layer.bw_e / 2 + 1e-12


def test_selected_beats_layer_scan(cb_t):
    rng = np.random.default_rng(1)
    layer = cb_t.max_layer
    cws = layer.codewords()
    for _ in range(20):
        a, b = rng.uniform(0, 2 * math.pi), rng.uniform(0.2, math.pi - 0.2)
        chosen = abs(select_tuav_codeword(cb_t, (a, b)).codeword.gain(a, b, cb_t.pattern))
        best = max(abs(cw.gain(a, b, cb_t.pattern)) for cw in cws)
        assert chosen >= best - 1e-9, f"index formula gain {chosen:.2f} < layer best {best:.2f} at ({a:.3f}, {b:.3f})"


def test_ruav_matches_quantisation_scan(cb_r):
    rng = np.random.default_rng(2)
    layer = cb_r.max_layer
    centres = np.array([cw.beam_center for cw in layer.codewords()])
    for res in select_ruav_unconstrained(cb_r, rng.uniform([0, 0], [2 * math.pi, math.pi], (30, 2))):
        a, b = res.angles
        da = np.abs((centres[:, 0] - a + math.pi) % (2 * math.pi) - math.pi)
        db = np.abs(centres[:, 1] - b)
        i_best = np.argmin(da + 1e-9 * np.arange(len(da)))
        j_best = np.argmin(db)
        assert da[i_best] == pytest.approx(abs(res.residual[0]), abs=1e-12)
        assert db[j_best] == pytest.approx(abs(res.residual[1]), abs=1e-12)


# ------------------------------------------------------------ conflicts


def test_ring_distance():
    assert ring_distance(5, 60, 64) == 9
    assert ring_distance(60, 5, 64) == 9
    d = ring_distance(np.arange(64)[:, None], np.arange(64)[None, :], 64)
    assert np.array_equal(d, d.T) and d.max() == 32


def test_detect_cases():
    M, N = 112, 64
    a = _spec(M, N, 21, 21, 56, 10)
    b = _spec(M, N, 21, 21, 56, 20)
    assert detect_conflicts([a, b], N, M).matrix[0, 1]
    assert detect_conflicts([a, a], N, M).any
    far = _spec(M, N, 21, 21, 56, 42)
    assert not detect_conflicts([a, far], N, M).any
    # separated in z: no conflict even when ring extents overlap
    low = _spec(M, N, 20, 21, 11, 10)
    high = _spec(M, N, 20, 21, 100, 10)
    assert not detect_conflicts([low, high], N, M).any


def test_transitive_closure():
    M, N = 112, 64
    s = [_spec(M, N, 21, 21, 56, n) for n in (1, 12, 23)]
    C = detect_conflicts(s, N, M)
    assert C.matrix[0, 2] and C.sets() == [[0, 1, 2]]
    with pytest.raises(ValueError):
        ConflictMatrix(np.array([[0, 1], [0, 0]]))


def test_two_way_split(cb_r):
    plan = spas_ruav(cb_r, [(1.0, 1.5), (1.02, 1.6)])
    sup = plan.supports
    assert [s.m_act for s in sup] == [56, 56]
    assert sorted(s.m_c for s in sup) == [29, 85]
    assert not detect_conflicts(sup, 64, 112).any


def test_three_way_split(cb_r):
    plan = spas_ruav(cb_r, [(1.0, 1.5), (1.02, 1.6), (0.98, 1.55)])
    assert [s.m_act for s in plan.supports] == [37, 37, 37]
    assert not detect_conflicts(plan.supports, 64, 112).any
    # rank follows azimuth ascending
    assert [e.rank for e in plan.entries] == [2, 3, 1]


def test_no_conflict_keeps_selection(cb_r):
    aoas = [(0.3, 1.5), (0.3 + math.pi, 1.5)]
    plan = spas_ruav(cb_r, aoas)
    sel = select_ruav_unconstrained(cb_r, aoas)
    assert plan.supports == [s.support for s in sel]
    assert plan.iterations == 0


def test_single_uav_is_max_resolution(cb_r):
    plan = spas_ruav(cb_r, [(2.0, 1.2)])
    assert plan.entries[0].codeword == select_ruav_unconstrained(cb_r, [(2.0, 1.2)])[0].codeword
    assert plan.supports[0].m_act == cb_r.max_key[0]


def test_infeasible_partition():
    g = ArrayGeometry.cylinder(2, 16, 0.0509, 0.005)
    cb = Codebook.build(g, ElementPattern(2 * math.pi / 3))
    with pytest.raises(PartitionInfeasible):
        spas_ruav(cb, [(1.0, 1.5), (1.01, 1.5), (1.02, 1.5)])


def test_plan_rejects_overlap(cb_r):
    cw = cb_r.max_layer.codeword(1, 1)
    with pytest.raises(ValueError):
        PartitionPlan([PlanEntry(0, cw, cw.awv), PlanEntry(1, cw, cw.awv)])


def test_plan_dump(cb_r):
    doc = json.loads(spas_ruav(cb_r, [(1.0, 1.5), (1.02, 1.6)]).dump())
    assert doc["iterations"] >= 1
    rows = sorted(e["rows"] for e in doc["entries"])
    assert rows == [[1, 56], [57, 112]]


def test_random_plans_disjoint_and_fast(cb_r):
    rng = np.random.default_rng(3)
    times = {}
    for K in (2, 4, 8):
        t0 = time.perf_counter()
        for _ in range(5):
            plan = spas_ruav(cb_r, rng.uniform([0, 0.5], [2 * math.pi, math.pi - 0.5], (K, 2)))
            assert len(plan) == K and plan.iterations <= K
        times[K] = time.perf_counter() - t0
    slope = np.polyfit(np.log(list(times)), np.log(list(times.values())), 1)[0]
    assert slope <= 3.0


# ------------------------------------------------------ TE-aware control


def _symmetric_codeword(g):
    phi = element_angular_position(g, 33)
    sup = SubarraySpec.centered(g.M, g.N, 7, 9, 8, 33)
    return Codeword((7, 9), (0, 0), (phi, math.pi / 2), sup, g)


def test_min_edge_gain_cases(cb_t):
    cw = cb_t.max_layer.codeword(4, 3)
    a, b = cw.beam_center
    point = AngleEstimate.point(a, b)
    g0 = abs(cw.gain(a, b))
    assert min_edge_gain(cw, point, "azimuth") == pytest.approx(g0)
    assert min_edge_gain(cw, point, "elevation") == pytest.approx(g0)
    with pytest.raises(ValueError):
        min_edge_gain(cw, point, "radial")


def test_min_edge_gain_symmetric():
    g = ArrayGeometry.cylinder(16, 64, 0.0509, 0.005)
    cw = _symmetric_codeword(g)
    a, b = cw.beam_center
    for h in (0.01, 0.05, 0.2):
        ga = np.abs(cw.gain([a - h, a + h], [b, b]))
        gb = np.abs(cw.gain([a, a], [b - h, b + h]))
        assert abs(ga[0] - ga[1]) <= 1e-6
        assert abs(gb[0] - gb[1]) <= 1e-6


def test_min_edge_gain_monotone(cb_t):
    cw = cb_t.max_layer.codeword(5, 2)
    a, b = cw.beam_center
    # endpoint gains climb again on sidelobes, so sweep out to the first null
    fine = np.linspace(0, 0.2, 2001)
    g = np.abs(cw.gain(a + fine, np.full_like(fine, b)))
    null = fine[np.argmax(np.diff(g) > 0)]
    widths = np.linspace(0, null, 15)
    vals = [min_edge_gain(cw, AngleEstimate.centered(a, b, w, 0.0), "azimuth") for w in widths]
    assert np.all(np.diff(vals) <= 1e-9)


def test_zero_error_on_grid_coincides(cb_r):
    for ij in [(3, 2), (10, 4), (17, 1)]:
        cw = cb_r.max_layer.codeword(*ij)
        est = AngleEstimate.point(*cw.beam_center)
        te = te_aware_select(cb_r, est)
        ex = exhaustive_layer_search(cb_r, est)
        mr = select_ruav_unconstrained(cb_r, [cw.beam_center])[0]
        assert te.layer == ex.layer == mr.layer == cb_r.max_key
        assert te.codeword.indices == ex.codeword.indices == mr.codeword.indices


def test_wide_azimuth_error_widens_beam(cb_t):
    est = AngleEstimate.centered(1.0, 1.5, 0.6, 0.0)
    res = te_aware_select(cb_t, est)
    assert res.layer[1] < cb_t.max_key[1]


def test_two_step_not_worse_than_min_beamwidth(cb_t):
    rng = np.random.default_rng(4)
    for _ in range(20):
        est = AngleEstimate.centered(rng.uniform(0, 2 * math.pi), 1.5, rng.uniform(0, 0.4), 0.0)
        te = te_aware_select(cb_t, est)
        mb = select_tuav_codeword(cb_t, est)
        assert min_edge_gain(te.codeword, est, "azimuth", cb_t.pattern) >= min_edge_gain(
            mb.codeword, est, "azimuth", cb_t.pattern
        ) - 1e-9


def _random_estimates(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield AngleEstimate.centered(
            rng.uniform(0, 2 * math.pi), rng.uniform(0.3, math.pi - 0.3), rng.uniform(0, 0.3), rng.uniform(0, 0.15)
        )


def test_exhaustive_dominates(cb_t):
    for est in _random_estimates(30, 5):
        te = layer_objective(cb_t, te_aware_select(cb_t, est).layer, est)[0]
        ex = layer_objective(cb_t, exhaustive_layer_search(cb_t, est).layer, est)[0]
        assert ex >= te - 1e-9


def test_singleton_layer_set():
    g = ArrayGeometry.cylinder(1, 8, 0.0509, 0.005)
    cb = Codebook.build(g, ElementPattern(2 * math.pi / 3))
    cb1 = Codebook(cb.geom, cb.pattern, {cb.max_key: cb.max_layer})
    assert exhaustive_layer_search(cb1, (1.0, 1.5)).layer == cb.max_key


def test_two_step_within_five_percent_of_exhaustive(cb_t, cb_r):
    for cb in (cb_t, cb_r):
        te, ex = [], []
        for est in _random_estimates(60, 6):
            te.append(layer_objective(cb, te_aware_select(cb, est).layer, est)[0])
            ex.append(layer_objective(cb, exhaustive_layer_search(cb, est).layer, est)[0])
        ratio = np.mean(te) / np.mean(ex)
        print(f"two-step / exhaustive mean edge gain ({cb.geom.M}x{cb.geom.N}): {ratio:.4f}")
        assert ratio >= 0.95
