"""Codeword selection, multi-user subarray partition and TE-aware beamwidth control."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .array import Awv, SubarraySpec, wrap_2pi, wrap_pi
from .codebook import Codebook, Codeword, CodebookLayer
from .tracking import AngleEstimate


class PartitionInfeasible(ValueError):
    """More mutually conflicting users than z-rows to share."""


@dataclass(frozen=True)
class SelectionResult:
    codeword: Codeword
    layer: tuple[int, int]
    residual: tuple[float, float]
    angles: tuple[float, float]

    @property
    def support(self) -> SubarraySpec:
        return self.codeword.support


def _angles(est):
    if isinstance(est, AngleEstimate):
        return est.alpha, est.beta
    a, b = est
    return float(a), float(b)


def select_in_layer(layer: CodebookLayer, alpha, beta) -> SelectionResult:
    cw = layer.select(alpha, beta)
    a0, b0 = cw.beam_center
    residual = (float(wrap_pi(alpha - a0)), float(beta - b0))
    return SelectionResult(cw, layer.key, residual, (float(wrap_2pi(alpha)), float(beta)))


def select_tuav_codeword(codebook: Codebook, aod) -> SelectionResult:
    """Max-resolution codeword for an AOD given as ``(alpha, beta)`` or an estimate."""
    return select_in_layer(codebook.max_layer, *_angles(aod))


def select_ruav_unconstrained(codebook: Codebook, aoas) -> list[SelectionResult]:
    return [select_in_layer(codebook.max_layer, *_angles(a)) for a in aoas]


# ------------------------------------------------------------- conflicts


def ring_distance(a, b, N):
    """Wrap-aware distance between ring indices."""
    d = np.abs(np.asarray(a) - np.asarray(b)) % N
    return np.minimum(d, N - d)


@dataclass(frozen=True)
class ConflictMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.matrix, dtype=bool)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("conflict matrix must be square")
        if np.any(C != C.T) or np.any(np.diag(C)):
            raise ValueError("conflict matrix must be symmetric with zero diagonal")
        C = C.copy()
        C.setflags(write=False)
        object.__setattr__(self, "matrix", C)

    @property
    def any(self) -> bool:
        return bool(self.matrix.any())

    def sets(self) -> list[list[int]]:
        """Conflict sets (connected components of size >= 2), sorted."""
        if not self.any:
            return []
        n, labels = connected_components(self.matrix.astype(np.int8), directed=False)
        groups = [sorted(np.nonzero(labels == g)[0].tolist()) for g in range(n)]
        return sorted(g for g in groups if len(g) > 1)


def _closure(raw):
    K = len(raw)
    if K == 0 or not raw.any():
        return np.zeros((K, K), dtype=bool)
    _, labels = connected_components(raw.astype(np.int8), directed=False)
    C = labels[:, None] == labels[None, :]
    np.fill_diagonal(C, False)
    return C


def pairwise_conflicts(supports, N, M) -> np.ndarray:
    """Raw pairwise test on centre distances, before transitive closure."""
    K = len(supports)
    if any(s.N != N or s.M != M for s in supports):
        raise ValueError("supports belong to a different array")
    nc = np.array([s.n_c for s in supports])
    mc = np.array([s.m_c for s in supports])
    ns = np.array([s.n_act for s in supports])
    ms = np.array([s.m_act for s in supports])
    dn = ring_distance(nc[:, None], nc[None, :], N)
    dm = np.abs(mc[:, None] - mc[None, :])
    raw = (dn < (ns[:, None] + ns[None, :]) / 2) & (dm < (ms[:, None] + ms[None, :]) / 2)
    raw[np.arange(K), np.arange(K)] = False
    return raw


def detect_conflicts(supports, N, M) -> ConflictMatrix:
    return ConflictMatrix(_closure(pairwise_conflicts(supports, N, M)))


@dataclass(frozen=True)
class PlanEntry:
    uav: int
    codeword: Codeword
    awv: Awv
    rank: int = 0
    group_size: int = 1

    @property
    def support(self) -> SubarraySpec:
        return self.awv.support


@dataclass(frozen=True)
class PartitionPlan:
    """Per-UAV combining vectors at the r-UAV on pairwise disjoint supports."""

    entries: tuple
    iterations: int = 0

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            return
        M, N = entries[0].support.M, entries[0].support.N
        used = np.zeros(M * N, dtype=bool)
        for e in entries:
            mask = e.support.mask()
            if not mask.any():
                raise ValueError(f"empty support for UAV {e.uav}")
            if np.any(used & mask):
                raise ValueError(f"support of UAV {e.uav} overlaps another UAV's support")
            if np.any(e.awv.entries[~mask] != 0):
                raise ValueError(f"AWV of UAV {e.uav} leaks outside its support")
            used |= mask

    def __len__(self):
        return len(self.entries)

    @property
    def awvs(self):
        return [e.awv for e in self.entries]

    @property
    def supports(self):
        return [e.support for e in self.entries]

    def dump(self) -> str:
        rows = []
        for e in self.entries:
            s = e.support
            rows.append(
                {
                    "uav": e.uav,
                    "layer": list(e.codeword.layer),
                    "indices": list(e.codeword.indices),
                    "beam_center": [float(x) for x in e.codeword.beam_center],
                    "m_act": s.m_act,
                    "n_act": s.n_act,
                    "m_c": s.m_c,
                    "n_c": s.n_c,
                    "rows": [int(s.rows()[0]), int(s.rows()[-1])],
                    "cols": [int(c) for c in s.cols()],
                    "rank": e.rank,
                    "group_size": e.group_size,
                }
            )
        return json.dumps({"iterations": self.iterations, "entries": rows}, indent=2)


def _entry(uav, cw: Codeword, support=None, rank=0, size=1):
    if support is not None and support != cw.support:
        cw = cw.with_support(support)
    return PlanEntry(uav, cw, cw.awv, rank, size)


def _split(members, selections, M):
    """Row bands for one conflict set, ranked by azimuth ascending."""
    c = len(members)
    band = M // c
    if band == 0:
        raise PartitionInfeasible(f"{c} conflicting users cannot share {M} z-rows")
    order = sorted(members, key=lambda k: (selections[k].angles[0], k))
    out = {}
    for r, k in enumerate(order, start=1):
        sup = selections[k].support
        m_act = min(sup.m_act, band)
        first = (r - 1) * band + 1 + (band - m_act) // 2
        out[k] = (sup.with_rows(m_act, first + m_act // 2), r, c)
    return out


def resolve_conflicts(selections, conflicts: ConflictMatrix, M, N) -> PartitionPlan:
    """Split conflicting users into disjoint z-row bands.

    Every member of a conflict set of size ``c`` keeps its ring extent and
    gets ``min(m_s, floor(M / c))`` rows inside band ``r`` (its azimuth rank
    in the set). Sets that still conflict after a pass are merged with
    their earlier partners, so each pass strictly reduces the number of
    sets and the loop ends within ``K`` passes.
    """
    K = len(selections)
    supports = [s.support for s in selections]
    assigned = {k: (supports[k], 0, 1) for k in range(K)}
    link = np.zeros((K, K), dtype=bool)
    current = conflicts
    it = 0
    while current.any:
        it += 1
        if it > K:
            raise RuntimeError("conflict resolution did not converge")
        link |= current.matrix
        link = _closure(link)
        for members in ConflictMatrix(link).sets():
            assigned.update(_split(members, selections, M))
        current = detect_conflicts([assigned[k][0] for k in range(K)], N, M)
    entries = [
        _entry(k, selections[k].codeword, assigned[k][0], assigned[k][1], assigned[k][2])
        for k in range(K)
    ]
    return PartitionPlan(entries, it)


def spas_ruav(codebook: Codebook, aoas, selections=None) -> PartitionPlan:
    """Joint subarray partition and AWV selection at the r-UAV.

    ``selections`` overrides the max-resolution per-user choice (used by the
    TE-aware scheme).
    """
    if selections is None:
        selections = select_ruav_unconstrained(codebook, aoas)
    g = codebook.geom
    conflicts = detect_conflicts([s.support for s in selections], g.N, g.M)
    return resolve_conflicts(selections, conflicts, g.M, g.N)


# ------------------------------------------------------ TE-aware control


def min_edge_gain(codeword: Codeword, estimate, plane: str, pattern=None) -> float:
    """Smallest |beam gain| at the two ends of the estimate's error range.

    The other angle is held at its mean. Element patterns weight the gain
    when ``pattern`` is given.
    """
    if not isinstance(estimate, AngleEstimate):
        estimate = AngleEstimate.point(*_angles(estimate))
    if plane == "azimuth":
        alphas = np.array([estimate.alpha_min, estimate.alpha_max])
        betas = np.full(2, estimate.beta)
    elif plane == "elevation":
        alphas = np.full(2, estimate.alpha)
        betas = np.array([estimate.beta_min, estimate.beta_max])
    else:
        raise ValueError("plane must be 'azimuth' or 'elevation'")
    betas = np.clip(betas, 0.0, math.pi)
    return float(np.abs(codeword.gain(alphas, betas, pattern)).min())


def _score(codebook, key, estimate, plane, pattern):
    res = select_in_layer(codebook.layers[key], estimate.alpha, estimate.beta)
    return min_edge_gain(res.codeword, estimate, plane, pattern), res


def te_aware_select(codebook: Codebook, estimate, use_pattern=True) -> SelectionResult:
    """Two-step layer search: ring extent first at full height, then height.

    Ties keep the smaller subarray (earlier in the ascending scan).
    """
    if not isinstance(estimate, AngleEstimate):
        estimate = AngleEstimate.point(*_angles(estimate))
    pattern = codebook.pattern if use_pattern else None
    m_max = max(codebook.m_values)
    best, best_n = None, None
    for n in codebook.n_values:
        if (m_max, n) not in codebook.layers:
            continue
        g, res = _score(codebook, (m_max, n), estimate, "azimuth", pattern)
        if best is None or g > best[0]:
            best, best_n = (g, res), n
    best = None
    for m in codebook.m_values:
        if (m, best_n) not in codebook.layers:
            continue
        g, res = _score(codebook, (m, best_n), estimate, "elevation", pattern)
        if best is None or g > best[0]:
            best = (g, res)
    return best[1]


def layer_objective(codebook, key, estimate, use_pattern=True):
    """``min(azimuth edge gain, elevation edge gain)`` of a layer's selection."""
    pattern = codebook.pattern if use_pattern else None
    if not isinstance(estimate, AngleEstimate):
        estimate = AngleEstimate.point(*_angles(estimate))
    res = select_in_layer(codebook.layers[key], estimate.alpha, estimate.beta)
    e = estimate
    # azimuth edges at the mean elevation, then elevation edges at the mean azimuth
    alphas = np.array([e.alpha_min, e.alpha_max, e.alpha, e.alpha])
    betas = np.clip([e.beta, e.beta, e.beta_min, e.beta_max], 0.0, math.pi)
    return float(np.abs(res.codeword.gain(alphas, betas, pattern)).min()), res


def exhaustive_layer_search(codebook: Codebook, estimate, use_pattern=True) -> SelectionResult:
    best = None
    for key in codebook.layers:
        g, res = layer_objective(codebook, key, estimate, use_pattern)
        if best is None or g > best[0]:
            best = (g, res)
    return best[1]
