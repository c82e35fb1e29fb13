"""Multi-resolution hierarchical codebook for a DRE-covered CCA.

A layer ``(m_s, n_s)`` fixes the activated subarray size. Codeword ``(i, j)``
of a layer steers towards the midpoint of the i-th azimuth bin and j-th
elevation bin, and is supported by an ``m_s x n_s`` rectangle localised on
the ring elements that face the beam direction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .array import (
    TWO_PI,
    ArrayGeometry,
    Awv,
    ElementPattern,
    SubarraySpec,
    steered_gain,
    wrap_2pi,
)

_EPS = 1e-12


def _activation_bounds(geom, pattern, alpha0):
    x = np.asarray(alpha0, float) / geom.delta_phi + (geom.N + 1) / 2
    w = pattern.delta_alpha / 2 / geom.delta_phi
    n1 = np.ceil(x - w - _EPS)
    n2 = np.ceil(x + w - _EPS)
    return n1, n2


def max_activated(geom: ArrayGeometry, pattern: ElementPattern, alpha0: float):
    """Largest number of ring elements whose sector holds ``alpha0``.

    Returns ``(n_act_max, n1, n2)``; ``alpha0`` is first reduced to (-pi, pi].
    """
    if geom.kind != "cylindrical":
        raise ValueError("max_activated needs a cylindrical array")
    a = math.remainder(alpha0, TWO_PI)
    n1, n2 = _activation_bounds(geom, pattern, a)
    return min(int(abs(n2 - n1)), geom.N), int(n1), int(n2)


def min_max_activated(geom, pattern, samples: int = 4096) -> int:
    """Minimum over steering angles of :func:`max_activated`.

    Every layer of width up to this value is realisable at any azimuth.
    The grid includes half-pitch offsets where the count is smallest.
    """
    a = np.linspace(-math.pi, math.pi, samples, endpoint=False)
    a = np.concatenate([a, (np.arange(geom.N) + 0.5) * geom.delta_phi - math.pi])
    n1, n2 = _activation_bounds(geom, pattern, a)
    return int(min(np.abs(n2 - n1).min(), geom.N))


def element_beamwidth(geom, pattern, n_count: int, m_count: int = 1):
    """Azimuth/elevation width of the union of ``n_count`` adjacent sectors."""
    pattern.check_covers(geom)
    bw_a = min(pattern.delta_alpha + (n_count - 1) * geom.delta_phi, TWO_PI)
    return bw_a, pattern.delta_beta


def layer_beamwidth(m_s: int, n_s: int, geom, pattern):
    bw_el_a, bw_el_e = element_beamwidth(geom, pattern, n_s, m_s)
    return min(TWO_PI / n_s, bw_el_a), min(TWO_PI / m_s, bw_el_e)


def subarray_center(geom: ArrayGeometry, alpha: float, M: int | None = None):
    """Centre element ``(m_c, n_c)`` of a subarray steered towards ``alpha``.

    ``n_c`` is the ring element whose angular position is nearest to
    ``alpha`` (ties resolve upward), reduced into 1..N.
    """
    M = geom.M if M is None else M
    x = alpha / geom.delta_phi + (geom.N + 1) / 2
    n_c = math.floor(x + 0.5 + _EPS)
    return M // 2, (n_c - 1) % geom.N + 1


@dataclass(frozen=True)
class Codeword:
    layer: tuple[int, int]
    indices: tuple[int, int]
    beam_center: tuple[float, float]
    support: SubarraySpec
    geom: ArrayGeometry

    @cached_property
    def awv(self) -> Awv:
        return Awv.steering(self.geom, *self.beam_center, self.support)

    def gain(self, alpha, beta, pattern=None):
        """Complex beam gain (separable fast path)."""
        return steered_gain(self.geom, self.support, self.beam_center, alpha, beta, pattern)

    def with_support(self, support: SubarraySpec) -> "Codeword":
        return Codeword(self.layer, self.indices, self.beam_center, support, self.geom)


class CodebookLayer:
    def __init__(self, geom, pattern, m_s, n_s, bw_a, bw_e):
        self.geom = geom
        self.pattern = pattern
        self.m_s = m_s
        self.n_s = n_s
        self.bw_a = bw_a
        self.bw_e = bw_e
        self.bw_a_array = TWO_PI / n_s
        self.bw_e_array = TWO_PI / m_s
        self.bw_a_element, self.bw_e_element = element_beamwidth(geom, pattern, n_s, m_s)
        self.I = math.ceil(TWO_PI / bw_a - 1e-9)
        self.J = math.ceil(math.pi / bw_e - 1e-9)
        self._cache: dict[tuple[int, int], Codeword] = {}

    @property
    def key(self):
        return (self.m_s, self.n_s)

    def __len__(self):
        return self.I * self.J

    def __repr__(self):
        return f"CodebookLayer({self.m_s}, {self.n_s}, I={self.I}, J={self.J})"

    def alpha_center(self, i: int) -> float:
        return (i - 0.5) * self.bw_a

    def beta_center(self, j: int) -> float:
        return (j - 0.5) * self.bw_e

    def support_for(self, i: int) -> SubarraySpec:
        m_c, n_c = subarray_center(self.geom, self.alpha_center(i))
        return SubarraySpec.centered(self.geom.M, self.geom.N, self.m_s, self.n_s, m_c, n_c)

    def codeword(self, i: int, j: int) -> Codeword:
        if not (1 <= i <= self.I and 1 <= j <= self.J):
            raise IndexError(f"codeword ({i}, {j}) outside {self.I}x{self.J}")
        cw = self._cache.get((i, j))
        if cw is None:
            cw = Codeword(
                (self.m_s, self.n_s),
                (i, j),
                (self.alpha_center(i), self.beta_center(j)),
                self.support_for(i),
                self.geom,
            )
            self._cache[(i, j)] = cw
        return cw

    def codewords(self):
        return [self.codeword(i, j) for i in range(1, self.I + 1) for j in range(1, self.J + 1)]

    def indices_for(self, alpha: float, beta: float) -> tuple[int, int]:
        """``(ceil(alpha / BW_a), ceil(beta / BW_e))`` clipped to the grid."""
        a = wrap_2pi(alpha)
        i = math.ceil(a / self.bw_a - 1e-12)
        j = math.ceil(float(beta) / self.bw_e - 1e-12)
        return min(max(i, 1), self.I), min(max(j, 1), self.J)

    def select(self, alpha: float, beta: float) -> Codeword:
        return self.codeword(*self.indices_for(alpha, beta))


def build_layer(geom, pattern, m_s: int, n_s: int, n_limit: int | None = None) -> CodebookLayer:
    """Build layer ``(m_s, n_s)``; ``n_s`` may not exceed the activation bound.

    ``n_limit`` overrides the bound (pass ``geom.N`` to draw layers that are
    wider than what every azimuth can activate).
    """
    pattern.check_covers(geom)
    if not 1 <= m_s <= geom.M:
        raise ValueError(f"m_s={m_s} outside 1..{geom.M}")
    limit = min_max_activated(geom, pattern) if n_limit is None else n_limit
    if not 1 <= n_s <= limit:
        raise ValueError(f"n_s={n_s} exceeds the activation bound {limit}")
    bw_a, bw_e = layer_beamwidth(m_s, n_s, geom, pattern)
    return CodebookLayer(geom, pattern, m_s, n_s, bw_a, bw_e)


def default_layer_sizes(limit: int) -> list[int]:
    sizes, s = [], 1
    while s < limit:
        sizes.append(s)
        s *= 2
    return sizes + [limit]


class Codebook:
    """All layers of one array's codebook, keyed by ``(m_s, n_s)``."""

    def __init__(self, geom, pattern, layers: dict):
        self.geom = geom
        self.pattern = pattern
        self.layers = dict(sorted(layers.items()))
        self.m_values = sorted({m for m, _ in self.layers})
        self.n_values = sorted({n for _, n in self.layers})
        if self.max_key not in self.layers:
            raise ValueError("codebook lacks its maximum-resolution layer")

    @classmethod
    def build(cls, geom, pattern, m_values=None, n_values=None):
        n_max = min_max_activated(geom, pattern)
        m_values = default_layer_sizes(geom.M) if m_values is None else sorted(m_values)
        n_values = default_layer_sizes(n_max) if n_values is None else sorted(n_values)
        layers = {
            (m, n): build_layer(geom, pattern, m, n, n_limit=n_max)
            for m in m_values
            for n in n_values
        }
        return cls(geom, pattern, layers)

    @property
    def max_key(self):
        return (max(m for m, _ in self.layers), max(n for _, n in self.layers))

    @property
    def max_layer(self) -> CodebookLayer:
        return self.layers[self.max_key]

    def layer(self, m_s, n_s) -> CodebookLayer:
        return self.layers[(m_s, n_s)]

    def __iter__(self):
        return iter(self.layers.values())

    def __len__(self):
        return len(self.layers)


def codeword_coverage(cw: Codeword, layer: CodebookLayer):
    """Azimuth and elevation coverage intervals of a codeword.

    Array coverage is the ``BW_array``-wide bin and element coverage the
    ``BW_element``-wide union of sectors, both around the beam direction;
    their intersection is the ``BW``-wide bin ``[(i-1)BW_a, i BW_a]``. In
    elevation the array bin is intersected with the element elevation range.
    """
    alpha, beta = cw.beam_center
    half_a = min(layer.bw_a_array, layer.bw_a_element) / 2
    az = (alpha - half_a, alpha + half_a)
    j = cw.indices[1]
    lo, hi = layer.pattern.beta_range
    el = (max((j - 1) * layer.bw_e_array, lo), min(j * layer.bw_e_array, hi))
    return az, el


def coverage_check(layer: CodebookLayer, grid_step: float, codewords=None, physical=False):
    """Check that every grid angle falls inside some codeword's coverage.

    Returns ``(ok, uncovered)`` where ``uncovered`` is an ``(n, 2)`` array of
    ``(alpha, beta)`` grid points not covered. With ``physical=True`` an angle
    additionally needs at least one radiating element in the covering
    codeword's support.
    """
    cws = layer.codewords() if codewords is None else list(codewords)
    alphas = np.arange(0.0, TWO_PI - 1e-12, grid_step)
    betas = np.arange(0.0, math.pi + 1e-12, grid_step)
    if not cws:
        grid = np.stack(np.meshgrid(alphas, betas, indexing="ij"), -1).reshape(-1, 2)
        return False, grid
    az_in = np.zeros((len(cws), alphas.size), dtype=bool)
    el_in = np.zeros((len(cws), betas.size), dtype=bool)
    for k, cw in enumerate(cws):
        (a_lo, a_hi), (e_lo, e_hi) = codeword_coverage(cw, layer)
        if a_hi - a_lo >= TWO_PI - 1e-12:
            az_in[k] = True
        else:
            az_in[k] = np.mod(alphas - a_lo, TWO_PI) <= (a_hi - a_lo) + 1e-9
        el_in[k] = (betas >= e_lo - 1e-9) & (betas <= e_hi + 1e-9)
    if physical:
        geom, pat = layer.geom, layer.pattern
        for k, cw in enumerate(cws):
            facing = geom.facing()[cw.support.cols() - 1]
            radiating = pat.azimuth_gain(facing[None, :], alphas[:, None]).any(axis=1)
            az_in[k] &= radiating
        el_in &= pat.elevation_gain(betas).astype(bool)[None, :]
    covered = (az_in.T.astype(np.int32) @ el_in.astype(np.int32)) > 0
    ia, ib = np.nonzero(~covered)
    uncovered = np.column_stack([alphas[ia], betas[ib]])
    return uncovered.shape[0] == 0, uncovered


# -- structured text export -------------------------------------------------

def _geom_dict(geom: ArrayGeometry):
    return {
        "kind": geom.kind,
        "M": geom.M,
        "N": geom.N,
        "lambda_c": geom.lambda_c,
        "d_cyl": geom.d_cyl,
        "R_cyl": geom.R_cyl,
        "d_xy": geom.d_xy,
    }


def export_codebook(codebook: Codebook, path=None, layers=None, weights=True) -> dict:
    """Dump layer metadata and per-codeword support (and weights) as JSON."""
    keys = list(codebook.layers) if layers is None else [tuple(k) for k in layers]
    doc = {
        "geometry": _geom_dict(codebook.geom),
        "pattern": {
            "delta_alpha": codebook.pattern.delta_alpha,
            "delta_beta": codebook.pattern.delta_beta,
        },
        "layers": [],
    }
    for key in keys:
        layer = codebook.layers[key]
        entry = {
            "m_s": layer.m_s,
            "n_s": layer.n_s,
            "bw_a": layer.bw_a,
            "bw_e": layer.bw_e,
            "I": layer.I,
            "J": layer.J,
            "codewords": [],
        }
        for cw in layer.codewords():
            s = cw.support
            rec = {
                "i": cw.indices[0],
                "j": cw.indices[1],
                "alpha": cw.beam_center[0],
                "beta": cw.beam_center[1],
                "support": {"m_act": s.m_act, "n_act": s.n_act, "m_c": s.m_c, "n_c": s.n_c},
            }
            if weights:
                w = cw.awv.on_support()
                rec["weights_re"] = [round(float(x), 12) for x in w.real]
                rec["weights_im"] = [round(float(x), 12) for x in w.imag]
            entry["codewords"].append(rec)
        doc["layers"].append(entry)
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
    return doc


def import_codebook(source) -> tuple[Codebook, dict]:
    """Rebuild a codebook from an export; returns ``(codebook, document)``.

    The rebuilt layers are regenerated from geometry, so comparing against the
    stored supports/weights is a golden check on the construction.
    """
    if isinstance(source, dict):
        doc = source
    else:
        with open(source) as fh:
            doc = json.load(fh)
    g = doc["geometry"]
    geom = ArrayGeometry(
        g["kind"], g["M"], g["N"], g["lambda_c"], d_cyl=g["d_cyl"], R_cyl=g["R_cyl"], d_xy=g["d_xy"]
    )
    pattern = ElementPattern(doc["pattern"]["delta_alpha"], doc["pattern"]["delta_beta"])
    n_max = max(min_max_activated(geom, pattern), max(e["n_s"] for e in doc["layers"]))
    layers = {
        (e["m_s"], e["n_s"]): build_layer(geom, pattern, e["m_s"], e["n_s"], n_limit=n_max)
        for e in doc["layers"]
    }
    return Codebook(geom, pattern, layers), doc


def verify_export(codebook: Codebook, doc: dict, atol=1e-9) -> list[str]:
    """Differences between ``codebook`` and an exported document (empty = match)."""
    problems = []
    for e in doc["layers"]:
        layer = codebook.layers.get((e["m_s"], e["n_s"]))
        if layer is None:
            problems.append(f"missing layer {(e['m_s'], e['n_s'])}")
            continue
        if (layer.I, layer.J) != (e["I"], e["J"]):
            problems.append(f"layer {layer.key}: grid {layer.I}x{layer.J} != {e['I']}x{e['J']}")
            continue
        for rec in e["codewords"]:
            cw = layer.codeword(rec["i"], rec["j"])
            s = cw.support
            got = {"m_act": s.m_act, "n_act": s.n_act, "m_c": s.m_c, "n_c": s.n_c}
            if got != rec["support"]:
                problems.append(f"{layer.key} {cw.indices}: support {got} != {rec['support']}")
            if "weights_re" in rec:
                w = cw.awv.on_support()
                ref = np.asarray(rec["weights_re"]) + 1j * np.asarray(rec["weights_im"])
                if ref.shape != w.shape or not np.allclose(w, ref, atol=atol):
                    problems.append(f"{layer.key} {cw.indices}: weights differ")
    return problems


def pattern_table(layer: CodebookLayer, beta=None, step_deg: float = 1.0, pattern=None):
    """Azimuth-plane |gain| of every codeword column (j fixed) on a degree grid.

    Returns ``(angles_deg, gains)`` with ``gains`` shaped ``(len(angles), I)``;
    the columns reproduce a polar coverage plot of the layer.
    """
    if beta is None:
        beta = math.pi / 2
    j = layer.indices_for(0.0, beta)[1]
    deg = np.arange(0.0, 360.0, step_deg)
    a = np.radians(deg)
    cols = [np.abs(layer.codeword(i, j).gain(a, beta, pattern)) for i in range(1, layer.I + 1)]
    return deg, np.column_stack(cols)
