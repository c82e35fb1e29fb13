"""Cylindrical conformal array (CCA) and planar array geometry.

Elements are addressed by 1-based ``(m, n)``: ``m`` runs along the cylinder
axis (+z), ``n`` around the ring (or along the planar row). Flat vectors are
stored m-major, i.e. ``flat = (m - 1) * N + (n - 1)``.

Angle conventions used everywhere in the package:

* azimuth ``alpha`` is measured in the xy-plane from +x, any real value
  (reduced modulo 2*pi where needed);
* elevation ``beta`` lies in ``[0, pi]`` and is measured from +z. A
  directional element with elevation width ``delta_beta`` radiates over
  ``[pi/2 - delta_beta/2, pi/2 + delta_beta/2]``; this is the only place
  where the symmetric element coverage is mapped onto ``[0, pi]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

TWO_PI = 2.0 * math.pi
_ANGLE_TOL = 1e-9


def wrap_pi(x):
    """Wrap angles to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + math.pi, TWO_PI) - math.pi
    y = np.where(y <= -math.pi, y + TWO_PI, y)
    return y if np.ndim(y) else float(y)


def wrap_2pi(x):
    """Wrap angles to [0, 2*pi)."""
    y = np.mod(np.asarray(x, dtype=float), TWO_PI)
    y = np.where(y >= TWO_PI, 0.0, y)
    return y if np.ndim(y) else float(y)


@dataclass(frozen=True)
class ArrayGeometry:
    kind: Literal["cylindrical", "planar"]
    M: int
    N: int
    lambda_c: float
    d_cyl: float | None = None
    R_cyl: float = 0.0
    d_xy: float | None = None  # planar row pitch

    def __post_init__(self):
        if self.kind not in ("cylindrical", "planar"):
            raise ValueError(f"unknown array kind {self.kind!r}")
        if self.M < 1 or self.N < 1:
            raise ValueError("M and N must be >= 1")
        if self.lambda_c <= 0:
            raise ValueError("lambda_c must be positive")
        if self.d_cyl is None:
            object.__setattr__(self, "d_cyl", self.lambda_c / 2)
        if self.d_xy is None:
            object.__setattr__(self, "d_xy", self.lambda_c / 2)
        if self.d_cyl <= 0:
            raise ValueError("d_cyl must be positive")
        if self.kind == "cylindrical" and self.R_cyl <= 0:
            raise ValueError("cylindrical arrays need R_cyl > 0")

    @classmethod
    def cylinder(cls, M, N, R_cyl, lambda_c, d_cyl=None):
        return cls("cylindrical", M, N, lambda_c, d_cyl=d_cyl, R_cyl=R_cyl)

    @classmethod
    def planar(cls, M, N, lambda_c, d_cyl=None, d_xy=None):
        return cls("planar", M, N, lambda_c, d_cyl=d_cyl, d_xy=d_xy)

    @property
    def size(self) -> int:
        return self.M * self.N

    @property
    def wavenumber(self) -> float:
        return TWO_PI / self.lambda_c

    @property
    def delta_phi(self) -> float:
        if self.kind != "cylindrical":
            raise ValueError("angular pitch is only defined for cylindrical arrays")
        return TWO_PI / self.N

    def z_positions(self) -> np.ndarray:
        """z coordinate of each row, ``(M + 1 - 2m) d / 2`` for m = 1..M."""
        m = np.arange(1, self.M + 1)
        return (self.M + 1 - 2 * m) * self.d_cyl / 2

    def ring_angles(self) -> np.ndarray:
        """Angular position of every ring element (cylindrical only)."""
        n = np.arange(1, self.N + 1)
        return (2 * n - 1 - self.N) * self.delta_phi / 2

    def row_positions(self) -> np.ndarray:
        """y coordinate of each column of a planar array."""
        n = np.arange(1, self.N + 1)
        return (2 * n - 1 - self.N) * self.d_xy / 2

    def facing(self) -> np.ndarray:
        """Outward normal azimuth of each column."""
        if self.kind == "cylindrical":
            return self.ring_angles()
        return np.zeros(self.N)

    def flat_index(self, m: int, n: int) -> int:
        self.check_index(m, n)
        return (m - 1) * self.N + (n - 1)

    def check_index(self, m: int, n: int):
        if not (1 <= m <= self.M and 1 <= n <= self.N):
            raise IndexError(f"element ({m}, {n}) outside {self.M}x{self.N} array")


@dataclass(frozen=True)
class ElementPattern:
    """Ideal sectored directional radiating element."""

    delta_alpha: float
    delta_beta: float = math.pi

    def __post_init__(self):
        if not (0 < self.delta_alpha <= TWO_PI + _ANGLE_TOL):
            raise ValueError("delta_alpha must lie in (0, 2*pi]")
        if not (0 < self.delta_beta <= math.pi + _ANGLE_TOL):
            raise ValueError("delta_beta must lie in (0, pi]")

    def check_covers(self, geom: ArrayGeometry):
        """Full angular coverage needs the ring pitch inside one sector."""
        if geom.kind == "cylindrical" and geom.delta_phi > self.delta_alpha + _ANGLE_TOL:
            raise ValueError(
                f"ring pitch {geom.delta_phi:.4f} exceeds element width {self.delta_alpha:.4f}"
            )

    @property
    def beta_range(self) -> tuple[float, float]:
        return (math.pi / 2 - self.delta_beta / 2, math.pi / 2 + self.delta_beta / 2)

    def elevation_gain(self, beta):
        lo, hi = self.beta_range
        b = np.asarray(beta, dtype=float)
        return ((b >= lo - _ANGLE_TOL) & (b <= hi + _ANGLE_TOL)).astype(float)

    def azimuth_gain(self, facing, alpha):
        """1 where ``alpha`` lies in the closed sector around ``facing``."""
        d = np.abs(wrap_pi(np.asarray(alpha, dtype=float) - np.asarray(facing, dtype=float)))
        return (d <= self.delta_alpha / 2 + _ANGLE_TOL).astype(float)


@dataclass(frozen=True)
class SubarraySpec:
    """Rectangle of ``m_act x n_act`` elements around the centre ``(m_c, n_c)``.

    Rows run ``m_c - m_act // 2`` .. ``+ m_act - 1`` and must lie inside the
    array; columns follow the same rule modulo ``N`` so a subarray may wrap
    across the ``n = N / n = 1`` seam. Use :meth:`centered` to clamp a
    nominal row centre into range.
    """

    M: int
    N: int
    m_act: int
    n_act: int
    m_c: int
    n_c: int

    def __post_init__(self):
        if not (1 <= self.m_act <= self.M and 1 <= self.n_act <= self.N):
            raise ValueError(f"subarray {self.m_act}x{self.n_act} does not fit {self.M}x{self.N}")
        if not 1 <= self.n_c <= self.N:
            raise ValueError(f"ring centre {self.n_c} outside 1..{self.N}")
        first = self.m_c - self.m_act // 2
        if first < 1 or first + self.m_act - 1 > self.M:
            raise ValueError(f"rows of subarray centred at m_c={self.m_c} leave 1..{self.M}")

    @classmethod
    def centered(cls, M, N, m_act, n_act, m_c, n_c):
        """Build a subarray, wrapping ``n_c`` and sliding rows inside the array."""
        n_c = (int(n_c) - 1) % N + 1
        first = int(m_c) - m_act // 2
        first = min(max(first, 1), M - m_act + 1)
        return cls(M, N, int(m_act), int(n_act), first + m_act // 2, n_c)

    @classmethod
    def full(cls, geom: ArrayGeometry):
        return cls.centered(geom.M, geom.N, geom.M, geom.N, 1, geom.N // 2 + 1)

    @property
    def size(self) -> int:
        return self.m_act * self.n_act

    def rows(self) -> np.ndarray:
        first = self.m_c - self.m_act // 2
        return np.arange(first, first + self.m_act)

    def cols(self) -> np.ndarray:
        first = self.n_c - self.n_act // 2
        return (np.arange(first, first + self.n_act) - 1) % self.N + 1

    def contains(self, m: int, n: int) -> bool:
        first = self.m_c - self.m_act // 2
        if not first <= m < first + self.m_act:
            return False
        offset = (n - (self.n_c - self.n_act // 2)) % self.N
        return offset < self.n_act

    def flat_indices(self) -> np.ndarray:
        r = self.rows() - 1
        c = self.cols() - 1
        return (r[:, None] * self.N + c[None, :]).ravel()

    def mask(self) -> np.ndarray:
        out = np.zeros(self.M * self.N, dtype=bool)
        out[self.flat_indices()] = True
        return out

    def with_rows(self, m_act: int, m_c: int) -> "SubarraySpec":
        return SubarraySpec(self.M, self.N, m_act, self.n_act, m_c, self.n_c)


@dataclass(frozen=True)
class Awv:
    """Unit-norm antenna weight vector living on ``support``."""

    entries: np.ndarray = field(repr=False)
    support: SubarraySpec

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex)
        if e.shape != (self.support.M * self.support.N,):
            raise ValueError("AWV length must equal M*N")
        if np.any(e[~self.support.mask()] != 0):
            raise ValueError("AWV has weight outside its support")
        norm = np.linalg.norm(e)
        if not math.isclose(norm, 1.0, rel_tol=1e-9):
            raise ValueError(f"AWV norm {norm} != 1")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def steering(cls, geom: ArrayGeometry, alpha, beta, support: SubarraySpec) -> "Awv":
        v = masked_steering(geom, alpha, beta, support)
        return cls(v / np.linalg.norm(v), support)

    def on_support(self) -> np.ndarray:
        return self.entries[self.support.flat_indices()]


def element_angular_position(geom: ArrayGeometry, n: int) -> float:
    if geom.kind != "cylindrical":
        raise ValueError("element angular positions exist only on cylindrical arrays")
    if not 1 <= n <= geom.N:
        raise IndexError(f"ring index {n} outside 1..{geom.N}")
    return (2 * n - 1 - geom.N) * geom.delta_phi / 2


def element_gain(geom, pattern, m, n, alpha, beta) -> int:
    geom.check_index(m, n)
    az = pattern.azimuth_gain(geom.facing()[n - 1], alpha)
    return int(az * pattern.elevation_gain(beta))


def element_gains(geom, pattern, alpha, beta) -> np.ndarray:
    """Flat {0,1} vector of every element's gain at one angle."""
    ring = pattern.azimuth_gain(geom.facing(), alpha) * pattern.elevation_gain(beta)
    return np.tile(ring, geom.M)


def _phase_terms(geom, alpha, beta):
    """Per-row and per-column phase (radians) for direction (alpha, beta)."""
    k = geom.wavenumber
    zp = k * geom.z_positions() * math.cos(beta)
    if geom.kind == "cylindrical":
        phi = geom.ring_angles()
        cp = k * geom.R_cyl * math.sin(beta) * np.cos(phi - alpha)
    else:
        cp = k * geom.row_positions() * math.sin(beta) * math.sin(alpha)
    return zp, cp


def steering_vector(geom: ArrayGeometry, alpha, beta) -> np.ndarray:
    zp, cp = _phase_terms(geom, float(alpha), float(beta))
    return np.exp(1j * (zp[:, None] + cp[None, :])).ravel()


def masked_steering(geom, alpha, beta, support: SubarraySpec) -> np.ndarray:
    a = steering_vector(geom, alpha, beta)
    a[~support.mask()] = 0.0
    return a


def beam_gain(awv: Awv, geom, alpha, beta, pattern: ElementPattern | None = None) -> complex:
    """sqrt(M_act N_act) a^H v; with ``pattern`` the element gains weight ``a``."""
    idx = awv.support.flat_indices()
    a = steering_vector(geom, alpha, beta)[idx]
    if pattern is not None:
        a = a * element_gains(geom, pattern, alpha, beta)[idx]
    return complex(math.sqrt(awv.support.size) * np.vdot(a, awv.entries[idx]))


def sum_element_gain(geom, pattern, support: SubarraySpec, alpha, beta) -> int:
    g = element_gains(geom, pattern, alpha, beta)
    return int(g[support.flat_indices()].sum())


def steered_gain(geom, support: SubarraySpec, center, alpha, beta, pattern=None):
    """Beam gain of the normalised masked steering AWV pointed at ``center``.

    Rectangular supports make the array factor separable into a row sum and a
    column sum, so this costs O(m_act + n_act) per angle instead of
    O(m_act n_act). ``alpha``/``beta`` broadcast against each other.
    """
    a0, b0 = center
    alpha, beta = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    k = geom.wavenumber
    z = geom.z_positions()[support.rows() - 1]
    zsum = np.exp(1j * k * np.multiply.outer(math.cos(b0) - np.cos(beta), z)).sum(axis=-1)
    cols = support.cols() - 1
    if geom.kind == "cylindrical":
        phi = geom.ring_angles()[cols]
        ref = k * geom.R_cyl * math.sin(b0) * np.cos(phi - a0)
        cur = k * geom.R_cyl * np.sin(beta)[..., None] * np.cos(phi - alpha[..., None])
    else:
        y = geom.row_positions()[cols]
        ref = k * y * math.sin(b0) * math.sin(a0)
        cur = k * y * (np.sin(beta) * np.sin(alpha))[..., None]
    terms = np.exp(1j * (ref - cur))
    if pattern is not None:
        terms = terms * pattern.azimuth_gain(geom.facing()[cols], alpha[..., None])
        zsum = zsum * pattern.elevation_gain(beta)
    g = zsum * terms.sum(axis=-1)
    return g if g.ndim else complex(g)
