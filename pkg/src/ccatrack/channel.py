"""Line-of-sight mmWave channel between DRE-covered arrays and link metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array import ArrayGeometry, Awv, ElementPattern, element_gains, steering_vector


@dataclass(frozen=True)
class ChannelParams:
    h0: complex = 1.0
    gamma: float = 2.0
    lambda_c: float = 0.005
    sigma_n2: float = 1e-12

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("path-loss exponent must be >= 0")
        if self.sigma_n2 <= 0:
            raise ValueError("noise power must be positive")

    def path_factor(self, distance: float) -> complex:
        """Amplitude factor h0 * D^(-gamma/2), so received power falls as D^-gamma."""
        if distance <= 0:
            raise ValueError(f"link distance must be positive, got {distance}")
        return self.h0 * distance ** (-self.gamma / 2)


@dataclass(frozen=True)
class LinkState:
    distance: float
    aod: tuple[float, float]
    aoa: tuple[float, float]
    tx_geom: ArrayGeometry
    tx_pattern: ElementPattern
    rx_geom: ArrayGeometry
    rx_pattern: ElementPattern

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("link distance must be positive")


def _response(geom, pattern, angles, idx):
    a = steering_vector(geom, *angles)[idx]
    return a * element_gains(geom, pattern, *angles)[idx]


def effective_gain(link: LinkState, params: ChannelParams, f: Awv, w: Awv) -> complex:
    """w^H H f using the rank-one structure of the LoS channel."""
    g = params.path_factor(link.distance)
    ti = f.support.flat_indices()
    ri = w.support.flat_indices()
    tx = np.vdot(_response(link.tx_geom, link.tx_pattern, link.aod, ti), f.entries[ti])
    rx = np.vdot(w.entries[ri], _response(link.rx_geom, link.rx_pattern, link.aoa, ri))
    return complex(g * rx * tx)


def channel_matrix(link: LinkState, params: ChannelParams) -> np.ndarray:
    """Explicit ``(Mr Nr) x (Mt Nt)`` channel; only meant for small arrays."""
    ar = steering_vector(link.rx_geom, *link.aoa) * element_gains(
        link.rx_geom, link.rx_pattern, *link.aoa
    )
    at = steering_vector(link.tx_geom, *link.aod) * element_gains(
        link.tx_geom, link.tx_pattern, *link.aod
    )
    return params.path_factor(link.distance) * np.outer(ar, at.conj())


def gain_matrix(links, params, fs, ws) -> np.ndarray:
    """``G[k, i] = w_k^H H_i f_i``: desired terms on the diagonal."""
    K = len(links)
    G = np.zeros((K, K), dtype=complex)
    for k in range(K):
        for i in range(K):
            G[k, i] = effective_gain(links[i], params, fs[i], ws[k])
    return G


def sinr_from_gains(G, powers, sigma_n2, w_norm2=None, interference=True) -> np.ndarray:
    """Per-link SINR (or SNR when ``interference`` is False) from a gain matrix."""
    G = np.asarray(G)
    p = np.asarray(powers, dtype=float)
    w2 = np.ones(len(p)) if w_norm2 is None else np.asarray(w_norm2, float)
    power = np.abs(G) ** 2 * p[None, :]
    signal = np.diag(power).copy()
    interf = power.sum(axis=1) - signal if interference else 0.0
    return signal / (interf + sigma_n2 * w2)


def sinr(k, links, params, fs, ws, powers) -> float:
    G = np.array([[effective_gain(links[i], params, fs[i], ws[k]) for i in range(len(links))]])
    p = np.asarray(powers, dtype=float)
    num = p[k] * abs(G[0, k]) ** 2
    den = sum(p[i] * abs(G[0, i]) ** 2 for i in range(len(links)) if i != k)
    return float(num / (den + params.sigma_n2 * np.vdot(ws[k].entries, ws[k].entries).real))


def snr(link, params, f, w, power) -> float:
    g = effective_gain(link, params, f, w)
    return float(power * abs(g) ** 2 / (params.sigma_n2 * np.vdot(w.entries, w.entries).real))


def sum_se(values) -> float:
    """Sum spectral efficiency in bits/s/Hz."""
    return float(np.sum(np.log2(1.0 + np.asarray(values, dtype=float))))


def outage_probability(min_snr, threshold):
    """Fraction of samples whose minimum-over-links SNR falls below ``threshold``.

    ``threshold`` may be an array; the result then has its shape.
    """
    s = np.asarray(min_snr, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("no SNR samples")
    th = np.asarray(threshold, dtype=float)
    out = (s[None, :] < th.reshape(-1, 1)).mean(axis=1)
    return out.reshape(th.shape) if th.ndim else float(out[0])


def noise_power(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise power in watts, -174 dBm/Hz plus noise figure."""
    dbm = -174.0 + 10 * math.log10(bandwidth_hz) + noise_figure_db
    return 10 ** (dbm / 10) / 1000.0
