"""Frame protocol, per-slot metrics and the latency model."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..array import wrap_pi
from ..beamtrack import PartitionInfeasible
from ..channel import LinkState, gain_matrix, sinr_from_gains, sum_se
from .config import SimConfig
from .schemes import decide, prepare
from .world import World, world_key

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class MetricsRecord:
    """Link metrics of one slot; ``sinr`` is what the SE is computed from
    (equal to ``snr`` when interference is ignored)."""

    slot: int
    frame: int
    offset: int
    snr: tuple
    sinr: tuple
    sum_se: float
    min_snr: float
    t_layers: tuple
    r_layers: tuple
    aod_residual: tuple  # per UAV (azimuth, elevation) true minus beam direction
    aoa_residual: tuple
    t_msi: float
    t_tra: float
    t_pro: float

    @property
    def kind(self) -> str:
        return "e" if self.offset == 0 else "t"

    def check(self, rel=1e-12):
        if not math.isclose(self.sum_se, sum_se(self.sinr), rel_tol=rel, abs_tol=1e-12):
            raise AssertionError(f"slot {self.slot}: recorded SE disagrees with its SINRs")
        if not math.isclose(self.min_snr, min(self.snr), rel_tol=rel, abs_tol=0.0):
            raise AssertionError(f"slot {self.slot}: recorded min-SNR disagrees with its SNRs")

    @staticmethod
    def header(K: int) -> list:
        cols = ["slot", "frame", "offset", "kind"]
        for k in range(K):
            cols += [
                f"snr_{k}", f"sinr_{k}", f"t_layer_{k}", f"r_layer_{k}",
                f"aod_res_az_{k}", f"aod_res_el_{k}", f"aoa_res_az_{k}", f"aoa_res_el_{k}",
            ]
        return cols + ["sum_se", "min_snr", "t_msi_s", "t_tra_s", "t_pro_s"]

    def row(self) -> list:
        out = [self.slot, self.frame, self.offset, self.kind]
        for k in range(len(self.snr)):
            out += [
                _fmt(self.snr[k]), _fmt(self.sinr[k]), self.t_layers[k], self.r_layers[k],
                *(_fmt(x) for x in self.aod_residual[k]), *(_fmt(x) for x in self.aoa_residual[k]),
            ]
        return out + [_fmt(x) for x in (self.sum_se, self.min_snr, self.t_msi, self.t_tra, self.t_pro)]


def _fmt(x) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class Latency:
    t_msi: float
    t_tra: float
    t_pro: float
    local_e: float
    local_t: float

    @property
    def total_e(self) -> float:
        return self.t_msi + self.t_tra + self.t_pro + self.local_e

    @property
    def total_t(self) -> float:
        return self.t_tra + self.t_pro + self.local_t

    def average(self, T: int) -> float:
        return (T * self.total_t + self.total_e) / (T + 1)

    def as_dict(self, T: int) -> dict:
        return {
            "t_msi_s": self.t_msi,
            "t_tra_s": self.t_tra,
            "t_pro_s": self.t_pro,
            "local_e_s": self.local_e,
            "local_t_s": self.local_t,
            "total_e_s": self.total_e,
            "total_t_s": self.total_t,
            "average_s": self.average(T),
        }


def msi_exchange_time(cfg: SimConfig) -> float:
    """Low-band transfer time of ``n_msi * T`` values of ``bits_per_value`` bits."""
    return cfg.n_msi * cfg.T * cfg.bits_per_value / cfg.c_lb_bps


def latency_estimate(cfg: SimConfig, mean_rate_bps, max_distance, local_e=0.0, local_t=0.0):
    """``(total_e, total_t, average)`` latency plus the component breakdown."""
    if mean_rate_bps <= 0:
        raise ValueError("mean mmWave rate must be positive")
    lat = Latency(
        t_msi=msi_exchange_time(cfg),
        t_tra=cfg.data_bits / mean_rate_bps,
        t_pro=max_distance / SPEED_OF_LIGHT,
        local_e=local_e,
        local_t=local_t,
    )
    return lat.total_e, lat.total_t, lat.average(cfg.T), lat


@dataclass
class RunResult:
    config: SimConfig
    seed: int
    records: list
    timing: dict = field(default_factory=dict)

    @property
    def mean_sum_se(self) -> float:
        return float(np.mean([r.sum_se for r in self.records]))

    @property
    def min_snrs(self) -> np.ndarray:
        return np.array([r.min_snr for r in self.records])

    def latency(self) -> Latency:
        c = self.config
        rate = c.bandwidth_hz * self.mean_sum_se / c.K
        d = max(r.t_pro for r in self.records) * SPEED_OF_LIGHT
        local = (self.timing.get("local_e_s", 0.0), self.timing.get("local_t_s", 0.0))
        if rate <= 0:  # permanent outage: nothing is ever delivered
            return Latency(msi_exchange_time(c), math.inf, d / SPEED_OF_LIGHT, *local)
        return latency_estimate(c, rate, d, *local)[3]


def _residual(true, used):
    return (float(wrap_pi(true[0] - used[0])), float(true[1] - used[1]))


def slot_metrics(cfg: SimConfig, truth, dec, s, f, o) -> MetricsRecord:
    links = [
        LinkState(d, aod, aoa, dec.tx_geom, dec.tx_pattern, dec.rx_geom, dec.rx_pattern)
        for aod, aoa, d in truth
    ]
    ch = cfg.channel
    G = gain_matrix(links, ch, dec.fs, dec.ws)
    powers = np.full(cfg.K, cfg.power_w)
    w2 = [float(np.vdot(w.entries, w.entries).real) for w in dec.ws]
    snr = sinr_from_gains(G, powers, ch.sigma_n2, w2, interference=False)
    rate_sinr = sinr_from_gains(G, powers, ch.sigma_n2, w2, interference=cfg.interference)
    se = sum_se(rate_sinr)
    return MetricsRecord(
        slot=s,
        frame=f,
        offset=o,
        snr=tuple(float(x) for x in snr),
        sinr=tuple(float(x) for x in rate_sinr),
        sum_se=se,
        min_snr=float(snr.min()),
        t_layers=tuple(dec.t_layers),
        r_layers=tuple(dec.r_layers),
        aod_residual=tuple(_residual(t[0], d) for t, d in zip(truth, dec.t_dirs)),
        aoa_residual=tuple(_residual(t[1], d) for t, d in zip(truth, dec.r_dirs)),
        t_msi=msi_exchange_time(cfg) if o == 0 else 0.0,
        t_tra=cfg.data_bits / (cfg.bandwidth_hz * se / cfg.K) if se > 0 else math.inf,
        t_pro=max(d for _, _, d in truth) / SPEED_OF_LIGHT,
    )


def run_scenario(cfg: SimConfig, world: World | None = None, seed: int | None = None) -> RunResult:
    """Run every frame of one seed: an e-slot followed by ``T`` t-slots."""
    seed = cfg.seed if seed is None else seed
    if world is None:
        world = World(cfg, seed)
    elif world_key(world.cfg, world.seed) != world_key(cfg, seed):
        raise ValueError("world was built for a different seed or scenario")
    records = []
    dec_e, dec_t = [], []
    for f, o, s in world.slots():
        truth = world.true_angles(s)
        if o == 0:
            # prediction and bounding are timed by the world itself
            prepare(cfg, world, f)
        t0 = time.perf_counter()
        try:
            dec = decide(cfg, world, f, o, truth)
        except PartitionInfeasible as exc:
            raise PartitionInfeasible(f"slot {s} (frame {f}, offset {o}): {exc}") from exc
        (dec_e if o == 0 else dec_t).append(time.perf_counter() - t0)
        records.append(slot_metrics(cfg, truth, dec, s, f, o))
    # the frame-0 hyperparameter fit is a one-off start-up cost; steady-state
    # e-slots only re-condition the GPs on the refreshed history
    pred = world.timing["predict_s"] or [0.0]
    fit_s = pred[0]
    refresh = pred[1:] or pred
    bound = world.timing["bound_s"] if cfg.scheme in ("te-aware", "exhaustive") else []
    local_e = float(np.mean(dec_e) + np.mean(refresh) + (np.mean(bound) if bound else 0.0))
    timing = {
        "gp_fit_s": float(fit_s),
        "predict_s": float(np.mean(refresh)),
        "bound_s": float(np.mean(bound)) if bound else 0.0,
        "decide_e_s": float(np.mean(dec_e)),
        "decide_t_s": float(np.mean(dec_t)) if dec_t else 0.0,
        "local_e_s": local_e,
        "local_t_s": float(np.mean(dec_t)) if dec_t else 0.0,
    }
    return RunResult(cfg.replace(seed=seed), seed, records, timing)


def run_many(cfg: SimConfig, seeds, schemes=None, workers=None, variants=None) -> dict:
    """Run several schemes on every seed, sharing one world per seed.

    ``variants`` maps a label to config changes (for instance a scheme
    plus injected error); by default each name in ``schemes`` is a variant
    that only sets the scheme. Variants may not change anything the world
    depends on. Seeds run in parallel worker threads and each label maps
    to its runs sorted by seed, independent of completion order.
    """
    if variants is None:
        variants = {sch: {"scheme": sch} for sch in (schemes or [cfg.scheme])}
    configs = {label: cfg.replace(**changes) for label, changes in variants.items()}
    workers = workers or cfg.workers

    def one(seed):
        world = World(cfg, seed)
        return {label: run_scenario(c.replace(seed=seed), world) for label, c in configs.items()}

    seeds = sorted(set(int(s) for s in seeds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(one, seeds))
    else:
        done = [one(s) for s in seeds]
    return {label: [d[label] for d in done] for label in configs}
