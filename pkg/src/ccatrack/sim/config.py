"""Scenario configuration stored as JSON with field names mirroring SimConfig."""

from __future__ import annotations

import dataclasses
import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

from ..array import ArrayGeometry, ElementPattern
from ..channel import ChannelParams, noise_power
from ..codebook import Codebook
from ..mobility import MobilityParams

SCHEMES = (
    "cca-predict",
    "cca-genie",
    "upa",
    "fixed-partition",
    "te-aware",
    "min-beamwidth",
    "exhaustive",
)


@dataclass
class SimConfig:
    # arrays
    M_t: int = 16
    N_t: int = 64
    M_r: int = 112
    N_r: int = 64
    R_cyl: float = 0.0509
    lambda_c: float = 0.005
    delta_alpha: float = 2 * math.pi / 3
    delta_beta: float = math.pi
    upa_delta_alpha: float = 2 * math.pi / 3
    # network and link budget
    K: int = 2
    N_RF: int = 4
    power_w: float = 0.06
    bandwidth_hz: float = 2.16e9
    noise_figure_db: float = 10.0
    noise_w: float | None = None
    h0: float | None = None
    gamma: float = 2.0
    interference: bool = False
    # mobility
    mean_turn_duration: float = 1.0
    sigma_r2: float = 0.05
    v_xy_min: float = 10.0
    v_xy_max: float = 20.0
    v_z_min: float = 2.0
    v_z_max: float = 3.0
    d_min: float = 10.0
    d_max: float = 60.0
    altitude: float = 100.0
    # frame protocol
    T: int = 50
    slot_s: float = 0.01
    frames: int = 10
    # prediction and error bounding
    gp_window: int = 10
    gp_history: int = 1500
    gp_stride: int = 5
    gp_max_pairs: int = 120
    gp_eta_min: float = 1e-2
    gp_restarts: int = 1
    i_max: int = 1000
    p_alpha: float = 0.9
    p_beta: float = 0.9
    inject_pos_std: float = 0.0
    inject_att_std: float = 0.0
    # latency model
    n_msi: int = 6
    bits_per_value: int = 4
    c_lb_bps: float = 500e3
    data_bits: float = 1e6
    # run control
    scheme: str = "cca-predict"
    seed: int = 0
    runs: int = 1
    workers: int = 1
    out_dir: str = "runs"
    outage_thresholds_db: list = field(default_factory=lambda: [float(x) for x in range(-10, 41, 5)])

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = (
            "M_t N_t M_r N_r R_cyl lambda_c delta_alpha delta_beta upa_delta_alpha power_w "
            "bandwidth_hz mean_turn_duration v_xy_max v_z_max d_min d_max T slot_s frames "
            "gp_window gp_history gp_stride gp_max_pairs i_max c_lb_bps data_bits runs workers"
        ).split()
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not self.K < self.N_RF:
            raise ValueError("the r-UAV needs more RF chains than t-UAVs (K < N_RF)")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {', '.join(SCHEMES)}")
        if self.d_min >= self.d_max:
            raise ValueError("d_min must be below d_max")
        if self.gp_history < self.gp_window + self.T + 2:
            raise ValueError("gp_history too short for one training window plus horizon")
        if self.i_max < 100:
            raise ValueError("i_max must be at least 100")
        for p in (self.p_alpha, self.p_beta):
            if not 0 < p <= 1:
                raise ValueError("confidence levels must lie in (0, 1]")
        if self.noise_w is not None and self.noise_w <= 0:
            raise ValueError("noise_w must be positive")
        if self.inject_pos_std < 0 or self.inject_att_std < 0:
            raise ValueError("injected error must be non-negative")

    # -- serialisation --------------------------------------------------
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - names)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "SimConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    # -- derived objects ------------------------------------------------
    @property
    def pattern(self) -> ElementPattern:
        return ElementPattern(self.delta_alpha, self.delta_beta)

    @property
    def upa_pattern(self) -> ElementPattern:
        return ElementPattern(self.upa_delta_alpha, self.delta_beta)

    @property
    def geom_t(self) -> ArrayGeometry:
        return ArrayGeometry.cylinder(self.M_t, self.N_t, self.R_cyl, self.lambda_c)

    @property
    def geom_r(self) -> ArrayGeometry:
        return ArrayGeometry.cylinder(self.M_r, self.N_r, self.R_cyl, self.lambda_c)

    @property
    def upa_t(self) -> ArrayGeometry:
        return ArrayGeometry.planar(self.M_t, self.N_t, self.lambda_c)

    @property
    def upa_r(self) -> ArrayGeometry:
        return ArrayGeometry.planar(self.M_r, self.N_r, self.lambda_c)

    @property
    def noise(self) -> float:
        if self.noise_w is not None:
            return self.noise_w
        return noise_power(self.bandwidth_hz, self.noise_figure_db)

    @property
    def channel(self) -> ChannelParams:
        h0 = self.lambda_c / (4 * math.pi) if self.h0 is None else self.h0
        return ChannelParams(h0=h0, gamma=self.gamma, lambda_c=self.lambda_c, sigma_n2=self.noise)

    @property
    def mobility(self) -> MobilityParams:
        return MobilityParams(
            mean_turn_duration=self.mean_turn_duration,
            sigma_r2=self.sigma_r2,
            v_xy_max=self.v_xy_max,
            v_xy_min=self.v_xy_min,
            v_z_min=self.v_z_min,
            v_z_max=self.v_z_max,
            d_min=self.d_min,
            d_max=self.d_max,
            dt=self.slot_s,
        )

    @property
    def scored_slots(self) -> int:
        return self.frames * (self.T + 1)


_CODEBOOKS: dict = {}
_CODEBOOK_LOCK = threading.Lock()


def codebooks(cfg: SimConfig):
    """``(t-UAV codebook, r-UAV codebook)``, cached per geometry."""
    key = (cfg.M_t, cfg.N_t, cfg.M_r, cfg.N_r, cfg.R_cyl, cfg.lambda_c, cfg.delta_alpha, cfg.delta_beta)
    with _CODEBOOK_LOCK:
        if key not in _CODEBOOKS:
            pat = cfg.pattern
            _CODEBOOKS[key] = (Codebook.build(cfg.geom_t, pat), Codebook.build(cfg.geom_r, pat))
        return _CODEBOOKS[key]
