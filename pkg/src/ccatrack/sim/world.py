"""Trajectories, MSI predictions and tracking-error estimates for one seed.

A world is independent of the beam-tracking scheme, so one instance is
built per seed and shared by every scheme evaluated on it.
"""

from __future__ import annotations

import time

import numpy as np

from ..mobility import simulate_formation
from ..tracking import MsiDistribution, MsiPredictor, bound_tracking_error, geometric_angles
from .config import SimConfig

WORLD_FIELDS = (
    "K mean_turn_duration sigma_r2 v_xy_min v_xy_max v_z_min v_z_max d_min d_max altitude "
    "T slot_s frames gp_window gp_history gp_stride gp_max_pairs gp_eta_min gp_restarts "
    "i_max p_alpha p_beta"
).split()


def world_key(cfg: SimConfig, seed: int):
    """Everything a world depends on; injected error is applied per view."""
    return (seed,) + tuple(getattr(cfg, f) for f in WORLD_FIELDS)


class FrameData:
    """Everything the UAVs know or predict during one frame."""

    def __init__(self, e_slot, r_pred, t_pred):
        self.e_slot = e_slot
        self.r_pred = r_pred  # MsiDistribution over the T t-slots
        self.t_pred = t_pred  # one MsiDistribution per t-UAV
        self.aod_hat = None
        self.aoa_hat = None
        self.aoa_est = None  # per t-UAV list of AngleEstimate over the t-slots


class World:
    """Trajectories are drawn from the seed unless ``trajectories`` gives
    ``(r_traj, [t_traj, ...])`` explicitly (e.g. a static formation)."""

    def __init__(self, cfg: SimConfig, seed: int, trajectories=None):
        self.cfg = cfg
        self.seed = seed
        self.timing = {"predict_s": [], "bound_s": []}
        n_total = cfg.gp_history + cfg.frames * (cfg.T + 1)
        if trajectories is None:
            rng = np.random.default_rng([seed, 0])
            self.r, self.t, self.legs = simulate_formation(
                cfg.K, cfg.mobility, n_total, rng, r_start=(0.0, 0.0, cfg.altitude)
            )
        else:
            self.r, self.t = trajectories[0], list(trajectories[1])
            self.legs = []
            if len(self.t) != cfg.K:
                raise ValueError(f"expected {cfg.K} t-UAV trajectories, got {len(self.t)}")
            if min(len(tr) for tr in [self.r, *self.t]) < n_total:
                raise ValueError(f"trajectories need at least {n_total} slots")
        self.start = cfg.gp_history
        self.r_msi = self.r.msi()
        self.t_msi = [tr.msi() for tr in self.t]
        self._raw: list = []  # (r prediction, [t predictions]) per frame
        self._frames: dict = {}
        self._predictors = None

    # -- indexing -------------------------------------------------------
    def slot_index(self, f: int, offset: int) -> int:
        return self.start + f * (self.cfg.T + 1) + offset

    def slots(self):
        """``(frame, offset, slot)`` for every scored slot; offset 0 is the e-slot."""
        for f in range(self.cfg.frames):
            for o in range(self.cfg.T + 1):
                yield f, o, self.slot_index(f, o)

    def true_angles(self, s: int):
        """Per t-UAV ``(aod, aoa, distance)`` at slot ``s``."""
        out = []
        for k in range(self.cfg.K):
            aod, aoa = geometric_angles(self.t_msi[k][s], self.r_msi[s])
            aod = (float(aod[0]), float(aod[1]))
            aoa = (float(aoa[0]), float(aoa[1]))
            d = float(np.linalg.norm(self.t_msi[k][s, :3] - self.r_msi[s, :3]))
            out.append((aod, aoa, d))
        return out

    # -- prediction -----------------------------------------------------
    def _history(self, traj, e):
        lo = e + 1 - self.cfg.gp_history
        return traj.msi()[lo : e + 1], traj.velocity[lo : e + 1], traj.acceleration[lo : e + 1]

    def _predict(self, pred: MsiPredictor, traj, e, fit):
        hist = self._history(traj, e)
        if fit:
            pred.fit(*hist)
        else:
            pred.condition(*hist)
        return pred.predict(*hist)

    def _inject(self, dist: MsiDistribution, f: int, uav: int, inject) -> MsiDistribution:
        pos_std, att_std = inject
        if pos_std == 0 and att_std == 0:
            return dist
        std = np.array([pos_std] * 3 + [att_std] * 3)
        rng = np.random.default_rng([self.seed, 1, f, uav])
        mean = dist.mean + rng.standard_normal(dist.mean.shape) * std
        return MsiDistribution(mean, dist.var + std**2)

    def _inject_of(self, inject):
        if inject is None:
            inject = (self.cfg.inject_pos_std, self.cfg.inject_att_std)
        return (float(inject[0]), float(inject[1]))

    def frame(self, f: int, inject=None) -> FrameData:
        """Predictions for frame ``f`` with ``inject = (position std, attitude std)``
        of extra prediction error (the config's values by default).

        Raw predictions are computed in frame order, so hyperparameters are
        always fitted on frame 0 whatever order callers ask in.
        """
        if not 0 <= f < self.cfg.frames:
            raise IndexError(f"frame {f} outside 0..{self.cfg.frames - 1}")
        inject = self._inject_of(inject)
        while len(self._raw) <= f:
            self._predict_frame(len(self._raw))
        key = (f, inject)
        if key not in self._frames:
            self._frames[key] = self._build_frame(f, inject)
        return self._frames[key]

    def _predict_frame(self, f: int):
        c = self.cfg
        e = self.slot_index(f, 0)
        t0 = time.perf_counter()
        fit = self._predictors is None
        if fit:
            make = lambda uav: MsiPredictor(
                c.gp_window, c.T, c.gp_max_pairs, c.gp_restarts, seed=self.seed * 1000 + uav,
                eta_min=c.gp_eta_min, stride=c.gp_stride,
            )
            self._predictors = [make(u) for u in range(c.K + 1)]
        r_pred = self._predict(self._predictors[0], self.r, e, fit)
        t_pred = [self._predict(self._predictors[k + 1], self.t[k], e, fit) for k in range(c.K)]
        self.timing["predict_s"].append(time.perf_counter() - t0)
        self._raw.append((r_pred, t_pred))

    def _build_frame(self, f: int, inject) -> FrameData:
        c = self.cfg
        e = self.slot_index(f, 0)
        r_raw, t_raw = self._raw[f]
        r_pred = self._inject(r_raw, f, 0, inject)
        t_pred = [self._inject(t_raw[k], f, k + 1, inject) for k in range(c.K)]
        fd = FrameData(e, r_pred, t_pred)
        sl = slice(e + 1, e + 1 + c.T)
        R = self.r_msi[sl]
        fd.aod_hat, fd.aoa_hat = [], []
        for k in range(c.K):
            Tk = self.t_msi[k][sl]
            aod = geometric_angles(Tk, r_pred.mean)[0]
            aoa = geometric_angles(t_pred[k].mean, R)[1]
            fd.aod_hat.append(np.column_stack(aod))
            fd.aoa_hat.append(np.column_stack(aoa))
        return fd

    def estimates(self, f: int, inject=None):
        """Monte-Carlo AOA error ranges at the r-UAV, per t-UAV and t-slot of frame ``f``."""
        fd = self.frame(f, inject)
        if fd.aoa_est is None:
            c = self.cfg
            sl = slice(fd.e_slot + 1, fd.e_slot + 1 + c.T)
            R = MsiDistribution.exact(self.r_msi[sl])
            t0 = time.perf_counter()
            fd.aoa_est = []
            for k in range(c.K):
                est = bound_tracking_error(
                    fd.t_pred[k], R, i_max=c.i_max, p_alpha=c.p_alpha, p_beta=c.p_beta,
                    rng=np.random.default_rng([self.seed, 2, f, k]), side="rx",
                )
                fd.aoa_est.append(est if isinstance(est, list) else [est])
            self.timing["bound_s"].append(time.perf_counter() - t0)
        return fd.aoa_est
