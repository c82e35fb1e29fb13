"""Beam decisions of every evaluated scheme for one slot."""

from __future__ import annotations

from dataclasses import dataclass

from ..array import ArrayGeometry, Awv, SubarraySpec
from ..beamtrack import (
    PartitionPlan,
    PlanEntry,
    exhaustive_layer_search,
    select_tuav_codeword,
    spas_ruav,
    te_aware_select,
)
from ..codebook import Codebook, Codeword
from .config import SimConfig, codebooks


@dataclass
class Decision:
    fs: list  # t-side beamforming AWVs
    ws: list  # r-side combining AWVs
    tx_geom: object
    rx_geom: object
    tx_pattern: object
    rx_pattern: object
    t_layers: list
    r_layers: list
    t_dirs: list
    r_dirs: list


def _layer_tag(support: SubarraySpec):
    return f"{support.m_act}x{support.n_act}"


def _cca(cfg, sel_t, plan):
    return Decision(
        fs=[s.codeword.awv for s in sel_t],
        ws=plan.awvs,
        tx_geom=cfg.geom_t,
        rx_geom=cfg.geom_r,
        tx_pattern=cfg.pattern,
        rx_pattern=cfg.pattern,
        t_layers=[_layer_tag(s.support) for s in sel_t],
        r_layers=[_layer_tag(e.support) for e in plan.entries],
        t_dirs=[s.codeword.beam_center for s in sel_t],
        r_dirs=[e.codeword.beam_center for e in plan.entries],
    )


def max_resolution(cfg: SimConfig, aods, aoas) -> Decision:
    cb_t, cb_r = codebooks(cfg)
    sel_t = [select_tuav_codeword(cb_t, a) for a in aods]
    return _cca(cfg, sel_t, spas_ruav(cb_r, aoas))


def adaptive(cfg: SimConfig, aods, aoa_est, search) -> Decision:
    """Beamwidth control at the r-UAV (two-step or exhaustive layer search)
    followed by SPAS; t-UAVs keep their max-resolution codewords."""
    cb_t, cb_r = codebooks(cfg)
    sel_t = [select_tuav_codeword(cb_t, a) for a in aods]
    sel_r = [search(cb_r, e) for e in aoa_est]
    return _cca(cfg, sel_t, spas_ruav(cb_r, None, sel_r))


def _bands(M, N, K):
    band = M // K
    if band == 0:
        raise ValueError(f"{K} users cannot share {M} z-rows")
    return [SubarraySpec.centered(M, N, band, N, k * band + 1 + band // 2, N // 2 + 1) for k in range(K)]


def _static_plan(geom, bands, dirs, layer) -> PartitionPlan:
    entries = []
    for k, (sup, d) in enumerate(zip(bands, dirs)):
        cw = Codeword(layer, (0, 0), (float(d[0]), float(d[1])), sup, geom)
        entries.append(PlanEntry(k, cw, cw.awv, k + 1, len(bands)))
    return PartitionPlan(entries)


def upa_baseline_plan(K, M_r, N_r, aoas, lambda_c=0.005) -> PartitionPlan:
    """Equal z-split of an ``M_r x N_r`` planar array, each panel steered at its AOA."""
    geom = ArrayGeometry.planar(M_r, N_r, lambda_c)
    return _static_plan(geom, _bands(M_r, N_r, K), aoas, (M_r // K, N_r))


def fixed_partition_baseline(K, aoas, codebook: Codebook) -> PartitionPlan:
    """Static equal split of the CCA into ``M_r/K x N_r`` bands, whatever the AOAs.

    Each band steers the whole ring to the max-resolution beam centre of its
    user's AOA.
    """
    g = codebook.geom
    dirs = [codebook.max_layer.select(*a).beam_center for a in aoas]
    return _static_plan(g, _bands(g.M, g.N, K), dirs, (g.M // K, g.N))


def _static(cfg, gt, gr, pattern, plan, t_dirs):
    full = SubarraySpec.full(gt)
    fs = [Awv.steering(gt, d[0], d[1], full) for d in t_dirs]
    return Decision(
        fs, plan.awvs, gt, gr, pattern, pattern,
        [_layer_tag(full)] * cfg.K, [_layer_tag(s) for s in plan.supports],
        [tuple(map(float, d)) for d in t_dirs], [e.codeword.beam_center for e in plan.entries],
    )


def upa(cfg: SimConfig, aods, aoas) -> Decision:
    """Planar arrays: full t-side panel, equal z-split r-side panels, continuous steering."""
    plan = upa_baseline_plan(cfg.K, cfg.M_r, cfg.N_r, aoas, cfg.lambda_c)
    return _static(cfg, cfg.upa_t, cfg.upa_r, cfg.upa_pattern, plan, aods)


def fixed_partition(cfg: SimConfig, aods, aoas) -> Decision:
    """Codebook without subarray partition; the t-side array stays whole."""
    cb_t, cb_r = codebooks(cfg)
    plan = fixed_partition_baseline(cfg.K, aoas, cb_r)
    t_dirs = [cb_t.max_layer.select(*a).beam_center for a in aods]
    return _static(cfg, cfg.geom_t, cfg.geom_r, cfg.pattern, plan, t_dirs)


def prepare(cfg: SimConfig, world, f: int):
    """Run the e-slot prediction (and error bounding) that the t-slots of
    frame ``f`` will read, so decision timings exclude it."""
    if cfg.scheme == "cca-genie":
        return
    inject = (cfg.inject_pos_std, cfg.inject_att_std)
    world.frame(f, inject)
    if cfg.scheme in ("te-aware", "exhaustive"):
        world.estimates(f, inject)


def decide(cfg: SimConfig, world, f: int, offset: int, truth) -> Decision:
    """Beam decision at offset ``offset`` of frame ``f`` (0 is the e-slot).

    In the e-slot exchanged MSI gives exact angles and every CCA scheme uses
    the max-resolution layer; t-slots use predictions (or the truth for
    ``cca-genie``).
    """
    scheme = cfg.scheme
    inject = (cfg.inject_pos_std, cfg.inject_att_std)
    true_aod = [t[0] for t in truth]
    true_aoa = [t[1] for t in truth]
    if offset == 0 or scheme == "cca-genie":
        aods, aoas = true_aod, true_aoa
    else:
        fd = world.frame(f, inject)
        aods = [tuple(fd.aod_hat[k][offset - 1]) for k in range(cfg.K)]
        aoas = [tuple(fd.aoa_hat[k][offset - 1]) for k in range(cfg.K)]
    if scheme == "upa":
        return upa(cfg, aods, aoas)
    if scheme == "fixed-partition":
        return fixed_partition(cfg, aods, aoas)
    if scheme in ("te-aware", "exhaustive") and offset > 0:
        aoa_est = world.estimates(f, inject)
        search = te_aware_select if scheme == "te-aware" else exhaustive_layer_search
        return adaptive(cfg, aods, [aoa_est[k][offset - 1] for k in range(cfg.K)], search)
    return max_resolution(cfg, aods, aoas)


__all__ = [
    "Decision",
    "decide",
    "prepare",
    "max_resolution",
    "adaptive",
    "upa",
    "fixed_partition",
    "upa_baseline_plan",
    "fixed_partition_baseline",
]
