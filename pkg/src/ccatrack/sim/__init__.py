"""Scenario orchestration: frame protocol, baselines, metrics and outputs."""

from .config import SCHEMES, SimConfig, codebooks
from .scenario import (
    Latency,
    MetricsRecord,
    RunResult,
    latency_estimate,
    msi_exchange_time,
    run_many,
    run_scenario,
)
from .schemes import fixed_partition_baseline, upa_baseline_plan
from .world import World

__all__ = [
    "SCHEMES",
    "SimConfig",
    "codebooks",
    "Latency",
    "MetricsRecord",
    "RunResult",
    "latency_estimate",
    "msi_exchange_time",
    "run_many",
    "run_scenario",
    "fixed_partition_baseline",
    "upa_baseline_plan",
    "World",
]
