"""Scenario generation and the experiment harness.

Scenarios follow the evaluation setup: one seller with a few channels whose
license disks are dropped uniformly in a square arena, buyers at uniform
locations with fixed-interval windows of 10..30 minutes inside a one-hour
period, and valuations drawn from a chosen distribution (bids truthful by
default). The harness runs mechanisms over seeded trials and aggregates
social-efficiency, revenue, and utilization ratios against an exact optimum
at oracle scale or the fractional upper bound above it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .distributions import (
    BidDistribution,
    TruncatedExponential,
    TruncatedGaussian,
    UniformUnit,
)
from .exact import solve_ip_exact
from .mechanisms import (
    Allocator,
    AuctionOutcome,
    MechanismConfig,
    Objective,
    run_framework,
)
from .model import (
    AuctionInstance,
    Channel,
    ConflictStructure,
    Disk,
    GeometryMode,
    Request,
    build_conflict_structure,
    check_allocation,
)
from .relaxation import solve_lp2

__all__ = [
    "ScenarioConfig",
    "MechanismSetting",
    "TrialMetrics",
    "MetricsRow",
    "MetricsTable",
    "DISTRIBUTIONS",
    "generate_scenario",
    "reference_optimum",
    "evaluate",
    "run_experiment",
    "EXACT_REFERENCE_MAX_REQUESTS",
]

# Largest instance the exact solver serves as the reference for.
EXACT_REFERENCE_MAX_REQUESTS = 12

DISTRIBUTIONS: dict[str, BidDistribution] = {
    "uniform": UniformUnit(),
    "exponential": TruncatedExponential(),
    "gaussian": TruncatedGaussian(),
}

CSV_HEADER = (
    "distribution,mechanism,n_requests,trials,reference,"
    "social_eff_ratio_mean,social_eff_ratio_se,"
    "revenue_ratio_mean,revenue_ratio_se,"
    "utilization_mean,utilization_se"
)


@dataclass(frozen=True)
class ScenarioConfig:
    n_requests: int
    n_channels: int = 3
    arena: float = 100.0
    license_radius_range: tuple[float, float] = (40.0, 70.0)
    interference_radius: float = 30.0
    horizon: int = 60
    duration_range: tuple[int, int] = (10, 30)
    bid_distribution: str = "uniform"
    rng_seed: int = 0
    trials: int = 30

    def distribution(self) -> BidDistribution:
        return DISTRIBUTIONS[self.bid_distribution]


@dataclass(frozen=True)
class MechanismSetting:
    allocator: Allocator
    objective: Objective = Objective.SOCIAL_EFFICIENCY
    reserve: float = 0.0
    compute_payments: bool = True
    mdca_payment_resolution: float = 1e-4


def generate_scenario(config: ScenarioConfig, trial_index: int) -> AuctionInstance:
    """One deterministic instance per (seed, trial): truthful bids, fixed
    windows that fit the horizon, one license disk per channel."""
    rng = np.random.default_rng([config.rng_seed, trial_index])
    channels = []
    for j in range(config.n_channels):
        center = (rng.uniform(0, config.arena), rng.uniform(0, config.arena))
        radius = rng.uniform(*config.license_radius_range)
        channels.append(
            Channel(
                id=j,
                interference_radius=config.interference_radius,
                license_areas=(Disk(center=center, radius=radius),),
            )
        )
    dist = config.distribution()
    valuations = dist.sample(rng, config.n_requests)
    requests = []
    lo_t, hi_t = config.duration_range
    for i in range(config.n_requests):
        duration = int(rng.integers(lo_t, hi_t + 1))
        arrival = int(rng.integers(0, config.horizon - duration + 1))
        location = (rng.uniform(0, config.arena), rng.uniform(0, config.arena))
        v = float(valuations[i])
        requests.append(
            Request(
                id=i,
                location=location,
                bid=v,
                valuation=v,
                arrival=arrival,
                deadline=arrival + duration,
                duration=duration,
            )
        )
    return AuctionInstance(
        channels=tuple(channels),
        requests=tuple(requests),
        horizon=config.horizon,
        geometry_mode=GeometryMode.POINT,
    )


def reference_optimum(
    instance: AuctionInstance,
    structure: Optional[ConflictStructure] = None,
) -> tuple[float, str]:
    """(value, kind): exact valuation-welfare optimum at oracle scale, else
    the fractional upper bound. The bound is conservative: ratios against it
    are never flattering."""
    if structure is None:
        structure = build_conflict_structure(instance)
    valuations = [r.valuation for r in instance.requests]
    if instance.n <= EXACT_REFERENCE_MAX_REQUESTS:
        return solve_ip_exact(instance, valuations, structure=structure).weight, "exact"
    return solve_lp2(instance, valuations, structure=structure).weight, "lp"


@dataclass
class TrialMetrics:
    social_efficiency_ratio: float
    revenue_ratio: float
    utilization: float
    reference_kind: str


def evaluate(
    instance: AuctionInstance,
    outcome: AuctionOutcome,
    reference: tuple[float, str],
) -> TrialMetrics:
    """Three ratios for one outcome; the outcome must pass the feasibility
    checker before anything is recorded. Lottery outcomes are scored by
    their exact expectation rather than the sampled column."""
    ref_value, ref_kind = reference
    sub = outcome.instance
    sub_structure = build_conflict_structure(sub)
    violations = check_allocation(sub, sub_structure, outcome.allocation.assignment)
    if violations:
        raise AssertionError(f"infeasible outcome reached evaluate: {violations}")
    total_time = instance.m * instance.horizon
    if outcome.lottery is not None:
        welfare = revenue = used = 0.0
        pays = outcome.lottery_payments or {}
        for alloc, prob in outcome.lottery:
            vals = sum(sub.requests[i].valuation for i in alloc.winners())
            time_used = sum(sub.requests[i].duration for i in alloc.winners())
            pay = sum(pays.get(sub.requests[i].id, 0.0) for i in alloc.winners())
            welfare += prob * vals
            used += prob * time_used
            revenue += prob * pay
    else:
        winners = outcome.allocation.winners()
        welfare = float(sum(sub.requests[i].valuation for i in winners))
        used = float(sum(sub.requests[i].duration for i in winners))
        revenue = float(sum(outcome.payments.values()))
    if ref_value <= 0:
        social = 0.0 if welfare <= 0 else math.inf
        rev = 0.0 if revenue <= 0 else math.inf
    else:
        social = welfare / ref_value
        rev = revenue / ref_value
    return TrialMetrics(
        social_efficiency_ratio=social,
        revenue_ratio=rev,
        utilization=used / total_time,
        reference_kind=ref_kind,
    )


@dataclass
class MetricsRow:
    distribution: str
    mechanism: str
    n_requests: int
    trials: int
    reference: str
    social_eff_ratio_mean: float
    social_eff_ratio_se: float
    revenue_ratio_mean: float
    revenue_ratio_se: float
    utilization_mean: float
    utilization_se: float


@dataclass
class MetricsTable:
    rows: list[MetricsRow] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.distribution},{r.mechanism},{r.n_requests},{r.trials},{r.reference},"
                f"{r.social_eff_ratio_mean:.9g},{r.social_eff_ratio_se:.9g},"
                f"{r.revenue_ratio_mean:.9g},{r.revenue_ratio_se:.9g},"
                f"{r.utilization_mean:.9g},{r.utilization_se:.9g}"
            )
        return "\n".join(lines) + "\n"

    def cell(self, distribution: str, mechanism: str, n_requests: int) -> MetricsRow:
        for r in self.rows:
            if (
                r.distribution == distribution
                and r.mechanism == mechanism
                and r.n_requests == n_requests
            ):
                return r
        raise KeyError((distribution, mechanism, n_requests))


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if len(arr) == 0:
        return 0.0, 0.0
    if len(arr) == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


def run_experiment(
    sweep: Sequence[tuple[ScenarioConfig, Sequence[MechanismSetting]]],
) -> MetricsTable:
    """Average each (scenario, mechanism) cell over its trials.

    Cells are independent; per-cell failures are recorded in the row's
    reference field and never abort the sweep. Rows come out sorted by
    (distribution, mechanism, n_requests)."""
    rows: list[MetricsRow] = []
    for config, settings in sweep:
        instances = [
            generate_scenario(config, t) for t in range(config.trials)
        ]
        references = [reference_optimum(inst) for inst in instances]
        for setting in settings:
            per_trial: list[TrialMetrics] = []
            error: Optional[str] = None
            for trial, inst in enumerate(instances):
                try:
                    mech = MechanismConfig(
                        objective=setting.objective,
                        allocator=setting.allocator,
                        reserve=setting.reserve,
                        distribution=config.distribution(),
                        rng_seed=int(np.random.default_rng(
                            [config.rng_seed, trial, 777]).integers(2**62)),
                        mdca_payment_resolution=setting.mdca_payment_resolution,
                        compute_payments=setting.compute_payments,
                    )
                    outcome = run_framework(inst, mech)
                    per_trial.append(evaluate(inst, outcome, references[trial]))
                except Exception as exc:  # record, keep sweeping
                    error = f"{type(exc).__name__}: {exc}"
                    break
            if error is not None:
                rows.append(
                    MetricsRow(
                        distribution=config.bid_distribution,
                        mechanism=setting.allocator.value,
                        n_requests=config.n_requests,
                        trials=0,
                        reference=f"error:{error[:60]}",
                        social_eff_ratio_mean=0.0,
                        social_eff_ratio_se=0.0,
                        revenue_ratio_mean=0.0,
                        revenue_ratio_se=0.0,
                        utilization_mean=0.0,
                        utilization_se=0.0,
                    )
                )
                continue
            se_mean, se_se = _mean_se([t.social_efficiency_ratio for t in per_trial])
            rev_mean, rev_se = _mean_se([t.revenue_ratio for t in per_trial])
            ut_mean, ut_se = _mean_se([t.utilization for t in per_trial])
            rows.append(
                MetricsRow(
                    distribution=config.bid_distribution,
                    mechanism=setting.allocator.value,
                    n_requests=config.n_requests,
                    trials=len(per_trial),
                    reference=per_trial[0].reference_kind if per_trial else "none",
                    social_eff_ratio_mean=se_mean,
                    social_eff_ratio_se=se_se,
                    revenue_ratio_mean=rev_mean,
                    revenue_ratio_se=rev_se,
                    utilization_mean=ut_mean,
                    utilization_se=ut_se,
                )
            )
    rows.sort(key=lambda r: (r.distribution, r.mechanism, r.n_requests))
    return MetricsTable(rows=rows)
