"""Compromise-probability evaluation of update strategies.

For each strategy matrix and campaign exposure matrix, the element-wise
intersection identifies months in which an installed version was being
targeted. A campaign counts as (potentially) successful if that happens in
at least one month; the overall probability is the fraction of targeting
campaigns that ever succeed. Probabilities are exact rationals internally
and only rendered to percentages at the reporting boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .campaigns import ExposureMatrix, build_campaign_matrix
from .catalog import CampaignRecord, Catalog
from .stats import agresti_coull
from .strategies import (
    DeploymentMatrix,
    MatrixSpace,
    Scenario,
    StrategyConfig,
    StrategyKind,
    apply_apt_first,
    build_matrix,
    count_updates,
)


@dataclass(frozen=True)
class CampaignOutcome:
    campaign: CampaignRecord
    success_months: frozenset[int]

    @property
    def success(self) -> bool:
        return bool(self.success_months)


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    config: StrategyConfig
    scenario: Scenario
    overall: Fraction
    monthly: tuple[Optional[Fraction], ...]
    updates_raw: int
    updates_net: int
    outcomes: tuple[CampaignOutcome, ...]
    odds_vs_baseline: Optional[float]


def successful_months(deployment: DeploymentMatrix, exposure: ExposureMatrix) -> frozenset[int]:
    """Months in which some installed version is targeted by the campaign."""
    if (
        deployment.space.rows != exposure.space.rows
        or deployment.space.n_months != exposure.space.n_months
    ):
        raise ValueError("deployment and exposure matrices use different row/column spaces")
    hits = (deployment.cells & exposure.cells).any(axis=0)
    return frozenset(int(m) for m in np.flatnonzero(hits))


def probability_at(outcomes: Sequence[CampaignOutcome], month: int) -> Optional[Fraction]:
    """Successful over active campaigns at one month; None when none are active."""
    active = [o for o in outcomes if o.campaign.start_month <= month]
    if not active:
        return None
    hits = sum(1 for o in active if month in o.success_months)
    return Fraction(hits, len(active))


def overall_probability(outcomes: Sequence[CampaignOutcome]) -> Fraction:
    """Fraction of campaigns that succeed in at least one month (each counted once)."""
    if not outcomes:
        raise ValueError("no campaigns to evaluate")
    return Fraction(sum(1 for o in outcomes if o.success), len(outcomes))


def odds_ratio(p, baseline) -> Optional[float]:
    """Odds of p relative to the baseline's odds; None where undefined."""
    p = Fraction(p) if not isinstance(p, Fraction) else p
    baseline = Fraction(baseline) if not isinstance(baseline, Fraction) else baseline
    if not (0 <= p <= 1 and 0 <= baseline <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    if p == 1 or baseline in (0, 1):
        return None
    return float((p / (1 - p)) / (baseline / (1 - baseline)))


def exposure_matrices(catalog: Catalog, space: Optional[MatrixSpace] = None) -> list[ExposureMatrix]:
    """Exposure matrices for campaigns that target at least one cataloged release.

    Vector-only campaigns and campaigns whose CVEs touch no product with a
    timeline are excluded here and therefore appear in no denominator.
    """
    space = space or MatrixSpace(catalog)
    out = []
    for campaign in catalog.campaigns:
        if campaign.vector_only:
            continue
        matrix = build_campaign_matrix(campaign, catalog, space)
        if not matrix.empty:
            out.append(matrix)
    return out


DEFAULT_BASELINE = (StrategyConfig(StrategyKind.IMMEDIATE), Scenario.UPDATE_FIRST)


def evaluate(
    catalog: Catalog,
    configs: Sequence[StrategyConfig],
    scenarios: Iterable[Scenario] = (Scenario.UPDATE_FIRST, Scenario.APT_FIRST),
    baseline: tuple[StrategyConfig, Scenario] = DEFAULT_BASELINE,
) -> list[EvaluationReport]:
    """One report per (strategy config, scenario), odds relative to the baseline."""
    configs = list(configs)
    scenarios = list(scenarios)
    if not configs:
        raise ValueError("at least one strategy config is required")
    if not scenarios:
        raise ValueError("at least one scenario is required")
    space = MatrixSpace(catalog)
    exposures = exposure_matrices(catalog, space)
    if not exposures:
        raise ValueError("no campaign targets any cataloged release")

    def outcomes_for(matrix: DeploymentMatrix) -> tuple[CampaignOutcome, ...]:
        return tuple(
            CampaignOutcome(e.campaign, successful_months(matrix, e)) for e in exposures
        )

    matrices: dict[tuple[StrategyConfig, Scenario], DeploymentMatrix] = {}

    def matrix_for(config: StrategyConfig, scenario: Scenario) -> DeploymentMatrix:
        key = (config, scenario)
        if key not in matrices:
            base = matrices.get((config, Scenario.UPDATE_FIRST))
            if base is None:
                base = build_matrix(catalog, config)
                matrices[(config, Scenario.UPDATE_FIRST)] = base
            if scenario is Scenario.APT_FIRST:
                matrices[key] = apply_apt_first(base)
        return matrices[key]

    base_config, base_scenario = baseline
    baseline_overall = overall_probability(outcomes_for(matrix_for(base_config, base_scenario)))

    reports = []
    for config in configs:
        for scenario in scenarios:
            matrix = matrix_for(config, scenario)
            outcomes = outcomes_for(matrix)
            overall = overall_probability(outcomes)
            monthly = tuple(probability_at(outcomes, m) for m in range(space.n_months))
            raw, net = count_updates(matrix)
            reports.append(
                EvaluationReport(
                    config=config,
                    scenario=scenario,
                    overall=overall,
                    monthly=monthly,
                    updates_raw=raw,
                    updates_net=net,
                    outcomes=outcomes,
                    odds_vs_baseline=odds_ratio(overall, baseline_overall),
                )
            )
    return reports


def percent_1dp(value: Fraction) -> str:
    """Render an exact fraction as a percentage with one decimal,
    rounding half away from zero."""
    n, d = (value * 1000).numerator, (value * 1000).denominator
    q, r = divmod(n, d)
    if 2 * r >= d:
        q += 1
    return f"{q // 10}.{q % 10}"


def report_to_dict(report: EvaluationReport, catalog: Catalog) -> dict:
    fmt = catalog.horizon.format
    ci = agresti_coull(
        sum(1 for o in report.outcomes if o.success), len(report.outcomes), 0.95
    )
    return {
        "strategy": report.config.kind.value,
        "delay_months": report.config.delay_months,
        "scenario": report.scenario.value,
        "overall_probability": {
            "fraction": f"{report.overall.numerator}/{report.overall.denominator}",
            "percent": percent_1dp(report.overall),
        },
        "ci95_percent": [round(ci.low * 100, 2), round(ci.high * 100, 2)],
        "updates": {"raw": report.updates_raw, "net": report.updates_net},
        "odds_vs_baseline": (
            None if report.odds_vs_baseline is None else round(report.odds_vs_baseline, 3)
        ),
        "outcomes": [
            {
                "apt": o.campaign.apt_name,
                "start": fmt(o.campaign.start_month),
                "success": o.success,
                "months": [fmt(m) for m in sorted(o.success_months)],
            }
            for o in report.outcomes
        ],
    }
