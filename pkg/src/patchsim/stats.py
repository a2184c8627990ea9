"""Interval estimation and survival analysis for strategy comparison.

Binomial proportions (successful-campaign rates, pairwise strategy
agreement) get adjusted-count Agresti-Coull intervals, the recommended
choice for sample sizes of 40 and up. Exploit ages (months from CVE
publication to first observed exploitation, negative when exploited
pre-publication) feed a product-limit survival estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .campaigns import TieRule
from .catalog import Catalog

# Rational-polynomial approximation of the standard normal quantile
# (P. Acklam), |error| < 1.2e-9 before refinement; one Halley step with
# erfc brings it near machine precision. Quantiles are computed, never
# hard-coded, so any confidence level works.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)


def normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile argument must be in (0, 1), got {p}")
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    # Halley refinement
    err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = err * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


@dataclass(frozen=True)
class BinomialCI:
    successes: int
    trials: int
    confidence: float
    center: float
    low: float
    high: float

    def percent_bounds(self) -> tuple[int, int]:
        """Whole-percent bounds, rounded half away from zero."""
        return _round_half_away(self.low * 100), _round_half_away(self.high * 100)


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def agresti_coull(successes: int, trials: int, confidence: float = 0.95) -> BinomialCI:
    """Adjusted-count binomial confidence interval, clamped to [0, 1]."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"invalid counts: {successes}/{trials}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    z = normal_quantile((1.0 + confidence) / 2.0)
    z2 = z * z
    n_adj = trials + z2
    p_adj = (successes + z2 / 2.0) / n_adj
    half = z * math.sqrt(p_adj * (1.0 - p_adj) / n_adj)
    return BinomialCI(
        successes=successes,
        trials=trials,
        confidence=confidence,
        center=p_adj,
        low=max(0.0, p_adj - half),
        high=min(1.0, p_adj + half),
    )


def pairwise_agreement(outcomes_a, outcomes_b, confidence: float = 0.95) -> tuple[Fraction, BinomialCI]:
    """Proportion of campaigns on which two strategies agree (both succeed
    or both fail), with its confidence interval."""
    keys_a = [o.campaign.key for o in outcomes_a]
    keys_b = [o.campaign.key for o in outcomes_b]
    if keys_a != keys_b:
        raise ValueError("outcome lists cover different campaign sets")
    if not keys_a:
        raise ValueError("no campaigns to compare")
    matches = sum(1 for a, b in zip(outcomes_a, outcomes_b) if a.success == b.success)
    return Fraction(matches, len(keys_a)), agresti_coull(matches, len(keys_a), confidence)


# ---------------------------------------------------------------------------
# Survival of vulnerabilities past publication


@dataclass(frozen=True)
class ExploitAgeSample:
    cve_id: str
    age: int  # months from publication to first exploitation; may be negative
    censored: bool = False


@dataclass(frozen=True)
class SurvivalCurve:
    """Right-continuous step function; points hold the value from each event time on."""

    points: tuple[tuple[int, Fraction], ...]

    def survival_at(self, age) -> Fraction:
        value = Fraction(1)
        for t, s in self.points:
            if t > age:
                break
            value = s
        return value

    def validate(self) -> list[str]:
        problems = []
        last = Fraction(1)
        last_t = None
        for t, s in self.points:
            if last_t is not None and t <= last_t:
                problems.append(f"breakpoints not strictly increasing at {t}")
            if s > last:
                problems.append(f"survival increases at {t}")
            if not 0 <= s <= 1:
                problems.append(f"survival out of range at {t}")
            last, last_t = s, t
        return problems


def kaplan_meier(samples: Sequence[ExploitAgeSample]) -> SurvivalCurve:
    """Product-limit survival estimate over exploit ages.

    Censored samples leave the risk set at their age without counting as an
    event (ties: events first). With no censoring this reduces to the
    empirical survival function |{age > t}| / n.
    """
    if not samples:
        raise ValueError("survival analysis needs at least one sample")
    events: dict[int, int] = {}
    censorings: dict[int, int] = {}
    for s in samples:
        bucket = censorings if s.censored else events
        bucket[s.age] = bucket.get(s.age, 0) + 1
    at_risk = len(samples)
    survival = Fraction(1)
    points: list[tuple[int, Fraction]] = []
    for t in sorted(set(events) | set(censorings)):
        d = events.get(t, 0)
        if d:
            survival *= Fraction(at_risk - d, at_risk)
            points.append((t, survival))
        at_risk -= d + censorings.get(t, 0)
    return SurvivalCurve(points=tuple(points))


def exploit_ages(
    catalog: Catalog,
    include_unexploited: bool = False,
    kk_only: bool = False,
    tie_rule: TieRule = TieRule.INCLUSIVE,
) -> list[ExploitAgeSample]:
    """One sample per exploited CVE: months from publication to its first
    campaign. With kk_only, CVEs first exploited before publication are
    dropped from the sample altogether. include_unexploited adds CVEs seen
    in no campaign as censored at the horizon end."""
    first_seen: dict[str, int] = {}
    for campaign in catalog.campaigns:
        for cve in campaign.cve_ids:
            if cve not in first_seen or campaign.start_month < first_seen[cve]:
                first_seen[cve] = campaign.start_month
    samples = []
    for cve in sorted(catalog.vulns):
        vuln = catalog.vulns[cve]
        if cve in first_seen:
            age = first_seen[cve] - vuln.published_month
            if kk_only:
                published_already = age >= 0 if tie_rule is TieRule.INCLUSIVE else age > 0
                if not published_already:
                    continue
            samples.append(ExploitAgeSample(cve, age))
        elif include_unexploited and not kk_only:
            samples.append(ExploitAgeSample(cve, catalog.horizon.end_index - vuln.published_month, censored=True))
    return samples
