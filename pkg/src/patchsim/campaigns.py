"""Campaign exposure matrices and vulnerability-lifecycle classification.

A campaign's exposure matrix marks, over the shared (product-version x month)
space, every release affected by one of its CVEs from the campaign start
through the end of the window (a campaign is assumed to stay active once
observed).

Attacks are classified on two axes at the campaign start month:

  knowledge  was the CVE already published (KK), only reserved (KU),
             or not even reserved (UU)?
  fix        was a release escaping the CVE already out (preventable)
             or not (unpreventable)?
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .catalog import CampaignRecord, Catalog, ProductKey, VulnRecord
from .strategies import MatrixSpace, matrix_to_csv
from .versions import vendor_quirks


class TieRule(Enum):
    """How same-month ties are scored, given month granularity.

    INCLUSIVE: an event in the same month counts as "already happened"
    (campaign in the CVE's publication month is KK; a fix released in the
    campaign month makes it preventable). EXCLUSIVE flips both readings.
    """

    INCLUSIVE = "inclusive"
    EXCLUSIVE = "exclusive"


class AttackScenario(Enum):
    UU_U = "UU/U"
    UU_P = "UU/P"
    KU_U = "KU/U"
    KU_P = "KU/P"
    KK_U = "KK/U"
    KK_P = "KK/P"

    @property
    def knowledge(self) -> str:
        return self.value.split("/")[0]

    @property
    def preventable(self) -> bool:
        return self.value.endswith("P")


@dataclass(frozen=True, eq=False)
class ExposureMatrix:
    space: MatrixSpace
    cells: np.ndarray
    campaign: CampaignRecord

    @property
    def empty(self) -> bool:
        return not self.cells.any()

    def validate(self) -> list[str]:
        problems = []
        for i in range(len(self.space.rows)):
            months = np.flatnonzero(self.cells[i])
            if months.size == 0:
                continue
            expected = np.arange(self.campaign.start_month, self.space.n_months)
            if months[0] != self.campaign.start_month or not np.array_equal(months, expected):
                problems.append(f"row {self.space.rows[i].row_label}: not a contiguous suffix from start")
        return problems

    def to_csv(self, fh) -> None:
        matrix_to_csv(self.space, self.cells, fh)


def build_campaign_matrix(campaign: CampaignRecord, catalog: Catalog, space: Optional[MatrixSpace] = None) -> ExposureMatrix:
    """Mark every release affected by the campaign's CVEs from its start month on."""
    space = space or MatrixSpace(catalog)
    cells = np.zeros(space.shape, dtype=bool)
    for cve in sorted(campaign.cve_ids):
        vuln = catalog.vulns.get(cve)
        if vuln is None:
            continue
        for i, rel in enumerate(space.rows):
            quirks = vendor_quirks(rel.product.vendor)
            if any(c.matches(rel.version, quirks) for c in vuln.constraints_for(rel.product.key)):
                cells[i, campaign.start_month :] = True
    cells.setflags(write=False)
    return ExposureMatrix(space=space, cells=cells, campaign=campaign)


def fix_months_by_product(vuln: VulnRecord, catalog: Catalog) -> dict[ProductKey, Optional[int]]:
    """Per affected product, the release month of the earliest release strictly
    above the constraint's version range; None when no such release exists."""
    out: dict[ProductKey, Optional[int]] = {}
    for pc in vuln.affected:
        timeline = catalog.timelines.get(pc.key)
        if timeline is None:
            continue
        quirks = vendor_quirks(pc.vendor)
        months = [rel.release_month for rel in timeline.releases if pc.constraint.fixes(rel.version, quirks)]
        best = min(months) if months else None
        if pc.key in out:
            prev = out[pc.key]
            out[pc.key] = best if prev is None else (prev if best is None else min(prev, best))
        else:
            out[pc.key] = best
    return out


def fix_month(vuln: VulnRecord, catalog: Catalog) -> Optional[int]:
    """Earliest fix across all affected products with a known timeline."""
    months = [m for m in fix_months_by_product(vuln, catalog).values() if m is not None]
    return min(months) if months else None


def classify_attack(
    vuln: VulnRecord,
    exploited_month: int,
    fix: Optional[int],
    tie_rule: TieRule = TieRule.INCLUSIVE,
) -> AttackScenario:
    """Place one exploitation event into the six-way lifecycle classification."""
    if vuln.reserved_month > vuln.published_month:
        raise ValueError(f"{vuln.cve_id}: reserved after published")
    t = exploited_month
    if tie_rule is TieRule.INCLUSIVE:
        if t >= vuln.published_month:
            knowledge = "KK"
        elif t >= vuln.reserved_month:
            knowledge = "KU"
        else:
            knowledge = "UU"
        preventable = fix is not None and fix <= t
    else:
        if t > vuln.published_month:
            knowledge = "KK"
        elif t > vuln.reserved_month:
            knowledge = "KU"
        else:
            knowledge = "UU"
        preventable = fix is not None and fix < t
    return AttackScenario[f"{knowledge}_{'P' if preventable else 'U'}"]


def classify_campaign(
    campaign: CampaignRecord,
    catalog: Catalog,
    tie_rule: TieRule = TieRule.INCLUSIVE,
) -> frozenset[str]:
    """Knowledge-axis groups ({"KK"}, {"KK","UU"}, ...) the campaign belongs to."""
    groups: set[str] = set()
    for cve in sorted(campaign.cve_ids):
        vuln = catalog.vulns.get(cve)
        if vuln is None:
            continue
        scenario = classify_attack(vuln, campaign.start_month, fix_month(vuln, catalog), tie_rule)
        groups.add(scenario.knowledge)
    return frozenset(groups)


def campaign_scenarios(
    campaign: CampaignRecord,
    catalog: Catalog,
    tie_rule: TieRule = TieRule.INCLUSIVE,
) -> dict[str, AttackScenario]:
    """Per-CVE scenario labels for one campaign (earliest fix across products)."""
    out: dict[str, AttackScenario] = {}
    for cve in sorted(campaign.cve_ids):
        vuln = catalog.vulns.get(cve)
        if vuln is None:
            continue
        out[cve] = classify_attack(vuln, campaign.start_month, fix_month(vuln, catalog), tie_rule)
    return out


VENN_REGIONS = ("KK", "KU", "UU", "KK&KU", "KK&UU", "KU&UU", "KK&KU&UU")


def venn_counts(catalog: Catalog, tie_rule: TieRule = TieRule.INCLUSIVE) -> dict[str, int]:
    """Counts of the seven knowledge-group regions over CVE-bearing campaigns."""
    counts = {region: 0 for region in VENN_REGIONS}
    total = 0
    for campaign in catalog.campaigns:
        if campaign.vector_only:
            continue
        groups = classify_campaign(campaign, catalog, tie_rule)
        if not groups:
            continue
        total += 1
        counts["&".join(sorted(groups, key=("KK", "KU", "UU").index))] += 1
    counts["total"] = total
    return counts
