from __future__ import annotations

import random
import re
from fractions import Fraction
from pathlib import Path

import pytest

from patchsim.catalog import (
    CampaignRecord,
    Catalog,
    ProductConstraint,
    SoftwareProduct,
    VulnRecord,
    make_timeline,
)
from patchsim.months import Horizon
from patchsim.versions import VersionConstraint

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def fixture_paths():
    return {
        "releases": DATA_DIR / "releases.csv",
        "vulns": DATA_DIR / "vulns.json",
        "campaigns": DATA_DIR / "campaigns.csv",
    }


@pytest.fixture()
def fixture_catalog(fixture_paths):
    from patchsim.catalog import load_catalog

    return load_catalog(fixture_paths["releases"], fixture_paths["vulns"], fixture_paths["campaigns"])


# ---------------------------------------------------------------------------
# Programmatic catalog construction


def make_catalog(
    timelines_spec: dict[tuple[str, str], list[tuple[str, int]]],
    vulns: list[VulnRecord] = (),
    campaigns: list[CampaignRecord] = (),
    horizon_end: int = 144,
) -> Catalog:
    horizon = Horizon(2008, 1, horizon_end)
    products = {}
    timelines = {}
    for (vendor, name), versions in timelines_spec.items():
        product = SoftwareProduct(vendor, name)
        products[product.key] = product
        timelines[product.key] = make_timeline(product, versions)
    return Catalog(
        horizon=horizon,
        products=products,
        timelines=timelines,
        vulns={v.cve_id: v for v in vulns},
        campaigns=tuple(sorted(campaigns, key=lambda c: (c.apt_name, c.start_month))),
    )


def vuln(cve, reserved, published, *affected) -> VulnRecord:
    """affected: (vendor, product, match-mapping) triples."""
    return VulnRecord(
        cve,
        reserved,
        published,
        tuple(ProductConstraint(v, p, VersionConstraint.from_mapping(m)) for v, p, m in affected),
    )


def campaign(apt, month, cves=(), vectors=()) -> CampaignRecord:
    from patchsim.catalog import AttackVector

    tags = frozenset(AttackVector(t) for t in vectors) if vectors else frozenset()
    return CampaignRecord(apt, month, frozenset(cves), tags)


# ---------------------------------------------------------------------------
# Randomized catalogs for property and oracle tests


def random_catalog(rng: random.Random, horizon_end: int = 23) -> Catalog:
    n_products = rng.randint(1, 5)
    timelines_spec = {}
    for i in range(n_products):
        key = (rng.choice(["acme", "umbrella", "initech"]), f"app{i}")
        major, minor = rng.randint(1, 3), rng.randint(0, 2)
        month = 0
        versions = [(f"{major}.{minor}", 0)]
        used = {f"{major}.{minor}"}
        for _ in range(rng.randint(0, 9)):
            month = min(horizon_end, month + rng.randint(0, 5))
            if rng.random() < 0.15 and major > 1:
                v = f"{major - 1}.{rng.randint(0, 9)}"  # old-branch maintenance release
            else:
                if rng.random() < 0.3:
                    major, minor = major + 1, 0
                else:
                    minor += rng.randint(1, 3)
                v = f"{major}.{minor}"
            if v in used:
                continue
            used.add(v)
            versions.append((v, month))
        timelines_spec[key] = versions

    catalog_no_vulns = make_catalog(timelines_spec, horizon_end=horizon_end)
    keys = sorted(timelines_spec)
    vulns = []
    for i in range(rng.randint(1, 8)):
        key = rng.choice(keys)
        names = [v for v, _ in timelines_spec[key]]
        reserved = rng.randint(0, horizon_end)
        published = rng.randint(reserved, horizon_end)
        roll = rng.random()
        if roll < 0.3:
            match = {"exact": rng.choice(names)}
        elif roll < 0.85:
            match = {rng.choice(["endIncluding", "endExcluding"]): rng.choice(names)}
        else:
            match = {rng.choice(["startIncluding", "startExcluding"]): rng.choice(names)}
        vulns.append(vuln(f"CVE-2010-{1000 + i}", reserved, published, (key[0], key[1], match)))

    campaigns = {}
    for i in range(rng.randint(1, 20)):
        apt = rng.choice(["Alpha", "Bravo", "Chi", "Delta", "Echo"])
        month = rng.randint(0, horizon_end)
        if (apt, month) in campaigns:
            continue
        if vulns and rng.random() < 0.9:
            cves = frozenset(v.cve_id for v in rng.sample(vulns, rng.randint(1, min(3, len(vulns)))))
            campaigns[(apt, month)] = campaign(apt, month, cves)
        else:
            campaigns[(apt, month)] = campaign(apt, month, vectors=["undetermined"])

    return make_catalog(timelines_spec, vulns, list(campaigns.values()), horizon_end=horizon_end)


# ---------------------------------------------------------------------------
# Independent reference implementations (oracles). These deliberately avoid
# the package's comparison and matrix machinery: token lists, Python sets,
# and plain loops only.


def ref_tokens(version: str) -> list:
    parts = re.findall(r"\d+|[a-z]+", version.lower())
    out = []
    for i, part in enumerate(parts):
        if part == "u" and 0 < i < len(parts) - 1 and parts[i - 1].isdigit() and parts[i + 1].isdigit():
            continue
        out.append(int(part) if part.isdigit() else part)
    return out


def ref_compare(a: str, b: str) -> int:
    ta, tb = ref_tokens(a), ref_tokens(b)
    for x, y in zip(ta, tb):
        if x == y:
            continue
        x_num, y_num = isinstance(x, int), isinstance(y, int)
        if x_num != y_num:
            return -1 if x_num else 1  # numbers sort before letters
        return -1 if x < y else 1
    if len(ta) == len(tb):
        return 0
    return -1 if len(ta) < len(tb) else 1


def ref_matches(match: dict, version: str) -> bool:
    if "exact" in match:
        return ref_compare(version, match["exact"]) == 0
    ok = True
    if "startIncluding" in match and match["startIncluding"] != "*":
        ok = ok and ref_compare(version, match["startIncluding"]) >= 0
    if "startExcluding" in match and match["startExcluding"] != "*":
        ok = ok and ref_compare(version, match["startExcluding"]) > 0
    if "endIncluding" in match and match["endIncluding"] != "*":
        ok = ok and ref_compare(version, match["endIncluding"]) <= 0
    if "endExcluding" in match and match["endExcluding"] != "*":
        ok = ok and ref_compare(version, match["endExcluding"]) < 0
    return ok


def ref_targeted_releases(catalog: Catalog, campaign_record: CampaignRecord) -> set:
    targeted = set()
    for cve in campaign_record.cve_ids:
        record = catalog.vulns.get(cve)
        if record is None:
            continue
        for pc in record.affected:
            timeline = catalog.timelines.get(pc.key)
            if timeline is None:
                continue
            for rel in timeline.releases:
                if ref_matches(pc.constraint.to_mapping(), rel.version):
                    targeted.add(rel)
    return targeted


def ref_overall_probability(catalog: Catalog, matrix) -> Fraction | None:
    """Month-walking recount of the overall compromise probability."""
    n_months = matrix.space.n_months
    installed_by_month: list[set] = [set() for _ in range(n_months)]
    for i, rel in enumerate(matrix.space.rows):
        for m in range(n_months):
            if matrix.cells[i, m]:
                installed_by_month[m].add(rel)
    included = succeeded = 0
    for record in catalog.campaigns:
        if not record.cve_ids:
            continue
        targeted = ref_targeted_releases(catalog, record)
        if not targeted:
            continue
        included += 1
        for m in range(record.start_month, n_months):
            if installed_by_month[m] & targeted:
                succeeded += 1
                break
    if not included:
        return None
    return Fraction(succeeded, included)
