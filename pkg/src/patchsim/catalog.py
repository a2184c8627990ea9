"""Domain model and dataset ingestion.

A Catalog bundles everything one analysis run needs: per-product release
timelines, vulnerability records with affected-version constraints, and
attributed campaign events. It is immutable after loading and safe to share
across threads.

Input formats:
  releases.csv   vendor,product,version,release_date
  vulns.json     [{cve, reserved, published, affected: [{vendor, product, match}]}]
  campaigns.csv  apt,date,cves,vectors   (cves/vectors are |-separated)

Dates are YYYY-MM or YYYY-MM-DD; day parts are truncated to the month.
Dates before the epoch clamp to month 0 (the entity is simply "already
there" when the window opens); dates past the horizon end are errors.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from .months import DataError, Horizon, split_date
from .versions import VersionConstraint, vendor_quirks, version_key

log = logging.getLogger(__name__)

ProductKey = tuple[str, str]  # (vendor, name)


class LoadError(DataError):
    """Input file cannot be turned into a catalog; message carries context."""


class AttackVector(Enum):
    SPEARPHISHING = "spearphishing"
    DRIVE_BY = "drive-by"
    SUPPLY_CHAIN = "supply-chain"
    VALID_ACCOUNTS = "valid-accounts"
    EXTERNAL_REMOTE_SERVICES = "external-remote-services"
    PUBLIC_FACING_APP = "public-facing-app"
    REMOVABLE_MEDIA = "removable-media"
    UNDETERMINED = "undetermined"


_VECTOR_BY_TAG = {v.value: v for v in AttackVector}


@dataclass(frozen=True)
class SoftwareProduct:
    vendor: str
    name: str
    platform: str = ""
    cumulative: bool = False  # KB-style cumulative updates; informational only

    @property
    def key(self) -> ProductKey:
        return (self.vendor, self.name)


@dataclass(frozen=True)
class VersionRelease:
    product: SoftwareProduct
    version: str
    sort_key: tuple
    release_month: int

    @property
    def row_label(self) -> str:
        return f"{self.product.vendor}:{self.product.name}:{self.version}"


@dataclass(frozen=True)
class ReleaseTimeline:
    product: SoftwareProduct
    releases: tuple[VersionRelease, ...]  # sorted by (release_month, sort_key)


@dataclass(frozen=True)
class ProductConstraint:
    vendor: str
    product: str
    constraint: VersionConstraint

    @property
    def key(self) -> ProductKey:
        return (self.vendor, self.product)


@dataclass(frozen=True)
class VulnRecord:
    cve_id: str
    reserved_month: int
    published_month: int
    affected: tuple[ProductConstraint, ...]

    def constraints_for(self, key: ProductKey) -> list[VersionConstraint]:
        return [pc.constraint for pc in self.affected if pc.key == key]


@dataclass(frozen=True)
class CampaignRecord:
    apt_name: str
    start_month: int
    cve_ids: frozenset[str]
    vectors: frozenset[AttackVector]

    @property
    def key(self) -> tuple[str, int]:
        return (self.apt_name, self.start_month)

    @property
    def vector_only(self) -> bool:
        return not self.cve_ids


@dataclass
class Catalog:
    horizon: Horizon
    products: dict[ProductKey, SoftwareProduct]
    timelines: dict[ProductKey, ReleaseTimeline]
    vulns: dict[str, VulnRecord]
    campaigns: tuple[CampaignRecord, ...]

    def campaign_cve_ids(self) -> frozenset[str]:
        out: set[str] = set()
        for c in self.campaigns:
            out |= c.cve_ids
        return frozenset(out)

    def timeline(self, key: ProductKey) -> ReleaseTimeline:
        return self.timelines[key]


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str
    detail: str = ""


def make_release(product: SoftwareProduct, version: str, month: int) -> VersionRelease:
    return VersionRelease(
        product=product,
        version=version,
        sort_key=version_key(version, vendor_quirks(product.vendor)),
        release_month=month,
    )


def make_timeline(product: SoftwareProduct, versions: list[tuple[str, int]]) -> ReleaseTimeline:
    """Build a sorted timeline from (version, month) pairs."""
    rels = [make_release(product, v, m) for v, m in versions]
    rels.sort(key=lambda r: (r.release_month, r.sort_key))
    return ReleaseTimeline(product=product, releases=tuple(rels))


# ---------------------------------------------------------------------------
# Loading


def _parse_clamped(horizon: Horizon, text: str, where: str) -> int:
    year_month = text.strip()
    _, _, had_day = split_date(year_month)
    if had_day:
        log.info("%s: day-level date %r truncated to month", where, year_month)
    index, clamped = horizon.parse_clamped(year_month)
    if clamped:
        log.info("%s: pre-epoch date %r clamped to %s", where, year_month, horizon.format(0))
    return index


def _load_releases(path: Path, horizon: Horizon) -> tuple[dict, dict]:
    products: dict[ProductKey, SoftwareProduct] = {}
    rows: dict[ProductKey, list[VersionRelease]] = {}
    seen: set[tuple[str, str, str]] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = ["vendor", "product", "version", "release_date"]
        if reader.fieldnames != expected:
            raise LoadError(f"{path}: header must be {','.join(expected)}, got {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            vendor = (row["vendor"] or "").strip()
            name = (row["product"] or "").strip()
            version = (row["version"] or "").strip()
            if not vendor or not name or not version or row["release_date"] is None:
                raise LoadError(f"{where}: vendor, product, version and release_date must be non-empty")
            if (vendor, name, version) in seen:
                raise LoadError(f"{where}: duplicate release {vendor}/{name} {version}")
            seen.add((vendor, name, version))
            try:
                month = _parse_clamped(horizon, row["release_date"], where)
            except DataError as exc:
                raise LoadError(f"{where}: field release_date: {exc}") from exc
            key = (vendor, name)
            product = products.setdefault(key, SoftwareProduct(vendor, name))
            rows.setdefault(key, []).append(make_release(product, version, month))
    timelines = {}
    for key, rels in rows.items():
        rels.sort(key=lambda r: (r.release_month, r.sort_key))
        timelines[key] = ReleaseTimeline(product=products[key], releases=tuple(rels))
    return products, timelines


def _load_vulns(path: Path, horizon: Horizon) -> dict[str, VulnRecord]:
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise LoadError(f"{path}: top-level value must be an array")
    vulns: dict[str, VulnRecord] = {}
    for i, entry in enumerate(entries):
        where = f"{path}: entry #{i}"
        if not isinstance(entry, dict):
            raise LoadError(f"{where}: expected an object")
        try:
            cve = str(entry["cve"]).strip()
            reserved_raw = entry["reserved"]
            published_raw = entry["published"]
            affected_raw = entry["affected"]
        except KeyError as exc:
            raise LoadError(f"{where}: missing field {exc.args[0]!r}") from exc
        if cve in vulns:
            raise LoadError(f"{where}: duplicate CVE id {cve}")
        try:
            reserved = _parse_clamped(horizon, str(reserved_raw), f"{where} ({cve}) reserved")
            published = _parse_clamped(horizon, str(published_raw), f"{where} ({cve}) published")
        except DataError as exc:
            raise LoadError(f"{where} ({cve}): {exc}") from exc
        if not isinstance(affected_raw, list):
            raise LoadError(f"{where} ({cve}): 'affected' must be an array")
        affected = []
        for j, item in enumerate(affected_raw):
            if not isinstance(item, dict) or not {"vendor", "product", "match"} <= set(item):
                raise LoadError(f"{where} ({cve}): affected[{j}] needs vendor, product and match")
            if not isinstance(item["match"], dict):
                raise LoadError(f"{where} ({cve}): affected[{j}].match must be an object")
            try:
                constraint = VersionConstraint.from_mapping(item["match"])
            except ValueError as exc:
                raise LoadError(f"{where} ({cve}): affected[{j}].match: {exc}") from exc
            affected.append(ProductConstraint(str(item["vendor"]).strip(), str(item["product"]).strip(), constraint))
        vulns[cve] = VulnRecord(cve, reserved, published, tuple(affected))
    return vulns


def _load_campaigns(path: Path, horizon: Horizon, vulns: dict[str, VulnRecord]) -> tuple[CampaignRecord, ...]:
    merged: dict[tuple[str, int], tuple[set[str], set[AttackVector]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = ["apt", "date", "cves", "vectors"]
        if reader.fieldnames != expected:
            raise LoadError(f"{path}: header must be {','.join(expected)}, got {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            apt = (row["apt"] or "").strip()
            if not apt or row["date"] is None:
                raise LoadError(f"{where}: apt and date must be non-empty")
            try:
                month = _parse_clamped(horizon, row["date"], where)
            except DataError as exc:
                raise LoadError(f"{where}: field date: {exc}") from exc
            cves = {c.strip() for c in (row["cves"] or "").split("|") if c.strip()}
            for cve in sorted(cves):
                if cve not in vulns:
                    raise LoadError(f"{where}: campaign {apt} references unknown CVE {cve}")
            tags = [t.strip() for t in (row["vectors"] or "").split("|") if t.strip()]
            vectors = set()
            for tag in tags:
                if tag not in _VECTOR_BY_TAG:
                    raise LoadError(
                        f"{where}: unknown attack vector {tag!r}; allowed: {', '.join(sorted(_VECTOR_BY_TAG))}"
                    )
                vectors.add(_VECTOR_BY_TAG[tag])
            if not cves and not vectors:
                raise LoadError(f"{where}: campaign {apt} has neither CVEs nor attack vectors")
            key = (apt, month)
            if key in merged:
                log.info("%s: merging duplicate campaign key %s/%s", where, apt, horizon.format(month))
                old_cves, old_vectors = merged[key]
                old_cves |= cves
                old_vectors |= vectors
            else:
                merged[key] = (cves, vectors)
    campaigns = [
        CampaignRecord(apt, month, frozenset(cves), frozenset(vectors))
        for (apt, month), (cves, vectors) in merged.items()
    ]
    campaigns.sort(key=lambda c: (c.apt_name, c.start_month))
    return tuple(campaigns)


def load_catalog(
    release_path,
    vuln_path,
    campaign_path,
    horizon: Optional[Horizon] = None,
) -> Catalog:
    """Load and cross-link the three dataset files into a Catalog."""
    horizon = horizon or Horizon.from_strings()
    products, timelines = _load_releases(Path(release_path), horizon)
    vulns = _load_vulns(Path(vuln_path), horizon)
    campaigns = _load_campaigns(Path(campaign_path), horizon, vulns)
    return Catalog(horizon=horizon, products=products, timelines=timelines, vulns=vulns, campaigns=campaigns)


# ---------------------------------------------------------------------------
# Validation


def validate_catalog(catalog: Catalog) -> list[Violation]:
    """Check every structural invariant; violations are data, not exceptions."""
    out: list[Violation] = []
    end = catalog.horizon.end_index

    def check_month(entity: str, month: int, what: str):
        if not 0 <= month <= end:
            out.append(Violation(entity, "month-range", f"{what} index {month} outside [0, {end}]"))

    for key, timeline in catalog.timelines.items():
        entity = f"{key[0]}/{key[1]}"
        order = [(r.release_month, r.sort_key) for r in timeline.releases]
        if order != sorted(order):
            out.append(Violation(entity, "timeline-order", "releases not sorted by (month, version)"))
        seen_keys: dict[tuple, str] = {}
        for rel in timeline.releases:
            check_month(f"{entity} {rel.version}", rel.release_month, "release_month")
            if rel.product.key != key:
                out.append(Violation(f"{entity} {rel.version}", "timeline-product-mismatch", ""))
            if rel.sort_key in seen_keys and seen_keys[rel.sort_key] != rel.version:
                out.append(
                    Violation(
                        f"{entity} {rel.version}",
                        "duplicate-version-key",
                        f"normalizes identically to {seen_keys[rel.sort_key]!r}",
                    )
                )
            seen_keys.setdefault(rel.sort_key, rel.version)

    for cve, vuln in catalog.vulns.items():
        if vuln.reserved_month > vuln.published_month:
            out.append(
                Violation(cve, "reserved-after-published", f"{vuln.reserved_month} > {vuln.published_month}")
            )
        check_month(cve, vuln.reserved_month, "reserved_month")
        check_month(cve, vuln.published_month, "published_month")
        for pc in vuln.affected:
            c = pc.constraint
            if c.kind == "range" and c.start is not None and c.end is not None:
                if version_key(c.start.version) > version_key(c.end.version):
                    out.append(Violation(cve, "constraint-bounds", f"reversed range in {c.raw}"))

    seen_campaigns: set[tuple[str, int]] = set()
    for campaign in catalog.campaigns:
        entity = f"{campaign.apt_name}@{campaign.start_month}"
        check_month(entity, campaign.start_month, "start_month")
        if campaign.key in seen_campaigns:
            out.append(Violation(entity, "duplicate-campaign", ""))
        seen_campaigns.add(campaign.key)
        for cve in sorted(campaign.cve_ids):
            if cve not in catalog.vulns:
                out.append(Violation(entity, "unknown-cve", cve))
        if not campaign.cve_ids and not campaign.vectors:
            out.append(Violation(entity, "empty-campaign", ""))

    return out


def catalog_diagnostics(catalog: Catalog) -> dict:
    """Non-fatal data-quality counters (e.g. constraints matching no release)."""
    dead_constraints = []
    off_catalog = []
    for cve, vuln in sorted(catalog.vulns.items()):
        for pc in vuln.affected:
            timeline = catalog.timelines.get(pc.key)
            if timeline is None:
                off_catalog.append({"cve": cve, "vendor": pc.vendor, "product": pc.product})
                continue
            rules = vendor_quirks(pc.vendor)
            if not any(pc.constraint.matches(rel.version, rules) for rel in timeline.releases):
                dead_constraints.append(
                    {"cve": cve, "vendor": pc.vendor, "product": pc.product, "match": pc.constraint.to_mapping()}
                )
    vector_only = sum(1 for c in catalog.campaigns if c.vector_only)
    return {
        "constraints_matching_no_release": dead_constraints,
        "constraints_for_products_without_timeline": off_catalog,
        "vector_only_campaigns": vector_only,
        "campaigns": len(catalog.campaigns),
        "products": len(catalog.products),
        "vulns": len(catalog.vulns),
    }


# ---------------------------------------------------------------------------
# Serialization (round-trips through the input formats)


def save_catalog(catalog: Catalog, directory) -> dict[str, Path]:
    """Write the catalog back out as releases.csv / vulns.json / campaigns.csv."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fmt = catalog.horizon.format

    release_path = directory / "releases.csv"
    with release_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vendor", "product", "version", "release_date"])
        for key in sorted(catalog.timelines):
            for rel in catalog.timelines[key].releases:
                writer.writerow([rel.product.vendor, rel.product.name, rel.version, fmt(rel.release_month)])

    vuln_path = directory / "vulns.json"
    entries = []
    for cve in sorted(catalog.vulns):
        vuln = catalog.vulns[cve]
        entries.append(
            {
                "cve": cve,
                "reserved": fmt(vuln.reserved_month),
                "published": fmt(vuln.published_month),
                "affected": [
                    {"vendor": pc.vendor, "product": pc.product, "match": pc.constraint.to_mapping()}
                    for pc in vuln.affected
                ],
            }
        )
    vuln_path.write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    campaign_path = directory / "campaigns.csv"
    with campaign_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["apt", "date", "cves", "vectors"])
        for c in catalog.campaigns:
            writer.writerow(
                [
                    c.apt_name,
                    fmt(c.start_month),
                    "|".join(sorted(c.cve_ids)),
                    "|".join(sorted(v.value for v in c.vectors)),
                ]
            )
    return {"releases": release_path, "vulns": vuln_path, "campaigns": campaign_path}
