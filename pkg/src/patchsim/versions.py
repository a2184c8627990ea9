"""Version ordering and NVD-style version-range constraints.

Version strings are normalized into tuples of segments. Numeric runs compare
numerically, alphabetic runs lexically, and a shorter key sorts before any
extension of it ("9.2" < "9.2.1"). Normalization rules that are specific to a
vendor's numbering habits (e.g. Oracle's "6u13" update notation) live in
quirks.json so a new product needs data, not code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterable, Optional

# Segment encoding: numeric runs become (0, int), alphabetic runs (1, str).
# Plain tuple comparison then yields a total order with numbers sorting
# before letters, which is what mixed tags like "9.2" vs "9.2b" need.
_NUM = 0
_ALPHA = 1

Segment = tuple[int, object]


def _load_quirks() -> dict:
    with resources.files(__package__).joinpath("quirks.json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


_QUIRKS = _load_quirks()
DEFAULT_QUIRKS: dict = _QUIRKS["default"]


def vendor_quirks(vendor: str) -> dict:
    rules = dict(DEFAULT_QUIRKS)
    rules.update(_QUIRKS.get("vendors", {}).get(vendor.lower(), {}))
    return rules


class Ordering(Enum):
    LT = -1
    EQ = 0
    GT = 1


def _tokenize(raw: str) -> list[Segment]:
    segments: list[Segment] = []
    run = ""
    run_digit = False
    for ch in raw.strip().lower():
        if ch in ".-_+ ":
            if run:
                segments.append((_NUM, int(run)) if run_digit else (_ALPHA, run))
                run = ""
            continue
        is_digit = ch.isdigit()
        if run and is_digit != run_digit:
            segments.append((_NUM, int(run)) if run_digit else (_ALPHA, run))
            run = ""
        run += ch
        run_digit = is_digit
    if run:
        segments.append((_NUM, int(run)) if run_digit else (_ALPHA, run))
    return segments


def version_key(raw: str, quirks: Optional[dict] = None) -> tuple[Segment, ...]:
    """Normalize a raw version string into a comparable key."""
    rules = quirks if quirks is not None else DEFAULT_QUIRKS
    segments = _tokenize(raw)
    if rules.get("update_notation"):
        # "6u13" means major 6, update 13: drop a lone "u" wedged between numbers
        out: list[Segment] = []
        for i, seg in enumerate(segments):
            if (
                seg == (_ALPHA, "u")
                and 0 < i < len(segments) - 1
                and segments[i - 1][0] == _NUM
                and segments[i + 1][0] == _NUM
            ):
                continue
            out.append(seg)
        segments = out
    if rules.get("strip_trailing_zeros"):
        while len(segments) > 1 and segments[-1] == (_NUM, 0):
            segments.pop()
    return tuple(segments)


def compare_versions(a: str, b: str, quirks: Optional[dict] = None) -> Ordering:
    """Total order over arbitrary version strings."""
    ka, kb = version_key(a, quirks), version_key(b, quirks)
    if ka == kb:
        return Ordering.EQ
    return Ordering.LT if ka < kb else Ordering.GT


@dataclass(frozen=True)
class Bound:
    version: str
    inclusive: bool


@dataclass(frozen=True)
class VersionConstraint:
    """Either a single exact version or a (possibly half-open) range.

    Field semantics mirror NVD CPE match objects: startIncluding/startExcluding
    and endIncluding/endExcluding. A "*" bound means unbounded on that side.
    """

    kind: str  # "exact" | "range"
    start: Optional[Bound] = None
    end: Optional[Bound] = None
    raw: str = field(default="", compare=False)  # original match text, provenance only

    def __post_init__(self):
        if self.kind not in ("exact", "range"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "exact" and (self.start is None or self.end is None):
            raise ValueError("exact constraint needs a version literal")

    @classmethod
    def exact(cls, version: str) -> "VersionConstraint":
        b = Bound(version, True)
        return cls("exact", b, b, raw=json.dumps({"exact": version}, sort_keys=True))

    @classmethod
    def from_mapping(cls, obj: dict) -> "VersionConstraint":
        """Parse a constraint object such as {"endIncluding": "9.2"}."""
        raw = json.dumps(obj, sort_keys=True)
        if "exact" in obj:
            extras = set(obj) - {"exact"}
            if extras:
                raise ValueError(f"exact constraint mixed with {sorted(extras)} in {raw}")
            return cls.exact(obj["exact"])
        known = {"startIncluding", "startExcluding", "endIncluding", "endExcluding"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown constraint fields {sorted(unknown)} in {raw}")
        if "startIncluding" in obj and "startExcluding" in obj:
            raise ValueError(f"both start bounds present in {raw}")
        if "endIncluding" in obj and "endExcluding" in obj:
            raise ValueError(f"both end bounds present in {raw}")
        start = end = None
        if "startIncluding" in obj:
            start = Bound(obj["startIncluding"], True)
        elif "startExcluding" in obj:
            start = Bound(obj["startExcluding"], False)
        if "endIncluding" in obj:
            end = Bound(obj["endIncluding"], True)
        elif "endExcluding" in obj:
            end = Bound(obj["endExcluding"], False)
        # "*" means unbounded on that side
        if start is not None and start.version == "*":
            start = None
        if end is not None and end.version == "*":
            end = None
        c = cls("range", start, end, raw=raw)
        if start is not None and end is not None:
            if version_key(start.version) > version_key(end.version):
                raise ValueError(f"range bounds reversed in {raw}")
        return c

    def to_mapping(self) -> dict:
        if self.kind == "exact":
            return {"exact": self.start.version}
        obj: dict = {}
        if self.start is not None:
            obj["startIncluding" if self.start.inclusive else "startExcluding"] = self.start.version
        if self.end is not None:
            obj["endIncluding" if self.end.inclusive else "endExcluding"] = self.end.version
        return obj

    def matches(self, version: str, quirks: Optional[dict] = None) -> bool:
        key = version_key(version, quirks)
        if self.kind == "exact":
            return key == version_key(self.start.version, quirks)
        if self.start is not None:
            sk = version_key(self.start.version, quirks)
            if key < sk or (key == sk and not self.start.inclusive):
                return False
        if self.end is not None:
            ek = version_key(self.end.version, quirks)
            if key > ek or (key == ek and not self.end.inclusive):
                return False
        return True

    def upper_frontier(self) -> Optional[Bound]:
        """Bound a release must exceed to count as a fix; None if unbounded."""
        return self.end

    def fixes(self, version: str, quirks: Optional[dict] = None) -> bool:
        """True when the version is strictly above the affected range."""
        top = self.upper_frontier()
        if top is None:
            return False
        key = version_key(version, quirks)
        tk = version_key(top.version, quirks)
        return key > tk if top.inclusive else key >= tk


def affected_releases(constraint: VersionConstraint, timeline, quirks: Optional[dict] = None):
    """All releases in the timeline whose version satisfies the constraint."""
    rules = quirks if quirks is not None else vendor_quirks(timeline.product.vendor)
    return {rel for rel in timeline.releases if constraint.matches(rel.version, rules)}


def first_nonvulnerable(
    timeline,
    vulns: Iterable,
    at: int,
    installed,
    pick: str = "first",
):
    """Earliest release available at `at`, newer than `installed`, escaping every vuln.

    `vulns` are records whose constraints-for-this-product must all be escaped;
    a record with no constraint on this product never blocks. pick="first"
    takes the earliest-released qualifying version (minimal churn);
    pick="latest" takes the newest qualifying version instead.
    """
    if pick not in ("first", "latest"):
        raise ValueError(f"pick must be 'first' or 'latest', got {pick!r}")
    rules = vendor_quirks(timeline.product.vendor)
    constraints = []
    for v in vulns:
        constraints.extend(v.constraints_for(timeline.product.key))
    candidates = [
        rel
        for rel in timeline.releases
        if rel.release_month <= at
        and rel.sort_key > installed.sort_key
        and not any(c.matches(rel.version, rules) for c in constraints)
    ]
    if not candidates:
        return None
    if pick == "first":
        return min(candidates, key=lambda rel: (rel.release_month, rel.sort_key))
    return max(candidates, key=lambda rel: (rel.sort_key, rel.release_month))
