"""Update-strategy simulation as boolean (product-version x month) matrices.

Four strategies are modeled:

  immediate  adopt each month's newest release as soon as it appears
  planned    same triggers as immediate, deployed after a fixed delay
  reactive   update only when a published CVE hits the installed version
  informed   like reactive, but triggered at CVE reservation time

Every builder produces an optimistic matrix (within a transition month only
the incoming version is installed). The pessimistic transform additionally
keeps the outgoing version installed during transition months, modeling an
attacker who strikes before the update lands.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .catalog import Catalog, ProductKey, VersionRelease, VulnRecord
from .versions import first_nonvulnerable, vendor_quirks

log = logging.getLogger(__name__)


class ConfigurationError(Exception):
    """Catalog cannot support the requested simulation."""


class ScenarioError(Exception):
    """Matrix used under the wrong optimistic/pessimistic tag."""


class Scenario(Enum):
    UPDATE_FIRST = "update-first"
    APT_FIRST = "apt-first"


class StrategyKind(Enum):
    IMMEDIATE = "immediate"
    PLANNED = "planned"
    REACTIVE = "reactive"
    INFORMED_REACTIVE = "informed"


@dataclass(frozen=True)
class StrategyConfig:
    kind: StrategyKind
    delay_months: int = 0
    reactive_pick: str = "first"  # first | latest

    def __post_init__(self):
        if self.delay_months < 0:
            raise ValueError("delay_months must be >= 0")
        if self.kind is StrategyKind.IMMEDIATE and self.delay_months != 0:
            raise ValueError("immediate strategy has no delay")
        if self.reactive_pick not in ("first", "latest"):
            raise ValueError(f"reactive_pick must be 'first' or 'latest', got {self.reactive_pick!r}")

    @property
    def label(self) -> str:
        if self.kind is StrategyKind.IMMEDIATE:
            return "immediate"
        return f"{self.kind.value}:{self.delay_months}"

    @classmethod
    def parse(cls, token: str) -> "StrategyConfig":
        """Parse a 'name[:delay]' token, e.g. 'planned:3'."""
        name, _, delay = token.strip().partition(":")
        kinds = {k.value: k for k in StrategyKind}
        if name not in kinds:
            raise ValueError(f"unknown strategy {name!r}; allowed: {', '.join(sorted(kinds))}")
        kind = kinds[name]
        if kind is StrategyKind.IMMEDIATE:
            if delay:
                raise ValueError("immediate takes no delay")
            return cls(kind)
        if not delay:
            raise ValueError(f"strategy {name!r} needs a delay, e.g. {name}:1")
        return cls(kind, int(delay))


@dataclass(frozen=True)
class Transition:
    product: ProductKey
    month: int
    outgoing: VersionRelease
    incoming: VersionRelease


class MatrixSpace:
    """Shared row/column space for deployment and exposure matrices."""

    def __init__(self, catalog: Catalog):
        rows: list[VersionRelease] = []
        for key in sorted(catalog.timelines):
            rows.extend(catalog.timelines[key].releases)
        self.rows: tuple[VersionRelease, ...] = tuple(rows)
        self.row_index: dict[VersionRelease, int] = {rel: i for i, rel in enumerate(rows)}
        self.n_months: int = catalog.horizon.n_months
        self.product_keys: tuple[ProductKey, ...] = tuple(sorted(catalog.timelines))
        self.horizon = catalog.horizon

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), self.n_months)


def matrix_to_csv(space: MatrixSpace, cells: np.ndarray, fh) -> None:
    """Dump a matrix as CSV: one row per product-version, one column per month."""
    writer = csv.writer(fh)
    fmt = space.horizon.format
    writer.writerow(["row"] + [fmt(m) for m in range(space.n_months)])
    for i, rel in enumerate(space.rows):
        writer.writerow([rel.row_label] + [int(x) for x in cells[i]])


@dataclass(frozen=True, eq=False)
class DeploymentMatrix:
    space: MatrixSpace
    cells: np.ndarray  # bool, rows x months
    scenario: Scenario
    config: StrategyConfig
    transitions: tuple[Transition, ...]

    def installed(self, month: int) -> list[VersionRelease]:
        return [self.space.rows[i] for i in np.flatnonzero(self.cells[:, month])]

    def installed_series(self, product: ProductKey) -> list[set[VersionRelease]]:
        """Per-month installed set for one product."""
        out: list[set[VersionRelease]] = [set() for _ in range(self.space.n_months)]
        for i, rel in enumerate(self.space.rows):
            if rel.product.key != product:
                continue
            for m in np.flatnonzero(self.cells[i]):
                out[m].add(rel)
        return out

    def validate(self) -> list[str]:
        """Structural self-checks; empty list when the matrix is well-formed."""
        problems: list[str] = []
        transition_months = {(t.product, t.month): t for t in self.transitions}
        for key in self.space.product_keys:
            series = self.installed_series(key)
            prev_max = None
            for m, installed in enumerate(series):
                if self.scenario is Scenario.UPDATE_FIRST and len(installed) != 1:
                    problems.append(f"{key}: month {m} has {len(installed)} versions installed")
                if self.scenario is Scenario.APT_FIRST:
                    if len(installed) > 2 or not installed:
                        problems.append(f"{key}: month {m} has {len(installed)} versions installed")
                    if len(installed) == 2:
                        t = transition_months.get((key, m))
                        if t is None or {t.outgoing, t.incoming} != installed:
                            problems.append(f"{key}: month {m} pairs versions without a transition")
                for rel in installed:
                    if rel.release_month > m:
                        problems.append(f"{key}: {rel.version} installed at {m} before release")
                cur_max = max((r.sort_key for r in installed), default=None)
                if prev_max is not None and cur_max is not None and cur_max < prev_max:
                    problems.append(f"{key}: version downgrade entering month {m}")
                prev_max = cur_max if cur_max is not None else prev_max
        return problems

    def to_csv(self, fh) -> None:
        matrix_to_csv(self.space, self.cells, fh)


def _affects(vuln: VulnRecord, release: VersionRelease, quirks: dict) -> bool:
    return any(c.matches(release.version, quirks) for c in vuln.constraints_for(release.product.key))


def initial_versions(catalog: Catalog) -> dict[ProductKey, VersionRelease]:
    """Starting version per product: oldest release already out at the epoch,
    preferring one vulnerable to a campaign-exploited CVE."""
    campaign_vulns = [catalog.vulns[c] for c in sorted(catalog.campaign_cve_ids()) if c in catalog.vulns]
    chosen: dict[ProductKey, VersionRelease] = {}
    for key in sorted(catalog.timelines):
        timeline = catalog.timelines[key]
        quirks = vendor_quirks(key[0])
        at_epoch = [r for r in timeline.releases if r.release_month <= 0]
        if not at_epoch:
            raise ConfigurationError(
                f"product {key[0]}/{key[1]} has no release at or before {catalog.horizon.format(0)}"
            )
        vulnerable = [r for r in at_epoch if any(_affects(v, r, quirks) for v in campaign_vulns)]
        pool = vulnerable or at_epoch
        chosen[key] = min(pool, key=lambda r: (r.release_month, r.sort_key))
    return chosen


def _materialize(
    catalog: Catalog,
    config: StrategyConfig,
    sequences: dict[ProductKey, list[VersionRelease]],
    transitions: list[Transition],
) -> DeploymentMatrix:
    space = MatrixSpace(catalog)
    cells = np.zeros(space.shape, dtype=bool)
    for key, seq in sequences.items():
        for m, rel in enumerate(seq):
            cells[space.row_index[rel], m] = True
    cells.setflags(write=False)
    return DeploymentMatrix(
        space=space,
        cells=cells,
        scenario=Scenario.UPDATE_FIRST,
        config=config,
        transitions=tuple(sorted(transitions, key=lambda t: (t.product, t.month))),
    )


def _immediate_transitions(catalog: Catalog) -> tuple[dict, dict]:
    """Per-product transition list for the immediate strategy.

    Month 0 is the mandated common starting state; a release only triggers
    from month 1 on. Within a month the newest version wins, and anything
    that is not a strict upgrade over the installed version is skipped.
    """
    start = initial_versions(catalog)
    triggers: dict[ProductKey, list[tuple[int, VersionRelease]]] = {}
    for key in sorted(catalog.timelines):
        timeline = catalog.timelines[key]
        by_month: dict[int, list[VersionRelease]] = {}
        for rel in timeline.releases:
            by_month.setdefault(rel.release_month, []).append(rel)
        current = start[key]
        out: list[tuple[int, VersionRelease]] = []
        for m in range(1, catalog.horizon.n_months):
            if m not in by_month:
                continue
            candidate = max(by_month[m], key=lambda r: r.sort_key)
            if candidate.sort_key <= current.sort_key:
                log.debug(
                    "%s/%s: release %s at %s skipped (downgrade from %s)",
                    key[0], key[1], candidate.version, catalog.horizon.format(m), current.version,
                )
                continue
            out.append((m, candidate))
            current = candidate
        triggers[key] = out
    return start, triggers


def build_immediate(catalog: Catalog) -> DeploymentMatrix:
    return build_planned(catalog, 0)


def build_planned(catalog: Catalog, delay: int) -> DeploymentMatrix:
    """Deploy each immediate-strategy trigger `delay` months later.

    Deployments shifted past the horizon end are dropped; several landing in
    the same month collapse to the newest version.
    """
    if delay < 0:
        raise ValueError("delay must be >= 0")
    config = (
        StrategyConfig(StrategyKind.IMMEDIATE)
        if delay == 0
        else StrategyConfig(StrategyKind.PLANNED, delay)
    )
    start, triggers = _immediate_transitions(catalog)
    end = catalog.horizon.end_index
    sequences: dict[ProductKey, list[VersionRelease]] = {}
    transitions: list[Transition] = []
    for key, trigger_list in triggers.items():
        landings: dict[int, VersionRelease] = {}
        for trigger_month, rel in trigger_list:
            land = trigger_month + delay
            if land > end:
                continue
            if land not in landings or rel.sort_key > landings[land].sort_key:
                landings[land] = rel
        current = start[key]
        seq = []
        for m in range(catalog.horizon.n_months):
            rel = landings.get(m)
            if rel is not None and rel.sort_key > current.sort_key:
                transitions.append(Transition(key, m, current, rel))
                current = rel
            seq.append(current)
        sequences[key] = seq
    return _materialize(catalog, config, sequences, transitions)


def build_reactive(
    catalog: Catalog,
    delay: int,
    informed: bool = False,
    pick: str = "first",
) -> DeploymentMatrix:
    """Update only in response to CVEs hitting the installed version.

    The decision clock starts at the CVE trigger (publication, or reservation
    when informed) or, if later, at the month the first escaping release
    becomes available; the deployment lands `delay` months after the decision
    and installs a release clear of every outstanding CVE.
    """
    if delay < 0:
        raise ValueError("delay must be >= 0")
    kind = StrategyKind.INFORMED_REACTIVE if informed else StrategyKind.REACTIVE
    config = StrategyConfig(kind, delay, reactive_pick=pick)
    start = initial_versions(catalog)
    end = catalog.horizon.end_index

    triggers_by_month: dict[int, list[VulnRecord]] = {}
    for cve in sorted(catalog.vulns):
        vuln = catalog.vulns[cve]
        month = vuln.reserved_month if informed else vuln.published_month
        triggers_by_month.setdefault(month, []).append(vuln)

    sequences: dict[ProductKey, list[VersionRelease]] = {}
    transitions: list[Transition] = []
    for key in sorted(catalog.timelines):
        timeline = catalog.timelines[key]
        quirks = vendor_quirks(key[0])

        def escape_available_from(outstanding: dict, current: VersionRelease) -> Optional[int]:
            months = [
                rel.release_month
                for rel in timeline.releases
                if rel.sort_key > current.sort_key
                and not any(_affects(v, rel, quirks) for v in outstanding.values())
            ]
            return min(months) if months else None

        def schedule(outstanding: dict, current: VersionRelease, now: int) -> Optional[int]:
            available = escape_available_from(outstanding, current)
            if available is None:
                return None
            return max(now, available) + delay

        current = start[key]
        outstanding: dict[str, VulnRecord] = {}
        pending: Optional[int] = None
        seq = []
        for m in range(catalog.horizon.n_months):
            fired = [v for v in triggers_by_month.get(m, ()) if _affects(v, current, quirks)]
            if fired:
                had_pending = pending is not None
                for v in fired:
                    outstanding[v.cve_id] = v
                if not had_pending:
                    pending = schedule(outstanding, current, m)
            if pending == m:
                rel = first_nonvulnerable(timeline, outstanding.values(), at=m, installed=current, pick=pick)
                if rel is None:
                    # union grew past what the scheduled release could fix;
                    # restart the clock from the escape's availability
                    pending = schedule(outstanding, current, m)
                else:
                    transitions.append(Transition(key, m, current, rel))
                    current = rel
                    outstanding = {}
                    pending = None
                    # already-triggered CVEs may hit the version just installed
                    relapsed = [
                        v
                        for month, vs in triggers_by_month.items()
                        if month <= m
                        for v in vs
                        if _affects(v, current, quirks)
                    ]
                    if relapsed:
                        for v in relapsed:
                            outstanding[v.cve_id] = v
                        pending = schedule(outstanding, current, m)
            seq.append(current)
        sequences[key] = seq
        if pending is not None and pending > end:
            log.debug("%s/%s: pending deployment at %d falls outside the window", key[0], key[1], pending)
    return _materialize(catalog, config, sequences, transitions)


def build_matrix(catalog: Catalog, config: StrategyConfig) -> DeploymentMatrix:
    if config.kind in (StrategyKind.IMMEDIATE, StrategyKind.PLANNED):
        return build_planned(catalog, config.delay_months)
    informed = config.kind is StrategyKind.INFORMED_REACTIVE
    return build_reactive(catalog, config.delay_months, informed=informed, pick=config.reactive_pick)


def apply_apt_first(matrix: DeploymentMatrix) -> DeploymentMatrix:
    """Keep the outgoing version installed during each transition month."""
    if matrix.scenario is not Scenario.UPDATE_FIRST:
        raise ScenarioError("pessimistic transform expects an update-first matrix")
    cells = matrix.cells.copy()
    for t in matrix.transitions:
        cells[matrix.space.row_index[t.outgoing], t.month] = True
    cells.setflags(write=False)
    return DeploymentMatrix(
        space=matrix.space,
        cells=cells,
        scenario=Scenario.APT_FIRST,
        config=matrix.config,
        transitions=matrix.transitions,
    )


def count_updates(matrix: DeploymentMatrix) -> tuple[int, int]:
    """(raw, net) update counts: rows ever installed, and the same minus the
    per-product initial installations."""
    raw = int(matrix.cells.any(axis=1).sum())
    return raw, raw - len(matrix.space.product_keys)
