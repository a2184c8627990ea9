"""Command-line interface.

Subcommands:
  validate   load the dataset and report integrity violations
  evaluate   compare update strategies (probability, updates, odds table)
  classify   per-campaign lifecycle classes and knowledge-group counts
  survival   exploit-age survival curve as CSV
  report     run all of the above into an output directory with a manifest

Exit codes: 0 success, 1 data/validation problems, 2 usage or I/O errors.

Dataset paths default to $PATCHSIM_DATA/{releases.csv,vulns.json,campaigns.csv}
when the environment variable is set. A JSON config file (--config) may hold
any long-form flag value; explicit flags override it.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

from .campaigns import TieRule, campaign_scenarios, classify_campaign, venn_counts
from .catalog import Catalog, catalog_diagnostics, load_catalog, validate_catalog
from .evaluator import (
    EvaluationReport,
    evaluate,
    percent_1dp,
    report_to_dict,
)
from .months import DataError, Horizon
from .stats import exploit_ages, kaplan_meier
from .strategies import Scenario, StrategyConfig

DATA_DIR_ENV = "PATCHSIM_DATA"

DEFAULT_STRATEGIES = "immediate,planned:1,planned:3,planned:7,reactive:1,reactive:3,reactive:7,informed:1,informed:3,informed:7"
DEFAULT_SCENARIOS = "update-first,apt-first"


def parse_scenarios(text: str) -> list[Scenario]:
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            out.append(Scenario(token))
        except ValueError:
            raise ValueError(f"unknown scenario {token!r}; allowed: update-first, apt-first") from None
    if not out:
        raise ValueError("at least one scenario is required")
    return out


def parse_strategies(text: str, reactive_pick: str) -> list[StrategyConfig]:
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        cfg = StrategyConfig.parse(token)
        if cfg.reactive_pick != reactive_pick:
            cfg = StrategyConfig(cfg.kind, cfg.delay_months, reactive_pick=reactive_pick)
        out.append(cfg)
    if not out:
        raise ValueError("at least one strategy is required")
    return out


def parse_baseline(text: str, reactive_pick: str) -> tuple[StrategyConfig, Scenario]:
    token, _, scen = text.partition("@")
    cfg = StrategyConfig.parse(token)
    if cfg.reactive_pick != reactive_pick:
        cfg = StrategyConfig(cfg.kind, cfg.delay_months, reactive_pick=reactive_pick)
    scenario = Scenario(scen) if scen else Scenario.UPDATE_FIRST
    return cfg, scenario


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    data_dir = os.environ.get(DATA_DIR_ENV)
    default = (lambda name: str(Path(data_dir) / name)) if data_dir else (lambda name: None)
    parser.add_argument("--releases", default=default("releases.csv"),
                        help="release timeline CSV (vendor,product,version,release_date)")
    parser.add_argument("--vulns", default=default("vulns.json"),
                        help="vulnerability records JSON with affected-version constraints")
    parser.add_argument("--campaigns", default=default("campaigns.csv"),
                        help="campaign events CSV (apt,date,cves,vectors)")
    parser.add_argument("--epoch", default="2008-01", help="first month of the analysis window (YYYY-MM)")
    parser.add_argument("--horizon", default="2020-01", help="last month of the analysis window (YYYY-MM)")
    parser.add_argument("--config", default=None,
                        help="JSON file holding any of these options; explicit flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchsim",
        description="Quantify update-strategy effectiveness against APT campaign timelines.",
        epilog=(
            f"Set ${DATA_DIR_ENV} to a directory holding releases.csv, vulns.json and "
            "campaigns.csv to omit the dataset flags. Exit codes: 0 ok, 1 data problems, "
            "2 usage/IO errors."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check dataset integrity")
    _add_data_flags(p_validate)

    p_eval = sub.add_parser("evaluate", help="probability / update-count / odds table per strategy")
    _add_data_flags(p_eval)
    p_eval.add_argument("--strategies", default=DEFAULT_STRATEGIES,
                        help="comma list of name[:delay] with names immediate, planned, reactive, informed")
    p_eval.add_argument("--scenarios", default=DEFAULT_SCENARIOS,
                        help="comma list of update-first (optimistic) and/or apt-first (pessimistic)")
    p_eval.add_argument("--baseline", default="immediate@update-first",
                        help="odds baseline as strategy[:delay][@scenario]")
    p_eval.add_argument("--reactive-pick", default="first", choices=["first", "latest"],
                        help="which escaping release a reactive update installs")
    p_eval.add_argument("--tie-rule", default="inclusive", choices=["inclusive", "exclusive"],
                        help="same-month tie handling in lifecycle classification")
    p_eval.add_argument("--out", default=None, help="directory for JSON/CSV artifacts")
    p_eval.add_argument("--format", default="both", choices=["json", "csv", "both"],
                        help="artifact family to write under --out")

    p_classify = sub.add_parser("classify", help="lifecycle classes per campaign, knowledge-group counts")
    _add_data_flags(p_classify)
    p_classify.add_argument("--tie-rule", default="inclusive", choices=["inclusive", "exclusive"],
                            help="same-month tie handling in lifecycle classification")
    p_classify.add_argument("--out", default=None, help="directory for classify.csv / venn.json")
    p_classify.add_argument("--format", default="both", choices=["json", "csv", "both"],
                            help="artifact family to write under --out")

    p_survival = sub.add_parser("survival", help="exploit-age survival curve (CSV)")
    _add_data_flags(p_survival)
    p_survival.add_argument("--products", default="all",
                            help="'all' or comma list of vendor/name to restrict the CVE sample")
    p_survival.add_argument("--kk-only", action="store_true",
                            help="keep only CVEs first exploited at or after publication")
    p_survival.add_argument("--include-unexploited", action="store_true",
                            help="add never-exploited CVEs as censored at the horizon end")
    p_survival.add_argument("--tie-rule", default="inclusive", choices=["inclusive", "exclusive"],
                            help="same-month tie handling for --kk-only")
    p_survival.add_argument("--out", default=None, help="directory for survival.csv")
    p_survival.add_argument("--format", default="both", choices=["json", "csv", "both"],
                            help="artifact family to write under --out")

    p_report = sub.add_parser("report", help="full run: evaluate + classify + survival + manifest")
    _add_data_flags(p_report)
    p_report.add_argument("--strategies", default=DEFAULT_STRATEGIES,
                          help="comma list of name[:delay] with names immediate, planned, reactive, informed")
    p_report.add_argument("--scenarios", default=DEFAULT_SCENARIOS,
                          help="comma list of update-first (optimistic) and/or apt-first (pessimistic)")
    p_report.add_argument("--baseline", default="immediate@update-first",
                          help="odds baseline as strategy[:delay][@scenario]")
    p_report.add_argument("--reactive-pick", default="first", choices=["first", "latest"],
                          help="which escaping release a reactive update installs")
    p_report.add_argument("--tie-rule", default="inclusive", choices=["inclusive", "exclusive"],
                          help="same-month tie handling in lifecycle classification")
    p_report.add_argument("--out", required=True, help="output directory (required)")
    p_report.add_argument("--format", default="both", choices=["json", "csv", "both"],
                          help="artifact family to write under --out")
    return parser


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    path = Path(args.config)
    try:
        values = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"config file {path}: {exc}") from exc
    if not isinstance(values, dict):
        raise UsageError(f"config file {path}: top-level value must be an object")
    explicit = {a.lstrip("-").split("=")[0].replace("-", "_") for a in argv if a.startswith("--")}
    for key, value in values.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"config file {path}: unknown option {key!r}")
        if not isinstance(value, (str, int, float, bool)):
            raise UsageError(f"config file {path}: option {key!r} must be a scalar")
        if attr in explicit or attr == "config":
            continue
        setattr(args, attr, value)
    return args


class UsageError(Exception):
    pass


def _load(args: argparse.Namespace) -> Catalog:
    missing = [name for name in ("releases", "vulns", "campaigns") if not getattr(args, name)]
    if missing:
        raise UsageError(
            f"missing dataset path(s): {', '.join('--' + m for m in missing)} "
            f"(or set ${DATA_DIR_ENV})"
        )
    horizon = Horizon.from_strings(args.epoch, args.horizon)
    return load_catalog(args.releases, args.vulns, args.campaigns, horizon)


# ---------------------------------------------------------------------------
# Artifact rendering (all file output funnels through emit_files)


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def emit_files(files: dict[str, str], out_dir, formats: str = "both") -> dict[str, str]:
    """Write named artifacts deterministically; returns {name: sha256}.

    `files` maps file names to full text content. The format selector drops
    whole families: 'json' keeps .json files only, 'csv' keeps .csv only.
    A manifest.json with content digests is always written.
    """
    if not files:
        raise ValueError("no artifacts to write")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from exc
    selected = {
        name: text
        for name, text in files.items()
        if formats == "both"
        or (formats == "json" and name.endswith(".json"))
        or (formats == "csv" and name.endswith(".csv"))
    }
    manifest = {name: _digest(text.encode("utf-8")) for name, text in sorted(selected.items())}
    for name, text in sorted(selected.items()):
        try:
            (out / name).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot write {out / name}: {exc}") from exc
    manifest_text = json.dumps({"tool": "patchsim", "files": manifest}, indent=2, sort_keys=True) + "\n"
    (out / "manifest.json").write_text(manifest_text, encoding="utf-8")
    return manifest


def emit_report(reports: list[EvaluationReport], catalog: Catalog, out_dir, formats: str = "both") -> dict[str, str]:
    """Write evaluation artifacts (JSON report, CSV table, monthly series)."""
    if not reports:
        raise ValueError("no reports to emit")
    return emit_files(_evaluation_files(reports, catalog), out_dir, formats)


def _evaluation_files(reports: list[EvaluationReport], catalog: Catalog) -> dict[str, str]:
    payload = [report_to_dict(r, catalog) for r in reports]
    eval_json = json.dumps(payload, indent=2, sort_keys=True) + "\n"

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["strategy", "delay_months", "scenario", "updates_raw", "updates_net",
                     "probability_percent", "odds_vs_baseline"])
    for r in reports:
        writer.writerow([
            r.config.kind.value,
            r.config.delay_months,
            r.scenario.value,
            r.updates_raw,
            r.updates_net,
            percent_1dp(r.overall),
            "" if r.odds_vs_baseline is None else f"{r.odds_vs_baseline:.3f}",
        ])
    eval_csv = buf.getvalue()

    buf = io.StringIO()
    writer = csv.writer(buf)
    labels = [f"{r.config.label}@{r.scenario.value}" for r in reports]
    writer.writerow(["month", "date"] + labels)
    for m in range(catalog.horizon.n_months):
        row = [m, catalog.horizon.format(m)]
        for r in reports:
            p = r.monthly[m]
            row.append("" if p is None else percent_1dp(p))
        writer.writerow(row)
    series_csv = buf.getvalue()

    return {"evaluate.json": eval_json, "evaluate.csv": eval_csv, "series.csv": series_csv}


def _classify_files(catalog: Catalog, tie_rule: TieRule) -> dict[str, str]:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["apt", "date", "classes", "cve_scenarios"])
    for campaign in catalog.campaigns:
        groups = classify_campaign(campaign, catalog, tie_rule)
        scenarios = campaign_scenarios(campaign, catalog, tie_rule)
        writer.writerow([
            campaign.apt_name,
            catalog.horizon.format(campaign.start_month),
            "|".join(sorted(groups, key=("KK", "KU", "UU").index)),
            "|".join(f"{cve}={scenario.value}" for cve, scenario in sorted(scenarios.items())),
        ])
    venn = json.dumps(venn_counts(catalog, tie_rule), indent=2, sort_keys=True) + "\n"
    return {"classify.csv": buf.getvalue(), "venn.json": venn}


def _survival_files(catalog: Catalog, args: argparse.Namespace) -> dict[str, str]:
    tie_rule = TieRule(args.tie_rule)
    samples = exploit_ages(
        catalog,
        include_unexploited=args.include_unexploited,
        kk_only=args.kk_only,
        tie_rule=tie_rule,
    )
    products = args.products.strip()
    if products != "all":
        keys = set()
        for token in products.split(","):
            vendor, _, name = token.strip().partition("/")
            if not name:
                raise UsageError(f"--products entries must look like vendor/name, got {token!r}")
            keys.add((vendor, name))
        unknown = keys - set(catalog.timelines)
        if unknown:
            raise UsageError(f"unknown products: {sorted(unknown)}")
        wanted = {
            cve
            for cve, vuln in catalog.vulns.items()
            if any(pc.key in keys for pc in vuln.affected)
        }
        samples = [s for s in samples if s.cve_id in wanted]
    if not samples:
        raise DataError("no exploit-age samples under the given filters")
    curve = kaplan_meier(samples)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["age_months", "survival"])
    for t, s in curve.points:
        writer.writerow([t, f"{float(s):.6f}"])
    return {"survival.csv": buf.getvalue()}


# ---------------------------------------------------------------------------
# Subcommand drivers


def _print_table(reports: list[EvaluationReport], out) -> None:
    by_config: dict[StrategyConfig, dict[Scenario, EvaluationReport]] = {}
    for r in reports:
        by_config.setdefault(r.config, {})[r.scenario] = r
    rows = [("Interval", "Strategy", "#Updates", "Prob.", "Odds")]
    for config, per_scenario in by_config.items():
        interval = "/" if config.delay_months == 0 else f"{config.delay_months} mo"
        ordered = [per_scenario[s] for s in (Scenario.UPDATE_FIRST, Scenario.APT_FIRST) if s in per_scenario]
        prob = "-".join(percent_1dp(r.overall) for r in ordered) + "%"
        odds = "-".join(
            "n/a" if r.odds_vs_baseline is None else f"{r.odds_vs_baseline:.1f}x" for r in ordered
        )
        rows.append((interval, config.kind.value, str(ordered[0].updates_raw), prob, odds))
    widths = [max(len(row[i]) for row in rows) for i in range(5)]
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip(), file=out)


def _cmd_validate(args: argparse.Namespace) -> int:
    catalog = _load(args)
    violations = validate_catalog(catalog)
    for v in violations:
        print(f"{v.entity}: {v.rule}" + (f" ({v.detail})" if v.detail else ""))
    diag = catalog_diagnostics(catalog)
    dead = diag["constraints_matching_no_release"]
    if dead:
        print(f"note: {len(dead)} constraint(s) match no cataloged release", file=sys.stderr)
    if violations:
        return 1
    print(f"ok: {diag['products']} products, {diag['vulns']} CVEs, {diag['campaigns']} campaigns")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    catalog = _load(args)
    configs = parse_strategies(args.strategies, args.reactive_pick)
    scenarios = parse_scenarios(args.scenarios)
    baseline = parse_baseline(args.baseline, args.reactive_pick)
    reports = evaluate(catalog, configs, scenarios, baseline)
    _print_table(reports, sys.stdout)
    if args.out:
        emit_report(reports, catalog, args.out, args.format)
    return 0


def _cmd_classify(args: argparse.Namespace) -> int:
    catalog = _load(args)
    files = _classify_files(catalog, TieRule(args.tie_rule))
    if args.out:
        emit_files(files, args.out, args.format)
    else:
        sys.stdout.write(files["classify.csv"])
        sys.stdout.write(files["venn.json"])
    return 0


def _cmd_survival(args: argparse.Namespace) -> int:
    catalog = _load(args)
    files = _survival_files(catalog, args)
    if args.out:
        emit_files(files, args.out, args.format)
    else:
        sys.stdout.write(files["survival.csv"])
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    catalog = _load(args)
    configs = parse_strategies(args.strategies, args.reactive_pick)
    scenarios = parse_scenarios(args.scenarios)
    baseline = parse_baseline(args.baseline, args.reactive_pick)
    tie_rule = TieRule(args.tie_rule)
    reports = evaluate(catalog, configs, scenarios, baseline)
    files = _evaluation_files(reports, catalog)
    files.update(_classify_files(catalog, tie_rule))
    survival_args = argparse.Namespace(
        tie_rule=args.tie_rule, products="all", kk_only=False, include_unexploited=False
    )
    files.update(_survival_files(catalog, survival_args))
    files["diagnostics.json"] = json.dumps(catalog_diagnostics(catalog), indent=2, sort_keys=True) + "\n"
    emit_files(files, args.out, args.format)
    _print_table(reports, sys.stdout)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "evaluate": _cmd_evaluate,
    "classify": _cmd_classify,
    "survival": _cmd_survival,
    "report": _cmd_report,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    try:
        args = _apply_config_file(args, parser, argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
