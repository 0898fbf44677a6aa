"""Command line entry point.

Exit codes: 0 every country succeeded, 1 some countries failed, 2 bad config
or data, or no country succeeded.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError, RunConfig, load_config
from .edr import write_ranking_csv
from .ingest import IngestError, parse_wide_csv, write_wide_csv
from .pipeline import StageError, rank_country, run_all, slugify

EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2

log = logging.getLogger("panelcast")


def _setup_logging() -> None:
    level = os.environ.get("PANELCAST_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load(args) -> RunConfig:
    config = load_config(args.config)
    changes = {}
    if getattr(args, "output", None):
        changes["output_dir"] = Path(args.output)
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "country", None):
        changes["countries"] = tuple(args.country)
    return dataclasses.replace(config, **changes) if changes else config


def _status(rows) -> int:
    ok = sum(r["status"] == "ok" for r in rows)
    if ok == 0:
        return EXIT_FATAL
    return EXIT_OK if ok == len(rows) else EXIT_PARTIAL


def _print_summary(rows) -> None:
    for r in rows:
        if r["status"] == "ok":
            print(f"{r['country']}: train {r['train_mape']:.2f}%  test {r['test_mape']:.2f}%  "
                  f"({r['band']})  mean future {r['mean_future'] if r['mean_future'] is None else round(r['mean_future'], 4)}")
        else:
            print(f"{r['country']}: ERROR {r['error']}")


def cmd_run(args, simulate: bool = True) -> int:
    config = _load(args)
    rows, _ = run_all(config, simulate=simulate)
    _print_summary(rows)
    print(f"artifacts in {config.output_dir}")
    return _status(rows)


def cmd_evaluate(args) -> int:
    return cmd_run(args, simulate=False)


def cmd_rank(args) -> int:
    config = _load(args)
    table = parse_wide_csv(config.data_path)
    failures = 0
    for country in config.countries:
        try:
            ranking = rank_country(config, country, table)
        except StageError as exc:
            log.error("%s", exc)
            print(f"{country}: ERROR {exc}")
            failures += 1
            continue
        out = Path(config.output_dir) / slugify(country)
        out.mkdir(parents=True, exist_ok=True)
        write_ranking_csv(ranking, out / "ranking.csv")
        top = ", ".join(ranking.ids()[:config.edr.k])
        print(f"{country}: {top}")
    if failures == len(config.countries):
        return EXIT_FATAL
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import COUNTRIES, TARGET_CODE, make_synthetic_panel

    panel = make_synthetic_panel(n_countries=args.countries, n_predictors=args.predictors, seed=args.seed)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_wide_csv(panel.table, out / "panel.csv")
    names = [COUNTRIES[c] if c < len(COUNTRIES) else f"Country {c + 1}" for c in range(args.countries)]
    (out / "config.toml").write_text(
        'data_path = "panel.csv"\n'
        f"countries = [{', '.join(repr(n).replace(chr(39), chr(34)) for n in names)}]\n"
        f'target_code = "{TARGET_CODE}"\n'
        'output_dir = "out"\n',
        encoding="utf-8",
    )
    print(f"wrote {out / 'panel.csv'} and {out / 'config.toml'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panelcast", description="Indicator-panel forecasting pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--country", action="append", help="restrict to this country (repeatable)")
        p.add_argument("--output", help="override output_dir")
        p.add_argument("--seed", type=int, help="override seed")
        return p

    with_config(sub.add_parser("run", help="full pipeline with 5-year forecast")).set_defaults(func=cmd_run)
    with_config(sub.add_parser("evaluate", help="fit and evaluate, no future simulation")).set_defaults(
        func=cmd_evaluate)
    with_config(sub.add_parser("rank", help="EDR predictor ranking only")).set_defaults(func=cmd_rank)

    synth = sub.add_parser("synth", help="write a synthetic demo panel and config")
    synth.add_argument("--output", required=True)
    synth.add_argument("--countries", type=int, default=6)
    synth.add_argument("--predictors", type=int, default=40)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IngestError, OSError) as exc:
        print(f"panelcast: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
