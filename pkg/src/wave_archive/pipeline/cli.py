"""Command line entry point: ``wave-archive <command> ...``"""

import argparse
import json
import logging
import sys
from datetime import date
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import pandas as pd

from ..catalog import CatalogKind, StudyFilter, query_frame, summarize
from ..catalog.visualizer import ArchiveVisualizer
from ..extract.bundle import parse_extract_day, validate_row_counts
from ..extract.manifest import verify_bundle
from ..synthgen import ScenarioConfig, generate_corpus, write_bed_units
from ..utils.config import PipelineConfig
from ..utils.errors import IntegrityFailure, PhaseFailure, WaveArchiveError
from ..utils.utils import dump_json, format_ts, parse_day, utc
from .runner import ArchivePipeline
from .state import Phase

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_PARTIAL = 2

DEFAULT_CONFIG = "config/pipeline.yaml"

logger = logging.getLogger(__name__)


def _emit(args: argparse.Namespace, payload: Any, text: str) -> None:
    sys.stdout.write(dump_json(payload) if args.json else text.rstrip("\n") + "\n")


def _require_day(args: argparse.Namespace) -> date:
    if args.day is None:
        raise SystemExit("error: --day is required for this command")
    return args.day


def _pipeline(args: argparse.Namespace) -> ArchivePipeline:
    return ArchivePipeline(PipelineConfig.load(args.config))


def cmd_synth(args: argparse.Namespace) -> int:
    scenario = ScenarioConfig.load(args.scenario)
    out = Path(args.out)
    generated = generate_corpus(scenario, out)
    if args.bed_units:
        write_bed_units(Path(args.bed_units), scenario)
    days = [{"day": truth.day.isoformat(), "bundle": str(path), "patients": len(truth.patients),
             "stays": len(truth.segments)} for path, truth in generated]
    _emit(args, {"days": days}, "\n".join(f"{d['day']}: {d['patients']} patients, {d['stays']} stays -> "
                                          f"{d['bundle']}" for d in days))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    day = _require_day(args)
    if args.bundle:
        bundle_dir = Path(args.bundle)
    else:
        bundle_dir = PipelineConfig.load(args.config).extracts_root / day.isoformat()
    try:
        verified = verify_bundle(bundle_dir, day)
        report = validate_row_counts(parse_extract_day(verified))
    except IntegrityFailure as e:
        _emit(args, {"ok": False, "kind": e.kind, "file_name": e.file_name, "error": str(e)},
              f"FAILED {e.file_name}: {e}")
        return EXIT_FAILED
    except WaveArchiveError as e:
        _emit(args, {"ok": False, "error_type": type(e).__name__, "error": str(e)}, f"FAILED: {e}")
        return EXIT_FAILED
    ok = report.ok is not False
    _emit(args, {"ok": ok, "counts": report.to_dict()},
          "OK" if ok else f"FAILED row counts: {', '.join(report.mismatched())}")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_run_day(args: argparse.Namespace) -> int:
    day = _require_day(args)
    stop_after = Phase(args.stop_after) if args.stop_after else None
    try:
        state = _pipeline(args).run_day(day, stop_after=stop_after, console=not args.json)
    except PhaseFailure as e:
        _emit(args, {"day": day.isoformat(), "phase": e.phase, "error_type": type(e.cause).__name__,
                     "message": str(e.cause)}, f"FAILED in {e.phase}: {e.cause}")
        return EXIT_FAILED
    _emit(args, state.to_dict(), f"{day.isoformat()}: {state.phase.value if state.phase else 'not started'}")
    return EXIT_OK if state.published or stop_after is not None else EXIT_PARTIAL


def cmd_run_range(args: argparse.Namespace) -> int:
    summary = _pipeline(args).run_range(parse_day(args.day_from), parse_day(args.day_to), args.parallelism)
    lines = [f"{o.day.isoformat()}: {o.status}" + (f" ({o.phase}: {o.error['message']})" if o.error else "")
             for o in summary.outcomes]
    _emit(args, summary.to_dict(), "\n".join(lines) or "no days in range")
    return summary.exit_code


def _study_filter(args: argparse.Namespace) -> StudyFilter:
    time_range = None
    if args.time_from or args.time_to:
        if not (args.time_from and args.time_to):
            raise SystemExit("error: --from and --to go together")
        time_range = (utc(args.time_from), utc(args.time_to))
    elif args.day is not None:
        start = utc(pd.Timestamp(args.day))
        time_range = (start, start + pd.Timedelta(days=1))
    return StudyFilter(patients=args.patient, beds=args.bed, units=args.unit,
                       time_range=time_range, wave_symbols=args.wave)


def cmd_query(args: argparse.Namespace) -> int:
    config = PipelineConfig.load(args.config)
    kind = CatalogKind.DEID if args.deid else CatalogKind.IDENTIFIED
    frame = query_frame(config.catalog_root, _study_filter(args), kind)
    frame = frame.assign(start=[format_ts(t) for t in frame["start"]], end=[format_ts(t) for t in frame["end"]])
    if args.json:
        sys.stdout.write(dump_json(frame.to_dict("records")))
    else:
        frame.to_csv(sys.stdout, index=False, lineterminator="\n")
    return EXIT_OK


def _birthdates(path: Optional[str]) -> Optional[Dict[str, date]]:
    if not path:
        return None
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    return {key: date.fromisoformat(value) for key, value in zip(frame.iloc[:, 0], frame["birth_date"])}


def cmd_stats(args: argparse.Namespace) -> int:
    config = PipelineConfig.load(args.config)
    kind = CatalogKind.DEID if args.deid else CatalogKind.IDENTIFIED
    stats = summarize(config.catalog_root, kind, _birthdates(args.birthdates))
    plots: List[str] = []
    if config.visualization.get("enabled"):
        save_dir = Path(args.plots) if args.plots else config.catalog_root / "reports" / kind.value
        plots = [str(p) for p in ArchiveVisualizer(config.visualization).create_visualizations(stats, save_dir)]
    payload = {**stats.to_dict(), "plots": plots}
    text = (f"days {stats.days}, studies {stats.studies}, patients {stats.patients}, "
            f"{stats.total_size_bytes} bytes\n" + stats.per_wave.to_string(index=False))
    _emit(args, payload, text)
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    try:
        audit = _pipeline(args).study_audit(args.study_id, args.day)
    except KeyError as e:
        print(f"error: {e.args[0]}", file=sys.stderr)
        return EXIT_FAILED
    if args.json:
        sys.stdout.write(dump_json(audit))
    else:
        study = audit["study"]
        sys.stdout.write(f"{study['study_id']} {study['start']} .. {study['end']} "
                         f"method {study['linkage_method']}\n")
        for row in audit["linkage"]:
            sys.stdout.write(json.dumps(row, sort_keys=True) + "\n")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    """Shared flags, accepted before or after the command name."""
    def default(value: Any) -> Any:
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--config", default=default(DEFAULT_CONFIG),
                        help=f"pipeline YAML (default {DEFAULT_CONFIG})")
    parser.add_argument("--day", type=parse_day, default=default(None), help="day to work on, YYYY-MM-DD")
    parser.add_argument("--json", action="store_true", default=default(False),
                        help="machine-readable output on stdout")
    parser.add_argument("--verbose", action="store_true", default=default(False),
                        help="debug logging to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wave-archive",
                                     description="Daily bedside-monitor waveform archive pipeline.")
    _add_common(parser, suppress=False)
    # subcommand copies must not reset values given before the command name
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, suppress=True)
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", parents=[common], help="generate a synthetic extract corpus")
    synth.add_argument("--scenario", required=True, help="scenario YAML")
    synth.add_argument("--out", required=True, help="extracts root to write bundles into")
    synth.add_argument("--bed-units", help="also write the bed,unit CSV of the generated beds")
    synth.set_defaults(handler=cmd_synth)

    verify = commands.add_parser("verify", parents=[common], help="check a bundle against its manifest and counts")
    verify.add_argument("--bundle", help="bundle directory (default: <extracts_root>/<day>)")
    verify.set_defaults(handler=cmd_verify)

    run_day = commands.add_parser("run-day", parents=[common], help="process one day")
    run_day.add_argument("--stop-after", choices=[p.value for p in Phase], help="stop once this phase is done")
    run_day.set_defaults(handler=cmd_run_day)

    run_range = commands.add_parser("run-range", parents=[common], help="process every day in a closed range")
    run_range.add_argument("--from", dest="day_from", required=True)
    run_range.add_argument("--to", dest="day_to", required=True)
    run_range.add_argument("--parallelism", type=int, help="days processed at once")
    run_range.set_defaults(handler=cmd_run_range)

    query = commands.add_parser("query", parents=[common], help="list catalog studies as CSV")
    query.add_argument("--patient", action="append", help="MRN, or pseudo id with --deid")
    query.add_argument("--bed", action="append")
    query.add_argument("--unit", action="append")
    query.add_argument("--wave", action="append", help="wave symbol the study must hold")
    query.add_argument("--from", dest="time_from", help="studies overlapping [from, to)")
    query.add_argument("--to", dest="time_to")
    query.add_argument("--deid", action="store_true", help="query the de-identified catalog")
    query.set_defaults(handler=cmd_query)

    stats = commands.add_parser("stats", parents=[common], help="archive summary")
    stats.add_argument("--deid", action="store_true")
    stats.add_argument("--birthdates", help="CSV of patient key and birth_date for the unit x age table")
    stats.add_argument("--plots", help="directory for summary plots")
    stats.set_defaults(handler=cmd_stats)

    audit = commands.add_parser("audit", parents=[common], help="linkage evidence behind one study")
    audit.add_argument("study_id")
    audit.set_defaults(handler=cmd_audit)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s', stream=sys.stderr)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except (WaveArchiveError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
