"""
Command line
simulate, decode and analyze sub-commands over the pipeline.
"""
import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

from config import ConfigError, load_config, load_scenario
from integrity import REPORT_COLUMNS, integrity_report
from ldpc6481 import LdpcError
from pipeline import EXIT_CONFIG, EXIT_NO_SIGNAL, EXIT_OK, run_decode, run_simulate, write_decode_products
from pppmsg import SchemaError
from prncode import CodeTableError
from results_store import (
    PRODUCT_CORRECTIONS,
    PRODUCT_DEVIATIONS,
    PRODUCT_INTEGRITY,
    PRODUCT_MESSAGES,
    PRODUCT_SCHEDULE,
    detect_product,
    product_path,
    read_jsonl,
    write_csv,
)
from rfchain import SampleFormatError, ScenarioError
from schedule import analyze_schedule
from utils import export_to_excel, format_epoch, format_number, format_percentage

_logger = logging.getLogger(__name__)

LOAD_ERRORS = (ConfigError, ScenarioError, SchemaError, CodeTableError, LdpcError, SampleFormatError)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the configuration status."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _prn_list(text):
    try:
        return [int(p) for p in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"PRN list must be integers, got {text!r}") from None


def build_parser():
    parser = _Parser(prog="b2b", description="PPP-B2b signal simulation, decoding and analysis")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="write a sample file and its truth for a scenario")
    sim.add_argument("--scenario", required=True, type=Path)
    sim.add_argument("--config", type=Path)
    sim.add_argument("--seed", required=True, type=int)
    sim.add_argument("--out", required=True, type=Path, help="output prefix")

    dec = sub.add_parser("decode", help="decode a sample file or symbol dump")
    dec.add_argument("--in", dest="input", required=True, type=Path)
    dec.add_argument("--config", type=Path)
    dec.add_argument("--out", required=True, type=Path, help="output prefix")
    dec.add_argument("--prn", type=_prn_list, help="PRNs to search, e.g. 59,60,61")
    dec.add_argument("--itr-max", type=int, dest="itr_max")
    dec.add_argument("--workers", type=int)
    dec.add_argument("--dump-symbols", action="store_true", help="also write tracked symbols")

    ana = sub.add_parser("analyze", help="schedule and integrity reports from decoded products")
    ana.add_argument("--in", dest="inputs", required=True, type=Path, action="append")
    ana.add_argument("--out", required=True, type=Path, help="output prefix")
    ana.add_argument("--window", nargs=2, type=int, metavar=("START", "END"), help="epoch range for integrity")
    ana.add_argument("--xlsx", action="store_true", help="also write an Excel workbook")
    return parser


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def cmd_simulate(args):
    config = load_config(args.config)
    tables = config.load_tables()
    spec = load_scenario(args.scenario, tables.codes)
    result = run_simulate(spec, tables, args.seed, args.out)
    _logger.info(
        "Simulated %s samples, %d frames per source",
        format_number(result.sample_count), len(result.transmission.messages),
    )
    return EXIT_OK


def cmd_decode(args):
    config = load_config(args.config).with_overrides(itr_max=args.itr_max, workers=args.workers)
    tables = config.load_tables()
    if not args.input.exists():
        raise ConfigError(f"input {args.input} does not exist")
    result = run_decode(config, tables, args.input, args.prn)
    report_path = write_decode_products(result, args.out, args.dump_symbols)
    report = result.report
    for prn, channel in sorted(report.channels.items()):
        if channel.detected:
            _logger.info(
                "PRN %d: %d frames, %d LDPC ok, %d CRC ok",
                prn, channel.frames_found, channel.frames_ldpc_converged, channel.frames_crc_passed,
            )
    _logger.info("Iterations %s; report %s", report.iteration_histogram, report_path)
    if report.exit_code == EXIT_NO_SIGNAL:
        _logger.warning("No frame decoded from %s", args.input)
    return report.exit_code


def load_products(paths):
    """Concatenated message dumps and correction streams from the inputs."""
    messages, corrections = [], []
    for path in paths:
        frame = read_jsonl(path)
        if frame.empty:
            _logger.warning("%s is empty", path)
            continue
        product = detect_product(frame)
        if product == PRODUCT_MESSAGES:
            messages.append(frame)
        elif product == PRODUCT_CORRECTIONS:
            corrections.append(frame)
        else:
            _logger.warning("%s is neither a message dump nor a correction stream; skipped", path)
    messages = pd.concat(messages, ignore_index=True) if messages else pd.DataFrame()
    corrections = pd.concat(corrections, ignore_index=True) if corrections else pd.DataFrame()
    return messages, corrections


def cmd_analyze(args):
    messages, corrections = load_products(args.inputs)
    if messages.empty and corrections.empty:
        _logger.warning("Nothing to analyze; writing empty reports")
    schedule = analyze_schedule(messages[["time", "source_prn", "mestype", "epoch"]] if not messages.empty else [])
    summary = schedule.summary_frame()
    deviations = schedule.deviation_frame()
    integrity = integrity_report(corrections, args.window) if not corrections.empty \
        else pd.DataFrame(columns=REPORT_COLUMNS)

    write_csv(summary, product_path(args.out, PRODUCT_SCHEDULE, ".csv"))
    write_csv(deviations, product_path(args.out, PRODUCT_DEVIATIONS, ".csv"))
    write_csv(integrity, product_path(args.out, PRODUCT_INTEGRITY, ".csv"))
    if args.xlsx:
        export_to_excel(
            {"schedule": summary, "deviations": deviations, "integrity": integrity},
            product_path(args.out, "analysis", ".xlsx"),
        )
    for rule, count in deviations.groupby("rule").size().items() if not deviations.empty else []:
        _logger.warning("Rule %d: %d deviation(s)", rule, count)
    for row in integrity.itertuples():
        _logger.info(
            "%s %02d %s-%s: orbit %s, clock %s",
            row.system, row.prn, format_epoch(row.epoch_start), format_epoch(row.epoch_end),
            format_percentage(row.orbit_completeness), format_percentage(row.clock_completeness),
        )
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "decode": cmd_decode, "analyze": cmd_analyze}


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        return COMMANDS[args.command](args)
    except ScenarioError as e:
        for problem in e.problems:
            _logger.error("Scenario: %s", problem)
        return EXIT_CONFIG
    except LOAD_ERRORS as e:
        _logger.error("%s", e)
        return EXIT_CONFIG
