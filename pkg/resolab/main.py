# resolab/main.py
import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from resolab import reports
from resolab.config import get_settings, load_experiment_config
from resolab.errors import (
    EXIT_CONFIG_ERROR,
    EXIT_GATE_FAILURE,
    EXIT_OK,
    ConfigError,
    ConfigurationError,
    ContourError,
    GateFailure,
    ParameterError,
)
from resolab.pipelines import COMMANDS, CommandResult, ensure_passed

logger = logging.getLogger("resolab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resolab",
        description="Carleman constants, Mellin checks and weighted resolvent sweeps.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="experiment TOML file")
    parser.add_argument("--out", type=Path, default=None, help="output directory (default: [output].directory)")
    parser.add_argument("--threads", type=int, default=None, help="worker threads for sweep rows")
    return parser


def configure_logging() -> None:
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format=settings.LOG_FORMAT,
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def write_artifacts(out: Path, result: CommandResult, formats) -> list[Path]:
    written = [reports.write_json(out / "report.json", result.report)]
    if "json" in formats:
        written += [reports.write_json(out / name, obj) for name, obj in result.json_files.items()]
    if "csv" in formats:
        written += [reports.write_csv(out / name, frame) for name, frame in result.csv_files.items()]
    if "gp" in formats and result.plot:
        written.append(reports.write_plot_script(out / "plot.gp"))
    return written


def _print_summary(result: CommandResult) -> None:
    report = result.report
    payload = report.payload
    if report.command in ("constants",):
        print(f"K = {payload['K']:.12g}, M = {payload['M']:.12g}, h0 = {payload['h0']:.12g}, b = {payload['b']:.12g}")
    if report.command == "sweep":
        print(
            f"C3 slope = {payload.get('C3_slope')}, exterior exponent = {payload.get('ext_exponent')}, "
            f"R2 = ({payload.get('R2_full')}, {payload.get('R2_ext')})"
        )
    print(f"{report.command}: {'pass' if report.passed else 'FAIL'} (config {report.config_hash[:12]})")


def run(command: str, config_path: Path, out: Optional[Path] = None, threads: Optional[int] = None) -> int:
    """Execute one command; returns the process exit status."""
    try:
        cfg = load_experiment_config(config_path)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG_ERROR

    threads = threads if threads is not None else get_settings().THREADS
    out = out if out is not None else Path(cfg.output.directory)
    logger.info("running %s with %s", command, config_path)
    try:
        result = COMMANDS[command](cfg, threads)
    except (ParameterError, ConfigurationError, ContourError) as exc:
        logger.error("%s rejected the configuration: %s", command, exc)
        return EXIT_CONFIG_ERROR

    write_artifacts(out, result, cfg.output.formats)
    _print_summary(result)
    try:
        ensure_passed(result)
    except GateFailure as exc:
        logger.warning("%s; see %s", exc, out / "report.json")
        return EXIT_GATE_FAILURE
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    return run(args.command, args.config, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
