"""Command-line entry point: command registry, logging setup and signal handling."""

import argparse
import json
import logging
import os
import signal
import sys
from typing import Optional

from commands.base import BaseCommand, report_error
from commands.evaluate import EvaluateCommand
from commands.gen_data import GenDataCommand
from commands.reconstruct import ReconstructCommand
from commands.spectrogram import SpectrogramCommand
from commands.synth_audio import SynthAudioCommand
from commands.train_ae import TrainAutoencoderCommand
from commands.train_recon import TrainReconstructionCommand
from config import ledger_path, load_settings, parse_config
from errors import UsageError
from state import ArtifactLedger

logger = logging.getLogger(__name__)

COMMAND_REGISTRY: dict[str, type[BaseCommand]] = {
    "gen-data": GenDataCommand,
    "synth-audio": SynthAudioCommand,
    "spectrogram": SpectrogramCommand,
    "train-ae": TrainAutoencoderCommand,
    "train-recon": TrainReconstructionCommand,
    "eval": EvaluateCommand,
    "reconstruct": ReconstructCommand,
}

_shutdown = False


def _handle_signal(signum, frame):
    global _shutdown
    logger.info("Received signal %d, stopping after the current epoch...", signum)
    _shutdown = True


def shutdown_requested() -> bool:
    return _shutdown


class JsonFormatter(logging.Formatter):
    def format(self, record):
        log_obj = {
            "timestamp": self.formatTime(record),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            log_obj["exception"] = self.formatException(record.exc_info)
        return json.dumps(log_obj)


def configure_logging() -> None:
    log_level = os.environ.get("LOG_LEVEL", "INFO").upper()
    log_format = os.environ.get("LOG_FORMAT", "text").lower()
    level = getattr(logging, log_level, logging.INFO)

    if log_format == "json":
        handler = logging.StreamHandler()
        handler.setFormatter(JsonFormatter())
        logging.root.handlers = [handler]
        logging.root.setLevel(level)
    else:
        logging.basicConfig(level=level, format="%(asctime)s [%(levelname)s] %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="voxrecon", description="Audio-visual voxel reconstruction pipeline")
    parser.add_argument("command", choices=sorted(COMMAND_REGISTRY))
    parser.add_argument("--config", default=os.environ.get("CONFIG_PATH"), help="key=value run config file")
    parser.add_argument("--out", default=None, help="output directory (default: out/<command>)")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--threads", type=int, default=None, help="overrides the config thread count")
    parser.add_argument("--force", action="store_true", help="rerun even if the output is up to date")
    parser.add_argument("--csv", action="store_true", help="spectrogram: also write CSV dumps")
    return parser


def dispatch(argv: Optional[list[str]] = None) -> int:
    """Parse arguments, run one command, return its exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return report_error("cli", UsageError("bad command line")) if exc.code else 0

    overrides = {key: getattr(args, key) for key in ("seed", "threads") if getattr(args, key) is not None}
    try:
        config = parse_config(args.config, overrides)
    except Exception as exc:
        return report_error(args.command, exc)

    out_dir = args.out or os.path.join("out", args.command)
    ledger = ArtifactLedger(ledger_path())
    try:
        command = COMMAND_REGISTRY[args.command](
            config,
            out_dir,
            force=args.force,
            ledger=ledger,
            should_stop=shutdown_requested,
            csv=args.csv,
        )
        logger.info(
            "Running %s (config=%s, out=%s, seed=%d, threads=%d)",
            args.command, args.config or "<defaults>", out_dir, config.seed, config.threads,
        )
        return command.safe_run()
    finally:
        ledger.close()


def main() -> None:
    load_settings(os.environ.get("ENV_PATH", ".env"))
    configure_logging()
    signal.signal(signal.SIGTERM, _handle_signal)
    signal.signal(signal.SIGINT, _handle_signal)
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
