"""Abstract base command: idempotent execution, resolved-config capture and exit codes."""

import logging
import sys
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Callable, Optional

from config import RunConfig, dump_config
from errors import ReconstructionError
from network.model import ReconstructionNetwork, build_model
from state import ArtifactLedger, atomic_write_text

logger = logging.getLogger(__name__)

RESOLVED_CONFIG_NAME = "resolved_config.cfg"
EXIT_OK = 0
EXIT_IO = 5


def error_line(command: str, category: str, detail: str) -> str:
    """The single machine-parsable stderr line for a failed command."""
    detail = " ".join(str(detail).split())
    return f"error category={category} command={command} detail={detail}"


def report_error(command: str, exc: BaseException) -> int:
    """Print the error line for `exc` and return the exit code it maps to."""
    if isinstance(exc, ReconstructionError):
        category, code = exc.category, exc.exit_code
    elif isinstance(exc, OSError):
        category, code = "io", EXIT_IO
    else:
        category, code = "internal", 1
    print(error_line(command, category, exc), file=sys.stderr)
    return code


def build_network(config: RunConfig) -> ReconstructionNetwork:
    return build_model(
        config.variant,
        config.encoder_config(),
        config.decoder3d_config(),
        config.fusion_config(),
        dec2d=config.decoder2d_config(),
        seed=config.seed,
    )


class BaseCommand(ABC):
    """One pipeline stage. Subclasses set `name`, `required_keys` and `artifact_name`."""

    name: str = ""
    required_keys: tuple[str, ...] = ()
    artifact_name: str = ""

    def __init__(
        self,
        config: RunConfig,
        out_dir: Path,
        force: bool = False,
        ledger: Optional[ArtifactLedger] = None,
        should_stop: Optional[Callable[[], bool]] = None,
        csv: bool = False,
    ):
        self.config = config
        self.out_dir = Path(out_dir)
        self.force = force
        self.ledger = ledger
        self.should_stop = should_stop or (lambda: False)
        self.csv = csv

    @property
    def artifact(self) -> Path:
        """The output whose presence marks the command as done."""
        return self.out_dir / self.artifact_name

    @property
    def digest(self) -> str:
        return self.config.digest()

    def is_up_to_date(self) -> bool:
        if self.force or not self.artifact.exists():
            return False
        if self.ledger is None:
            return True
        return self.ledger.is_complete(self.name, str(self.artifact), self.digest)

    @abstractmethod
    def run(self) -> None:
        """Produce the command's artifacts. Subclasses must implement."""
        ...

    def execute(self) -> bool:
        """Run unless already complete; returns False when skipped."""
        self.config.require(*self.required_keys)
        if self.is_up_to_date():
            logger.info("%s: %s already up to date, skipping (use --force to rerun)", self.name, self.artifact)
            return False
        self.out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_text(self.out_dir / RESOLVED_CONFIG_NAME, dump_config(self.config))
        self.run()
        if self.ledger is not None:
            self.ledger.mark_complete(self.name, str(self.artifact), self.digest)
        logger.info("%s: done, wrote %s", self.name, self.artifact)
        return True

    def safe_run(self) -> int:
        """Wrap execute() with error handling. Returns the process exit code."""
        try:
            self.execute()
            return EXIT_OK
        except (ReconstructionError, OSError) as exc:
            logger.debug("%s failed", self.name, exc_info=True)
            return report_error(self.name, exc)
        except Exception as exc:
            logger.exception("%s: unexpected failure", self.name)
            return report_error(self.name, exc)
