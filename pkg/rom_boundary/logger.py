import logging
from logging.handlers import RotatingFileHandler

from .config import get_settings


class RomLogger:
    """Singleton logger for the library and CLI"""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._init_logger()
        return cls._instance

    def _init_logger(self):
        settings = get_settings()

        log_dir = settings.log_dir
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = log_dir / 'rom_boundary.log'

        self.logger = logging.getLogger('RomBoundary')
        self.logger.setLevel(logging.DEBUG)

        # Prevent duplicate handlers
        if self.logger.handlers:
            return

        # File handler with rotation (10MB max, keep 5 backups)
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=10 * 1024 * 1024,
            backupCount=5,
            encoding='utf-8'
        )
        file_handler.setLevel(logging.DEBUG)

        console_handler = logging.StreamHandler()
        console_handler.setLevel(getattr(logging, settings.log_level))

        formatter = logging.Formatter(
            '[%(asctime)s] [%(levelname)s] %(name)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        file_handler.setFormatter(formatter)
        console_handler.setFormatter(formatter)

        self.logger.addHandler(file_handler)
        self.logger.addHandler(console_handler)

        self.debug(f"Logger initialized. Log file: {log_file}")

    def debug(self, message: str):
        self.logger.debug(message)

    def info(self, message: str):
        self.logger.info(message)

    def warning(self, message: str):
        self.logger.warning(message)

    def error(self, message: str, exc_info=False):
        self.logger.error(message, exc_info=exc_info)

    def log_command_start(self, command: str):
        self.info(f"Command started - {command}")

    def log_command_complete(self, command: str, exit_code: int, seconds: float):
        self.info(f"Command finished - {command}, exit code {exit_code}, {seconds:.2f}s")

    def log_training_start(self, m: int, dimension: int, nu: float, sigma: float):
        self.debug(f"Training started - m={m}, N={dimension}, nu={nu:g}, sigma={sigma:g}")

    def log_training_complete(self, n_sv: int, m: int, iterations: int, violation: float):
        self.debug(
            f"Training complete - SVs={n_sv}/{m} ({100.0 * n_sv / m:.2f}%), "
            f"updates={iterations}, max KKT violation={violation:.2e}"
        )

    def log_cell_evaluated(self, nu: float, sigma: float, accepted: bool, flags: str):
        self.debug(f"Cell nu={nu:.4g}, sigma={sigma:.4g} - {'accepted' if accepted else 'rejected'} [{flags}]")

    def log_tuning_round(self, round_index: int, cells: int, accepted: int, change=None):
        change_text = "n/a" if change is None else f"{change:.4f}"
        self.info(f"Tuning round {round_index} - cells={cells}, accepted={accepted}, boundary change={change_text}")

    def log_artifact_written(self, kind: str, path):
        self.info(f"{kind} written: {path}")

    def log_error_with_context(self, operation: str, error: Exception):
        """Log error with full context"""
        self.error(f"Error during {operation}: {str(error)}", exc_info=True)


# Global logger instance
logger = RomLogger()
