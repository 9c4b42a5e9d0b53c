"""Process-level configuration for the segmentation harness."""
import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv


BASE_DIR = Path(__file__).parent
ENV_FILE = BASE_DIR / '.env'

load_dotenv(ENV_FILE)

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


class Config:
    """Application configuration."""

    RUNS_DIR: Path = Path(os.getenv('HIPERFORMER_RUNS_DIR', 'runs'))
    LOG_LEVEL: str = os.getenv('HIPERFORMER_LOG_LEVEL', 'INFO').upper()
    SEED: int = int(os.getenv('HIPERFORMER_SEED', '0'))
    NUM_WORKERS: int = int(os.getenv('HIPERFORMER_NUM_WORKERS', '4'))
    EXPERIMENT_FILE: Optional[str] = os.getenv('HIPERFORMER_CONFIG') or None

    @classmethod
    def validate_runs_dir(cls) -> bool:
        """Check that the runs directory exists or can be created."""
        try:
            cls.RUNS_DIR.mkdir(parents=True, exist_ok=True)
        except OSError:
            return False
        return os.access(cls.RUNS_DIR, os.W_OK)

    @classmethod
    def validate_log_level(cls) -> bool:
        """Check that the log level is a standard logging level name."""
        return cls.LOG_LEVEL in LOG_LEVELS

    @classmethod
    def run_dir(cls, name: str) -> Path:
        """Directory of the named run under RUNS_DIR."""
        return cls.RUNS_DIR / name

    @classmethod
    def configure_logging(cls) -> None:
        """Configure the root logger once from LOG_LEVEL."""
        level = cls.LOG_LEVEL if cls.validate_log_level() else 'INFO'
        logging.basicConfig(
            level=getattr(logging, level),
            format='%(asctime)s %(levelname)s %(name)s: %(message)s'
        )


config = Config()
