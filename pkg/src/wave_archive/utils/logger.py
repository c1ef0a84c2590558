import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

# Attributes every LogRecord carries; anything else came in through ``extra``.
_RESERVED = set(vars(logging.makeLogRecord({}))) | {"message", "asctime"}


class JsonLinesFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        entry: Dict[str, Any] = {
            "ts": datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        for key, value in vars(record).items():
            if key not in _RESERVED:
                entry[key] = value
        if record.exc_info:
            entry["exception"] = self.formatException(record.exc_info)
        return json.dumps(entry, default=str, sort_keys=True)


class RunLogger:
    """Per-day run logger: console lines plus ``run.jsonl`` under ``log_dir``."""

    def __init__(self, day: str, log_dir: Optional[Path] = None, console: bool = True):
        self.day = day
        self.phase: Optional[str] = None
        self.log_dir = log_dir
        self.logger = self._setup_logger(console)

    def _setup_logger(self, console: bool) -> logging.Logger:
        """
        Build a dedicated logger with its own handlers for this day.
        """
        logger = logging.getLogger(f"wave_archive.run.{self.day}")
        logger.setLevel(logging.DEBUG)
        logger.propagate = False
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()

        if self.log_dir is not None:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(self.log_dir / "run.jsonl", encoding="utf-8")
            file_handler.setFormatter(JsonLinesFormatter())
            logger.addHandler(file_handler)

        if console:
            console_handler = logging.StreamHandler()
            console_handler.setLevel(logging.INFO)
            console_handler.setFormatter(logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
            ))
            logger.addHandler(console_handler)

        return logger

    def _log(self, level: int, message: str, fields: Optional[Dict[str, Any]] = None) -> None:
        extra: Dict[str, Any] = {"day": self.day, "phase": self.phase}
        if fields:
            extra.update(fields)
        self.logger.log(level, message, extra=extra)

    def info(self, message: str, **fields: Any) -> None:
        self._log(logging.INFO, message, fields)

    def error(self, message: str, **fields: Any) -> None:
        self._log(logging.ERROR, message, fields)

    def debug(self, message: str, **fields: Any) -> None:
        self._log(logging.DEBUG, message, fields)

    def warning(self, message: str, **fields: Any) -> None:
        self._log(logging.WARNING, message, fields)

    def close(self) -> None:
        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)
            handler.close()
