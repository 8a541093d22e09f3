"""
Root logging for dercoopt runs: a rotating file plus stderr, as plain text
or JSON lines. Every line carries the run context (command, scenario file,
seed) so that logs of parallel sweeps can be told apart.
"""

import json
import logging
import logging.handlers
import os
from typing import Any, Dict, Optional
from dercoopt_hub.infra.settings import settings


CONTEXT_FIELDS = ("command", "scenario", "seed")
UNSET = "-"

# LogRecord attributes that are not user context
_RESERVED = set(vars(logging.makeLogRecord({}))) | {"message", "asctime"} | set(CONTEXT_FIELDS)

# Module state; worker processes inherit it on fork
_run_context: Dict[str, Any] = dict.fromkeys(CONTEXT_FIELDS, UNSET)


def set_run_context(command: Optional[str] = None, scenario: Optional[str] = None,
                    seed: Optional[int] = None):
    """Context stamped on every record from now on; None resets a field"""
    values = {"command": command, "scenario": scenario, "seed": seed}
    for key, value in values.items():
        _run_context[key] = UNSET if value is None else value


def run_context() -> Dict[str, Any]:
    return dict(_run_context)


class RunContextFilter(logging.Filter):
    """Adds command, scenario and seed attributes unless a call passed its own"""

    def filter(self, record: logging.LogRecord) -> bool:
        for key, value in _run_context.items():
            if not hasattr(record, key):
                setattr(record, key, value)
        return True


class JsonFormatter(logging.Formatter):
    """One JSON object per line: run context under "run", `extra=` fields under "data"."""

    def format(self, record: logging.LogRecord) -> str:
        data = {k: v for k, v in record.__dict__.items() if k not in _RESERVED}
        payload = {
            "time": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "name": record.name,
            "run": {key: getattr(record, key, UNSET) for key in CONTEXT_FIELDS},
            "message": record.getMessage(),
        }
        if data:
            payload["data"] = data
        return json.dumps(payload, default=str, ensure_ascii=False)


def build_formatter(log_format: str) -> logging.Formatter:
    if log_format == "json":
        return JsonFormatter(datefmt="%Y-%m-%dT%H:%M:%S")
    return logging.Formatter(
        "%(levelname)s %(asctime)s [%(command)s %(scenario)s seed=%(seed)s] "
        "%(name)s %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S",
    )


def setup_logging():
    """Rotating logs/actions.log and WARNING+ on stderr, both with run context"""
    log_dir = settings.get("log_dir", "logs")
    log_level = str(settings.get("log_level", "INFO")).upper()
    formatter = build_formatter(settings.get("log_format", "string"))
    context = RunContextFilter()

    os.makedirs(log_dir, exist_ok=True)
    file_handler = logging.handlers.RotatingFileHandler(
        os.path.join(log_dir, "actions.log"),
        maxBytes=10*1024*1024,  # 10MB
        backupCount=5
    )

    # stderr, so that tables on stdout stay clean
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.WARNING)

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, log_level, logging.INFO))
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
    for handler in (file_handler, console_handler):
        handler.setFormatter(formatter)
        handler.addFilter(context)
        root_logger.addHandler(handler)


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Get logger with given name"""
    return logging.getLogger(name)


# Initialize logging when module is imported
setup_logging()
