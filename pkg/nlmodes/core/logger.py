"""
Structured logging for nlmodes.

Provides:
- Console output (colorized when attached to a terminal)
- File output (JSON lines for parsing long family builds)
- Context tracking (pipeline stage, model, amplitude q, Newton iteration)
- Error categorization via short error codes

Usage:
    from nlmodes.core.logger import setup_logger, StageLogger

    # Setup once, in the CLI
    logger = setup_logger("nlmodes", log_file=Path("out/run.log"))

    # Library modules log through child loggers or a StageLogger
    log = StageLogger("continuation")
    log.info("Appended orbit", q=0.42, iteration=3)
    log.error("Shooting failed", q=0.44, error_code="NUM-01")
"""

import json
import logging
import sys
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

ERROR_CODES = {
    # Configuration
    "CFG-01": "Unknown configuration key",
    "CFG-02": "Invalid configuration value",
    "CFG-03": "Unreadable configuration file",

    # Numerical
    "NUM-01": "Newton iteration did not converge",
    "NUM-02": "Fixed point is not stable",
    "NUM-03": "Monodromy matrix not diagonalizable",
    "NUM-04": "Floquet multiplier pair became real (family boundary)",
    "NUM-05": "Repeated monodromy eigenvalue, period retune required",
    "NUM-06": "Singular reduced-model solve",
    "NUM-07": "No periodic steady state",

    # Ranges
    "RNG-01": "Amplitude outside family range",
    "RNG-02": "State outside family neighborhood",

    # Artifacts and files
    "ART-01": "Artifact schema version mismatch",
    "ART-02": "Malformed artifact",
    "FS-01": "Output location not writable",

    # Runtime
    "RT-00": "Unclassified runtime failure",
    "RT-06": "Interrupted",
}

CONTEXT_FIELDS = ("stage", "model", "q", "iteration", "error_code")


@dataclass
class LogContext:
    """Context information for log entries."""
    stage: Optional[str] = None
    model: Optional[str] = None
    q: Optional[Any] = None
    iteration: Optional[int] = None
    error_code: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dict, excluding None values."""
        return {k: v for k, v in asdict(self).items() if v is not None}


class ContextFilter(logging.Filter):
    """Make sure every record carries the context attributes."""

    def __init__(self, default_context: Optional[LogContext] = None):
        super().__init__()
        self.context = default_context or LogContext()

    def filter(self, record: logging.LogRecord) -> bool:
        for key, value in self.context.to_dict().items():
            if not hasattr(record, key):
                setattr(record, key, value)
        for name in CONTEXT_FIELDS:
            if not hasattr(record, name):
                setattr(record, name, None)
        return True


def _format_q(q: Any) -> str:
    if hasattr(q, "tolist"):
        q = q.tolist()
    if isinstance(q, (list, tuple)) and len(q) == 1:
        q = q[0]
    if isinstance(q, (list, tuple)):
        return "(" + ", ".join(f"{float(v):.4g}" for v in q) + ")"
    try:
        return f"{float(q):.6g}"
    except (TypeError, ValueError):
        return str(q)


class ColoredFormatter(logging.Formatter):
    """Colorized console formatter."""

    COLORS = {
        'DEBUG': '\033[36m',     # Cyan
        'INFO': '\033[32m',      # Green
        'WARNING': '\033[33m',   # Yellow
        'ERROR': '\033[31m',     # Red
        'CRITICAL': '\033[35m',  # Magenta
        'RESET': '\033[0m',
    }

    def __init__(self, use_colors: bool = True, stream=None):
        super().__init__()
        stream = stream if stream is not None else sys.stderr
        self.use_colors = use_colors and hasattr(stream, "isatty") and stream.isatty()

    def format(self, record: logging.LogRecord) -> str:
        level = record.levelname
        if self.use_colors:
            parts = [f"{self.COLORS.get(level, '')}{level:<7}{self.COLORS['RESET']}"]
        else:
            parts = [f"{level:<7}"]

        context = []
        if getattr(record, "stage", None):
            context.append(f"[{record.stage}]")
        if getattr(record, "model", None):
            context.append(f"<{record.model}>")
        if getattr(record, "q", None) is not None:
            context.append(f"q={_format_q(record.q)}")
        if getattr(record, "iteration", None) is not None:
            context.append(f"it={record.iteration}")
        if context:
            parts.append(" ".join(context))

        parts.append(record.getMessage())

        code = getattr(record, "error_code", None)
        if code:
            parts.append(f"[{code}: {ERROR_CODES.get(code, 'Unknown error')}]")

        return " ".join(parts)


class JSONFormatter(logging.Formatter):
    """JSON-lines formatter for file logging."""

    def format(self, record: logging.LogRecord) -> str:
        log_entry: Dict[str, Any] = {
            'timestamp': datetime.now().isoformat(),
            'level': record.levelname,
            'message': record.getMessage(),
            'logger': record.name,
        }

        for name in CONTEXT_FIELDS:
            value = getattr(record, name, None)
            if value is None:
                continue
            if name == "q" and not isinstance(value, (int, float, str)):
                value = [float(v) for v in value]
            log_entry[name] = value

        if record.exc_info:
            log_entry['exception'] = self.formatException(record.exc_info)

        return json.dumps(log_entry, default=str)


def setup_logger(
    name: str = "nlmodes",
    log_file: Optional[Path] = None,
    level: int = logging.INFO,
    console: bool = True,
    use_colors: bool = True,
) -> logging.Logger:
    """
    Setup the package logger with console and optional JSON file output.

    Handlers are attached to ``name`` so records from child loggers
    (``nlmodes.family``, ``nlmodes.periodic``...) reach them through propagation.

    Args:
        name: Logger name
        log_file: Path to log file (JSON lines)
        level: Logging level
        console: Enable console output (stderr)
        use_colors: Use ANSI colors in console

    Returns:
        Configured logger instance

    Example:
        >>> logger = setup_logger("nlmodes", log_file=Path("build.log"))
        >>> logger.info("Starting build", extra={"stage": "continuation"})
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    context_filter = ContextFilter()

    if console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(level)
        console_handler.addFilter(context_filter)
        console_handler.setFormatter(ColoredFormatter(use_colors, sys.stderr))
        logger.addHandler(console_handler)

    if log_file:
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setLevel(level)
        file_handler.addFilter(context_filter)
        file_handler.setFormatter(JSONFormatter())
        logger.addHandler(file_handler)

    return logger


def get_logger(name: str = "nlmodes") -> logging.Logger:
    """Get existing logger or create new one."""
    return logging.getLogger(name)


class StageLogger:
    """
    Logger wrapper that stamps every record with a pipeline stage.

    Keyword arguments of the logging helpers become record attributes, so
    ``log.info("step", q=0.3, iteration=4)`` shows up as context in both
    console and JSON output.
    """

    def __init__(self, stage: str, logger: Optional[logging.Logger] = None,
                 model: Optional[str] = None):
        self.stage = stage
        self.model = model
        self._logger = logger or get_logger()

    def _log(self, level: int, message: str, **kwargs: Any) -> None:
        extra = {'stage': self.stage, 'model': self.model, **kwargs}
        self._logger.log(level, message, extra=extra)

    def debug(self, message: str, **kwargs: Any) -> None:
        self._log(logging.DEBUG, message, **kwargs)

    def info(self, message: str, **kwargs: Any) -> None:
        self._log(logging.INFO, message, **kwargs)

    def warning(self, message: str, **kwargs: Any) -> None:
        self._log(logging.WARNING, message, **kwargs)

    def error(self, message: str, **kwargs: Any) -> None:
        self._log(logging.ERROR, message, **kwargs)

    def operation_start(self, operation: str, **kwargs: Any) -> None:
        """Log start of an operation."""
        self.debug(f"Starting: {operation}", **kwargs)

    def operation_complete(self, operation: str, success: bool = True, **kwargs: Any) -> None:
        """Log completion of an operation."""
        if success:
            self.debug(f"Completed: {operation}", **kwargs)
        else:
            self.warning(f"Failed: {operation}", **kwargs)
