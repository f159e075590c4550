import logging
import re
import sys
import time
import traceback
from typing import Optional


def _sgr(*codes: int) -> str:
    return "".join(f"\033[{code}m" for code in codes)


# ANSI Color Codes
class Colors:
    RESET = _sgr(0)
    BOLD = _sgr(1)
    DIM = _sgr(2)
    WHITE = _sgr(37)
    GREY = _sgr(90)
    RED = _sgr(91)
    GREEN = _sgr(92)
    YELLOW = _sgr(93)
    BLUE = _sgr(94)
    MAGENTA = _sgr(95)
    CYAN = _sgr(96)
    ALARM = _sgr(41, 37)


# (symbol, colour, label) per log level
LEVEL_STYLES = {
    logging.DEBUG: ("🔍", Colors.BLUE, "DEBUG"),
    logging.INFO: ("ℹ️", Colors.GREEN, "INFO"),
    logging.WARNING: ("⚠️", Colors.YELLOW, "WARNING"),
    logging.ERROR: ("❌", Colors.RED, "ERROR"),
    logging.CRITICAL: ("💥", Colors.ALARM, "CRITICAL"),
}

# (symbol, colour) per package, matched against the dotted logger name
COMPONENT_STYLES = {
    "app": ("🖥️", Colors.MAGENTA),
    "core": ("⚙️", Colors.WHITE),
    "geometry": ("📐", Colors.CYAN),
    "dynamics": ("🌀", Colors.GREEN),
    "harmonic": ("🎼", Colors.MAGENTA),
    "density": ("🌫️", Colors.BLUE),
    "marginals": ("🌐", Colors.BLUE),
    "estimation": ("🎯", Colors.RED),
    "orchestration": ("🎭", Colors.YELLOW),
    "reporting": ("📄", Colors.CYAN),
    "config": ("🔧", Colors.WHITE),
    "utils": ("🛠️", Colors.GREY),
}

ANSI_ESCAPE_REGEX = re.compile(r'\x1b\[[0-?]*[ -/]*[@-~]')
PATH_REGEX = re.compile(r'((?:\b[\w.\-/]+[/\\])?[\w.\-]+\.(?:bin|csv|txt|cfg|conf|json|py))\b')
ASSIGNMENT_REGEX = re.compile(r'\b([A-Za-z_][\w.]*)=(?=\S)')
NUMBER_REGEX = re.compile(r'(?<![\w.])([-+]?\d+(?:\.\d+)?(?:e[-+]?\d+)?\s*(?:s|rad/s|rad|%)?)(?![\w.])')
LIBRARY_FRAME_REGEX = re.compile(r'File ".*[/\\]site-packages[/\\](numpy|scipy|pandas)[/\\]')


def format_duration(seconds: float) -> str:
    if seconds < 60:
        return f"{seconds:.1f}s"
    if seconds < 3600:
        return f"{seconds / 60:.1f}m"
    return f"{seconds / 3600:.1f}h"


class ProgressLogger:
    """Throttled text progress bar for pull-back chunks, snapshots and epochs.

    Logs at most once per ``update_interval`` seconds, always logging the first
    update and the one that reaches 100%.
    """

    def __init__(self, logger, total=100, prefix="Progress", length=30, unit="items"):
        self.logger = logger
        self.total = max(total, 1)
        self.prefix = prefix
        self.length = length
        self.unit = unit
        self.start_time = time.time()
        self.last_percent = -1
        self.last_update_time = 0.0
        self.update_interval = 0.5

    def _due(self, percent: int, now: float) -> bool:
        if percent == self.last_percent:
            return False
        return self.last_percent == -1 or percent == 100 or now - self.last_update_time > self.update_interval

    def update(self, current, message=""):
        now = time.time()
        percent = min(int(current * 100 / self.total), 100)
        if not self._due(percent, now):
            return

        elapsed = now - self.start_time
        if current > 0 and elapsed > 0:
            remaining = elapsed * (self.total / current - 1)
            timing = f"{current / elapsed:.1f} {self.unit}/s, {format_duration(remaining)} left"
        else:
            timing = "starting"

        filled = self.length * min(current, self.total) // self.total
        bar = f"{Colors.GREEN}{'█' * filled}{Colors.DIM}{'░' * (self.length - filled)}{Colors.RESET}"
        self.logger.info(f"{self.prefix} |{bar}| {percent}% • {message} • {timing}")

        self.last_percent = percent
        self.last_update_time = now


class EnhancedFormatter(logging.Formatter):
    """Single-line records with level symbol, package tag and highlighted values.

    With ``color_enabled=False`` the same layout is produced without ANSI codes.
    """

    def __init__(self, fmt=None, datefmt=None, style='%', color_enabled=True):
        super().__init__(fmt, datefmt, style)
        self.color_enabled = color_enabled

    @staticmethod
    def component_for(logger_name: str) -> str:
        """Most specific package named anywhere in the dotted logger path."""
        component = "utils"
        for part in logger_name.split('.'):
            if part in COMPONENT_STYLES:
                component = part
        return component

    def format(self, record):
        symbol, color, label = LEVEL_STYLES.get(record.levelno, LEVEL_STYLES[logging.INFO])
        tag_symbol, tag_color = COMPONENT_STYLES[self.component_for(record.name)]
        message = self._highlight(ANSI_ESCAPE_REGEX.sub('', record.getMessage()))

        line = (f"{Colors.DIM}{self.formatTime(record, self.datefmt)}{Colors.RESET} "
                f"{symbol} {Colors.BOLD}{color}{label}{Colors.RESET} "
                f"[{tag_color}{tag_symbol} {record.name.rsplit('.', 1)[-1]}{Colors.RESET}] "
                f"{color}{message}{Colors.RESET}")
        if record.exc_info:
            line += '\n' + self._format_traceback(record)

        return line if self.color_enabled else ANSI_ESCAPE_REGEX.sub('', line)

    @staticmethod
    def _highlight(message):
        """Paths in cyan, `name=` keys dimmed, numbers with units in yellow."""
        message = PATH_REGEX.sub(f"{Colors.CYAN}\\1{Colors.RESET}", message)
        message = ASSIGNMENT_REGEX.sub(f"{Colors.DIM}\\1={Colors.RESET}", message)
        return NUMBER_REGEX.sub(f"{Colors.YELLOW}\\1{Colors.RESET}", message)

    @staticmethod
    def _format_traceback(record):
        """Traceback with numpy/scipy/pandas frames folded into a count."""
        lines = [f"{Colors.RED}Traceback:{Colors.RESET}"]
        library_frames = 0
        skip_source = False
        for raw in ''.join(traceback.format_exception(*record.exc_info)).splitlines():
            stripped = raw.strip()
            if stripped.startswith("File "):
                skip_source = bool(LIBRARY_FRAME_REGEX.search(stripped))
                if skip_source:
                    library_frames += 1
                    continue
                if library_frames:
                    lines.append(f"{Colors.DIM}  ... {library_frames} library frame(s){Colors.RESET}")
                    library_frames = 0
                lines.append(f"{Colors.DIM}{raw}{Colors.RESET}")
            elif skip_source and raw.startswith("    "):
                continue
            elif not raw.startswith(' ') and ': ' in raw:
                name, detail = raw.split(': ', 1)
                lines.append(f"{Colors.BOLD}{Colors.RED}{name}{Colors.RESET}: {Colors.YELLOW}{detail}{Colors.RESET}")
            else:
                lines.append(raw)
        if library_frames:
            lines.append(f"{Colors.DIM}  ... {library_frames} library frame(s){Colors.RESET}")
        return '\n'.join(lines) + '\n'


def create_progress_logger(logger_name, total=100, prefix="Progress", unit="items"):
    return ProgressLogger(logging.getLogger(logger_name), total, prefix, unit=unit)


def setup_logging(level=logging.INFO, log_format: Optional[str] = None, date_format: Optional[str] = None,
                  use_enhanced_formatter=True, color_enabled=True, stream=None):
    """Install a single stderr handler on the root logger.

    Args:
        level: Logging level, as a number or a name such as "DEBUG".
        log_format: Plain format string; takes precedence over the enhanced formatter.
        date_format: Timestamp format.
        use_enhanced_formatter: Use :class:`EnhancedFormatter` when no format string is given.
        color_enabled: Emit ANSI colours from the enhanced formatter.
        stream: Output stream, stderr by default so stdout stays free for data.
    """
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())

    if log_format:
        formatter = logging.Formatter(fmt=log_format, datefmt=date_format)
    elif use_enhanced_formatter:
        formatter = EnhancedFormatter(datefmt=date_format or "%Y-%m-%d %H:%M:%S", color_enabled=color_enabled)
    else:
        formatter = logging.Formatter(fmt="%(asctime)s %(levelname)-8s %(name)s: %(message)s", datefmt=date_format)

    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(formatter)
    handler.setLevel(level)

    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.setLevel(level)
    root_logger.addHandler(handler)
    root_logger.debug(f"Logging configured at {logging.getLevelName(level)} with {type(formatter).__name__}")


def get_logger(name):
    return logging.getLogger(name)
