import logging
import time
from typing import Optional

import pyfiglet

from monotone_peridynamics.utils.logger import get_logger

# ANSI color codes for console output
COLOR_CODES = {
    "red": '\033[91m',
    "green": '\033[92m',
    "yellow": '\033[93m',
    "blue": '\033[94m',
    "purple": '\033[95m',
    "cyan": '\033[96m',
    "reset": '\033[0m'
}

DIVIDER = "━" * 72


class OutputManager:
    """
    Formatted progress output for one module, routed through its logger.

    Console handlers pick up ``colored_text`` from the record; file handlers
    see the plain message.
    """

    def __init__(self, module_name: str):
        self.module_name = module_name
        self.logger = get_logger(module_name)
        self._started: Optional[float] = None

    def print_banner(self, banner: str = "MPNO"):
        self.logger.info("\n" + pyfiglet.figlet_format(banner, font="small"))

    def print_process_start(self, process_name: str):
        self._started = time.perf_counter()
        self.logger.info(DIVIDER)
        self.logger.info(f"{process_name}")

    def print_process_end(self, success: bool = True):
        """Closing divider with the elapsed time since print_process_start."""
        elapsed = "" if self._started is None else f" in {time.perf_counter() - self._started:.1f}s"
        self.logger.info(DIVIDER)
        if success:
            self.logger.info(f"DONE{elapsed}")
        else:
            self.logger.error(f"FAILED{elapsed}")

    def print_section_header(self, header_text: str):
        self.logger.info(f"── {header_text}")

    def print_section_item(self, item_text: str, log_level: str = "info", color: Optional[str] = None):
        """
        Log one indented line.

        Args:
            item_text: the message, conventionally prefixed [+], [X] or [!]
            log_level: "debug", "info", "warning" or "error"
            color: console colour name from COLOR_CODES
        """
        message = f"  {item_text}"
        code = COLOR_CODES.get((color or "").lower())
        colored = f"{code}{message}{COLOR_CODES['reset']}" if code else message
        level = logging.getLevelName(log_level.upper())
        if not isinstance(level, int):
            level = logging.INFO
        self.logger.log(level, message, extra={'colored_text': colored})

    def print_metric(self, name: str, value: float, where: Optional[str] = None):
        """One metric line, e.g. ``E_b on test: 1.234567e-03``."""
        label = f"{name} on {where}" if where else name
        self.print_section_item(f"{label}: {value:.6e}", color="cyan")
