import logging
import os
import sys
from pathlib import Path
from typing import Optional, Union

# Libraries that log at INFO on import or per graph step.
NOISY_LOGGERS = ("langgraph", "httpx", "matplotlib", "numexpr")

RUN_FORMAT = '%(asctime)s - %(threadName)s - %(name)s - %(levelname)s - %(message)s'


def resolve_level(level: Union[int, str, None]) -> int:
    """Turns a level name or number into a logging level; unknown names fall back to INFO."""
    if level is None:
        level = os.getenv("NCPG_LOG_LEVEL", "INFO")
    if isinstance(level, int):
        return level
    resolved = logging.getLevelName(str(level).strip().upper())
    return resolved if isinstance(resolved, int) else logging.INFO


def setup_logging(log_level: Union[int, str, None] = None, log_file: Optional[str] = None) -> logging.Logger:
    """
    Configures the root logger for a verify or scan run.

    Suites run on a thread pool, so records carry the thread name. Third-party
    loggers are held at WARNING unless the run itself is at DEBUG.

    Args:
        log_level: Level name or number. Defaults to NCPG_LOG_LEVEL, then INFO.
        log_file: Optional path that receives the same records as stdout.

    Returns:
        The configured root logger.
    """
    level = resolve_level(log_level)

    root = logging.getLogger()
    root.setLevel(level)
    for handler in root.handlers[:]:
        root.removeHandler(handler)

    formatter = logging.Formatter(RUN_FORMAT, datefmt='%Y-%m-%d %H:%M:%S')
    handlers = [logging.StreamHandler(sys.stdout)]
    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_path))

    for handler in handlers:
        handler.setLevel(level)
        handler.setFormatter(formatter)
        root.addHandler(handler)

    library_level = level if level <= logging.DEBUG else logging.WARNING
    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(library_level)

    return root
