import csv
import datetime
import json
import logging
import os
from logging.handlers import RotatingFileHandler
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from relaxgap.Config import Config

THREADS_ENV_VAR = "RELAXGAP_THREADS"
LOG_FORMAT = "%(asctime)s,%(msecs)03d %(levelname)-8s [%(filename)s:%(lineno)d] %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d:%H:%M:%S"

relaxgap_logger = logging.getLogger("relaxgap")


def configure_logging(config: Config, level: Optional[str] = None) -> logging.Logger:
    """
    Sends relaxgap's log records to standard error and, if the config asks for
    it, to a timestamped file under log_folder. Standard output stays reserved
    for results.
    """
    formatter = logging.Formatter(LOG_FORMAT, datefmt=LOG_DATE_FORMAT)
    relaxgap_logger.setLevel((level or config.log_level).upper())
    for handler in list(relaxgap_logger.handlers):
        relaxgap_logger.removeHandler(handler)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    relaxgap_logger.addHandler(console_handler)

    if config.log_to_file:
        os.makedirs(config.log_folder, exist_ok=True)
        now = datetime.datetime.now()
        log_file_path = os.path.join(config.log_folder, f"relaxgap_{now.strftime('%Y-%m-%d_%H-%M-%S')}.log")
        file_handler = RotatingFileHandler(log_file_path, maxBytes=0, backupCount=0)
        file_handler.setFormatter(formatter)
        relaxgap_logger.addHandler(file_handler)
    relaxgap_logger.propagate = False
    return relaxgap_logger


def worker_count() -> int:
    """Worker cap from $RELAXGAP_THREADS, defaulting to the machine's parallelism."""
    value = os.environ.get(THREADS_ENV_VAR)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            relaxgap_logger.warning(f"Ignoring non-integer {THREADS_ENV_VAR}={value!r}")
    return os.cpu_count() or 1


def to_plain(value: Any) -> Any:
    """Converts numpy scalars and arrays (nested anywhere) into JSON-ready values."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        number = float(value)
        if np.isnan(number) or np.isinf(number):
            return None
        return number
    return value


def dump_json(document: Any) -> str:
    """Serialises a document deterministically: sorted keys, fixed indent."""
    return json.dumps(to_plain(document), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(document: Any, path: str) -> None:
    with open(path, "w", encoding="utf-8") as file:
        file.write(dump_json(document))


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Writes a CSV file with a header row; floats use repr for exactness."""
    with open(path, "w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
