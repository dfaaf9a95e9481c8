import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import Optional

from src import config

LOG_FILE_NAME = "resq.log"

# Откладываем чтение DEBUG до setup_logging (вызывается после load_dotenv!)
DEBUG = False


class SafeStreamHandler(logging.StreamHandler):
    """Консольный handler: символы вне кодировки потока отбрасываются"""

    def __init__(self, stream=None):
        super().__init__(stream)
        self._encoding = getattr(stream, 'encoding', None) or 'utf-8'

    def emit(self, record):
        try:
            msg = self.format(record).encode(self._encoding, errors='ignore').decode(self._encoding)
            self.stream.write(msg + self.terminator)
            self.flush()
        except Exception:
            self.handleError(record)


def setup_logging(verbose: bool = False, log_to_file: Optional[bool] = None) -> logging.Logger:
    """
    Настраивает корневой логгер для CLI.

    Консольный вывод идёт в stderr: stdout занят значениями мер и таблицами.

    Args:
        verbose: поднять уровень консоли до DEBUG
        log_to_file: писать ли ротируемый файл (по умолчанию только вне DEBUG)

    Returns:
        Корневой логгер
    """
    global DEBUG
    DEBUG = os.getenv('DEBUG', 'false').lower() == 'true'
    level = logging.DEBUG if (DEBUG or verbose) else logging.WARNING

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG if (DEBUG or verbose) else logging.INFO)
    root_logger.handlers.clear()

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    console_handler = SafeStreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if log_to_file is None:
        log_to_file = not DEBUG
    if log_to_file:
        log_dir = config.LOG_DIR
        os.makedirs(log_dir, exist_ok=True)
        file_handler = RotatingFileHandler(
            os.path.join(log_dir, LOG_FILE_NAME),
            maxBytes=10 * 1024 * 1024,
            backupCount=5,
            encoding='utf-8'
        )
        file_handler.setLevel(logging.INFO)
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)

    root_logger.info(
        f"🚀 Logger initialized | DEBUG={DEBUG} | verbose={verbose} | "
        f"File logging={'ON' if log_to_file else 'OFF'}"
    )
    return root_logger


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def log_startup_info(app_name: str = "resq"):
    """
    Записать информацию о запуске приложения
    """
    root_logger = logging.getLogger()
    root_logger.info(f"🚀 {app_name} startup")
    root_logger.info(f"Platform: {sys.platform}")
    root_logger.info(f"Python version: {sys.version.split()[0]}")
    root_logger.info(f"Solver settings: {config.describe()}")


def log_shutdown_info(app_name: str = "resq", exit_code: int = 0):
    """
    Записать информацию о завершении приложения
    """
    logging.getLogger().info(f"👋 {app_name} shutdown | exit code {exit_code}")
