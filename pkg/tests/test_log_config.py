import io
import logging
import os
from logging.handlers import RotatingFileHandler
from unittest.mock import MagicMock, patch

import pytest

from src import log_config
from src.log_config import (
    SafeStreamHandler,
    get_logger,
    log_shutdown_info,
    log_startup_info,
    setup_logging,
)


class EncodedStream(io.StringIO):
    """Поток с заданной кодировкой терминала"""

    def __init__(self, encoding):
        super().__init__()
        self._encoding = encoding

    @property
    def encoding(self):
        return self._encoding


@pytest.fixture(autouse=True)
def reset_logging():
    """Сброс настроек логирования перед каждым тестом"""
    root_logger = logging.getLogger()
    saved_handlers = root_logger.handlers[:]
    saved_level = root_logger.level
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
    root_logger.setLevel(logging.WARNING)

    yield

    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        if isinstance(handler, RotatingFileHandler):
            handler.close()
    for handler in saved_handlers:
        root_logger.addHandler(handler)
    root_logger.setLevel(saved_level)


class TestSafeStreamHandler:

    @staticmethod
    def _emit(encoding, text):
        stream = EncodedStream(encoding)
        handler = SafeStreamHandler(stream)
        handler.setFormatter(logging.Formatter("%(message)s"))
        handler.emit(logging.makeLogRecord({"msg": text, "levelno": logging.INFO}))
        return stream.getvalue()

    def test_utf8_keeps_emojis(self):
        assert self._emit("utf-8", "✅ готово") == "✅ готово\n"

    def test_cp1251_strips_emojis(self):
        """В cp1251 эмодзи вырезаются, кириллица остаётся"""
        assert self._emit("cp1251", "🚀 старт") == " старт\n"

    def test_ascii_keeps_only_ascii(self):
        assert self._emit("ascii", "✅ d_min = 1.0 бит") == " d_min = 1.0 \n"

    def test_stream_without_encoding(self):
        """Поток без атрибута encoding считается UTF-8"""
        handler = SafeStreamHandler(io.StringIO())
        assert handler._encoding == "utf-8"

    def test_emit_error_is_handled(self):
        handler = SafeStreamHandler(EncodedStream("utf-8"))
        with patch.object(handler, "format", side_effect=RuntimeError("boom")), \
                patch.object(handler, "handleError") as mock_handle:
            record = logging.makeLogRecord({"msg": "x"})
            handler.emit(record)
            mock_handle.assert_called_once_with(record)


@pytest.mark.parametrize("debug_env,verbose,expected_level", [
    ("false", False, logging.INFO),
    ("true", False, logging.DEBUG),
    ("false", True, logging.DEBUG),
])
def test_setup_logging_levels(monkeypatch, debug_env, verbose, expected_level):
    """Уровень корневого логгера зависит от DEBUG и --verbose"""
    monkeypatch.setenv("DEBUG", debug_env)
    root_logger = setup_logging(verbose=verbose, log_to_file=False)
    assert root_logger.level == expected_level
    assert log_config.DEBUG == (debug_env == "true")
    assert len(root_logger.handlers) == 1
    assert isinstance(root_logger.handlers[0], SafeStreamHandler)


def test_console_goes_to_stderr(monkeypatch):
    """stdout занят значениями мер, лог идёт в stderr"""
    monkeypatch.setenv("DEBUG", "false")
    with patch("src.log_config.sys") as mock_sys:
        mock_sys.stderr = io.StringIO()
        root_logger = setup_logging(verbose=True, log_to_file=False)
    assert root_logger.handlers[0].stream is mock_sys.stderr


def test_console_level_without_verbose(monkeypatch):
    monkeypatch.setenv("DEBUG", "false")
    root_logger = setup_logging(log_to_file=False)
    assert root_logger.handlers[0].level == logging.WARNING


def test_file_handler(monkeypatch, tmp_path):
    """Файловый лог пишется в LOG_DIR"""
    monkeypatch.setenv("DEBUG", "false")
    monkeypatch.setattr("src.config.LOG_DIR", str(tmp_path / "logs"))
    root_logger = setup_logging()
    file_handlers = [h for h in root_logger.handlers if isinstance(h, RotatingFileHandler)]
    assert len(file_handlers) == 1
    assert file_handlers[0].baseFilename == os.path.join(str(tmp_path / "logs"), log_config.LOG_FILE_NAME)
    assert file_handlers[0].level == logging.INFO


def test_no_file_handler_in_debug(monkeypatch):
    monkeypatch.setenv("DEBUG", "true")
    with patch("os.makedirs") as mock_makedirs:
        root_logger = setup_logging()
    mock_makedirs.assert_not_called()
    assert not any(isinstance(h, RotatingFileHandler) for h in root_logger.handlers)


def test_get_logger():
    assert get_logger("src.managers.measures") is logging.getLogger("src.managers.measures")


def test_startup_and_shutdown():
    """Стартовые и финальные сообщения"""
    mock_root = MagicMock()
    with patch("src.log_config.sys") as mock_sys, \
            patch("src.log_config.logging.getLogger", return_value=mock_root):
        mock_sys.platform = "linux"
        mock_sys.version = "3.11.4 (main)"
        log_startup_info("TestApp")
        assert mock_root.info.call_count == 4
        assert mock_root.info.call_args_list[0].args[0] == "🚀 TestApp startup"
        assert mock_root.info.call_args_list[1].args[0] == "Platform: linux"
        assert mock_root.info.call_args_list[2].args[0] == "Python version: 3.11.4"
        assert "Solver settings" in mock_root.info.call_args_list[3].args[0]

        mock_root.reset_mock()
        log_shutdown_info("TestApp", exit_code=3)
        mock_root.info.assert_called_once_with("👋 TestApp shutdown | exit code 3")
