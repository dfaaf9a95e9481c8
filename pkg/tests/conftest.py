import os
import sys
import logging

import numpy as np
import pytest

# Добавляем корень проекта в sys.path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)

from src.managers.resource_sets import FreeSetRegistry


# ========== FIXTURES ==========

@pytest.fixture(scope="session")
def registry():
    """Общий реестр множеств на всю сессию: перечисление вершин выполняется один раз"""
    return FreeSetRegistry()


@pytest.fixture(scope="session")
def stab1(registry):
    return registry.get("stab", (2,))


@pytest.fixture(scope="session")
def stab2(registry):
    return registry.get("stab", (2, 2))


@pytest.fixture(scope="session")
def stab3_1(registry):
    return registry.get("stab3", (3,))


@pytest.fixture(scope="session")
def coh3(registry):
    return registry.get("coh", (3,))


@pytest.fixture(scope="session")
def ppt22(registry):
    return registry.get("ppt", (2, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def no_file_logging(monkeypatch, tmp_path):
    """Лог-файлы тестов пишутся во временный каталог"""
    monkeypatch.setattr("src.config.LOG_DIR", str(tmp_path / "logs"))
    yield
    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        if isinstance(handler, logging.FileHandler):
            handler.close()
            root_logger.removeHandler(handler)
