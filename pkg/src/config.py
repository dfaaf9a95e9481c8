import logging
import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)


def _env_float(name: str, default: Optional[float]) -> Optional[float]:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"⚠️ {name}={raw!r} не число, используется {default}")
        return default


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"⚠️ {name}={raw!r} не целое, используется {default}")
        return default


# 🔥 Решатель
SOLVER_TOL = _env_float('RESQ_TOL', None)
SOLVER_MAX_ITER = _env_int('RESQ_MAX_ITER', 200)
DUMP_DIR = os.getenv('RESQ_DUMP_DIR') or None

# 🔥 Свободные множества и группы
GROUP_CAP = _env_int('RESQ_GROUP_CAP', 20000)
SET_CACHE_SIZE = _env_int('RESQ_CACHE_SIZE', 16)

# 🔥 Проверки и свипы
RANDOM_SEED = _env_int('RESQ_SEED', 20240611)
SWEEP_WORKERS = _env_int('RESQ_WORKERS', 4)

# 🔥 DEBUG (критично для log_config.py!)
DEBUG = os.getenv('DEBUG', 'false').lower() == 'true'

# 🔥 Логирование
LOG_LEVEL = 'DEBUG' if DEBUG else 'INFO'
LOG_DIR = os.getenv('LOG_DIR', 'logs')


def describe() -> dict:
    """Снимок конфигурации для отчётов и стартового лога"""
    return {
        'solver_tol': SOLVER_TOL,
        'solver_max_iter': SOLVER_MAX_ITER,
        'group_cap': GROUP_CAP,
        'random_seed': RANDOM_SEED,
        'sweep_workers': SWEEP_WORKERS,
        'dump_dir': DUMP_DIR,
    }
