import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import pandas as pd

from src.utils.state_io import CheckRow

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9f"


class ReportFormatter:
    """Форматирует значения мер, таблицы проверок и CSV свипов"""

    @staticmethod
    def format_bits(value: Any) -> str:
        """Значение в битах с 9 знаками; бесконечность как inf"""
        try:
            value = float(value)
        except (TypeError, ValueError):
            return str(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value + 0.0:.9f}"

    @staticmethod
    def format_pair(primal: float, dual: float) -> str:
        return f"{ReportFormatter.format_bits(primal)} {ReportFormatter.format_bits(dual)}"

    @staticmethod
    def checks_frame(rows: Sequence[CheckRow]) -> pd.DataFrame:
        columns = ["suite", "name", "expected", "observed", "tolerance", "passed"]
        if not rows:
            return pd.DataFrame(columns=columns)
        frame = pd.DataFrame([row.model_dump() for row in rows])
        return frame[columns]

    @staticmethod
    def checks_table(rows: Sequence[CheckRow]) -> str:
        """Таблица проверок для stdout"""
        frame = ReportFormatter.checks_frame(rows)
        if frame.empty:
            return "(нет проверок)"
        frame = frame.copy()
        for column in ("expected", "observed"):
            frame[column] = frame[column].map(lambda v: "" if pd.isna(v) else ReportFormatter.format_bits(v))
        frame["tolerance"] = frame["tolerance"].map(lambda v: "" if pd.isna(v) else f"{v:.0e}")
        frame["passed"] = frame["passed"].map(lambda ok: "PASS" if ok else "FAIL")
        return frame.to_string(index=False)

    @staticmethod
    def checks_summary(rows: Sequence[CheckRow]) -> str:
        failed = sum(1 for row in rows if not row.passed)
        if failed:
            return f"❌ Провалено {failed} из {len(rows)} проверок"
        return f"✅ Пройдено {len(rows)} проверок"

    @staticmethod
    def write_csv(rows: Iterable[Dict[str, Any]], columns: List[str], path: Union[str, Path]) -> int:
        """
        CSV с заголовком; строки в переданном порядке.

        Returns:
            Число записанных строк
        """
        frame = pd.DataFrame(list(rows), columns=columns)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        logger.info(f"Записано {len(frame)} строк в {path}")
        return len(frame)
