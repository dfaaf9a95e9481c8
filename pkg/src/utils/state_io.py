"""
Файловые форматы: состояния и ансамбли в JSON, отчёты команд.

Комплексная матрица хранится как список строк, каждый элемент - пара [re, im].
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, ValidationError, model_validator

from src.errors import InvalidState
from src.utils.linalg import DensityMatrix, is_unitary

logger = logging.getLogger(__name__)

ComplexEntry = Tuple[float, float]
MatrixRows = List[List[ComplexEntry]]
FLOAT_DIGITS = 9


def encode_matrix(mat: np.ndarray) -> MatrixRows:
    mat = np.asarray(mat, dtype=complex)
    return [[(float(z.real), float(z.imag)) for z in row] for row in mat]


def decode_matrix(rows: MatrixRows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def _check_square(rows: MatrixRows, dims: Sequence[int], what: str) -> None:
    size = len(rows)
    if any(len(row) != size for row in rows):
        raise ValueError(f"{what}: матрица должна быть квадратной")
    if int(np.prod(dims)) != size:
        raise ValueError(f"{what}: произведение dims {list(dims)} != {size}")


# ========== СОСТОЯНИЯ ==========

class StateFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dims: List[PositiveInt]
    matrix: MatrixRows

    @model_validator(mode="after")
    def _shape(self) -> "StateFile":
        _check_square(self.matrix, self.dims, "StateFile")
        return self

    @classmethod
    def from_density(cls, rho: DensityMatrix) -> "StateFile":
        return cls(dims=list(rho.dims), matrix=encode_matrix(rho.matrix))

    def to_density(self) -> DensityMatrix:
        return DensityMatrix(decode_matrix(self.matrix), tuple(self.dims))


def parse_state(text: str) -> DensityMatrix:
    """
    Разбор JSON состояния.

    Raises:
        InvalidState: JSON не проходит схему или матрица не является состоянием
    """
    try:
        return StateFile.model_validate_json(text).to_density()
    except ValidationError as e:
        raise InvalidState(f"Некорректный файл состояния: {e.error_count()} ошибок валидации") from e


def load_state(path: Union[str, Path]) -> DensityMatrix:
    path = Path(path)
    logger.debug(f"Загрузка состояния из {path}")
    return parse_state(path.read_text(encoding="utf-8"))


def save_state(rho: DensityMatrix, path: Union[str, Path]) -> None:
    Path(path).write_text(StateFile.from_density(rho).model_dump_json(indent=2), encoding="utf-8")


# ========== АНСАМБЛИ УНИТАРНЫХ ==========

class EnsembleFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dims: List[PositiveInt]
    unitaries: List[MatrixRows] = Field(min_length=1)
    weights: List[float]

    @model_validator(mode="after")
    def _consistent(self) -> "EnsembleFile":
        if len(self.weights) != len(self.unitaries):
            raise ValueError("EnsembleFile: число весов не совпадает с числом унитарных")
        for rows in self.unitaries:
            _check_square(rows, self.dims, "EnsembleFile")
            if not is_unitary(decode_matrix(rows)):
                raise ValueError("EnsembleFile: матрица не унитарна")
        if any(w < 0 for w in self.weights) or not math.isclose(sum(self.weights), 1.0, abs_tol=1e-10):
            raise ValueError("EnsembleFile: веса должны быть неотрицательны и давать в сумме 1")
        return self

    def matrices(self) -> List[np.ndarray]:
        return [decode_matrix(rows) for rows in self.unitaries]


def parse_ensemble(text: str) -> EnsembleFile:
    try:
        return EnsembleFile.model_validate_json(text)
    except ValidationError as e:
        raise InvalidState(f"Некорректный файл ансамбля: {e.error_count()} ошибок валидации") from e


# ========== ОТЧЁТЫ ==========

class CheckRow(BaseModel):
    suite: str
    name: str
    expected: Optional[float] = None
    observed: Optional[float] = None
    tolerance: Optional[float] = None
    passed: bool
    detail: str = ""


class Report(BaseModel):
    command: str
    inputs: Dict[str, Any] = Field(default_factory=dict)
    results: List[Dict[str, Any]] = Field(default_factory=list)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    wall_time: Optional[float] = None

    def to_json(self) -> str:
        """Детерминированный JSON: ключи отсортированы, числа округлены"""
        payload = normalize_value(self.model_dump(exclude_none=True))
        return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False)

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


def normalize_value(value: Any) -> Any:
    """Рекурсивно приводит значения к JSON: float с 9 знаками, inf/nan строками"""
    if isinstance(value, dict):
        return {str(k): normalize_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [normalize_value(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return round(value, FLOAT_DIGITS) + 0.0
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return normalize_value(encode_matrix(value))
        return normalize_value(value.tolist())
    return value
