"""Иерархия исключений движка ресурсных мер."""


class ResourceError(Exception):
    """Базовое исключение пакета"""


# ========== ОШИБКИ ВХОДНЫХ ДАННЫХ ==========

class InputError(ResourceError, ValueError):
    """Некорректные входные данные"""


class NonHermitian(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class IndexOutOfRange(InputError):
    pass


class OutOfRange(InputError):
    pass


class UnknownLabel(InputError):
    pass


class NotOrthogonal(InputError):
    pass


class EmptySet(InputError):
    pass


class EmptyLadder(InputError):
    pass


class OutOfRegion(InputError):
    pass


class InvalidState(InputError):
    """Матрица не проходит проверку матрицы плотности или чистого состояния"""


class CatalogMiss(InputError):
    pass


# ========== ОШИБКИ РЕШАТЕЛЯ ==========

class SolverError(ResourceError):
    """Ошибка выпуклого решателя"""


class NumericalBreakdown(SolverError):
    """Система Ньютона вырождена, стоит повторить с другой стартовой точкой"""


class NotSolved(SolverError):
    pass


class SolverFailure(SolverError):
    """Решатель вернул не-оптимальный статус там, где нужен оптимум"""

    def __init__(self, message: str, status=None):
        super().__init__(message)
        self.status = status


# ========== СЕМАНТИКА МЕР И КАНАЛОВ ==========

class Unbounded(ResourceError):
    """Нет допустимого свободного состояния (мера равна +inf)"""


class NoComplement(ResourceError):
    """Робастность равна нулю, дополнение sigma* не определено"""


class PreconditionFailed(ResourceError):
    pass


class NotEigenvector(ResourceError):
    pass


class BoundOrderingError(ResourceError, AssertionError):
    """Нарушен порядок границ, это ошибка реализации"""
