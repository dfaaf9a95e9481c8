"""Обработчики команд командной строки: measure, verify, sweep, export."""
from dataclasses import dataclass, field
from typing import List

from src.utils.state_io import Report


@dataclass
class CommandResult:
    """Итог команды: код выхода, строки для stdout и отчёт"""
    exit_code: int
    report: Report
    lines: List[str] = field(default_factory=list)
