import argparse
import logging
import sys
import time
from typing import List, Optional, Sequence

from dotenv import load_dotenv

# Загружаем переменные окружения до чтения конфигурации
load_dotenv()

from src.errors import CatalogMiss, InputError, InvalidState, ResourceError, SolverError, Unbounded, UnknownLabel
from src.handlers import CommandResult
from src.handlers.measure_handlers import MeasureHandlers
from src.handlers.sweep_handlers import SweepHandlers
from src.handlers.verify_handlers import VerifyHandlers
from src.log_config import log_shutdown_info, log_startup_info, setup_logging
from src.managers.resource_sets import FreeSetRegistry

logger = logging.getLogger(__name__)

# ========== КОДЫ ВЫХОДА ==========
EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_PARSE = 2
EXIT_SOLVER = 3
EXIT_INVALID = 4

APP_NAME = "resq"


def exit_code_for(error: BaseException) -> int:
    """Код выхода по типу исключения"""
    if isinstance(error, (OSError, InvalidState, UnknownLabel, CatalogMiss)):
        return EXIT_PARSE
    if isinstance(error, (SolverError, Unbounded)):
        return EXIT_SOLVER
    return EXIT_INVALID


# ========== ОСНОВНОЙ КЛАСС ПРИЛОЖЕНИЯ ==========
class ResourceApp:
    def __init__(self, registry: Optional[FreeSetRegistry] = None):
        # одно множество вершин на процесс для всех команд
        self.registry = registry or FreeSetRegistry()
        self.measure_handlers = MeasureHandlers(self.registry)
        self.verify_handlers = VerifyHandlers(self.registry)
        self.sweep_handlers = SweepHandlers(self.registry)
        self.parser = self._build_parser()
        self.exit_code = EXIT_OK

    def _build_parser(self) -> argparse.ArgumentParser:
        """Парсер с глобальными флагами и подкомандами обработчиков"""
        parser = argparse.ArgumentParser(
            prog=APP_NAME,
            description="Одноразовые меры ресурсов: значения, проверки и свипы",
        )
        parser.add_argument("-v", "--verbose", action="store_true", help="Подробный лог в stderr")
        parser.add_argument("--report", metavar="PATH", help="Записать JSON-отчёт")
        parser.add_argument("--timing", action="store_true", help="Добавить время выполнения в отчёт")
        parser.add_argument("--progress", action="store_true", help="Индикатор прогресса в stderr")
        subparsers = parser.add_subparsers(dest="command", required=True)
        self.measure_handlers.register(subparsers)
        self.verify_handlers.register(subparsers)
        self.sweep_handlers.register(subparsers)
        return parser

    def parse(self, argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
        return self.parser.parse_args(argv)

    def setup(self, args: argparse.Namespace) -> None:
        setup_logging(verbose=args.verbose)
        log_startup_info(APP_NAME)
        logger.info(f"Команда: {args.command}")

    def run(self, args: argparse.Namespace) -> int:
        """Выполнить команду, напечатать вывод и записать отчёт"""
        started = time.perf_counter()
        try:
            result: CommandResult = args.handler(args)
        except ResourceError as e:
            self.exit_code = exit_code_for(e)
            logger.error(f"❌ {type(e).__name__}: {e}")
            print(f"error: {e}", file=sys.stderr)
            return self.exit_code
        except OSError as e:
            self.exit_code = EXIT_PARSE
            logger.error(f"❌ Ошибка ввода-вывода: {e}")
            print(f"error: {e}", file=sys.stderr)
            return self.exit_code

        elapsed = time.perf_counter() - started
        for line in result.lines:
            print(line)
        if args.timing:
            result.report.wall_time = elapsed
            print(f"wall time: {elapsed:.3f} s", file=sys.stderr)
        if args.report:
            try:
                result.report.write(args.report)
            except OSError as e:
                logger.error(f"❌ Не удалось записать отчёт {args.report}: {e}")
                print(f"error: {e}", file=sys.stderr)
                self.exit_code = EXIT_PARSE
                return self.exit_code
            logger.info(f"Отчёт записан в {args.report}")
        self.exit_code = result.exit_code
        return self.exit_code

    def shutdown(self) -> None:
        log_shutdown_info(APP_NAME, self.exit_code)


# ========== ТОЧКА ВХОДА ==========
def main(argv: Optional[List[str]] = None) -> int:
    """Основная функция запуска; возвращает код выхода"""
    app = ResourceApp()
    try:
        args = app.parse(argv)
    except SystemExit as e:
        # argparse: 0 для --help, 2 для ошибок разбора
        return int(e.code or 0)
    app.setup(args)
    try:
        return app.run(args)
    except KeyboardInterrupt:
        logger.info("👋 Остановлено пользователем")
        app.exit_code = 130
        return app.exit_code
    except Exception as e:
        logger.error(f"💥 Критическая ошибка: {e}", exc_info=True)
        app.exit_code = EXIT_INVALID if isinstance(e, (InputError, ValueError)) else EXIT_SOLVER
        return app.exit_code
    finally:
        app.shutdown()


if __name__ == "__main__":
    sys.exit(main())
