# run_tests.py

import pytest
import sys

if __name__ == "__main__":
    # --slow добавляет проверки с 1080 вершинами и группой Хоггара
    marker = [] if "--slow" in sys.argv else ["-m", "not slow"]
    exit_code = pytest.main([
        "tests/",
        "--tb=short",
        "--cov=src",
        "--cov-report=term",
        *marker,
    ])
    sys.exit(exit_code)
