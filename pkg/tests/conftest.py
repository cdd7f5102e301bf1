import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

SESSION_START = time.monotonic()


def session_elapsed() -> float:
    return time.monotonic() - SESSION_START


def pytest_terminal_summary(terminalreporter):
    terminalreporter.write_line(f"total wall time: {session_elapsed():.1f}s")
