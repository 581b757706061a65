"""Bookkeeping for the acceptance suite: one PASS/FAIL line per criterion."""
import time
from contextlib import contextmanager

RESULTS = {}


@contextmanager
def criterion(number: int, title: str, seconds: float = None):
    """Time the block, record the verdict, and enforce an optional time limit."""
    start = time.perf_counter()
    ok = False
    try:
        yield
        elapsed = time.perf_counter() - start
        assert seconds is None or elapsed < seconds, f"took {elapsed:.2f}s, limit {seconds}s"
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} ({elapsed:6.2f}s): {title}"
        RESULTS[number] = line
        print(line)
