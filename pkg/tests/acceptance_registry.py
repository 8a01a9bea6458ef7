"""Collects one pass/fail line per acceptance criterion."""
import functools
import time

RESULTS = {}


def criterion(num, title, limit=None):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            detail = ""
            ok = False
            try:
                detail = fn(*args, **kwargs) or ""
                secs = time.perf_counter() - t0
                if limit is not None:
                    assert secs < limit, f"runtime {secs:.1f} s exceeds {limit} s"
                ok = True
            except Exception as exc:
                detail = f"{type(exc).__name__}: {exc}".splitlines()[0]
                raise
            finally:
                secs = time.perf_counter() - t0
                RESULTS[num] = (title, ok, detail, secs)
                print(f"[{'PASS' if ok else 'FAIL'}] {num}. {title} ({secs:.1f} s) {detail}")
        return run
    return wrap
