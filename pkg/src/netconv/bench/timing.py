from __future__ import annotations

import time
from typing import Callable

import numpy as np

# below this a single measurement is too close to the clock's resolution
MIN_MEASURE_NS = 2_000_000


def time_calls(fn: Callable[[], object], calls: int) -> int:
    """Wall time in ns of ``calls`` back-to-back invocations (monotonic clock)."""
    t0 = time.perf_counter_ns()
    for _ in range(calls):
        fn()
    return time.perf_counter_ns() - t0


def calibrate_calls(fn: Callable[[], object], min_ns: int = MIN_MEASURE_NS, max_calls: int = 1 << 16) -> int:
    """Smallest power-of-two call count whose total time reaches ``min_ns``."""
    calls = 1
    while calls < max_calls and time_calls(fn, calls) < min_ns:
        calls *= 2
    return calls


def percentile_ms(samples_ns, q: float) -> float:
    return float(np.percentile(np.asarray(samples_ns, dtype=np.float64), q)) / 1e6
