import sys
from pathlib import Path

import numpy as np
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def sparse_masses(rng, n, p=None, scale=1.0):
    """Exponential masses on a random subset (never all zero)."""
    p = rng.uniform(0.2, 1.0) if p is None else p
    m = np.where(rng.random(n) < p, rng.exponential(scale, size=n), 0.0)
    if not m.any():
        m[rng.integers(n)] = rng.exponential(scale)
    return m


# one line per acceptance criterion, filled by test_acceptance.py and echoed in the summary
ACCEPTANCE = {}


def record_acceptance(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
