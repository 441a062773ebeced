"""Randomized numeric self-checks behind ``spsl verify``.

Each check returns a ``CheckResult`` with the worst deviation seen and the
tolerance it is held to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from spsl.spectral import dft1
from spsl.upsample import (
    ComponentCountModel,
    check_distributive,
    component_signal,
    convolve_circular,
    count_significant,
    phase_only_signal,
    predicted_counts,
    verify_duplication,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    trials: int
    worst: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst < self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name}: trials={self.trials} worst={self.worst:.3e} tol={self.tolerance:.0e} {status}"


def duplication(trials: int = 1000, seed: int = 0, sizes=(4, 64)) -> CheckResult:
    """Zero-insert up-sampling halves and repeats the spectrum."""
    rng = np.random.default_rng(seed)
    worst = max(verify_duplication(rng.normal(size=int(rng.integers(sizes[0], sizes[1] + 1))))
                for _ in range(trials))
    return CheckResult("duplication", trials, worst, 1e-9)


def convolution_theorem(trials: int = 100, seed: int = 0) -> CheckResult:
    """dft(x circ-conv c) = N dft(x) dft(c)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 65))
        x, c = rng.normal(size=n), rng.normal(size=n)
        dev = np.max(np.abs(dft1(convolve_circular(x, c)) - n * dft1(x) * dft1(c)))
        worst = max(worst, float(dev))
    return CheckResult("convolution-theorem", trials, worst, 1e-10)


def distributive(trials: int = 100, seed: int = 0) -> CheckResult:
    """(f + g) circ-conv h = f circ-conv h + g circ-conv h."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 65))
        f, g = rng.normal(size=(2, n))
        h = rng.normal(size=int(rng.integers(1, n + 1)))
        worst = max(worst, check_distributive(f, g, h))
    return CheckResult("distributive", trials, worst, 1e-10)


def component_counts(sizes=(8, 16, 32), ks=(0, 1, 3), seed: int = 0, epsilon: float = 1e-3) -> CheckResult:
    """Signals with k+1 amplitude components: measured X_A and X_P equal the model's."""
    rng = np.random.default_rng(seed)
    mismatches, trials = 0, 0
    for n in sizes:
        for k in ks:
            model = ComponentCountModel(n, k, epsilon)
            want = predicted_counts(model)
            x = component_signal(n, k, rng)
            got_a = count_significant(dft1(x), epsilon)
            got_p = count_significant(dft1(phase_only_signal(x)), epsilon)
            mismatches += int(got_a != want.X_A) + int(got_p != want.X_P)
            trials += 1
    return CheckResult("component-counts", trials, float(mismatches), 0.5)


CHECKS = {
    "eq2": duplication,
    "eq5": convolution_theorem,
    "theorem1": distributive,
    "counts": component_counts,
}
