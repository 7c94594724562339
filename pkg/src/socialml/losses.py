"""Classification-calibrated margin losses.

A loss is evaluated on the margin ``x = gamma * f(h)``. Lipschitz constants
are stated over the reachable range ``[-2 beta, 2 beta]``: bounded models give
``|f| <= beta`` and debiased statistics stay within ``2 beta``.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .exceptions import UnsupportedLossError

LOSS_NAMES = ("logistic", "exponential", "hinge", "truncated_quadratic")


@dataclass(frozen=True)
class LossSpec:
    name: str
    eval: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    strictly_decreasing: bool = True

    def __call__(self, x):
        return self.eval(x)

    @property
    def at_zero(self):
        return float(self.eval(np.float64(0.0)))


def _logistic(x):
    return np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def _logistic_grad(x):
    return -expit(-np.asarray(x, dtype=np.float64))


def _exponential(x):
    return np.exp(-np.asarray(x, dtype=np.float64))


def _exponential_grad(x):
    return -np.exp(-np.asarray(x, dtype=np.float64))


def _hinge(x):
    return np.maximum(0.0, 1.0 - np.asarray(x, dtype=np.float64))


def _hinge_grad(x):
    # subgradient 0 at the kink
    return np.where(np.asarray(x) < 1.0, -1.0, 0.0)


def _truncated_quadratic(x):
    return np.maximum(0.0, 1.0 - np.asarray(x, dtype=np.float64)) ** 2


def _truncated_quadratic_grad(x):
    return -2.0 * np.maximum(0.0, 1.0 - np.asarray(x, dtype=np.float64))


def make_loss(name, beta=1.0):
    """Build a bundled loss.

    Parameters
    ----------
    name : {"logistic", "exponential", "hinge", "truncated_quadratic"}
    beta : float
        Model bound; fixes the Lipschitz constant of losses whose slope is
        unbounded on the real line.
    """
    if beta <= 0:
        raise UnsupportedLossError(f"beta must be positive, got {beta}")
    if name == "logistic":
        return LossSpec(name, _logistic, _logistic_grad, 1.0)
    if name == "exponential":
        return LossSpec(name, _exponential, _exponential_grad, float(np.exp(2.0 * beta)))
    if name == "hinge":
        return LossSpec(name, _hinge, _hinge_grad, 1.0, strictly_decreasing=False)
    if name == "truncated_quadratic":
        return LossSpec(
            name,
            _truncated_quadratic,
            _truncated_quadratic_grad,
            2.0 * (1.0 + 2.0 * beta),
            strictly_decreasing=False,
        )
    raise UnsupportedLossError(f"unsupported loss {name!r}; choose from {LOSS_NAMES}")


@dataclass
class PropertyCheck:
    passed: bool
    violation: float


@dataclass
class Assumption1Report:
    loss: str
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def __str__(self):
        lines = [f"{self.loss}:"]
        for key, c in self.checks.items():
            lines.append(f"  {key:<16} {'pass' if c.passed else 'FAIL'}  worst={c.violation:.3g}")
        return "\n".join(lines)


def verify_assumption1(spec, grid=(-10.0, 10.0, 1e-3), atol=1e-10):
    """Check convexity, monotonicity, slope at zero and the Lipschitz claim.

    ``grid`` is ``(lo, hi, step)``. Violations are reported as the largest
    amount by which each inequality fails (0 when it holds).
    """
    lo, hi, step = grid
    if not (hi > lo and step > 0):
        raise ValueError("grid must satisfy hi > lo and step > 0")
    x = np.arange(lo, hi + step / 2, step)
    phi = np.asarray(spec.eval(x), dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(phi))))
    tol = atol * scale

    # midpoint convexity on (x_{i-1}, x_{i+1}) and on wider, stride-s pairs
    worst_convex = 0.0
    for stride in (1, 7, 101):
        if 2 * stride < x.size:
            mid = phi[stride:-stride]
            chord = 0.5 * (phi[: -2 * stride] + phi[2 * stride :])
            worst_convex = max(worst_convex, float(np.max(mid - chord)))
    mono = float(np.max(np.diff(phi), initial=0.0))
    d0 = float(spec.derivative(np.float64(0.0)))
    slopes = np.abs(np.diff(phi)) / np.diff(x)
    lip = float(np.max(slopes)) - spec.lipschitz

    report = Assumption1Report(spec.name)
    report.checks["convex"] = PropertyCheck(worst_convex <= tol, max(worst_convex, 0.0))
    report.checks["non_increasing"] = PropertyCheck(mono <= tol, max(mono, 0.0))
    report.checks["slope_at_zero"] = PropertyCheck(d0 < 0, max(d0, 0.0))
    report.checks["lipschitz"] = PropertyCheck(lip <= tol, max(lip, 0.0))
    return report
