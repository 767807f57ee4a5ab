"""Analytic medium-coefficient families a(r) and hypothesis validation.

One concrete family is implemented: a tanh step between two flat levels,
smooth and monotone with exponentially decaying derivatives. Derivatives up
to third order are exact (the second-order correction sources need a''
and the remainder analysis touches a''').

`value` takes the slow variable r; callers evaluating the coefficient at a
grid point x pass eps*x themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class PotentialSpec:
    """Monotone step profile a(r) = mid + (delta/2) tanh(mu0 r)."""

    direction: str  # "increasing" | "decreasing"
    epsilon: float
    a_minus: float = 1.0
    a_plus: float = 2.0
    steepness: float = 1.0

    def __post_init__(self):
        if self.direction not in ("increasing", "decreasing"):
            raise PotentialError(f"unknown direction {self.direction!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise PotentialError(f"epsilon must lie in (0,1), got {self.epsilon}")
        if self.steepness <= 0:
            raise PotentialError("steepness must be positive")
        if self.a_minus <= 0 or self.a_plus <= 0:
            raise PotentialError("limits must be positive")
        if self.direction == "increasing" and self.a_plus < self.a_minus:
            raise PotentialError("increasing spec needs a_minus <= a_plus")
        if self.direction == "decreasing" and self.a_plus > self.a_minus:
            raise PotentialError("decreasing spec needs a_plus <= a_minus")
        # equal limits construct fine (flat medium); validate_hypotheses flags them

    @property
    def is_flat(self) -> bool:
        return self.a_minus == self.a_plus

    @property
    def mid(self) -> float:
        return 0.5 * (self.a_minus + self.a_plus)

    @property
    def half_jump(self) -> float:
        return 0.5 * (self.a_plus - self.a_minus)

    def value(self, r, order: int = 0):
        """a(r) or its analytic derivative, order in 0..3."""
        if order not in (0, 1, 2, 3):
            raise PotentialError(f"order must be 0..3, got {order}")
        r = np.asarray(r, dtype=float)
        mu = self.steepness
        d = self.half_jump
        t = np.tanh(mu * r)
        with np.errstate(over="ignore"):
            s = 1.0 / np.cosh(mu * r) ** 2
        if order == 0:
            out = self.mid + d * t
        elif order == 1:
            out = d * mu * s
        elif order == 2:
            out = -2.0 * d * mu**2 * s * t
        else:
            out = 2.0 * d * mu**3 * (2.0 * s * t**2 - s * s)
        return out if out.ndim else float(out)

    def at_x(self, x, order: int = 0):
        """Coefficient a(eps*x) sampled at physical positions (no chain factor)."""
        return self.value(self.epsilon * np.asarray(x, dtype=float), order)


def flat_potential(level: float = 1.0, epsilon: float = 0.05) -> PotentialSpec:
    """Spatially constant medium, used by free-soliton scenarios and tests."""
    return PotentialSpec(
        direction="increasing",
        epsilon=epsilon,
        a_minus=level,
        a_plus=level,
        steepness=1.0,
    )


@dataclass
class HypothesisReport:
    valid: bool
    clauses: list  # (name, ok, detail)
    decay_rates: dict  # derivative order -> fitted rate

    def failed_clauses(self) -> list:
        return [c for c in self.clauses if not c[1]]


def _fit_decay_rate(r: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of -log|f| vs |r| over the decaying tail."""
    mask = np.abs(values) > 1e-300
    r, values = r[mask], np.abs(values[mask])
    if r.size < 4:
        return 0.0
    logs = np.log(values)
    slope = np.polyfit(np.abs(r), logs, 1)[0]
    return float(-slope)


def validate_hypotheses(spec: PotentialSpec, sample_range=None) -> HypothesisReport:
    """Check monotonicity, strict bounds, and exponential derivative decay.

    Violations are reported, not raised; degenerate specs (equal limits) come
    back invalid with the violated clause named.
    """
    mu = spec.steepness
    if sample_range is None:
        sample_range = (-25.0 / mu, 25.0 / mu)
    lo, hi = sample_range
    if hi - lo < 40.0 / mu:
        raise PotentialError("sample_range must cover at least [-20/mu0, 20/mu0]")
    r = np.linspace(lo, hi, 4001)
    a = spec.value(r, 0)
    a1 = spec.value(r, 1)

    clauses = []
    lo_lim = min(spec.a_minus, spec.a_plus)
    hi_lim = max(spec.a_minus, spec.a_plus)
    if spec.direction == "increasing":
        mono_ok = bool(np.all(a1 > 0))
        clauses.append(("a' > 0 everywhere", mono_ok, f"min a' = {a1.min():.3e}"))
    else:
        mono_ok = bool(np.all(a1 < 0))
        clauses.append(("a' < 0 everywhere", mono_ok, f"max a' = {a1.max():.3e}"))
    # strictness checked where the profile is away from floating saturation;
    # at the far tails equality with the limit at roundoff is tolerated
    core = np.abs(r) <= 5.0 / mu
    if spec.is_flat:
        bounds_ok = False
    else:
        bounds_ok = bool(
            np.all(a >= lo_lim - 1e-12) and np.all(a <= hi_lim + 1e-12)
            and np.all(a[core] > lo_lim) and np.all(a[core] < hi_lim)
        )
    clauses.append(
        ("strict limit bounds", bounds_ok, f"range [{a.min():.6f}, {a.max():.6f}]")
    )

    # fit decay on the outer halves where the tail behavior dominates
    tail = np.abs(r) > 0.25 * max(abs(lo), abs(hi))
    expected = 2.0 * mu
    rates = {}
    decay_ok = True
    for order in (1, 2, 3):
        v = spec.value(r, order)
        rate = _fit_decay_rate(r[tail], np.asarray(v)[tail]) if not spec.is_flat else 0.0
        rates[order] = rate
        ok = rate >= 0.9 * expected
        decay_ok = decay_ok and ok
        clauses.append(
            (f"a^({order}) decays exponentially", ok, f"fitted rate {rate:.3f} vs expected {expected:.3f}")
        )

    valid = mono_ok and bounds_ok and decay_ok
    return HypothesisReport(valid=valid, clauses=clauses, decay_rates=rates)
