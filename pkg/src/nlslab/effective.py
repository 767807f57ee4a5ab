"""Reduced parameter dynamics, outcome predictions, boosts, refraction.

The four modulation parameters follow a closed ODE system driven by the
medium slope at the soliton position. Increasing media transmit with a
computable limit (scaling, velocity); decreasing media reflect below a
velocity threshold. The 2D variant couples through the ground-state shape
via one quadrature constant.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .grids import Field
from .potentials import PotentialSpec
from .solitons import exponents

KIND_INCREASING = "increasing1d"
KIND_DECREASING = "decreasing1d"
KIND_2D = "2d"


class EffectiveError(ValueError):
    pass


class StepRejection(RuntimeError):
    """Conserved combination drifted beyond tolerance: dt too large."""


@dataclass
class EffectiveState:
    C: float
    V: float
    U: float
    H: float

    def __post_init__(self):
        if self.C <= 0:
            raise EffectiveError("need C > 0")


@dataclass(frozen=True)
class OutcomePrediction:
    kind: str  # "transmitted" | "reflected" | "critical"
    c_inf: float
    v_inf: float
    lambda_inf: float


def default_kappa(m: float) -> float:
    """2D coupling constant; the planar virial identity gives (m+1)/2."""
    return 0.5 * (m + 1.0)


def _check_kind(kind: str, pot: PotentialSpec, m: float) -> None:
    if kind not in (KIND_INCREASING, KIND_DECREASING, KIND_2D):
        raise EffectiveError(f"unknown kind {kind!r}")
    if kind == KIND_INCREASING and pot.direction != "increasing":
        raise EffectiveError("kind/potential direction mismatch")
    if kind == KIND_DECREASING and pot.direction != "decreasing":
        raise EffectiveError("kind/potential direction mismatch")
    if kind == KIND_2D and m >= 3.0:
        raise EffectiveError("2D dynamics requires m < 3")


def forcing_coefficients(kind: str, m: float, kappa: float | None = None):
    """(velocity, scaling) forcing prefactors of the parameter ODEs."""
    if kind == KIND_2D:
        kap = default_kappa(m) if kappa is None else kappa
        return 4.0 * kap / (m + 1.0), 2.0 / (3.0 - m)
    return 8.0 / (m + 3.0), 4.0 / (5.0 - m)


@dataclass
class StateDerivative:
    C: float
    V: float
    U: float
    H: float


def ode_rhs(kind: str, state: EffectiveState, pot: PotentialSpec, m: float,
            kappa: float | None = None) -> StateDerivative:
    """Time derivative of (C, V, U, H)."""
    _check_kind(kind, pot, m)
    cv, cs = forcing_coefficients(kind, m, kappa)
    eps = pot.epsilon
    r = eps * state.U
    ratio = pot.value(r, 1) / pot.value(r, 0)
    dV = eps * cv * ratio * state.C
    dC = eps * cs * ratio * state.C * state.V
    return StateDerivative(C=dC, V=dV, U=state.V, H=-0.5 * dV * state.U)


def invariant_slope(kind: str, m: float, kappa: float | None = None) -> float:
    """s such that V^2 - s*C is conserved along trajectories."""
    cv, cs = forcing_coefficients(kind, m, kappa)
    return 2.0 * cv / cs


@dataclass
class EffectiveTrajectory:
    kind: str
    m: float
    pot: PotentialSpec
    t: np.ndarray
    C: np.ndarray
    V: np.ndarray
    U: np.ndarray
    H: np.ndarray
    Ic: np.ndarray  # integral of C from t0
    Iv2: np.ndarray  # integral of V^2 from t0
    invariant_drift: np.ndarray
    dt: float
    kappa: float | None = None
    defect: object = None  # callable (C, V, U) -> (f3, f4) or None
    horizon_exhausted: bool = False

    def state_at(self, tau: float) -> dict:
        """Parameter state at an arbitrary time via one RK4 sub-step."""
        if tau < self.t[0] - 1e-12 or tau > self.t[-1] + 1e-12:
            raise EffectiveError(f"time {tau} outside trajectory range")
        k = int(np.clip(np.searchsorted(self.t, tau, side="right") - 1, 0, len(self.t) - 1))
        y = np.array([self.C[k], self.V[k], self.U[k], self.H[k], self.Ic[k], self.Iv2[k]])
        h = tau - self.t[k]
        if abs(h) > 1e-14:
            y = _rk4_step(y, h, self.kind, self.pot, self.m, self.kappa, self.defect)
        return {
            "C": y[0], "V": y[1], "U": y[2], "H": y[3],
            "Ic": y[4], "Iv2": y[5],
            "theta0": y[4] - 0.25 * y[5] + y[3],
        }

    def endpoint(self) -> EffectiveState:
        return EffectiveState(C=self.C[-1], V=self.V[-1], U=self.U[-1], H=self.H[-1])

    def turning_point(self):
        """(t0, C(t0)) at the unique velocity zero crossing, or None."""
        sign = np.sign(self.V)
        idx = np.nonzero(np.diff(sign) != 0)[0]
        if idx.size == 0:
            return None
        k = int(idx[0])
        t_lo, t_hi = self.t[k], self.t[k + 1]
        for _ in range(80):
            t_mid = 0.5 * (t_lo + t_hi)
            v_mid = self.state_at(t_mid)["V"]
            if v_mid == 0.0:
                break
            if np.sign(v_mid) == np.sign(self.V[k]):
                t_lo = t_mid
            else:
                t_hi = t_mid
        t0 = 0.5 * (t_lo + t_hi)
        return t0, self.state_at(t0)["C"]

    def time_at_position(self, u_target: float) -> float:
        """First time the position crosses u_target (monotone legs only)."""
        diffs = self.U - u_target
        idx = np.nonzero(np.diff(np.sign(diffs)) != 0)[0]
        if idx.size == 0:
            raise EffectiveError(f"trajectory never reaches U={u_target}")
        k = int(idx[0])
        t_lo, t_hi = self.t[k], self.t[k + 1]
        for _ in range(80):
            t_mid = 0.5 * (t_lo + t_hi)
            if np.sign(self.state_at(t_mid)["U"] - u_target) == np.sign(diffs[k]):
                t_lo = t_mid
            else:
                t_hi = t_mid
        return 0.5 * (t_lo + t_hi)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "C", "V", "U", "H", "invariant_drift"])
            for row in zip(self.t, self.C, self.V, self.U, self.H, self.invariant_drift):
                writer.writerow([repr(float(v)) for v in row])


def _deriv(y: np.ndarray, kind: str, pot: PotentialSpec, m: float,
           kappa: float | None, defect) -> np.ndarray:
    C, V, U = y[0], y[1], y[2]
    cv, cs = forcing_coefficients(kind, m, kappa)
    eps = pot.epsilon
    r = eps * U
    ratio = pot.value(r, 1) / pot.value(r, 0)
    dV = eps * cv * ratio * C
    dC = eps * cs * ratio * C * V
    dU = V
    dH = -0.5 * dV * U
    if defect is not None:
        f3, f4 = defect(C, V, U)
        dU = dU + eps**2 * f4
        dH = dH + eps**2 * f3
    return np.array([dC, dV, dU, dH, C, V * V])


def _rk4_step(y: np.ndarray, h: float, kind: str, pot: PotentialSpec, m: float,
              kappa: float | None, defect) -> np.ndarray:
    k1 = _deriv(y, kind, pot, m, kappa, defect)
    k2 = _deriv(y + 0.5 * h * k1, kind, pot, m, kappa, defect)
    k3 = _deriv(y + 0.5 * h * k2, kind, pot, m, kappa, defect)
    k4 = _deriv(y + h * k3, kind, pot, m, kappa, defect)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def default_ode_dt(pot: PotentialSpec) -> float:
    """Resolve the medium transit: the forcing varies on the
    1/(eps*v*steepness) scale, so scale the nominal step by the steepness."""
    return min(0.01 / (pot.epsilon * max(pot.steepness, 1.0)), 0.5)


def integrate_effective(kind: str, init: EffectiveState, pot: PotentialSpec, m: float,
                        t0: float, t1: float, dt: float | None = None,
                        kappa: float | None = None, defect=None,
                        guard_tol: float = 1e-6) -> EffectiveTrajectory:
    """Classical RK4 trajectory of the parameter system with invariant guard."""
    _check_kind(kind, pot, m)
    if dt is None:
        dt = default_ode_dt(pot)
    if dt <= 0:
        raise EffectiveError("dt must be positive")
    nsteps = max(1, int(np.ceil((t1 - t0) / dt)))
    dt = (t1 - t0) / nsteps

    slope = invariant_slope(kind, m, kappa)
    y = np.array([init.C, init.V, init.U, init.H, 0.0, 0.0])
    inv0 = y[1] ** 2 - slope * y[0]
    rows = [np.concatenate(([t0], y, [0.0]))]
    t = t0
    for _ in range(nsteps):
        y = _rk4_step(y, dt, kind, pot, m, kappa, defect)
        t += dt
        drift = abs(y[1] ** 2 - slope * y[0] - inv0)
        if drift > guard_tol * max(1.0, abs(inv0)):
            raise StepRejection(
                f"invariant drift {drift:.3e} exceeds {guard_tol} at t={t:.3f}; reduce dt"
            )
        rows.append(np.concatenate(([t], y, [drift])))
    arr = np.array(rows)
    return EffectiveTrajectory(
        kind=kind, m=m, pot=pot,
        t=arr[:, 0], C=arr[:, 1], V=arr[:, 2], U=arr[:, 3], H=arr[:, 4],
        Ic=arr[:, 5], Iv2=arr[:, 6], invariant_drift=arr[:, 7],
        dt=dt, kappa=kappa, defect=defect,
    )


def interaction_time(v0: float, epsilon: float) -> float:
    """Default half-horizon bracketing the medium transit."""
    if v0 <= 0:
        raise EffectiveError("auto horizon needs v0 > 0")
    return epsilon ** (-1.0 - 0.01) / v0


def predict_outcome(m: float, v0: float, pot: PotentialSpec, dim: int = 1,
                    kappa: float | None = None,
                    tie_tol: float = 1e-12) -> OutcomePrediction:
    """Asymptotic outcome from the conservation balance.

    Increasing media transmit with the scaling set by the limit ratio;
    decreasing media reflect iff the squared velocity sits below the
    threshold, with a `tie_tol` window declared critical.
    """
    if v0 <= 0:
        raise EffectiveError("predict_outcome needs v0 > 0")
    if dim == 2:
        if m >= 3.0:
            raise EffectiveError("2D prediction requires m < 3")
        if pot.direction != "increasing":
            raise EffectiveError("2D prediction implemented for increasing media")
        kap = default_kappa(m) if kappa is None else kappa
        alpha0 = 4.0 * kap * (3.0 - m) / (m + 1.0)
        c_inf = (pot.a_plus / pot.a_minus) ** (2.0 / (3.0 - m))
        v_inf = float(np.sqrt(v0**2 + alpha0 * (c_inf - 1.0)))
        return OutcomePrediction("transmitted", c_inf, v_inf,
                                 pot.a_plus ** (-1.0 / (m - 1.0)))

    lam0 = exponents(m).lambda0
    if pot.direction == "increasing":
        c_inf = (pot.a_plus / pot.a_minus) ** (4.0 / (5.0 - m))
        v_inf = float(np.sqrt(v0**2 + 4.0 * lam0 * (c_inf - 1.0)))
        return OutcomePrediction("transmitted", c_inf, v_inf,
                                 pot.a_plus ** (-1.0 / (m - 1.0)))

    a0 = pot.a_plus / pot.a_minus
    threshold = 4.0 * lam0 * (1.0 - a0 ** (4.0 / (5.0 - m)))
    gap = v0**2 - threshold
    if abs(gap) <= tie_tol:
        c0 = 1.0 - v0**2 / (4.0 * lam0)
        return OutcomePrediction("critical", c0, 0.0, a0 ** (-1.0 / (m - 1.0)))
    if gap < 0:
        return OutcomePrediction("reflected", 1.0, -v0, 1.0)
    c_inf = a0 ** (4.0 / (5.0 - m))
    v_inf = float(np.sqrt(v0**2 + 4.0 * lam0 * (c_inf - 1.0)))
    return OutcomePrediction("transmitted", c_inf, v_inf,
                             a0 ** (-1.0 / (m - 1.0)))


def center_anchor(m: float, v0: float, pot: PotentialSpec, dim: int = 1,
                  kappa: float | None = None) -> EffectiveState:
    """Parameter state at the medium's transition center.

    Anchored at the idealized far-field start (C, V) -> (1, v0), using the
    closed-form scaling law and the conserved velocity/scaling combination;
    avoids any dependence on where a finite run begins.
    """
    if dim == 2:
        kind = KIND_2D
        c_star = (pot.value(0.0) / pot.a_minus) ** (2.0 / (3.0 - m))
    else:
        kind = KIND_INCREASING if pot.direction == "increasing" else KIND_DECREASING
        c_star = (pot.value(0.0) / pot.a_minus) ** (4.0 / (5.0 - m))
    slope = invariant_slope(kind, m, kappa)
    v2 = v0**2 + slope * (c_star - 1.0)
    if v2 <= 0:
        raise EffectiveError("anchored state has no real velocity at the center")
    return EffectiveState(C=c_star, V=float(np.sqrt(v2)), U=0.0, H=0.0)


def galilean_boost(field: Field, v2: float, t: float) -> Field:
    """Exact transverse-boost symmetry applied to a 2D field."""
    if field.grid.dim != 2:
        raise EffectiveError("galilean_boost needs a 2D field")
    grid = field.grid
    if v2 == 0.0 and t == 0.0:
        return field.copy()
    vhat = np.fft.fft(field.values, axis=1)
    k2 = grid.wavenumbers
    vhat *= np.exp(-1j * k2[None, :] * (v2 * t))
    shifted = np.fft.ifft(vhat, axis=1)
    _, yy = grid.meshgrid
    phase = np.exp(1j * (0.5 * v2 * yy - 0.25 * v2**2 * t))
    return Field(grid, shifted * phase)


def refraction_angles(v_in, m: float, pot: PotentialSpec,
                      kappa: float | None = None):
    """Incidence/refraction angles from the axis, plus the conservation residual."""
    v_in = np.asarray(v_in, dtype=float)
    if v_in.shape != (2,):
        raise EffectiveError("v_in must be a 2-vector")
    if v_in[0] <= 0:
        raise EffectiveError("incident axial velocity must be positive")
    pred = predict_outcome(m, float(v_in[0]), pot, dim=2, kappa=kappa)
    v_out = np.array([pred.v_inf, v_in[1]])
    theta_in = float(np.arctan2(v_in[1], v_in[0]))
    theta_out = float(np.arctan2(v_out[1], v_out[0]))
    residual = abs(
        np.hypot(*v_in) * np.sin(theta_in) - np.hypot(*v_out) * np.sin(theta_out)
    )
    return theta_in, theta_out, residual
