"""Modulation-parameter extraction from numerical fields.

Four real projection conditions (two complex inner products against the
soliton and its derivative, both carried on the fitted phase) pin down
(c, v, rho, gamma) at each snapshot. The Newton iteration uses the fully
analytic Jacobian; tracking chains fits with warm starts and keeps the
phase unwrapped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .corrections import AnsatzState, CorrectionConstants, assemble_approximate, correction_constants
from .grids import Field, h1_norm, l2_norm
from .potentials import PotentialSpec
from .solitons import (
    SolitonParams,
    exponents,
    profile_derivative,
    profile_second_derivative,
    scale_derivative,
    scale_derivative_dx,
    soliton_profile,
)


class FitLostLockError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


def _snapshot_reference(m, c, v, rho, gamma, pot: PotentialSpec, grid):
    """Order-zero ansatz at a frozen time: Q_c(y) e^{i(vx/2+gamma)} / atilde."""
    atilde = float(pot.value(pot.epsilon * rho)) ** (1.0 / (m - 1.0))
    y = grid.x - rho
    phase = np.exp(1j * (0.5 * v * grid.x + gamma))
    return (soliton_profile(m, c, y) / atilde) * phase, atilde, y


def fit_modulation(u: Field, guess: SolitonParams, pot: PotentialSpec,
                   tol_factor: float = 1e-10, max_iter: int = 50) -> SolitonParams:
    """Newton solve of the four projection conditions from a nearby guess."""
    grid = u.grid
    if grid.dim != 1:
        raise FitLostLockError("modulation fit is defined for 1D fields")
    m = guess.m
    x = grid.x
    w = grid.dx
    uv = u.values
    unorm = l2_norm(u)

    ref0, _, _ = _snapshot_reference(m, guess.c, guess.v, guess.rho, guess.gamma, pot, grid)
    if l2_norm(uv - ref0, grid) > 0.3 * l2_norm(ref0, grid):
        raise FitLostLockError("guess outside fit basin")

    i_q2_unit = None  # integral of the unit-scaling profile squared
    theta_exp = 2.0 * exponents(m).theta

    p = np.array([guess.c, float(np.asarray(guess.v)), float(np.asarray(guess.rho)),
                  guess.gamma], dtype=float)

    def system(pvec):
        nonlocal i_q2_unit
        c, v, rho, gamma = pvec
        if c <= 0:
            raise FitLostLockError("scaling went nonpositive during fit")
        y = x - rho
        qc = soliton_profile(m, c, y)
        qcp = profile_derivative(m, c, y)
        qcpp = profile_second_derivative(m, c, y)
        lam = scale_derivative(m, c, y)
        lamp = scale_derivative_dx(m, c, y)
        eiT = np.exp(1j * (0.5 * v * x + gamma))
        r = pot.epsilon * rho
        a_val = float(pot.value(r))
        a_slope = float(pot.value(r, 1))
        atilde = a_val ** (1.0 / (m - 1.0))
        datilde = (1.0 / (m - 1.0)) * a_val ** (1.0 / (m - 1.0) - 1.0) * a_slope

        if i_q2_unit is None:
            q_unit = soliton_profile(m, 1.0, x)
            i_q2_unit = float(np.sum(q_unit * q_unit) * w)
        i_qc2 = c**theta_exp * i_q2_unit

        w1 = qc * eiT
        w2 = qcp * eiT
        g1 = np.sum(np.conj(uv) * w1) * w - i_qc2 / atilde
        g2 = np.sum(np.conj(uv) * w2) * w

        def proj(weight):
            return np.sum(np.conj(uv) * weight) * w

        dg1 = [
            proj(lam * eiT) - theta_exp * c ** (theta_exp - 1.0) * i_q2_unit / atilde,
            proj(0.5j * x * w1),
            proj(-qcp * eiT) + pot.epsilon * datilde / atilde**2 * i_qc2,
            proj(1j * w1),
        ]
        dg2 = [
            proj(lamp * eiT),
            proj(0.5j * x * w2),
            proj(-qcpp * eiT),
            proj(1j * w2),
        ]
        F = np.array([g1.real, g1.imag, g2.real, g2.imag])
        J = np.zeros((4, 4))
        for j in range(4):
            J[0, j] = dg1[j].real
            J[1, j] = dg1[j].imag
            J[2, j] = dg2[j].real
            J[3, j] = dg2[j].imag
        scale1 = l2_norm(w1, grid)
        scale2 = l2_norm(w2, grid)
        metric = max(abs(g1) / scale1, abs(g2) / scale2)
        return F, J, metric

    F, J, metric = system(p)
    tol = tol_factor * unorm
    for _ in range(max_iter):
        if metric < tol:
            break
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise FitLostLockError(f"singular fit Jacobian: {exc}", residual=metric)
        lam_damp = 1.0
        for _ in range(10):
            trial = p + lam_damp * step
            try:
                F_t, J_t, metric_t = system(trial)
            except FitLostLockError:
                lam_damp *= 0.5
                continue
            if metric_t <= metric or lam_damp < 1e-3:
                p, F, J, metric = trial, F_t, J_t, metric_t
                break
            lam_damp *= 0.5
        else:
            raise FitLostLockError("fit lost lock (no descent step)", residual=metric)
    else:
        raise FitLostLockError("fit lost lock (no convergence)", residual=metric)

    c, v, rho, gamma = p
    amp = float(pot.value(pot.epsilon * rho)) ** (1.0 / (m - 1.0))
    return SolitonParams(m=m, c=c, v=v, rho=rho, gamma=gamma, amp=amp)


def fit_residual(u: Field, params: SolitonParams, pot: PotentialSpec) -> float:
    """Convergence metric of a fitted snapshot (max normalized projection)."""
    grid = u.grid
    ref, atilde, y = _snapshot_reference(params.m, params.c, params.v, params.rho,
                                         params.gamma, pot, grid)
    z = u.values - ref
    eiT = np.exp(1j * (0.5 * params.v * grid.x + params.gamma))
    qc = soliton_profile(params.m, params.c, y)
    qcp = profile_derivative(params.m, params.c, y)
    w = grid.dx
    g1 = np.sum(np.conj(z) * qc * eiT) * w
    g2 = np.sum(np.conj(z) * qcp * eiT) * w
    return float(max(abs(g1) / l2_norm(qc, grid), abs(g2) / l2_norm(qcp, grid)))


@dataclass
class ModulationTrack:
    times: np.ndarray
    c: np.ndarray
    v: np.ndarray
    rho: np.ndarray
    gamma: np.ndarray
    fit_residual: np.ndarray
    remainder_h1: np.ndarray
    truncated: bool = False
    lock_loss_reason: str = ""

    def final_params(self, m: float) -> SolitonParams:
        return SolitonParams(m=m, c=float(self.c[-1]), v=float(self.v[-1]),
                             rho=float(self.rho[-1]), gamma=float(self.gamma[-1]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "c", "v", "rho", "gamma", "fit_residual", "remainder_h1"])
            for row in zip(self.times, self.c, self.v, self.rho, self.gamma,
                           self.fit_residual, self.remainder_h1):
                writer.writerow([repr(float(x)) for x in row])


def remainder_norm(u: Field, params: SolitonParams, pot: PotentialSpec,
                   order: int = 0, consts: CorrectionConstants | None = None) -> float:
    """Sobolev distance from the snapshot to the fitted ansatz at a given order."""
    grid = u.grid
    if order == 0:
        ref, _, _ = _snapshot_reference(params.m, params.c, params.v, params.rho,
                                        params.gamma, pot, grid)
        return h1_norm(Field(grid, u.values - ref))
    state = AnsatzState(
        m=params.m, pot=pot, c=params.c, v=float(np.asarray(params.v)),
        rho=float(np.asarray(params.rho)), theta0=params.gamma, order=order,
    )
    ansatz = assemble_approximate(state, grid, consts)
    return h1_norm(Field(grid, u.values - ansatz.values))


def advance_guess(params: SolitonParams, dt: float) -> SolitonParams:
    """Frozen-parameter predictor for the next snapshot's warm start."""
    v = float(np.asarray(params.v))
    return SolitonParams(
        m=params.m, c=params.c, v=v,
        rho=float(np.asarray(params.rho)) + v * dt,
        gamma=params.gamma + (params.c - 0.25 * v * v) * dt,
        amp=params.amp,
    )


class OnlineTracker:
    """Warm-started sequential fitting fed one snapshot at a time."""

    def __init__(self, pot: PotentialSpec, init_guess: SolitonParams,
                 order: int = 0, consts: CorrectionConstants | None = None):
        self.pot = pot
        self.order = order
        self.m = init_guess.m
        if order > 0 and consts is None:
            consts = correction_constants(self.m)
        self.consts = consts
        self._guess = init_guess
        self._last_time: float | None = None
        self._rows: list = []
        self.truncated = False
        self.lock_loss_reason = ""

    def feed(self, t: float, f: Field) -> bool:
        """Fit one snapshot; returns False once lock is lost."""
        if self.truncated:
            return False
        guess = self._guess
        if self._last_time is not None:
            guess = advance_guess(guess, t - self._last_time)
        try:
            fitted = fit_modulation(f, guess, self.pot)
        except FitLostLockError as exc:
            self.truncated = True
            self.lock_loss_reason = str(exc)
            return False
        gamma = fitted.gamma
        k = round((guess.gamma - gamma) / (2.0 * np.pi))
        gamma += 2.0 * np.pi * k
        fitted = SolitonParams(m=self.m, c=fitted.c, v=fitted.v, rho=fitted.rho,
                               gamma=gamma, amp=fitted.amp)
        self._rows.append(
            (t, fitted.c, float(np.asarray(fitted.v)), float(np.asarray(fitted.rho)),
             gamma, fit_residual(f, fitted, self.pot),
             remainder_norm(f, fitted, self.pot, self.order, self.consts))
        )
        self._guess = fitted
        self._last_time = t
        return True

    def finish(self) -> ModulationTrack:
        if not self._rows:
            raise FitLostLockError(
                f"first snapshot failed to fit: {self.lock_loss_reason}")
        arr = np.array(self._rows)
        return ModulationTrack(
            times=arr[:, 0], c=arr[:, 1], v=arr[:, 2], rho=arr[:, 3], gamma=arr[:, 4],
            fit_residual=arr[:, 5], remainder_h1=arr[:, 6],
            truncated=self.truncated, lock_loss_reason=self.lock_loss_reason,
        )


def track(snapshots, pot: PotentialSpec, init_guess: SolitonParams,
          order: int = 0, consts: CorrectionConstants | None = None) -> ModulationTrack:
    """Sequential warm-started fits over (t, field) snapshots.

    Lock loss truncates the track and flags it instead of raising; the
    phase column is continuity-unwrapped.
    """
    tracker = OnlineTracker(pot, init_guess, order, consts)
    for t, f in snapshots:
        if not tracker.feed(t, f):
            break
    return tracker.finish()
