import numpy as np
import pytest

from nlslab.effective import (
    KIND_2D,
    KIND_DECREASING,
    KIND_INCREASING,
    EffectiveError,
    EffectiveState,
    StepRejection,
    center_anchor,
    default_kappa,
    galilean_boost,
    integrate_effective,
    interaction_time,
    invariant_slope,
    ode_rhs,
    predict_outcome,
    refraction_angles,
)
from nlslab.grids import Field, l2_norm, make_grid
from nlslab.potentials import PotentialSpec
from nlslab.solitons import exponents


def test_rhs_flat_region(pot_inc):
    state = EffectiveState(C=1.0, V=1.0, U=-1e6, H=0.0)
    d = ode_rhs(KIND_INCREASING, state, pot_inc, 3.0)
    assert d.C == 0.0 and d.V == 0.0
    assert d.U == 1.0


def test_rhs_center_values(pot_inc):
    state = EffectiveState(C=1.0, V=1.0, U=0.0, H=0.0)
    d = ode_rhs(KIND_INCREASING, state, pot_inc, 3.0)
    eps = pot_inc.epsilon
    assert d.V == pytest.approx(eps * 4.0 / 9.0)
    assert d.C == pytest.approx(eps * 2.0 / 3.0)


def test_rhs_kind_mismatch(pot_inc):
    state = EffectiveState(C=1.0, V=1.0, U=0.0, H=0.0)
    with pytest.raises(EffectiveError):
        ode_rhs(KIND_DECREASING, state, pot_inc, 3.0)


def test_2d_kind_requires_subcritical(pot_inc):
    state = EffectiveState(C=1.0, V=1.0, U=0.0, H=0.0)
    with pytest.raises(EffectiveError):
        ode_rhs(KIND_2D, state, pot_inc, 3.0)


def test_invariant_conserved_increasing():
    pot = PotentialSpec("increasing", epsilon=0.05, steepness=1.0)
    te = interaction_time(1.0, 0.05)
    traj = integrate_effective(
        KIND_INCREASING, EffectiveState(1.0, 1.0, -te, 0.0), pot, 3.0,
        -te, te, dt=0.05)
    assert traj.invariant_drift.max() < 1e-10


def test_closed_form_scaling_law():
    pot = PotentialSpec("increasing", epsilon=0.05, steepness=1.0)
    te = interaction_time(1.0, 0.05)
    traj = integrate_effective(
        KIND_INCREASING, EffectiveState(1.0, 1.0, -te, 0.0), pot, 3.0,
        -te, te, dt=0.05)
    ratio = pot.value(0.05 * traj.U) / pot.value(0.05 * traj.U[0])
    predicted = ratio ** (4.0 / (5.0 - 3.0))
    assert np.max(np.abs(traj.C - predicted)) < 1e-8


def test_decreasing_parabola():
    m, v0 = 3.0, 0.8
    pot = PotentialSpec("decreasing", epsilon=0.05, a_minus=1.0, a_plus=0.5,
                        steepness=1.0)
    te = interaction_time(v0, 0.05)
    traj = integrate_effective(
        KIND_DECREASING, EffectiveState(1.0, v0, -v0 * te, 0.0), pot, m,
        -te, 3 * te, dt=0.05)
    lam0 = exponents(m).lambda0
    c0 = 1.0 - v0**2 / (4.0 * lam0)
    assert np.max(np.abs(traj.C - (c0 + traj.V**2 / (4.0 * lam0)))) < 1e-8


def test_reflection_turning_point_and_exit():
    m, v0, eps = 3.0, 0.8, 0.05
    pot = PotentialSpec("decreasing", epsilon=eps, a_minus=1.0, a_plus=0.5,
                        steepness=8.0)
    te = interaction_time(v0, eps)
    traj = integrate_effective(
        KIND_DECREASING, EffectiveState(1.0, v0, -1.3 * v0 * te, 0.0), pot, m,
        -1.3 * te, 6 * te)
    lam0 = exponents(m).lambda0
    c0 = 1.0 - v0**2 / (4.0 * lam0)
    tp = traj.turning_point()
    assert tp is not None
    assert abs(tp[1] - c0) < 1e-6
    assert np.sum(np.diff(np.sign(traj.V)) != 0) == 1
    # once deep on the flat side again the velocity saturates at -v0
    deep = traj.U < -10.0 / (pot.steepness * eps)
    deep &= traj.t > tp[0]
    assert np.max(np.abs(traj.V[deep] + v0)) < 1e-6


def test_monotone_increasing_bounded():
    pot = PotentialSpec("increasing", epsilon=0.05, steepness=5.0)
    te = interaction_time(1.0, 0.05)
    traj = integrate_effective(
        KIND_INCREASING, EffectiveState(1.0, 1.0, -te, 0.0), pot, 3.0, -te, te)
    pred = predict_outcome(3.0, 1.0, pot)
    assert np.all(np.diff(traj.C) > 0)
    assert np.all(np.diff(traj.V) > 0)
    assert np.all(traj.C < pred.c_inf)
    assert np.all(traj.V < pred.v_inf)


def test_endpoints_match_asymptotics():
    pot = PotentialSpec("increasing", epsilon=0.05, steepness=5.0)
    te = interaction_time(1.0, 0.05)
    traj = integrate_effective(
        KIND_INCREASING, EffectiveState(1.0, 1.0, -te, 0.0), pot, 3.0, -te, te)
    pred = predict_outcome(3.0, 1.0, pot)
    assert abs(traj.C[-1] - pred.c_inf) / pred.c_inf < 1e-4
    assert abs(traj.V[-1] - pred.v_inf) / pred.v_inf < 1e-4


def test_rk4_order():
    pot = PotentialSpec("increasing", epsilon=0.1, steepness=1.0)
    init = EffectiveState(1.0, 1.0, -10.0, 0.0)
    ref = integrate_effective(KIND_INCREASING, init, pot, 3.0, -10, 10, dt=0.003125)
    errs = []
    for dt in (0.1, 0.05):
        traj = integrate_effective(KIND_INCREASING, init, pot, 3.0, -10, 10, dt=dt)
        errs.append(abs(traj.C[-1] - ref.C[-1]))
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.35)


def test_step_rejection_guard():
    pot = PotentialSpec("increasing", epsilon=0.2, steepness=9.0)
    init = EffectiveState(1.0, 1.0, -30.0, 0.0)
    with pytest.raises(StepRejection):
        integrate_effective(KIND_INCREASING, init, pot, 3.0, -30, 30, dt=8.0,
                            guard_tol=1e-12)


def test_predictions_m3(pot_inc):
    pred = predict_outcome(3.0, 1.0, pot_inc)
    assert pred.kind == "transmitted"
    assert pred.c_inf == pytest.approx(4.0)
    assert pred.v_inf == pytest.approx(np.sqrt(5.0))
    assert pred.lambda_inf == pytest.approx(2.0 ** (-0.5))


def test_predictions_m2(pot_inc):
    pred = predict_outcome(2.0, 1.0, pot_inc)
    assert pred.c_inf == pytest.approx(2.0 ** (4.0 / 3.0))
    assert pred.v_inf == pytest.approx(2.1558, abs=2e-4)


def test_prediction_reflection(pot_dec):
    pred = predict_outcome(3.0, 0.8, pot_dec)
    assert pred.kind == "reflected"
    assert pred.v_inf == -0.8
    assert pred.c_inf == 1.0


def test_prediction_transmission_over_threshold(pot_dec):
    # threshold is 4*lambda0*(1 - 0.25) = 1, so v0 = 1.2 transmits
    pred = predict_outcome(3.0, 1.2, pot_dec)
    assert pred.kind == "transmitted"
    assert pred.c_inf == pytest.approx(0.25)
    assert pred.v_inf == pytest.approx(np.sqrt(1.2**2 + (4.0 / 3.0) * (0.25 - 1.0)))


def test_prediction_critical():
    lam0 = exponents(3.0).lambda0
    pot = PotentialSpec("decreasing", epsilon=0.05, a_minus=1.0, a_plus=0.5)
    v_crit = np.sqrt(4.0 * lam0 * (1.0 - 0.25))
    pred = predict_outcome(3.0, float(v_crit), pot)
    assert pred.kind == "critical"


def test_center_anchor_consistency():
    pot = PotentialSpec("increasing", epsilon=0.05, steepness=5.0)
    anchor = center_anchor(3.0, 1.0, pot)
    slope = invariant_slope(KIND_INCREASING, 3.0)
    assert anchor.V**2 - slope * anchor.C == pytest.approx(1.0 - slope, abs=1e-12)
    assert anchor.C == pytest.approx(pot.value(0.0) ** 2.0)


def test_kappa_default():
    assert default_kappa(2.0) == 1.5
    assert default_kappa(2.5) == 1.75


def test_boost_identity_and_mass():
    g = make_grid(64, 20.0, dim=2)
    rng = np.random.default_rng(2)
    f = Field(g, rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64)))
    same = galilean_boost(f, 0.0, 0.0)
    assert np.array_equal(same.values, f.values)
    boosted = galilean_boost(f, 0.8, 0.35)
    assert abs(l2_norm(boosted) - l2_norm(f)) < 1e-12 * l2_norm(f)


def test_boost_requires_2d(grid_1d):
    f = Field(grid_1d, np.zeros(grid_1d.n, dtype=complex))
    with pytest.raises(EffectiveError):
        galilean_boost(f, 1.0, 0.0)


def test_refraction_law(pot_inc):
    th_in, th_out, res = refraction_angles((1.0, 1.0), 2.0, pot_inc)
    assert th_in == pytest.approx(np.pi / 4.0)
    assert th_out < th_in
    assert res < 1e-10
    th_in0, th_out0, res0 = refraction_angles((1.0, 0.0), 2.0, pot_inc)
    assert th_in0 == 0.0 and th_out0 == 0.0 and res0 == 0.0


def test_refraction_rejects_nonpositive_axial(pot_inc):
    with pytest.raises(EffectiveError):
        refraction_angles((-1.0, 1.0), 2.0, pot_inc)
