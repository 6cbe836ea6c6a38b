import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qlock.dark import PairSplitting, is_dark, singlet_pair
from qlock.hamiltonian import ModelParams, Propagator, build_hamiltonian
from qlock.prep import (
    PREP_SPACE,
    StarkJumpSpec,
    prep_trajectory,
    prep_yield,
    prepare_splitting,
    shifted_params,
    sweep,
    time_averaged_yield,
)
from qlock.state import BasisState, Space, StateVector

G = (0.01, 0.013)
PARAMS = ModelParams.from_couplings(G, omega=1.0)


def test_shifted_params_examples():
    assert shifted_params(PARAMS, StarkJumpSpec()) == PARAMS
    shifted = shifted_params(PARAMS, StarkJumpSpec(target_atom=1, ds=0.1))
    assert shifted.detunings().tolist() == [0.0, 0.1]
    back = shifted_params(shifted, StarkJumpSpec(target_atom=1, ds=-0.1))
    assert back == PARAMS


def test_no_jump_gives_exact_zero():
    spec = StarkJumpSpec()
    for dt in [0.0, 1.0, 123.4, 5e4]:
        assert prep_trajectory(PARAMS, spec, dt).singlet_probability == 0.0
    assert prep_yield(PARAMS, spec).value == 0.0
    assert prep_yield(PARAMS, spec, "monte_carlo", n_samples=500).value == 0.0


def test_unshifted_amplitude_is_tiny_without_the_shortcut():
    """Even the raw propagated amplitude stays below 1e-14 when no jump is made."""
    H = build_hamiltonian(PARAMS, PREP_SPACE)
    target = singlet_pair(0, 1, G).embed(Space(2, 1, 1, (0, 1))).amplitudes
    psi0 = StateVector.basis(PREP_SPACE, BasisState(1, (0, 0))).amplitudes
    amps = Propagator(H).overlaps(target, psi0, np.linspace(0, 1e4, 200))
    assert np.abs(amps).max() < 1e-14


def test_zero_hold_time_gives_zero():
    assert prep_trajectory(PARAMS, StarkJumpSpec(ds=0.002), 0.0).singlet_probability == pytest.approx(0, abs=1e-30)


def test_positive_for_real_jumps():
    gbar = np.mean(G)
    for ds in [0.05 * gbar, 0.2 * gbar, gbar]:
        spec = StarkJumpSpec(ds=ds)
        assert prep_yield(PARAMS, spec).value > 0
        dts = np.linspace(1, 500, 50)
        assert max(prep_trajectory(PARAMS, spec, t).singlet_probability for t in dts) > 0


def test_continuity_at_zero_shift():
    values = [prep_yield(PARAMS, StarkJumpSpec(ds=ds)).value for ds in [1e-3, 1e-4, 1e-5, 1e-6]]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-8


def test_small_yield_anchor_exists():
    y = prep_yield(PARAMS, StarkJumpSpec(ds=0.05 * np.mean(G))).value
    assert 1e-5 <= y <= 1e-3


@pytest.mark.parametrize("ds,dg", [(0.002, 0.0), (0.005, 0.001), (0.0, 0.004), (-0.003, 0.0)])
def test_quadrature_matches_closed_form(ds, dg):
    spec = StarkJumpSpec(ds=ds, dg=dg)
    est = prep_yield(PARAMS, spec)
    assert est.value == pytest.approx(time_averaged_yield(PARAMS, spec), rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("ds", [0.001, 0.004])
def test_monte_carlo_matches_quadrature(ds):
    spec = StarkJumpSpec(ds=ds)
    exact = prep_yield(PARAMS, spec).value
    mc = prep_yield(PARAMS, spec, "monte_carlo", n_samples=20000, seed=11)
    assert abs(mc.value - exact) < 3 * mc.stderr


def test_monte_carlo_thread_independent():
    spec = StarkJumpSpec(ds=0.003)
    a = prep_yield(PARAMS, spec, "monte_carlo", n_samples=10000, seed=4, threads=1)
    b = prep_yield(PARAMS, spec, "monte_carlo", n_samples=10000, seed=4, threads=3)
    assert a == b


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.02, 0.02), st.floats(-0.005, 0.005), st.floats(0, 3000))
def test_singlet_probability_bounded_by_bright_cap(ds, dg, dt):
    """The singlet can only take weight that has left |1,00>, and never more than 1."""
    out = prep_trajectory(PARAMS, StarkJumpSpec(ds=ds, dg=dg), dt)
    spec = StarkJumpSpec(ds=ds, dg=dg)
    H = build_hamiltonian(shifted_params(PARAMS, spec), PREP_SPACE)
    psi0 = StateVector.basis(PREP_SPACE, BasisState(1, (0, 0))).amplitudes
    photon = abs(Propagator(H).amplitudes(psi0, dt)[-1]) ** 2
    assert 0 <= out.singlet_probability <= 1 - photon + 1e-12


def test_long_time_average_is_diagonal_sum():
    """Over a very long hold the cross terms average out: sum_k |c_k|^2 |<s|v_k>|^2."""
    spec = StarkJumpSpec(ds=0.004, hold_time_max=2e6)
    H = build_hamiltonian(shifted_params(PARAMS, spec), PREP_SPACE)
    P = Propagator(H)
    target = singlet_pair(0, 1, G).embed(Space(2, 1, 1, (0, 1))).amplitudes
    psi0 = StateVector.basis(PREP_SPACE, BasisState(1, (0, 0))).amplitudes
    diag = np.sum(np.abs(P.coefficients(psi0)) ** 2 * np.abs(P.vectors.conj().T @ target) ** 2)
    assert time_averaged_yield(PARAMS, spec) == pytest.approx(diag, rel=1e-3)


def test_attempts_follow_geometric_mean():
    spec = StarkJumpSpec(ds=0.003)
    y = prep_yield(PARAMS, spec).value
    assert 0.005 < y < 0.03
    K = PairSplitting(2, [(0, 1)])
    attempts = [prepare_splitting(PARAMS, K, spec, seed)[1][0].attempts for seed in range(1000)]
    assert np.mean(attempts) == pytest.approx(1 / y, rel=0.1)


def test_prepare_splitting_outputs():
    params = ModelParams.from_couplings([0.01, 0.012, 0.011, 0.009])
    K = PairSplitting(4, [(0, 2), (1, 3)])
    state, log = prepare_splitting(params, K, StarkJumpSpec(ds=0.01), seed=1)
    assert len(log) == 2
    assert is_dark(state, params.couplings()).dark
    assert [entry.pair for entry in log] == list(K.pairs)


def test_sweep_rows():
    rows = sweep(PARAMS, [0.0, 0.001, 0.002], [0.0, 0.001, 0.002], None, 2000, seed=5)
    assert len(rows) == 9
    assert rows[0]["yield"] == 0.0
    again = sweep(PARAMS, [0.0, 0.001, 0.002], [0.0, 0.001, 0.002], None, 2000, seed=5)
    assert rows == again


def test_default_hold_window():
    spec = StarkJumpSpec(ds=0.001)
    assert spec.t_max(PARAMS) == pytest.approx(20 * math.pi / np.mean(G))
