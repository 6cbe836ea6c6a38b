import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qlock.dark import (
    PairSplitting,
    SplittingError,
    all_splittings,
    apply_lowering,
    apply_raising,
    bright_fraction,
    collective_lowering,
    dark_basis,
    dark_dimension,
    is_dark,
    is_dark_eigenstate,
    perfect_matchings,
    singlet_pair,
    splitting_state,
)
from qlock.hamiltonian import ModelParams
from qlock.state import BasisState, Space, StateVector


def test_splitting_validation_and_canonical_form():
    K = PairSplitting(4, [(3, 2), (1, 0)])
    assert K.pairs == ((0, 1), (2, 3))
    assert K.complete and K.partner(2) == 3 and K.partner(5) is None
    with pytest.raises(SplittingError):
        PairSplitting(4, [(0, 1), (1, 2)])
    with pytest.raises(SplittingError):
        PairSplitting(4, [(0, 4)])
    with pytest.raises(SplittingError):
        PairSplitting(4, [(2, 2)])
    partial = PairSplitting(5, [(0, 4)])
    assert not partial.complete and partial.unmatched() == [1, 2, 3]
    assert PairSplitting.from_json(K.to_json()) == K


def test_lowering_examples():
    g = (1.0, 1.0)
    singlet = StateVector.from_terms(Space(2, 0, 1), {(0, "01"): 1, (0, "10"): -1})
    assert np.allclose(apply_lowering(singlet, g), 0)
    g = (0.3, 0.7)
    both = StateVector.from_terms(Space(2, 0, 2), {(0, "11"): 1})
    once = apply_lowering(both, g)  # sector-1 order: |01>, |10>
    assert np.allclose(once, [0.3, 0.7])
    M1, _ = collective_lowering(g, Space(2, 0, 1))
    assert np.allclose(M1 @ once, [2 * 0.3 * 0.7])


def test_is_dark_examples():
    ground = StateVector.from_terms(Space(3), {(0, "000"): 1})
    check = is_dark(ground, [1, 2, 3])
    assert check.dark and check.residual == 0
    both = StateVector.from_terms(Space(2), {(0, "11"): 1})
    check = is_dark(both, [1, 1])
    assert not check.dark and check.residual == pytest.approx(np.sqrt(2))


def test_singlet_examples():
    s = singlet_pair(0, 1, [1.0, 1.0])
    assert np.allclose(s.amplitudes, np.array([1, -1]) / np.sqrt(2))
    s = singlet_pair(1, 2, [0.0, 1.0, 2.0])
    assert np.allclose(s.amplitudes, np.array([1, -2]) / np.sqrt(5))
    assert is_dark(s, [0.0, 1.0, 2.0]).residual < 1e-15
    swapped = singlet_pair(2, 1, [0.0, 1.0, 2.0]).reorder((1, 2))
    assert np.allclose(swapped.amplitudes, -s.amplitudes)
    with pytest.raises(SplittingError):
        singlet_pair(0, 1, [0.0, 1.0])


def test_splitting_state_structure():
    g = [0.4, 0.9, 0.2, 0.6]
    psi = splitting_state(PairSplitting(4, [(0, 1), (2, 3)]), g)
    assert np.count_nonzero(np.abs(psi.amplitudes) > 1e-14) == 4
    assert psi.norm() == pytest.approx(1, abs=1e-12)
    sym = splitting_state(PairSplitting(2, [(0, 1)]), [0.5, 0.5])
    assert np.allclose(sym.amplitudes, np.array([1, -1]) / np.sqrt(2))


def test_partial_splitting_spectators_ground():
    g = [0.1, 0.2, 0.3]
    psi = splitting_state(PairSplitting(3, [(0, 2)]), g)
    assert psi.space.sector == 1
    assert psi.amplitude(BasisState(0, (0, 1, 0))) == 0
    bare = splitting_state(PairSplitting(3, [(0, 2)]), g, include_spectators=False)
    assert bare.space.labels == (0, 2)


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_every_matching_is_dark(n):
    rng = np.random.default_rng(n)
    g = rng.uniform(0.1, 1.0, n)
    for K in all_splittings(n):
        assert is_dark(splitting_state(K, g), g).residual < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([2, 4, 6, 8, 10, 12]))
def test_random_splittings_dark(seed, n):
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.01, 1.0, n)
    K = PairSplitting.random(n, rng)
    assert is_dark(splitting_state(K, g), g).residual < 1e-12


def test_dark_dimension_examples():
    assert dark_dimension([0.3, 0.8], 2, 1) == 1
    assert dark_dimension([0.3, 0.8], 2, 0) == 1
    assert dark_dimension([1, 1, 1, 1], 4, 2) == 2
    basis = dark_basis([1, 1, 1, 1], 4, 2)
    assert basis.shape == (6, 2)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_dark_dimension_is_binomial_difference(n):
    """Generic couplings: sigma-bar has full rank, so the kernel is C(n,m) - C(n,m-1)."""
    from math import comb

    g = np.random.default_rng(n).uniform(0.1, 1, n)
    for m in range(n // 2 + 1):
        assert dark_dimension(g, n, m) == comb(n, m) - (comb(n, m - 1) if m else 0)


def test_splitting_states_span_dark_space_at_n4():
    g = [0.2, 0.5, 0.7, 1.1]
    states = np.array([splitting_state(K, g).amplitudes for K in all_splittings(4)]).T
    assert np.linalg.matrix_rank(states, tol=1e-10) == dark_dimension(g, 4, 2)


def test_dark_eigenstates():
    params = ModelParams.from_couplings([0.02, 0.02], omega=1.5)
    singlet = singlet_pair(0, 1, params.couplings())
    check = is_dark_eigenstate(singlet, params)
    assert check.eigen and check.eigenvalue == pytest.approx(1.5)
    ground = StateVector.from_terms(Space(2, 0, 0), {(0, "00"): 1})
    assert is_dark_eigenstate(ground, params).eigenvalue == 0
    rng = np.random.default_rng(3)
    params = ModelParams.from_couplings(rng.uniform(0.01, 0.05, 4), omega=1.0)
    basis = dark_basis(params.couplings(), 4, 2)
    psi = StateVector(Space(4, 0, 2), basis @ rng.normal(size=basis.shape[1])).normalize()
    check = is_dark_eigenstate(psi, params)
    assert check.eigen and check.eigenvalue == pytest.approx(2.0)


def test_raising_kills_dark_states_only_for_equal_couplings():
    K = PairSplitting(4, [(0, 1), (2, 3)])
    equal = [0.3] * 4
    assert np.linalg.norm(apply_raising(splitting_state(K, equal), equal)) < 1e-12
    unequal = [0.1, 0.9, 0.3, 0.3]
    assert np.linalg.norm(apply_raising(splitting_state(K, unequal), unequal)) > 0.1


def test_perfect_matchings_counts():
    for n, count in [(2, 1), (4, 3), (6, 15), (8, 105)]:
        ms = list(perfect_matchings(range(n)))
        assert len(ms) == len(set(ms)) == count


def test_random_matching_uniform():
    rng = np.random.default_rng(0)
    counts = {}
    trials = 10_000
    for _ in range(trials):
        K = PairSplitting.random(4, rng)
        counts[K.pairs] = counts.get(K.pairs, 0) + 1
    assert len(counts) == 3
    for c in counts.values():
        assert abs(c / trials - 1 / 3) < 0.02


def test_bright_fraction_limit():
    sym = singlet_pair(0, 1, [1.0, 1.0])
    assert bright_fraction(sym, [1.0, 1.0]) < 1e-20
    for s in [1e-3, 1e-6, 1e-12, 0.0]:
        expected = (1 - s) ** 2 / (2 * (1 + s * s))
        assert bright_fraction(sym, [s, 1.0]) == pytest.approx(expected, abs=1e-12)
