import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import kstest, ks_2samp

from lpu._validation import NonUnitaryError, check_unitary
from lpu.data import BSG_MATRIX, BSG_PHASES, HERALDED_CNOT_MATRIX, HERALDED_CNOT_PHASES
from lpu.mesh import (
    MeshConfig,
    compose,
    decompose,
    gauge_fix,
    haar_sample,
    mesh_positions,
    mzi_transfer,
    unitary_fidelity,
)
from lpu.protocols.chm import fourier

from oracles import ginibre_haar

angles = st.floats(0, 2 * np.pi, allow_nan=False, exclude_max=True)


def _is_diagonal_up_to_phase(M, tol=1e-12):
    return np.allclose(np.abs(M), np.eye(len(M)), atol=tol)


def test_mzi_bar_and_cross_points():
    bar = mzi_transfer(np.pi, 0.0)
    assert _is_diagonal_up_to_phase(bar)
    cross = mzi_transfer(0.0, 0.0)
    assert np.allclose(np.abs(cross), [[0, 1], [1, 0]], atol=1e-12)


@given(angles, angles)
def test_mzi_unitary(alpha, phi):
    T = mzi_transfer(alpha, phi)
    assert np.allclose(T.conj().T @ T, np.eye(2), atol=1e-12)


def test_mesh_positions_cover_triangle():
    pos = mesh_positions(6)
    assert len(pos) == 15 == len(set(pos))
    with pytest.raises(ValueError):
        mesh_positions(1)


def test_config_validation():
    with pytest.raises(ValueError):
        MeshConfig(3, MeshConfig.bar(4).params)
    with pytest.raises(ValueError):
        MeshConfig.from_table([[(0, 0), (0, 0)], [(0, 0), (0, 0)]])


def test_table_round_trip():
    config = MeshConfig.from_table(BSG_PHASES)
    again = MeshConfig.from_table(config.to_table())
    assert again == config
    assert MeshConfig.from_dict(config.to_dict()) == config


def test_all_bar_is_diagonal():
    U = compose(MeshConfig.bar(6))
    assert _is_diagonal_up_to_phase(U)


@pytest.mark.parametrize(
    "phases, printed",
    [(BSG_PHASES, BSG_MATRIX), (HERALDED_CNOT_PHASES, HERALDED_CNOT_MATRIX)],
    ids=["bsg", "heralded_cnot"],
)
def test_golden_matrices_after_gauge_fix(phases, printed):
    U = compose(MeshConfig.from_table(phases))
    assert np.max(np.abs(np.abs(U) - np.abs(printed))) <= 2e-3
    fixed, _, _ = gauge_fix(U, printed)
    assert np.max(np.abs(fixed - printed)) <= 2e-3


def test_decompose_identity_is_all_bar():
    config = decompose(np.eye(6))
    assert np.allclose(config.alphas, np.pi, atol=1e-12)


def test_decompose_fourier():
    F = fourier(6)
    config = decompose(F)
    assert 1 - unitary_fidelity(compose(config), F) <= 1e-10
    # without output phases it agrees with F up to a diagonal
    bare = compose(config, include_output_phases=False)
    fixed, _, _ = gauge_fix(bare, F)
    assert np.allclose(fixed, F, atol=1e-9)


def test_decompose_rejects_non_unitary():
    with pytest.raises(NonUnitaryError):
        decompose(np.ones((3, 3)))


def test_round_trip_many_random_unitaries():
    gen = np.random.default_rng(1)
    worst = 1.0
    for _ in range(1000):
        U = ginibre_haar(6, gen)
        worst = min(worst, unitary_fidelity(compose(decompose(U)), U))
    assert worst >= 1 - 1e-9


@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_round_trip_property(m, seed):
    U = ginibre_haar(m, np.random.default_rng(seed))
    V = compose(decompose(U))
    assert np.allclose(V, U, atol=1e-9)


@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_compose_is_unitary(m, seed):
    config = haar_sample(m, seed)
    check_unitary(compose(config), atol=1e-12)


def test_haar_m2_uniform_marginal():
    gen = np.random.default_rng(2)
    x = [abs(compose(haar_sample(2, gen))[0, 0]) ** 2 for _ in range(10_000)]
    assert kstest(x, "uniform").pvalue > 0.01


def test_haar_matches_ginibre_oracle():
    gen = np.random.default_rng(3)
    ours = np.array([compose(haar_sample(6, gen))[0, 0] for _ in range(10_000)])
    ref = np.array([ginibre_haar(6, gen)[0, 0] for _ in range(10_000)])
    assert ks_2samp(np.abs(ours) ** 2, np.abs(ref) ** 2).pvalue > 0.01
    assert ks_2samp(np.angle(ours), np.angle(ref)).pvalue > 0.01


def test_haar_entry_means():
    gen = np.random.default_rng(4)
    m, n = 4, 10_000
    P = np.array([np.abs(compose(haar_sample(m, gen))) ** 2 for _ in range(n)])
    # |U_ij|^2 ~ Beta(1, m-1): variance (m-1) / (m^2 (m+1))
    sigma = np.sqrt((m - 1) / (m ** 2 * (m + 1)) / n)
    assert np.all(np.abs(P.mean(axis=0) - 1 / m) <= 3 * sigma)


def test_haar_seeded_repeatable():
    assert haar_sample(6, 7) == haar_sample(6, 7)
    assert haar_sample(6, 7) != haar_sample(6, 8)


def test_unitary_fidelity_examples():
    U = ginibre_haar(6, np.random.default_rng(5))
    F = fourier(6)
    assert unitary_fidelity(U, U) == pytest.approx(1.0)
    assert unitary_fidelity(np.eye(6), F) == pytest.approx(abs(np.trace(F) / 6) ** 2)
    assert unitary_fidelity(U, np.exp(0.7j) * U) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        unitary_fidelity(np.eye(2), np.eye(3))


@given(st.integers(0, 2**32 - 1))
def test_unitary_fidelity_common_unitary_invariance(seed):
    gen = np.random.default_rng(seed)
    U, V, W = (ginibre_haar(5, gen) for _ in range(3))
    assert unitary_fidelity(W @ U, W @ V) == pytest.approx(unitary_fidelity(U, V), abs=1e-12)


def test_gauge_fix_trivial_and_random_diagonal():
    gen = np.random.default_rng(6)
    U = ginibre_haar(6, gen)
    fixed, left, right = gauge_fix(U, U)
    assert np.allclose(fixed, U, atol=1e-10)
    # trivial diagonals, up to a phase moved between the two sides
    assert np.allclose(np.exp(1j * (left[:, None] + right[None, :])), 1.0, atol=1e-10)
    D = np.exp(1j * gen.uniform(0, 2 * np.pi, 6))
    E = np.exp(1j * gen.uniform(0, 2 * np.pi, 6))
    fixed, _, _ = gauge_fix(D[:, None] * U * E[None, :], U)
    assert np.allclose(fixed, U, atol=1e-10)
