import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpu._validation import unitarity_distance
from lpu.data import G6, S6
from lpu.fock import transition_amplitude
from lpu.mesh import coupler
from lpu.protocols.chm import (
    CHMDescriptor,
    F6_two_param,
    FOURIER_POINT,
    chm,
    chm_equivalent,
    fourier,
    is_chm,
    parameter_grid,
    two_photon_manifold,
    ztl_violation_surface,
)

angles = st.floats(0, 2 * np.pi, exclude_max=True, allow_nan=False)


def test_fourier_is_chm():
    F = chm(CHMDescriptor("fourier", N=6))
    assert is_chm(F)
    assert np.allclose(F.conj().T @ F, np.eye(6), atol=1e-12)


def test_named_instances():
    assert is_chm(chm("S6_isolated"), 1e-9)
    # every entry of sqrt(6) S6 is a cube root of unity
    cube = (np.asarray(S6) * np.sqrt(6)) ** 3
    assert np.allclose(cube, 1.0, atol=1e-9)
    g = chm("G6_instance")
    assert np.max(np.abs(g - G6)) <= 1e-3
    assert is_chm(g, 5e-3)
    assert not is_chm(g, 1e-9)
    assert unitarity_distance(g) <= 5e-3


def test_is_chm_examples():
    assert not is_chm(np.eye(3))
    assert is_chm(coupler(0.5))
    assert not is_chm(np.ones((2, 3)))


@given(angles, angles)
def test_family_is_chm(t1, t2):
    assert is_chm(F6_two_param(t1, t2))


def test_family_contains_fourier():
    assert chm_equivalent(F6_two_param(*FOURIER_POINT), fourier(6))
    assert not chm_equivalent(chm("S6_isolated"), fourier(6))


def test_equivalence_sees_permutation_and_phases():
    gen = np.random.default_rng(0)
    F = fourier(6)
    P = np.eye(6)[gen.permutation(6)]
    D = np.diag(np.exp(1j * gen.uniform(0, 2 * np.pi, 6)))
    assert chm_equivalent(P @ D @ F @ P.T, F)


def test_descriptor_validation():
    with pytest.raises(ValueError):
        CHMDescriptor("hadamard4")
    with pytest.raises(ValueError):
        CHMDescriptor("F6_two_param", (1.0,))
    with pytest.raises(ValueError):
        CHMDescriptor("S6_isolated", N=4)
    with pytest.raises(ValueError):
        F6_two_param(7.0, 0.0)


def test_parameter_grid_contains_fourier_point():
    grid = parameter_grid(16)
    assert np.pi in grid and 0.0 in grid


def test_two_photon_manifold_values():
    grid = parameter_grid(8)
    table = two_photon_manifold(grid, grid)
    assert np.all((table.values >= 0) & (table.values <= 1))
    a, b = list(grid).index(np.pi), 0
    expected = abs(transition_amplitude(fourier(6), (1, 1, 0, 0, 0, 0), (1, 1, 0, 0, 0, 0))) ** 2
    assert table.values[a, b] == pytest.approx(expected)
    assert table.to_text().count("\n") == 65
    with pytest.raises(ValueError):
        two_photon_manifold(grid, grid, output=(1, 0, 0, 0, 0, 0))


def test_ztl_surface_minimum_at_fourier_point():
    grid = parameter_grid(8)
    table = ztl_violation_surface(grid, grid)
    assert table.argmin() == FOURIER_POINT
    assert table.values.min() <= 1e-12
