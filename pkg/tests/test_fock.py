import math
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpu.fock import (
    OutcomeDistribution,
    classical_probability,
    enumerate_outcomes,
    format_table,
    mode_assignment,
    output_distribution,
    parse_table,
    permanent,
    sample_counts,
    statistical_fidelity,
    total_variation,
    transition_amplitude,
)
from lpu.mesh import coupler
from lpu.protocols.boson import ztl_suppressed
from lpu.protocols.chm import fourier

from oracles import brute_force_classical, ginibre_haar, leibniz_permanent

BS = coupler(0.5)


def _random_complex(n, gen):
    return gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))


def test_permanent_small_cases():
    assert permanent(np.eye(4)) == pytest.approx(1.0)
    for n in range(1, 7):
        assert permanent(np.ones((n, n))) == pytest.approx(math.factorial(n))
    a, b, c, d = 1 + 2j, 0.5, -1j, 3.0
    assert permanent(np.array([[a, b], [c, d]])) == pytest.approx(a * d + b * c)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_permanent_matches_leibniz(n, seed):
    A = _random_complex(n, np.random.default_rng(seed))
    ref = leibniz_permanent(A)
    assert abs(permanent(A) - ref) <= 1e-12 * max(abs(ref), 1.0)


def test_permanent_20x20_runtime():
    A = _random_complex(20, np.random.default_rng(0))
    permanent(A[:3, :3])  # compile
    start = time.perf_counter()
    permanent(A)
    assert time.perf_counter() - start < 2.0


def test_hong_ou_mandel():
    assert abs(transition_amplitude(BS, (1, 1), (1, 1))) <= 1e-15
    assert abs(transition_amplitude(BS, (1, 1), (2, 0))) ** 2 == pytest.approx(0.5)
    assert classical_probability(BS, (1, 1), (1, 1)) == pytest.approx(0.5)


def test_transition_amplitude_errors():
    with pytest.raises(ValueError):
        transition_amplitude(BS, (1, 1), (1, 0))
    with pytest.raises(ValueError):
        transition_amplitude(BS, (1, 1, 0), (1, 1, 0))


def test_fourier_suppressed_triples():
    F = fourier(6)
    inp = (1, 0, 1, 0, 1, 0)
    flagged = 0
    for out in enumerate_outcomes(6, 3, "collision-free"):
        if ztl_suppressed(inp, mode_assignment(out)):
            flagged += 1
            assert abs(transition_amplitude(F, inp, out)) <= 1e-12
    assert flagged == 12


def test_enumerate_counts():
    assert len(enumerate_outcomes(6, 3, "collision-free")) == 20
    assert enumerate_outcomes(2, 2) == [(2, 0), (1, 1), (0, 2)]
    assert len(enumerate_outcomes(6, 6)) == math.comb(11, 5) == 462
    with pytest.raises(ValueError):
        enumerate_outcomes(2, 3, "collision-free")


@given(st.integers(1, 6), st.integers(1, 4))
def test_enumerate_ordered_and_unique(m, n):
    outs = enumerate_outcomes(m, n)
    keys = [mode_assignment(o) for o in outs]
    assert keys == sorted(set(keys))


@given(st.integers(2, 8), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_quantum_distribution_normalized(m, n, seed):
    gen = np.random.default_rng(seed)
    U = ginibre_haar(m, gen)
    inp = tuple(np.bincount(gen.integers(0, m, n), minlength=m))
    dist = output_distribution(U, inp)
    assert dist.total == pytest.approx(1.0, abs=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_classical_matches_brute_force_and_phase_invariance(seed):
    gen = np.random.default_rng(seed)
    U = ginibre_haar(4, gen)
    inp = (2, 1, 0, 0)
    phases = np.exp(1j * gen.uniform(0, 2 * np.pi, (4, 4)))
    a = output_distribution(U, inp, "classical")
    b = output_distribution(U * phases, inp, "classical")
    for out, p in a.probabilities.items():
        assert p == pytest.approx(brute_force_classical(U, inp, out), abs=1e-12)
        assert b[out] == pytest.approx(p, abs=1e-12)
    assert a.total == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1))
def test_single_photon_quantum_equals_classical(seed):
    U = ginibre_haar(5, np.random.default_rng(seed))
    q = output_distribution(U, (0, 0, 1, 0, 0)).as_array()
    c = output_distribution(U, (0, 0, 1, 0, 0), "classical").as_array()
    assert np.allclose(q, c, atol=1e-12)


def test_restricted_distribution_keeps_mass():
    F = fourier(6)
    dist = output_distribution(F, (1, 0, 1, 0, 1, 0), subspace="collision-free")
    assert len(dist) == 20
    assert 0 < dist.total < 1
    norm = dist.normalized()
    assert norm.is_normalized()
    assert norm.success_probability == pytest.approx(dist.total)


def test_distribution_validation():
    with pytest.raises(ValueError):
        OutcomeDistribution({(1, 0): -0.5}, 2, 1)
    with pytest.raises(ValueError):
        output_distribution(BS, (1, 1), model="semi")


def test_sample_counts():
    assert sample_counts({(1, 0): 1.0, (0, 1): 0.0}, 100, 0) == {(1, 0): 100, (0, 1): 0}
    outs = enumerate_outcomes(6, 3, "collision-free")
    uniform = {o: 1 / 20 for o in outs}
    counts = sample_counts(uniform, 10**6, 1)
    sigma = math.sqrt(10**6 * (1 / 20) * (19 / 20))
    assert all(abs(c - 5e4) <= 5 * sigma for c in counts.values())
    assert sample_counts(uniform, 500, 9) == sample_counts(uniform, 500, 9)
    with pytest.raises(ValueError):
        sample_counts({(1, 0): 0.5}, 10, 0)


def test_statistical_fidelity_examples():
    p = {(1, 0): 0.5, (0, 1): 0.5}
    q = {(1, 0): 1.0, (0, 1): 0.0}
    assert statistical_fidelity(p, p) == pytest.approx(1.0)
    assert statistical_fidelity(q, {(1, 0): 0.0, (0, 1): 1.0}) == 0.0
    assert statistical_fidelity(p, q) == pytest.approx(1 / math.sqrt(2))
    assert total_variation(p, q) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        statistical_fidelity(p, {(1, 0): 1.0})


def test_table_text_round_trip():
    dist = output_distribution(fourier(4), (1, 1, 0, 0))
    text = format_table(dist.probabilities, 4, 2, "full", seed=3)
    header, table = parse_table(text)
    assert header["m"] == "4" and header["seed"] == "3"
    assert table == dist.probabilities
