import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpu.chip import ChipModel
from lpu.fock import enumerate_outcomes, mode_assignment, output_distribution
from lpu.protocols.boson import (
    bayesian_verify,
    boson_sampling_campaign,
    events_to_threshold,
    sample_events,
    six_fold_distribution,
    ztl_period,
    ztl_predicate,
    ztl_suppressed,
    ztl_violation,
)
from lpu.protocols.chm import fourier

from oracles import brute_force_classical

F6 = fourier(6)
PERIODIC = (1, 0, 1, 0, 1, 0)


def test_ztl_formula_examples():
    assert ztl_period(PERIODIC) == 2
    assert not ztl_suppressed(PERIODIC, (1, 2, 3))
    assert ztl_suppressed(PERIODIC, (1, 2, 4))
    with pytest.raises(ValueError):
        ztl_period((1, 1, 0, 0, 0, 0))
    with pytest.raises(ValueError):
        ztl_suppressed(PERIODIC, (1, 2))


def test_ztl_quantum_suppression_exact():
    dist = output_distribution(F6, PERIODIC, subspace="collision-free")
    pred = ztl_predicate(PERIODIC)
    flagged = [k for k in dist.probabilities if pred(k)]
    assert len(dist) == 20 and len(flagged) == 12
    assert all(dist[k] <= 1e-12 for k in flagged)
    assert ztl_violation(dist.probabilities, pred) <= 1e-12


def test_ztl_classical_violation_matches_brute_force():
    pred = ztl_predicate(PERIODIC)
    dist = output_distribution(F6, PERIODIC, "classical", "collision-free")
    nu = ztl_violation(dist.probabilities, pred)
    outs = enumerate_outcomes(6, 3, "collision-free")
    ref = {o: brute_force_classical(F6, PERIODIC, o) for o in outs}
    expected = sum(p for o, p in ref.items() if pred(o)) / sum(ref.values())
    assert nu > 0
    assert nu == pytest.approx(expected, abs=1e-9)


def test_ztl_violation_needs_events():
    with pytest.raises(ValueError):
        ztl_violation({(1, 0): 0}, lambda k: True)


def test_campaign_infinite_shots_gives_unit_fidelity():
    res = boson_sampling_campaign(5, shots=None, rng=1)
    assert np.allclose(res.fidelities, 1.0)


def test_campaign_reproducible_and_histogram():
    a = boson_sampling_campaign(10, rng=2)
    b = boson_sampling_campaign(10, rng=2)
    assert np.array_equal(a.fidelities, b.fidelities)
    counts, _ = a.histogram()
    assert counts.sum() == 10


def test_campaign_chip_ideal_and_phase_noise():
    chip = ChipModel.ideal(6)
    clean = boson_sampling_campaign(10, shots=10_000, backend="chip", chip=chip, rng=3)
    noisy = boson_sampling_campaign(
        10, shots=10_000, backend="chip", chip=chip.replace(phase_noise=0.035), rng=3
    )
    assert clean.mean >= 0.995
    assert noisy.mean < clean.mean


def test_campaign_backend_validation():
    with pytest.raises(ValueError):
        boson_sampling_campaign(1, backend="chip")
    with pytest.raises(ValueError):
        boson_sampling_campaign(1, backend="fpga")


def test_six_fold_distribution_is_normalized():
    dist = six_fold_distribution(F6)
    assert sum(dist.values()) == pytest.approx(1.0)
    assert all(max(k) <= 2 for k in dist)


def test_bayes_towards_true_model():
    P_Q = six_fold_distribution(F6, PERIODIC, "quantum")
    P_C = six_fold_distribution(F6, PERIODIC, "classical")
    towards_q = bayesian_verify(sample_events(P_Q, 200, 4), P_Q, P_C)
    towards_c = bayesian_verify(sample_events(P_C, 200, 5), P_Q, P_C)
    assert towards_q[-1] > 0.999
    assert towards_c[-1] < 1e-3
    assert events_to_threshold(towards_q) is not None


def test_bayes_equal_models_stay_at_prior():
    P = six_fold_distribution(F6, PERIODIC)
    trace = bayesian_verify(sample_events(P, 1000, 6), P, P, prior=0.3)
    assert np.allclose(trace, 0.3)


@given(st.integers(0, 2**32 - 1))
def test_bayes_no_drift_when_models_agree(seed):
    P = six_fold_distribution(F6, PERIODIC)
    trace = bayesian_verify(sample_events(P, 50, seed), P, P)
    assert np.all(np.abs(trace - 0.5) <= 1e-12)


def test_bayes_validation():
    P = {(1, 0): 1.0}
    with pytest.raises(ValueError):
        bayesian_verify([(1, 0)], P, P, prior=1.0)
    with pytest.raises(ValueError):
        bayesian_verify([(0, 1)], P, P)


def test_events_to_threshold():
    assert events_to_threshold([0.5, 0.8, 0.995]) == 3
    assert events_to_threshold([0.5, 0.6]) is None


def test_mode_assignment_predicate_consistency():
    pred = ztl_predicate(PERIODIC)
    for o in enumerate_outcomes(6, 3, "collision-free"):
        assert pred(o) == ztl_suppressed(PERIODIC, mode_assignment(o))
