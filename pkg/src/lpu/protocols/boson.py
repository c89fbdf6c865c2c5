"""Boson sampling on Haar-random settings, zero-transmission-law tests and Bayesian verification."""

from dataclasses import dataclass

import numpy as np

from .._validation import check_occupation, check_random_state, spawn_generators
from ..chip.experiment import run_experiment
from ..chip.hardware import SourceModel
from ..fock import (
    enumerate_outcomes,
    mode_assignment,
    output_distribution,
    sample_counts,
    statistical_fidelity,
)
from ..mesh import compose, haar_sample


@dataclass(frozen=True)
class CampaignResult:
    """Per-unitary statistical fidelities of a boson-sampling campaign."""

    fidelities: np.ndarray
    photons: tuple
    shots: int
    backend: str

    @property
    def mean(self):
        return float(np.mean(self.fidelities))

    @property
    def std(self):
        return float(np.std(self.fidelities, ddof=1)) if len(self.fidelities) > 1 else 0.0

    def histogram(self, bins=20, range=None):
        """(counts, edges) of the fidelities."""
        lo = min(float(self.fidelities.min()), 0.9)
        return np.histogram(self.fidelities, bins=bins, range=range or (lo, 1.0))


def ideal_collision_free(U, photons):
    """Exact collision-free output distribution, renormalized."""
    return output_distribution(U, photons, subspace="collision-free").normalized().probabilities


def _empirical(counts, support):
    total = sum(counts.get(k, 0) for k in support)
    if total == 0:
        raise ValueError("no collision-free events recorded")
    return {k: counts.get(k, 0) / total for k in support}


def boson_sampling_campaign(n_unitaries=100, photons=(1, 1, 1, 0, 0, 0), shots=10_000,
                            backend="exact", rng=None, chip=None, calibration=None):
    """Statistical fidelity of sampled versus exact distributions for Haar-random settings.

    Each unitary gets its own generator spawned from ``rng``. The exact
    backend draws ``shots`` multinomial samples from the collision-free
    distribution (``shots=None`` compares the distribution with itself);
    the chip backend dials the setting on ``chip`` and collects ``shots``
    collision-free click events.
    """
    photons = check_occupation(photons)
    m, n = len(photons), sum(photons)
    if backend not in ("exact", "chip"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "chip" and (chip is None or shots is None):
        raise ValueError("the chip backend needs a chip and a shot count")
    support = enumerate_outcomes(m, n, "collision-free")
    fids = np.empty(int(n_unitaries))
    for k, gen in enumerate(spawn_generators(rng, n_unitaries)):
        config = haar_sample(m, gen)
        ideal = ideal_collision_free(compose(config), photons)
        if backend == "exact":
            if shots is None:
                fids[k] = statistical_fidelity(ideal, ideal)
                continue
            counts = sample_counts(ideal, shots, gen)
        else:
            run = run_experiment(
                chip, config.without_output_phases(), SourceModel.ideal(photons), shots, gen,
                detection=support, calibration=calibration, target_events=shots,
            )
            counts = run.counts
        fids[k] = statistical_fidelity(_empirical(counts, support), ideal)
    return CampaignResult(fids, photons, shots, backend)


def ztl_period(photons):
    """Smallest cyclic period of an input pattern; raises for aperiodic input."""
    occ = check_occupation(photons)
    m = len(occ)
    for p in range(1, m):
        if m % p == 0 and all(occ[k] == occ[(k + p) % m] for k in range(m)):
            return p
    raise ValueError(f"input {occ} is not periodic")


def ztl_suppressed(photons, output, n=None):
    """Whether the suppression law forbids an output on the Fourier matrix.

    ``output`` is the 1-based mode assignment of the detected photons. The
    outcome is forbidden when (period * sum of output modes) mod n is
    non-zero, with the period of the input pattern and n photons.
    """
    period = ztl_period(photons)
    n = sum(check_occupation(photons)) if n is None else int(n)
    output = tuple(int(d) for d in output)
    if len(output) != n:
        raise ValueError(f"output must place {n} photons")
    return (period * sum(output)) % n != 0


def ztl_violation(counts, suppressed):
    """nu = suppressed events / all events over a counts (or probability) table.

    ``suppressed`` is a predicate on outcome patterns.
    """
    total = float(sum(counts.values()))
    if total <= 0:
        raise ValueError("zero total events")
    return float(sum(v for k, v in counts.items() if suppressed(k)) / total)


def ztl_predicate(photons):
    photons = check_occupation(photons)
    return lambda out: ztl_suppressed(photons, mode_assignment(out))


def six_fold_distribution(U, photons=(3, 3, 0, 0, 0, 0), model="quantum"):
    """Distribution of click patterns with one click per photon behind 50:50 splitters.

    Every mode feeds two detectors through a fibre splitter, so a mode can
    register at most two clicks and two photons in one mode give two clicks
    with probability 1/2. The result is renormalized over full-click events.
    """
    photons = check_occupation(photons)
    dist = output_distribution(U, photons, model)
    weights = {}
    for out, p in dist.probabilities.items():
        if max(out) > 2:
            continue
        weights[out] = p * 0.5 ** sum(1 for x in out if x == 2)
    total = sum(weights.values())
    return {k: v / total for k, v in weights.items()}


def bayesian_verify(events, P_Q, P_C, prior=0.5):
    """Running posterior that events were drawn from ``P_Q`` rather than ``P_C``.

    The update is done on the log-odds; an event impossible under exactly
    one model sends the trace to 0 or 1.
    """
    if not 0.0 < prior < 1.0:
        raise ValueError("prior must lie strictly between 0 and 1")
    log_odds = np.log(prior) - np.log1p(-prior)
    trace = np.empty(len(events))
    with np.errstate(divide="ignore"):
        for k, e in enumerate(events):
            e = tuple(e)
            q, c = P_Q.get(e, 0.0), P_C.get(e, 0.0)
            if q <= 0 and c <= 0:
                raise ValueError(f"event {e} has zero probability under both models")
            log_odds = log_odds + np.log(q) - np.log(c)
            if np.isnan(log_odds):
                raise ValueError("contradictory evidence: both models already excluded")
            trace[k] = 0.5 * (1.0 + np.tanh(0.5 * log_odds))
    return trace


def sample_events(dist, size, rng=None):
    """Independent outcome draws from a probability table."""
    rng = check_random_state(rng)
    keys = list(dist)
    p = np.clip(np.array([dist[k] for k in keys], dtype=float), 0, None)
    idx = rng.choice(len(keys), size=int(size), p=p / p.sum())
    return [keys[i] for i in idx]


def events_to_threshold(trace, threshold=0.99):
    """Number of events until the trace first exceeds ``threshold`` (None if never)."""
    hits = np.flatnonzero(np.asarray(trace) > threshold)
    return int(hits[0]) + 1 if len(hits) else None


__all__ = [
    "CampaignResult",
    "bayesian_verify",
    "boson_sampling_campaign",
    "events_to_threshold",
    "ideal_collision_free",
    "sample_events",
    "six_fold_distribution",
    "ztl_period",
    "ztl_predicate",
    "ztl_suppressed",
    "ztl_violation",
]
