"""End-to-end photon-counting runs on the virtual chip."""

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .._validation import check_random_state
from ..fock import output_distribution
from ..mesh import MeshConfig
from .hardware import incoherent_transfer, realized_unitary, set_voltages

DETECTORS = ("click", "pnr")


@dataclass(frozen=True)
class ExperimentRun:
    """Counts of detection patterns from ``trials`` source trials.

    A pattern gives the number of firing detectors per mode (0-2 behind a
    splitter, 0-1 otherwise), or the detected photon number per mode for
    number-resolving detection. ``events`` counts the patterns kept by the
    detection filter.
    """

    counts: dict
    trials: int
    mode_count: int
    detector: str = "click"

    @property
    def events(self):
        return int(sum(self.counts.values()))

    def frequencies(self):
        total = self.events
        if total == 0:
            raise ValueError("no events recorded")
        return {k: v / total for k, v in self.counts.items()}


def _mode_tables(chip, auxiliary_modes):
    """Per-mode transmission, detector efficiencies and splitter flags, auxiliary modes first."""
    a = auxiliary_modes
    t_in = np.concatenate([np.ones(a), chip.input_transmission])
    t_out = np.concatenate([np.ones(a), chip.output_transmission])
    eff = np.vstack([np.ones((a, 2)), np.asarray(chip.detector_efficiencies)])
    split = np.concatenate([np.zeros(a, dtype=bool), np.asarray(chip.splitter_layout)])
    return t_in, t_out, eff, split


def check_detection(detection, mode_count, splitters, detector="click"):
    """Validate a detection filter: None, a total event size, or explicit patterns."""
    if detection is None:
        return None
    if isinstance(detection, (int, np.integer)):
        if detection < 0:
            raise ValueError("detection size must be non-negative")
        return int(detection)
    patterns = []
    for pat in detection:
        pat = tuple(int(x) for x in pat)
        if len(pat) != mode_count:
            raise ValueError(f"detection pattern {pat} does not span {mode_count} modes")
        if detector == "click":
            limit = np.where(splitters, 2, 1)
            if any(x < 0 or x > lim for x, lim in zip(pat, limit)):
                raise ValueError(
                    f"detection pattern {pat} is inconsistent with the detector layout"
                )
        elif any(x < 0 for x in pat):
            raise ValueError(f"negative count in detection pattern {pat}")
        patterns.append(pat)
    return frozenset(patterns)


def _keep(pattern, detection):
    if detection is None:
        return True
    if isinstance(detection, int):
        return sum(pattern) == detection
    return pattern in detection


def _thin(rng, photons, transmission):
    return rng.binomial(photons, np.broadcast_to(transmission, photons.shape))


def _detect(rng, photons, eff, split, dark, detector):
    """Detection patterns for an (N, m) array of photons arriving at the detectors."""
    if detector == "pnr":
        return rng.binomial(photons, np.broadcast_to(eff.mean(axis=1), photons.shape))
    first = np.where(split, rng.binomial(photons, 0.5), photons)
    second = photons - first
    hit_a = rng.binomial(first, np.broadcast_to(eff[:, 0], photons.shape)) > 0
    hit_b = rng.binomial(second, np.broadcast_to(eff[:, 1], photons.shape)) > 0
    if dark > 0:
        hit_a |= rng.random(photons.shape) < dark
        hit_b |= rng.random(photons.shape) < dark
    return hit_a.astype(int) + (hit_b & split).astype(int)


def _unique(rows):
    if len(rows) == 0:
        return []
    keys, counts = np.unique(rows, axis=0, return_counts=True)
    return [(tuple(int(x) for x in k), int(c)) for k, c in zip(keys, counts)]


def _simulate(chip, U, Q, source, trials, rng, detection, auxiliary_modes, detector, cache):
    m = U.shape[0]
    t_in, t_out, eff, split = _mode_tables(chip, auxiliary_modes)
    vis = chip.interference_visibility
    weights = source.weights()
    draws = rng.multinomial(trials, [w for _, w in weights])
    counts = Counter()
    for (state, _), n_state in zip(weights, draws):
        if n_state == 0:
            continue
        photons = np.tile(np.asarray(state), (n_state, 1))
        for sub, n_sub in _unique(_thin(rng, photons, t_in)):
            if sum(sub) == 0:
                outcomes, probs = [sub], np.array([1.0])
            else:
                if sub not in cache:
                    q = output_distribution(U, sub, "quantum")
                    table = q.probabilities
                    if vis < 1:
                        c = output_distribution(Q, sub, "classical").probabilities
                        table = {k: vis * table[k] + (1 - vis) * c[k] for k in table}
                    keys = list(table)
                    p = np.clip(np.array([table[k] for k in keys]), 0, None)
                    cache[sub] = (keys, p / p.sum())
                outcomes, probs = cache[sub]
            picks = rng.multinomial(n_sub, probs)
            for out, n_out in zip(outcomes, picks):
                if n_out == 0:
                    continue
                arriving = _thin(rng, np.tile(np.asarray(out), (n_out, 1)), t_out)
                patterns = _detect(rng, arriving, eff, split, chip.dark_count_probability, detector)
                for pat, n_pat in _unique(patterns):
                    if _keep(pat, detection):
                        counts[pat] += n_pat
    return counts


def run_experiment(chip, config, source, shots, rng=None, detection=None, calibration=None,
                   precorrect_crosstalk=True, auxiliary_modes=0, detector="click",
                   target_events=None, max_trials=None):
    """Simulate ``shots`` source trials through the dialed chip and count detection patterns.

    The controller dials ``config`` with ``calibration`` (true heater laws if
    None); the realized unitary includes crosstalk, coupler imperfections and
    one draw of dialing noise. Each trial takes one source term, thins photons
    by the input-side loss, scatters them through the mesh (visibility mixes
    in the interference-free transfer), thins by the output-side loss and
    detects them. ``auxiliary_modes`` lossless bypass modes with ideal single
    detectors are placed before the chip modes.

    With ``target_events`` trials are added in batches of ``shots`` until that
    many patterns pass the filter, and the excess is removed uniformly at
    random so exactly ``target_events`` remain.
    """
    if not isinstance(config, MeshConfig) or config.mode_count != chip.mode_count:
        raise ValueError("config must be a MeshConfig matching the chip's mode count")
    if detector not in DETECTORS:
        raise ValueError(f"unknown detector model {detector!r}")
    rng = check_random_state(rng)
    a = int(auxiliary_modes)
    m = chip.mode_count + a
    if source.mode_count != m:
        raise ValueError(f"source spans {source.mode_count} modes, experiment has {m}")
    _, _, _, split = _mode_tables(chip, a)
    detection = check_detection(detection, m, split, detector)

    voltages = set_voltages(chip, config, calibration, precorrect_crosstalk)
    U = np.eye(m, dtype=complex)
    U[a:, a:] = realized_unitary(chip, voltages, rng)
    Q = np.eye(m)
    Q[a:, a:] = incoherent_transfer(chip.mode_count, chip.coupler_reflectivities)
    Q = np.sqrt(Q)

    shots = int(shots)
    if shots <= 0:
        raise ValueError("shots must be positive")
    cache = {}
    counts = _simulate(chip, U, Q, source, shots, rng, detection, a, detector, cache)
    trials = shots
    if target_events is not None:
        limit = max_trials if max_trials is not None else 1000 * shots
        while sum(counts.values()) < target_events:
            if trials >= limit:
                raise RuntimeError(
                    f"only {sum(counts.values())} events after {trials} trials"
                )
            counts += _simulate(chip, U, Q, source, shots, rng, detection, a, detector, cache)
            trials += shots
        keys = sorted(counts)
        kept = rng.multivariate_hypergeometric([counts[k] for k in keys], int(target_events))
        counts = Counter({k: int(c) for k, c in zip(keys, kept) if c})
    return ExperimentRun(dict(sorted(counts.items())), trials, m, detector)


__all__ = ["ExperimentRun", "check_detection", "run_experiment"]
