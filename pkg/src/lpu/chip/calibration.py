"""Heater characterization by single-photon fringes and phase-accuracy benchmarking.

Routing conventions used by ``run_calibration`` (mesh indexing as in
``lpu.mesh``):

* alpha_{i,j}: a photon enters mode i and is walked along row i by setting
  alpha_{i,l} (l < j) to the cross point (the lifted 2 pi voltage), while
  every other MZI sits at the bar point. Rows i = 1, 2, ... are done in turn
  so that the rows crossed on the way out are already characterized.
* phi_{i,m-1}: a photon enters mode m-1; alpha_{i,m-1} and alpha_{i+1,m-1}
  are balanced (pi/2) and everything else is bar, so the external phase sits
  inside a two-path interferometer between the two MZIs.
* phi_{i,j}, 1 < j < m-1: the same construction along diagonal j.
* phi_{i,i} acts on mode i before any coupler touches it. It is a pure
  input phase, invisible to photon counting, and keeps a nominal law.
"""

from dataclasses import dataclass, field

import numpy as np

from .._validation import check_random_state
from ..io import check_schema, tag
from ..mesh import TWO_PI, MeshConfig, compose, haar_sample
from .fringe import FringeFitError, fit_fringe, predicted_fringe, simulate_fringe, sweep_grid
from .hardware import (
    NOMINAL_RESISTANCE,
    POWER_2PI,
    HeaterModel,
    config_phases,
    desired_voltages,
    drive,
    heater_keys,
    physical_unitary,
    realized_phases,
)

NOMINAL_BETA = TWO_PI / (POWER_2PI * NOMINAL_RESISTANCE)


class CalibrationError(RuntimeError):
    """A fringe in the calibration sequence could not be fitted."""

    def __init__(self, key, reason):
        super().__init__(f"calibration failed at heater {key}: {reason}")
        self.key = key


@dataclass(frozen=True)
class CalibrationTable:
    """Estimated heater laws, keyed like ``heater_keys``.

    ``observable`` is False for heaters whose phase has no effect on
    single-photon statistics; those keep the nominal law they started with.
    """

    mode_count: int
    heaters: dict
    observable: dict
    fits: dict = field(default_factory=dict)
    shots_per_fringe: int = None

    @classmethod
    def nominal(cls, m, beta=NOMINAL_BETA):
        keys = heater_keys(m)
        heaters = {k: HeaterModel(0.0, beta) for k in keys}
        return cls(m, heaters, {k: is_observable(k) for k in keys})

    def with_heater(self, key, model, fit=None):
        heaters = dict(self.heaters)
        heaters[key] = model
        fits = dict(self.fits)
        if fit is not None:
            fits[key] = fit
        return CalibrationTable(self.mode_count, heaters, self.observable, fits, self.shots_per_fringe)

    def to_dict(self):
        return {
            "schema": tag("calibration"),
            "mode_count": self.mode_count,
            "shots_per_fringe": self.shots_per_fringe,
            "heaters": [
                {"key": list(k), "observable": self.observable[k], **self.heaters[k].to_dict()}
                for k in heater_keys(self.mode_count)
            ],
        }

    @classmethod
    def from_dict(cls, data):
        check_schema(data, "calibration")
        heaters, observable = {}, {}
        for entry in data["heaters"]:
            entry = dict(entry)
            kind, i, j = entry.pop("key")
            key = (kind, int(i), int(j))
            observable[key] = bool(entry.pop("observable"))
            heaters[key] = HeaterModel(**entry)
        m = int(data["mode_count"])
        if set(heaters) != set(heater_keys(m)):
            raise ValueError("calibration file does not cover every heater")
        return cls(m, heaters, observable, {}, data.get("shots_per_fringe"))


def is_observable(key):
    kind, i, j = key
    return not (kind == "phi" and i == j)


def alpha_routing(m, i, j):
    """Routing and input mode for characterizing alpha_{i,j}."""
    updates = {(i, l): (0.0, None) for l in range(i, j)}
    return MeshConfig.bar(m).with_phases(updates), i


def phi_routing(m, i, j):
    """Routing and input mode for characterizing phi_{i,j} (i < j)."""
    if not i < j <= m - 1:
        raise ValueError(f"phi_{i},{j} has no interferometric routing")
    half = np.pi / 2
    return MeshConfig.bar(m).with_phases({(i, j): (half, None), (i + 1, j): (half, None)}), j


def calibration_sequence(m):
    """Heaters in measurement order with their (routing, input mode)."""
    steps = []
    for i in range(1, m):
        steps += [(("alpha", i, j), *alpha_routing(m, i, j)) for j in range(i, m)]
    # the last diagonal first, then the remaining diagonals inwards
    for j in range(m - 1, 1, -1):
        steps += [(("phi", i, j), *phi_routing(m, i, j)) for i in range(1, j)]
    return steps


def run_calibration(chip, shots_per_fringe=100_000, rng=None, sweep=None,
                    precorrect_crosstalk=True, fitter_params=None):
    """Characterize every observable heater of ``chip`` in sequence.

    ``shots_per_fringe`` photons are split evenly over the sweep points; None
    records noise-free expected counts. Each step dials the routing with the
    laws found so far, so errors propagate as they would on hardware.
    """
    rng = check_random_state(rng)
    sweep = sweep_grid() if sweep is None else np.asarray(sweep, dtype=float)
    per_point = None if shots_per_fringe is None else max(int(shots_per_fringe) // len(sweep), 1)
    table = CalibrationTable.nominal(chip.mode_count)
    table = CalibrationTable(chip.mode_count, table.heaters, table.observable, {}, shots_per_fringe)
    for key, routing, input_mode in calibration_sequence(chip.mode_count):
        data = simulate_fringe(
            chip, key, routing, sweep, per_point, rng, input_mode=input_mode,
            calibration=table, precorrect_crosstalk=precorrect_crosstalk,
        )
        try:
            fit = fit_fringe(data, **(fitter_params or {}))
            model = fit.heater(data.offset, float(sweep[0]), float(sweep[-1]))
        except (FringeFitError, ValueError) as exc:
            raise CalibrationError(key, exc) from exc
        table = table.with_heater(key, model, fit)
    betas = [table.heaters[k].beta for k in table.heaters if table.observable[k]]
    nominal = HeaterModel(0.0, float(np.median(betas)), 0.0, float(sweep[0]), float(sweep[-1]))
    for key, seen in table.observable.items():
        if not seen:
            table = table.with_heater(key, nominal)
    return table


def _wrapped(d):
    return (np.asarray(d) + np.pi) % TWO_PI - np.pi


def calibration_residuals(chip, calibration, sweep=None, observable_only=True):
    """RMS difference between estimated and true phase curves, per heater (rad)."""
    sweep = sweep_grid() if sweep is None else np.asarray(sweep, dtype=float)
    out = {}
    for key, truth in zip(chip.keys, chip.heaters):
        if observable_only and not calibration.observable[key]:
            continue
        diff = _wrapped(calibration.heaters[key].phase(sweep) - truth.phase(sweep))
        # a constant offset is irrelevant only for unobservable heaters
        out[key] = float(np.sqrt(np.mean(diff ** 2)))
    return out


def first_row_config(m, rng):
    """Haar-random single-photon vector from mode 1: row-1 amplitudes only."""
    base = haar_sample(m, rng)
    alphas = [p.alpha if p.i == 1 else np.pi for p in base.params]
    return MeshConfig.from_arrays(m, alphas, [0.0] * base.n_mzi)


def _mode_one_distribution(chip, config, calibration, rng, phases=None):
    if phases is None:
        v = drive(chip, desired_voltages(chip, config_phases(config), calibration))
        phases = realized_phases(chip, v, rng)
    U = physical_unitary(chip.mode_count, phases[0::2], phases[1::2], chip.coupler_reflectivities)
    return np.abs(U[:, 0]) ** 2


def _fidelity(p, q):
    return float(np.sum(np.sqrt(np.clip(p, 0, None) * np.clip(q, 0, None))))


@dataclass(frozen=True)
class PhaseBenchmark:
    """Outcome of ``benchmark_phase_accuracy``."""

    delta_phi: float
    mean_fidelity: float
    fidelities: np.ndarray
    grid: np.ndarray
    model_curve: np.ndarray

    @property
    def floor(self):
        """Smallest resolvable delta: the grid step or the 2 sigma fidelity resolution."""
        se = float(np.std(self.fidelities, ddof=1) / np.sqrt(len(self.fidelities)))
        target = self.model_curve[0] - 2 * se
        resolved = float(np.interp(target, self.model_curve[::-1], self.grid[::-1]))
        return max(float(self.grid[1] - self.grid[0]), resolved)


def benchmark_phase_accuracy(chip, calibration=None, n_configs=100, shots=100_000, rng=None,
                             grid=None):
    """Effective phase error from single-photon fidelities of Haar-random vectors.

    Each configuration dials a Haar-random first-row vector, injects ``shots``
    single photons into mode 1 and compares efficiency-corrected output
    frequencies with the ideal distribution. The mean fidelity is matched to
    a Monte Carlo curve F(delta) of the ideal mesh with Gaussian phase noise
    delta on every heater and the same shot count.
    """
    rng = check_random_state(rng)
    m = chip.mode_count
    grid = np.linspace(0.0, 0.3, 61) if grid is None else np.asarray(grid, dtype=float)
    configs = [first_row_config(m, rng) for _ in range(n_configs)]
    ideal = [np.abs(compose(c)[:, 0]) ** 2 for c in configs]
    scale = chip.input_transmission[0] * chip.output_transmission * chip.mode_efficiency

    fids = np.empty(n_configs)
    for k, c in enumerate(configs):
        p = _mode_one_distribution(chip, c, calibration, rng) * scale
        counts = rng.poisson(p * shots)
        # efficiency-corrected frequencies
        corrected = counts / scale
        if corrected.sum() <= 0:
            fids[k] = 0.0
            continue
        fids[k] = _fidelity(corrected / corrected.sum(), ideal[k])
    measured = float(fids.mean())

    # common random numbers across the noise grid
    seed = int(rng.integers(2 ** 63))
    noise = np.random.default_rng(seed).standard_normal((n_configs, 2 * configs[0].n_mzi))
    curve = np.empty(len(grid))
    for g, delta in enumerate(grid):
        sampler = np.random.default_rng(seed + 1)
        vals = []
        for k, c in enumerate(configs):
            phases = config_phases(c) + delta * noise[k]
            U = physical_unitary(m, phases[0::2], phases[1::2], [(0.5, 0.5)] * c.n_mzi)
            p = np.abs(U[:, 0]) ** 2 * scale
            counts = sampler.poisson(p * shots) / scale
            vals.append(_fidelity(counts / counts.sum(), ideal[k]))
        curve[g] = np.mean(vals)
    curve = np.minimum.accumulate(curve)
    if measured >= curve[0]:
        delta = 0.0
    elif measured <= curve[-1]:
        delta = float(grid[-1])
    else:
        # the curve is non-increasing, so interpolate on the reversed arrays
        delta = float(np.interp(measured, curve[::-1], grid[::-1]))
    return PhaseBenchmark(delta, measured, fids, grid, curve)


__all__ = [
    "CalibrationError",
    "CalibrationTable",
    "PhaseBenchmark",
    "alpha_routing",
    "benchmark_phase_accuracy",
    "calibration_residuals",
    "calibration_sequence",
    "first_row_config",
    "is_observable",
    "phi_routing",
    "run_calibration",
]
