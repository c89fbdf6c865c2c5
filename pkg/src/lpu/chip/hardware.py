"""Virtual hardware: heaters, crosstalk network, losses, detectors and source."""

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .._validation import check_occupation, check_random_state
from ..io import check_schema, dumps, tag
from ..mesh import TWO_PI, MeshConfig, mesh_positions, mzi_transfer

PORT_COUNT = 32
PORT_MAX_VOLTS = 20.0
DAC_RESOLUTION = 4.9e-3
NOMINAL_RESISTANCE = 100.0
POWER_2PI = 0.8
SWEEP = (1.8, 10.0)


class PhaseUnreachableError(ValueError):
    """Raised when no voltage in range realizes a requested phase."""


def heater_keys(m):
    """Heater addresses ('alpha' | 'phi', i, j) in port order."""
    return [(kind, i, j) for i, j in mesh_positions(m) for kind in ("alpha", "phi")]


def config_phases(config):
    """Target phase per heater, in ``heater_keys`` order."""
    return np.array([v for p in config.params for v in (p.alpha, p.phi)])


@dataclass(frozen=True)
class HeaterModel:
    """Cubic phase-voltage law Phi(V) = alpha0 + beta V^2 + gamma V^3."""

    alpha0: float
    beta: float
    gamma: float = 0.0
    v_min: float = SWEEP[0]
    v_max: float = SWEEP[1]

    def __post_init__(self):
        if not 0.0 <= self.v_min < self.v_max:
            raise ValueError("need 0 <= v_min < v_max")
        # dPhi/dV = V (2 beta + 3 gamma V) is positive for V > 0 iff the
        # linear factor is positive at both ends of the range
        ends = 2 * self.beta + 3 * self.gamma * np.array([self.v_min, self.v_max])
        if np.any(ends <= 0):
            raise ValueError("phase-voltage law must be strictly increasing on the range")

    def phase(self, v):
        v = np.asarray(v, dtype=float)
        return self.alpha0 + self.beta * v ** 2 + self.gamma * v ** 3

    def to_dict(self):
        return {k: float(getattr(self, k)) for k in ("alpha0", "beta", "gamma", "v_min", "v_max")}


def phase_voltage_map(heater, v):
    """Phase produced by ``heater`` at voltage ``v`` (volts, within range)."""
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr < heater.v_min - 1e-12) or np.any(v_arr > heater.v_max + 1e-12):
        raise ValueError(f"voltage outside [{heater.v_min}, {heater.v_max}] V")
    return heater.phase(v_arr) if v_arr.ndim else float(heater.phase(v_arr))


def voltage_for_phase(heater, target, wrap=True, clamp=False):
    """Voltage realizing ``target`` (mod 2 pi when ``wrap``) on ``heater``.

    With wrapping the smallest lift target + 2 pi k inside the heater's
    phase range is used, so 2 pi and 0 give the same voltage. A law whose
    range falls short of the target raises, unless ``clamp`` asks for the
    range end closest to the target on the circle.
    """
    lo = float(heater.phase(heater.v_min))
    hi = float(heater.phase(heater.v_max))
    goal = float(target)
    if wrap:
        goal += TWO_PI * np.ceil((lo - goal) / TWO_PI - 1e-12)
    if clamp and goal > hi + 1e-12:
        goal = hi if goal - hi < lo + TWO_PI - goal else lo
    if not lo - 1e-12 <= goal <= hi + 1e-12:
        raise PhaseUnreachableError(
            f"phase {target:.6f} rad unreachable on [{heater.v_min}, {heater.v_max}] V"
        )
    goal = min(max(goal, lo), hi)
    if goal == lo:
        return heater.v_min
    if goal == hi:
        return heater.v_max
    return brentq(lambda v: heater.phase(v) - goal, heater.v_min, heater.v_max, xtol=1e-14, rtol=1e-15)


@dataclass(frozen=True)
class CrosstalkModel:
    """Heaters sharing a ground return.

    Every heater in a group connects its drive port through its own
    resistance to a common node, which returns to ground through
    ``ground_resistances[g]``. Heaters not in any group are ideal.
    """

    groups: tuple = ()
    heater_resistances: tuple = ()
    ground_resistances: tuple = ()

    def __post_init__(self):
        groups = tuple(tuple(int(h) for h in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "heater_resistances", tuple(float(r) for r in self.heater_resistances))
        object.__setattr__(self, "ground_resistances", tuple(float(r) for r in self.ground_resistances))
        members = [h for g in groups for h in g]
        if len(members) != len(set(members)):
            raise ValueError("crosstalk groups must be disjoint")
        if len(self.ground_resistances) != len(groups):
            raise ValueError("need one ground resistance per group")
        if members and max(members) >= len(self.heater_resistances):
            raise ValueError("group refers to a heater without a resistance")
        if any(not np.isfinite(r) or r <= 0 for r in self.heater_resistances):
            raise ValueError("heater resistances must be positive and finite")
        if any(not np.isfinite(r) or r < 0 for r in self.ground_resistances):
            raise ValueError(
                "non-invertible crosstalk network: ground resistances must be finite and >= 0"
            )

    def to_dict(self):
        return {
            "groups": [list(g) for g in self.groups],
            "heater_resistances": list(self.heater_resistances),
            "ground_resistances": list(self.ground_resistances),
        }


def _check_range(v, lo=0.0, hi=PORT_MAX_VOLTS):
    if np.any(v < lo - 1e-12) or np.any(v > hi + 1e-12):
        raise ValueError(f"voltages outside the port range [{lo}, {hi}] V")


def apply_crosstalk(model, set_voltages):
    """Actual heater voltages for the given port (set) voltages."""
    v = np.array(set_voltages, dtype=float)
    _check_range(v)
    out = v.copy()
    R = np.asarray(model.heater_resistances)
    for group, Rg in zip(model.groups, model.ground_resistances):
        g = np.asarray(group)
        G = 1.0 / R[g]
        # common node potential from Kirchhoff's current law
        vn = Rg * np.sum(v[g] * G) / (1.0 + Rg * np.sum(G))
        out[g] = v[g] - vn
    return out


def precorrect(model, desired_actual):
    """Set voltages whose actual heater voltages equal ``desired_actual``."""
    v = np.array(desired_actual, dtype=float)
    _check_range(v)
    out = v.copy()
    R = np.asarray(model.heater_resistances)
    for group, Rg in zip(model.groups, model.ground_resistances):
        g = np.asarray(group)
        # all heater currents V_k / R_k return through the shared resistor
        out[g] = v[g] + Rg * np.sum(v[g] / R[g])
    _check_range(out)
    return out


@dataclass(frozen=True)
class ChipModel:
    """Complete virtual device.

    Arrays are indexed by heater (``heater_keys`` order), by MZI
    (``mesh_positions`` order, two couplers each) or by mode. Each mode ends
    in one detector, or in two behind a 50:50 fibre splitter when
    ``splitter_layout`` is set; ``detector_efficiencies`` has shape (m, 2)
    and the second column is unused for unsplit modes.
    """

    mode_count: int
    heaters: tuple
    crosstalk: CrosstalkModel = field(default_factory=CrosstalkModel)
    facet_loss_db: float = 0.4
    insertion_loss_db: tuple = None
    coupler_reflectivities: tuple = None
    detector_efficiencies: tuple = None
    splitter_layout: tuple = None
    interference_visibility: float = 1.0
    dark_count_probability: float = 0.0
    phase_noise: float = 0.0
    voltage_resolution: float = None

    def __post_init__(self):
        m = self.mode_count
        n_mzi = m * (m - 1) // 2
        heaters = tuple(self.heaters)
        if len(heaters) != 2 * n_mzi:
            raise ValueError(f"need {2 * n_mzi} heaters for {m} modes")
        object.__setattr__(self, "heaters", heaters)
        if self.insertion_loss_db is None:
            object.__setattr__(self, "insertion_loss_db", (2.4,) * m)
        if self.coupler_reflectivities is None:
            object.__setattr__(self, "coupler_reflectivities", ((0.5, 0.5),) * n_mzi)
        if self.detector_efficiencies is None:
            object.__setattr__(self, "detector_efficiencies", ((1.0, 1.0),) * m)
        if self.splitter_layout is None:
            object.__setattr__(self, "splitter_layout", (True,) * m)
        object.__setattr__(self, "insertion_loss_db", tuple(float(x) for x in self.insertion_loss_db))
        object.__setattr__(
            self, "coupler_reflectivities", tuple(tuple(float(r) for r in p) for p in self.coupler_reflectivities)
        )
        object.__setattr__(
            self, "detector_efficiencies", tuple(tuple(float(e) for e in p) for p in self.detector_efficiencies)
        )
        object.__setattr__(self, "splitter_layout", tuple(bool(s) for s in self.splitter_layout))
        if len(self.insertion_loss_db) != m or len(self.splitter_layout) != m:
            raise ValueError("per-mode tables need one entry per mode")
        if len(self.detector_efficiencies) != m or len(self.coupler_reflectivities) != n_mzi:
            raise ValueError("detector or coupler table has the wrong length")
        if self.facet_loss_db < 0 or min(self.insertion_loss_db) < 0:
            raise ValueError("losses must be non-negative")
        if 2 * self.facet_loss_db > min(self.insertion_loss_db) + 1e-12:
            raise ValueError("insertion loss must include both facets")
        eff = np.asarray(self.detector_efficiencies)
        if np.any(eff < 0) or np.any(eff > 1):
            raise ValueError("detector efficiencies must lie in [0, 1]")
        refl = np.asarray(self.coupler_reflectivities)
        if np.any(refl < 0) or np.any(refl > 1):
            raise ValueError("coupler reflectivities must lie in [0, 1]")
        if not 0.0 <= self.interference_visibility <= 1.0:
            raise ValueError("interference visibility must lie in [0, 1]")
        if not 0.0 <= self.dark_count_probability <= 1.0 or self.phase_noise < 0:
            raise ValueError("invalid dark-count probability or phase noise")

    @property
    def keys(self):
        return heater_keys(self.mode_count)

    def heater(self, key):
        return self.heaters[self.keys.index(tuple(key))]

    @property
    def mode_transmission(self):
        """Fibre-to-fibre power transmission per mode."""
        return 10.0 ** (-np.asarray(self.insertion_loss_db) / 10.0)

    @property
    def input_transmission(self):
        # input facet plus half of the remaining on-chip loss
        return 10.0 ** (-self._split_loss()[0] / 10.0)

    @property
    def output_transmission(self):
        return 10.0 ** (-self._split_loss()[1] / 10.0)

    def _split_loss(self):
        il = np.asarray(self.insertion_loss_db)
        chip = il - 2 * self.facet_loss_db
        return self.facet_loss_db + chip / 2, self.facet_loss_db + chip / 2

    @property
    def mode_efficiency(self):
        """Probability that a photon leaving a mode is detected by some detector."""
        eff = np.asarray(self.detector_efficiencies)
        split = np.asarray(self.splitter_layout)
        return np.where(split, eff.mean(axis=1), eff[:, 0])

    @property
    def is_lossless(self):
        return (
            np.allclose(self.insertion_loss_db, 0.0)
            and np.allclose(self.detector_efficiencies, 1.0)
        )

    def replace(self, **changes):
        return replace(self, **changes)

    @classmethod
    def ideal(cls, m=6, splitters=True):
        """Perfect device: ideal couplers and heaters, no loss, crosstalk or noise."""
        beta = TWO_PI / (POWER_2PI * NOMINAL_RESISTANCE)
        heaters = tuple(HeaterModel(0.0, beta) for _ in heater_keys(m))
        return cls(
            m,
            heaters,
            facet_loss_db=0.0,
            insertion_loss_db=(0.0,) * m,
            splitter_layout=(splitters,) * m,
        )

    @classmethod
    def random(cls, m=6, rng=None, crosstalk=True, group_size=4, coupler_spread=0.0,
               loss_spread=0.2, efficiency_range=(0.55, 0.65), phase_noise=0.0):
        """Randomized imperfect device with the stated average loss figures.

        Heater coefficients are drawn so a 2 pi shift costs 0.7-0.9 W into a
        ~100 ohm heater; per-mode insertion loss is shifted to average 2.4 dB.
        """
        rng = check_random_state(rng)
        keys = heater_keys(m)
        H = len(keys)
        resist = NOMINAL_RESISTANCE * rng.uniform(0.95, 1.05, H)
        power = rng.uniform(0.7, 0.9, H)
        beta = TWO_PI / (power * resist)
        gamma = rng.uniform(-2e-4, 4e-4, H)
        # keep at least 2 pi (plus margin) of phase range over the sweep
        lo, hi = SWEEP
        floor = (TWO_PI + 0.1 - beta * (hi ** 2 - lo ** 2)) / (hi ** 3 - lo ** 3)
        gamma = np.maximum(gamma, floor)
        alpha0 = rng.uniform(0.0, TWO_PI, H)
        heaters = tuple(HeaterModel(a, b, g) for a, b, g in zip(alpha0, beta, gamma))
        if crosstalk:
            groups = tuple(tuple(range(s, min(s + group_size, H))) for s in range(0, H, group_size))
            ground = tuple(rng.uniform(1.0, 3.0, len(groups)))
            xt = CrosstalkModel(groups, tuple(resist), ground)
        else:
            xt = CrosstalkModel((), tuple(resist), ())
        il = 2.4 + rng.normal(0.0, loss_spread, m)
        il = np.clip(il - il.mean() + 2.4, 0.8, None)
        n_mzi = H // 2
        refl = np.clip(0.5 + rng.normal(0.0, coupler_spread, (n_mzi, 2)), 0.0, 1.0)
        eff = rng.uniform(*efficiency_range, (m, 2))
        return cls(
            m,
            heaters,
            crosstalk=xt,
            insertion_loss_db=tuple(il),
            coupler_reflectivities=tuple(map(tuple, refl)),
            detector_efficiencies=tuple(map(tuple, eff)),
            phase_noise=phase_noise,
        )

    def to_dict(self):
        return {
            "schema": tag("chip"),
            "mode_count": self.mode_count,
            "heaters": [h.to_dict() for h in self.heaters],
            "crosstalk": self.crosstalk.to_dict(),
            "facet_loss_db": self.facet_loss_db,
            "insertion_loss_db": list(self.insertion_loss_db),
            "coupler_reflectivities": [list(p) for p in self.coupler_reflectivities],
            "detector_efficiencies": [list(p) for p in self.detector_efficiencies],
            "splitter_layout": list(self.splitter_layout),
            "interference_visibility": self.interference_visibility,
            "dark_count_probability": self.dark_count_probability,
            "phase_noise": self.phase_noise,
            "voltage_resolution": self.voltage_resolution,
        }

    @classmethod
    def from_dict(cls, data):
        check_schema(data, "chip")
        try:
            return cls(
                int(data["mode_count"]),
                tuple(HeaterModel(**h) for h in data["heaters"]),
                crosstalk=CrosstalkModel(**data.get("crosstalk", {})),
                facet_loss_db=data.get("facet_loss_db", 0.4),
                insertion_loss_db=data.get("insertion_loss_db"),
                coupler_reflectivities=data.get("coupler_reflectivities"),
                detector_efficiencies=data.get("detector_efficiencies"),
                splitter_layout=data.get("splitter_layout"),
                interference_visibility=data.get("interference_visibility", 1.0),
                dark_count_probability=data.get("dark_count_probability", 0.0),
                phase_noise=data.get("phase_noise", 0.0),
                voltage_resolution=data.get("voltage_resolution"),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"invalid chip description: {exc}") from exc

    def digest(self):
        """SHA-256 of the canonical chip description."""
        return hashlib.sha256(dumps(self.to_dict()).encode()).hexdigest()


@dataclass(frozen=True)
class SourceModel:
    """Input photon states delivered per trial.

    ``terms`` pairs occupation patterns with amplitudes; a trial yields one
    pattern with probability proportional to |amplitude|^2 within its
    photon-number sector. Terms are treated as an incoherent mixture.
    """

    terms: tuple
    pair_amplitude: float = 0.0

    def __post_init__(self):
        terms = tuple((check_occupation(s), complex(a)) for s, a in self.terms)
        if not terms:
            raise ValueError("source needs at least one term")
        if len({len(s) for s, _ in terms}) != 1:
            raise ValueError("all source terms must span the same modes")
        object.__setattr__(self, "terms", terms)

    @property
    def mode_count(self):
        return len(self.terms[0][0])

    def sector(self, n):
        """Normalized (state, weight) list for the n-photon sector."""
        sel = [(s, abs(a) ** 2) for s, a in self.terms if sum(s) == n]
        total = sum(w for _, w in sel)
        if total <= 0:
            raise ValueError(f"source has no {n}-photon terms")
        return [(s, w / total) for s, w in sel]

    def weights(self):
        """Trial-level (state, probability) list across all sectors.

        Sector n = 2k carries relative weight pair_amplitude^(2k) when a pair
        amplitude is set; otherwise sectors are weighted by their amplitudes.
        """
        sectors = sorted({sum(s) for s, _ in self.terms})
        if self.pair_amplitude and len(sectors) > 1:
            raw = {n: self.pair_amplitude ** n for n in sectors}
        else:
            raw = {n: sum(abs(a) ** 2 for s, a in self.terms if sum(s) == n) for n in sectors}
        total = sum(raw.values())
        out = []
        for n in sectors:
            out += [(s, raw[n] / total * w) for s, w in self.sector(n)]
        return out

    @classmethod
    def ideal(cls, state):
        return cls(((state, 1.0),))

    @classmethod
    def spdc(cls, mode_count, pairs, four_photon_terms=(1.0, 1.0, 1.0), pair_amplitude=0.1):
        """Four-photon sector of two SPDC pair sources.

        ``pairs`` gives the two 1-based mode pairs fed by each source; the
        terms are |1111>, |2200> and |0022> with the given amplitudes.
        """
        (a, b), (c, d) = pairs
        states = []
        for partition in ((1, 1), (2, 0), (0, 2)):
            occ = [0] * mode_count
            for (x, y), k in zip(pairs, partition):
                occ[x - 1] += k
                occ[y - 1] += k
            states.append(tuple(occ))
        terms = tuple((s, amp) for s, amp in zip(states, four_photon_terms) if amp != 0)
        return cls(terms, pair_amplitude)


def physical_unitary(m, alphas, phis, reflectivities):
    """Transfer matrix of the mesh with given true phases and coupler values."""
    U = np.eye(m, dtype=complex)
    for k, (i, j) in enumerate(mesh_positions(m)):
        row = j - 1
        U[row:row + 2, :] = mzi_transfer(alphas[k], phis[k], reflectivities[k]) @ U[row:row + 2, :]
    return U


def incoherent_transfer(m, reflectivities):
    """Path-probability matrix of the mesh with all interference removed."""
    Q = np.eye(m)
    for k, (i, j) in enumerate(mesh_positions(m)):
        row = j - 1
        for r in reflectivities[k]:
            C = np.array([[1 - r, r], [r, 1 - r]])
            Q[row:row + 2, :] = C @ Q[row:row + 2, :]
    return Q


def heater_table(chip, calibration=None):
    """Heater models used by the controller (truth unless a calibration is given)."""
    if calibration is None:
        return list(chip.heaters)
    return [calibration.heaters[k] for k in chip.keys]


def desired_voltages(chip, phases, calibration=None, clamp=False):
    """Actual heater voltages the controller wants in order to dial ``phases``."""
    if isinstance(phases, MeshConfig):
        phases = config_phases(phases)
    table = heater_table(chip, calibration)
    return np.array([voltage_for_phase(h, t, clamp=clamp) for h, t in zip(table, phases)])


def drive(chip, desired, precorrect_crosstalk=True):
    """Port voltages for desired actual voltages (crosstalk precorrection, DAC rounding)."""
    v = precorrect(chip.crosstalk, desired) if precorrect_crosstalk else np.array(desired, dtype=float)
    if chip.voltage_resolution:
        v = np.round(v / chip.voltage_resolution) * chip.voltage_resolution
    return v


def set_voltages(chip, phases, calibration=None, precorrect_crosstalk=True):
    """Port voltages the controller applies to dial ``phases``.

    ``phases`` is a MeshConfig or a per-heater phase array; heater models
    come from ``calibration`` when given, otherwise from the true chip.
    """
    return drive(chip, desired_voltages(chip, phases, calibration), precorrect_crosstalk)


def realized_phases(chip, voltages, rng=None):
    """True per-heater phases for port ``voltages``, including dialing noise."""
    actual = apply_crosstalk(chip.crosstalk, voltages)
    phases = np.array([float(h.phase(v)) for h, v in zip(chip.heaters, actual)])
    if chip.phase_noise > 0:
        rng = check_random_state(rng)
        phases = phases + rng.normal(0.0, chip.phase_noise, phases.shape)
    return phases


def realized_unitary(chip, voltages, rng=None):
    phases = realized_phases(chip, voltages, rng)
    return physical_unitary(chip.mode_count, phases[0::2], phases[1::2], chip.coupler_reflectivities)


def port_table(voltages, resolution=None, n_ports=PORT_COUNT):
    """Voltage per drive port (1-based), optionally quantized; spare ports read 0 V."""
    v = np.zeros(n_ports)
    v[: len(voltages)] = voltages
    if resolution:
        v = np.round(v / resolution) * resolution
    _check_range(v)
    return {port + 1: float(x) for port, x in enumerate(v)}


__all__ = [
    "ChipModel",
    "CrosstalkModel",
    "HeaterModel",
    "PhaseUnreachableError",
    "SourceModel",
    "apply_crosstalk",
    "config_phases",
    "desired_voltages",
    "drive",
    "heater_keys",
    "heater_table",
    "incoherent_transfer",
    "phase_voltage_map",
    "physical_unitary",
    "port_table",
    "precorrect",
    "realized_phases",
    "realized_unitary",
    "set_voltages",
    "voltage_for_phase",
]
