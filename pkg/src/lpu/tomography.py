"""Process tomography: Pauli-eigenstate settings, hedged frequencies and constrained Choi estimation.

The Choi state of a channel on d dimensions is ordered input (x) output,
``rho = sum_ij |i><j| (x) E(|i><j|) / d``, so the input marginal is I/d
and the probability of effect ``Pi`` after preparing ``rho_in`` is
``d * Tr[rho (rho_in^T (x) Pi)]``.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_random_state, check_unitary, spawn_generators
from .io import check_schema, read_json, tag, write_json

STATES = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "+i": np.array([1, 1j]) / np.sqrt(2),
    "-i": np.array([1, -1j]) / np.sqrt(2),
}
BASES = {"z": ("0", "1"), "x": ("+", "-"), "y": ("+i", "-i")}
DEFAULT_BETA = 0.1
WEIGHT_FLOOR = 1e-4


class ConvergenceError(RuntimeError):
    """The reconstruction hit its iteration cap; ``best`` holds the best iterate."""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


def _check_labels(labels):
    labels = tuple(labels)
    bad = [x for x in labels if x not in STATES]
    if bad or not labels:
        raise ValueError(f"unknown state labels {bad}; use {sorted(STATES)}")
    return labels


@dataclass(frozen=True)
class PreparationSetting:
    """Product input state, one label per qubit in (control, target) order."""

    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", _check_labels(self.labels))

    def state(self):
        return _kron([STATES[x] for x in self.labels])


@dataclass(frozen=True)
class MeasurementSetting:
    """Product projector, one eigenstate label per qubit."""

    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", _check_labels(self.labels))

    def projector(self):
        v = _kron([STATES[x] for x in self.labels])
        return np.outer(v, v.conj())


def _kron(parts):
    out = np.array([1.0 + 0j])
    for p in parts:
        out = np.kron(out, p)
    return out


def basis_projectors(bases):
    """The 2^n product projectors of a Pauli basis setting, outcome bits in binary order."""
    return [
        MeasurementSetting(tuple(BASES[b][bit] for b, bit in zip(bases, bits)))
        for bits in itertools.product((0, 1), repeat=len(bases))
    ]


def generate_settings(n_qubits):
    """(preparation, basis setting) pairs: 6^n preparations times 3^n Pauli bases."""
    if n_qubits not in (1, 2):
        raise ValueError("tomography supports 1 or 2 qubits")
    preps = [PreparationSetting(p) for p in itertools.product(STATES, repeat=n_qubits)]
    bases = list(itertools.product("zxy", repeat=n_qubits))
    return [(p, b) for p in preps for b in bases]


@dataclass(frozen=True)
class CountsRecord:
    """Events ``n`` for one projector out of ``N`` events in its basis setting."""

    preparation: PreparationSetting
    measurement: MeasurementSetting
    n: float
    N: float
    bases: tuple = None

    def __post_init__(self):
        if not 0 <= self.n <= self.N:
            raise ValueError(f"counts must satisfy 0 <= n <= N, got n={self.n}, N={self.N}")
        if len(self.preparation.labels) != len(self.measurement.labels):
            raise ValueError("preparation and measurement cover different qubit numbers")
        if self.bases is None:
            inv = {s: b for b, pair in BASES.items() for s in pair}
            object.__setattr__(self, "bases", tuple(inv[x] for x in self.measurement.labels))

    @property
    def group(self):
        return (self.preparation.labels, self.bases)


def hedge(n, N, K, beta=DEFAULT_BETA):
    """Hedged frequency (n + beta) / (N + K beta)."""
    if K < 2:
        raise ValueError("need at least two outcomes")
    n, N = np.asarray(n, dtype=float), np.asarray(N, dtype=float)
    return (n + beta) / (N + K * beta)


def choi_from_unitary(U):
    U = check_unitary(U)
    d = U.shape[0]
    v = U.T.reshape(-1)  # sum_i |i> (x) U|i>
    return np.outer(v, v.conj()) / d


def choi_from_kraus(kraus):
    d = kraus[0].shape[1]
    out = np.zeros((d * d, d * d), dtype=complex)
    for K in kraus:
        v = K.T.reshape(-1)
        out += np.outer(v, v.conj())
    return out / d


def channel_probability(choi, preparation, measurement):
    d = int(round(np.sqrt(choi.shape[0])))
    rho = np.outer(preparation.state(), preparation.state().conj())
    E = np.kron(rho.T, measurement.projector())
    return float(np.real(d * np.trace(choi @ E)))


def partial_trace_output(choi):
    d = int(round(np.sqrt(choi.shape[0])))
    return np.einsum("iaja->ij", choi.reshape(d, d, d, d))


@dataclass(frozen=True)
class ChoiState:
    """Estimated Choi matrix with its constraint certificates."""

    matrix: np.ndarray
    objective: float = None
    iterations: int = None
    converged: bool = True
    history: tuple = field(default=(), repr=False)

    @property
    def dim(self):
        return int(round(np.sqrt(self.matrix.shape[0])))

    @property
    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.matrix).min())

    @property
    def trace_residual(self):
        d = self.dim
        return float(np.max(np.abs(partial_trace_output(self.matrix) - np.eye(d) / d)))

    def is_valid(self, eig_tol=1e-9, trace_tol=1e-6):
        return self.min_eigenvalue >= -eig_tol and self.trace_residual <= trace_tol


def _project_psd(X):
    w, V = np.linalg.eigh(0.5 * (X + X.conj().T))
    return (V * np.clip(w, 0, None)) @ V.conj().T


def _project_trace(X, d):
    excess = partial_trace_output(X) - np.eye(d) / d
    return X - np.kron(excess, np.eye(d)) / d


def project_choi(X, d, tol=1e-12, max_iter=2000):
    """Closest point of PSD ∩ {input marginal = I/d} by Dykstra's alternating projections."""
    x = X.copy()
    p = np.zeros_like(X)
    q = np.zeros_like(X)
    for _ in range(max_iter):
        y = _project_trace(x + p, d)
        p = x + p - y
        x_new = _project_psd(y + q)
        q = y + q - x_new
        step = np.max(np.abs(x_new - x))
        x = x_new
        if step < tol:
            break
    return x


def _design(records):
    """Effect matrices, hedged frequencies and weights from counts records."""
    d = 2 ** len(records[0].preparation.labels)
    K = d  # a product Pauli basis on n qubits has 2^n = d outcomes
    effects, freqs, totals = [], [], []
    for r in records:
        rho = np.outer(r.preparation.state(), r.preparation.state().conj())
        effects.append(np.kron(rho.T, r.measurement.projector()))
        freqs.append(r.n / r.N if r.N > 0 else 0.0)
        totals.append(r.N)
    return d, K, np.array(effects), np.array(freqs), np.array(totals, dtype=float)


def objective(choi, effects, p, weights, d):
    pred = d * np.real(np.einsum("kab,ba->k", effects, choi))
    return float(np.sum(weights * (p - pred) ** 2))


def mle_reconstruct(records, beta=DEFAULT_BETA, weight_floor=WEIGHT_FLOOR, tol=1e-10,
                    max_iter=20_000, initial=None):
    """Weighted least-squares Choi estimate under positivity and trace preservation.

    Minimizes sum N (p - d Tr[rho E])^2 / (p (1 - p)) over hedged
    frequencies p, with p (1 - p) floored at ``weight_floor``. The solver is
    a monotone accelerated projected-gradient method; each step projects
    onto the constraint set with Dykstra's algorithm. It stops when the
    relative objective change drops below ``tol``.
    """
    records = list(records)
    if not records:
        raise ValueError("no counts records")
    d, K, effects, raw, totals = _design(records)
    groups = {}
    for r in records:
        groups[r.group] = groups.get(r.group, 0) + 1
    if any(v != K for v in groups.values()):
        raise ValueError(f"every basis setting needs {K} outcome records")
    p = hedge(raw * totals, totals, K, beta) if beta else raw
    weights = totals / np.maximum(p * (1 - p), weight_floor)

    A = effects.reshape(len(effects), -1)
    L = 2 * d ** 2 * np.linalg.norm(np.sqrt(weights)[:, None] * A, 2) ** 2
    D = d * d

    def grad(X):
        r = d * np.real(np.einsum("kab,ba->k", effects, X)) - p
        return 2 * d * np.einsum("k,kab->ab", weights * r, effects)

    x = np.eye(D, dtype=complex) / D if initial is None else project_choi(initial, d)
    f_x = objective(x, effects, p, weights, d)
    y, t = x.copy(), 1.0
    history = [f_x]
    # exact data drive the objective to zero geometrically; stop at round-off level
    floor = 1e-24 * float(np.sum(weights))
    for it in range(1, max_iter + 1):
        z = project_choi(y - grad(y) / L, d)
        f_z = objective(z, effects, p, weights, d)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        x_old, f_old = x, f_x
        if f_z <= f_x:
            x, f_x = z, f_z
        y = x + (t / t_new) * (z - x) + ((t - 1) / t_new) * (x - x_old)
        t = t_new
        history.append(f_x)
        # only an accepted step can signal convergence
        if f_z <= f_old and (f_old - f_z <= tol * f_old or f_z <= floor):
            return ChoiState(x, f_x, it, True, tuple(history))
    best = ChoiState(x, f_x, max_iter, False, tuple(history))
    raise ConvergenceError(
        f"no convergence in {max_iter} iterations (objective {f_x:.6g})", best
    )


def process_and_gate_fidelity(choi, ideal):
    """(F_p, F_g) of a Choi state against an ideal unitary."""
    rho = choi.matrix if isinstance(choi, ChoiState) else np.asarray(choi)
    target = choi_from_unitary(ideal)
    if rho.shape != target.shape:
        raise ValueError("Choi state and ideal unitary have different dimensions")
    d = int(ideal.shape[0])
    fp = float(np.real(np.trace(rho @ target)))
    return fp, (d * fp + 1) / (d + 1)


def _as_choi(channel):
    """Choi matrix of a unitary or an already-formed Choi matrix."""
    channel = np.asarray(channel, dtype=complex)
    n = channel.shape[0]
    # a Choi matrix has unit trace and is positive, so it is never unitary
    if np.allclose(channel.conj().T @ channel, np.eye(n), atol=1e-9):
        return choi_from_unitary(channel)
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise ValueError("channel must be a unitary or a d^2 x d^2 Choi matrix")
    return channel


def simulate_counts(channel, shots=10_000, rng=None):
    """Counts records for all settings from a unitary or Choi matrix.

    ``shots`` events per basis setting are split multinomially over its
    outcomes; ``shots=None`` records exact probabilities (N = 1).
    """
    rng = check_random_state(rng)
    choi = _as_choi(channel)
    n_qubits = int(round(np.log2(np.sqrt(choi.shape[0]))))
    records = []
    for prep, bases in generate_settings(n_qubits):
        projs = basis_projectors(bases)
        probs = np.clip([channel_probability(choi, prep, m) for m in projs], 0, None)
        probs = probs / probs.sum()
        if shots is None:
            counts, total = probs, 1.0
        else:
            counts, total = rng.multinomial(int(shots), probs), int(shots)
        for m, c in zip(projs, counts):
            records.append(CountsRecord(prep, m, c, total, bases))
    return records


def resample_counts(records, rng=None):
    """Poisson resampling of every count; basis totals are recomputed from the draws."""
    rng = check_random_state(rng)
    drawn = [int(rng.poisson(r.n)) for r in records]
    totals = {}
    for r, n in zip(records, drawn):
        totals[r.group] = totals.get(r.group, 0) + n
    out = []
    for r, n in zip(records, drawn):
        N = totals[r.group]
        out.append(CountsRecord(r.preparation, r.measurement, n, N, r.bases))
    return out


@dataclass(frozen=True)
class BootstrapResult:
    estimate: tuple
    std: tuple
    samples: np.ndarray


def bootstrap_errors(records, ideal, pipeline=None, resamples=100, rng=None):
    """(F_p, F_g) point estimates with 1 sigma from Poisson-resampled reconstructions."""
    pipeline = pipeline or (lambda recs: process_and_gate_fidelity(mle_reconstruct(recs), ideal))
    estimate = pipeline(records)
    samples = np.array([pipeline(resample_counts(records, g)) for g in spawn_generators(rng, resamples)])
    std = samples.std(axis=0, ddof=1) if resamples > 1 else np.zeros(len(estimate))
    return BootstrapResult(tuple(float(x) for x in estimate), tuple(float(s) for s in std), samples)


class ProcessTomography(BaseEstimator):
    """Estimator wrapper: ``fit`` takes counts records and stores ``choi_``."""

    def __init__(self, beta=DEFAULT_BETA, weight_floor=WEIGHT_FLOOR, tol=1e-10, max_iter=20_000):
        self.beta = beta
        self.weight_floor = weight_floor
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, records, y=None):
        self.choi_ = mle_reconstruct(
            records, beta=self.beta, weight_floor=self.weight_floor, tol=self.tol,
            max_iter=self.max_iter,
        )
        return self

    def fidelity(self, ideal):
        return process_and_gate_fidelity(self.choi_, ideal)

    def score(self, records, y=None):
        """Negative objective of a fitted state on ``records``."""
        d, K, effects, raw, totals = _design(list(records))
        p = hedge(raw * totals, totals, K, self.beta) if self.beta else raw
        weights = totals / np.maximum(p * (1 - p), self.weight_floor)
        return -objective(self.choi_.matrix, effects, p, weights, d)


def postselected_cnot_records(shots=10_000, rng=None, backend="exact", chip=None,
                              calibration=None):
    """Counts records for the post-selected CNOT over all 324 settings.

    Each setting dials the preparation and measurement phases on the mesh;
    decoded bits are corrected for the gate's known output Pauli frame.
    """
    from .protocols.gates import gate_library, postselected_cnot_config

    rng = check_random_state(rng)
    gate = gate_library("postselected_cnot")
    records = []
    for prep, bases in generate_settings(2):
        config = postselected_cnot_config(prep.labels, bases)
        probs = _setting_distribution(gate, config, bases, backend, shots, chip, rng, calibration)
        keys = list(itertools.product((0, 1), repeat=2))
        if shots is None:
            counts, total = [probs.get(k, 0.0) for k in keys], 1.0
        elif backend == "exact":
            counts = rng.multinomial(int(shots), [probs.get(k, 0.0) for k in keys])
            total = int(shots)
        else:
            counts = [probs.get(k, 0) for k in keys]
            total = int(sum(counts))
        for proj, c in zip(basis_projectors(bases), counts):
            records.append(CountsRecord(prep, proj, c, total, tuple(bases)))
    return records


def _setting_distribution(gate, config, bases, backend, shots, chip, rng, calibration):
    from .chip.experiment import run_experiment
    from .chip.hardware import SourceModel
    from .fock import output_distribution

    enc = gate.encoding
    occ = enc.occupation((0, 0))
    out = {}
    if backend == "exact":
        dist = output_distribution(gate.unitary(config), occ)
        for pattern, p in dist.probabilities.items():
            if gate.heralding.accepts(pattern, enc):
                key = enc.readout(enc.decode(pattern), bases)
                out[key] = out.get(key, 0.0) + p
        total = sum(out.values())
        return {k: v / total for k, v in out.items()}
    from .fock import enumerate_outcomes

    accepted = [p for p in enumerate_outcomes(enc.mode_count, 2) if gate.heralding.accepts(p, enc)]
    run = run_experiment(
        chip, config, SourceModel.ideal(occ), shots, rng, detection=accepted,
        calibration=calibration, target_events=shots,
    )
    for pattern, c in run.counts.items():
        key = enc.readout(enc.decode(pattern), bases)
        out[key] = out.get(key, 0) + c
    return out


def records_to_dict(records):
    return {
        "schema": tag("counts"),
        "records": [
            {
                "preparation": list(r.preparation.labels),
                "measurement": list(r.measurement.labels),
                "bases": list(r.bases),
                "n": float(r.n),
                "N": float(r.N),
            }
            for r in records
        ],
    }


def records_from_dict(data):
    check_schema(data, "counts")
    return [
        CountsRecord(
            PreparationSetting(e["preparation"]), MeasurementSetting(e["measurement"]),
            e["n"], e["N"], tuple(e["bases"]),
        )
        for e in data["records"]
    ]


def write_counts(path, records):
    write_json(path, records_to_dict(records))


def read_counts(path):
    return records_from_dict(read_json(path))


__all__ = [
    "BASES",
    "BootstrapResult",
    "ChoiState",
    "ConvergenceError",
    "CountsRecord",
    "MeasurementSetting",
    "PreparationSetting",
    "ProcessTomography",
    "STATES",
    "basis_projectors",
    "bootstrap_errors",
    "channel_probability",
    "choi_from_kraus",
    "choi_from_unitary",
    "generate_settings",
    "hedge",
    "mle_reconstruct",
    "partial_trace_output",
    "postselected_cnot_records",
    "process_and_gate_fidelity",
    "project_choi",
    "read_counts",
    "records_from_dict",
    "records_to_dict",
    "resample_counts",
    "simulate_counts",
    "write_counts",
]
