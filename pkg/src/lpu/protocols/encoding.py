"""Dual-rail qubits, heralding rules and logical truth tables."""

import itertools
from dataclasses import dataclass, field

import numpy as np

# Pauli frame bookkeeping: does a frame Pauli flip the outcome of a basis measurement
_ANTICOMMUTES = {
    ("I", "z"): False, ("I", "x"): False, ("I", "y"): False,
    ("X", "z"): True, ("X", "x"): False, ("X", "y"): True,
    ("Z", "z"): False, ("Z", "x"): True, ("Z", "y"): True,
    ("Y", "z"): True, ("Y", "x"): True, ("Y", "y"): False,
}


@dataclass(frozen=True)
class DualRailEncoding:
    """Qubits carried by one photon in a pair of modes.

    ``qubits`` lists (mode for |0>, mode for |1>) per qubit using the device
    labels in ``mode_labels``; the lower-numbered mode of a pair is |0>.
    ``output_frame`` records a known Pauli applied by the circuit to each
    output qubit, corrected when outcomes are decoded.
    """

    qubits: tuple
    mode_labels: tuple
    output_frame: tuple = None

    def __post_init__(self):
        qubits = tuple(tuple(int(x) for x in q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "mode_labels", tuple(int(x) for x in self.mode_labels))
        modes = [x for q in qubits for x in q]
        if any(len(q) != 2 or q[0] >= q[1] for q in qubits):
            raise ValueError("each qubit needs two modes, lower mode first")
        if len(set(modes)) != len(modes):
            raise ValueError("qubit mode pairs must be disjoint")
        if not set(modes) <= set(self.mode_labels):
            raise ValueError("qubit modes must be device modes")
        frame = ("I",) * len(qubits) if self.output_frame is None else tuple(self.output_frame)
        if len(frame) != len(qubits) or any(p not in "IXYZ" for p in frame):
            raise ValueError("output_frame needs one Pauli label per qubit")
        object.__setattr__(self, "output_frame", frame)

    @property
    def n_qubits(self):
        return len(self.qubits)

    @property
    def mode_count(self):
        return len(self.mode_labels)

    def index(self, label):
        return self.mode_labels.index(label)

    @property
    def logical_modes(self):
        return tuple(x for q in self.qubits for x in q)

    def occupation(self, bits, extra=None):
        """Occupation tuple with qubit k in |bits[k]> plus ``extra`` {label: count}."""
        if len(bits) != self.n_qubits or any(b not in (0, 1) for b in bits):
            raise ValueError(f"need {self.n_qubits} logical bits")
        occ = [0] * self.mode_count
        for q, b in zip(self.qubits, bits):
            occ[self.index(q[b])] += 1
        for label, count in (extra or {}).items():
            occ[self.index(label)] += count
        return tuple(occ)

    def decode(self, pattern):
        """Logical bits of a pattern with one photon per qubit, else None."""
        bits = []
        for q in self.qubits:
            a, b = pattern[self.index(q[0])], pattern[self.index(q[1])]
            if (a, b) == (1, 0):
                bits.append(0)
            elif (a, b) == (0, 1):
                bits.append(1)
            else:
                return None
        return tuple(bits)

    def readout(self, bits, bases):
        """Correct decoded bits for the output Pauli frame under measurement ``bases``."""
        return tuple(
            b ^ int(_ANTICOMMUTES[(p, basis)])
            for b, p, basis in zip(bits, self.output_frame, bases)
        )

    def basis_states(self):
        return list(itertools.product((0, 1), repeat=self.n_qubits))


@dataclass(frozen=True)
class HeraldingRule:
    """Success condition: exact counts on herald modes, optional logical filter.

    With ``computational`` set, every qubit must hold exactly one photon and
    all other non-herald modes must be empty, which also removes events from
    unwanted multi-pair source terms.
    """

    herald: tuple = ()
    computational: bool = True

    def __post_init__(self):
        object.__setattr__(self, "herald", tuple((int(m), int(c)) for m, c in self.herald))

    @property
    def herald_modes(self):
        return tuple(m for m, _ in self.herald)

    def check(self, encoding):
        if set(self.herald_modes) & set(encoding.logical_modes):
            raise ValueError("herald modes must be disjoint from the logical modes")
        return self

    def accepts(self, pattern, encoding):
        for label, count in self.herald:
            if pattern[encoding.index(label)] != count:
                return False
        if not self.computational:
            return True
        if encoding.decode(pattern) is None:
            return False
        used = set(self.herald_modes) | set(encoding.logical_modes)
        return all(
            pattern[k] == 0 for k, label in enumerate(encoding.mode_labels) if label not in used
        )


@dataclass(frozen=True)
class TruthTable:
    """Logical output probabilities per computational input.

    ``probabilities[a, b]`` is the chance of output ``labels[b]`` given input
    ``labels[a]`` within the post-selected subspace; ``success`` holds the
    per-input success probability (or heralding rate).
    """

    labels: tuple
    probabilities: np.ndarray
    success: np.ndarray = field(default=None)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        object.__setattr__(self, "probabilities", p)
        if p.shape != (len(self.labels), len(self.labels)):
            raise ValueError("truth table must be square over its labels")
        rows = p.sum(axis=1)
        if np.any(np.abs(rows[rows > 0] - 1.0) > 1e-9):
            raise ValueError("truth table rows must be normalized")
        if self.success is not None:
            object.__setattr__(self, "success", np.asarray(self.success, dtype=float))

    @classmethod
    def from_unitary(cls, G, n_qubits):
        labels = tuple(itertools.product((0, 1), repeat=n_qubits))
        return cls(labels, np.abs(np.asarray(G)).T ** 2)

    def statistical_fidelity(self, other):
        """Mean over inputs of the row-wise statistical fidelity."""
        return float(np.mean(np.sum(np.sqrt(self.probabilities * other.probabilities), axis=1)))

    def max_deviation(self, other):
        return float(np.max(np.abs(self.probabilities - other.probabilities)))


__all__ = ["DualRailEncoding", "HeraldingRule", "TruthTable"]
