"""Fock-space bookkeeping, permanents and multi-photon output statistics."""

import itertools
import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from ._validation import check_occupation, check_random_state, check_square

SUPPRESSION_ATOL = 1e-12
SUBSPACES = ("full", "collision-free", "post-selected")


@numba.njit(cache=True)
def _ryser_gray(A):
    n = A.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    rowsum = np.zeros(n, dtype=np.complex128)
    inset = np.zeros(n, dtype=np.bool_)
    total = 0.0 + 0.0j
    size = 0
    for k in range(1, 1 << n):
        # Gray code: flip the column indexed by the lowest set bit of k
        j = 0
        t = k
        while (t & 1) == 0:
            t >>= 1
            j += 1
        if inset[j]:
            for i in range(n):
                rowsum[i] -= A[i, j]
            inset[j] = False
            size -= 1
        else:
            for i in range(n):
                rowsum[i] += A[i, j]
            inset[j] = True
            size += 1
        prod = 1.0 + 0.0j
        for i in range(n):
            prod *= rowsum[i]
        if size & 1:
            total -= prod
        else:
            total += prod
    if n & 1:
        return -total
    return total


def permanent(A):
    """Permanent of a square matrix (Ryser's formula, Gray-code order).

    >>> permanent(np.ones((3, 3)))
    (6+0j)
    """
    A = np.ascontiguousarray(check_square(np.asarray(A, dtype=complex)))
    return complex(_ryser_gray(A))


def mode_assignment(occupations):
    """Sorted 1-based positions of the photons, e.g. (1,0,2) -> (1, 3, 3)."""
    occ = check_occupation(occupations)
    return tuple(k + 1 for k, c in enumerate(occ) for _ in range(c))


def from_mode_assignment(positions, mode_count):
    occ = [0] * mode_count
    for d in positions:
        if not 1 <= d <= mode_count:
            raise ValueError(f"mode {d} outside 1..{mode_count}")
        occ[d - 1] += 1
    return tuple(occ)


def enumerate_outcomes(m, n, subspace="full"):
    """All n-photon patterns over m modes, ordered lexicographically by mode assignment."""
    if m < 1 or n < 1:
        raise ValueError("need m >= 1 and n >= 1")
    if subspace == "full":
        combos = itertools.combinations_with_replacement(range(1, m + 1), n)
    elif subspace == "collision-free":
        if n > m:
            raise ValueError(f"no collision-free patterns for n={n} > m={m}")
        combos = itertools.combinations(range(1, m + 1), n)
    else:
        raise ValueError(f"unknown subspace {subspace!r}")
    return [from_mode_assignment(c, m) for c in combos]


def is_collision_free(occupations):
    return all(c <= 1 for c in occupations)


def _submatrix(U, inp, out):
    cols = [k for k, c in enumerate(inp) for _ in range(c)]
    rows = [k for k, c in enumerate(out) for _ in range(c)]
    return U[np.ix_(rows, cols)]


def _factorials(occ):
    return math.prod(math.factorial(c) for c in occ)


def _check_pair(U, inp, out):
    U = check_square(np.asarray(U, dtype=complex), "U")
    m = U.shape[0]
    inp = check_occupation(inp, m, "input")
    out = check_occupation(out, m, "output")
    if sum(inp) != sum(out):
        raise ValueError(f"photon-number mismatch: {sum(inp)} in, {sum(out)} out")
    return U, inp, out


def transition_amplitude(U, inp, out):
    """<out| U |inp> for indistinguishable photons."""
    U, inp, out = _check_pair(U, inp, out)
    sub = _submatrix(U, inp, out)
    return permanent(sub) / math.sqrt(_factorials(inp) * _factorials(out))


def classical_probability(U, inp, out):
    """Transition probability for fully distinguishable photons."""
    U, inp, out = _check_pair(U, inp, out)
    sub = np.abs(_submatrix(U, inp, out)) ** 2
    return permanent(sub).real / _factorials(out)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probability table over output patterns.

    ``probabilities`` maps occupation tuples to unnormalized-as-computed
    probabilities. For a restricted subspace the retained mass is
    ``success_probability``; ``normalized`` rescales to a post-selected table.
    """

    probabilities: dict
    mode_count: int
    photon_count: int
    subspace: str = "full"
    model: str = "quantum"
    success_probability: float = field(default=None)

    def __post_init__(self):
        if self.subspace not in SUBSPACES:
            raise ValueError(f"unknown subspace label {self.subspace!r}")
        if any(p < -1e-15 for p in self.probabilities.values()):
            raise ValueError("probabilities must be non-negative")
        if self.success_probability is None:
            object.__setattr__(self, "success_probability", self.total)

    @property
    def outcomes(self):
        return list(self.probabilities)

    @property
    def total(self):
        return float(math.fsum(self.probabilities.values()))

    def __getitem__(self, outcome):
        return self.probabilities[tuple(outcome)]

    def __len__(self):
        return len(self.probabilities)

    def as_array(self, outcomes=None):
        keys = self.outcomes if outcomes is None else [tuple(o) for o in outcomes]
        return np.array([self.probabilities.get(k, 0.0) for k in keys])

    def restrict(self, predicate, subspace="post-selected"):
        kept = {k: p for k, p in self.probabilities.items() if predicate(k)}
        mass = math.fsum(kept.values())
        return replace(self, probabilities=kept, subspace=subspace, success_probability=mass)

    def normalized(self):
        """Renormalized copy; ``success_probability`` keeps the retained mass."""
        mass = self.total
        if mass <= 0:
            raise ValueError("cannot normalize a distribution with zero mass")
        probs = {k: p / mass for k, p in self.probabilities.items()}
        label = "full" if self.subspace == "full" else "post-selected"
        return replace(self, probabilities=probs, subspace=label, success_probability=mass)

    def is_normalized(self, atol=1e-9):
        return abs(self.total - 1.0) <= atol


def output_distribution(U, inp, model="quantum", subspace="full"):
    """Output statistics of ``inp`` through ``U``.

    ``subspace`` is "full", "collision-free", a predicate on occupation
    tuples, or an explicit sequence of outcomes. Probabilities are not
    renormalized, so restricted tables expose their retained mass.
    """
    U = check_square(np.asarray(U, dtype=complex), "U")
    m = U.shape[0]
    inp = check_occupation(inp, m, "input")
    n = sum(inp)
    if model not in ("quantum", "classical"):
        raise ValueError(f"unknown model {model!r}")

    label = "post-selected"
    if isinstance(subspace, str):
        outcomes = enumerate_outcomes(m, n, subspace)
        label = subspace
    elif callable(subspace):
        outcomes = [o for o in enumerate_outcomes(m, n, "full") if subspace(o)]
    else:
        outcomes = [check_occupation(o, m, "outcome") for o in subspace]

    cols = [k for k, c in enumerate(inp) for _ in range(c)]
    Ucols = np.ascontiguousarray(U[:, cols])
    Pcols = np.abs(Ucols) ** 2
    in_fact = _factorials(inp)
    probs = {}
    for out in outcomes:
        rows = [k for k, c in enumerate(out) for _ in range(c)]
        out_fact = _factorials(out)
        if model == "quantum":
            amp = _ryser_gray(np.ascontiguousarray(Ucols[rows]))
            probs[out] = (amp.real ** 2 + amp.imag ** 2) / (in_fact * out_fact)
        else:
            probs[out] = _ryser_gray(np.ascontiguousarray(Pcols[rows] + 0j)).real / out_fact
    return OutcomeDistribution(probs, m, n, label, model)


def _as_prob_table(dist):
    if isinstance(dist, OutcomeDistribution):
        return dist.probabilities
    return {tuple(k): float(v) for k, v in dict(dist).items()}


def sample_counts(dist, shots, rng=None):
    """Multinomial counts over the outcomes of a normalized distribution."""
    table = _as_prob_table(dist)
    p = np.array(list(table.values()), dtype=float)
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"distribution is not normalized (total {p.sum():.12g})")
    rng = check_random_state(rng)
    p = np.clip(p, 0.0, None)
    counts = rng.multinomial(int(shots), p / p.sum())
    return {k: int(c) for k, c in zip(table, counts)}


def frequencies(counts):
    """Normalize a counts table into relative frequencies."""
    total = sum(counts.values())
    if total <= 0:
        raise ValueError("counts table has no events")
    return {k: v / total for k, v in counts.items()}


def statistical_fidelity(p, q, atol=1e-9):
    """Bhattacharyya coefficient sum_i sqrt(p_i q_i) of two normalized tables."""
    p, q = _as_prob_table(p), _as_prob_table(q)
    if set(p) != set(q):
        raise ValueError("distributions are defined on different outcome sets")
    for name, t in (("p", p), ("q", q)):
        total = math.fsum(t.values())
        if abs(total - 1.0) > atol:
            raise ValueError(f"{name} is not normalized (total {total:.12g})")
    value = math.fsum(math.sqrt(max(p[k], 0.0) * max(q[k], 0.0)) for k in p)
    return min(value, 1.0)


def total_variation(p, q):
    p, q = _as_prob_table(p), _as_prob_table(q)
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def pattern_string(occupations):
    """Comma-free digit string for an occupation pattern (occupations < 10)."""
    if any(c > 9 for c in occupations):
        raise ValueError("digit-string patterns need occupations below 10")
    return "".join(str(c) for c in occupations)


def format_table(table, mode_count, photon_count, subspace, seed=None, value="probability"):
    """Tabular text: a header line then one ``pattern value`` pair per line."""
    lines = [f"# m={mode_count} n={photon_count} subspace={subspace} seed={seed} value={value}"]
    for k, v in table.items():
        lines.append(f"{pattern_string(k)} {v!r}")
    return "\n".join(lines) + "\n"


def parse_table(text):
    """Inverse of ``format_table``; returns (header dict, table)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing header line")
    header = dict(item.split("=", 1) for item in lines[0][1:].split())
    kind = header.get("value", "probability")
    table = {}
    for ln in lines[1:]:
        pattern, raw = ln.split()
        table[check_occupation(pattern)] = float(raw) if kind == "probability" else int(raw)
    return header, table


__all__ = [
    "OutcomeDistribution",
    "classical_probability",
    "enumerate_outcomes",
    "format_table",
    "frequencies",
    "from_mode_assignment",
    "is_collision_free",
    "mode_assignment",
    "output_distribution",
    "parse_table",
    "pattern_string",
    "permanent",
    "sample_counts",
    "statistical_fidelity",
    "total_variation",
    "transition_amplitude",
]
