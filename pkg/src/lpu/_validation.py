"""Input validation helpers shared across the package."""

import numbers

import numpy as np

UNITARY_ATOL = 1e-9


class NonUnitaryError(ValueError):
    """Raised when a matrix fails the unitarity certificate."""

    def __init__(self, distance, atol=UNITARY_ATOL):
        self.distance = float(distance)
        self.atol = atol
        super().__init__(
            f"matrix is not unitary: max|U^dag U - I| = {self.distance:.3e} "
            f"exceeds {atol:.1e}"
        )


class SchemaError(ValueError):
    """Raised when a file carries an unknown or incompatible schema tag."""


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``.

    Accepts None, an integer, a ``SeedSequence`` or an existing Generator
    (returned unchanged).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise TypeError(f"cannot build a random generator from {type(seed).__name__}")


def check_square(A, name="matrix"):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    return A


def unitarity_distance(U):
    """Max-norm distance of ``U^dag U`` from the identity."""
    U = np.asarray(U, dtype=complex)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])), initial=0.0))


def check_unitary(U, atol=UNITARY_ATOL, name="matrix"):
    """Return ``U`` as a complex array, raising NonUnitaryError if it is not unitary."""
    U = np.asarray(check_square(U, name), dtype=complex)
    d = unitarity_distance(U)
    if d > atol:
        raise NonUnitaryError(d, atol)
    return U


def check_occupation(state, mode_count=None, name="state"):
    """Validate a Fock occupation pattern and return it as a tuple of ints.

    Strings of digits such as ``"101010"`` are accepted as shorthand.
    """
    if isinstance(state, str):
        if not state.isdigit():
            raise ValueError(f"{name} string must contain only digits: {state!r}")
        state = [int(c) for c in state]
    occ = tuple(int(x) for x in state)
    if any(x < 0 for x in occ):
        raise ValueError(f"{name} has negative occupations: {occ}")
    if mode_count is not None and len(occ) != mode_count:
        raise ValueError(f"{name} has {len(occ)} modes, expected {mode_count}")
    return occ


def spawn_generators(seed, n):
    """``n`` independent generators derived from ``seed`` by SeedSequence spawning.

    A Generator seed contributes one draw to build the parent sequence, so
    results stay reproducible for a seeded parent.
    """
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(2 ** 63))
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in seed.spawn(int(n))]
