"""Complex Hadamard matrices: named instances, the two-parameter F6 family and its manifolds."""

import itertools
from dataclasses import dataclass

import numpy as np

from .._validation import check_occupation, unitarity_distance
from ..data import G6, S6
from ..fock import output_distribution, transition_amplitude
from ..mesh import TWO_PI
from .boson import ztl_predicate, ztl_violation

FAMILIES = ("fourier", "F6_two_param", "S6_isolated", "G6_instance")
FOURIER_POINT = (np.pi, 0.0)


def fourier(N):
    k = np.arange(N)
    return np.exp(2j * np.pi * np.outer(k, k) / N) / np.sqrt(N)


def _check_angle(theta):
    theta = float(theta)
    if not 0.0 <= theta < TWO_PI:
        raise ValueError(f"parameter {theta} outside [0, 2 pi)")
    return theta


def F6_two_param(theta1, theta2):
    """Two-parameter affine family of 6x6 complex Hadamard matrices.

    F6 with an entrywise phase mask: rows 2, 4 and 6 pick up phases
    (0, a, b, 0, a, b) with a = theta1 - pi and b = theta2, so (pi, 0) is
    the Fourier matrix itself.
    """
    a, b = _check_angle(theta1) - np.pi, _check_angle(theta2)
    mask = np.zeros((6, 6))
    mask[1::2] = [0.0, a, b, 0.0, a, b]
    return fourier(6) * np.exp(1j * mask)


@dataclass(frozen=True)
class CHMDescriptor:
    """Names a complex Hadamard matrix: a family tag, its parameters and dimension."""

    family: str
    params: tuple = ()
    N: int = 6

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown CHM family {self.family!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.family == "F6_two_param" and len(self.params) != 2:
            raise ValueError("F6_two_param needs (theta1, theta2)")
        if self.family != "fourier" and self.N != 6:
            raise ValueError(f"{self.family} is six-dimensional")


def chm(descriptor):
    """Matrix described by a CHMDescriptor (or a family name)."""
    if isinstance(descriptor, str):
        descriptor = CHMDescriptor(descriptor, FOURIER_POINT if descriptor == "F6_two_param" else ())
    fam = descriptor.family
    if fam == "fourier":
        return fourier(descriptor.N)
    if fam == "F6_two_param":
        return F6_two_param(*descriptor.params)
    if fam == "S6_isolated":
        return S6.copy()
    return G6.astype(complex)


def is_chm(U, tol=1e-9):
    """Unitary within ``tol`` with every |U_ij|^2 within ``tol`` of 1/N."""
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        return False
    N = U.shape[0]
    return bool(unitarity_distance(U) <= tol and np.all(np.abs(np.abs(U) ** 2 - 1.0 / N) <= tol))


def _dephase(U, r, c):
    """Move row r and column c to the front and make them real positive."""
    N = U.shape[0]
    rows = [r] + [k for k in range(N) if k != r]
    cols = [c] + [k for k in range(N) if k != c]
    V = U[np.ix_(rows, cols)]
    V = V * np.exp(-1j * np.angle(V[:, :1]))
    return V * np.exp(-1j * np.angle(V[:1, :]))


def chm_equivalent(A, B, tol=1e-6):
    """Whether A = P1 D1 B D2 P2 for permutations P and unitary diagonals D."""
    A, B = np.asarray(A, dtype=complex), np.asarray(B, dtype=complex)
    if A.shape != B.shape:
        return False
    N = A.shape[0]
    a = _dephase(A, 0, 0)[1:, 1:]
    for r, c in itertools.product(range(N), range(N)):
        b = _dephase(B, r, c)[1:, 1:]
        for perm in itertools.permutations(range(N - 1)):
            bp = b[:, perm]
            # rows must match up to a permutation, greedily
            free = list(range(N - 1))
            for row in a:
                hit = next((k for k in free if np.max(np.abs(bp[k] - row)) <= tol), None)
                if hit is None:
                    break
                free.remove(hit)
            else:
                return True
    return False


@dataclass(frozen=True)
class ManifoldTable:
    """Values over a (theta1, theta2) grid; ``values[a, b]`` is at (theta1[a], theta2[b])."""

    theta1: np.ndarray
    theta2: np.ndarray
    values: np.ndarray
    quantity: str

    def argmin(self):
        a, b = np.unravel_index(np.argmin(self.values), self.values.shape)
        return float(self.theta1[a]), float(self.theta2[b])

    def to_text(self):
        lines = [f"# theta1 theta2 {self.quantity}"]
        for a, t1 in enumerate(self.theta1):
            for b, t2 in enumerate(self.theta2):
                lines.append(f"{t1:.6f} {t2:.6f} {self.values[a, b]:.12e}")
        return "\n".join(lines) + "\n"


def parameter_grid(points=16):
    """Uniform grid over [0, 2 pi) containing pi and 0 when ``points`` is even."""
    return np.arange(points) * TWO_PI / points


def two_photon_manifold(theta1=None, theta2=None, photons=(1, 1, 0, 0, 0, 0),
                        output=(1, 1, 0, 0, 0, 0)):
    """Exact output probability of ``output`` for ``photons`` across the F6 family."""
    theta1 = parameter_grid() if theta1 is None else np.asarray(theta1, dtype=float)
    theta2 = parameter_grid() if theta2 is None else np.asarray(theta2, dtype=float)
    photons, output = check_occupation(photons, 6), check_occupation(output, 6)
    if sum(photons) != sum(output):
        raise ValueError("input and output photon numbers differ")
    values = np.empty((len(theta1), len(theta2)))
    for a, t1 in enumerate(theta1):
        for b, t2 in enumerate(theta2):
            amp = transition_amplitude(F6_two_param(t1 % TWO_PI, t2 % TWO_PI), photons, output)
            values[a, b] = abs(amp) ** 2
    return ManifoldTable(theta1, theta2, values, "probability")


def ztl_violation_surface(theta1=None, theta2=None, photons=(1, 0, 1, 0, 1, 0), model="quantum"):
    """Exact ZTL violation across the F6 family, using the Fourier-point suppression rule."""
    theta1 = parameter_grid() if theta1 is None else np.asarray(theta1, dtype=float)
    theta2 = parameter_grid() if theta2 is None else np.asarray(theta2, dtype=float)
    suppressed = ztl_predicate(photons)
    values = np.empty((len(theta1), len(theta2)))
    for a, t1 in enumerate(theta1):
        for b, t2 in enumerate(theta2):
            U = F6_two_param(t1 % TWO_PI, t2 % TWO_PI)
            dist = output_distribution(U, photons, model, subspace="collision-free")
            values[a, b] = ztl_violation(dist.probabilities, suppressed)
    return ManifoldTable(theta1, theta2, values, "nu")


__all__ = [
    "CHMDescriptor",
    "F6_two_param",
    "FOURIER_POINT",
    "ManifoldTable",
    "chm",
    "chm_equivalent",
    "fourier",
    "is_chm",
    "parameter_grid",
    "two_photon_manifold",
    "ztl_violation_surface",
]
