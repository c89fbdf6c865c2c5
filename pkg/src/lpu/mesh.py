"""Triangular Mach-Zehnder mesh: phase settings, unitaries and Haar sampling.

Conventions
-----------
Modes are numbered 1..m in user-facing positions and 0..m-1 in arrays.
The MZI at position (i, j), 1 <= i <= j <= m-1, acts on modes (j, j+1).
Row i collects the sub-unitary D_i; light meets D_{m-1} first and D_1 last,
so ``compose`` returns ``L @ D_1 @ D_2 @ ... @ D_{m-1}`` where ``L`` holds
the optional output phases. Inside D_i the MZIs are applied in order of
increasing j.

A phase shifter set to theta multiplies its mode by exp(-i*theta). Each MZI
applies its external phase phi to the top input, then a 50:50 coupler, the
internal phase alpha on the top arm and a second coupler::

    T(alpha, phi) = B @ diag(exp(-i alpha), 1) @ B @ diag(exp(-i phi), 1)
    B = [[1, i], [i, 1]] / sqrt(2)

so alpha = pi is the bar state and alpha = 0 (or 2 pi) the cross state.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import (
    check_random_state,
    check_square,
    check_unitary,
    unitarity_distance,
    NonUnitaryError,
)
from .io import check_schema, tag

TWO_PI = 2.0 * np.pi
_ZERO = 1e-13


def wrap_phase(x):
    """Reduce an angle to [0, 2 pi)."""
    x = float(np.mod(x, TWO_PI))
    return 0.0 if x >= TWO_PI else x


def coupler(reflectivity=0.5):
    """Directional coupler with cross-coupling power ``reflectivity``."""
    t = np.sqrt(1.0 - reflectivity)
    r = np.sqrt(reflectivity)
    return np.array([[t, 1j * r], [1j * r, t]])


def mzi_transfer(alpha, phi, reflectivities=(0.5, 0.5)):
    """2x2 transfer matrix of one MZI (see module docstring for the convention).

    ``reflectivities`` gives the cross-coupling power of the first and second
    coupler; the ideal device uses 1/2 for both.
    """
    first = coupler(reflectivities[0])
    second = coupler(reflectivities[1])
    inner = np.diag([np.exp(-1j * np.mod(alpha, TWO_PI)), 1.0])
    outer = np.diag([np.exp(-1j * np.mod(phi, TWO_PI)), 1.0])
    return second @ inner @ first @ outer


def mesh_positions(m):
    """MZI positions (i, j) in the order light meets them."""
    if m < 2:
        raise ValueError("a mesh needs at least 2 modes")
    return [(i, j) for i in range(m - 1, 0, -1) for j in range(i, m)]


@dataclass(frozen=True)
class MZIParams:
    """Phases of the MZI at row ``i``, diagonal ``j``; angles are reduced mod 2 pi."""

    i: int
    j: int
    alpha: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "i", int(self.i))
        object.__setattr__(self, "j", int(self.j))
        object.__setattr__(self, "alpha", wrap_phase(self.alpha))
        object.__setattr__(self, "phi", wrap_phase(self.phi))

    @property
    def position(self):
        return (self.i, self.j)


@dataclass(frozen=True)
class MeshConfig:
    """Complete phase setting of an m-mode triangular mesh.

    ``output_phases`` is a diagonal applied after the mesh. It is not a
    physical heater; it records the residual phases a decomposition needs to
    reproduce a target exactly and is None for a bare hardware setting.
    """

    mode_count: int
    params: tuple
    output_phases: tuple = field(default=None)

    def __post_init__(self):
        params = tuple(self.params)
        expected = mesh_positions(self.mode_count)
        if [p.position for p in params] != expected:
            raise ValueError(
                f"params must cover positions {expected} in cascade order"
            )
        object.__setattr__(self, "params", params)
        if self.output_phases is not None:
            phases = tuple(wrap_phase(x) for x in self.output_phases)
            if len(phases) != self.mode_count:
                raise ValueError("output_phases needs one entry per mode")
            object.__setattr__(self, "output_phases", phases)

    def __getitem__(self, position):
        return self.params[self._index()[tuple(position)]]

    def _index(self):
        return {p.position: k for k, p in enumerate(self.params)}

    @property
    def n_mzi(self):
        return len(self.params)

    def with_phases(self, updates):
        """Copy with ``{(i, j): (alpha, phi)}`` replaced; None keeps a value."""
        params = list(self.params)
        index = self._index()
        for pos, (alpha, phi) in updates.items():
            k = index[tuple(pos)]
            old = params[k]
            params[k] = MZIParams(
                old.i,
                old.j,
                old.alpha if alpha is None else alpha,
                old.phi if phi is None else phi,
            )
        return replace(self, params=tuple(params))

    def without_output_phases(self):
        return replace(self, output_phases=None)

    @classmethod
    def from_arrays(cls, m, alphas, phis, output_phases=None):
        """Build from flat per-position sequences in ``mesh_positions`` order."""
        params = [
            MZIParams(i, j, a, p)
            for (i, j), a, p in zip(mesh_positions(m), alphas, phis, strict=True)
        ]
        return cls(m, tuple(params), output_phases)

    @classmethod
    def from_table(cls, table):
        """Build from a triangular table of ``(phi, alpha)`` pairs.

        ``table[i-1][j-i]`` holds the pair for position (i, j), i.e. row i of
        the triangle lists diagonals j = i..m-1 from left to right.
        """
        m = len(table) + 1
        lookup = {}
        for i, row in enumerate(table, start=1):
            if len(row) != m - i:
                raise ValueError(f"row {i} must have {m - i} entries")
            for j, (phi, alpha) in enumerate(row, start=i):
                lookup[(i, j)] = (alpha, phi)
        params = [MZIParams(i, j, *lookup[(i, j)]) for i, j in mesh_positions(m)]
        return cls(m, tuple(params))

    def to_table(self):
        """Inverse of ``from_table``."""
        m = self.mode_count
        return [[(self[i, j].phi, self[i, j].alpha) for j in range(i, m)] for i in range(1, m)]

    @classmethod
    def bar(cls, m):
        """Every MZI in the bar state with all external phases zero."""
        return cls.from_arrays(m, [np.pi] * (m * (m - 1) // 2), [0.0] * (m * (m - 1) // 2))

    @property
    def alphas(self):
        return np.array([p.alpha for p in self.params])

    @property
    def phis(self):
        return np.array([p.phi for p in self.params])

    def to_dict(self):
        data = {
            "schema": tag("meshconfig"),
            "mode_count": self.mode_count,
            "params": [
                {"i": p.i, "j": p.j, "alpha": p.alpha, "phi": p.phi} for p in self.params
            ],
        }
        if self.output_phases is not None:
            data["output_phases"] = list(self.output_phases)
        return data

    @classmethod
    def from_dict(cls, data):
        check_schema(data, "meshconfig")
        params = [MZIParams(p["i"], p["j"], p["alpha"], p["phi"]) for p in data["params"]]
        return cls(int(data["mode_count"]), tuple(params), data.get("output_phases"))


def compose(config, include_output_phases=True):
    """Transfer matrix of ``config``; the result is certified unitary."""
    m = config.mode_count
    U = np.eye(m, dtype=complex)
    for p in config.params:
        k = p.j - 1
        U[k:k + 2, :] = mzi_transfer(p.alpha, p.phi) @ U[k:k + 2, :]
    if include_output_phases and config.output_phases is not None:
        U = np.exp(-1j * np.asarray(config.output_phases))[:, None] * U
    return check_unitary(U)


def _first_row_column(alphas, phis, n):
    """First column of one sub-unitary on n modes given its n-1 MZI phases."""
    col = np.zeros(n, dtype=complex)
    amp = 1.0 + 0j
    for k in range(n - 1):
        T = mzi_transfer(alphas[k], phis[k])
        col[k] = amp * T[0, 0]
        amp = amp * T[1, 0]
    col[n - 1] = amp
    return col


def _decompose(U):
    """Return (alphas, phis, out_phases) with rows ordered D_1, D_2, ..."""
    n = U.shape[0]
    if n == 1:
        return [], [], np.array([-np.angle(U[0, 0])])
    u = U[:, 0]
    mags = np.abs(u)
    tails = np.sqrt(np.cumsum((mags ** 2)[::-1])[::-1])
    alphas = np.empty(n - 1)
    for k in range(n - 1):
        if tails[k] < _ZERO:
            alphas[k] = np.pi
        else:
            alphas[k] = 2.0 * np.arctan2(mags[k], tails[k + 1])
    phis = np.zeros(n - 1)
    col = _first_row_column(alphas, phis, n)
    out = np.where(mags > _ZERO, -np.angle(u) + np.angle(col), 0.0)

    # D_1 as a full matrix, so W = (L D_1)^-1 U = 1 (+) W'
    D1 = np.eye(n, dtype=complex)
    for k in range(n - 1):
        D1[k:k + 2, :] = mzi_transfer(alphas[k], phis[k]) @ D1[k:k + 2, :]
    W = (np.exp(-1j * out)[:, None] * D1).conj().T @ U
    sub_alphas, sub_phis, theta = _decompose(W[1:, 1:])

    # push the sub-problem's output phases (inputs of D_1 on modes 1..n-1)
    # through D_1: each becomes a shift of the MZI external phases plus a
    # common phase on that MZI's outputs
    phis = phis.copy()
    phis[0] -= theta[0]
    for k in range(1, n - 1):
        phis[k] += theta[k - 1] - theta[k]
    extra = np.concatenate([theta, theta[-1:]])
    return list(alphas) + sub_alphas, list(phis) + sub_phis, out + extra


def decompose(U):
    """Mesh setting with output phases whose ``compose`` reproduces ``U``.

    Raises NonUnitaryError (carrying the distance) for non-unitary input.
    """
    U = check_unitary(U)
    m = U.shape[0]
    alphas, phis, out = _decompose(U)
    # _decompose lists rows D_1, D_2, ...; compose order starts at D_{m-1}
    by_pos = {}
    k = 0
    for i in range(1, m):
        for j in range(i, m):
            by_pos[(i, j)] = (alphas[k], phis[k])
            k += 1
    params = [MZIParams(i, j, *by_pos[(i, j)]) for i, j in mesh_positions(m)]
    return MeshConfig(m, tuple(params), tuple(out))


def haar_sample(m, rng=None):
    """Random setting whose composed unitary (with output phases) is Haar distributed.

    Reflectivities follow stick-breaking on the simplex: within sub-unitary
    D_i on n modes the k-th MZI (k = 0..n-2) has sin^2(alpha/2) drawn from
    Beta(1, n-1-k). All external and output phases are uniform.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    rng = check_random_state(rng)
    by_pos = {}
    for i in range(1, m):
        n = m - i + 1
        for k in range(n - 1):
            x = rng.beta(1.0, n - 1 - k)
            by_pos[(i, i + k)] = 2.0 * np.arcsin(np.sqrt(x))
    phis = rng.uniform(0.0, TWO_PI, size=m * (m - 1) // 2)
    out = rng.uniform(0.0, TWO_PI, size=m)
    alphas = [by_pos[pos] for pos in mesh_positions(m)]
    return MeshConfig.from_arrays(m, alphas, phis, out)


def unitary_fidelity(U, V):
    """|Tr(U^dag V) / m|^2."""
    U = check_square(np.asarray(U, dtype=complex), "U")
    V = check_square(np.asarray(V, dtype=complex), "V")
    if U.shape != V.shape:
        raise ValueError(f"dimension mismatch: {U.shape} vs {V.shape}")
    return float(np.abs(np.trace(U.conj().T @ V) / U.shape[0]) ** 2)


def _gauge_objective(U, ref, a, b):
    return float(np.real(np.sum(np.conj(ref) * (a[:, None] * U * b[None, :]))))


def _unit(z):
    mag = np.abs(z)
    return np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 1.0)


def gauge_fix(U, ref, n_starts=8, max_iter=500, tol=1e-15):
    """Align ``U`` to ``ref`` with diagonal phases on both sides.

    Maximizes Re Tr(ref^dag D_L U D_R) by alternating exact updates from
    several deterministic starts. Returns ``(D_L U D_R, left, right)`` where
    ``left``/``right`` are the phase angles of the diagonals
    (``D = diag(exp(1j * angles))``), normalized so ``right[0] = 0``.
    """
    U = check_square(np.asarray(U, dtype=complex), "U")
    ref = check_square(np.asarray(ref, dtype=complex), "ref")
    if U.shape != ref.shape:
        raise ValueError(f"dimension mismatch: {U.shape} vs {ref.shape}")
    m = U.shape[0]
    M = np.conj(ref) * U

    starts = [np.ones(m, dtype=complex)]
    # column phases read off the strongest overlap in each column
    rows = np.argmax(np.abs(M), axis=0)
    starts.append(_unit(np.conj(M[rows, np.arange(m)])))
    rng = np.random.default_rng(0)
    starts += [np.exp(1j * rng.uniform(0, TWO_PI, m)) for _ in range(max(0, n_starts - 2))]

    best = None
    for b in starts:
        a = _unit(np.conj(M @ b))
        value = _gauge_objective(U, ref, a, b)
        for _ in range(max_iter):
            b = _unit(np.conj(a @ M))
            a = _unit(np.conj(M @ b))
            new = _gauge_objective(U, ref, a, b)
            done = new - value <= tol * max(1.0, abs(new))
            value = new
            if done:
                break
        if best is None or value > best[0] + 1e-12:
            best = (value, a, b)
    _, a, b = best
    # move the common phase into the left diagonal
    g = b[0]
    a, b = a * g, b / g
    W = a[:, None] * U * b[None, :]
    return W, np.angle(a), np.angle(b)


__all__ = [
    "MZIParams",
    "MeshConfig",
    "NonUnitaryError",
    "compose",
    "coupler",
    "decompose",
    "gauge_fix",
    "haar_sample",
    "mesh_positions",
    "mzi_transfer",
    "unitarity_distance",
    "unitary_fidelity",
    "wrap_phase",
]
