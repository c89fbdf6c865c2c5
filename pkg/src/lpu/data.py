"""Published circuit settings and matrices used as golden references.

Phase tables are triangular lists of ``(phi, alpha)`` pairs:
``table[i-1][j-i]`` is the pair for MZI (i, j), see ``MeshConfig.from_table``.
Printed values carry three decimals; the ``exact_*`` helpers replace them by
the closed-form angles they round (pi/2, pi, 3 pi/2, arccos(1/3), ...).
"""

import numpy as np

from .mesh import MeshConfig

W3 = np.exp(2j * np.pi / 3)

BSG_PHASES = (
    ((0.000, 1.571), (0.000, 1.231), (0.000, 1.571), (0.000, 3.141), (0.000, 3.142)),
    ((0.000, 3.142), (0.000, 1.571), (1.571, 1.231), (0.000, 3.142)),
    ((0.000, 3.142), (0.000, 3.142), (0.000, 1.571)),
    ((0.000, 3.142), (0.000, 3.142)),
    ((0.000, 3.142),),
)

# as printed; the last entry carries a sign misprint (see BSG_MATRIX)
BSG_MATRIX_PRINTED = np.array([
    [0.707, 0.707, 0, 0, 0, 0],
    [0.408, -0.408, -0.577, 0.577, 0, 0],
    [0.408, -0.408, 0.289 + 0.289j, -0.289 + 0.289j, -0.408j, -0.408j],
    [0.408, -0.408, 0.289 - 0.289j, -0.289 - 0.289j, 0.408j, 0.408j],
    [0, 0, 0.333 - 0.471j, 0.333 - 0.471j, 0.236 - 0.333j, 0.236 - 0.333j],
    [0, 0, 0, 0, 0.707, 0.707],
])

# with U[6,6] = -0.707 the rows are orthonormal to printed precision
BSG_MATRIX = BSG_MATRIX_PRINTED.copy()
BSG_MATRIX[5, 5] = -0.707

HERALDED_CNOT_PHASES = (
    ((0.000, 0.992), (4.712, 1.571), (4.544, 4.957), (5.375, 1.792), (3.816, 0.000)),
    ((0.000, 1.571), (1.571, 0.992), (2.188, 0.000), (4.712, 0.000)),
    ((0.000, 1.571), (5.498, 0.000), (1.571, 2.226)),
    ((0.000, 3.142), (3.142, 0.000)),
    ((0.000, 0.000),),
)

HERALDED_CNOT_MATRIX = np.array([
    [0.476, -0.622, -0.440, 0.440, 0, 0],
    [-0.622, -0.476, 0, 0, 0.622, 0],
    [-0.383, 0, 0.293, 0.707, -0.383, -0.348],
    [0.383, 0, 0.707, 0.293, 0.383, 0.348],
    [0, 0.622, -0.440, 0.440, 0.476, 0],
    [0.306, 0, 0.166, -0.166, 0.306, -0.870],
])

# None marks the free preparation (alpha_22, phi_23, alpha_44, phi_45) and
# measurement (phi_12, alpha_12, phi_14, alpha_14) settings
POSTSELECTED_CNOT_PHASES = (
    ((0.000, 1.231), (None, None), (0.000, 3.142), (None, None), (0.000, 3.142)),
    ((0.000, None), (None, 1.231), (0.000, 1.571), (3.142, 3.142)),
    ((0.000, 3.142), (3.142, 1.571), (0.000, 1.231)),
    ((0.000, None), (None, 3.142)),
    ((0.000, 3.142),),
)

# state label -> (alpha, phi) on the preparation MZI and the phase after it
PREPARATION_PHASES = {
    "0": (np.pi, 0.0),
    "1": (0.0, 0.0),
    "+": (np.pi / 2, 0.0),
    "-": (np.pi / 2, np.pi),
    "+i": (np.pi / 2, np.pi / 2),
    "-i": (np.pi / 2, 3 * np.pi / 2),
}

# Pauli basis -> (phi, alpha) on the measurement MZI
MEASUREMENT_PHASES = {
    "z": (0.0, np.pi),
    "x": (0.0, np.pi / 2),
    "y": (np.pi / 2, np.pi / 2),
}

S6 = np.array([
    [1, 1, 1, 1, 1, 1],
    [1, 1, W3, W3, W3 ** 2, W3 ** 2],
    [1, W3, 1, W3 ** 2, W3 ** 2, W3],
    [1, W3, W3 ** 2, 1, W3, W3 ** 2],
    [1, W3 ** 2, W3 ** 2, W3, 1, W3],
    [1, W3 ** 2, W3, W3 ** 2, W3, 1],
]) / np.sqrt(6)

G6 = np.array([
    [0.408, 0.408, 0.408, 0.408, 0.408, 0.408],
    [0.408, -0.085 + 0.399j, -0.373 - 0.165j, -0.389 - 0.124j, 0.137 - 0.385j, 0.303 + 0.274j],
    [0.408, -0.121 - 0.39j, 0.407 + 0.028j, -0.196 + 0.358j, -0.252 - 0.321j, -0.247 + 0.325j],
    [0.408, -0.333 - 0.236j, -0.408 + 0.021j, 0.076 + 0.401j, 0.349 + 0.212j, -0.093 - 0.398j],
    [0.408, -0.269 + 0.308j, 0.37 + 0.173j, -0.198 - 0.357j, -0.293 + 0.285j, -0.019 - 0.408j],
    [0.408, 0.4 - 0.081j, -0.404 - 0.057j, 0.298 - 0.279j, -0.35 + 0.21j, -0.352 + 0.206j],
])

_SNAP = {
    1.571: np.pi / 2,
    3.141: np.pi,
    3.142: np.pi,
    4.712: 3 * np.pi / 2,
    1.231: float(np.arccos(1.0 / 3.0)),
}


def snap(value):
    """Closed-form angle behind a printed three-decimal value (unchanged if unknown)."""
    if value is None:
        return None
    return _SNAP.get(round(float(value), 3), float(value))


def exact_table(table):
    return tuple(tuple((snap(phi), snap(alpha)) for phi, alpha in row) for row in table)


def bsg_config(exact=False):
    return MeshConfig.from_table(exact_table(BSG_PHASES) if exact else BSG_PHASES)


def heralded_cnot_config():
    return MeshConfig.from_table(HERALDED_CNOT_PHASES)


__all__ = [
    "BSG_MATRIX",
    "BSG_MATRIX_PRINTED",
    "BSG_PHASES",
    "G6",
    "HERALDED_CNOT_MATRIX",
    "HERALDED_CNOT_PHASES",
    "MEASUREMENT_PHASES",
    "POSTSELECTED_CNOT_PHASES",
    "PREPARATION_PHASES",
    "S6",
    "bsg_config",
    "exact_table",
    "heralded_cnot_config",
    "snap",
]
