"""Single-heater interference fringes and their least-squares fit."""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_random_state
from ..mesh import TWO_PI, compose, wrap_phase
from .hardware import (
    SWEEP,
    HeaterModel,
    config_phases,
    desired_voltages,
    drive,
    incoherent_transfer,
    realized_phases,
    physical_unitary,
)

DEFAULT_POINTS = 41


class FringeFitError(RuntimeError):
    """Raised when a fringe cannot be fitted."""


class IsolationError(ValueError):
    """Raised when a routing leaves the probed heater without visible effect."""


@dataclass(frozen=True)
class FringeData:
    """Counts recorded while sweeping one heater.

    ``offset`` is the fringe phase offset predicted by the ideal mesh for
    this routing: counts follow A - B cos(Phi(V) + offset).
    """

    voltages: np.ndarray
    counts: np.ndarray
    target: tuple = None
    input_mode: int = None
    output_mode: int = None
    shots_per_point: int = None
    offset: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.voltages, dtype=float)
        c = np.asarray(self.counts, dtype=float)
        if v.shape != c.shape or v.ndim != 1:
            raise ValueError("voltages and counts must be matching 1-d arrays")
        if np.any(np.diff(v) <= 0):
            raise ValueError("sweep voltages must be strictly increasing")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "voltages", v)
        object.__setattr__(self, "counts", c)


def sweep_grid(points=DEFAULT_POINTS, lo=SWEEP[0], hi=SWEEP[1]):
    return np.linspace(lo, hi, points)


def predicted_fringe(routing, target, input_mode, output_mode=None, samples=8):
    """Ideal-mesh fringe for ``target`` under ``routing``.

    Returns (output_mode, mean, amplitude, offset) with the detection
    probability mean - amplitude * cos(Phi + offset). When ``output_mode``
    is None the lowest-numbered mode with the strongest modulation is chosen.
    """
    kind, i, j = target
    grid = np.arange(samples) * TWO_PI / samples
    probs = []
    for phi in grid:
        update = {(i, j): (phi, None) if kind == "alpha" else (None, phi)}
        U = compose(routing.with_phases(update).without_output_phases())
        probs.append(np.abs(U[:, input_mode - 1]) ** 2)
    probs = np.array(probs)
    # Fourier components of each output's probability over the phase grid
    a = probs.mean(axis=0)
    c = 2 * (np.cos(grid) @ probs) / samples
    s = 2 * (np.sin(grid) @ probs) / samples
    amp = np.hypot(c, s)
    if output_mode is None:
        # ties go to the lower mode, which leaves the mesh through fewer heaters
        k = int(np.flatnonzero(amp >= amp.max() - 1e-9)[0])
    else:
        k = output_mode - 1
    return k + 1, float(a[k]), float(amp[k]), float(np.arctan2(s[k], -c[k]))


def simulate_fringe(chip, target, routing, sweep=None, shots_per_point=None, rng=None,
                    input_mode=1, output_mode=None, calibration=None,
                    precorrect_crosstalk=True, min_contrast=0.05):
    """Sweep the true voltage on heater ``target`` and record single-photon counts.

    ``shots_per_point`` photons are injected at each voltage; with None the
    expected (noise-free) counts per injected photon are returned. All other
    heaters are dialed to ``routing`` using ``calibration`` (truth if None).
    """
    target = tuple(target)
    sweep = sweep_grid() if sweep is None else np.asarray(sweep, dtype=float)
    out_mode, _, contrast, offset = predicted_fringe(routing, target, input_mode, output_mode)
    if contrast < min_contrast:
        raise IsolationError(
            f"routing does not isolate {target}: predicted fringe contrast {contrast:.3g}"
        )
    idx = chip.keys.index(target)
    # provisional laws may fall short of 2 pi; dial the nearest reachable phase
    desired = desired_voltages(chip, config_phases(routing), calibration, clamp=True)
    m = chip.mode_count
    vis = chip.interference_visibility
    Q = incoherent_transfer(m, chip.coupler_reflectivities)
    quiet = chip.replace(phase_noise=0.0)
    scale = (
        chip.input_transmission[input_mode - 1]
        * chip.output_transmission[out_mode - 1]
        * chip.mode_efficiency[out_mode - 1]
    )
    mean = np.empty(len(sweep))
    for n, v in enumerate(sweep):
        point = desired.copy()
        point[idx] = v
        phases = realized_phases(quiet, drive(chip, point, precorrect_crosstalk))
        U = physical_unitary(m, phases[0::2], phases[1::2], chip.coupler_reflectivities)
        p = vis * abs(U[out_mode - 1, input_mode - 1]) ** 2 + (1 - vis) * Q[out_mode - 1, input_mode - 1]
        mean[n] = scale * p
    if shots_per_point is None:
        counts = mean
    else:
        rng = check_random_state(rng)
        counts = rng.poisson(mean * shots_per_point).astype(float)
    return FringeData(
        sweep, counts, target, input_mode, out_mode, shots_per_point, offset,
        {"expected": mean, "contrast": contrast},
    )


def fringe_model(params, v):
    A, B, a0, b, g = params
    return A - B * np.cos(a0 + b * v ** 2 + g * v ** 3)


@dataclass(frozen=True)
class FringeFit:
    A: float
    B: float
    alpha0: float
    beta: float
    gamma: float
    cov: np.ndarray
    cost: float

    @property
    def stderr(self):
        err = np.sqrt(np.clip(np.diag(self.cov), 0, None))
        return dict(zip(("A", "B", "alpha0", "beta", "gamma"), err))

    def heater(self, offset=0.0, v_min=SWEEP[0], v_max=SWEEP[1]):
        """Heater law implied by the fit, removing the routing's fringe offset."""
        return HeaterModel(wrap_phase(self.alpha0 - offset), self.beta, self.gamma, v_min, v_max)


class FringeFitter(RegressorMixin, BaseEstimator):
    """Least-squares fit of C(V) = A - B cos(alpha0 + beta V^2 + gamma V^3).

    Starting values come from a scan over beta with gamma = 0, where the
    model is linear in (A, B cos alpha0, B sin alpha0); the best few scan
    points seed a bounded nonlinear refinement with Poisson weights.
    """

    def __init__(self, beta_range=(0.01, 0.4), n_beta=400, n_starts=4, min_snr=5.0):
        self.beta_range = beta_range
        self.n_beta = n_beta
        self.n_starts = n_starts
        self.min_snr = min_snr

    def fit(self, X, y):
        v = np.asarray(X, dtype=float).reshape(-1)
        c = np.asarray(y, dtype=float).reshape(-1)
        if v.size < 10:
            raise FringeFitError("need at least 10 sweep points")
        sigma = np.sqrt(np.maximum(c, 1.0))
        w = 1.0 / sigma

        betas = np.linspace(*self.beta_range, self.n_beta)
        scan = []
        for b in betas:
            x = b * v ** 2
            D = np.column_stack([np.ones_like(v), np.cos(x), np.sin(x)])
            coef, *_ = np.linalg.lstsq(D * w[:, None], c * w, rcond=None)
            rss = float(np.sum(((D @ coef - c) * w) ** 2))
            scan.append((rss, b, coef))
        scan.sort(key=lambda t: t[0])

        _, b0, coef = scan[0]
        amp = np.hypot(coef[1], coef[2])
        x = b0 * v ** 2
        fitted = coef[0] + coef[1] * np.cos(x) + coef[2] * np.sin(x)
        # standard error of the fitted amplitude from the scan residual
        noise = np.sqrt(np.sum((fitted - c) ** 2) / (v.size - 3) * 2.0 / v.size)
        if amp <= self.min_snr * noise or amp <= 1e-12 * max(abs(coef[0]), 1e-300):
            raise FringeFitError("unidentifiable phase parameters: fringe amplitude is zero")

        def residual(p):
            return (fringe_model(p, v) - c) * w

        best = None
        lower = [-np.inf, 0.0, -np.inf, 1e-6, -np.inf]
        for rss, b, (A, cc, ss) in scan[: self.n_starts]:
            # A - B cos(t + a0) = A - B cos a0 cos t + B sin a0 sin t
            B = np.hypot(cc, ss)
            a0 = np.arctan2(ss, -cc)
            x0 = [A, B, a0, b, 0.0]
            try:
                res = least_squares(residual, x0, bounds=(lower, np.inf), x_scale="jac",
                                    xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=5000)
            except ValueError:
                continue
            if res.success and (best is None or res.cost < best.cost):
                best = res
        if best is None:
            raise FringeFitError("fringe fit did not converge after bounded restarts")

        J = best.jac
        dof = max(v.size - 5, 1)
        scale = 2 * best.cost / dof
        try:
            cov = np.linalg.pinv(J.T @ J) * scale
        except np.linalg.LinAlgError:
            cov = np.full((5, 5), np.nan)
        A, B, a0, b, g = best.x
        self.A_, self.B_ = float(A), float(B)
        self.alpha0_, self.beta_, self.gamma_ = wrap_phase(a0), float(b), float(g)
        self.cov_ = cov
        self.cost_ = float(best.cost)
        return self

    def predict(self, X):
        check_is_fitted(self, "A_")
        v = np.asarray(X, dtype=float).reshape(-1)
        return fringe_model([self.A_, self.B_, self.alpha0_, self.beta_, self.gamma_], v)

    def phase(self, X):
        check_is_fitted(self, "A_")
        v = np.asarray(X, dtype=float).reshape(-1)
        return self.alpha0_ + self.beta_ * v ** 2 + self.gamma_ * v ** 3

    def to_result(self):
        check_is_fitted(self, "A_")
        return FringeFit(self.A_, self.B_, self.alpha0_, self.beta_, self.gamma_, self.cov_, self.cost_)


def fit_fringe(data, **params):
    """Fit a FringeData (or a ``(voltages, counts)`` pair) and return a FringeFit."""
    if isinstance(data, FringeData):
        v, c = data.voltages, data.counts
    else:
        v, c = data
    return FringeFitter(**params).fit(v, c).to_result()


__all__ = [
    "FringeData",
    "FringeFit",
    "FringeFitError",
    "FringeFitter",
    "IsolationError",
    "fit_fringe",
    "fringe_model",
    "predicted_fringe",
    "simulate_fringe",
    "sweep_grid",
]
