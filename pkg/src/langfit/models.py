"""Polynomial drift models, their potentials, and fixed-point analysis.

The price dynamics are written as

    dP/dt = drift(P) + sigma * P * noise,   drift(P) = sum_i alpha_i P^i

so the drift is minus the gradient of the potential

    V(P) = - sum_i alpha_i / (i + 1) * P^(i+1)

with the integration constant fixed to V(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OrderOutOfRange

MAX_ORDER = 4

STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"

# |drift'(P0)| below this counts as a marginal fixed point
_MARGINAL_TOL = 1e-10
_ROOT_TOL = 1e-10
_SCAN_POINTS = 2048


@dataclass(frozen=True)
class DriftModel:
    """Polynomial drift coefficients alpha_1..alpha_q plus diffusion scale sigma.

    The canonical parameter vector is phi = (sigma^2, alpha_1, ..., alpha_q).
    sigma = 0 is allowed for noise-free simulation; likelihood evaluation
    rejects it (the one-step propagator variance vanishes).
    """

    alphas: tuple[float, ...]
    sigma: float

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "sigma", float(self.sigma))
        if not 1 <= len(alphas) <= MAX_ORDER:
            raise OrderOutOfRange(f"drift order must be in 1..{MAX_ORDER}, got {len(alphas)}")
        if not all(np.isfinite(alphas)):
            raise ValueError("drift coefficients must be finite")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")

    @property
    def q(self) -> int:
        return len(self.alphas)

    @property
    def sigma2(self) -> float:
        return self.sigma * self.sigma

    def phi(self) -> np.ndarray:
        """Parameter vector (sigma^2, alpha_1, ..., alpha_q)."""
        return np.concatenate(([self.sigma2], self.alphas))

    @classmethod
    def from_phi(cls, phi) -> "DriftModel":
        phi = np.asarray(phi, dtype=float)
        if phi.ndim != 1 or len(phi) < 2:
            raise ValueError("phi must be (sigma^2, alpha_1, ..., alpha_q)")
        sigma2 = float(phi[0])
        if sigma2 < 0:
            raise ValueError(f"sigma^2 must be >= 0, got {sigma2}")
        return cls(alphas=tuple(phi[1:]), sigma=float(np.sqrt(sigma2)))


@dataclass(frozen=True)
class FixedPoint:
    """Root of the drift with its linear stability."""

    location: float
    stability: str  # one of STABLE / UNSTABLE / MARGINAL


def drift_eval(model: DriftModel, P):
    """Evaluate the drift polynomial sum_i alpha_i P^i; vectorized in P."""
    coeffs = np.concatenate(([0.0], model.alphas))
    return np.polynomial.polynomial.polyval(P, coeffs)


def drift_derivative(model: DriftModel, P):
    """d(drift)/dP = sum_i i * alpha_i P^(i-1); vectorized in P."""
    coeffs = np.array([i * a for i, a in enumerate(model.alphas, start=1)])
    return np.polynomial.polynomial.polyval(P, coeffs)


def potential_eval(model: DriftModel, P):
    """Evaluate V(P) = -sum_i alpha_i/(i+1) P^(i+1), with V(0) = 0."""
    coeffs = np.concatenate(([0.0, 0.0], [-a / (i + 1) for i, a in enumerate(model.alphas, start=1)]))
    return np.polynomial.polynomial.polyval(P, coeffs)


def _bisect(f, lo: float, hi: float, tol: float = _ROOT_TOL) -> float:
    flo = f(lo)
    if flo == 0.0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (flo < 0) != (fmid < 0):
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def _stability(model: DriftModel, root: float) -> str:
    slope = float(drift_derivative(model, root))
    if abs(slope) < _MARGINAL_TOL:
        return MARGINAL
    return STABLE if slope < 0 else UNSTABLE


def fixed_points(model: DriftModel, search_range: tuple[float, float]) -> list[FixedPoint]:
    """All real drift roots inside ``search_range``, annotated with stability.

    Dense sign-change scan over a fixed grid followed by bisection; P = 0 is
    always reported (every drift polynomial vanishes there) even when it lies
    outside the range. Roots of even multiplicity that produce no sign change
    are not detected.
    """
    lo, hi = float(search_range[0]), float(search_range[1])
    if not hi > lo:
        raise ValueError(f"search_range must have positive width, got ({lo}, {hi})")

    grid = np.linspace(lo, hi, _SCAN_POINTS)
    vals = drift_eval(model, grid)

    roots = [0.0]
    for k in range(len(grid) - 1):
        a, b = vals[k], vals[k + 1]
        if a == 0.0:
            roots.append(float(grid[k]))
        elif (a < 0) != (b < 0):
            roots.append(_bisect(lambda p: float(drift_eval(model, p)), float(grid[k]), float(grid[k + 1])))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))

    dedup_tol = 1e-8 * max(1.0, hi - lo)
    kept: list[float] = []
    for r in sorted(roots):
        if not kept or r - kept[-1] > dedup_tol:
            kept.append(r)

    return [FixedPoint(location=r, stability=_stability(model, r)) for r in kept]


def default_search_range(values) -> tuple[float, float]:
    """Default root-search interval: [0, 2 * max observed price]."""
    top = float(np.max(values))
    return (0.0, 2.0 * top if top > 0 else 1.0)
