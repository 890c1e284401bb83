"""Transition likelihood, maximum-likelihood fitting, and AIC order selection.

The one-step propagator of the Euler-discretized SDE is Gaussian:

    s_{n+1} | s_n ~ Normal(m, v),  m = s_n + drift(s_n) * dt,
                                   v = (sigma * s_n)^2 * dt

so the series log-likelihood is the Markov sum of step log-densities.
Orders q = 1..4 compete via AIC = -2 L_max + 2 (q + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateState, OptimizerFailure, OrderOutOfRange, SelectionFailure
from .models import MAX_ORDER, DriftModel, drift_eval
from .timeseries import Series

LOG_2PI = math.log(2.0 * math.pi)

NM_XATOL = 1e-10
NM_FATOL = 1e-10
N_RESTARTS = 5
RESTART_SCALE = 0.5
POLISH_TOL = 1e-9
MAX_POLISH = 8


def step_loglik(model: DriftModel, s_n: float, t_n: float, s_next: float, t_next: float) -> float:
    """Log-density of one observed transition under the Gaussian propagator."""
    dt = t_next - t_n
    if not dt > 0:
        raise ValueError(f"t_next must exceed t_n, got dt={dt}")
    v = (model.sigma * s_n) ** 2 * dt
    if v == 0.0:
        raise DegenerateState(f"propagator variance vanishes at s_n={s_n}, sigma={model.sigma}")
    m = s_n + float(drift_eval(model, s_n)) * dt
    return -0.5 * math.log(2.0 * math.pi * v) - (s_next - m) ** 2 / (2.0 * v)


def total_loglik(model: DriftModel, series: Series) -> float:
    """Sum of step log-likelihoods over all consecutive pairs."""
    s = series.values
    s0, s1 = s[:-1], s[1:]
    dt = np.diff(series.times)

    zeros = np.flatnonzero(s0 == 0.0)
    if len(zeros):
        raise DegenerateState("zero price in series", index=int(zeros[0]))
    v = (model.sigma * s0) ** 2 * dt
    dead = np.flatnonzero(v == 0.0)
    if len(dead):
        raise DegenerateState("propagator variance underflows", index=int(dead[0]))

    m = s0 + drift_eval(model, s0) * dt
    return float(-0.5 * np.sum(np.log(2.0 * np.pi * v) + (s1 - m) ** 2 / v))


@dataclass(frozen=True)
class TransitionData:
    """Per-series arrays shared by every likelihood evaluation of one fit."""

    s0: np.ndarray
    s1: np.ndarray
    dt: np.ndarray
    design: np.ndarray      # columns s0^1 .. s0^q
    weight: np.ndarray      # s0^2 * dt, the variance up to the sigma^2 factor
    sum_log_weight: float
    n: int


def transition_data(series: Series, q: int) -> TransitionData:
    values = series.values
    zeros = np.flatnonzero(values == 0.0)
    if len(zeros):
        raise DegenerateState("zero price in series", index=int(zeros[0]))
    s0, s1 = values[:-1], values[1:]
    dt = np.diff(series.times)
    design = s0[:, None] ** np.arange(1, q + 1)
    weight = s0 * s0 * dt
    if np.any(weight == 0.0):
        raise DegenerateState("propagator variance underflows",
                              index=int(np.flatnonzero(weight == 0.0)[0]))
    return TransitionData(s0=s0, s1=s1, dt=dt, design=design, weight=weight,
                          sum_log_weight=float(np.sum(np.log(weight))), n=len(s0))


def loglik_phi(data: TransitionData, phi: np.ndarray) -> float:
    """Log-likelihood at phi = (sigma^2, alphas); -inf outside sigma^2 > 0."""
    sigma2 = phi[0]
    if not sigma2 > 0 or not np.isfinite(sigma2):
        return -np.inf
    drift = data.design @ phi[1:]
    resid = data.s1 - data.s0 - drift * data.dt
    quad = float(np.sum(resid * resid / data.weight))
    ll = -0.5 * (data.n * (LOG_2PI + math.log(sigma2)) + data.sum_log_weight + quad / sigma2)
    return ll if math.isfinite(ll) else -np.inf


def loglik_phi_batch(data: TransitionData, phis: np.ndarray) -> np.ndarray:
    """Vectorized ``loglik_phi`` over rows of ``phis``; used by the MCMC walkers."""
    phis = np.atleast_2d(phis)
    sigma2 = phis[:, 0]
    drift = phis[:, 1:] @ data.design.T            # (k, n)
    resid = data.s1 - (data.s0 + drift * data.dt)
    quad = np.einsum("kn,kn->k", resid, resid / data.weight)
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = -0.5 * (data.n * (LOG_2PI + np.log(sigma2)) + data.sum_log_weight + quad / sigma2)
    ll = np.where((sigma2 > 0) & np.isfinite(ll), ll, -np.inf)
    return ll


@dataclass(frozen=True)
class FitResult:
    """Maximum-likelihood estimate at a fixed drift order.

    ``phi`` is (sigma^2, alpha_1, ..., alpha_q); ``aic`` always equals
    -2 * log_lik + 2 * (q + 1) bit for bit.
    """

    q: int
    phi: np.ndarray
    log_lik: float
    aic: float
    iterations: int
    converged: bool

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))
        if len(self.phi) != self.q + 1:
            raise ValueError("phi must hold sigma^2 plus q drift coefficients")
        if not self.phi[0] > 0:
            raise ValueError(f"fitted sigma^2 must be positive, got {self.phi[0]}")
        if self.aic != -2.0 * self.log_lik + 2.0 * (self.q + 1):
            raise ValueError("AIC does not match -2*log_lik + 2*(q+1)")

    @property
    def sigma2(self) -> float:
        return float(self.phi[0])

    @property
    def alphas(self) -> np.ndarray:
        return self.phi[1:]

    @property
    def model(self) -> DriftModel:
        return DriftModel.from_phi(self.phi)


@dataclass(frozen=True)
class ModelSelection:
    """Per-order fits plus the AIC winner (ties break to the smaller q)."""

    fits: dict[int, FitResult]
    errors: dict[int, str]
    chosen_q: int

    def __post_init__(self):
        if self.chosen_q not in self.fits:
            raise ValueError(f"chosen order {self.chosen_q} has no fit")
        best = self.fits[self.chosen_q].aic
        for q, fit in self.fits.items():
            if fit.aic < best or (fit.aic == best and q < self.chosen_q):
                raise ValueError("chosen order does not minimize AIC")

    @property
    def chosen(self) -> FitResult:
        return self.fits[self.chosen_q]


def _initial_point(data: TransitionData) -> np.ndarray:
    """Moment-matched start: log of the normalized-increment variance and an
    OLS drift fit of ds/dt on the monomial design."""
    increments = (data.s1 - data.s0) / (data.s0 * np.sqrt(data.dt))
    sigma2_0 = float(np.var(increments))
    if sigma2_0 == 0.0:
        raise DegenerateState("increments have zero variance; sigma is not identifiable")
    y = (data.s1 - data.s0) / data.dt
    alpha_0, *_ = np.linalg.lstsq(data.design, y, rcond=None)
    resid = data.s1 - data.s0 - (data.design @ alpha_0) * data.dt
    if not np.any(resid):
        raise DegenerateState("drift fits the data exactly; sigma is not identifiable")
    return np.concatenate(([math.log(sigma2_0)], alpha_0))


def fit_mle(series: Series, q: int, seed: int = 0) -> FitResult:
    """Maximize the series log-likelihood over phi at drift order ``q``.

    Nelder-Mead on (log sigma^2, alpha_1..alpha_q) from a moment-matched
    start plus random restarts, then re-polished from the winner until the
    improvement drops below tolerance.
    """
    if not 1 <= q <= MAX_ORDER:
        raise OrderOutOfRange(f"q must be in 1..{MAX_ORDER}, got {q}")
    if len(series) < q + 2:
        raise ValueError(f"series of length {len(series)} too short to fit q={q}")

    data = transition_data(series, q)
    d = q + 1

    def neg_loglik(theta: np.ndarray) -> float:
        sigma2 = math.exp(theta[0]) if theta[0] < 700.0 else math.inf
        if not 0.0 < sigma2 < math.inf:  # exp under/overflow
            return math.inf
        drift = data.design @ theta[1:]
        resid = data.s1 - data.s0 - drift * data.dt
        quad = float(np.sum(resid * resid / data.weight))
        ll = -0.5 * (data.n * (LOG_2PI + theta[0]) + data.sum_log_weight + quad / sigma2)
        return -ll if math.isfinite(ll) else math.inf

    options = {"xatol": NM_XATOL, "fatol": NM_FATOL,
               "maxiter": 50 * d * d, "maxfev": 200 * d * d}
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, q]))
    theta_0 = _initial_point(data)

    starts = [theta_0] + [theta_0 + rng.normal(0.0, RESTART_SCALE, size=d) for _ in range(N_RESTARTS)]
    best = None
    iterations = 0
    for start in starts:
        res = minimize(neg_loglik, start, method="Nelder-Mead", options=options)
        iterations += res.nit
        if math.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise OptimizerFailure(f"no finite-likelihood point found for q={q}")

    converged = bool(best.success)
    for _ in range(MAX_POLISH):
        res = minimize(neg_loglik, best.x, method="Nelder-Mead", options=options)
        iterations += res.nit
        improved = best.fun - res.fun
        if res.fun < best.fun:
            best = res
        converged = bool(res.success)
        if improved < POLISH_TOL:
            break

    theta = best.x
    phi = np.concatenate(([math.exp(theta[0])], theta[1:]))
    log_lik = -float(best.fun)
    return FitResult(q=q, phi=phi, log_lik=log_lik,
                     aic=-2.0 * log_lik + 2.0 * (q + 1),
                     iterations=iterations, converged=converged)


def select_order(series: Series, q_max: int = MAX_ORDER, seed: int = 0) -> ModelSelection:
    """Fit every order 1..q_max and keep the AIC minimizer."""
    if not 1 <= q_max <= MAX_ORDER:
        raise OrderOutOfRange(f"q_max must be in 1..{MAX_ORDER}, got {q_max}")

    fits: dict[int, FitResult] = {}
    errors: dict[int, str] = {}
    for q in range(1, q_max + 1):
        try:
            fits[q] = fit_mle(series, q, seed=seed)
        except (DegenerateState, OptimizerFailure, ValueError) as exc:
            errors[q] = f"{type(exc).__name__}: {exc}"

    if not fits:
        raise SelectionFailure(f"every order failed: {errors}")

    chosen_q = min(fits, key=lambda q: (fits[q].aic, q))
    return ModelSelection(fits=fits, errors=errors, chosen_q=chosen_q)


def fit_to_dict(fit: FitResult) -> dict:
    return {"q": fit.q, "phi": [float(x) for x in fit.phi],
            "log_lik": fit.log_lik, "aic": fit.aic,
            "iterations": fit.iterations, "converged": fit.converged}


def fit_from_dict(doc: dict) -> FitResult:
    return FitResult(q=doc["q"], phi=np.array(doc["phi"], dtype=float),
                     log_lik=doc["log_lik"], aic=doc["aic"],
                     iterations=doc["iterations"], converged=doc["converged"])


def selection_to_dict(selection: ModelSelection) -> dict:
    return {"chosen_q": selection.chosen_q,
            "fits": {str(q): fit_to_dict(fit) for q, fit in selection.fits.items()},
            "errors": {str(q): msg for q, msg in selection.errors.items()}}


def selection_from_dict(doc: dict) -> ModelSelection:
    return ModelSelection(
        fits={int(q): fit_from_dict(f) for q, f in doc["fits"].items()},
        errors={int(q): msg for q, msg in doc.get("errors", {}).items()},
        chosen_q=doc["chosen_q"],
    )
