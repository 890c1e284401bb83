"""Euler-Maruyama simulation of the polynomial-drift SDE.

One step advances the price as

    s_{n+1} = s_n + drift(s_n) * dt + sigma * s_n * sqrt(dt) * eps_n

with iid standard-normal eps_n. Trajectories that blow up are returned as
``Diverged`` results; ensemble generation discards and redraws them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TooManyRejections
from .models import DriftModel
from .timeseries import Series

DEFAULT_DIVERGENCE_BOUND = 1e9

# below this magnitude the propagator variance (sigma*s)^2*dt underflows and
# the path cannot be scored; treated as a numerical error like divergence
DEGENERATE_FLOOR = 1e-100


@dataclass(frozen=True)
class SimConfig:
    """One trajectory's worth of simulation inputs."""

    model: DriftModel
    s0: float
    grid: np.ndarray  # strictly increasing observation times, possibly non-equidistant
    seed: int
    bound: float = DEFAULT_DIVERGENCE_BOUND

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        object.__setattr__(self, "grid", grid)
        if grid.ndim != 1 or len(grid) < 2:
            raise ValueError("grid must hold at least 2 time points")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not self.s0 > 0:
            raise ValueError(f"s0 must be positive, got {self.s0}")
        if not self.bound > self.s0:
            raise ValueError("divergence bound must exceed s0")


@dataclass(frozen=True)
class Diverged:
    """Marker result: the path left the admissible region at ``step``."""

    step: int
    value: float


def simulate_path(config: SimConfig) -> Series | Diverged:
    """Simulate one trajectory on the configured time grid.

    Returns ``Diverged`` as soon as a state is non-finite or exceeds the
    divergence bound in magnitude; callers decide whether to redraw.
    Bit-identical output for identical configs.
    """
    grid = config.grid
    n = len(grid)
    dt = np.diff(grid)
    eps = np.random.default_rng(config.seed).standard_normal(n - 1)

    # plain-float loop with a Horner drift; dominates ensemble runtimes
    rev_alphas = tuple(reversed(config.model.alphas))
    sigma = config.model.sigma
    steps = list(zip(dt.tolist(), np.sqrt(dt).tolist(), eps.tolist()))

    values = np.empty(n)
    values[0] = config.s0
    s = config.s0
    bound = config.bound
    for k, (h, sqrt_h, e) in enumerate(steps):
        acc = 0.0
        for a in rev_alphas:
            acc = (acc + a) * s
        s = s + acc * h + sigma * s * sqrt_h * e
        if not math.isfinite(s) or abs(s) > bound:
            return Diverged(step=k + 1, value=float(s))
        values[k + 1] = s

    return Series(times=grid.copy(), values=values, label="sim", time_unit="model-time")


def _subseed(seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible stream for ensemble member ``index``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=[seed, index]))


def make_grid(length: int, grid_style: str, rng: np.random.Generator,
              dt_scale: float = 1.0) -> np.ndarray:
    """Observation times starting at 0: equidistant steps of ``dt_scale``, or
    steps jittered uniformly in [0.5, 1.5] * ``dt_scale``."""
    if dt_scale <= 0:
        raise ValueError("dt_scale must be positive")
    if grid_style == "equidistant":
        return np.arange(length, dtype=float) * dt_scale
    if grid_style == "jittered":
        dt = rng.uniform(0.5, 1.5, size=length - 1) * dt_scale
        return np.concatenate(([0.0], np.cumsum(dt)))
    raise ValueError(f"unknown grid_style {grid_style!r}")


def path_is_degenerate(series: Series) -> bool:
    """True if any state is too close to zero for the likelihood to exist."""
    return bool(np.any(np.abs(series.values) < DEGENERATE_FLOOR))


def simulate_ensemble_with_stats(model: DriftModel, count: int, length: int,
                                 grid_style: str = "equidistant", seed: int = 0, *,
                                 s0: float = 1.0,
                                 dt_scale: float = 1.0,
                                 bound: float = DEFAULT_DIVERGENCE_BOUND
                                 ) -> tuple[list[Series], int]:
    """Like :func:`simulate_ensemble` but also returns the attempt count."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if length < 2:
        raise ValueError("length must be >= 2")

    paths: list[Series] = []
    attempts = 0
    max_attempts = 100 * count
    while len(paths) < count:
        if attempts >= max_attempts:
            raise TooManyRejections(
                f"{attempts - len(paths)} of {attempts} draws rejected; model looks explosive"
            )
        rng = _subseed(seed, attempts)
        grid = make_grid(length, grid_style, rng, dt_scale)
        config = SimConfig(model=model, s0=s0, grid=grid,
                           seed=int(rng.integers(2**63)), bound=bound)
        attempts += 1
        result = simulate_path(config)
        if isinstance(result, Series) and not path_is_degenerate(result):
            paths.append(result)
    return paths, attempts


def simulate_ensemble(model: DriftModel, count: int, length: int,
                      grid_style: str = "equidistant", seed: int = 0, *,
                      s0: float = 1.0,
                      dt_scale: float = 1.0,
                      bound: float = DEFAULT_DIVERGENCE_BOUND) -> list[Series]:
    """Exactly ``count`` non-diverged trajectories of ``length`` points.

    Diverged draws (and draws that collapse onto zero, which the transition
    likelihood cannot score) are discarded and redrawn with fresh sub-seeds.
    Raises ``TooManyRejections`` once the rejection rate exceeds 99% over
    100 * count attempts.
    """
    paths, _ = simulate_ensemble_with_stats(model, count, length, grid_style, seed,
                                            s0=s0, dt_scale=dt_scale, bound=bound)
    return paths


def random_model(q: int, seed: int = 0) -> DriftModel:
    """Random drift model of order ``q``.

    alpha_i ~ Normal(0, 1) independently and sigma ~ Uniform(0.01, 0.3);
    unstable combinations are meant to be filtered by the ensemble
    rejection protocol. Deterministic under a fixed seed.
    """
    if not 1 <= q <= 4:
        raise ValueError(f"q must be in 1..4, got {q}")
    rng = np.random.default_rng(seed)
    alphas = tuple(rng.standard_normal() for _ in range(q))
    sigma = rng.uniform(0.01, 0.3)
    return DriftModel(alphas=alphas, sigma=sigma)
