"""Posterior sampling over phi and credible bands for the potential.

With a flat prior restricted to sigma^2 > 0, the posterior density is just
the exponentiated series log-likelihood. The walker ensemble is seeded in a
tight ball around the MLE; kept draws feed pointwise percentile bands of the
potential curves on a price grid.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ChainStuck
from .inference import FitResult, fit_mle, loglik_phi_batch, transition_data
from .models import potential_eval
from .sampler import DEFAULT_STRETCH, integrated_autocorr_time, run_sampler
from .timeseries import Series

DEFAULT_STEPS = 5000
DEFAULT_BURN_IN = 1000
DEFAULT_THIN = 5
MIN_ACCEPTANCE = 0.02
INIT_BALL_SCALE = 1e-3
BAND_GRID_POINTS = 200
MULTIMODAL_EXIT_FRAC = 0.10


def default_walkers(q: int) -> int:
    return max(32, 4 * (q + 1))


@dataclass(frozen=True)
class McmcConfig:
    """Sampler settings; defaults follow the walker/chain-length decisions."""

    walkers: int | None = None  # None: max(32, 4*(q+1))
    steps: int = DEFAULT_STEPS
    burn_in: int = DEFAULT_BURN_IN
    thin: int = DEFAULT_THIN
    stretch: float = DEFAULT_STRETCH
    seed: int = 0


@dataclass(frozen=True)
class PosteriorEnsemble:
    """Kept posterior draws of phi = (sigma^2, alphas) with chain metadata.

    ``draws`` is (n_samples, q+1), step-major: row s * walkers + w holds
    walker w at kept step s.
    """

    q: int
    draws: np.ndarray
    walkers: int
    burn_in: int
    thin: int
    acceptance: float
    seed: int

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        object.__setattr__(self, "draws", draws)
        if draws.ndim != 2 or draws.shape[1] != self.q + 1:
            raise ValueError("draws must be (n_samples, q+1)")
        if len(draws) < 1:
            raise ValueError("at least one draw required")
        if np.any(draws[:, 0] <= 0):
            raise ValueError("every draw must have sigma^2 > 0")
        if not 0.0 < self.acceptance < 1.0:
            raise ValueError(f"acceptance fraction must lie in (0,1), got {self.acceptance}")

    @property
    def n_samples(self) -> int:
        return len(self.draws)

    def chain(self) -> np.ndarray:
        """Draws reshaped to (kept_steps, walkers, q+1)."""
        return self.draws.reshape(-1, self.walkers, self.q + 1)


@dataclass(frozen=True)
class PotentialBand:
    """Potential curves on a price grid: MLE plus pointwise 68%/95% bands.

    Every curve passes through V(0) = 0 by construction, so the zero
    horizontal is the reference level throughout.
    """

    grid: np.ndarray
    v_mle: np.ndarray
    lo68: np.ndarray
    hi68: np.ndarray
    lo95: np.ndarray
    hi95: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=float) for a in
                  (self.grid, self.v_mle, self.lo68, self.hi68, self.lo95, self.hi95)]
        for name, arr in zip(("grid", "v_mle", "lo68", "hi68", "lo95", "hi95"), arrays):
            object.__setattr__(self, name, arr)
        if any(len(a) != len(self.grid) for a in arrays[1:]):
            raise ValueError("all band columns must match the grid length")
        nested = (self.lo95 <= self.lo68) & (self.lo68 <= self.hi68) & (self.hi68 <= self.hi95)
        if not np.all(nested):
            raise ValueError("credible bands must be nested (95 outside 68)")


def _initial_walkers(mle_phi: np.ndarray, walkers: int, rng: np.random.Generator) -> np.ndarray:
    scale = INIT_BALL_SCALE * np.abs(mle_phi) + 1e-12
    ball = mle_phi + scale * rng.standard_normal((walkers, len(mle_phi)))
    ball[:, 0] = np.abs(ball[:, 0])  # keep sigma^2 on its support
    ball[ball[:, 0] == 0.0, 0] = mle_phi[0]
    return ball


def sample_posterior(series: Series, q: int, config: McmcConfig = McmcConfig(), *,
                     mle: FitResult | None = None) -> PosteriorEnsemble:
    """Draw from the flat-prior posterior of phi at drift order ``q``.

    Deterministic under a fixed config seed. Raises ``ChainStuck`` when the
    post-burn-in acceptance fraction falls below 2%.
    """
    if mle is None:
        mle = fit_mle(series, q, seed=config.seed)
    if mle.q != q:
        raise ValueError(f"MLE order {mle.q} does not match requested q={q}")
    walkers = config.walkers if config.walkers is not None else default_walkers(q)
    if walkers < 2 * (q + 1):
        raise ValueError(f"need at least {2 * (q + 1)} walkers for q={q}, got {walkers}")
    if not config.steps > config.burn_in:
        raise ValueError("steps must exceed burn_in")

    data = transition_data(series, q)

    def log_prob(phis: np.ndarray) -> np.ndarray:
        return loglik_phi_batch(data, phis)

    rng = np.random.default_rng(np.random.SeedSequence(entropy=[config.seed, q]))
    initial = _initial_walkers(mle.phi, walkers, rng)
    run = run_sampler(log_prob, initial, steps=config.steps, a=config.stretch,
                      seed=int(rng.integers(2**63)))

    kept = run.chain[config.burn_in::config.thin]
    post = run.accepted[config.burn_in:]
    acceptance = float(np.sum(post)) / (walkers * len(post))
    if acceptance < MIN_ACCEPTANCE:
        raise ChainStuck(f"acceptance fraction {acceptance:.4f} below {MIN_ACCEPTANCE}")

    draws = kept.reshape(-1, q + 1)
    return PosteriorEnsemble(q=q, draws=draws, walkers=walkers,
                             burn_in=config.burn_in, thin=config.thin,
                             acceptance=acceptance, seed=config.seed)


def default_band_grid(series: Series, points: int = BAND_GRID_POINTS) -> np.ndarray:
    """Equidistant price grid spanning [0.9 * min, 1.1 * max] of the data."""
    lo = 0.9 * float(np.min(series.values))
    hi = 1.1 * float(np.max(series.values))
    return np.linspace(lo, hi, points)


def potential_curves(draws: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Potential of every draw evaluated on the grid; (n_draws, len(grid))."""
    q = draws.shape[1] - 1
    powers = np.arange(1, q + 1)
    basis = grid[:, None] ** (powers + 1)            # (m, q): P^(i+1)
    coefs = draws[:, 1:] / (powers + 1)              # (n, q): alpha_i/(i+1)
    return -(coefs @ basis.T)


def potential_band(ensemble: PosteriorEnsemble, grid: np.ndarray, mle: FitResult) -> PotentialBand:
    """Pointwise [16, 84] and [2.5, 97.5] percentile bands of the potential
    ensemble on ``grid``, together with the MLE curve."""
    if mle.q != ensemble.q:
        raise ValueError(f"ensemble order {ensemble.q} does not match MLE order {mle.q}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a non-empty 1-d array")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted")

    curves = potential_curves(ensemble.draws, grid)
    lo95, lo68, hi68, hi95 = np.percentile(curves, [2.5, 16.0, 84.0, 97.5], axis=0)
    v_mle = np.asarray(potential_eval(mle.model, grid), dtype=float)
    return PotentialBand(grid=grid, v_mle=v_mle, lo68=lo68, hi68=hi68, lo95=lo95, hi95=hi95)


def band_exit_fraction(band: PotentialBand) -> float:
    """Fraction of grid points where the MLE curve leaves the 68% band."""
    outside = (band.v_mle < band.lo68) | (band.v_mle > band.hi68)
    return float(np.mean(outside))


@dataclass(frozen=True)
class McmcDiagnostics:
    """Per-coordinate summary of a posterior ensemble.

    ``autocorr_times`` entries are NaN when not estimable (zero variance);
    ``multimodal`` is None when no band was supplied for the MLE-exit check.
    """

    means: np.ndarray
    stds: np.ndarray
    autocorr_times: np.ndarray
    acceptance: float
    exit_fraction: float | None
    multimodal: bool | None


def diagnostics(ensemble: PosteriorEnsemble, band: PotentialBand | None = None) -> McmcDiagnostics:
    """Means, spreads, and autocorrelation times; flags a multimodal
    posterior when the MLE curve exits the 68% band too often."""
    draws = ensemble.draws
    chain = ensemble.chain()
    means = draws.mean(axis=0)
    stds = draws.std(axis=0)
    taus = np.array([integrated_autocorr_time(chain[:, :, k])
                     for k in range(draws.shape[1])])

    exit_fraction = None
    multimodal = None
    if band is not None:
        exit_fraction = band_exit_fraction(band)
        multimodal = exit_fraction > MULTIMODAL_EXIT_FRAC

    return McmcDiagnostics(means=means, stds=stds, autocorr_times=taus,
                           acceptance=ensemble.acceptance,
                           exit_fraction=exit_fraction, multimodal=multimodal)


def diagnostics_to_dict(diag: McmcDiagnostics) -> dict:
    return {
        "means": [float(x) for x in diag.means],
        "stds": [float(x) for x in diag.stds],
        "autocorr_times": [None if math.isnan(t) else float(t) for t in diag.autocorr_times],
        "acceptance": diag.acceptance,
        "exit_fraction": diag.exit_fraction,
        "multimodal": diag.multimodal,
    }


def write_ensemble_csv(ensemble: PosteriorEnsemble, path, sidecar_path=None) -> None:
    """Flat CSV ``walker,step,sigma2,alpha1..alphaq`` plus a JSON config sidecar."""
    header = ["walker", "step", "sigma2"] + [f"alpha{i}" for i in range(1, ensemble.q + 1)]
    chain = ensemble.chain()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for step in range(chain.shape[0]):
            for walker in range(ensemble.walkers):
                writer.writerow([walker, step] + [repr(float(x)) for x in chain[step, walker]])
    if sidecar_path is not None:
        config = {"q": ensemble.q, "walkers": ensemble.walkers,
                  "burn_in": ensemble.burn_in, "thin": ensemble.thin,
                  "acceptance": ensemble.acceptance, "seed": ensemble.seed,
                  "n_samples": ensemble.n_samples}
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            json.dump(config, fh, indent=2)


def read_ensemble_csv(path, sidecar_path) -> PosteriorEnsemble:
    with open(sidecar_path, encoding="utf-8") as fh:
        config = json.load(fh)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            rows.append((int(row[0]), int(row[1]), [float(x) for x in row[2:]]))
    rows.sort(key=lambda r: (r[1], r[0]))  # step-major
    draws = np.array([r[2] for r in rows])
    return PosteriorEnsemble(q=config["q"], draws=draws, walkers=config["walkers"],
                             burn_in=config["burn_in"], thin=config["thin"],
                             acceptance=config["acceptance"], seed=config["seed"])


def write_band_csv(band: PotentialBand, path) -> None:
    """CSV ``P,V_mle,lo68,hi68,lo95,hi95`` for plotting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["P", "V_mle", "lo68", "hi68", "lo95", "hi95"])
        for k in range(len(band.grid)):
            writer.writerow([repr(float(col[k])) for col in
                             (band.grid, band.v_mle, band.lo68, band.hi68, band.lo95, band.hi95)])


def read_band_csv(path) -> PotentialBand:
    cols = {name: [] for name in ("P", "V_mle", "lo68", "hi68", "lo95", "hi95")}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        for row in reader:
            for name, cell in zip(header, row):
                cols[name].append(float(cell))
    return PotentialBand(grid=np.array(cols["P"]), v_mle=np.array(cols["V_mle"]),
                         lo68=np.array(cols["lo68"]), hi68=np.array(cols["hi68"]),
                         lo95=np.array(cols["lo95"]), hi95=np.array(cols["hi95"]))
