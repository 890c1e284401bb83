"""Affine-invariant ensemble sampler built on the Goodman-Weare stretch move.

A walker x_k proposes z * x_k + (1 - z) * x_j against a partner x_j drawn
from the frozen complement half, with z ~ g(z) propto 1/sqrt(z) on [1/a, a];
the proposal is accepted with probability min(1, z^(d-1) * density ratio).
Updating the two half-ensembles alternately preserves detailed balance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_STRETCH = 2.0


def stretch_move(walkers: np.ndarray, log_probs: np.ndarray, complement: np.ndarray,
                 log_prob_fn, a: float, rng: np.random.Generator):
    """One stretch-move update of a walker block against a frozen complement.

    ``log_prob_fn`` must map an (n, d) batch to n log-densities. Returns
    (proposals, proposal_log_probs, accept_mask).
    """
    if not a > 1.0:
        raise ValueError(f"stretch scale must exceed 1, got {a}")
    if len(complement) < 1:
        raise ValueError("complement must hold at least one walker")

    n, d = walkers.shape
    # inverse-CDF sample of g(z) propto 1/sqrt(z) on [1/a, a]
    z = ((a - 1.0) * rng.random(n) + 1.0) ** 2 / a
    partners = complement[rng.integers(0, len(complement), size=n)]
    proposals = partners + z[:, None] * (walkers - partners)

    proposal_lp = np.asarray(log_prob_fn(proposals), dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        log_ratio = (d - 1) * np.log(z) + proposal_lp - log_probs
        # NaN (e.g. -inf minus -inf) compares False: rejected
        accept = np.log(rng.random(n)) < log_ratio
    return proposals, proposal_lp, accept


@dataclass(frozen=True)
class SamplerRun:
    """Raw chain (steps, walkers, dim) with per-step acceptance counts."""

    chain: np.ndarray
    log_probs: np.ndarray   # (steps, walkers)
    accepted: np.ndarray    # (steps,) number of accepted proposals per step


def run_sampler(log_prob_fn, initial: np.ndarray, steps: int,
                a: float = DEFAULT_STRETCH, seed: int = 0) -> SamplerRun:
    """Evolve the full ensemble for ``steps`` iterations from ``initial``.

    Each iteration updates the two half-ensembles in turn, every proposal
    using only the frozen opposite half. Deterministic under a fixed seed.
    """
    walkers = np.array(initial, dtype=float)
    if walkers.ndim != 2 or len(walkers) < 2:
        raise ValueError("initial must be (n_walkers >= 2, dim)")
    n, d = walkers.shape
    rng = np.random.default_rng(seed)

    log_probs = np.asarray(log_prob_fn(walkers), dtype=float)
    if not np.all(np.isfinite(log_probs)):
        raise ValueError("every initial walker needs a finite log-density")

    halves = (np.arange(n) < n // 2, np.arange(n) >= n // 2)
    chain = np.empty((steps, n, d))
    chain_lp = np.empty((steps, n))
    accepted = np.zeros(steps, dtype=int)

    for step in range(steps):
        for half in halves:
            proposals, proposal_lp, accept = stretch_move(
                walkers[half], log_probs[half], walkers[~half], log_prob_fn, a, rng)
            idx = np.flatnonzero(half)[accept]
            walkers[idx] = proposals[accept]
            log_probs[idx] = proposal_lp[accept]
            accepted[step] += int(np.count_nonzero(accept))
        chain[step] = walkers
        chain_lp[step] = log_probs

    return SamplerRun(chain=chain, log_probs=chain_lp, accepted=accepted)


def integrated_autocorr_time(x: np.ndarray, c: float = 5.0) -> float:
    """Integrated autocorrelation time of a chain, averaged over walkers.

    ``x`` has shape (steps,) or (steps, walkers). Uses the FFT-based
    autocorrelation with Sokal's self-consistent window M >= c * tau.
    Returns NaN when the chain has zero variance (not estimable).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float).T).T  # (steps, walkers)
    n_steps = x.shape[0]
    centered = x - x.mean(axis=0)
    if not np.any(centered):
        return float("nan")

    size = 1 << (2 * n_steps - 1).bit_length()
    f = np.fft.rfft(centered, n=size, axis=0)
    acf = np.fft.irfft(f * np.conjugate(f), n=size, axis=0)[:n_steps].real
    acf = acf.mean(axis=1)
    if acf[0] == 0.0:
        return float("nan")
    acf /= acf[0]

    taus = 2.0 * np.cumsum(acf) - 1.0
    window = np.arange(n_steps) >= c * taus
    m = int(np.argmax(window)) if np.any(window) else n_steps - 1
    return float(taus[m])
