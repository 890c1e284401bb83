"""Synthetic recovery experiments: order selection and parameter estimation.

Both experiments draw ensembles of simulated trajectories, push them through
the fitting pipeline, and compare the recovered quantities against the known
generators. They back the CLI ``replicate`` subcommand and the acceptance
checks.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateState, OptimizerFailure, SelectionFailure, TooManyRejections
from .inference import fit_mle, select_order
from .models import DriftModel
from .simulate import (DEFAULT_DIVERGENCE_BOUND, SimConfig, make_grid,
                       path_is_degenerate, random_model, simulate_ensemble, simulate_path)
from .timeseries import Series

# the fixed generator of the parameter-recovery experiment: q=3 with
# phi = (sigma^2, alpha_1, alpha_2, alpha_3) = (0.05, 2, -1, 0.01)
RECOVERY_PHI = (0.05, 2.0, -1.0, 0.01)

# the Euler map of that generator is stochastically unstable at unit time
# steps (every path escapes to -inf), so its recovery experiment runs on
# sub-unit steps
RECOVERY_DT_SCALE = 0.25

DEFAULT_PATHS = 100
DEFAULT_LENGTH = 1000
PHI_NAMES_Q3 = ("sigma2", "alpha1", "alpha2", "alpha3")


def _subseed(*entropy) -> int:
    words = [zlib.crc32(e.encode()) if isinstance(e, str) else e for e in entropy]
    return int(np.random.SeedSequence(entropy=words).generate_state(1)[0])


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class ParameterRecoveryResult:
    true_phi: np.ndarray
    estimates_q3: np.ndarray   # (paths, 4)
    estimates_q4: np.ndarray   # (paths, 5)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> dict:
        mean3, std3 = self.estimates_q3.mean(axis=0), self.estimates_q3.std(axis=0)
        mean4, std4 = self.estimates_q4.mean(axis=0), self.estimates_q4.std(axis=0)
        return {
            "true_phi": [float(x) for x in self.true_phi],
            "paths": int(len(self.estimates_q3)),
            "q3": {"mean": mean3.tolist(), "std": std3.tolist()},
            "q4": {"mean": mean4.tolist(), "std": std4.tolist()},
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                       for c in self.checks],
            "passed": self.passed,
        }


def parameter_recovery(paths: int = DEFAULT_PATHS, length: int = DEFAULT_LENGTH,
                       seed: int = 0, grid_style: str = "jittered",
                       dt_scale: float = RECOVERY_DT_SCALE) -> ParameterRecoveryResult:
    """Re-estimate a fixed q=3 generator from ``paths`` simulated series.

    Checks that each true parameter lies within one standard deviation of
    the estimate ensemble's mean, that alpha_3 is consistent with zero, and
    that refitting at q=4 makes alpha_2 consistent with zero (overfitting).
    """
    true_phi = np.array(RECOVERY_PHI)
    model = DriftModel.from_phi(true_phi)
    series_list = simulate_ensemble(model, count=paths, length=length,
                                    grid_style=grid_style, dt_scale=dt_scale,
                                    seed=_subseed(seed, "sim"))

    est3 = np.empty((paths, 4))
    est4 = np.empty((paths, 5))
    for k, series in enumerate(series_list):
        est3[k] = fit_mle(series, 3, seed=_subseed(seed, "fit3", k)).phi
        est4[k] = fit_mle(series, 4, seed=_subseed(seed, "fit4", k)).phi

    result = ParameterRecoveryResult(true_phi=true_phi, estimates_q3=est3, estimates_q4=est4)
    mean3, std3 = est3.mean(axis=0), est3.std(axis=0)
    for j, name in enumerate(PHI_NAMES_Q3):
        ok = abs(mean3[j] - true_phi[j]) <= std3[j]
        result.checks.append(Check(
            name=f"coverage[{name}]", passed=bool(ok),
            detail=f"true {true_phi[j]:g} vs mean {mean3[j]:.4g} +- {std3[j]:.4g}"))
    result.checks.append(Check(
        name="alpha3-null", passed=bool(abs(mean3[3]) < std3[3]),
        detail=f"|mean| {abs(mean3[3]):.4g} < std {std3[3]:.4g}"))
    mean4_a2, std4_a2 = est4[:, 2].mean(), est4[:, 2].std()
    result.checks.append(Check(
        name="q4-overfit-alpha2-contains-0", passed=bool(abs(mean4_a2) <= std4_a2),
        detail=f"mean {mean4_a2:.4g} +- {std4_a2:.4g}"))
    return result


@dataclass
class OrderRecoveryResult:
    histograms: dict[int, np.ndarray]   # true q -> counts of chosen order 1..4
    rejections: dict[int, int]
    fit_failures: dict[int, int]
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> dict:
        return {
            "histograms": {str(q): h.tolist() for q, h in self.histograms.items()},
            "rejections": {str(q): n for q, n in self.rejections.items()},
            "fit_failures": {str(q): n for q, n in self.fit_failures.items()},
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                       for c in self.checks],
            "passed": self.passed,
        }


def order_recovery(paths: int = DEFAULT_PATHS, length: int = DEFAULT_LENGTH,
                   seed: int = 0, q_max: int = 4,
                   true_orders: tuple[int, ...] = (1, 2, 3, 4),
                   grid_style: str = "jittered",
                   dt_scale: float = 1.0) -> OrderRecoveryResult:
    """AIC order selection on ensembles of randomly parameterized models.

    For each true order, random models are drawn and simulated until
    ``paths`` usable trajectories have been collected (diverged, collapsed,
    or unfittable draws are discarded and redrawn). Recovery demands the
    modal selected order to equal the true order for q = 1..3; the q = 4
    histogram is recorded without a requirement.
    """
    histograms: dict[int, np.ndarray] = {}
    rejections: dict[int, int] = {}
    fit_failures: dict[int, int] = {}

    for true_q in true_orders:
        hist = np.zeros(q_max, dtype=int)
        accepted = rejected = failures = attempts = 0
        max_attempts = 100 * paths
        while accepted < paths:
            if attempts >= max_attempts:
                raise TooManyRejections(
                    f"true q={true_q}: only {accepted}/{paths} usable paths "
                    f"after {attempts} attempts")
            rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, true_q, attempts]))
            attempts += 1
            model = random_model(true_q, seed=int(rng.integers(2**63)))
            grid = make_grid(length, grid_style, rng, dt_scale)
            path = simulate_path(SimConfig(model=model, s0=1.0, grid=grid,
                                           seed=int(rng.integers(2**63)),
                                           bound=DEFAULT_DIVERGENCE_BOUND))
            if not isinstance(path, Series) or path_is_degenerate(path):
                rejected += 1
                continue
            try:
                selection = select_order(path, q_max=q_max, seed=int(rng.integers(2**63)))
            except (DegenerateState, OptimizerFailure, SelectionFailure):
                failures += 1
                continue
            hist[selection.chosen_q - 1] += 1
            accepted += 1
        histograms[true_q] = hist
        rejections[true_q] = rejected
        fit_failures[true_q] = failures

    result = OrderRecoveryResult(histograms=histograms, rejections=rejections,
                                 fit_failures=fit_failures)
    for true_q in true_orders:
        hist = histograms[true_q]
        modal = int(np.argmax(hist)) + 1
        unique = int(np.count_nonzero(hist == hist.max())) == 1
        detail = f"histogram {hist.tolist()}, modal order {modal}"
        if true_q <= 3:
            result.checks.append(Check(
                name=f"modal-order[true q={true_q}]",
                passed=bool(modal == true_q and unique), detail=detail))
        else:
            result.checks.append(Check(
                name=f"histogram-recorded[true q={true_q}]", passed=True, detail=detail))
    return result
