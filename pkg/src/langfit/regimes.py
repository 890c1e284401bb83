"""Map monthly windows to dynamical regimes.

Order 2 means a potential well (stable fixed point); orders 3 and 4 are
rare and lumped together as noise; order 1 splits by the direction the
potential band points to: a 68% band above the zero horizontal pulls the
price down toward 0 (decline), a band below pushes it up (growth), and a
band straddling zero is undirected stagnation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from datetime import datetime

import numpy as np

from .errors import ChainStuck, DegenerateState, LengthMismatch, OptimizerFailure, \
    OrderOutOfRange, SelectionFailure
from .inference import ModelSelection, select_order
from .mcmc import McmcConfig, PotentialBand, default_band_grid, potential_band, sample_posterior
from .models import STABLE, fixed_points
from .timeseries import Series, monthly_windows

STABLE_FP = "StableFP"
GROWTH = "Growth"
STAGNATION = "Stagnation"
DECLINE = "Decline"
NOISE = "Noise"

REGIME_LABELS = (STABLE_FP, GROWTH, STAGNATION, DECLINE, NOISE)

# band must clear the zero horizontal on at least this fraction of the
# evaluation grid to count as directed
DEFAULT_EXCLUSION_THRESHOLD = 0.9


@dataclass(frozen=True)
class RegimeLabel:
    """One window's regime with the band evidence behind it."""

    label: str
    q: int
    band_side: str | None        # "above" / "below" when the 68% band clears 0
    exclusion_fraction: float    # fraction of evaluation points clearing 0
    year: int | None = None
    month: int | None = None
    well_price: float | None = None

    @property
    def tag(self) -> str:
        if self.year is None:
            return "whole-series"
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(frozen=True)
class SkippedWindow:
    """A window the pipeline could not score, with the reason."""

    reason: str
    year: int | None = None
    month: int | None = None

    @property
    def tag(self) -> str:
        if self.year is None:
            return "whole-series"
        return f"{self.year:04d}-{self.month:02d}"


def classify_window(selection: ModelSelection, band: PotentialBand, *,
                    min_price: float | None = None,
                    threshold: float = DEFAULT_EXCLUSION_THRESHOLD) -> RegimeLabel:
    """Label one window from its selected order and potential band.

    Direction is judged only on grid points above ``min_price`` (the
    window's smallest observed price; extrapolating the potential below the
    data is meaningless). Defaults to everything above the grid start.
    """
    q = selection.chosen_q
    if not 1 <= q <= 4:
        raise OrderOutOfRange(f"selected order {q} outside 1..4")

    cutoff = min_price if min_price is not None else float(band.grid[0])
    mask = band.grid > cutoff
    if not np.any(mask):
        mask = np.ones(len(band.grid), dtype=bool)

    frac_above = float(np.mean(band.lo68[mask] > 0.0))
    frac_below = float(np.mean(band.hi68[mask] < 0.0))
    if frac_above >= threshold:
        side, frac = "above", frac_above
    elif frac_below >= threshold:
        side, frac = "below", frac_below
    else:
        side, frac = None, max(frac_above, frac_below)

    if q == 2:
        label = STABLE_FP
    elif q in (3, 4):
        label = NOISE
    elif side == "above":
        label = DECLINE   # potential rises with P: restoring pull toward 0
    elif side == "below":
        label = GROWTH
    else:
        label = STAGNATION

    well = None
    if q == 2:
        well = _well_price(selection, band)
    return RegimeLabel(label=label, q=q, band_side=side, exclusion_fraction=frac,
                       well_price=well)


def _well_price(selection: ModelSelection, band: PotentialBand) -> float | None:
    """Location of the stable nonzero fixed point, if one sits on the grid."""
    model = selection.chosen.model
    lo, hi = float(band.grid[0]), float(band.grid[-1])
    if not hi > lo:
        return None
    for fp in fixed_points(model, (lo, hi)):
        if fp.stability == STABLE and fp.location > 0:
            return fp.location
    return None


def _window_subseed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=[seed, index]).generate_state(1)[0])


def regime_track(series: Series, calendar: list[datetime] | None = None, *,
                 q_max: int = 4, seed: int = 0,
                 mcmc: McmcConfig = McmcConfig(),
                 threshold: float = DEFAULT_EXCLUSION_THRESHOLD
                 ) -> list[RegimeLabel | SkippedWindow]:
    """Classify every monthly window of a series, in calendar order.

    Runs the full pipeline per window (order selection, posterior sampling,
    potential band, classification). Windows that fail are reported as
    ``SkippedWindow`` markers instead of being dropped silently.
    """
    if calendar is None:
        calendar = series.calendar
    if calendar is None:
        raise LengthMismatch("monthly windowing needs one datetime per observation")

    windows = monthly_windows(series, calendar)
    out: list[RegimeLabel | SkippedWindow] = []
    for index, window in enumerate(windows):
        sub_seed = _window_subseed(seed, index)
        try:
            selection = select_order(window.series, q_max=q_max, seed=sub_seed)
            ensemble = sample_posterior(window.series, selection.chosen_q,
                                        replace(mcmc, seed=sub_seed),
                                        mle=selection.chosen)
            grid = default_band_grid(window.series)
            band = potential_band(ensemble, grid, selection.chosen)
            label = classify_window(selection, band,
                                    min_price=float(np.min(window.series.values)),
                                    threshold=threshold)
            out.append(replace(label, year=window.year, month=window.month))
        except (DegenerateState, OptimizerFailure, SelectionFailure, ChainStuck) as exc:
            out.append(SkippedWindow(reason=f"{type(exc).__name__}: {exc}",
                                     year=window.year, month=window.month))
    return out


def order_confusion(selections_a, selections_b) -> np.ndarray:
    """4x4 count matrix of chosen orders for the same windows under two
    series; entry (i, j) counts order i+1 in A against order j+1 in B.

    Accepts lists of ``ModelSelection`` or of plain chosen orders.
    """
    if len(selections_a) != len(selections_b):
        raise LengthMismatch(
            f"selection lists differ in length: {len(selections_a)} vs {len(selections_b)}"
        )

    def order_of(item) -> int:
        q = item.chosen_q if isinstance(item, ModelSelection) else int(item)
        if not 1 <= q <= 4:
            raise OrderOutOfRange(f"order {q} outside 1..4")
        return q

    matrix = np.zeros((4, 4), dtype=int)
    for a, b in zip(selections_a, selections_b):
        matrix[order_of(a) - 1, order_of(b) - 1] += 1
    return matrix


def track_to_rows(track) -> list[dict]:
    rows = []
    for item in track:
        if isinstance(item, RegimeLabel):
            rows.append({"year": item.year, "month": item.month, "label": item.label,
                         "q": item.q, "well_price": item.well_price,
                         "band_side": item.band_side,
                         "exclusion_fraction": item.exclusion_fraction})
        else:
            rows.append({"year": item.year, "month": item.month, "label": "Skipped",
                         "q": None, "well_price": None, "band_side": None,
                         "exclusion_fraction": None, "reason": item.reason})
    return rows


def write_track_csv(track, path) -> None:
    """CSV ``year,month,label,q,well_price`` (skips carry the label Skipped)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "month", "label", "q", "well_price"])
        for row in track_to_rows(track):
            writer.writerow([
                "" if row["year"] is None else row["year"],
                "" if row["month"] is None else row["month"],
                row["label"],
                "" if row["q"] is None else row["q"],
                "" if row["well_price"] is None else repr(float(row["well_price"])),
            ])


def write_track_json(track, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(track_to_rows(track), fh, indent=2)
