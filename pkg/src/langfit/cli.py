"""Command-line interface: simulate, fit, sample, classify, replicate.

Every subcommand is deterministic under a fixed --seed, writes plot-ready
CSV/JSON files only (no rendering), and refuses to overwrite existing
outputs unless --force is given. Flag values win over the optional JSON
config file, which wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ChainStuck, ConfigError, DegenerateState, EmptyInput, LangfitError, \
    OptimizerFailure, ParseError, SelectionFailure, TooManyRejections
from .inference import fit_mle, select_order, selection_to_dict
from .mcmc import McmcConfig, default_band_grid, diagnostics, diagnostics_to_dict, \
    potential_band, sample_posterior, write_band_csv, write_ensemble_csv
from .models import DriftModel
from .regimes import classify_window, regime_track, track_to_rows, write_track_csv, \
    write_track_json
from .replicate import order_recovery, parameter_recovery
from .simulate import DEFAULT_DIVERGENCE_BOUND, simulate_ensemble_with_stats
from .timeseries import Series, load_series, monthly_windows

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARTIAL = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="langfit",
        description="Fit polynomial-drift SDEs to price series, select the drift "
                    "order by AIC, sample posterior potential bands, and classify "
                    "dynamical regimes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, needs_input: bool = True):
        if needs_input:
            p.add_argument("--input", help="input series file")
            p.add_argument("--format", choices=["price-csv", "quote-csv", "auto"],
                           default="auto", help="input format (default: sniff the header)")
            p.add_argument("--window", choices=["monthly", "whole-series", "auto"],
                           default="auto",
                           help="monthly windows (needs dates) or one whole-series window")
        p.add_argument("--out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, help="master RNG seed (default 0)")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--config", help="JSON config file; flags take precedence")

    p_sim = sub.add_parser("simulate", help="generate synthetic SDE trajectories")
    p_sim.add_argument("--q", type=int, help="drift polynomial order (1..4)")
    p_sim.add_argument("--alpha", help="comma-separated drift coefficients alpha1..alphaq")
    p_sim.add_argument("--sigma2", type=float, help="diffusion variance sigma^2")
    p_sim.add_argument("--n", type=int, help="number of trajectories (default 1)")
    p_sim.add_argument("--len", type=int, dest="length", help="points per trajectory (default 1000)")
    p_sim.add_argument("--grid-style", choices=["equidistant", "jittered"],
                       help="time grid style (default equidistant)")
    p_sim.add_argument("--s0", type=float, help="initial value (default 1.0)")
    p_sim.add_argument("--dt-scale", type=float, dest="dt_scale",
                       help="time-step scale factor (default 1.0)")
    p_sim.add_argument("--bound", type=float, help="divergence bound (default 1e9)")
    add_common(p_sim, needs_input=False)

    p_fit = sub.add_parser("fit", help="AIC order selection per window")
    p_fit.add_argument("--qmax", type=int, help="largest candidate order (default 4)")
    p_fit.add_argument("--order-histogram", action="store_true",
                       help="also write a histogram of chosen orders across windows")
    add_common(p_fit)

    p_sample = sub.add_parser("sample", help="posterior sampling and potential bands")
    p_sample.add_argument("--qmax", type=int, help="largest candidate order (default 4)")
    p_sample.add_argument("--q", type=int, help="force this order instead of AIC selection")
    p_sample.add_argument("--walkers", type=int, help="ensemble walkers")
    p_sample.add_argument("--steps", type=int, help="MCMC steps (default 5000)")
    p_sample.add_argument("--burnin", type=int, help="burn-in steps (default 1000)")
    p_sample.add_argument("--thin", type=int, help="keep every n-th step (default 5)")
    add_common(p_sample)

    p_classify = sub.add_parser("classify", help="regime track over monthly windows")
    p_classify.add_argument("--qmax", type=int, help="largest candidate order (default 4)")
    p_classify.add_argument("--walkers", type=int)
    p_classify.add_argument("--steps", type=int)
    p_classify.add_argument("--burnin", type=int)
    p_classify.add_argument("--thin", type=int)
    p_classify.add_argument("--threshold", type=float,
                            help="band exclusion fraction for a directed label (default 0.9)")
    add_common(p_classify)

    p_rep = sub.add_parser("replicate", help="synthetic recovery experiments")
    p_rep.add_argument("which", choices=["order-recovery", "parameter-recovery"])
    p_rep.add_argument("--paths", type=int, help="ensemble size (default 100)")
    p_rep.add_argument("--len", type=int, dest="length", help="points per path (default 1000)")
    p_rep.add_argument("--grid-style", choices=["equidistant", "jittered"],
                       help="time grid style (default jittered)")
    p_rep.add_argument("--dt-scale", type=float, dest="dt_scale",
                       help="time-step scale (defaults per experiment)")
    add_common(p_rep, needs_input=False)

    return parser


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a single JSON object")
    return doc


def _resolve(args: argparse.Namespace, config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is None:
        value = config.get(key, default)
    return value


def _out_dir(args, config) -> Path:
    out = Path(_resolve(args, config, "out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _guard_overwrite(paths: list[Path], force: bool) -> None:
    existing = [str(p) for p in paths if p.exists()]
    if existing and not force:
        raise ConfigError(f"refusing to overwrite {', '.join(existing)} (use --force)")


def _sniff_format(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().lower()
    if header.startswith("timestamp"):
        return "quote-csv"
    return "price-csv"


def _read_input(args, config) -> Series:
    path = _resolve(args, config, "input", None)
    if not path:
        raise ConfigError("--input is required")
    fmt = _resolve(args, config, "format", "auto")
    if fmt == "auto":
        fmt = _sniff_format(path)
    return load_series(path, fmt)


def _windows_of(series: Series, mode: str):
    """Yield (year, month, window_series) per requested windowing mode."""
    if mode == "auto":
        mode = "monthly" if series.calendar is not None else "whole-series"
    if mode == "whole-series":
        return [(None, None, series)]
    if series.calendar is None:
        raise ConfigError("--window monthly needs an input with a date/timestamp column")
    return [(w.year, w.month, w.series) for w in monthly_windows(series, series.calendar)]


def _tag(year, month) -> str:
    return "whole-series" if year is None else f"{year:04d}-{month:02d}"


def _subseed(seed: int, *entropy) -> int:
    return int(np.random.SeedSequence(entropy=[seed, *entropy]).generate_state(1)[0])


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    q = _resolve(args, config, "q", None)
    alpha = _resolve(args, config, "alpha", None)
    sigma2 = _resolve(args, config, "sigma2", None)
    if q is None or alpha is None or sigma2 is None:
        raise ConfigError("simulate needs --q, --alpha and --sigma2")
    alphas = tuple(float(tok) for tok in str(alpha).split(","))
    if len(alphas) != int(q):
        raise ConfigError(f"--q {q} does not match {len(alphas)} alpha values")
    model = DriftModel.from_phi(np.concatenate(([float(sigma2)], alphas)))

    count = int(_resolve(args, config, "n", 1))
    length = int(_resolve(args, config, "length", 1000))
    grid_style = _resolve(args, config, "grid_style", "equidistant")
    s0 = float(_resolve(args, config, "s0", 1.0))
    dt_scale = float(_resolve(args, config, "dt_scale", 1.0))
    bound = float(_resolve(args, config, "bound", DEFAULT_DIVERGENCE_BOUND))
    seed = int(_resolve(args, config, "seed", 0))

    out = _out_dir(args, config)
    ensemble_path = out / "ensemble.csv"
    manifest_path = out / "manifest.json"
    _guard_overwrite([ensemble_path, manifest_path], args.force)

    paths, attempts = simulate_ensemble_with_stats(
        model, count=count, length=length, grid_style=grid_style, seed=seed,
        s0=s0, dt_scale=dt_scale, bound=bound)

    with open(ensemble_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path_id", "time", "value"])
        for pid, series in enumerate(paths):
            for t, v in zip(series.times, series.values):
                writer.writerow([pid, repr(float(t)), repr(float(v))])

    manifest = {"model": {"q": model.q, "alphas": list(model.alphas), "sigma2": model.sigma2},
                "seed": seed, "count": count, "length": length,
                "grid_style": grid_style, "s0": s0, "dt_scale": dt_scale,
                "bound": bound, "rejections": attempts - count}
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)

    print(f"wrote {count} paths to {ensemble_path} ({attempts - count} rejected draws)")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    series = _read_input(args, config)
    q_max = int(_resolve(args, config, "qmax", 4))
    seed = int(_resolve(args, config, "seed", 0))
    windows = _windows_of(series, _resolve(args, config, "window", "auto"))

    out = _out_dir(args, config)
    selections_path = out / "selections.json"
    histogram_path = out / "order_histogram.csv"
    guard = [selections_path] + ([histogram_path] if args.order_histogram else [])
    _guard_overwrite(guard, args.force)

    docs = []
    chosen: list[int] = []
    failures = 0
    for index, (year, month, window) in enumerate(windows):
        doc = {"year": year, "month": month}
        try:
            selection = select_order(window, q_max=q_max, seed=_subseed(seed, index))
            doc.update(selection_to_dict(selection))
            chosen.append(selection.chosen_q)
        except (DegenerateState, SelectionFailure, OptimizerFailure, ValueError) as exc:
            doc["error"] = f"{type(exc).__name__}: {exc}"
            failures += 1
        docs.append(doc)

    with open(selections_path, "w", encoding="utf-8") as fh:
        json.dump(docs, fh, indent=2)
    print(f"wrote {len(docs)} window selections to {selections_path} "
          f"({failures} failed)")

    if args.order_histogram:
        counts = {q: chosen.count(q) for q in range(1, q_max + 1)}
        with open(histogram_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["q", "count"])
            for q, n in counts.items():
                writer.writerow([q, n])
        print(f"wrote order histogram to {histogram_path}")

    if failures == len(windows):
        return EXIT_FAILURE
    return EXIT_PARTIAL if failures else EXIT_OK


def _mcmc_config(args, config, seed: int) -> McmcConfig:
    return McmcConfig(
        walkers=_resolve(args, config, "walkers", None),
        steps=int(_resolve(args, config, "steps", McmcConfig.steps)),
        burn_in=int(_resolve(args, config, "burnin", McmcConfig.burn_in)),
        thin=int(_resolve(args, config, "thin", McmcConfig.thin)),
        seed=seed,
    )


def cmd_sample(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    series = _read_input(args, config)
    q_max = int(_resolve(args, config, "qmax", 4))
    forced_q = _resolve(args, config, "q", None)
    seed = int(_resolve(args, config, "seed", 0))
    windows = _windows_of(series, _resolve(args, config, "window", "auto"))
    out = _out_dir(args, config)

    tags = [_tag(year, month) for year, month, _ in windows]
    guard = [out / "diagnostics.json"]
    for tag in tags:
        guard += [out / f"posterior_{tag}.csv", out / f"posterior_{tag}.json",
                  out / f"band_{tag}.csv"]
    _guard_overwrite(guard, args.force)

    diag_docs = []
    failures = 0
    for index, (year, month, window) in enumerate(windows):
        tag = tags[index]
        sub_seed = _subseed(seed, index)
        doc = {"window": tag, "year": year, "month": month}
        try:
            if forced_q is not None:
                mle = fit_mle(window, int(forced_q), seed=sub_seed)
                chosen_q = int(forced_q)
            else:
                selection = select_order(window, q_max=q_max, seed=sub_seed)
                mle = selection.chosen
                chosen_q = selection.chosen_q
            ensemble = sample_posterior(window, chosen_q,
                                        _mcmc_config(args, config, sub_seed), mle=mle)
            band = potential_band(ensemble, default_band_grid(window), mle)
            diag = diagnostics(ensemble, band)
            write_ensemble_csv(ensemble, out / f"posterior_{tag}.csv",
                               out / f"posterior_{tag}.json")
            write_band_csv(band, out / f"band_{tag}.csv")
            doc.update({"q": chosen_q, **diagnostics_to_dict(diag)})
        except (DegenerateState, SelectionFailure, OptimizerFailure, ChainStuck,
                ValueError) as exc:
            doc["error"] = f"{type(exc).__name__}: {exc}"
            failures += 1
        diag_docs.append(doc)

    with open(out / "diagnostics.json", "w", encoding="utf-8") as fh:
        json.dump(diag_docs, fh, indent=2)
    print(f"sampled {len(windows) - failures}/{len(windows)} windows into {out}")

    if failures == len(windows):
        return EXIT_FAILURE
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_classify(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    series = _read_input(args, config)
    q_max = int(_resolve(args, config, "qmax", 4))
    seed = int(_resolve(args, config, "seed", 0))
    threshold = float(_resolve(args, config, "threshold", 0.9))
    mode = _resolve(args, config, "window", "auto")
    if mode == "auto":
        mode = "monthly" if series.calendar is not None else "whole-series"
    out = _out_dir(args, config)
    csv_path, json_path = out / "regimes.csv", out / "regimes.json"
    _guard_overwrite([csv_path, json_path], args.force)

    mcmc = _mcmc_config(args, config, seed)
    if mode == "monthly":
        if series.calendar is None:
            raise ConfigError("--window monthly needs an input with a date/timestamp column")
        track = regime_track(series, series.calendar, q_max=q_max, seed=seed,
                             mcmc=mcmc, threshold=threshold)
    else:
        track = [_classify_whole(series, q_max, seed, mcmc, threshold)]

    write_track_csv(track, csv_path)
    write_track_json(track, json_path)
    skipped = sum(1 for row in track_to_rows(track) if row["label"] == "Skipped")
    print(f"classified {len(track) - skipped}/{len(track)} windows into {csv_path}")

    if skipped == len(track):
        return EXIT_FAILURE
    return EXIT_PARTIAL if skipped else EXIT_OK


def _classify_whole(series: Series, q_max: int, seed: int, mcmc: McmcConfig,
                    threshold: float):
    from .regimes import SkippedWindow
    try:
        selection = select_order(series, q_max=q_max, seed=seed)
        ensemble = sample_posterior(series, selection.chosen_q,
                                    replace(mcmc, seed=seed), mle=selection.chosen)
        band = potential_band(ensemble, default_band_grid(series), selection.chosen)
        return classify_window(selection, band,
                               min_price=float(np.min(series.values)),
                               threshold=threshold)
    except (DegenerateState, SelectionFailure, OptimizerFailure, ChainStuck) as exc:
        return SkippedWindow(reason=f"{type(exc).__name__}: {exc}")


def cmd_replicate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    seed = int(_resolve(args, config, "seed", 0))
    paths = int(_resolve(args, config, "paths", 100))
    length = int(_resolve(args, config, "length", 1000))
    grid_style = _resolve(args, config, "grid_style", "jittered")
    out = _out_dir(args, config)

    dt_scale = _resolve(args, config, "dt_scale", None)
    if args.which == "parameter-recovery":
        files = [out / "estimates_q3.csv", out / "estimates_q4.csv",
                 out / "parameter_recovery.json"]
        _guard_overwrite(files, args.force)
        result = parameter_recovery(paths=paths, length=length, seed=seed,
                                    grid_style=grid_style,
                                    **({} if dt_scale is None else {"dt_scale": float(dt_scale)}))
        for path, est in zip(files[:2], (result.estimates_q3, result.estimates_q4)):
            q = est.shape[1] - 1
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["path", "sigma2"] + [f"alpha{i}" for i in range(1, q + 1)])
                for k, row in enumerate(est):
                    writer.writerow([k] + [repr(float(x)) for x in row])
        with open(files[2], "w", encoding="utf-8") as fh:
            json.dump(result.summary(), fh, indent=2)
        checks = result.checks
    else:
        files = [out / "order_histograms.csv", out / "order_recovery.json"]
        _guard_overwrite(files, args.force)
        result = order_recovery(paths=paths, length=length, seed=seed,
                                grid_style=grid_style,
                                **({} if dt_scale is None else {"dt_scale": float(dt_scale)}))
        with open(files[0], "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true_q", "chosen_1", "chosen_2", "chosen_3", "chosen_4"])
            for true_q, hist in sorted(result.histograms.items()):
                writer.writerow([true_q] + hist.tolist())
        with open(files[1], "w", encoding="utf-8") as fh:
            json.dump(result.summary(), fh, indent=2)
        checks = result.checks

    for check in checks:
        print(f"[{'PASS' if check.passed else 'FAIL'}] {check.name}: {check.detail}")
    print(f"verdict: {'PASS' if result.passed else 'FAIL'}")
    return EXIT_OK if result.passed else EXIT_FAILURE


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "sample": cmd_sample,
    "classify": cmd_classify,
    "replicate": cmd_replicate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, EmptyInput, ParseError, TooManyRejections, LangfitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
