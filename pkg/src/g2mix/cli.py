"""Command-line front end: model curves, simulated runs, analysis, checks.

Subcommands:
    curve     evaluate the phase-averaged g2 model on a delay grid -> CSV
    simulate  run the coincidence-counting emulator -> CSV + JSON sidecar
    analyze   normalize, fit, classify, and test a histogram -> JSON report
    check     classical-inequality report for a curve CSV -> JSON

Options load from a JSON config file (--config) and are overridden by
flags.  Angles are accepted in degrees on the command line (--phi 180);
the phase-noise width --phi-sigma is in radians, matching the uniform-phase
limit at large values.  All randomness flows from the config seed; outputs
contain no timestamps, so identical configs give byte-identical files.

Exit codes: 0 ok, 2 invalid config/data, 3 fit did not converge (report is
still written), 4 curve has no zero-delay bin.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import io as g2io
from .analysis import analyze_histogram
from .correlation import (
    TAU_UNIT_SCALED,
    TAU_UNIT_SECONDS,
    MixModel,
    SpectralParams,
    curve as model_curve,
)
from .measurement import DetectionConfig, simulate_histogram
from .nonclassical import NoZeroDelayError, check_schwartz

CONFIG_FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FIT = 3
EXIT_DATA = 4

DW_OPO_DEFAULT = 2.0 * math.pi * 50e6  # rad/s
RATIO_DEFAULT = 2.8

DEFAULTS = {
    "b": 1.0,
    "phi_deg": 180.0,
    "phi_sigma": 0.0,
    "bg": 0.0,
    "dw_opo": DW_OPO_DEFAULT,
    "dw_c2": None,  # derived from ratio when absent
    "ratio": RATIO_DEFAULT,
    "tau_unit": "scaled",
    "tau_min": -8.0,
    "tau_max": 8.0,
    "tau_points": 401,
    "bin_width": 0.5e-9,
    "n_bins": 256,
    "zero_offset": 47.2e-9,
    "singles_rate": 2.0e5,
    "pair_fraction": 0.1,
    "efficiency": 1.0,
    "bg_flat_rate": 0.0,
    "run_seconds": 5.0,
    "n_runs": 1,
    "seed": 12345,
    "baseline_min": None,
    "baseline_max": None,
    "fit_bandwidths": False,
    "release_phase": True,
    "classify_tol": 0.02,
}

_TAU_UNIT_MAP = {"s": TAU_UNIT_SECONDS, "scaled": TAU_UNIT_SCALED}


def _load_config(path) -> dict:
    try:
        data = json.loads(open(path).read())
    except OSError as exc:
        raise ValueError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    version = data.pop("format_version", CONFIG_FORMAT_VERSION)
    if version != CONFIG_FORMAT_VERSION:
        raise ValueError(f"unsupported config format_version {version!r}")
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return data


def _resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, and explicit flags (highest precedence)."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_load_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _spectral(cfg: dict) -> SpectralParams:
    dw_opo = float(cfg["dw_opo"])
    dw_c2 = cfg["dw_c2"]
    if dw_c2 is None:
        dw_c2 = float(cfg["ratio"]) * dw_opo
    return SpectralParams(dw_opo=dw_opo, dw_c2=float(dw_c2))


def _mix(cfg: dict) -> MixModel:
    return MixModel(
        b=float(cfg["b"]),
        phi_mean=math.radians(float(cfg["phi_deg"])),
        phi_sigma=float(cfg["phi_sigma"]),
        bg=float(cfg["bg"]),
    )


def _detection(cfg: dict) -> DetectionConfig:
    return DetectionConfig(
        bin_width=float(cfg["bin_width"]),
        n_bins=int(cfg["n_bins"]),
        zero_offset=float(cfg["zero_offset"]),
        singles_rate=float(cfg["singles_rate"]),
        pair_fraction=float(cfg["pair_fraction"]),
        efficiency=float(cfg["efficiency"]),
        bg_flat_rate=float(cfg["bg_flat_rate"]),
        run_seconds=float(cfg["run_seconds"]),
        n_runs=int(cfg["n_runs"]),
        seed=int(cfg["seed"]),
    )


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--b", type=float, help="relative two-photon strength, dimensionless >= 0")
    p.add_argument("--phi", dest="phi_deg", type=float, metavar="DEG",
                   help="mean relative phase, degrees")
    p.add_argument("--phi-sigma", dest="phi_sigma", type=float, metavar="RAD",
                   help="RMS phase-noise width, radians (large values -> uniform phase)")
    p.add_argument("--bg", type=float,
                   help="incoherent background fraction on the baseline, >= 0")
    p.add_argument("--dw-opo", dest="dw_opo", type=float, metavar="RAD_S",
                   help="source bandwidth, rad/s")
    p.add_argument("--dw-c2", dest="dw_c2", type=float, metavar="RAD_S",
                   help="filter bandwidth, rad/s (overrides --ratio)")
    p.add_argument("--ratio", type=float,
                   help="filter/source bandwidth ratio (used when --dw-c2 absent)")


def _add_detection_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bin-width", dest="bin_width", type=float, metavar="S",
                   help="TAC bin width, seconds")
    p.add_argument("--n-bins", dest="n_bins", type=int, help="number of delay bins")
    p.add_argument("--zero-offset", dest="zero_offset", type=float, metavar="S",
                   help="electronic zero-delay offset inside the window, seconds")
    p.add_argument("--singles-rate", dest="singles_rate", type=float, metavar="HZ",
                   help="singles rate per detector, counts/s")
    p.add_argument("--pair-fraction", dest="pair_fraction", type=float,
                   help="two-photon/coherent intensity ratio (bookkeeping)")
    p.add_argument("--efficiency", type=float,
                   help="detector quantum efficiency, in (0, 1]")
    p.add_argument("--bg-flat-rate", dest="bg_flat_rate", type=float,
                   metavar="HZ_PER_BIN", help="flat scattering background, counts/s per bin")
    p.add_argument("--run-seconds", dest="run_seconds", type=float, metavar="S",
                   help="duration of one fixed-phase run, seconds")
    p.add_argument("--n-runs", dest="n_runs", type=int, help="number of runs summed")
    p.add_argument("--seed", type=int, help="RNG seed (sole entropy source)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="g2mix",
        description="Photon statistics of a coherent field mixed with a "
                    "narrow-band two-photon field.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_curve = sub.add_parser(
        "curve", help="evaluate the phase-averaged g2 model on a delay grid (CSV)")
    p_curve.add_argument("--config", help="JSON config file; flags override it")
    _add_model_flags(p_curve)
    p_curve.add_argument("--tau-unit", dest="tau_unit", choices=("s", "scaled"),
                         help="delay axis unit: seconds or 4/dw_opo units")
    p_curve.add_argument("--tau-min", dest="tau_min", type=float,
                         help="grid start, in --tau-unit units")
    p_curve.add_argument("--tau-max", dest="tau_max", type=float,
                         help="grid end, in --tau-unit units")
    p_curve.add_argument("--tau-points", dest="tau_points", type=int,
                         help="number of grid points")
    p_curve.add_argument("--out", help="output CSV path (default: stdout)")

    p_sim = sub.add_parser(
        "simulate", help="run the coincidence-counting emulator (CSV + JSON sidecar)")
    p_sim.add_argument("--config", help="JSON config file; flags override it")
    _add_model_flags(p_sim)
    _add_detection_flags(p_sim)
    p_sim.add_argument("--out", required=True, metavar="PREFIX",
                       help="output prefix; writes PREFIX.csv and PREFIX.json")

    p_an = sub.add_parser(
        "analyze", help="normalize, fit, classify, and test a simulated histogram")
    p_an.add_argument("histogram", help="histogram file prefix (or its .csv/.json path)")
    p_an.add_argument("--config", help="JSON config file; flags override it")
    p_an.add_argument("--dw-opo", dest="dw_opo", type=float, metavar="RAD_S",
                      help="source bandwidth used by the fit, rad/s")
    p_an.add_argument("--dw-c2", dest="dw_c2", type=float, metavar="RAD_S",
                      help="filter bandwidth used by the fit, rad/s")
    p_an.add_argument("--ratio", type=float,
                      help="filter/source bandwidth ratio (used when --dw-c2 absent)")
    p_an.add_argument("--baseline-min", dest="baseline_min", type=float, metavar="S",
                      help="baseline window lower bound on |tau|, seconds")
    p_an.add_argument("--baseline-max", dest="baseline_max", type=float, metavar="S",
                      help="baseline window upper bound on |tau|, seconds")
    p_an.add_argument("--fit-bandwidths", dest="fit_bandwidths",
                      action=argparse.BooleanOptionalAction,
                      help="also free the two bandwidths in the fit")
    p_an.add_argument("--release-phase", dest="release_phase",
                      action=argparse.BooleanOptionalAction,
                      help="second fit stage with the mean phase freed (default on)")
    p_an.add_argument("--classify-tol", dest="classify_tol", type=float,
                      help="feature-classification tolerance on g2 (default 0.02)")
    p_an.add_argument("--curve-out", dest="curve_out", metavar="CSV",
                      help="also write the normalized curve CSV here")
    p_an.add_argument("--out", help="report JSON path (default: stdout)")

    p_chk = sub.add_parser(
        "check", help="classical-inequality report for a curve CSV")
    p_chk.add_argument("curve", help="curve CSV path (tau,g2[,sigma])")
    p_chk.add_argument("--out", help="report JSON path (default: stdout)")

    return parser


def cmd_curve(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    sp = _spectral(cfg)
    mm = _mix(cfg)
    tau_min = float(cfg["tau_min"])
    tau_max = float(cfg["tau_max"])
    n = int(cfg["tau_points"])
    if n < 2 or not tau_min < tau_max:
        raise ValueError("need tau_min < tau_max and tau_points >= 2")
    grid = np.linspace(tau_min, tau_max, n)
    result = model_curve(mm, sp, grid, tau_unit=_TAU_UNIT_MAP[cfg["tau_unit"]])
    if args.out:
        g2io.save_curve_csv(result, args.out)
    else:
        import io as _io

        buf = _io.StringIO()
        tmp = None
        try:
            import tempfile

            with tempfile.NamedTemporaryFile("r+", suffix=".csv", delete=False) as fh:
                tmp = fh.name
            g2io.save_curve_csv(result, tmp)
            buf.write(open(tmp).read())
        finally:
            if tmp:
                import os

                os.unlink(tmp)
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    hist = simulate_histogram(_mix(cfg), _spectral(cfg), _detection(cfg))
    csv_path, json_path = g2io.save_histogram(hist, args.out)
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    hist = g2io.load_histogram(args.histogram)
    window = None
    if cfg["baseline_min"] is not None or cfg["baseline_max"] is not None:
        if cfg["baseline_min"] is None or cfg["baseline_max"] is None:
            raise ValueError("give both --baseline-min and --baseline-max or neither")
        window = (float(cfg["baseline_min"]), float(cfg["baseline_max"]))
    report = analyze_histogram(
        hist,
        _spectral(cfg),
        baseline_window=window,
        fit_bandwidths=bool(cfg["fit_bandwidths"]),
        release_phase=bool(cfg["release_phase"]),
        classify_tol=float(cfg["classify_tol"]),
    )
    if args.curve_out:
        g2io.save_curve_csv(report.curve, args.curve_out)
    doc = {
        "format_version": g2io.REPORT_FORMAT_VERSION,
        "classification": {
            "feature": report.classification.feature.value,
            "low_confidence": report.classification.low_confidence,
        },
        "fit": g2io.fit_result_to_dict(report.fit),
        "violations": g2io.violation_report_to_dict(report.violations),
        "normalized_curve": args.curve_out,
    }
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK if report.fit.converged else EXIT_FIT


def cmd_check(args: argparse.Namespace) -> int:
    curve = g2io.load_curve_csv(args.curve)
    report = check_schwartz(curve)
    _emit(json.dumps(g2io.violation_report_to_dict(report), indent=2) + "\n", args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "curve": cmd_curve,
        "simulate": cmd_simulate,
        "analyze": cmd_analyze,
        "check": cmd_check,
    }
    try:
        return handlers[args.command](args)
    except NoZeroDelayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
