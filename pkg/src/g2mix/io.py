"""File formats: curve CSV, histogram CSV + JSON sidecar, state and report JSON.

All formats carry a format_version and round-trip without loss: floats are
written with shortest round-trip representation (repr), counts as integers.
No timestamps or host entropy appear in any output, so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .analysis import FitResult
from .correlation import CorrelationCurve
from .fock import FockState
from .measurement import CoincidenceHistogram, DetectionConfig
from .nonclassical import InequalityCheck, ViolationReport

CURVE_FORMAT_VERSION = 1
HISTOGRAM_FORMAT_VERSION = 1
REPORT_FORMAT_VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


# -- correlation curve CSV ---------------------------------------------------

def curve_csv_text(curve: CorrelationCurve) -> str:
    """`tau,g2[,sigma]` rows with unit and version comment lines."""
    lines = [
        f"# format_version: {CURVE_FORMAT_VERSION}",
        f"# tau_unit: {curve.tau_unit}",
    ]
    if curve.sigma is None:
        lines.append("tau,g2")
        for t, g in zip(curve.tau, curve.g2):
            lines.append(f"{_fmt(t)},{_fmt(g)}")
    else:
        lines.append("tau,g2,sigma")
        for t, g, s in zip(curve.tau, curve.g2, curve.sigma):
            lines.append(f"{_fmt(t)},{_fmt(g)},{_fmt(s)}")
    return "\n".join(lines) + "\n"


def save_curve_csv(curve: CorrelationCurve, path) -> None:
    Path(path).write_text(curve_csv_text(curve))


def load_curve_csv(path) -> CorrelationCurve:
    """Read a curve CSV written by save_curve_csv."""
    tau_unit = "s"
    header = None
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.startswith("tau_unit:"):
                tau_unit = body.split(":", 1)[1].strip()
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
            if header not in (["tau", "g2"], ["tau", "g2", "sigma"]):
                raise ValueError(f"unexpected curve CSV header {header!r} in {path}")
            continue
        rows.append([float(c) for c in line.split(",")])
    if header is None or not rows:
        raise ValueError(f"no data rows in curve CSV {path}")
    data = np.asarray(rows, dtype=float)
    if data.shape[1] != len(header):
        raise ValueError(f"row width does not match header in {path}")
    sigma = data[:, 2] if len(header) == 3 else None
    return CorrelationCurve(tau=data[:, 0], g2=data[:, 1], sigma=sigma,
                            tau_unit=tau_unit)


# -- coincidence histogram CSV + JSON sidecar --------------------------------

def histogram_paths(prefix) -> tuple[Path, Path]:
    """CSV and JSON sidecar paths for a histogram file prefix."""
    prefix = Path(prefix)
    if prefix.suffix in (".csv", ".json"):
        prefix = prefix.with_suffix("")
    return prefix.with_suffix(".csv"), prefix.with_suffix(".json")


def save_histogram(hist: CoincidenceHistogram, prefix) -> tuple[Path, Path]:
    """Write counts CSV plus a JSON sidecar with config and run phases."""
    csv_path, json_path = histogram_paths(prefix)
    lines = [f"# format_version: {HISTOGRAM_FORMAT_VERSION}", "bin_center_s,counts"]
    for c, n in zip(hist.bin_centers, hist.counts):
        lines.append(f"{_fmt(c)},{int(n)}")
    csv_path.write_text("\n".join(lines) + "\n")

    sidecar = {
        "format_version": HISTOGRAM_FORMAT_VERSION,
        "config": dataclasses.asdict(hist.config),
        "per_run_phases": [float(p) for p in hist.per_run_phases],
        "total_starts": int(hist.total_starts),
    }
    json_path.write_text(json.dumps(sidecar, indent=2) + "\n")
    return csv_path, json_path


def load_histogram(prefix) -> CoincidenceHistogram:
    """Rebuild a histogram from its CSV and JSON sidecar."""
    csv_path, json_path = histogram_paths(prefix)
    sidecar = json.loads(json_path.read_text())
    if "config" not in sidecar or "per_run_phases" not in sidecar:
        raise ValueError(f"histogram sidecar {json_path} is missing required keys")
    config = DetectionConfig(**sidecar["config"])

    header_seen = False
    counts = []
    centers = []
    for raw in csv_path.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if [c.strip() for c in line.split(",")] != ["bin_center_s", "counts"]:
                raise ValueError(f"unexpected histogram CSV header in {csv_path}")
            header_seen = True
            continue
        c, n = line.split(",")
        centers.append(float(c))
        counts.append(int(n))
    if not counts:
        raise ValueError(f"no data rows in histogram CSV {csv_path}")
    if not np.allclose(centers, config.bin_centers, rtol=0, atol=1e-15):
        raise ValueError(f"bin centers in {csv_path} do not match the sidecar config")
    return CoincidenceHistogram(
        counts=np.asarray(counts, dtype=np.int64),
        config=config,
        per_run_phases=np.asarray(sidecar["per_run_phases"], dtype=float),
        total_starts=int(sidecar.get("total_starts", 0)),
    )


# -- Fock state JSON ----------------------------------------------------------

def fock_state_to_dict(state: FockState) -> dict:
    return {
        "cutoff": state.cutoff,
        "re": [float(x) for x in state.amplitudes.real],
        "im": [float(x) for x in state.amplitudes.imag],
        "leaked_norm": float(state.leaked_norm),
    }


def fock_state_from_dict(data: dict) -> FockState:
    amps = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    return FockState(amplitudes=amps, cutoff=int(data["cutoff"]),
                     leaked_norm=float(data.get("leaked_norm", 0.0)))


# -- report JSON --------------------------------------------------------------

def _inequality_to_dict(check: InequalityCheck) -> dict:
    return {
        "violated": check.violated,
        "margin": check.margin,
        "witness_tau": check.witness_tau,
        "z_score": check.z_score,
    }


def violation_report_to_dict(report: ViolationReport) -> dict:
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "zero_tau": report.zero_tau,
        "zero_is_nearest_bin": report.zero_is_nearest_bin,
        "ineq_a": _inequality_to_dict(report.ineq_a),
        "ineq_b": _inequality_to_dict(report.ineq_b),
        "ineq_c": _inequality_to_dict(report.ineq_c),
    }


def fit_result_to_dict(fit: FitResult) -> dict:
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "converged": fit.converged,
        "n_iter": fit.n_iter,
        "chi2": fit.chi2,
        "chi2_dof": fit.chi2_dof,
        "n_points": fit.n_points,
        "free": list(fit.free),
        "params": dict(fit.params),
        "errors": dict(fit.errors) if fit.errors is not None else None,
    }
