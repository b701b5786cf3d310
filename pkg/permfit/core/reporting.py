"""
Report emission: test outcomes and sweep results as JSON, CSV and SVG, plus the
run manifest written beside every result.

JSON floats use Python's shortest round-trip repr, so a reloaded outcome compares
equal to the one written. -inf (diverged permuted fits) is written as -Infinity.
"""
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Sequence

import matplotlib
matplotlib.use('Agg')  # Non-interactive backend
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .errors import ReportError
from .models import TestOutcome
from .simstudy import SweepResult

logger = logging.getLogger(__name__)

FORMATS = ("json", "csv", "svg")
MANIFEST_SUFFIX = ".manifest.json"
OBSERVED_MARKER_ID = "marker-observed"
QUANTILE_MARKER_ID = "marker-quantile"

# Fixed salt and no date metadata: identical inputs give byte-identical SVG files
_SVG_RC = {"svg.hashsalt": "permfit", "svg.fonttype": "path"}
_SVG_METADATA = {"Date": None}


def _ensure_parent(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _write_text(path: str, text: str):
    try:
        _ensure_parent(path)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise ReportError(f"Cannot write '{path}': {e}") from e


def _read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise ReportError(f"Cannot read '{path}': {e}") from e
    except json.JSONDecodeError as e:
        raise ReportError(f"'{path}' is not valid JSON: {e}") from e


def round_trip_float(value) -> str:
    """Shortest text that parses back to the same double."""
    return repr(float(value))


def to_json(payload: Any) -> str:
    return json.dumps(payload, indent=2, allow_nan=True) + "\n"


def format_for(path: str, fmt: Optional[str] = None) -> str:
    """Explicit format, or the one implied by the file extension."""
    chosen = (fmt or os.path.splitext(path)[1].lstrip(".")).lower()
    if chosen not in FORMATS:
        raise ValueError(f"Unknown report format '{chosen}', expected one of {FORMATS}.")
    return chosen


# --- Test outcomes ---

def _finite_or(value: float, fallback: float) -> float:
    return value if np.isfinite(value) else fallback


def _histogram_svg(outcome: TestOutcome, path: str, bins: int):
    reference = outcome.reference_array
    finite = reference[np.isfinite(reference)]
    floor = float(finite.min()) if finite.size else 0.0
    r0 = _finite_or(outcome.r0, floor)
    q = _finite_or(outcome.q, floor)

    with matplotlib.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(7, 4))
        if finite.size:
            ax.hist(finite, bins=bins, color="#9e9e9e", edgecolor="white")
        ax.axvline(r0, color="red", linewidth=2, gid=OBSERVED_MARKER_ID)
        ax.axvline(q, color="green", linewidth=2, linestyle="--", gid=QUANTILE_MARKER_ID)
        top = ax.get_ylim()[1]
        ax.text(r0, top * 0.95, f" observed {outcome.r0:.4g}", color="red", va="top")
        ax.text(q, top * 0.85, f" {1 - outcome.config_echo.alpha:.0%} quantile {outcome.q:.4g}",
                color="green", va="top")
        ax.set_xlabel(outcome.statistic_name)
        ax.set_ylabel("permutations")
        ax.set_title(f"{outcome.model_kind}: {outcome.n_reference} permutations, p = {outcome.p_value:.4f}")
        ax.grid(True, alpha=0.3)
        try:
            _ensure_parent(path)
            fig.savefig(path, format="svg", bbox_inches="tight", metadata=_SVG_METADATA)
        except OSError as e:
            raise ReportError(f"Cannot write '{path}': {e}") from e
        finally:
            plt.close(fig)


def emit_report(outcome: TestOutcome, fmt: str, path: str, bins: int = 30) -> str:
    """
    json: the full outcome; csv: the reference sample, one value per row under a
    'statistic' header; svg: histogram of the reference sample with the observed
    statistic and the (1 - alpha) quantile marked.
    """
    fmt = format_for(path, fmt)
    if fmt == "json":
        _write_text(path, to_json(outcome.to_dict()))
    elif fmt == "csv":
        frame = pd.DataFrame({"statistic": outcome.reference_array})
        _write_text(path, frame.to_csv(index=False, float_format=round_trip_float, lineterminator="\n"))
    else:
        _histogram_svg(outcome, path, bins)
    logger.info(f"Wrote {fmt} report to '{path}'.")
    return path


def load_outcome(path: str) -> TestOutcome:
    data = _read_json(path)
    try:
        return TestOutcome.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise ReportError(f"'{path}' does not hold a test outcome: {e}") from e


# --- Sweep results ---

def sweep_payload(results: Sequence[SweepResult], scenario: Optional[Dict[str, Any]] = None,
                  config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    return {
        "scenario": scenario or {},
        "config": config or {},
        "results": [result.to_dict() for result in results],
    }


def load_sweep(path: str) -> List[SweepResult]:
    data = _read_json(path)
    try:
        return [SweepResult.from_dict(item) for item in data["results"]]
    except (KeyError, TypeError, ValueError) as e:
        raise ReportError(f"'{path}' does not hold sweep results: {e}") from e


def _rate_curve_svg(results: Sequence[SweepResult], path: str, alpha: Optional[float]):
    with matplotlib.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(7, 4))
        for result in results:
            ax.plot(result.grid, result.rejection_rate, marker="o", label=result.label, gid=f"curve-{result.label}")
        if alpha is not None:
            ax.axhline(alpha, color="grey", linestyle=":", linewidth=1)
        ax.set_ylim(-0.02, 1.02)
        ax.set_xlabel(results[0].axis)
        ax.set_ylabel("rejection rate")
        ax.set_title(f"Rejection rate over {results[0].replications} replicates")
        ax.legend(loc="lower right")
        ax.grid(True, alpha=0.3)
        try:
            _ensure_parent(path)
            fig.savefig(path, format="svg", bbox_inches="tight", metadata=_SVG_METADATA)
        except OSError as e:
            raise ReportError(f"Cannot write '{path}': {e}") from e
        finally:
            plt.close(fig)


def emit_scatter_svg(result: SweepResult, path: str) -> str:
    """Observed statistic against the permutation quantile for every replicate; points above the diagonal rejected."""
    if not result.per_point_r0:
        raise ReportError(f"Sweep result '{result.label}' carries no per-replicate statistics.")
    with matplotlib.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(5, 5))
        cmap = plt.get_cmap("viridis")
        for g, value in enumerate(result.grid):
            q = np.asarray(result.per_point_q[g], dtype=np.float64)
            r0 = np.asarray(result.per_point_r0[g], dtype=np.float64)
            keep = np.isfinite(q) & np.isfinite(r0)
            ax.scatter(q[keep], r0[keep], s=10, color=cmap(g / max(len(result.grid) - 1, 1)),
                       label=f"{result.axis}={value:g}")
        low, high = ax.get_xlim()
        low, high = min(low, ax.get_ylim()[0]), max(high, ax.get_ylim()[1])
        ax.plot([low, high], [low, high], color="black", linewidth=1, gid="identity")
        ax.set_xlabel("quantile")
        ax.set_ylabel("observed")
        ax.set_title(result.label)
        ax.legend(loc="upper left", fontsize="small")
        try:
            _ensure_parent(path)
            fig.savefig(path, format="svg", bbox_inches="tight", metadata=_SVG_METADATA)
        except OSError as e:
            raise ReportError(f"Cannot write '{path}': {e}") from e
        finally:
            plt.close(fig)
    logger.info(f"Wrote scatter plot to '{path}'.")
    return path


def emit_sweep_report(results: Sequence[SweepResult], fmt: str, path: str,
                      scenario: Optional[Dict[str, Any]] = None,
                      config: Optional[Dict[str, Any]] = None) -> str:
    """json: every result with per-replicate detail; csv: one row per (test, grid value); svg: rate curves."""
    if not results:
        raise ReportError("No sweep results to report.")
    fmt = format_for(path, fmt)
    if fmt == "json":
        _write_text(path, to_json(sweep_payload(results, scenario, config)))
    elif fmt == "csv":
        rows = [{"test": result.label, "grid_value": value, "rejection_rate": rate, "R": result.replications}
                for result in results for value, rate in zip(result.grid, result.rejection_rate)]
        frame = pd.DataFrame(rows, columns=["test", "grid_value", "rejection_rate", "R"])
        _write_text(path, frame.to_csv(index=False, float_format=round_trip_float, lineterminator="\n"))
    else:
        alpha = (config or {}).get("alpha")
        _rate_curve_svg(results, path, alpha)
    logger.info(f"Wrote {fmt} sweep report to '{path}'.")
    return path


# --- Run manifest ---

def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 16), b""):
                digest.update(chunk)
    except OSError as e:
        raise ReportError(f"Cannot read '{path}': {e}") from e
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to re-execute a run: argv, effective configuration, input digests."""
    command: List[str]
    config: Dict[str, Any]
    master_seed: int
    tool_version: str
    cwd: str = ""  # relative paths in command, inputs and outputs resolve against it
    inputs: Dict[str, str] = field(default_factory=dict)  # path -> sha256
    outputs: Dict[str, str] = field(default_factory=dict)  # path -> sha256 at the end of the run
    duration_seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunManifest':
        valid_keys = cls.__annotations__.keys()
        return cls(**{k: v for k, v in data.items() if k in valid_keys})


def manifest_path(output_path: str) -> str:
    return os.path.splitext(output_path)[0] + MANIFEST_SUFFIX


def write_manifest(manifest: RunManifest, output_path: str) -> str:
    path = manifest_path(output_path)
    _write_text(path, to_json(manifest.to_dict()))
    logger.debug(f"Wrote run manifest to '{path}'.")
    return path


def load_manifest(path: str) -> RunManifest:
    data = _read_json(path)
    try:
        return RunManifest.from_dict(data)
    except TypeError as e:
        raise ReportError(f"'{path}' is not a run manifest: {e}") from e


def verify_inputs(manifest: RunManifest):
    """Raises ReportError if any recorded input file is missing or has changed since the run."""
    for path, recorded in manifest.inputs.items():
        current = file_digest(path)
        if current != recorded:
            raise ReportError(f"Input '{path}' changed since the run (sha256 {current[:12]} != {recorded[:12]}).")
