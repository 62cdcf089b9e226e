"""Versioned report document: build, atomic write, load, re-derive, export.

The report is self-contained: the derived sections (series, plateaus, fit)
are computed from the serialized per-run values, so re-deriving them from a
parsed report reproduces them exactly.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__, analysis
from .config import BenchConfig, ModelProfile, config_to_mapping, resolve_profile
from .errors import SchemaMismatch

SCHEMA_VERSION = 1

# Load used for the size-scaling fit and the model-comparison export when
# every model's sweep includes it; otherwise the largest common load.
PREFERRED_REFERENCE_LOAD = 100


def serialize_run(artifact) -> dict:
    result: analysis.RunResult = artifact.result
    spec = result.spec
    records = result.records
    first_send = min(r.send_time for r in records)
    last_send = max(r.send_time for r in records)
    last_completion = max(r.completion_time for r in records)
    comparable = analysis.comparable_sources(result.energy.per_source)
    comparable_joules = sum(result.energy.per_source[sid] for sid in comparable)
    return {
        "run_id": spec.run_id,
        "model": spec.model,
        "request_count": spec.request_count,
        "repeat_index": spec.repeat_index,
        "dispatch": {"mode": spec.dispatch.mode.value, "rate": spec.dispatch.rate},
        "warmup": {
            "requested": result.warmup.requested,
            "failures": result.warmup.failures,
            "started_at": result.warmup.started_at,
            "finished_at": result.warmup.finished_at,
        },
        "window": {
            "start": result.window.start,
            "end": result.window.end,
            "duration_s": result.window.duration,
        },
        "timing": {
            "first_send": first_send,
            "last_send": last_send,
            "last_completion": last_completion,
            "submission_spread_s": last_send - first_send,
            "makespan_s": last_completion - first_send,
        },
        "energy": {
            "per_source_joules": dict(result.energy.per_source),
            "total_joules": result.energy.total,
            "comparable_sources": comparable,
            "comparable_joules": comparable_joules,
        },
        "energy_per_request_joules": comparable_joules / spec.request_count,
        "requests": {
            "attempted": len(records),
            "ok": len(records) - result.failure_count,
            "failed": result.failure_count,
            "by_status": analysis.status_counts(records),
        },
        "emissions": {
            "energy_kwh": result.emissions.energy_kwh,
            "grams_co2eq": result.emissions.grams_co2eq,
        },
        "records": [
            {
                "prompt_id": r.prompt_id,
                "send_time": r.send_time,
                "completion_time": r.completion_time,
                "output_tokens": r.output_token_count,
                "status": r.status.value,
                "http_status": r.http_status,
            }
            for r in records
        ],
    }


def derive_analysis(runs: Sequence[dict], models_order: Sequence[str], profiles: dict[str, ModelProfile], plateau_epsilon: float) -> dict:
    """Series, plateaus, reference load, and size fit from serialized runs."""
    series_section = []
    series_by_model: dict[str, analysis.SweepSeries] = {}
    for model in models_order:
        model_runs = [r for r in runs if r["model"] == model]
        if not model_runs:
            continue
        values_by_load: dict[int, list[tuple[int, float]]] = {}
        for run in model_runs:
            values_by_load.setdefault(run["request_count"], []).append(
                (run["repeat_index"], run["energy_per_request_joules"])
            )
        ordered = {
            load: [value for _, value in sorted(pairs)]
            for load, pairs in values_by_load.items()
        }
        series = analysis.series_from_values(model, ordered)
        series_by_model[model] = series
        if len(series.points) >= 2:
            plateau = analysis.detect_plateau(series, plateau_epsilon)
            plateau_doc = {"found": plateau.found, "load": plateau.load, "value_joules": plateau.value}
        else:
            plateau_doc = {"found": False, "load": None, "value_joules": None}
        series_section.append(
            {
                "model": model,
                "points": [
                    {
                        "load": p.load,
                        "mean_joules_per_request": p.mean,
                        "stddev_joules": p.stddev,
                        "repeats": p.repeats,
                    }
                    for p in series.points
                ],
                "plateau": plateau_doc,
            }
        )

    reference_load = _reference_load(series_by_model.values())
    fit_doc = _fit_section(series_by_model, models_order, profiles, reference_load)
    return {
        "plateau_epsilon": plateau_epsilon,
        "reference_load": reference_load,
        "series": series_section,
        "fit": fit_doc,
    }


def _reference_load(all_series: Iterable[analysis.SweepSeries]) -> int | None:
    load_sets = [{p.load for p in s.points} for s in all_series]
    if not load_sets:
        return None
    common = set.intersection(*load_sets)
    if not common:
        return None
    if PREFERRED_REFERENCE_LOAD in common:
        return PREFERRED_REFERENCE_LOAD
    return max(common)


def _fit_section(series_by_model: dict[str, analysis.SweepSeries], models_order: Sequence[str], profiles: dict[str, ModelProfile], reference_load: int | None) -> dict:
    points_doc = []
    fit_points = []
    if reference_load is not None:
        for model in models_order:
            series = series_by_model.get(model)
            if series is None:
                continue
            point = next((p for p in series.points if p.load == reference_load), None)
            profile = resolve_profile(model, profiles)
            if point is None or profile is None:
                continue
            points_doc.append(
                {"model": model, "params": profile.params, "joules_per_request": point.mean}
            )
            fit_points.append((float(profile.params), point.mean))
    doc: dict = {"computed": False, "reason": None, "points": points_doc,
                 "slope": None, "intercept": None, "r_squared": None}
    if reference_load is None:
        doc["reason"] = "no load common to every model's sweep"
        return doc
    if len({p for p, _ in fit_points}) < 2:
        doc["reason"] = "fewer than two models with known size profiles"
        return doc
    fit = analysis.fit_params_vs_energy(fit_points)
    doc.update(computed=True, slope=fit.slope, intercept=fit.intercept, r_squared=fit.r_squared)
    return doc


def build_report(config: BenchConfig, artifacts: Sequence, *, plateau_epsilon: float, started_utc: str, finished_utc: str, duration_s: float) -> dict:
    runs = [serialize_run(a) for a in artifacts]
    profiles = {p.name: p for p in config.model_profiles}
    failed_total = sum(r["requests"]["failed"] for r in runs)
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "joulebench", "version": __version__},
        "config": config_to_mapping(config),
        "runs": runs,
        "analysis": derive_analysis(runs, config.models, profiles, plateau_epsilon),
        "meta": {
            "started_utc": started_utc,
            "finished_utc": finished_utc,
            "duration_s": duration_s,
            "total_runs": len(runs),
            "failed_requests_total": failed_total,
            "runs_with_failures": [r["run_id"] for r in runs if r["requests"]["failed"]],
        },
    }


def rederive(report: dict) -> dict:
    """Recompute the analysis section from the report's own runs."""
    profiles = {
        name: ModelProfile(name, spec["params"], spec["layers"])
        for name, spec in report["config"].get("model_profiles", {}).items()
    }
    return derive_analysis(
        report["runs"],
        report["config"]["models"],
        profiles,
        report["analysis"]["plateau_epsilon"],
    )


def write_report(report: dict, path: str | Path) -> None:
    """Atomic write: the target either has the old content or the full report."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def load_report(path: str | Path) -> dict:
    with open(path) as fh:
        report = json.load(fh)
    version = report.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaMismatch(version, SCHEMA_VERSION)
    return report


def emit_plot_data(report: dict, out_dir: str | Path) -> list[Path]:
    """Write the per-figure delimited data files; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    section = report["analysis"]
    written = []

    sweep_path = out / "load_sweep.csv"
    with open(sweep_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "load", "mean_joules_per_request", "stddev_joules", "repeats", "is_plateau"])
        for series in section["series"]:
            plateau = series["plateau"]
            for point in series["points"]:
                writer.writerow(
                    [
                        series["model"],
                        point["load"],
                        repr(point["mean_joules_per_request"]),
                        repr(point["stddev_joules"]),
                        point["repeats"],
                        plateau["found"] and plateau["load"] == point["load"],
                    ]
                )
    written.append(sweep_path)

    params_path = out / "params_energy.csv"
    with open(params_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "params", "joules_per_request"])
        for point in section["fit"]["points"]:
            writer.writerow([point["model"], point["params"], repr(point["joules_per_request"])])
    written.append(params_path)

    comparison_path = out / "model_comparison.csv"
    with open(comparison_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "mean_joules_per_request", "stddev_joules", "repeats"])
        reference = section["reference_load"]
        for series in section["series"]:
            point = next((p for p in series["points"] if p["load"] == reference), None)
            if point is not None:
                writer.writerow(
                    [
                        series["model"],
                        repr(point["mean_joules_per_request"]),
                        repr(point["stddev_joules"]),
                        point["repeats"],
                    ]
                )
    written.append(comparison_path)
    return written


def render_summary(report: dict) -> str:
    lines = []
    meta = report["meta"]
    tool = report["tool"]
    lines.append(f"{tool['name']} {tool['version']} report: {meta['total_runs']} runs, "
                 f"{meta['duration_s']:.1f}s, {meta['failed_requests_total']} failed requests")
    total_joules = sum(r["energy"]["total_joules"] for r in report["runs"])
    total_grams = sum(r["emissions"]["grams_co2eq"] for r in report["runs"])
    lines.append(f"total measured energy: {total_joules:.1f} J ({total_joules / 3.6e6:.6f} kWh), "
                 f"{total_grams:.4f} g CO2eq")
    for series in report["analysis"]["series"]:
        lines.append(f"model {series['model']}:")
        lines.append("  load    J/request      stddev  repeats")
        for p in series["points"]:
            lines.append(
                f"  {p['load']:>4}  {p['mean_joules_per_request']:>11.4f}  {p['stddev_joules']:>10.4f}  {p['repeats']:>7}"
            )
        plateau = series["plateau"]
        if plateau["found"]:
            lines.append(f"  plateau from load {plateau['load']} at {plateau['value_joules']:.4f} J/request")
        else:
            lines.append("  no plateau detected")
    fit = report["analysis"]["fit"]
    if fit["computed"]:
        lines.append(
            f"size fit: slope {fit['slope']:.3e} J/param, intercept {fit['intercept']:.4f} J, "
            f"r^2 {fit['r_squared']:.4f} (load {report['analysis']['reference_load']})"
        )
    elif fit["reason"]:
        lines.append(f"size fit: not computed ({fit['reason']})")
    return "\n".join(lines)
