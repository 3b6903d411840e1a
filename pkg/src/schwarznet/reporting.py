"""Artifact emission: delimited outputs, run summary, and comparisons."""

import csv
from pathlib import Path

import numpy as np

from .config import RunConfig, materialize, to_ini
from .errors import FormatError
from .geometry import subdomain_grid
from .metrics import ErrorReport, compute_errors
from .orchestrator import RunResult, run_schwarz

REPORT_COLUMNS = ("outer_iteration", "subdomain", "objective", "boundary_constraint",
                  "interface_constraint", "alpha", "rel_l2", "max_err")
FIELDS_COLUMNS = ("x", "y", "subdomain", "u_exact", "u_pred", "abs_err")


def _e(value) -> str:
    return format(float(value), ".17e")


def write_report_csv(path, history):
    """One row per (outer iteration, subdomain); nan marks absent groups."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for rec in history:
            for sid in sorted(rec.objective):
                writer.writerow([
                    rec.iteration, sid, _e(rec.objective[sid]), _e(rec.boundary[sid]),
                    _e(rec.interface[sid]), _e(rec.alpha[sid]), _e(rec.rel_l2[sid]),
                    _e(rec.max_err[sid]),
                ])


def write_fields_csv(path, partition, problem, trainers, resolution):
    """Evaluation-grid values; the summary metrics are recomputable from it."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIELDS_COLUMNS)
        for sub in partition.subdomains:
            pts = subdomain_grid(sub, resolution)
            u_exact = problem.exact(pts)
            u_pred = trainers[sub.id].predict(pts)
            for (x, y), ue, up in zip(pts, u_exact, u_pred):
                writer.writerow([_e(x), _e(y), sub.id, _e(ue), _e(up), _e(abs(up - ue))])


def write_summary(path, cfg: RunConfig, result: RunResult, report: ErrorReport):
    trainers = result.trainers
    lines = [
        f"experiment: {cfg.problem}",
        f"equation: {cfg.kind}" + (f" (wavenumber {cfg.wavenumber})"
                                   if cfg.kind == "helmholtz" else ""),
        f"layout: {cfg.layout}" + (f" {cfg.nx}x{cfg.ny}" if cfg.layout == "cartesian" else ""),
        f"seed: {cfg.seed}",
        f"outer iterations completed: {len(result.history)} of {cfg.outer_iterations}",
        f"wall time: {result.wall_seconds:.2f} s",
    ]
    if result.diverged:
        err = result.failure
        lines.append(f"status: DIVERGED at outer iteration {err.outer_iteration} "
                     f"(subdomain {err.subdomain}, epoch {err.epoch})")
    else:
        lines.append("status: completed")
    lines.append("")
    lines.append(f"errors on the {cfg.error_resolution}x{cfg.error_resolution} evaluation grid:")
    for sid in sorted(report.rel_l2):
        alpha = (trainers[sid].robin_weight if trainers[sid].interface_groups()
                 else float("nan"))
        lines.append(f"  subdomain {sid}: rel_l2 = {report.rel_l2[sid]:.15e}  "
                     f"max_err = {report.max_err[sid]:.15e}  alpha = {alpha:.6f}")
    lines.append(f"max across subdomains: rel_l2 = {max(report.rel_l2.values()):.15e}  "
                 f"max_err = {max(report.max_err.values()):.15e}")
    lines.append(f"pooled global: rel_l2 = {report.global_rel_l2:.15e}  "
                 f"max_err = {report.global_max:.15e}")
    Path(path).write_text("\n".join(lines) + "\n")


def run_experiment(cfg: RunConfig) -> RunResult:
    """Execute a configured run and write every artifact to cfg.out_dir.

    Artifacts are flushed even when the run diverges, so a partial history
    is always inspectable.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    partition, problem, trainers, schedule = materialize(cfg)
    result = run_schwarz(partition, problem, trainers, schedule)
    (out / "config.ini").write_text(to_ini(cfg))
    write_report_csv(out / "report.csv", result.history)
    write_fields_csv(out / "fields.csv", partition, problem, trainers, cfg.error_resolution)
    report = compute_errors(partition, problem.exact,
                            {sid: tr.predict for sid, tr in trainers.items()},
                            resolution=cfg.error_resolution)
    write_summary(out / "summary.txt", cfg, result, report)
    from . import figures

    figures.render_all(out / "figures", partition, problem, trainers, result.history,
                       resolution=cfg.error_resolution)
    return result


def _read_report(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or ()
            for col in REPORT_COLUMNS:
                if col not in header:
                    raise FormatError(f"report {path} is missing column {col!r}")
            rows = list(reader)
    except OSError as err:
        raise FormatError(f"cannot read report {path}: {err}") from None
    if not rows:
        raise FormatError(f"report {path} has no data rows")
    return rows


def _final_max_rel_l2(rows):
    final = max(int(r["outer_iteration"]) for r in rows)
    vals = [float(r["rel_l2"]) for r in rows if int(r["outer_iteration"]) == final]
    return final, max(vals)


def compare_reports(path_a, path_b, tolerance=5e-3) -> str:
    """Side-by-side final max-error comparison with a winner flag."""
    lines = []
    finals = {}
    for label, path in (("A", path_a), ("B", path_b)):
        rows = _read_report(path)
        final, worst = _final_max_rel_l2(rows)
        finals[label] = worst
        verdict = "PASS" if worst <= tolerance else "FAIL"
        lines.append(f"report {label}: {path}")
        lines.append(f"  final outer iteration: {final}")
        lines.append(f"  max rel_l2 across subdomains: {worst:.6e} -> {verdict} "
                     f"(tolerance {tolerance:.1e})")
    if finals["A"] < finals["B"]:
        lines.append("winner: report A")
    elif finals["B"] < finals["A"]:
        lines.append("winner: report B")
    else:
        lines.append("winner: tie")
    return "\n".join(lines)
