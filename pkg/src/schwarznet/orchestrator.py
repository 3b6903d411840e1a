"""Alternating outer loop: local training blocks plus interface exchange.

Each outer iteration trains every subdomain against the traces received at
the end of the previous iteration, then swaps fresh value/flux traces across
every interface and resets the interface dual state.  Subdomains never share
parameters; the traces are the only coupling.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .alm import SubdomainTrainer, TrainerSettings
from .errors import ConfigError, DivergenceError, ProtocolError
from .geometry import Partition, sample_points
from .metrics import compute_errors
from .nets import Mlp
from .problems import ProblemSpec


@dataclass(frozen=True)
class ScheduleSettings:
    outer_iterations: int = 30
    local_epochs: int = 500
    reset_scope: str = "all"        # interface dual state dropped per exchange
    workers: str = "serial"         # serial | thread
    error_resolution: int = 101


@dataclass(frozen=True)
class InterfaceTrace:
    interface_id: int
    producer: int
    values: np.ndarray
    normal_flux: np.ndarray         # along the receiver's outward normal
    iteration: int


@dataclass
class OuterRecord:
    """Per-outer-iteration snapshot used for reporting."""

    iteration: int
    objective: dict
    loss: dict
    boundary: dict
    interface: dict
    measurement: dict
    alpha: dict
    boundary_dual: dict
    mismatch: dict                  # interface id -> mean |u_i - u_j|
    rel_l2: dict
    max_err: dict
    seconds: float


@dataclass
class RunResult:
    trainers: dict
    history: list
    partition: Partition
    problem: ProblemSpec
    diverged: bool = False
    failure: DivergenceError | None = None
    wall_seconds: float = 0.0


def build_trainers(partition, problem, counts, widths, seed, settings: TrainerSettings):
    """One trainer per subdomain with seeded nets and shared interface points."""
    point_sets = sample_points(partition, counts, seed=seed)
    trainers = {}
    for sub in partition.subdomains:
        net = Mlp.glorot(widths, np.random.default_rng([seed, 7, sub.id]))
        trainers[sub.id] = SubdomainTrainer(sub.id, net, problem, point_sets[sub.id], settings)
    return trainers


def interface_mismatch(partition, trainers):
    """Mean absolute solution gap across each interface's shared points."""
    out = {}
    for iface in partition.interfaces:
        i, j = iface.pair
        g = next(gr for gr in trainers[i].interface_groups() if gr.interface_id == iface.id)
        ui = trainers[i].predict(g.points)
        uj = trainers[j].predict(g.points)
        out[iface.id] = float(np.mean(np.abs(ui - uj)))
    return out


def collect_traces(trainers, iteration):
    traces = []
    for tr in trainers.values():
        for g in tr.interface_groups():
            values, flux = tr.produce_trace(g.interface_id)
            traces.append(InterfaceTrace(g.interface_id, tr.sid, values, flux, iteration))
    return traces


def deliver_traces(partition, trainers, traces, expected_iteration):
    by_id = {iface.id: iface for iface in partition.interfaces}
    for trace in traces:
        if trace.iteration != expected_iteration:
            raise ProtocolError(
                f"trace for interface {trace.interface_id} carries iteration "
                f"{trace.iteration}, expected {expected_iteration}")
        pair = by_id[trace.interface_id].pair
        receiver = pair[1] if trace.producer == pair[0] else pair[0]
        trainers[receiver].set_trace(
            trace.interface_id, trace.values, trace.normal_flux, trace.iteration)


def _check_freshness(trainers, iteration):
    expected = iteration - 1
    for tr in trainers.values():
        for g in tr.interface_groups():
            if g.trace_iteration != expected:
                raise ProtocolError(
                    f"subdomain {tr.sid} holds a trace for interface "
                    f"{g.interface_id} from iteration {g.trace_iteration}; "
                    f"iteration {iteration} requires {expected}")


def _train_all(trainers, epochs, workers):
    if workers == "serial":
        for sid in sorted(trainers):
            trainers[sid].train_local(epochs)
    else:
        with ThreadPoolExecutor(max_workers=len(trainers)) as pool:
            futures = [pool.submit(trainers[sid].train_local, epochs)
                       for sid in sorted(trainers)]
            for fut in futures:
                fut.result()


def _record(partition, problem, trainers, iteration, resolution, seconds):
    objective, loss, boundary, interface, measurement = {}, {}, {}, {}, {}
    alpha, boundary_dual = {}, {}
    for sid, tr in trainers.items():
        parts = tr.history[-1] if tr.history else {}
        objective[sid] = float(parts.get("objective", np.nan))
        loss[sid] = float(parts.get("loss", np.nan))
        boundary[sid] = float(parts.get("boundary", np.nan))
        interface[sid] = float(parts.get("interface", np.nan))
        measurement[sid] = float(parts.get("measurement", np.nan))
        alpha[sid] = tr.robin_weight if tr.interface_groups() else float("nan")
        bg = [g for g in tr.groups if g.role == "boundary"]
        boundary_dual[sid] = (
            float(np.mean([np.mean(g.duals.multipliers) for g in bg])) if bg else float("nan"))
    mismatch = interface_mismatch(partition, trainers)
    report = compute_errors(
        partition, problem.exact, {sid: tr.predict for sid, tr in trainers.items()},
        resolution=resolution)
    return OuterRecord(
        iteration=iteration, objective=objective, loss=loss, boundary=boundary,
        interface=interface, measurement=measurement, alpha=alpha,
        boundary_dual=boundary_dual, mismatch=mismatch,
        rel_l2=dict(report.rel_l2), max_err=dict(report.max_err), seconds=seconds)


def run_schwarz(partition, problem, trainers, schedule: ScheduleSettings) -> RunResult:
    """Drive the outer iterations; on divergence return the partial history."""
    if schedule.workers not in ("serial", "thread"):
        raise ConfigError(f"unknown workers mode {schedule.workers!r}")
    if schedule.reset_scope not in ("all", "multipliers"):
        raise ConfigError(f"unknown reset scope {schedule.reset_scope!r}")
    result = RunResult(trainers=trainers, history=[], partition=partition, problem=problem)
    start = time.perf_counter()
    for t in range(schedule.outer_iterations):
        _check_freshness(trainers, t)
        tick = time.perf_counter()
        try:
            _train_all(trainers, schedule.local_epochs, schedule.workers)
        except DivergenceError as err:
            err.outer_iteration = t
            result.diverged = True
            result.failure = err
            break
        for tr in trainers.values():
            tr.finalize_duals()
        result.history.append(_record(
            partition, problem, trainers, t, schedule.error_resolution,
            time.perf_counter() - tick))
        traces = collect_traces(trainers, t)
        deliver_traces(partition, trainers, traces, expected_iteration=t)
        for tr in trainers.values():
            if tr.settings.robin_mode == "adaptive":
                if tr.settings.robin_update == "balance":
                    tr.update_robin_balance()
                elif tr.settings.robin_update == "closed_form":
                    tr.update_robin_closed_form()
            tr.reset_interface_duals(schedule.reset_scope)
    result.wall_seconds = time.perf_counter() - start
    return result
