"""End-to-end acceptance checks for the shipped solver.

Each test states its tolerance inline, measures the quantity on a real run,
and prints one PASS/FAIL line with the measured value (visible with -rA/-s,
and in the failure report otherwise).  Multi-minute solver runs carry the
`desk` marker and are shared through session-scoped fixtures so that every
configuration trains exactly once; `pytest -m "not desk"` keeps the quick
subset, including one full reduced-budget solve, under a few minutes.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from schwarznet import (
    DualState,
    Mlp,
    apply_overrides,
    compute_errors,
    default_config,
    dual_update,
    load_config,
    loss_backward,
    materialize,
    run_experiment,
    run_schwarz,
)
from schwarznet.geometry import (
    PointCounts,
    complex_interface_curve,
    complex_outer_curve,
    make_polar_partition,
    sample_points,
)

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
SEEDS = (0, 1, 2)

desk = pytest.mark.desk


def _note(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


def _max_rel(result):
    """Largest per-subdomain relative L2 error at the final outer iteration."""
    return max(result.history[-1].rel_l2.values())


def _assert_protocol(result, schedule_iterations, reset_scope="all"):
    """Invariants every completed run must satisfy.

    - boundary multiplier means never decrease (the dual step only adds
      non-negative amounts, and boundary groups are never reset);
    - every interface group ends holding a trace from the final exchange;
    - after the final exchange the interface dual state matches the
      configured reset scope.
    """
    assert not result.diverged, f"run diverged: {result.failure}"
    series = {}
    for rec in result.history:
        for sid, lam in rec.boundary_dual.items():
            if np.isfinite(lam):
                series.setdefault(sid, []).append(lam)
    for sid, vals in series.items():
        diffs = np.diff(vals)
        assert np.all(diffs >= -1e-12), f"boundary multiplier dipped on subdomain {sid}"
    for sid, tr in result.trainers.items():
        for g in tr.groups:
            if g.role != "interface":
                continue
            assert g.trace_iteration == schedule_iterations - 1, (
                f"stale trace on subdomain {sid}: {g.trace_iteration}"
            )
            assert np.all(g.duals.multipliers == 1.0)
            if reset_scope == "all":
                assert np.all(g.duals.penalties == 1.0)
                assert np.all(g.duals.sq_avg == 0.0)


# --------------------------------------------------------------------------
# independent finite-difference oracles for the gradient checks


def _ref_value(weights, biases, pts):
    a = np.asarray(pts, dtype=float)
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.tanh(a @ w.T + b)
    return (a @ weights[-1].T + biases[-1])[:, 0]


def _fd_jet(weights, biases, p, h=1e-4):
    x, y = p

    def u(px, py):
        return _ref_value(weights, biases, np.array([[px, py]]))[0]

    u0 = u(x, y)
    gx = (u(x + h, y) - u(x - h, y)) / (2 * h)
    gy = (u(x, y + h) - u(x, y - h)) / (2 * h)
    hxx = (u(x + h, y) - 2 * u0 + u(x - h, y)) / h**2
    hyy = (u(x, y + h) - 2 * u0 + u(x, y - h)) / h**2
    hxy = (u(x + h, y + h) - u(x + h, y - h) - u(x - h, y + h) + u(x - h, y - h)) / (
        4 * h**2
    )
    return u0, np.array([gx, gy]), np.array([hxx, hyy, hxy])


def _rel(a, b, scale):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), scale)


def _mixed_loss(normals, targets):
    # touches value, normal derivative, and Laplacian so every adjoint path
    # through the backward pass carries signal
    def fn(jets):
        n = len(jets.value)
        q = np.sum(jets.grad * normals, axis=1)
        lap = jets.hess[:, 0] + jets.hess[:, 1]
        r = jets.value + 0.5 * q + 0.25 * lap - targets
        loss = float(np.mean(r**2))
        vbar = 2.0 * r / n
        gbar = (2.0 * r / n * 0.5)[:, None] * normals
        hbar = np.zeros_like(jets.hess)
        hbar[:, 0] = 2.0 * r / n * 0.25
        hbar[:, 1] = 2.0 * r / n * 0.25
        return loss, (vbar, gbar, hbar)

    return fn


def test_gradient_fidelity():
    """20 seed-fixed networks: jets vs. central differences (rel < 1e-6) and
    backward parameter gradients vs. directional differences (rel < 1e-5),
    all inside 10 s."""
    t0 = time.perf_counter()
    worst_jet = 0.0
    worst_par = 0.0
    for seed in range(20):
        rng = np.random.default_rng([seed, 17])
        net = Mlp.glorot((2, 12, 12, 1), seed=seed)
        pts = rng.uniform(-0.9, 0.9, size=(3, 2))
        jets = net.jet_batch(pts)
        fd = [_fd_jet(net.weights, net.biases, p) for p in pts]
        g_scale = max(max(np.abs(f[1]).max() for f in fd), 1e-3)
        h_scale = max(max(np.abs(f[2]).max() for f in fd), 1e-3)
        for i, (u0, g, h) in enumerate(fd):
            worst_jet = max(
                worst_jet,
                float(_rel(jets.value[i], u0, 1e-3)),
                float(np.max(_rel(jets.grad[i], g, g_scale))),
                float(np.max(_rel(jets.hess[i], h, h_scale))),
            )

        normals = rng.normal(size=(6, 2))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        loss_fn = _mixed_loss(normals, rng.normal(size=6))
        lpts = rng.uniform(-0.9, 0.9, size=(6, 2))
        loss0, grad = loss_backward(net, lpts, loss_fn)
        dw = [rng.normal(size=w.shape) for w in net.weights]
        db = [rng.normal(size=b.shape) for b in net.biases]
        analytic = sum(float(np.sum(gw * d)) for gw, d in zip(grad.weights, dw))
        analytic += sum(float(np.sum(gb * d)) for gb, d in zip(grad.biases, db))
        h = 1e-6

        def loss_at(t):
            ws = [w + t * d for w, d in zip(net.weights, dw)]
            bs = [b + t * d for b, d in zip(net.biases, db)]
            shifted = Mlp(ws, bs)
            return loss_fn(shifted.jet_batch(lpts))[0]

        fd_dir = (loss_at(h) - loss_at(-h)) / (2 * h)
        worst_par = max(worst_par, float(_rel(analytic, fd_dir, 1e-3)))
    wall = time.perf_counter() - t0
    _note(
        "gradient-fidelity",
        worst_jet < 1e-6 and worst_par < 1e-5 and wall < 10.0,
        f"jet rel {worst_jet:.2e} (<1e-6), param rel {worst_par:.2e} (<1e-5), "
        f"{wall:.1f}s (<10s)",
    )


def test_dual_step_oracle():
    """Hand-computed dual step: from (avg=0, multiplier=1) with residual 0.5
    and default rates, one update gives avg 0.0025, penalty 0.2,
    multiplier 1.1.  Exact to 1e-12 with the stabilizer off; the default
    stabilizer (1e-8) perturbs the penalty only in the 7th decimal."""
    exact = DualState.fresh(1, stabilizer=0.0)
    dual_update(exact, np.array([0.5]))
    errs = (
        abs(exact.sq_avg[0] - 0.0025),
        abs(exact.penalties[0] - 0.2),
        abs(exact.multipliers[0] - 1.1),
    )
    stock = DualState.fresh(1)
    dual_update(stock, np.array([0.5]))
    stock_errs = (
        abs(stock.sq_avg[0] - 0.0025),
        abs(stock.penalties[0] - 0.2),
        abs(stock.multipliers[0] - 1.1),
    )
    _note(
        "dual-step-oracle",
        max(errs) <= 1e-12 and max(stock_errs) <= 1e-7,
        f"stabilizer-off errors {max(errs):.2e} (<=1e-12), "
        f"default-stabilizer errors {max(stock_errs):.2e} (<=1e-7)",
    )


def test_single_domain_baseline():
    """One network on the unit square, 5000 epochs: relative L2 error below
    1e-2 in under five minutes."""
    cfg = default_config("single_domain")
    partition, problem, trainers, schedule = materialize(cfg)
    result = run_schwarz(partition, problem, trainers, schedule)
    rel = _max_rel(result)
    _assert_protocol(result, schedule.outer_iterations)
    _note(
        "single-domain-baseline",
        rel < 1e-2 and result.wall_seconds < 300.0,
        f"rel L2 {rel:.3e} (<1e-2), {result.wall_seconds:.0f}s (<300s)",
    )


# --------------------------------------------------------------------------
# shared full-budget runs (desk scale)


def _run_config(name, overrides=()):
    cfg = apply_overrides(default_config(name), list(overrides))
    partition, problem, trainers, schedule = materialize(cfg)
    result = run_schwarz(partition, problem, trainers, schedule)
    _assert_protocol(result, schedule.outer_iterations, cfg.reset_scope)
    return result


@pytest.fixture(scope="session")
def one_way_runs():
    """Four-strip runs at full budget: three seeds x {adaptive, constant}."""
    runs = {}
    for mode in ("adaptive", "constant"):
        for seed in SEEDS:
            runs[(mode, seed)] = _run_config(
                "poisson_1way",
                [f"training.robin_mode={mode}", f"run.seed={seed}"],
            )
    return runs


@pytest.fixture(scope="session")
def ci_pair(tmp_path_factory):
    """The shipped reduced-budget config, run twice at the same seed."""
    cfg = load_config(CONFIG_DIR / "ci.ini")
    results = []
    dirs = []
    for tag in ("a", "b"):
        out = tmp_path_factory.mktemp(f"ci_{tag}")
        run_cfg = apply_overrides(cfg, [f"run.out_dir={out}"])
        results.append(run_experiment(run_cfg))
        dirs.append(out)
    return cfg, results, dirs


@desk
def test_four_strip_adaptive_accuracy(one_way_runs):
    """Four vertical strips, adaptive interface weights, full budget: the
    best of three seeds reaches max rel L2 <= 5e-3 inside 30 minutes."""
    rels = {s: _max_rel(one_way_runs[("adaptive", s)]) for s in SEEDS}
    wall = sum(one_way_runs[("adaptive", s)].wall_seconds for s in SEEDS)
    best = min(rels.values())
    _note(
        "four-strip-adaptive",
        best <= 5e-3 and wall <= 1800.0,
        f"best rel L2 {best:.3e} (<=5e-3) across seeds {rels}, "
        f"{wall:.0f}s total (<=1800s)",
    )


def test_four_strip_reduced_budget(ci_pair):
    """The shipped reduced-budget config stays under rel L2 3e-2 in <=5 min."""
    _, results, _ = ci_pair
    rel = _max_rel(results[0])
    wall = results[0].wall_seconds
    _note(
        "four-strip-reduced-budget",
        rel <= 3e-2 and wall <= 300.0,
        f"rel L2 {rel:.3e} (<=3e-2), {wall:.0f}s (<=300s)",
    )


@desk
def test_adaptive_not_worse_than_constant(one_way_runs):
    """Trained interface weights match or beat the fixed 0.5 weight on at
    least two of three seeds (same seed, same budget)."""
    wins = []
    detail = []
    for s in SEEDS:
        a = _max_rel(one_way_runs[("adaptive", s)])
        c = _max_rel(one_way_runs[("constant", s)])
        wins.append(a <= c)
        detail.append(f"seed {s}: adaptive {a:.3e} vs constant {c:.3e}")
    _note(
        "adaptive-vs-constant",
        sum(wins) >= 2,
        f"{sum(wins)}/3 seeds favor adaptive; " + "; ".join(detail),
    )


@desk
def test_cross_point_mismatch():
    """2x2 split with a cross point: the run completes, every interface's
    mean |u_i - u_j| ends below 5e-3, and max rel L2 <= 1e-2."""
    result = _run_config("poisson_2way")
    final = result.history[-1]
    worst_gap = max(final.mismatch.values())
    rel = _max_rel(result)
    _note(
        "cross-point-mismatch",
        worst_gap < 5e-3 and rel <= 1e-2,
        f"worst interface gap {worst_gap:.3e} (<5e-3), rel L2 {rel:.3e} (<=1e-2)",
    )


@desk
def test_helmholtz_strips_accuracy():
    """Helmholtz on four strips at unit wavenumber: max rel L2 <= 2e-2 and
    every learned interface weight stays strictly inside (0, 1)."""
    result = _run_config("helmholtz_1way")
    rel = _max_rel(result)
    alphas = [
        a
        for rec in result.history
        for a in rec.alpha.values()
        if np.isfinite(a)
    ]
    inside = all(0.0 < a < 1.0 for a in alphas)
    final_alpha = {
        sid: round(a, 4)
        for sid, a in result.history[-1].alpha.items()
        if np.isfinite(a)
    }
    _note(
        "helmholtz-strips",
        rel <= 2e-2 and inside,
        f"rel L2 {rel:.3e} (<=2e-2), weights in (0,1): {inside}, "
        f"final weights {final_alpha}",
    )


def test_annulus_geometry_invariants():
    """Star-shaped disk/annulus split: sampled points sit on their curves to
    1e-9 and paired interface normals are exact opposites."""
    part = make_polar_partition(complex_outer_curve(), complex_interface_curve())
    sets = sample_points(part, PointCounts(256, 128, 128), seed=11)
    inner_id, annulus_id = part.interfaces[0].pair
    ps_in = next(p for p in sets[inner_id] if p.role == "interface")
    ps_an = next(p for p in sets[annulus_id] if p.role == "interface")
    bd = next(p for p in sets[annulus_id] if p.role == "boundary")

    def off_curve(pts, curve):
        r = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * np.pi)
        return float(np.max(np.abs(r - curve.rho(theta))))

    worst_curve = max(
        off_curve(ps_in.points, complex_interface_curve()),
        off_curve(ps_an.points, complex_interface_curve()),
        off_curve(bd.points, complex_outer_curve()),
    )
    anti = float(np.max(np.abs(ps_in.normals + ps_an.normals)))
    unit = float(np.max(np.abs(np.linalg.norm(ps_in.normals, axis=1) - 1.0)))
    _note(
        "annulus-geometry",
        worst_curve < 1e-9 and anti < 1e-12 and unit < 1e-12,
        f"off-curve {worst_curve:.2e} (<1e-9), normal asymmetry {anti:.2e}, "
        f"unit-norm error {unit:.2e}",
    )


@desk
def test_annulus_run_accuracy():
    """Full solve on the star-shaped annular split: max rel L2 <= 5e-2."""
    result = _run_config("poisson_complex")
    rel = _max_rel(result)
    _note("annulus-run", rel <= 5e-2, f"rel L2 {rel:.3e} (<=5e-2)")


@desk
def test_inverse_dense_measurements_recover_designated_subdomain():
    """One subdomain loses its boundary data but gains 128 interior
    measurements: its rel L2 stays <= 5e-2."""
    cfg = default_config("inverse_case1")
    partition, problem, trainers, schedule = materialize(cfg)
    result = run_schwarz(partition, problem, trainers, schedule)
    _assert_protocol(result, schedule.outer_iterations, cfg.reset_scope)
    designated = next(iter(problem.measurements))
    rel = result.history[-1].rel_l2[designated]
    _note(
        "inverse-dense",
        rel <= 5e-2,
        f"designated subdomain {designated} rel L2 {rel:.3e} (<=5e-2)",
    )


@desk
def test_inverse_sparse_measurements_keep_global_accuracy():
    """With only 32 measurements replacing the missing boundary, the global
    max rel L2 stays <= 1e-1."""
    result = _run_config("inverse_case2")
    rel = _max_rel(result)
    _note("inverse-sparse", rel <= 1e-1, f"max rel L2 {rel:.3e} (<=1e-1)")


def test_determinism_and_protocol_invariants(ci_pair):
    """Same seed, same config, two runs: byte-identical report.csv.  The
    protocol invariants (fresh traces, scoped dual resets, non-decreasing
    boundary multipliers) hold on the artifacts as well."""
    cfg, results, dirs = ci_pair
    a = (dirs[0] / "report.csv").read_bytes()
    b = (dirs[1] / "report.csv").read_bytes()
    for result in results:
        _assert_protocol(result, cfg.outer_iterations, cfg.reset_scope)
    for out in dirs:
        for name in ("report.csv", "fields.csv", "summary.txt", "config.ini"):
            assert (out / name).is_file(), f"missing artifact {name}"
    _note(
        "determinism-and-protocol",
        a == b,
        f"report.csv identical across reruns: {a == b} ({len(a)} bytes)",
    )
