"""Adaptive augmented Lagrangian training of one subdomain network.

Every constraint point (boundary, interface, measurement) carries its own
multiplier, penalty, and moving average of the squared constraint.  The
constraint value fed to the dual update is the per-point squared residual,
so it is nonnegative and multipliers never decrease.  A coarser variant
(granularity "per_type") keeps a single multiplier/penalty per constraint
group and feeds it the group's mean squared residual instead.  Update
order per step: moving average first, then penalty from the new average,
then multiplier with the new penalty:

    avg  <- smoothing * avg + (1 - smoothing) * c^2
    mu   <- dual_lr / (sqrt(avg) + stabilizer)
    lam  <- lam + mu * c

The primal objective is the mean squared PDE residual; each constraint
group contributes mean(lam * c + mu * c^2 / 2) to the loss.  One optimizer
step and one dual update happen per epoch, with the dual update evaluated
at the post-step parameters (realized lazily from the next epoch's forward
pass, plus one trailing pass when a block of epochs ends).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ProtocolError
from .nets import Mlp

ROBIN_MIN = 1e-3
ROBIN_MAX = 1.0 - 1e-3


@dataclass
class DualState:
    multipliers: np.ndarray
    penalties: np.ndarray
    sq_avg: np.ndarray
    dual_lr: float = 1e-2
    smoothing: float = 0.99
    stabilizer: float = 1e-8

    @classmethod
    def fresh(cls, n, dual_lr=1e-2, smoothing=0.99, stabilizer=1e-8):
        return cls(
            multipliers=np.ones(n),
            penalties=np.ones(n),
            sq_avg=np.zeros(n),
            dual_lr=dual_lr,
            smoothing=smoothing,
            stabilizer=stabilizer,
        )

    def reset(self, scope="all"):
        """Fresh dual variables; scope 'multipliers' resets only those."""
        if scope not in ("all", "multipliers"):
            raise ValueError(f"unknown reset scope {scope!r}")
        self.multipliers[:] = 1.0
        if scope == "all":
            self.penalties[:] = 1.0
            self.sq_avg[:] = 0.0


def dual_update(state: DualState, constraints, validate=True) -> DualState:
    """One adaptive dual step; mutates and returns the state."""
    c = np.asarray(constraints, dtype=np.float64)
    if validate:
        if not np.all(np.isfinite(c)):
            raise DivergenceError("non-finite constraint value in dual update")
        if np.any(c < 0):
            raise ProtocolError("constraint values must be squared residuals (>= 0)")
    state.sq_avg[:] = state.smoothing * state.sq_avg + (1.0 - state.smoothing) * c * c
    state.penalties[:] = state.dual_lr / (np.sqrt(state.sq_avg) + state.stabilizer)
    state.multipliers[:] = state.multipliers + state.penalties * c
    return state


def augmented_lagrangian(objective, groups) -> float:
    """objective + sum over groups of mean(lam*c + mu*c^2/2)."""
    total = float(objective)
    for c, state in groups:
        c = np.asarray(c, dtype=np.float64)
        total += float(np.mean(state.multipliers * c + 0.5 * state.penalties * c * c))
    return total


class Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m[:] = self.beta1 * m + (1.0 - self.beta1) * g
            v[:] = self.beta2 * v + (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


@dataclass(frozen=True)
class TrainerSettings:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    optimizer: str = "adam"         # adam | sgd
    dual_lr: float = 1e-2
    smoothing: float = 0.99
    stabilizer: float = 1e-8
    robin_mode: str = "adaptive"    # adaptive | constant
    robin_init: float = 0.5
    robin_update: str = "balance"   # balance | gradient | closed_form
    robin_lr: float = 0.5           # between-block averaging rate (balance) or per-epoch ascent step (gradient)
    lr_decay: float = 0.99985       # per-epoch multiplicative step-size decay
    granularity: str = "per_point"  # per_point | per_type
    validate: bool = True


@dataclass
class ConstraintGroup:
    name: str
    role: str              # boundary | interface | measurement
    sl: slice              # rows of the stacked point array
    points: np.ndarray
    duals: DualState
    targets: np.ndarray | None = None   # boundary/measurement data
    normals: np.ndarray | None = None   # interface: own outward normals
    interface_id: int | None = None
    neighbor: int | None = None
    trace_values: np.ndarray | None = None
    trace_fluxes: np.ndarray | None = None
    trace_iteration: int = -1   # -1 until a real trace arrives


class SubdomainTrainer:
    """Owns one network, its Robin weight, and its constraint groups."""

    def __init__(self, sid, net: Mlp, problem, point_sets, settings: TrainerSettings):
        self.sid = sid
        self.net = net
        self.problem = problem
        self.settings = settings
        a0 = float(np.clip(settings.robin_init, ROBIN_MIN, ROBIN_MAX))
        # The Robin weight plays on the enforcement side, like the
        # multipliers: the default "balance" rule (update_robin_balance,
        # applied between blocks by the orchestrator) tracks the point
        # where the squared weights mirror the current value/flux mismatch
        # ratio, so the worse condition is enforced harder and, once
        # enforcement shrinks it, the weight is pulled back -- it settles
        # strictly inside (0, 1).  Per-epoch gradient dynamics on the
        # constraint itself lack that stability: the constraint is a
        # convex parabola in the weight, so descent de-weights the larger
        # mismatch until the weight pins at a clamp (and the exchange
        # degenerates to a one-condition transfer that cannot converge on
        # non-overlapping subdomains), while ascent drifts to a clamp at a
        # rate set by its step size.  The ascent step ("gradient") and the
        # per-block quadratic minimizer ("closed_form") remain as
        # ablations.
        self._robin = np.array([a0])
        self._pending_dual = False
        self.epoch = 0
        self.history = []

        interior = next(ps for ps in point_sets if ps.role == "interior")
        blocks = [interior.points]
        self.n_interior = len(interior.points)
        self.groups = []

        def add_group(name, role, pts, **kw):
            sl = slice(sum(len(b) for b in blocks), sum(len(b) for b in blocks) + len(pts))
            blocks.append(pts)
            duals = DualState.fresh(
                1 if settings.granularity == "per_type" else len(pts),
                dual_lr=settings.dual_lr,
                smoothing=settings.smoothing,
                stabilizer=settings.stabilizer,
            )
            self.groups.append(
                ConstraintGroup(name=name, role=role, sl=sl, points=pts, duals=duals, **kw)
            )

        if problem.has_boundary_data(sid):
            for ps in point_sets:
                if ps.role == "boundary":
                    add_group("boundary", "boundary", ps.points,
                              targets=problem.boundary_values(ps.points))
        ifaces = sorted(
            (ps for ps in point_sets if ps.role == "interface"),
            key=lambda ps: ps.interface_id,
        )
        for ps in ifaces:
            add_group(
                f"interface:{ps.interface_id}", "interface", ps.points,
                normals=ps.normals, interface_id=ps.interface_id, neighbor=ps.neighbor,
                trace_values=np.zeros(len(ps.points)),
                trace_fluxes=np.zeros(len(ps.points)),
            )
        ms = problem.measurements.get(sid)
        if ms is not None:
            add_group("measurement", "measurement", ms.points, targets=ms.values)

        self.all_points = np.concatenate(blocks)
        self.source_interior = problem.source(interior.points)
        self.k2 = problem.wavenumber**2 if problem.kind == "helmholtz" else 0.0

        self._robin_trainable = (
            settings.robin_mode == "adaptive"
            and settings.robin_update == "gradient"
            and any(g.role == "interface" for g in self.groups)
        )
        self._params = list(net.weights) + list(net.biases)
        if settings.optimizer == "adam":
            self.optimizer = Adam(settings.learning_rate, settings.beta1, settings.beta2)
        elif settings.optimizer == "sgd":
            self.optimizer = Sgd(settings.learning_rate)
        else:
            raise ValueError(f"unknown optimizer {settings.optimizer!r}")
        if settings.granularity not in ("per_point", "per_type"):
            raise ValueError(f"unknown granularity {settings.granularity!r}")

    # --- Robin weight -------------------------------------------------

    @property
    def robin_weight(self) -> float:
        return float(self._robin[0])

    def set_robin_weight(self, value):
        self._robin[0] = np.clip(value, ROBIN_MIN, ROBIN_MAX)

    def interface_groups(self):
        return [g for g in self.groups if g.role == "interface"]

    # --- traces -------------------------------------------------------

    def set_trace(self, interface_id, values, fluxes, iteration):
        g = next(g for g in self.interface_groups() if g.interface_id == interface_id)
        g.trace_values = np.asarray(values, dtype=np.float64)
        g.trace_fluxes = np.asarray(fluxes, dtype=np.float64)
        g.trace_iteration = iteration

    def produce_trace(self, interface_id):
        """u and du/dn at the shared points, n being the receiver's outward
        normal (the negation of this side's)."""
        g = next(g for g in self.interface_groups() if g.interface_id == interface_id)
        jets = self.net.jet_batch(g.points, with_cross=False)
        flux_own = np.sum(jets.grad * g.normals, axis=1)
        return jets.value, -flux_own

    # --- loss assembly ------------------------------------------------

    def _dual_input(self, c):
        """Constraint values as seen by a group's dual state."""
        if self.settings.granularity == "per_type":
            return np.array([np.mean(c)])
        return c

    def _constraint_values(self, jets):
        cvals = []
        a = self._robin[0]
        for g in self.groups:
            if g.role == "interface":
                du = jets.value[g.sl] - g.trace_values
                dq = np.sum(jets.grad[g.sl] * g.normals, axis=1) - g.trace_fluxes
                cvals.append(a * a * du * du + (1.0 - a) ** 2 * dq * dq)
            else:
                d = jets.value[g.sl] - g.targets
                cvals.append(d * d)
        return cvals

    def _assemble(self, jets, cvals):
        n = len(jets.value)
        r = jets.hess[: self.n_interior, 0] + jets.hess[: self.n_interior, 1] \
            + self.k2 * jets.value[: self.n_interior] - self.source_interior
        ni = self.n_interior
        objective = float(np.mean(r * r))
        vbar = np.zeros(n)
        gbar = np.zeros((n, 2))
        hbar = np.zeros((n, jets.hess.shape[1]))
        hbar[:ni, 0] = 2.0 * r / ni
        hbar[:ni, 1] = 2.0 * r / ni
        if self.k2:
            vbar[:ni] += self.k2 * 2.0 * r / ni
        loss = objective
        alpha_grad = 0.0
        parts = {"objective": objective, "boundary": np.nan, "interface": np.nan,
                 "measurement": np.nan}
        iface_means = []
        a = self._robin[0]
        per_type = self.settings.granularity == "per_type"
        for g, c in zip(self.groups, cvals):
            lam, mu = g.duals.multipliers, g.duals.penalties
            ng = len(c)
            if per_type:
                cbar = float(np.mean(c))
                loss += float(lam[0] * cbar + 0.5 * mu[0] * cbar * cbar)
                w = np.full(ng, (lam[0] + mu[0] * cbar) / ng)
            else:
                loss += float(np.mean(lam * c + 0.5 * mu * c * c))
                w = (lam + mu * c) / ng
            if g.role == "interface":
                du = jets.value[g.sl] - g.trace_values
                dq = np.sum(jets.grad[g.sl] * g.normals, axis=1) - g.trace_fluxes
                vbar[g.sl] += w * 2.0 * a * a * du
                gbar[g.sl] += (w * 2.0 * (1.0 - a) ** 2 * dq)[:, None] * g.normals
                alpha_grad += float(np.sum(w * (2.0 * a * du * du - 2.0 * (1.0 - a) * dq * dq)))
                iface_means.append(float(np.mean(c)))
            else:
                d = jets.value[g.sl] - g.targets
                vbar[g.sl] += w * 2.0 * d
                parts[g.role] = float(np.mean(c))
        if iface_means:
            parts["interface"] = float(np.mean(iface_means))
        parts["loss"] = loss
        return loss, (vbar, gbar, hbar), alpha_grad, parts

    def evaluate_loss(self) -> float:
        """Loss at the current parameters and duals, no side effects."""
        jets = self.net.jet_batch(self.all_points, with_cross=False)
        return self._assemble(jets, self._constraint_values(jets))[0]

    def loss_and_grads(self):
        """(loss, ParamGrad, robin gradient) at current parameters and duals."""
        jets, record = self.net.jet_with_record(self.all_points, with_cross=False)
        loss, bars, alpha_grad, _ = self._assemble(jets, self._constraint_values(jets))
        return loss, self.net.backward(record, *bars), alpha_grad

    # --- training loop ------------------------------------------------

    def _raise_divergence(self, cvals):
        group = next(
            (g.name for g, c in zip(self.groups, cvals) if not np.all(np.isfinite(c))),
            None,
        )
        raise DivergenceError(
            f"subdomain {self.sid}: non-finite loss or gradient at epoch {self.epoch}"
            + (f" (group {group})" if group else ""),
            subdomain=self.sid,
            epoch=self.epoch,
            group=group,
        )

    def _train_one_epoch(self):
        jets, record = self.net.jet_with_record(self.all_points, with_cross=False)
        cvals = self._constraint_values(jets)
        if not all(np.all(np.isfinite(c)) for c in cvals):
            self._raise_divergence(cvals)
        if self._pending_dual:
            for g, c in zip(self.groups, cvals):
                dual_update(g.duals, self._dual_input(c), validate=self.settings.validate)
        loss, bars, alpha_grad, parts = self._assemble(jets, cvals)
        if not np.isfinite(loss):
            self._raise_divergence(cvals)
        pgrad = self.net.backward(record, *bars)
        if not (pgrad.all_finite() and np.isfinite(alpha_grad)):
            self._raise_divergence(cvals)
        return pgrad, alpha_grad, parts

    def train_local(self, epochs: int):
        """Run `epochs` primal/dual iterations; returns their breakdowns."""
        out = []
        for _ in range(epochs):
            with np.errstate(over="ignore", invalid="ignore"):
                pgrad, alpha_grad, parts = self._train_one_epoch()
            grads = list(pgrad.weights) + list(pgrad.biases)
            # Exchanges and dual updates re-excite training every block; the
            # decaying step size lets the networks settle between kicks
            # instead of orbiting a noise floor set by the initial rate.
            fade = self.settings.lr_decay**self.epoch
            self.optimizer.lr = self.settings.learning_rate * fade
            self.optimizer.step(self._params, grads)
            if self._robin_trainable:
                stepped = self._robin[0] + self.settings.robin_lr * fade * alpha_grad
                self._robin[0] = np.clip(stepped, ROBIN_MIN, ROBIN_MAX)
            self._pending_dual = True
            self.epoch += 1
            parts["robin_weight"] = self.robin_weight
            out.append(parts)
            self.history.append(parts)
        return out

    def finalize_duals(self):
        """Complete the trailing dual update at the post-step parameters."""
        if not self._pending_dual:
            return
        jets = self.net.jet_batch(self.all_points, with_cross=False)
        for g, c in zip(self.groups, self._constraint_values(jets)):
            dual_update(g.duals, self._dual_input(c), validate=self.settings.validate)
        self._pending_dual = False

    def _pooled_mismatches(self):
        """Mean squared value/flux mismatch over all interface points."""
        du_sq, dq_sq = [], []
        for g in self.interface_groups():
            jets = self.net.jet_batch(g.points, with_cross=False)
            du_sq.append((jets.value - g.trace_values) ** 2)
            dq_sq.append((np.sum(jets.grad * g.normals, axis=1) - g.trace_fluxes) ** 2)
        a = float(np.mean(np.concatenate(du_sq)))
        b = float(np.mean(np.concatenate(dq_sq)))
        return a, b

    def update_robin_balance(self):
        """Between-block emphasis step: pull the weight toward the point
        where the squared weights mirror the mismatch ratio,
        alpha^2/(1-alpha)^2 = a/b, so the worse condition is enforced
        harder in the next block.  Extra weight shrinks that mismatch,
        which pulls the target back -- negative feedback that keeps the
        weight strictly inside (0, 1).  Moving it only between blocks
        keeps the loss landscape stationary while the multipliers adapt
        (they are reset at the same point in the schedule)."""
        if not self.interface_groups():
            return
        a, b = self._pooled_mismatches()
        if a + b <= 0:
            return
        target = np.sqrt(a) / (np.sqrt(a) + np.sqrt(b))
        rate = self.settings.robin_lr
        self.set_robin_weight((1.0 - rate) * self._robin[0] + rate * target)

    def update_robin_closed_form(self):
        """Quadratic-model minimizer for the Robin weight: b/(a+b), where a
        and b are the pooled mean squared value/flux mismatches."""
        if not self.interface_groups():
            return
        a, b = self._pooled_mismatches()
        if a + b > 0:
            self.set_robin_weight(b / (a + b))

    def reset_interface_duals(self, scope="all"):
        for g in self.interface_groups():
            g.duals.reset(scope)

    def predict(self, pts):
        return self.net.predict(pts)
