"""Fully connected networks with exact first- and second-order input jets.

A network maps (x, y) to a scalar u.  The forward pass propagates the tuple
(u, du/dx, du/dy, d2u/dx2, d2u/dy2, d2u/dxdy) through every layer
analytically, using tanh' = 1 - t^2 and tanh'' = -2 t (1 - t^2), so PDE
residuals get exact derivatives from a single batched sweep instead of a
taped autodiff.  Parameter gradients are accumulated in reverse over the
recorded per-layer states, including the contributions that flow through
the spatial-derivative outputs.  Everything is float64.

Jet component layout used internally: axis 0 of the state array indexes
(value, d/dx, d/dy, d2/dx2, d2/dy2, d2/dxdy), axis 1 the batch, axis 2 the
layer width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError

_NCOMP = 6


@dataclass
class JetBatch:
    """Values and input derivatives of u at a batch of points.

    hess columns are (d2u/dx2, d2u/dy2, d2u/dxdy).
    """

    points: np.ndarray  # [n, 2]
    value: np.ndarray   # [n]
    grad: np.ndarray    # [n, 2]
    hess: np.ndarray    # [n, 3]

    def laplacian(self) -> np.ndarray:
        return self.hess[:, 0] + self.hess[:, 1]


@dataclass
class JetEval:
    """Single-point view of a jet."""

    value: float
    grad: np.ndarray       # (2,)
    hess_diag: np.ndarray  # (d2u/dx2, d2u/dy2)
    cross: float           # d2u/dxdy

    def laplacian(self) -> float:
        return float(self.hess_diag[0] + self.hess_diag[1])


@dataclass
class ParamGrad:
    """Gradient of a scalar loss with respect to every weight and bias."""

    weights: list
    biases: list

    def arrays(self):
        return list(self.weights) + list(self.biases)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


class Mlp:
    """tanh MLP from R^2 to R with analytic jet propagation."""

    def __init__(self, weights, biases):
        if len(weights) != len(biases) or not weights:
            raise ValueError("weights and biases must be non-empty and paired")
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        if self.weights[0].shape[1] != 2:
            raise ValueError("input dimension must be 2")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("output dimension must be 1")
        for li, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {li}: weight/bias shapes disagree")
            if li > 0 and w.shape[1] != self.weights[li - 1].shape[0]:
                raise ValueError(f"layer {li}: width mismatch with layer {li - 1}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {li}: non-finite parameters")

    @property
    def widths(self) -> tuple:
        return (2,) + tuple(w.shape[0] for w in self.weights)

    @classmethod
    def glorot(cls, widths, seed) -> "Mlp":
        """Glorot-uniform weights, zero biases, seeded."""
        if len(widths) < 2 or widths[0] != 2 or widths[-1] != 1:
            raise ValueError("widths must run from 2 to 1")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    def parameters(self):
        return list(self.weights) + list(self.biases)

    def set_parameters(self, arrays):
        nl = len(self.weights)
        self.weights = [np.asarray(a, dtype=np.float64) for a in arrays[:nl]]
        self.biases = [np.asarray(a, dtype=np.float64) for a in arrays[nl:]]

    def _sweep(self, pts, keep_record, ncomp=_NCOMP):
        # ncomp 5 drops the cross derivative (training losses never use it)
        pts = np.asarray(pts, dtype=np.float64)
        n = pts.shape[0]
        state = np.zeros((ncomp, n, 2))
        state[0] = pts
        state[1, :, 0] = 1.0  # d(x)/dx
        state[2, :, 1] = 1.0  # d(y)/dy
        record = [] if keep_record else None
        last = len(self.weights) - 1
        for li, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = (state.reshape(ncomp * n, -1) @ w.T).reshape(ncomp, n, -1)
            z[0] += b
            if li == last:
                if keep_record:
                    record.append((state, z, None, None))
                state = z
            else:
                t = np.tanh(z[0])
                s = 1.0 - t * t
                c = -2.0 * t * s
                a = np.empty_like(z)
                a[0] = t
                a[1] = s * z[1]
                a[2] = s * z[2]
                a[3] = s * z[3] + c * z[1] * z[1]
                a[4] = s * z[4] + c * z[2] * z[2]
                if ncomp == _NCOMP:
                    a[5] = s * z[5] + c * z[1] * z[2]
                if keep_record:
                    record.append((state, z, t, s))
                state = a
        hess_cols = [state[3, :, 0], state[4, :, 0]]
        if ncomp == _NCOMP:
            hess_cols.append(state[5, :, 0])
        jets = JetBatch(
            points=pts,
            value=state[0, :, 0].copy(),
            grad=np.stack([state[1, :, 0], state[2, :, 0]], axis=1),
            hess=np.stack(hess_cols, axis=1),
        )
        return jets, record

    def jet_batch(self, pts, with_cross=True) -> JetBatch:
        return self._sweep(pts, keep_record=False, ncomp=6 if with_cross else 5)[0]

    def jet_with_record(self, pts, with_cross=True):
        return self._sweep(pts, keep_record=True, ncomp=6 if with_cross else 5)

    def predict(self, pts) -> np.ndarray:
        """Values only (no derivative propagation)."""
        a = np.asarray(pts, dtype=np.float64)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ w.T + b)
        return (a @ self.weights[-1].T + self.biases[-1])[:, 0]

    def backward(self, record, value_bar, grad_bar, hess_bar) -> ParamGrad:
        """Reverse accumulation of a scalar loss over a recorded sweep.

        The bar arrays are the loss adjoints of the jet outputs:
        value_bar [n], grad_bar [n, 2], hess_bar [n, 3] (or [n, 2] for a
        sweep recorded without the cross derivative).
        """
        n = value_bar.shape[0]
        ncomp = 3 + hess_bar.shape[1]
        cross = ncomp == _NCOMP
        sbar = np.empty((ncomp, n, 1))
        sbar[0, :, 0] = value_bar
        sbar[1, :, 0] = grad_bar[:, 0]
        sbar[2, :, 0] = grad_bar[:, 1]
        sbar[3, :, 0] = hess_bar[:, 0]
        sbar[4, :, 0] = hess_bar[:, 1]
        if cross:
            sbar[5, :, 0] = hess_bar[:, 2]
        nl = len(self.weights)
        wgrads = [None] * nl
        bgrads = [None] * nl
        for li in range(nl - 1, -1, -1):
            s_in, z, t, s = record[li]
            if t is None:
                zbar = sbar
            else:
                c = -2.0 * t * s
                dc = 4.0 * t * t * s - 2.0 * s * s  # d(-2 t s)/dz
                zbar = np.empty_like(sbar)
                zbar[0] = (
                    sbar[0] * s
                    + c * (sbar[1] * z[1] + sbar[2] * z[2]
                           + sbar[3] * z[3] + sbar[4] * z[4])
                    + dc * (sbar[3] * z[1] * z[1] + sbar[4] * z[2] * z[2])
                )
                zbar[1] = s * sbar[1] + 2.0 * c * sbar[3] * z[1]
                zbar[2] = s * sbar[2] + 2.0 * c * sbar[4] * z[2]
                zbar[3] = s * sbar[3]
                zbar[4] = s * sbar[4]
                if cross:
                    zbar[0] += c * sbar[5] * z[5] + dc * sbar[5] * z[1] * z[2]
                    zbar[1] += c * sbar[5] * z[2]
                    zbar[2] += c * sbar[5] * z[1]
                    zbar[5] = s * sbar[5]
            w = self.weights[li]
            zb = zbar.reshape(ncomp * n, w.shape[0])
            wgrads[li] = zb.T @ s_in.reshape(ncomp * n, w.shape[1])
            bgrads[li] = zbar[0].sum(axis=0)
            if li > 0:
                sbar = (zb @ w).reshape(ncomp, n, w.shape[1])
        return ParamGrad(wgrads, bgrads)


def forward_jet(net: Mlp, point) -> JetEval:
    """Exact (value, gradient, Hessian diagonal, cross term) at one point."""
    jets = net.jet_batch(np.asarray(point, dtype=np.float64)[None, :])
    return JetEval(
        value=float(jets.value[0]),
        grad=jets.grad[0].copy(),
        hess_diag=jets.hess[0, :2].copy(),
        cross=float(jets.hess[0, 2]),
    )


def loss_backward(net: Mlp, pts, loss_fn):
    """Evaluate a scalar loss over a batch and return (loss, ParamGrad).

    loss_fn receives the JetBatch and must return (loss, (value_bar,
    grad_bar, hess_bar)); the bars are the adjoints of the jet outputs.
    """
    jets, record = net.jet_with_record(pts)
    loss, (vbar, gbar, hbar) = loss_fn(jets)
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss!r}")
    return loss, net.backward(record, vbar, gbar, hbar)
