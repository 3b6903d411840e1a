"""Forward and inverse model problems on the unit-square family of domains.

Both problems are manufactured: the exact solution is chosen first and the
source follows symbolically, so boundary data, measurement data, and error
metrics all come from the same closed form.

  poisson:    lap u = s,           u(x,y) = sin(pi x/2 - pi/2) sin(pi y/2 - pi/2)
  helmholtz:  lap u + k^2 u = s,   u(x,y) = sin(pi x) cos(pi y/2)

An inverse case removes the physical boundary data of one designated
subdomain of a 2x2 split and replaces it with pointwise measurements of u
inside that subdomain.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .geometry import Partition, _rejection_sample


@dataclass(frozen=True)
class MeasurementSet:
    subdomain: int
    points: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class ProblemSpec:
    kind: str                 # "poisson" | "helmholtz"
    wavenumber: float
    exact: object             # [n,2] -> [n]
    source: object            # [n,2] -> [n]
    boundary_flags: tuple | None = None   # per-subdomain; None means all True
    measurements: dict = field(default_factory=dict)

    def has_boundary_data(self, sid: int) -> bool:
        return self.boundary_flags is None or self.boundary_flags[sid]

    def boundary_values(self, pts) -> np.ndarray:
        return self.exact(pts)


def poisson_manufactured() -> ProblemSpec:
    def exact(pts):
        pts = np.asarray(pts, dtype=np.float64)
        return np.sin(np.pi * pts[:, 0] / 2 - np.pi / 2) * np.sin(np.pi * pts[:, 1] / 2 - np.pi / 2)

    def source(pts):
        return -(np.pi**2 / 2) * exact(pts)

    return ProblemSpec(kind="poisson", wavenumber=0.0, exact=exact, source=source)


def helmholtz_manufactured(k: float = 1.0) -> ProblemSpec:
    def exact(pts):
        pts = np.asarray(pts, dtype=np.float64)
        return np.sin(np.pi * pts[:, 0]) * np.cos(np.pi * pts[:, 1] / 2)

    def source(pts):
        return (k**2 - 5 * np.pi**2 / 4) * exact(pts)

    return ProblemSpec(kind="helmholtz", wavenumber=float(k), exact=exact, source=source)


def residual(problem: ProblemSpec, jet, point) -> float:
    """Pointwise PDE residual of a jet evaluation."""
    lap = jet.hess_diag[0] + jet.hess_diag[1]
    s = problem.source(np.asarray(point, dtype=np.float64)[None, :])[0]
    if problem.kind == "helmholtz":
        return float(lap + problem.wavenumber**2 * jet.value - s)
    return float(lap - s)


def residual_batch(problem: ProblemSpec, jets) -> np.ndarray:
    """Vectorized residual over a JetBatch."""
    lap = jets.laplacian()
    s = problem.source(jets.points)
    if problem.kind == "helmholtz":
        return lap + problem.wavenumber**2 * jets.value - s
    return lap - s


_CASE_DEFAULT_N = {1: 128, 2: 32}
_CASE_DESIGNATED = {1: 1, 2: 0}  # 2x2 row-major from bottom-left: 1 = bottom-right, 0 = bottom-left


def make_inverse_case(
    problem: ProblemSpec,
    partition: Partition,
    case: int,
    n_meas: int | None = None,
    seed: int = 0,
    noise_sigma: float = 0.0,
) -> ProblemSpec:
    """Drop one subdomain's boundary data and add interior measurements.

    Case 1 designates the bottom-right subdomain (default 128 measurements),
    case 2 the bottom-left (default 32).  Measurement values are the exact
    solution plus optional Gaussian noise, drawn deterministically from the
    seed.
    """
    if partition.kind != "cartesian" or partition.nx != 2 or partition.ny != 2:
        raise ConfigError("inverse cases are defined on the 2x2 Cartesian split")
    if case not in _CASE_DESIGNATED:
        raise ConfigError(f"unknown inverse case {case}; expected 1 or 2")
    designated = _CASE_DESIGNATED[case]
    n = _CASE_DEFAULT_N[case] if n_meas is None else int(n_meas)
    if n < 1:
        raise ConfigError(f"need at least one measurement point, got {n}")
    sub = partition.subdomains[designated]
    rng = np.random.default_rng([seed, 1])
    pts = _rejection_sample(sub.contains, sub.bbox, n, rng)
    values = problem.exact(pts)
    if noise_sigma > 0:
        values = values + noise_sigma * rng.standard_normal(n)
    flags = tuple(sid != designated for sid in range(len(partition.subdomains)))
    ms = MeasurementSet(subdomain=designated, points=pts, values=values)
    return replace(problem, boundary_flags=flags, measurements={designated: ms})
