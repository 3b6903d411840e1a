"""Grid-based error measures for trained subdomain models."""

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .geometry import Partition, subdomain_grid


@dataclass(frozen=True)
class ErrorReport:
    """Per-subdomain and pooled accuracy against a reference solution."""

    rel_l2: dict
    max_err: dict
    n_points: dict
    global_rel_l2: float
    global_max: float


def compute_errors(partition: Partition, exact, predictors, resolution: int = 101) -> ErrorReport:
    """Relative L2 and max absolute error on a masked uniform grid.

    `exact` maps points (n, 2) to reference values (n,); `predictors` maps
    subdomain id to a callable with the same signature.  The relative L2
    error is ||u - u_hat||_2 / ||u||_2 over each subdomain's grid points;
    the global figures pool the squared sums over all subdomains.
    """
    rel_l2 = {}
    max_err = {}
    n_points = {}
    num_total = 0.0
    den_total = 0.0
    global_max = 0.0
    for sub in partition.subdomains:
        pts = subdomain_grid(sub, resolution)
        if len(pts) == 0:
            raise GeometryError(f"no grid points fall inside subdomain {sub.id}")
        u = np.asarray(exact(pts), dtype=np.float64)
        u_hat = np.asarray(predictors[sub.id](pts), dtype=np.float64)
        # a diverged model can overflow the squared sums; inf is the honest answer
        with np.errstate(over="ignore"):
            diff = u_hat - u
            num = float(np.sum(diff * diff))
            den = float(np.sum(u * u))
        rel_l2[sub.id] = float(np.sqrt(num / den)) if den > 0.0 else float(np.sqrt(num))
        max_err[sub.id] = float(np.max(np.abs(diff)))
        n_points[sub.id] = int(len(pts))
        num_total += num
        den_total += den
        global_max = max(global_max, max_err[sub.id])
    global_rel = float(np.sqrt(num_total / den_total)) if den_total > 0.0 else float(np.sqrt(num_total))
    return ErrorReport(rel_l2, max_err, n_points, global_rel, global_max)
