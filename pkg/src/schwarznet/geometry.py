"""Domain partitions and collocation point sampling.

Supports Cartesian nx-by-ny box splits and a two-subdomain polar layout
(an inner region enclosed by a star-shaped interface curve inside a
star-shaped outer boundary).  Subdomains do not overlap; every interface
is shared, and both sides receive coordinate-identical interface points
with opposite unit normals.  Sampling is fixed per seed: points are drawn
once and never resampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GeometryError


@dataclass(frozen=True)
class PolarCurve:
    """Closed curve r = rho(theta) with analytic derivative drho(theta)."""

    rho: object
    drho: object


def complex_outer_curve() -> PolarCurve:
    # rho = 2 + sin(2t) cos(2t) = 2 + sin(4t)/2
    return PolarCurve(
        rho=lambda t: 2.0 + np.sin(2.0 * t) * np.cos(2.0 * t),
        drho=lambda t: 2.0 * np.cos(4.0 * t),
    )


def complex_interface_curve() -> PolarCurve:
    # rho = 1 + 0.5 cos(4t) sin(6t)
    return PolarCurve(
        rho=lambda t: 1.0 + 0.5 * np.cos(4.0 * t) * np.sin(6.0 * t),
        drho=lambda t: 0.5 * (-4.0 * np.sin(4.0 * t) * np.sin(6.0 * t)
                              + 6.0 * np.cos(4.0 * t) * np.cos(6.0 * t)),
    )


class Segment:
    """Straight edge p0 -> p1, parameterized by t in [0, 1]."""

    def __init__(self, p0, p1, normal=None):
        self.p0 = np.asarray(p0, dtype=np.float64)
        self.p1 = np.asarray(p1, dtype=np.float64)
        if np.allclose(self.p0, self.p1):
            raise GeometryError("degenerate segment")
        self._normal = None if normal is None else np.asarray(normal, dtype=np.float64)

    def points(self, ts):
        ts = np.asarray(ts, dtype=np.float64)
        return self.p0 + ts[:, None] * (self.p1 - self.p0)

    def normals(self, ts):
        if self._normal is None:
            raise GeometryError("segment has no normal attached")
        return np.tile(self._normal, (len(np.asarray(ts)), 1))

    def draw(self, n, rng):
        # endpoints always included so shared corner/cross points appear
        # in every incident point set
        if n == 1:
            return rng.uniform(0.0, 1.0, size=1)
        return np.concatenate([np.array([0.0, 1.0]), rng.uniform(0.0, 1.0, size=n - 2)])


class PolarLoop:
    """Closed curve r = rho(theta); normals point away from the enclosed region."""

    def __init__(self, curve: PolarCurve):
        self.curve = curve

    def points(self, ts):
        ts = np.asarray(ts, dtype=np.float64)
        r = self.curve.rho(ts)
        return np.stack([r * np.cos(ts), r * np.sin(ts)], axis=1)

    def normals(self, ts):
        # tangent rotated by -90 degrees, normalized; for star-shaped curves
        # this has positive radial component, i.e. outward
        ts = np.asarray(ts, dtype=np.float64)
        r = self.curve.rho(ts)
        dr = self.curve.drho(ts)
        tx = dr * np.cos(ts) - r * np.sin(ts)
        ty = dr * np.sin(ts) + r * np.cos(ts)
        norm = np.hypot(tx, ty)
        return np.stack([ty / norm, -tx / norm], axis=1)

    def draw(self, n, rng):
        return rng.uniform(0.0, 2.0 * np.pi, size=n)


class Subdomain:
    def __init__(self, sid, bbox, contains, boundary_edges):
        self.id = sid
        self.bbox = bbox  # (xmin, xmax, ymin, ymax)
        self.contains = contains  # [n,2] -> bool[n], closed region
        self.boundary_edges = list(boundary_edges)


@dataclass(frozen=True)
class Interface:
    id: int
    pair: tuple  # (i, j): edge normals point from subdomain i into subdomain j
    edge: object


@dataclass
class Partition:
    subdomains: list
    interfaces: list
    kind: str  # "cartesian" | "polar"
    nx: int | None = None
    ny: int | None = None

    def interfaces_of(self, sid):
        """Interfaces touching subdomain sid, with ownership flag (True if
        sid is the side whose outward normal the edge stores)."""
        out = []
        for iface in self.interfaces:
            if sid == iface.pair[0]:
                out.append((iface, True))
            elif sid == iface.pair[1]:
                out.append((iface, False))
        return out


@dataclass(frozen=True)
class PointCounts:
    n_interior: int
    n_boundary: int
    n_interface: int


@dataclass
class PointSet:
    role: str  # interior | boundary | interface | measurement
    points: np.ndarray
    normals: np.ndarray | None = None      # interface only: owner's outward normals
    interface_id: int | None = None
    neighbor: int | None = None
    values: np.ndarray | None = None       # measurement only: observed u

    def __len__(self):
        return len(self.points)


def make_cartesian_partition(nx: int, ny: int, bounds=(-1.0, 1.0, -1.0, 1.0)) -> Partition:
    """Split [x0,x1]x[y0,y1] into nx*ny boxes, ids row-major from bottom-left."""
    if nx < 1 or ny < 1:
        raise ConfigError(f"partition needs nx, ny >= 1, got {nx}x{ny}")
    x0, x1, y0, y1 = bounds
    if not (x1 > x0 and y1 > y0):
        raise ConfigError(f"empty bounds {bounds}")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)

    def box_contains(bx0, bx1, by0, by1):
        def inside(pts):
            pts = np.asarray(pts, dtype=np.float64)
            return (
                (pts[:, 0] >= bx0) & (pts[:, 0] <= bx1)
                & (pts[:, 1] >= by0) & (pts[:, 1] <= by1)
            )
        return inside

    subdomains = []
    for iy in range(ny):
        for ix in range(nx):
            sid = iy * nx + ix
            bx0, bx1, by0, by1 = xs[ix], xs[ix + 1], ys[iy], ys[iy + 1]
            edges = []
            if ix == 0:
                edges.append(Segment((bx0, by0), (bx0, by1)))
            if ix == nx - 1:
                edges.append(Segment((bx1, by0), (bx1, by1)))
            if iy == 0:
                edges.append(Segment((bx0, by0), (bx1, by0)))
            if iy == ny - 1:
                edges.append(Segment((bx0, by1), (bx1, by1)))
            subdomains.append(
                Subdomain(sid, (bx0, bx1, by0, by1), box_contains(bx0, bx1, by0, by1), edges)
            )

    interfaces = []
    for iy in range(ny):  # vertical edges, normal +x from left box into right box
        for ix in range(nx - 1):
            pair = (iy * nx + ix, iy * nx + ix + 1)
            edge = Segment((xs[ix + 1], ys[iy]), (xs[ix + 1], ys[iy + 1]), normal=(1.0, 0.0))
            interfaces.append(Interface(len(interfaces), pair, edge))
    for iy in range(ny - 1):  # horizontal edges, normal +y from lower box into upper box
        for ix in range(nx):
            pair = (iy * nx + ix, (iy + 1) * nx + ix)
            edge = Segment((xs[ix], ys[iy + 1]), (xs[ix + 1], ys[iy + 1]), normal=(0.0, 1.0))
            interfaces.append(Interface(len(interfaces), pair, edge))
    return Partition(subdomains, interfaces, kind="cartesian", nx=nx, ny=ny)


def _polar_mask(curve, tol=0.0):
    def inside(pts):
        pts = np.asarray(pts, dtype=np.float64)
        r = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        return r <= curve.rho(theta) + tol
    return inside


def make_polar_partition(outer: PolarCurve, inner: PolarCurve) -> Partition:
    """Two subdomains: id 0 annular (between inner and outer curves, owns the
    physical boundary), id 1 the region enclosed by the inner curve."""
    thetas = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
    r_out = np.asarray(outer.rho(thetas), dtype=np.float64)
    r_in = np.asarray(inner.rho(thetas), dtype=np.float64)
    if not (np.all(np.isfinite(r_out)) and np.all(np.isfinite(r_in))):
        raise GeometryError("curve radius is not finite")
    if np.any(r_in <= 0):
        raise GeometryError("interface curve must have positive radius")
    if np.any(r_in >= r_out):
        raise GeometryError("interface curve must lie strictly inside the outer boundary")

    def bbox_of(r):
        pad = 1e-3 * float(np.max(r))
        x = r * np.cos(thetas)
        y = r * np.sin(thetas)
        return (x.min() - pad, x.max() + pad, y.min() - pad, y.max() + pad)

    in_outer = _polar_mask(outer)
    in_inner = _polar_mask(inner)

    def annulus_contains(pts):
        return in_outer(pts) & ~_polar_mask(inner, tol=-1e-12)(pts)

    annulus = Subdomain(0, bbox_of(r_out), annulus_contains, [PolarLoop(outer)])
    core = Subdomain(1, bbox_of(r_in), in_inner, [])
    # normal stored on the edge is outward from the inner subdomain (id 1)
    iface = Interface(0, (1, 0), PolarLoop(inner))
    return Partition([annulus, core], [iface], kind="polar")


def _rejection_sample(contains, bbox, n, rng):
    x0, x1, y0, y1 = bbox
    kept, got, drawn = [], 0, 0
    while got < n:
        m = max(256, 2 * (n - got))
        cand = np.stack([rng.uniform(x0, x1, m), rng.uniform(y0, y1, m)], axis=1)
        acc = cand[contains(cand)]
        kept.append(acc)
        got += len(acc)
        drawn += m
        if drawn >= max(100_000, 100 * n) and got / drawn < 1e-3:
            raise GeometryError(
                f"rejection sampling acceptance ratio {got / drawn:.2e} < 1e-3; "
                "region is degenerate relative to its bounding box"
            )
    return np.concatenate(kept)[:n]


def sample_points(partition: Partition, counts: PointCounts, seed: int):
    """Draw all collocation points for a partition.

    Returns {subdomain id: [PointSet, ...]} with one interior set, one
    merged boundary set (counts.n_boundary per edge), and one set per
    incident interface.  Interface draws happen once and are shared by both
    sides; each side stores its own outward normal.  Consumption order of
    the seeded generator is fixed, so results are reproducible bit for bit.
    """
    if min(counts.n_interior, counts.n_boundary, counts.n_interface) < 1:
        raise ConfigError(f"point counts must be >= 1, got {counts}")
    rng = np.random.default_rng(seed)
    out = {sub.id: [] for sub in partition.subdomains}
    for sub in partition.subdomains:
        pts = _rejection_sample(sub.contains, sub.bbox, counts.n_interior, rng)
        out[sub.id].append(PointSet("interior", pts))
        if sub.boundary_edges:
            chunks = [e.points(e.draw(counts.n_boundary, rng)) for e in sub.boundary_edges]
            out[sub.id].append(PointSet("boundary", np.concatenate(chunks)))
    for iface in partition.interfaces:
        ts = iface.edge.draw(counts.n_interface, rng)
        pts = iface.edge.points(ts)
        nrm = iface.edge.normals(ts)
        i, j = iface.pair
        out[i].append(
            PointSet("interface", pts, normals=nrm, interface_id=iface.id, neighbor=j)
        )
        out[j].append(
            PointSet("interface", pts.copy(), normals=-nrm, interface_id=iface.id, neighbor=i)
        )
    return out


def subdomain_grid(sub: Subdomain, resolution: int) -> np.ndarray:
    """Uniform grid over the subdomain bounding box, masked to the region."""
    x0, x1, y0, y1 = sub.bbox
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return pts[sub.contains(pts)]
