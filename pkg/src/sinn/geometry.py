"""Collocation and boundary point generation on simple 3D domains.

Supported shapes are axis-aligned boxes, spheres and z-axis-aligned
cylinders.  Interior points come from either a near-isotropic lattice or a
Halton (2, 3, 5) sequence restricted to the domain; boundary points are
spread near-uniformly per surface patch with analytic outward normals.
Everything is deterministic for a fixed seed (the seed offsets the
low-discrepancy sequences).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

_INTERIOR_MARGIN = 1e-9  # times domain diameter; strict-interior band


class Strategy(str, Enum):
    GRID = "grid"
    HALTON = "halton"


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if not all(h > l for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"box needs hi > lo componentwise: {self.lo}, {self.hi}")

    def bounding_box(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    def diameter(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self.bounding_box()
        q = np.maximum(lo - x, x - hi)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"sphere radius must be positive: {self.radius}")

    def bounding_box(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def diameter(self) -> float:
        return 2.0 * self.radius

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        return np.linalg.norm(x - c, axis=-1) - self.radius


@dataclass(frozen=True)
class Cylinder:
    """z-axis aligned: base disk center, radius, height (extends upward)."""

    base_center: tuple[float, float, float]
    radius: float
    height: float

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise ValueError("cylinder radius and height must be positive")

    def bounding_box(self):
        c = np.asarray(self.base_center, dtype=float)
        lo = c - np.array([self.radius, self.radius, 0.0])
        hi = c + np.array([self.radius, self.radius, self.height])
        return lo, hi

    def diameter(self) -> float:
        return float(np.hypot(2.0 * self.radius, self.height))

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        c = np.asarray(self.base_center, dtype=float)
        dr = np.hypot(x[..., 0] - c[0], x[..., 1] - c[1]) - self.radius
        dz = np.maximum(c[2] - x[..., 2], x[..., 2] - (c[2] + self.height))
        q = np.stack([dr, dz], axis=-1)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside


Domain = Box | Sphere | Cylinder


def _strictly_inside(domain: Domain, x: np.ndarray) -> np.ndarray:
    return domain.signed_distance(x) < -_INTERIOR_MARGIN * domain.diameter()


# ---------------------------------------------------------------------------
# Halton sequence

_HALTON_BASES = (2, 3, 5)
_SEED_STRIDE = 104729  # prime offset between seeds


def _radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros(indices.shape, dtype=float)
    denom = np.ones(indices.shape, dtype=float)
    rem = indices.copy()
    while np.any(rem > 0):
        denom *= base
        out += (rem % base) / denom
        rem //= base
    return out


def halton(start: int, count: int, bases=_HALTON_BASES) -> np.ndarray:
    """Points start..start+count-1 of the Halton sequence, shape (count, len(bases))."""
    idx = np.arange(start, start + count, dtype=np.int64)
    return np.stack([_radical_inverse(idx, b) for b in bases], axis=1)


# ---------------------------------------------------------------------------
# interior sampling


def sample_interior(domain: Domain, n: int, strategy="halton", seed: int = 0) -> np.ndarray:
    """n strictly-interior points, shape (n, 3), deterministic per seed."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    strategy = Strategy(strategy)
    if strategy == Strategy.GRID:
        return _sample_interior_grid(domain, n)
    return _sample_interior_halton(domain, n, seed)


def _sample_interior_halton(domain: Domain, n: int, seed: int) -> np.ndarray:
    lo, hi = domain.bounding_box()
    points = np.empty((n, 3))
    have = 0
    start = 1 + seed * _SEED_STRIDE
    proposed = 0
    limit = 100 * n
    while have < n:
        batch = min(max(2 * (n - have), 64), limit - proposed)
        if batch <= 0:
            raise RuntimeError(
                f"interior sampling exhausted {limit} proposals for {n} points "
                f"(degenerate domain {domain!r})"
            )
        cand = lo + halton(start + proposed, batch) * (hi - lo)
        proposed += batch
        keep = cand[_strictly_inside(domain, cand)]
        take = min(len(keep), n - have)
        points[have:have + take] = keep[:take]
        have += take
    return points


def _sample_interior_grid(domain: Domain, n: int) -> np.ndarray:
    """Near-isotropic cell-centered lattice, rejecting exterior points."""
    lo, hi = domain.bounding_box()
    edges = hi - lo
    # scale the per-axis resolution with edge length until enough points survive
    for total in range(n, 100 * n + 1):
        scale = (total / np.prod(edges)) ** (1.0 / 3.0)
        dims = np.maximum(1, np.round(edges * scale).astype(int))
        while np.prod(dims) < total:
            dims[np.argmin(dims * (dims + 1))] += 1  # grow the most under-resolved axis
        axes = [lo[i] + edges[i] * (np.arange(dims[i]) + 0.5) / dims[i] for i in range(3)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        inside = mesh[_strictly_inside(domain, mesh)]
        if len(inside) >= n:
            # thin evenly (deterministic) when the lattice overshoots
            idx = (np.arange(n) * len(inside)) // n
            return inside[idx]
    raise RuntimeError(f"grid sampling could not reach {n} interior points in {domain!r}")


# ---------------------------------------------------------------------------
# boundary sampling


def _apportion(weights: np.ndarray, n: int) -> np.ndarray:
    """Largest-remainder apportionment of n items proportional to weights."""
    quota = weights / weights.sum() * n
    counts = np.floor(quota).astype(int)
    short = n - counts.sum()
    if short > 0:
        order = np.argsort(-(quota - counts))
        counts[order[:short]] += 1
    return counts


def sample_boundary(domain: Domain, n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(points, outward unit normals) with near-uniform surface coverage."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if isinstance(domain, Box):
        return _sample_boundary_box(domain, n, seed)
    if isinstance(domain, Sphere):
        return _sample_boundary_sphere(domain, n, seed)
    if isinstance(domain, Cylinder):
        return _sample_boundary_cylinder(domain, n, seed)
    raise TypeError(f"unsupported domain {domain!r}")


def _sample_boundary_box(domain: Box, n: int, seed: int):
    lo, hi = domain.bounding_box()
    edges = hi - lo
    # faces: (fixed axis, fixed value, normal sign); area = product of other edges
    faces = []
    for axis in range(3):
        others = [i for i in range(3) if i != axis]
        area = edges[others[0]] * edges[others[1]]
        faces.append((axis, lo[axis], -1.0, others, area))
        faces.append((axis, hi[axis], +1.0, others, area))
    counts = _apportion(np.array([f[4] for f in faces]), n)
    points = np.empty((n, 3))
    normals = np.zeros((n, 3))
    pos = 0
    for f, (axis, value, sign, others, _) in enumerate(faces):
        m = counts[f]
        if m == 0:
            continue
        uv = halton(1 + seed * _SEED_STRIDE + f * 7907, m, bases=(2, 3))
        points[pos:pos + m, axis] = value
        for j, o in enumerate(others):
            points[pos:pos + m, o] = lo[o] + uv[:, j] * edges[o]
        normals[pos:pos + m, axis] = sign
        pos += m
    return points, normals


def _sample_boundary_sphere(domain: Sphere, n: int, seed: int):
    c = np.asarray(domain.center, dtype=float)
    i = np.arange(n)
    z = 1.0 - 2.0 * (i + 0.5) / n
    golden = np.pi * (3.0 - np.sqrt(5.0))
    theta = golden * i + 0.5 * seed  # seed rotates the spiral
    r_xy = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    normals = np.stack([r_xy * np.cos(theta), r_xy * np.sin(theta), z], axis=1)
    return c + domain.radius * normals, normals


def _sample_boundary_cylinder(domain: Cylinder, n: int, seed: int):
    c = np.asarray(domain.base_center, dtype=float)
    r, h = domain.radius, domain.height
    areas = np.array([2.0 * np.pi * r * h, np.pi * r * r, np.pi * r * r])
    n_lat, n_bot, n_top = _apportion(areas, n)
    parts, norms = [], []
    if n_lat:
        uv = halton(1 + seed * _SEED_STRIDE, n_lat, bases=(2, 3))
        theta = 2.0 * np.pi * uv[:, 0]
        z = c[2] + h * uv[:, 1]
        nx, ny = np.cos(theta), np.sin(theta)
        parts.append(np.stack([c[0] + r * nx, c[1] + r * ny, z], axis=1))
        norms.append(np.stack([nx, ny, np.zeros(n_lat)], axis=1))
    for m, z_val, n_z, face in ((n_bot, c[2], -1.0, 1), (n_top, c[2] + h, +1.0, 2)):
        if not m:
            continue
        uv = halton(1 + seed * _SEED_STRIDE + face * 7907, m, bases=(2, 3))
        rad = r * np.sqrt(uv[:, 0])
        theta = 2.0 * np.pi * uv[:, 1]
        parts.append(np.stack([c[0] + rad * np.cos(theta), c[1] + rad * np.sin(theta),
                               np.full(m, z_val)], axis=1))
        norms.append(np.tile([0.0, 0.0, n_z], (m, 1)))
    return np.concatenate(parts), np.concatenate(norms)


# ---------------------------------------------------------------------------
# tagging and point sets


def tag_boundary(points: np.ndarray, normals: np.ndarray, rule) -> np.ndarray:
    """Apply a region rule (list of (predicate, tag)); each point must match
    exactly one region.  Predicates receive (point, normal)."""
    tags = np.empty(len(points), dtype=object)
    for i, (x, nrm) in enumerate(zip(points, normals)):
        matched = [tag for pred, tag in rule if pred(x, nrm)]
        if len(matched) != 1:
            kind = "untagged" if not matched else "doubly-tagged"
            raise ValueError(
                f"{kind} boundary point at ({x[0]:.6g}, {x[1]:.6g}, {x[2]:.6g}): "
                f"{len(matched)} regions matched"
            )
        tags[i] = matched[0]
    return tags


def rule_all(tag: str):
    """Every boundary point gets the same tag."""
    return [(lambda x, n: True, tag)]


def rule_threshold(axis: int, cutoff: float, below_tag: str, above_tag: str):
    """Tag by coordinate threshold: coord <= cutoff gets below_tag."""
    return [
        (lambda x, n, a=axis, c=cutoff: x[a] <= c, below_tag),
        (lambda x, n, a=axis, c=cutoff: x[a] > c, above_tag),
    ]


def rule_cylinder_caps(domain: Cylinder, caps_tag: str, lateral_tag: str):
    """Tag cylinder caps (top and bottom disks) vs lateral surface."""
    z0 = domain.base_center[2]
    z1 = z0 + domain.height
    tol = 1e-9 * domain.diameter()

    def on_cap(x, n, z0=z0, z1=z1, tol=tol):
        return abs(x[2] - z0) <= tol or abs(x[2] - z1) <= tol

    return [(on_cap, caps_tag), (lambda x, n: not on_cap(x, n), lateral_tag)]


@dataclass
class PointSet:
    """Interior collocation points plus tagged boundary points with normals."""

    interior: np.ndarray          # (N_pde, 3)
    boundary_points: np.ndarray   # (M, 3)
    boundary_normals: np.ndarray  # (M, 3)
    boundary_tags: np.ndarray     # (M,) of DIRICHLET / NEUMANN

    @property
    def n_pde(self) -> int:
        return len(self.interior)

    @property
    def dirichlet_mask(self) -> np.ndarray:
        return self.boundary_tags == DIRICHLET

    @property
    def neumann_mask(self) -> np.ndarray:
        return self.boundary_tags == NEUMANN

    @property
    def n_dbc(self) -> int:
        return int(self.dirichlet_mask.sum())

    @property
    def n_nbc(self) -> int:
        return int(self.neumann_mask.sum())


def build_point_set(
    domain: Domain,
    n_interior: int,
    n_boundary: int,
    rule,
    strategy="halton",
    seed: int = 0,
) -> PointSet:
    interior = sample_interior(domain, n_interior, strategy=strategy, seed=seed)
    bpts, bnrm = sample_boundary(domain, n_boundary, seed=seed)
    tags = tag_boundary(bpts, bnrm, rule)
    return PointSet(interior=interior, boundary_points=bpts,
                    boundary_normals=bnrm, boundary_tags=tags)


def export_csv(points: PointSet, path) -> None:
    """Write (x, y, z, nx, ny, nz, tag) rows; interior rows have zero normals."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z", "nx", "ny", "nz", "tag"])
        for x in points.interior:
            writer.writerow([f"{v:.17g}" for v in x] + ["0", "0", "0", "interior"])
        for x, nrm, tag in zip(points.boundary_points, points.boundary_normals,
                               points.boundary_tags):
            writer.writerow([f"{v:.17g}" for v in x] + [f"{v:.17g}" for v in nrm] + [tag])
