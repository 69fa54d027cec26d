"""Node sets on the sphere and their geometry: mesh norm, separation radius, mesh ratio."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from .errors import SpdoInputError
from .sphcore import UNIT_TOL

log = logging.getLogger("spdo.pointsets")

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
DUPLICATE_TOL = 1e-10
LOAD_UNIT_TOL = 1e-6
DEFAULT_REFINEMENT = 6
RANDOM_CANDIDATES = 200_000
ICOSAHEDRON_EDGE = math.atan(2.0)  # geodesic edge of the unit icosahedron


def _geodesic(chord) -> np.ndarray:
    """Great-circle distance from chordal distance."""
    return 2.0 * np.arcsin(np.clip(np.asarray(chord) / 2.0, 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class PointSet:
    """Unit vectors x_1..x_N with their mesh norm h_X and separation radius q_X (radians)."""

    points: np.ndarray
    h_X: float
    q_X: float

    @classmethod
    def from_points(cls, points, *, refinement: int = DEFAULT_REFINEMENT) -> "PointSet":
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 3:
            raise SpdoInputError(f"point set must be an (N, n) array with n >= 3, got shape {pts.shape}")
        dev = np.abs(np.linalg.norm(pts, axis=1) - 1.0)
        if np.any(dev > UNIT_TOL):
            raise SpdoInputError(f"point {int(np.argmax(dev))} is not on the unit sphere")
        dup = _duplicates(pts)
        if dup:
            i, j = dup[0]
            raise SpdoInputError(f"duplicate points {i} and {j} (geodesic distance < {DUPLICATE_TOL:g})")
        pts.setflags(write=False)
        q = separation_radius(pts) if pts.shape[0] >= 2 else math.pi
        return cls(points=pts, h_X=mesh_norm(pts, refinement), q_X=q)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def rho_X(self) -> float:
        return self.h_X / self.q_X

    def permuted(self, order) -> "PointSet":
        pts = self.points[np.asarray(order)]
        pts.setflags(write=False)
        return PointSet(points=pts, h_X=self.h_X, q_X=self.q_X)


def _duplicates(pts: np.ndarray) -> list[tuple[int, int]]:
    pairs = cKDTree(pts).query_pairs(DUPLICATE_TOL, output_type="ndarray")
    return sorted((int(i), int(j)) for i, j in pairs)


# ── Generation and loading ──────────────────────────────


def fibonacci_points(N: int, *, refinement: int = DEFAULT_REFINEMENT) -> PointSet:
    """Spherical Fibonacci lattice on S^2: z_i = 1 - (2i+1)/N, golden-angle longitudes."""
    if N < 2:
        raise SpdoInputError(f"Fibonacci lattice needs N >= 2, got {N}")
    i = np.arange(N)
    z = 1.0 - (2.0 * i + 1.0) / N
    r = np.sqrt(1.0 - z * z)
    theta = 2.0 * np.pi * np.modf(i / GOLDEN_RATIO)[0]
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return PointSet.from_points(pts, refinement=refinement)


def load_points(path: Path | str, *, refinement: int = DEFAULT_REFINEMENT) -> PointSet:
    """One point per line, whitespace-separated components, ``#`` starts a comment.

    Rows within 1e-6 of unit length are normalised; others are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise SpdoInputError(f"point file not found: {path}")
    rows: list[list[float]] = []
    line_of: list[int] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            row = [float(tok) for tok in text.split()]
        except ValueError:
            raise SpdoInputError(f"{path}:{lineno}: cannot parse {text!r} as numbers") from None
        if rows and len(row) != len(rows[0]):
            raise SpdoInputError(f"{path}:{lineno}: expected {len(rows[0])} components, got {len(row)}")
        norm = math.sqrt(sum(c * c for c in row))
        if abs(norm - 1.0) > LOAD_UNIT_TOL:
            raise SpdoInputError(f"{path}:{lineno}: point has norm {norm:.6g}, not on the unit sphere")
        rows.append([c / norm for c in row])
        line_of.append(lineno)
    if not rows:
        raise SpdoInputError(f"{path}: no points")

    pts = np.array(rows)
    dup = _duplicates(pts)
    if dup:
        shown = ", ".join(f"lines {line_of[i]} and {line_of[j]}" for i, j in dup[:5])
        raise SpdoInputError(f"{path}: duplicate points at {shown}")
    log.debug("Loaded %d points in R^%d from %s.", pts.shape[0], pts.shape[1], path)
    return PointSet.from_points(pts, refinement=refinement)


def parse_points_spec(spec: str, *, refinement: int = DEFAULT_REFINEMENT) -> PointSet:
    """``fibonacci:N`` or ``file:PATH``."""
    kind, _, arg = spec.partition(":")
    if kind == "fibonacci":
        try:
            return fibonacci_points(int(arg), refinement=refinement)
        except ValueError:
            raise SpdoInputError(f"bad point count in {spec!r}") from None
    if kind == "file" and arg:
        return load_points(arg, refinement=refinement)
    raise SpdoInputError(f"unknown point spec {spec!r}; use fibonacci:N or file:PATH")


# ── Geometry ────────────────────────────────────────────


def _as_array(X) -> np.ndarray:
    return np.atleast_2d(np.asarray(getattr(X, "points", X), dtype=float))


def separation_radius(X) -> float:
    """q_X = 1/2 min_{i != j} arccos(x_i . x_j), via exact nearest neighbours."""
    pts = _as_array(X)
    if pts.shape[0] < 2:
        raise SpdoInputError("separation radius needs at least two points")
    dist, _ = cKDTree(pts).query(pts, k=2)
    return 0.5 * float(_geodesic(dist[:, 1].min()))


def icosphere(refinement: int) -> np.ndarray:
    """Vertices of the icosahedron subdivided ``refinement`` times, projected to S^2."""
    phi = GOLDEN_RATIO
    base = np.array(
        [[-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
         [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
         [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1]],
        dtype=float,
    )
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    tris = base[ConvexHull(base).simplices]  # (20, 3, 3)
    for _ in range(refinement):
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        ab, bc, ca = (a + b), (b + c), (c + a)
        ab /= np.linalg.norm(ab, axis=1, keepdims=True)
        bc /= np.linalg.norm(bc, axis=1, keepdims=True)
        ca /= np.linalg.norm(ca, axis=1, keepdims=True)
        tris = np.concatenate(
            [np.stack(t, axis=1) for t in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]
        )
    return np.unique(np.round(tris.reshape(-1, 3), 12), axis=0)


class MeshNormEstimate(NamedTuple):
    value: float
    spacing: float  # one-sided bound: the true mesh norm is at most value + spacing


def _circumcentres(pts: np.ndarray, tree: cKDTree, candidates: np.ndarray) -> np.ndarray:
    """Distances at the spherical circumcentres of each candidate's three nearest nodes.

    A circumcentre whose nearest node is no closer than its three defining
    nodes is a Voronoi vertex, a local maximiser of the distance to X.
    Invalid circumcentres contribute 0.
    """
    _, idx = tree.query(candidates, k=3)
    a, b, c = pts[idx[:, 0]], pts[idx[:, 1]], pts[idx[:, 2]]
    normal = np.cross(b - a, c - a)
    norm = np.linalg.norm(normal, axis=1)
    ok = norm > 1e-14
    centre = np.zeros_like(normal)
    centre[ok] = normal[ok] / norm[ok, None]
    flip = np.einsum("ij,ij->i", centre, candidates) < 0.0
    centre[flip] *= -1.0
    radius = np.linalg.norm(centre - a, axis=1)
    nearest, _ = tree.query(centre, k=1)
    ok &= nearest >= radius - 1e-12
    return np.where(ok, radius, 0.0)


def mesh_norm_estimate(X, refinement: int = DEFAULT_REFINEMENT, *, seed: int = 0) -> MeshNormEstimate:
    """h_X = sup_y min_j arccos(x_j . y), by a candidate grid plus local maximisation.

    n = 3 uses an icosphere at the given subdivision level and snaps the best
    grid candidates to nearby Voronoi vertices; n > 3 uses a seeded random
    candidate cloud.
    """
    pts = _as_array(X)
    n = pts.shape[1]
    tree = cKDTree(pts)
    if n == 3:
        grid = icosphere(refinement)
        spacing = ICOSAHEDRON_EDGE / 2**refinement
    else:
        rng = np.random.default_rng(seed)
        grid = rng.standard_normal((RANDOM_CANDIDATES, n))
        grid /= np.linalg.norm(grid, axis=1, keepdims=True)
        # typical gap between random candidates on S^(n-1)
        spacing = float(RANDOM_CANDIDATES ** (-1.0 / (n - 1)) * math.pi)
    grid = np.vstack([grid, -pts])  # antipodes cover N = 1, 2 exactly
    dist, _ = tree.query(grid, k=1)
    best = float(dist.max())
    if n == 3 and pts.shape[0] >= 3:
        top = grid[np.argsort(dist)[-64:]]
        best = max(best, float(_circumcentres(pts, tree, top).max()))
    return MeshNormEstimate(value=float(_geodesic(best)), spacing=spacing)


def mesh_norm(X, refinement: int = DEFAULT_REFINEMENT) -> float:
    return mesh_norm_estimate(X, refinement).value
