"""Unit-density Bravais lattices, Wigner-Seitz cells and polyhedron potentials."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .quadrature import tetra_quadratic_rule, tetra_rule, tetra_volume


class LatticeError(ValueError):
    """Degenerate basis or failed cell construction."""


_CONVENTIONAL = {
    # primitive vectors in units of the conventional cube edge, atoms per cube
    "SC": (np.eye(3), 1),
    "FCC": (0.5 * np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]), 4),
    "BCC": (0.5 * np.array([[-1.0, 1.0, 1.0], [1.0, -1.0, 1.0], [1.0, 1.0, -1.0]]), 2),
}


@dataclass(frozen=True)
class BravaisLattice:
    """Three basis vectors (rows) scaled to unit primitive-cell volume."""

    basis: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        basis = np.array(self.basis, dtype=float)
        if basis.shape != (3, 3):
            raise LatticeError("basis must be a 3x3 array of row vectors")
        det = np.linalg.det(basis)
        if not np.isfinite(det) or abs(det) < 1e-12:
            raise LatticeError("degenerate lattice basis")
        basis = basis / abs(det) ** (1.0 / 3.0)
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "kind", self.kind.upper() if self.kind else "custom")

    @classmethod
    def named(cls, name):
        key = name.upper()
        if key in ("CUBIC", "SIMPLE_CUBIC"):
            key = "SC"
        if key not in _CONVENTIONAL:
            raise LatticeError(f"unknown lattice {name!r}; expected sc, fcc or bcc")
        prim, _ = _CONVENTIONAL[key]
        return cls(prim, kind=key)

    @property
    def volume(self):
        return abs(float(np.linalg.det(self.basis)))

    def points_within(self, radius, include_origin=False):
        """All lattice points with ``|x| <= radius``, sorted by norm."""
        inv = np.linalg.inv(self.basis)
        # |n_i| <= radius * ||column i of inv||
        bounds = np.ceil(radius * np.linalg.norm(inv, axis=0)).astype(int)
        ranges = [np.arange(-b, b + 1) for b in bounds]
        n = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, 3)
        pts = n @ self.basis
        r = np.linalg.norm(pts, axis=1)
        keep = r <= radius * (1 + 1e-12)
        if not include_origin:
            keep &= r > 1e-12
        pts, r = pts[keep], r[keep]
        order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], np.round(r, 10)))
        return pts[order]

    def nearest_neighbour_distance(self):
        pts = self.points_within(2.0 * max(np.linalg.norm(self.basis, axis=1)))
        return float(np.linalg.norm(pts[0]))


@dataclass(frozen=True)
class Face:
    vertices: np.ndarray  # (m, 3), counter-clockwise seen from outside
    normal: np.ndarray  # outward unit normal
    offset: float  # normal . x = offset on the face


@dataclass(frozen=True)
class WignerSeitzCell:
    """Convex Voronoi cell of the origin, as faces, half-spaces and tetrahedra."""

    faces: tuple
    tetrahedra: np.ndarray  # (k, 4, 3), face fan from the origin
    vertices: np.ndarray
    volume: float = field(default=0.0)

    @property
    def half_spaces(self):
        return [(f.normal, f.offset) for f in self.faces]

    @property
    def n_faces(self):
        return len(self.faces)

    def contains(self, points, tol=1e-12):
        points = np.atleast_2d(points)
        normals = np.array([f.normal for f in self.faces])
        offsets = np.array([f.offset for f in self.faces])
        return np.all(points @ normals.T <= offsets + tol, axis=1)

    def scaled(self, factor):
        faces = tuple(
            Face(f.vertices * factor, f.normal, f.offset * factor) for f in self.faces
        )
        return WignerSeitzCell(
            faces, self.tetrahedra * factor, self.vertices * factor, self.volume * factor**3
        )


def build_ws_cell(lattice):
    """Intersect the bisector half-spaces of the two nearest shells of points."""
    pts = np.array(
        [n for n in itertools.product(range(-2, 3), repeat=3) if any(n)], dtype=float
    ) @ lattice.basis
    # half-space p.x <= |p|^2 / 2 written as A x + b <= 0
    halfspaces = np.hstack([pts, -0.5 * np.sum(pts**2, axis=1)[:, None]])
    try:
        hs = HalfspaceIntersection(halfspaces, np.zeros(3))
    except Exception as exc:  # qhull raises its own error type
        raise LatticeError(f"Wigner-Seitz construction failed: {exc}") from exc
    verts = _unique_rows(hs.intersections)
    hull = ConvexHull(verts)

    faces = []
    seen = []
    for eq in hull.equations:
        normal, off = eq[:3], -eq[3]
        if any(np.allclose(normal, n, atol=1e-9) and abs(off - o) < 1e-9 for n, o in seen):
            continue
        seen.append((normal, off))
        on = np.abs(verts @ normal - off) < 1e-9
        faces.append(_ordered_face(verts[on], normal, off))
    faces.sort(key=lambda f: tuple(np.round(f.normal, 9)))

    tets = []
    for f in faces:
        c = f.vertices.mean(axis=0)
        m = len(f.vertices)
        for i in range(m):
            tets.append([np.zeros(3), c, f.vertices[i], f.vertices[(i + 1) % m]])
    tets = np.array(tets)
    volume = float(sum(tetra_volume(t) for t in tets))
    return WignerSeitzCell(tuple(faces), tets, verts, volume)


def _unique_rows(a, tol=1e-9):
    out = []
    for row in a:
        if not any(np.linalg.norm(row - o) < tol for o in out):
            out.append(row)
    return np.array(out)


def _ordered_face(pts, normal, offset):
    c = pts.mean(axis=0)
    e1 = pts[0] - c
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    ang = np.arctan2((pts - c) @ e2, (pts - c) @ e1)
    return Face(pts[np.argsort(ang)], np.asarray(normal, float), float(offset))


def cell_moments(cell):
    """Volume, first moments and second-moment tensor of the cell (exact)."""
    vol = 0.0
    first = np.zeros(3)
    second = np.zeros((3, 3))
    for t in cell.tetrahedra:
        x, w = tetra_quadratic_rule(t)
        vol += w.sum()
        first += w @ x
        second += (x * w[:, None]).T @ x
    return vol, first, second


def quadrupole_free(cell, tol=1e-10):
    """No dipole and isotropic second moments."""
    _, first, second = cell_moments(cell)
    iso = np.trace(second) / 3.0 * np.eye(3)
    return bool(np.all(np.abs(first) < tol) and np.all(np.abs(second - iso) < tol))


def polyhedron_potential(cell, points):
    """Newtonian potential ``int_Q dy / |x - y|`` of the unit-density cell.

    Closed form: the divergence theorem reduces the volume integral to face
    integrals of ``1/R``, each of which has an exact edge-sum expression.
    Valid for points inside, on, or outside the cell.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    total = np.zeros(len(x))
    for f in cell.faces:
        n = f.normal
        h = f.offset - x @ n  # signed height; positive on the inner side
        p = x + h[:, None] * n  # projection onto the face plane
        ah = np.abs(h)
        face_ln = np.zeros(len(x))
        face_at = np.zeros(len(x))
        m = len(f.vertices)
        for i in range(m):
            a = f.vertices[i]
            b = f.vertices[(i + 1) % m]
            edge = b - a
            lhat = edge / np.linalg.norm(edge)
            u = np.cross(lhat, n)
            p0 = (a - p) @ u
            lp = (b - p) @ lhat
            lm = (a - p) @ lhat
            r02 = p0 * p0 + h * h
            rp = np.linalg.norm(b - x, axis=1)
            rm = np.linalg.norm(a - x, axis=1)
            nz = np.abs(p0) > 1e-14
            with np.errstate(divide="ignore", invalid="ignore"):
                num = np.where(lp >= 0, rp + lp, r02 / (rp - lp))
                den = np.where(lm >= 0, rm + lm, r02 / (rm - lm))
                ln = np.where(nz, p0 * np.log(num / den), 0.0)
                at = np.where(
                    nz,
                    np.arctan2(p0 * lp, r02 + ah * rp) - np.arctan2(p0 * lm, r02 + ah * rm),
                    0.0,
                )
            face_ln += ln
            face_at += at
        total += h * (face_ln - ah * face_at)
    return 0.5 * total


def _split_triangle(a, b, c):
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]


def polyhedron_potential_quadrature(cell, point, order=8, levels=0):
    """Same potential by tetrahedral quadrature with the apex at ``point``.

    Each face triangle spans a cone to ``point``; cones over faces that see
    ``point`` from outside enter with a negative sign, so the decomposition
    holds for points inside or outside the convex cell. The ``1/r``
    singularity always sits at the collapsed apex. ``levels`` refines the face
    triangles, which resolves points close to a face.
    """
    point = np.asarray(point, dtype=float)
    total = 0.0
    for f in cell.faces:
        h = f.offset - float(f.normal @ point)
        if abs(h) < 1e-300:
            continue  # the cone over a face containing the point is flat
        m = len(f.vertices)
        c = f.vertices.mean(axis=0)
        tris = [(c, f.vertices[i], f.vertices[(i + 1) % m]) for i in range(m)]
        for _ in range(levels):
            tris = [child for t in tris for child in _split_triangle(*t)]
        acc = 0.0
        for a, b, cc in tris:
            q, w = tetra_rule(np.array([point, a, b, cc]), order)
            acc += float(w @ (1.0 / np.linalg.norm(q - point, axis=1)))
        total += math.copysign(acc, h)
    return total
