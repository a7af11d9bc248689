"""Simple convex polytopes: hull construction, face lattice, projections, cones.

A :class:`Polytope` is stored in both descriptions at once (vertices and unit
outward facet half-spaces ``a . x <= b``) together with the vertex/facet
incidence matrix.  Because every polytope handled here is *simple*, a proper
face is determined by the set of facets containing it, and every subset of the
facets through a vertex is such a set.  The lattice is enumerated that way.

Tolerances are relative: an absolute residual is compared against
``tol * P.scale`` where ``scale`` is the circumradius about the vertex centroid.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .errors import DegenerateInput, NotInAffineHull, NotSimple

DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Face:
    """A proper face; ``basis`` spans the directions of its affine hull and
    ``normal_basis`` the orthogonal complement."""

    id: int
    dim: int
    vertex_ids: frozenset
    facet_ids: frozenset
    point: np.ndarray
    basis: np.ndarray
    normal_basis: np.ndarray

    @property
    def codim(self) -> int:
        return len(self.facet_ids)

    @property
    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def __repr__(self) -> str:
        return f"Face(id={self.id}, dim={self.dim}, facets={sorted(self.facet_ids)})"


@dataclass(frozen=True, eq=False)
class Cone:
    """The cone of a face: the facets through the apex face, extended.

    ``rays[i]`` is the unit extreme ray (modulo lineality) lying on every
    facet of the apex face except ``facet_ids[i]``.
    """

    apex_face: Face
    facet_ids: tuple
    normals: np.ndarray
    offsets: np.ndarray
    base: np.ndarray
    rays: np.ndarray

    @property
    def lineality_dim(self) -> int:
        return self.apex_face.dim

    @property
    def lineality(self) -> np.ndarray:
        return self.apex_face.basis

    def slack(self, y) -> np.ndarray:
        """Signed distances of ``y`` to the bounding hyperplanes (positive inside)."""
        return self.offsets - np.asarray(y, dtype=float) @ self.normals.T

    def contains(self, y, margin: float = 0.0) -> bool:
        return bool(np.all(self.slack(y) >= margin))


@dataclass(frozen=True)
class GenericityViolation:
    first: int
    second: int
    kind: str
    residual: float


@dataclass(frozen=True)
class GenericityReport:
    violations: tuple
    checked_pairs: int

    @property
    def passed(self) -> bool:
        return not self.violations


@dataclass(eq=False)
class Polytope:
    vertices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    incidence: np.ndarray
    faces: tuple = field(repr=False)
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        self.centroid = self.vertices.mean(axis=0)
        self.scale = float(np.max(np.linalg.norm(self.vertices - self.centroid, axis=1)))
        self._by_facets = {f.facet_ids: f for f in self.faces}
        self.vertex_facets = tuple(frozenset(np.flatnonzero(row).tolist()) for row in self.incidence)
        for a in (self.vertices, self.normals, self.offsets, self.incidence):
            a.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_facets(self) -> int:
        return self.normals.shape[0]

    def face_counts(self) -> list[int]:
        counts = [0] * self.dim
        for f in self.faces:
            counts[f.dim] += 1
        return counts

    def faces_of_dim(self, k: int) -> list[Face]:
        return [f for f in self.faces if f.dim == k]

    def face_by_facets(self, facet_ids: Iterable[int]) -> Face:
        return self._by_facets[frozenset(facet_ids)]

    def vertex_face(self, v: int) -> Face:
        return self._by_facets[self.vertex_facets[v]]

    def faces_containing(self, F: Face, proper: bool = True) -> list[Face]:
        """Faces G with F a subface of G (``F`` itself included unless ``proper``)."""
        return [G for G in self.faces
                if G.facet_ids <= F.facet_ids and not (proper and G is F)]

    def subfaces(self, F: Face, codim: int = 1) -> list[Face]:
        return [G for G in self.faces
                if F.facet_ids < G.facet_ids and G.dim == F.dim - codim]

    def slack(self, y) -> np.ndarray:
        return self.offsets - np.asarray(y, dtype=float) @ self.normals.T

    def is_interior(self, y, margin: float | None = None) -> bool:
        if margin is None:
            margin = self.tol * self.scale
        return bool(np.all(self.slack(y) > margin))

    def chebyshev_center(self) -> tuple[np.ndarray, float]:
        n = self.dim
        c = np.zeros(n + 1)
        c[-1] = -1.0
        A = np.hstack([self.normals, np.ones((self.n_facets, 1))])
        res = linprog(c, A_ub=A, b_ub=self.offsets, bounds=[(None, None)] * (n + 1),
                      method="highs")
        return res.x[:n], float(res.x[n])

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "vertices": self.vertices.tolist(),
            "facets": [{"normal": a.tolist(), "offset": float(b)}
                       for a, b in zip(self.normals, self.offsets)],
        }

    @classmethod
    def from_json(cls, data: dict, tol: float = DEFAULT_TOL) -> "Polytope":
        if data.get("vertices"):
            P = build_polytope(data["vertices"], tol=tol)
        elif data.get("facets"):
            A = [f["normal"] for f in data["facets"]]
            b = [f["offset"] for f in data["facets"]]
            P = polytope_from_halfspaces(A, b, tol=tol)
        else:
            raise DegenerateInput("polytope JSON needs 'vertices' or 'facets'")
        if "dim" in data and int(data["dim"]) != P.dim:
            raise DegenerateInput(f"declared dim {data['dim']} but points live in R^{P.dim}")
        return P


def _merge_equations(eqs: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Collapse the triangulated qhull facets onto distinct hyperplanes."""
    normals, offsets = [], []
    for eq in eqs:
        a, b = eq[:-1], -eq[-1]
        nrm = np.linalg.norm(a)
        a, b = a / nrm, b / nrm
        for i, (a2, b2) in enumerate(zip(normals, offsets)):
            if np.linalg.norm(a - a2) < tol and abs(b - b2) < tol:
                break
        else:
            normals.append(a)
            offsets.append(b)
    return np.array(normals), np.array(offsets)


def build_polytope(vertices: Sequence, tol: float = DEFAULT_TOL) -> Polytope:
    """Convex hull of ``vertices``; interior and duplicate points are dropped."""
    pts = np.asarray(vertices, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < pts.shape[1] + 1:
        raise DegenerateInput("need at least n+1 points in R^n")
    n = pts.shape[1]
    if np.linalg.matrix_rank(pts - pts.mean(axis=0), tol=1e-10 * np.abs(pts).max()) < n:
        raise DegenerateInput("points are not full-dimensional")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateInput(str(exc)) from exc
    scale = float(np.max(np.linalg.norm(pts - pts.mean(axis=0), axis=1)))
    A, b = _merge_equations(hull.equations, 1e-7)
    verts = pts[np.sort(hull.vertices)]
    return _assemble(verts, A, b, tol, scale)


def polytope_from_halfspaces(normals: Sequence, offsets: Sequence,
                             tol: float = DEFAULT_TOL) -> Polytope:
    """Intersection of ``a_i . x <= b_i``; redundant half-spaces are dropped."""
    A = np.asarray(normals, dtype=float)
    b = np.asarray(offsets, dtype=float)
    nrm = np.linalg.norm(A, axis=1)
    A, b = A / nrm[:, None], b / nrm
    m, n = A.shape
    # bounded iff the normals positively span R^n
    res = linprog(np.zeros(m), A_eq=A.T, b_eq=np.zeros(n), bounds=[(1.0, None)] * m,
                  method="highs")
    if res.status != 0 or np.linalg.matrix_rank(A) < n:
        raise DegenerateInput("half-spaces do not bound a polytope")
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.hstack([A, np.ones((m, 1))]), b_ub=b,
                  bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0 or res.x[-1] <= 1e-12:
        raise DegenerateInput("half-spaces have empty interior")
    try:
        hs = HalfspaceIntersection(np.hstack([A, -b[:, None]]), res.x[:n])
    except QhullError as exc:
        raise DegenerateInput(str(exc)) from exc
    verts = hs.intersections
    scale = float(np.max(np.linalg.norm(verts - verts.mean(axis=0), axis=1)))
    uniq: list[np.ndarray] = []
    for v in verts:
        if all(np.linalg.norm(v - u) > 1e-9 * scale for u in uniq):
            uniq.append(v)
    verts = np.array(uniq)
    inc = np.abs(verts @ A.T - b) <= 1e-7 * scale
    keep = inc.sum(axis=0) >= n
    return _assemble(verts, A[keep], b[keep], tol, scale)


def _assemble(verts: np.ndarray, A: np.ndarray, b: np.ndarray, tol: float,
              scale: float) -> Polytope:
    n = verts.shape[1]
    order = np.lexsort(verts.T[::-1])
    verts = verts[order]
    forder = np.lexsort(np.column_stack([A, b]).T[::-1])
    A, b = A[forder], b[forder]
    resid = verts @ A.T - b
    if np.any(resid > 1e-7 * scale):
        raise DegenerateInput("vertices violate the facet inequalities")
    inc = np.abs(resid) <= max(tol, 1e-7) * scale
    per_vertex = inc.sum(axis=1)
    if np.any(per_vertex != n):
        bad = int(np.flatnonzero(per_vertex != n)[0])
        raise NotSimple(f"vertex {bad} lies on {per_vertex[bad]} facets, expected {n}")
    faces = _enumerate_faces(verts, A, b, inc)
    P = Polytope(verts, A, b, inc, faces, tol)
    return P


def _enumerate_faces(verts, A, b, inc) -> tuple:
    n = verts.shape[1]
    vfacets = [frozenset(np.flatnonzero(row).tolist()) for row in inc]
    keys = set()
    for S in vfacets:
        for r in range(1, n + 1):
            keys.update(frozenset(T) for T in itertools.combinations(sorted(S), r))
    keys = sorted(keys, key=lambda T: (n - len(T), sorted(T)))
    faces = []
    for T in keys:
        vids = frozenset(i for i, S in enumerate(vfacets) if T <= S)
        AT = A[sorted(T)]
        _, _, vt = np.linalg.svd(AT)
        k = len(T)
        point = verts[sorted(vids)].mean(axis=0)
        faces.append(Face(len(faces), n - k, vids, T, point, vt[k:].copy(), vt[:k].copy()))
    return tuple(faces)


def project_to_affine_hull(y, F: Face) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal projection ``z`` of ``y`` on aff(F) and the residual ``w = y - z``."""
    y = np.asarray(y, dtype=float)
    d = y - F.point
    z = F.point + F.basis.T @ (F.basis @ d)
    return z, y - z


def relint_margin(P: Polytope, z, F: Face) -> float:
    """Smallest slack of ``z`` in the facet inequalities that do not contain ``F``.

    On aff(F) these are exactly the inequalities cutting out F, so ``z`` lies
    in the relative interior iff the result is positive.
    """
    others = [j for j in range(P.n_facets) if j not in F.facet_ids]
    if not others:
        return np.inf
    return float(np.min(P.offsets[others] - P.normals[others] @ z))


def in_relative_interior(P: Polytope, z, F: Face, margin: float | None = None) -> bool:
    z = np.asarray(z, dtype=float)
    if margin is None:
        margin = P.tol * P.scale
    _, w = project_to_affine_hull(z, F)
    if np.linalg.norm(w) > max(P.tol, 1e-9) * P.scale:
        raise NotInAffineHull(f"point is {np.linalg.norm(w):.3g} away from aff of face {F.id}")
    if F.dim == 0:
        return bool(np.linalg.norm(z - F.point) <= margin)
    return relint_margin(P, z, F) >= margin


def cone_of_face(P: Polytope, F: Face) -> Cone:
    ids = tuple(sorted(F.facet_ids))
    A = P.normals[list(ids)]
    b = P.offsets[list(ids)]
    N = F.normal_basis
    R = -np.linalg.inv(A @ N.T)
    rays = (N.T @ R).T
    rays /= np.linalg.norm(rays, axis=1)[:, None]
    return Cone(F, ids, A, b, F.point.copy(), rays)


def _principal_cosines(B1: np.ndarray, B2: np.ndarray) -> np.ndarray:
    """Cosines of the principal angles between row spaces, batched on axis 0."""
    return np.linalg.svd(B1 @ np.swapaxes(B2, -1, -2), compute_uv=False)


def check_genericity(P: Polytope, tol: float = 1e-6, max_subset: int | None = None
                     ) -> GenericityReport:
    """Flag pairs of affine hulls that are parallel or orthogonal.

    By default the hulls are those of the lattice faces; with ``max_subset`` the
    hulls of all affinely independent vertex subsets of size 2..max_subset are
    used instead.  A pair where one hull is spanned by a subset of the other's
    vertices is skipped, since its parallelism is forced.

    ``parallel`` residual: sine of the largest principal angle (zero when the
    smaller direction space lies in the larger).  ``orthogonal`` residual:
    cosine of the largest principal angle.
    """
    if max_subset is None:
        objs = [(f.id, f.vertex_ids, f.basis) for f in P.faces if f.dim > 0]
    else:
        objs = []
        for r in range(2, max_subset + 1):
            for S in itertools.combinations(range(len(P.vertices)), r):
                D = P.vertices[list(S[1:])] - P.vertices[S[0]]
                u, s, vt = np.linalg.svd(D, full_matrices=False)
                if s[-1] < 1e-9 * P.scale:
                    continue
                objs.append((len(objs), frozenset(S), vt))
    by_dim: dict[int, list] = {}
    for o in objs:
        by_dim.setdefault(o[2].shape[0], []).append(o)
    violations = []
    checked = 0
    dims = sorted(by_dim)
    for i, d1 in enumerate(dims):
        for d2 in dims[i:]:
            L1, L2 = by_dim[d1], by_dim[d2]
            pairs = [(a, c) for ia, a in enumerate(L1)
                     for ic, c in enumerate(L2)
                     if (d1 != d2 or ic > ia) and not (a[1] <= c[1] or c[1] <= a[1])]
            if not pairs:
                continue
            checked += len(pairs)
            B1 = np.stack([p[0][2] for p in pairs])
            B2 = np.stack([p[1][2] for p in pairs])
            cos = _principal_cosines(B1, B2)
            par = np.sqrt(np.clip(1.0 - cos[:, -1] ** 2, 0.0, None))
            orth = cos[:, -1]
            for idx in np.flatnonzero(par < tol):
                violations.append(GenericityViolation(pairs[idx][0][0], pairs[idx][1][0],
                                                      "parallel", float(par[idx])))
            for idx in np.flatnonzero(orth < tol):
                violations.append(GenericityViolation(pairs[idx][0][0], pairs[idx][1][0],
                                                      "orthogonal", float(orth[idx])))
    return GenericityReport(tuple(violations), checked)


def euler_characteristic(P: Polytope) -> int:
    return sum((-1) ** k * c for k, c in enumerate(P.face_counts()))
