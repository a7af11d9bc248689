"""Reference computations used only to cross-check the main engine.

None of these touch the face lattice or the active-region tables: they work
from the raw half-space description or from sampled boundaries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from .geometry import Polytope


def kkt_normals(P: Polytope, y) -> list[tuple[frozenset, np.ndarray]]:
    """Bases of normals from ``y`` by enumerating active facet sets.

    ``z`` is a base iff ``z - y`` lies in the normal cone at ``z``, i.e.
    ``z = y + sum_j lam_j a_j`` over the facets S active at z with ``lam > 0``.
    """
    y = np.asarray(y, dtype=float)
    A, b = P.normals, P.offsets
    m, n = A.shape
    out = []
    for r in range(1, n + 1):
        for S in itertools.combinations(range(m), r):
            AS = A[list(S)]
            G = AS @ AS.T
            if np.linalg.cond(G) > 1e12:
                continue
            lam = np.linalg.solve(G, b[list(S)] - AS @ y)
            if np.any(lam <= 0):
                continue
            z = y + AS.T @ lam
            rest = [j for j in range(m) if j not in S]
            if np.all(b[rest] - A[rest] @ z > 0):
                out.append((frozenset(S), z))
    return out


def _boundary_cycle(P: Polytope) -> np.ndarray:
    c = P.centroid
    ang = np.arctan2(*(P.vertices - c).T[::-1])
    return P.vertices[np.argsort(ang)]


def polygon_grid_criticals(P: Polytope, y, samples_per_unit: int = 4000):
    """Strict local extrema of ``|x - y|^2`` along a finely sampled polygon
    boundary, as ``(point, 'min' | 'max')``."""
    y = np.asarray(y, dtype=float)
    V = _boundary_cycle(P)
    pts = []
    for i in range(len(V)):
        p, q = V[i], V[(i + 1) % len(V)]
        k = max(8, int(np.linalg.norm(q - p) / P.scale * samples_per_unit))
        t = np.arange(k) / k
        pts.append(p + t[:, None] * (q - p))
    X = np.vstack(pts)
    f = ((X - y) ** 2).sum(axis=1)
    prev, nxt = np.roll(f, 1), np.roll(f, -1)
    out = [(X[i], "min") for i in np.flatnonzero((f < prev) & (f < nxt))]
    out += [(X[i], "max") for i in np.flatnonzero((f > prev) & (f > nxt))]
    return out


@dataclass
class BoundaryMesh:
    """Triangulation of the boundary of a 3-polytope with near-uniform
    triangles of size ``h``.

    Each facet is Delaunay-triangulated from a square grid of interior points
    plus points spaced along its edges; the edge points are shared with the
    neighbouring facet so every edge of P is a chain of mesh edges.
    """

    points: np.ndarray
    links: list

    @classmethod
    def build(cls, P: Polytope, h: float | None = None) -> "BoundaryMesh":
        if P.dim != 3:
            raise ValueError("boundary meshes are for 3-polytopes")
        if h is None:
            h = P.scale / 40
        pts: list = [v for v in P.vertices]
        edge_pts: dict = {}

        def edge_chain(u: int, v: int) -> list[int]:
            key = (min(u, v), max(u, v))
            if key not in edge_pts:
                p, q = P.vertices[key[0]], P.vertices[key[1]]
                k = max(1, int(np.ceil(np.linalg.norm(q - p) / h)))
                ids = [key[0]]
                for i in range(1, k):
                    ids.append(len(pts))
                    pts.append(p + (i / k) * (q - p))
                ids.append(key[1])
                edge_pts[key] = ids
            ids = edge_pts[key]
            return ids if key[0] == u else ids[::-1]

        tris = []
        for j in range(P.n_facets):
            vids = np.flatnonzero(P.incidence[:, j])
            c = P.vertices[vids].mean(axis=0)
            e1 = P.vertices[vids[0]] - c
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(P.normals[j], e1)
            ang = np.arctan2((P.vertices[vids] - c) @ e2, (P.vertices[vids] - c) @ e1)
            ring = [int(v) for v in vids[np.argsort(ang)]]
            local = []
            for t in range(len(ring)):
                local += edge_chain(ring[t], ring[(t + 1) % len(ring)])[:-1]
            uv = [((pts[i] - c) @ e1, (pts[i] - c) @ e2) for i in local]
            # interior grid, kept away from the facet boundary
            others = [k for k in range(P.n_facets) if k != j]
            lo, hi = np.min(uv, axis=0), np.max(uv, axis=0)
            gu = np.arange(lo[0] + h / 2, hi[0], h)
            gv = np.arange(lo[1] + h / 2, hi[1], h)
            G = np.array([(a, b) for a in gu for b in gv]).reshape(-1, 2)
            X = c + G[:, :1] * e1 + G[:, 1:] * e2
            inside = (P.offsets[others] - X @ P.normals[others].T).min(axis=1) > 0.4 * h \
                if len(X) else np.zeros(0, dtype=bool)
            for x, g in zip(X[inside], G[inside]):
                local.append(len(pts))
                pts.append(x)
                uv.append(tuple(g))
            uv = np.array(uv)
            for s in Delaunay(uv).simplices:
                a, b, d = uv[s]
                area = 0.5 * abs((b - a)[0] * (d - a)[1] - (b - a)[1] * (d - a)[0])
                if area > 1e-9 * h * h:
                    tris.append([local[i] for i in s])
        X = np.array(pts)
        tri = np.array(tris)
        a, b, c = X[tri[:, 0]], X[tri[:, 1]], X[tri[:, 2]]
        flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), a - P.centroid) < 0
        tri[flip] = tri[flip][:, [0, 2, 1]]
        succ: list[dict] = [dict() for _ in range(len(X))]
        for t in tri:
            for k in range(3):
                succ[t[k]][t[(k + 1) % 3]] = t[(k + 2) % 3]
        links = []
        for v in range(len(X)):
            nxt = succ[v]
            cyc = [next(iter(nxt))]
            while len(cyc) < len(nxt):
                cyc.append(nxt[cyc[-1]])
            if nxt[cyc[-1]] != cyc[0]:
                raise RuntimeError(f"mesh link of point {v} is not a cycle")
            links.append(np.array(cyc))
        return cls(X, links)


def mesh_grid_criticals(mesh: BoundaryMesh, y):
    """Topological critical points of ``|x - y|^2`` on a boundary mesh via
    lower-link sign changes, as ``(point, kind, multiplicity)`` with kind in
    ``min | saddle | max``."""
    y = np.asarray(y, dtype=float)
    f = ((mesh.points - y) ** 2).sum(axis=1)
    order = np.empty(len(f), dtype=np.int64)
    order[np.lexsort((np.arange(len(f)), f))] = np.arange(len(f))
    out = []
    for v, cyc in enumerate(mesh.links):
        s = order[cyc] > order[v]
        changes = int(np.count_nonzero(s != np.roll(s, 1)))
        if changes == 0:
            out.append((mesh.points[v], "min" if s[0] else "max", 1))
        elif changes > 2:
            out.append((mesh.points[v], "saddle", changes // 2 - 1))
    return out
