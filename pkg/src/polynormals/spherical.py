"""Spherical simplices: links of faces, nice/skew triangles, spherical distance
critical points and the min-max center machinery for tetrahedra in S^3.

A spherical simplex is the intersection of the unit sphere with the simplicial
cone spanned by k linearly independent unit vectors of R^k.  Its faces are the
non-empty proper vertex subsets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize

from .errors import (DegenerateTriangle, InconsistentDihedralRole, PointNotInterior,
                     PreconditionFailed)
from .geometry import Face, Polytope

HALF_PI = np.pi / 2

NICE, SKEW, DEGENERATE = "Nice", "Skew", "Degenerate"


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class SphericalPolytope:
    """Spherical simplex with ``vertices`` as rows (unit vectors of R^k).

    ``basis`` (k x n), when present, embeds the coordinates back into the
    ambient space of the polytope the simplex is a link of.
    """

    vertices: np.ndarray
    basis: np.ndarray | None = None
    origin_face_id: int | None = None
    labels: tuple = ()

    @property
    def k(self) -> int:
        return self.vertices.shape[1]

    def faces(self) -> list[tuple]:
        m = len(self.vertices)
        return [S for r in range(1, m) for S in itertools.combinations(range(m), r)]

    def edges(self) -> list[tuple]:
        return list(itertools.combinations(range(len(self.vertices)), 2))

    def barycentric(self, Y) -> np.ndarray:
        """Coefficients of ``Y`` in the vertex basis."""
        return np.linalg.solve(self.vertices.T, np.asarray(Y, dtype=float))

    def contains(self, Y, margin: float = 0.0) -> bool:
        return bool(np.all(self.barycentric(Y) > margin))

    def hemisphere_center(self) -> np.ndarray:
        """A unit ``u`` with ``<u, V_i>`` equal and positive for every vertex."""
        return _unit(np.linalg.solve(self.vertices, np.ones(len(self.vertices))))

    def in_open_hemisphere(self) -> bool:
        u = self.hemisphere_center()
        return bool(np.all(self.vertices @ u > 0))

    def to_json(self) -> dict:
        return {"k": self.k, "vertices": self.vertices.tolist(),
                "origin_face": self.origin_face_id, "labels": list(self.labels)}


def spherical_link(P: Polytope, F: Face) -> SphericalPolytope:
    """Link of ``F``: one vertex per face G one dimension up, the unit normal
    component of ``point(G) - point(F)``, in coordinates of (lin F)^perp."""
    if F.codim < 2:
        raise PreconditionFailed("links are defined for faces of codimension >= 2")
    N = F.normal_basis
    verts, labels = [], []
    for i in sorted(F.facet_ids):
        G = P.face_by_facets(F.facet_ids - {i})
        verts.append(N @ (G.point - F.point))
        labels.append(G.id)
    return SphericalPolytope(_unit(np.array(verts)), N, F.id, tuple(labels))


# -- triangles -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SphericalTriangle:
    V: np.ndarray

    @classmethod
    def of(cls, V1, V2, V3) -> "SphericalTriangle":
        return cls(_unit(np.array([V1, V2, V3], dtype=float)))

    @classmethod
    def from_polytope(cls, Q: SphericalPolytope) -> "SphericalTriangle":
        if Q.vertices.shape != (3, 3):
            raise PreconditionFailed("not a spherical triangle")
        return cls(Q.vertices)

    def edge(self, i: int, j: int) -> float:
        return float(np.arccos(np.clip(self.V[i] @ self.V[j], -1, 1)))

    def angle(self, i: int) -> float:
        j, k = [x for x in range(3) if x != i]
        a = self.V[i]
        tj = self.V[j] - (self.V[j] @ a) * a
        tk = self.V[k] - (self.V[k] @ a) * a
        c = tj @ tk / (np.linalg.norm(tj) * np.linalg.norm(tk))
        return float(np.arccos(np.clip(c, -1, 1)))

    @property
    def edge_lengths(self) -> tuple:
        return self.edge(0, 1), self.edge(0, 2), self.edge(1, 2)

    @property
    def angles(self) -> tuple:
        return self.angle(0), self.angle(1), self.angle(2)

    @property
    def volume(self) -> float:
        return abs(float(np.linalg.det(self.V)))


@dataclass(frozen=True)
class TriangleClassification:
    verdict: str
    margin: float
    witness: np.ndarray | None
    signature: tuple

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "margin": self.margin,
                "witness": None if self.witness is None else self.witness.tolist(),
                "signature": {"angles": list(self.signature[0]),
                              "edges": list(self.signature[1])}}


def _nice_constraints(V: np.ndarray) -> np.ndarray:
    """Unit vectors c with the nice conditions equivalent to ``c . X > 0``.

    Rows: three barycentric coordinates (X inside), six foot-of-perpendicular
    coefficients (the foot on each edge's great circle falls inside the edge)
    and three ``<X, V_i>`` (distance to each vertex below pi/2).
    """
    V = np.asarray(V, dtype=float)
    rows = list(np.linalg.inv(V.T))
    for i, j in ((0, 1), (0, 2), (1, 2)):
        g = V[i] @ V[j]
        rows.append(V[i] - g * V[j])
        rows.append(V[j] - g * V[i])
    rows.extend(V)
    return _unit(np.array(rows))


def _signature(T: SphericalTriangle) -> tuple:
    ang = tuple("acute" if a < HALF_PI else "obtuse" for a in T.angles)
    edg = tuple("short" if e < HALF_PI else "long" for e in T.edge_lengths)
    return ang, edg


def nice_margin(T: SphericalTriangle, X) -> float:
    """Smallest normalized slack of ``X`` in the nice conditions."""
    X = _unit(X)
    return float(np.min(_nice_constraints(T.V) @ X))


def classify_triangle(T: SphericalTriangle, tol: float = 1e-9) -> TriangleClassification:
    """Nice / Skew / Degenerate by maximizing the worst nice condition.

    All conditions are homogeneous linear inequalities in X, so the witnesses
    form an open polyhedral cone; the best margin on the slice where the
    barycentric coordinates sum to one comes from a small LP.
    """
    if T.volume < tol:
        raise DegenerateTriangle(f"vertices nearly dependent (det {T.volume:.3g})")
    C = _nice_constraints(T.V)
    u = np.linalg.solve(T.V, np.ones(3))
    res = linprog(np.r_[0, 0, 0, -1.0],
                  A_ub=np.hstack([-C, np.ones((len(C), 1))]), b_ub=np.zeros(len(C)),
                  A_eq=np.r_[u, 0][None, :], b_eq=[1.0],
                  bounds=[(None, None)] * 3 + [(None, 1.0)], method="highs")
    X = _unit(res.x[:3])
    margin = float(np.min(C @ X))
    if margin >= tol:
        return TriangleClassification(NICE, margin, X, _signature(T))
    verdict = SKEW if margin <= -tol else DEGENERATE
    return TriangleClassification(verdict, margin, None, _signature(T))


def classify_triangles(Vs: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized verdicts for a stack of triangles ``(N, 3, 3)``.

    The closed witness cone is pointed, so it has interior iff the sum of its
    feasible edge candidates (pairwise intersections of constraint planes) is
    strictly feasible.  Cases within 1e-7 of a threshold are re-run through
    :func:`classify_triangle`.  Returns ``(verdicts, margins)``; ``margins`` is
    NaN for confident Skew verdicts.
    """
    Vs = _unit(np.asarray(Vs, dtype=float))
    N = len(Vs)
    C = np.empty((N, 12, 3))
    inv = np.linalg.inv(np.swapaxes(Vs, 1, 2))
    C[:, :3] = inv
    r = 3
    for i, j in ((0, 1), (0, 2), (1, 2)):
        g = np.einsum("ni,ni->n", Vs[:, i], Vs[:, j])[:, None]
        C[:, r] = Vs[:, i] - g * Vs[:, j]
        C[:, r + 1] = Vs[:, j] - g * Vs[:, i]
        r += 2
    C[:, 9:] = Vs
    C = _unit(C)
    pairs = np.array(list(itertools.combinations(range(12), 2)))
    cand = np.cross(C[:, pairs[:, 0]], C[:, pairs[:, 1]])
    nrm = np.linalg.norm(cand, axis=-1, keepdims=True)
    cand = np.where(nrm > 1e-12, cand / np.where(nrm > 0, nrm, 1), 0.0)
    cand = np.concatenate([cand, -cand], axis=1)
    vals = np.einsum("nci,nri->ncr", cand, C)
    worst = vals.min(axis=2)
    ok = (worst >= -1e-12) & (nrm.repeat(2, axis=1)[..., 0] > 1e-12)
    X = np.einsum("nc,nci->ni", ok.astype(float), cand)
    Xn = np.linalg.norm(X, axis=1)
    margins = np.full(N, np.nan)
    has = Xn > 1e-12
    margins[has] = np.einsum("nri,ni->nr", C[has], X[has] / Xn[has, None]).min(axis=1)
    verdicts = np.full(N, SKEW, dtype=object)
    verdicts[has & (margins >= tol)] = NICE
    near = ~has & (worst.max(axis=1) > -1e-7)
    near |= has & (margins < 1e-7)
    for i in np.flatnonzero(near):
        c = classify_triangle(SphericalTriangle(Vs[i]), tol)
        verdicts[i], margins[i] = c.verdict, c.margin
    return verdicts, margins


def witness_grid_search(T: SphericalTriangle, grid: int = 64, refine: bool = True
                        ) -> tuple[float, np.ndarray]:
    """Best nice margin found by a ``grid x grid`` scan of the gnomonic chart
    around the triangle, followed by Nelder-Mead refinement."""
    c = _unit(np.linalg.solve(T.V, np.ones(3)))
    e1 = _unit(np.cross(c, T.V[0]))
    e2 = np.cross(c, e1)
    chart = np.array([[v @ e1 / (v @ c), v @ e2 / (v @ c)] for v in T.V])
    lo, hi = chart.min(axis=0), chart.max(axis=0)
    a = np.linspace(lo[0], hi[0], grid)
    b = np.linspace(lo[1], hi[1], grid)
    A, B = np.meshgrid(a, b)
    X = c + A.reshape(-1, 1) * e1 + B.reshape(-1, 1) * e2
    C = _nice_constraints(T.V)
    m = (_unit(X) @ C.T).min(axis=1)
    i = int(np.argmax(m))
    best, ab = float(m[i]), np.array([A.flat[i], B.flat[i]])
    if refine:
        f = lambda q: -float(np.min(C @ _unit(c + q[0] * e1 + q[1] * e2)))
        res = minimize(f, ab, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000})
        if -res.fun > best:
            best, ab = -res.fun, res.x
    return best, _unit(c + ab[0] * e1 + ab[1] * e2)


@dataclass(frozen=True)
class SkewSignature:
    labeling: tuple | None
    checked_points: int
    item3_failures: int

    @property
    def ok(self) -> bool:
        return self.labeling is not None and self.item3_failures == 0


def skew_labeling(T: SphericalTriangle) -> tuple | None:
    """The renumbering (V1, V2, V3) with acute angles at V1, V3, obtuse at V2,
    long edges V1V2, V1V3 and a short edge V2V3, if one exists."""
    for p in itertools.permutations(range(3)):
        a1, a2, a3 = (T.angle(i) for i in p)
        if not (a1 < HALF_PI and a3 < HALF_PI and a2 > HALF_PI):
            continue
        if T.edge(p[0], p[1]) > HALF_PI and T.edge(p[0], p[2]) > HALF_PI \
                and T.edge(p[1], p[2]) < HALF_PI:
            return p
    return None


def skew_signature(T: SphericalTriangle, rng: np.random.Generator | None = None,
                   samples: int = 100) -> SkewSignature:
    """Angle and edge pattern of a skew triangle, plus a random spot check that
    every Z with ``|V1 Z|, |V3 Z| < pi/2`` also has ``|V2 Z| < pi/2``."""
    p = skew_labeling(T)
    if p is None:
        return SkewSignature(None, 0, 0)
    rng = rng or np.random.default_rng(0)
    Z = _unit(rng.dirichlet(np.ones(3), size=samples) @ T.V)
    d = Z @ T.V[list(p)].T
    hyp = (d[:, 0] > 0) & (d[:, 2] > 0)
    fails = int(np.count_nonzero(hyp & ~(d[:, 1] > 0)))
    return SkewSignature(p, samples, fails)


def skew_signature_check(T: SphericalTriangle, classification: TriangleClassification,
                         rng: np.random.Generator | None = None, samples: int = 100) -> bool:
    if classification.verdict != SKEW:
        raise PreconditionFailed("signature check applies to skew triangles only")
    return skew_signature(T, rng, samples).ok


# -- spherical squared distance ------------------------------------------------------

@dataclass(frozen=True)
class SphericalRecord:
    face: tuple
    base: np.ndarray
    distance: float
    morse_index: int
    slack: float
    long: bool
    marginal: bool = False


def spherical_sqd_critical_points(Q: SphericalPolytope, Y, tol: float = 1e-9
                                  ) -> list[SphericalRecord]:
    """Critical points of the geodesic distance from ``Y`` on the boundary.

    On the great subsphere of a face S the distance has two critical points,
    the normalized projection of Y (nearest) and its antipode; each counts when
    it lies in the relative interior of S and the great sphere through it
    orthogonal to the geodesic towards Y supports Q.  Records at distance
    ``>= pi/2`` are flagged ``long``.
    """
    Y = _unit(Y)
    V = Q.vertices
    if not Q.contains(Y):
        raise PointNotInterior("Y is not inside the spherical simplex")
    m = len(V)
    out = []
    for S in Q.faces():
        VS = V[list(S)]
        if len(S) == 1:
            z = VS[0]
            coef_margin = np.inf
        else:
            c = np.linalg.solve(VS @ VS.T, VS @ Y)
            if np.all(c > -tol):
                sign = 1.0
            elif np.all(c < tol):
                sign = -1.0
            else:
                continue
            p = VS.T @ c
            if np.linalg.norm(p) < tol:
                continue
            z = sign * p / np.linalg.norm(p)
            coef_margin = float(np.min(sign * c))
        yz = float(Y @ z)
        rest = [j for j in range(m) if j not in S]
        slack = float(np.min(V[rest] @ Y - yz * (V[rest] @ z)))
        if slack < -tol:
            continue
        out.append(SphericalRecord(
            face=S, base=z, distance=float(np.arccos(np.clip(yz, -1, 1))),
            morse_index=m - 1 - len(S), slack=slack, long=yz <= tol,
            marginal=bool(abs(slack) < tol or coef_margin < tol or abs(yz) < tol)))
    out.sort(key=lambda r: (r.distance, r.face))
    return out


# -- min-max center ----------------------------------------------------------------

def minmax_center(Q: SphericalPolytope, tol: float = 1e-9) -> tuple[np.ndarray, float, tuple]:
    """Point of Q minimizing the largest geodesic distance to the boundary.

    For a simplex in an open hemisphere that largest distance is attained at a
    vertex, so this is the center of the smallest cap containing the vertices.
    The optimum is ``Y ~ sum_{i in S} c_i V_i`` with ``c >= 0`` and equal
    distance to the vertices of S (KKT), found by enumerating supports S.
    Returns ``(Y, d, argmax_vertices)``.
    """
    return _minmax(Q, tol)[:3]


def _minmax(Q: SphericalPolytope, tol: float):
    V = Q.vertices
    m = len(V)
    best = None
    for r in range(1, m + 1):
        for S in itertools.combinations(range(m), r):
            VS = V[list(S)]
            try:
                c = np.linalg.solve(VS @ VS.T, np.ones(r))
            except np.linalg.LinAlgError:
                continue
            if np.any(c < -tol):
                continue
            p = VS.T @ c
            t = 1.0 / np.linalg.norm(p)
            Y = p * t
            if np.all(V @ Y >= t - tol) and (best is None or t > best[1]):
                best = (Y, t, S)
    if best is None:
        raise PreconditionFailed("no min-max center (simplex not in an open hemisphere)")
    Y, t, S = best
    d = float(np.arccos(np.clip(t, -1, 1)))
    dist = np.arccos(np.clip(V @ Y, -1, 1))
    argmax = tuple(int(i) for i in np.flatnonzero(dist >= d - 1e-7))
    return Y, d, argmax, S


# -- tetrahedra in S^3 ---------------------------------------------------------------

def vertex_figure(Q: SphericalPolytope, i: int) -> tuple[SphericalTriangle, tuple]:
    """Link of vertex ``i`` of a spherical tetrahedron as a triangle in S^2,
    with the indices of the opposite endpoints of its three edges."""
    V = Q.vertices
    a = V[i]
    others = tuple(j for j in range(len(V)) if j != i)
    T = np.array([V[j] - (V[j] @ a) * a for j in others])
    _, _, vt = np.linalg.svd(a[None, :])
    B = vt[1:]
    return SphericalTriangle(_unit(T @ B.T)), others


@dataclass
class AcuteCycle:
    cycle: tuple
    acute_edges: tuple
    obtuse_edges: tuple
    figures: dict = field(repr=False, default_factory=dict)


def acute_edge_cycle(Q: SphericalPolytope, tol: float = 1e-9) -> AcuteCycle:
    """For a tetrahedron with all vertex figures skew: the edges with acute
    dihedral angle, checked to form a single closed 4-cycle.

    The dihedral angle along edge ij is read as the angle of the figure at i
    at its vertex towards j and again from the figure at j; both readings must
    agree on acute/obtuse.
    """
    if Q.vertices.shape != (4, 4):
        raise PreconditionFailed("acute edge cycle needs a tetrahedron in S^3")
    role: dict = {}
    figures = {}
    for i in range(4):
        T, others = vertex_figure(Q, i)
        cls = classify_triangle(T, tol)
        figures[i] = (T, cls)
        if cls.verdict != SKEW:
            raise PreconditionFailed(f"vertex figure {i} is {cls.verdict}")
        for slot, j in enumerate(others):
            role[i, j] = T.angle(slot) < HALF_PI
    acute, obtuse = [], []
    for i, j in itertools.combinations(range(4), 2):
        if role[i, j] != role[j, i]:
            raise InconsistentDihedralRole(f"edge {i}{j} read differently at its ends")
        (acute if role[i, j] else obtuse).append((i, j))
    deg = [sum(i in e for e in acute) for i in range(4)]
    if len(acute) != 4 or deg != [2, 2, 2, 2]:
        raise InconsistentDihedralRole(f"acute edges {acute} do not form a 4-cycle")
    cycle = [0]
    while len(cycle) < 4:
        last = cycle[-1]
        nxt = [b if a == last else a for a, b in acute if last in (a, b)]
        cycle.append(next(x for x in nxt if x not in cycle))
    return AcuteCycle(tuple(cycle), tuple(acute), tuple(obtuse), figures)


@dataclass
class EightCriticalsReport:
    Y: np.ndarray
    d: float
    case: int
    center_on_boundary: bool
    records: list
    short_count: int
    cycle: tuple
    cycle_minima: list
    cycle_maxima: list
    bridge_failures: list
    vertex_minimum_on_cycle: bool

    @property
    def ok(self) -> bool:
        return self.short_count >= 8 and not self.bridge_failures \
            and not self.vertex_minimum_on_cycle and self.case != 2


def verify_eight_short_criticals(Q: SphericalPolytope, tol: float = 1e-9,
                                 push: float = 1e-6) -> EightCriticalsReport:
    """Critical points of the distance from the min-max center of an all-skew
    tetrahedron, with the two facts linking them to the acute cycle A:
    minima of the distance restricted to A are saddles, maxima are maxima.

    When the center sits on the boundary (distance attained at fewer than four
    vertices, so the optimal support is a proper face), it is pushed inside by
    ``push`` towards the vertex barycenter before evaluating.
    """
    cyc = acute_edge_cycle(Q, tol)
    V = Q.vertices
    Y, d, argmax, support = _minmax(Q, tol)
    on_boundary = len(support) < 4 or not Q.contains(Y, 1e-12)
    if on_boundary:
        Y = _unit(Y + push * _unit(V.sum(axis=0)))
    recs = spherical_sqd_critical_points(Q, Y, tol)
    short = [r for r in recs if not r.long]
    by_face = {r.face: r for r in short}
    order = cyc.cycle
    failures = []
    minima, maxima = [], []
    for a, b in zip(order, order[1:] + order[:1]):
        S = tuple(sorted((a, b)))
        VS = V[list(S)]
        c = np.linalg.solve(VS @ VS.T, VS @ Y)
        if np.all(c > 0):
            minima.append(S)
            r = by_face.get(S)
            if r is None or r.morse_index != 1:
                failures.append(("min-not-saddle", S))
    vertex_min = False
    for pos, v in enumerate(order):
        nbrs = (order[pos - 1], order[(pos + 1) % 4])
        rates = [V[j] @ Y - (V[v] @ Y) * (V[j] @ V[v]) for j in nbrs]
        if all(r > 0 for r in rates):
            maxima.append(v)
            r = by_face.get((v,))
            if r is None or r.morse_index != 2:
                failures.append(("max-not-max", v))
        elif all(r < 0 for r in rates):
            vertex_min = True
    return EightCriticalsReport(Y, d, len(argmax), on_boundary, recs, len(short),
                                order, minima, maxima, failures, vertex_min)


def random_tetrahedra(rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` spherical tetrahedra with uniformly random unit vertices."""
    return _unit(rng.standard_normal((count, 4, 4)))


def all_skew_mask(tets: np.ndarray) -> np.ndarray:
    """Which tetrahedra have four skew vertex figures (vectorized)."""
    N = len(tets)
    figs = np.empty((N, 4, 3, 3))
    for i in range(4):
        a = tets[:, i]
        others = [j for j in range(4) if j != i]
        T = tets[:, others] - np.einsum("noi,ni->no", tets[:, others], a)[..., None] * a[:, None]
        # orthonormal frame of a^perp: drop the component along a from a QR basis
        M = np.concatenate([a[:, :, None], np.broadcast_to(np.eye(4), (N, 4, 4))[:, :, :3]], axis=2)
        q, _ = np.linalg.qr(M)
        B = q[:, :, 1:4]
        figs[:, i] = _unit(np.einsum("noi,nij->noj", T, B))
    verdicts, _ = classify_triangles(figs.reshape(-1, 3, 3))
    return (verdicts.reshape(N, 4) == SKEW).all(axis=1)
