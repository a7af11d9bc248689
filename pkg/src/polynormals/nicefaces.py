"""Critical points of the squared distance on the boundary of the cone of a
face, and search for witnesses that a face is nice.

For the cone C of a face F with facet set T, the faces of C correspond to the
non-empty subsets U of T (U = T is the apex stratum, the affine hull of F).
Every criticality condition is linear and homogeneous in ``y - p`` for a base
point p of F and unaffected by moving y parallel to F, so the critical set
depends only on the direction of ``y`` in the normal space of F.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import PointNotInCone, PreconditionFailed
from .geometry import DEFAULT_TOL, Cone, Face, Polytope, cone_of_face
from .normals import RegionTable
from .spherical import (NICE, SphericalTriangle, _minmax, acute_edge_cycle,
                        classify_triangle, spherical_link)


@dataclass(frozen=True)
class ConeRecord:
    facets: tuple
    face_id: int | None
    dim: int
    base: np.ndarray
    sqdist: float
    morse_index: int
    slack: float
    margin: float
    marginal: bool = False

    def to_json(self) -> dict:
        return {"facets": list(self.facets), "face": self.face_id, "dim": self.dim,
                "index": self.morse_index, "base": [float(x) for x in self.base],
                "sqdist": float(self.sqdist)}


@dataclass
class ConeCriticalReport:
    face_id: int
    y: np.ndarray
    records: list

    @property
    def count(self) -> int:
        return len(self.records)

    @property
    def marginal(self) -> bool:
        return any(r.marginal for r in self.records)

    def to_json(self) -> dict:
        return {"face": self.face_id, "point": self.y.tolist(), "count": self.count,
                "records": [r.to_json() for r in self.records]}


def _cone_face_projector(C: Cone, U: tuple) -> np.ndarray:
    """Orthogonal projector onto the direction space of the cone face U."""
    n = C.normals.shape[1]
    AU = C.normals[[C.facet_ids.index(j) for j in U]]
    q, _ = np.linalg.qr(AU.T)
    return np.eye(n) - q @ q.T


def cone_sqd_critical_points(C: Cone, y, tol: float = DEFAULT_TOL,
                             P: Polytope | None = None) -> ConeCriticalReport:
    """All cone faces carrying a critical point of ``|x - y|^2`` on the boundary.

    The angle test runs over a generating set of the cone: the base point,
    both signs of each lineality direction and the point ``base + ray`` for
    each extreme ray.  With ``P`` given, records carry the id of the face of
    P with the same facet set.
    """
    y = np.asarray(y, dtype=float)
    p = C.base
    scale = max(float(np.linalg.norm(y - p)), 1e-300)
    if not np.all(C.slack(y) > tol * scale):
        raise PointNotInCone("y is not strictly inside the cone")
    n = len(y)
    L = C.lineality
    gens = [p] + [p + s * l for l in L for s in (1.0, -1.0)] + [p + r for r in C.rays]
    gens = np.array(gens)
    T = C.facet_ids
    records = []
    for r in range(1, len(T) + 1):
        for U in itertools.combinations(T, r):
            Pi = _cone_face_projector(C, U)
            z = p + Pi @ (y - p)
            rest = [i for i, j in enumerate(T) if j not in U]
            margin = float(np.min(C.offsets[rest] - C.normals[rest] @ z)) if rest else np.inf
            if margin <= -tol * scale:
                continue
            w = y - z
            vals = (gens - z) @ w
            if vals.min() < -tol * scale ** 2:
                continue
            # generators inside aff(G) give zero by construction; the margin
            # comes from the rays leaving G
            off = [1 + 2 * len(L) + i for i, j in enumerate(T) if j in U]
            slack = float(vals[off].min())
            dim = n - len(U)
            face_id = None
            if P is not None:
                face_id = P.face_by_facets(U).id
            records.append(ConeRecord(
                U, face_id, dim, z, float(w @ w), n - 1 - dim, slack, margin,
                bool(margin < tol * scale or abs(slack) < tol * scale ** 2)))
    records.sort(key=lambda rec: (rec.sqdist, rec.facets))
    return ConeCriticalReport(C.apex_face.id, y, records)


class ConeTable(RegionTable):
    """Critical regions of every cone face as open polyhedral cones in y."""

    def __init__(self, C: Cone, tol: float = DEFAULT_TOL):
        p = C.base
        T = C.facet_ids
        groups, rows = [], []
        for r in range(1, len(T) + 1):
            for U in itertools.combinations(T, r):
                Pi = _cone_face_projector(C, U)
                A = []
                for i, j in enumerate(T):
                    if j in U:
                        A.append(-(C.rays[i] - Pi @ C.rays[i]))
                    else:
                        A.append(Pi @ C.normals[i])
                A = np.array(A)
                groups.append(U)
                rows.append((A, A @ p))
        super().__init__(groups, rows, (C.normals, C.offsets), 1.0, tol)
        self.cone = C

    def counts_dir(self, W, with_flags: bool = False):
        """Counts at ``base + W`` for directions W, with margins normalized by |W|."""
        W = np.atleast_2d(np.asarray(W, dtype=float))
        W = W / np.linalg.norm(W, axis=1, keepdims=True)
        return self.counts(self.cone.base + W, with_flags)


def cone_table(P: Polytope, F: Face) -> ConeTable:
    cache = P.__dict__.setdefault("_cone_cache", {})
    if F.id not in cache:
        cache[F.id] = ConeTable(cone_of_face(P, F), P.tol)
    return cache[F.id]


# -- certification -----------------------------------------------------------------

@dataclass
class NiceCertificate:
    face_id: int
    k: int
    witness: np.ndarray
    count: int
    records: list
    method: str
    probes: int

    def to_json(self) -> dict:
        return {"face": self.face_id, "k": self.k, "witness": self.witness.tolist(),
                "count": self.count, "method": self.method, "probes": self.probes,
                "records": [r.to_json() for r in self.records]}


@dataclass
class NotFound:
    face_id: int
    k: int
    best_count: int
    best_point: np.ndarray
    probes: int

    def to_json(self) -> dict:
        return {"face": self.face_id, "k": self.k, "found": False,
                "best_count": self.best_count, "best_point": self.best_point.tolist(),
                "probes": self.probes}


def _link_directions(C: Cone, rng: np.random.Generator, count: int) -> np.ndarray:
    mu = rng.dirichlet(np.full(len(C.rays), 0.7), size=count)
    return mu @ C.rays


def _climb(table: ConeTable, w: np.ndarray, rng: np.random.Generator, depth: int,
           target: int) -> tuple[np.ndarray, int, int]:
    """Move along random lines through ``base + w`` to the widest piece of the
    highest count.  Returns (direction, count, lines used)."""
    C = table.cone
    w = w / np.linalg.norm(w)
    best = int(table.counts_dir(w)[0])
    used = 0
    for _ in range(depth):
        d = _link_directions(C, rng, 1)[0] - w * 0.5 + 0.3 * rng.standard_normal(len(w))
        prof = table.line_profile(C.base + w, d, -4.0, 4.0)
        used += 1
        c, t = prof.best()
        if c >= best:
            w2 = prof.point(t) - C.base
            if np.linalg.norm(w2) > 1e-12:
                w, best = w2 / np.linalg.norm(w2), c
        if best >= target:
            break
    return w, best, used


def _robust(table: ConeTable, w: np.ndarray, rng: np.random.Generator, rounds: int = 8
            ) -> np.ndarray:
    """Recentre ``w`` inside its cell along a few random lines."""
    C = table.cone
    c0 = int(table.counts_dir(w)[0])
    for _ in range(rounds):
        d = rng.standard_normal(len(w))
        prof = table.line_profile(C.base + w, d, -4.0, 4.0)
        i = int(np.searchsorted(prof.ts, 0.0)) - 1
        if 0 <= i < len(prof.counts) and prof.counts[i] == c0:
            lo, hi = max(prof.ts[i], -4.0), min(prof.ts[i + 1], 4.0)
            w2 = prof.point(0.5 * (lo + hi)) - C.base
            if int(table.counts_dir(w2)[0]) == c0:
                w = w2 / np.linalg.norm(w2)
    return w


def link_witness_direction(P: Polytope, F: Face, tol: float = DEFAULT_TOL) -> np.ndarray | None:
    """Directed seeds from the link: the nice-triangle witness for codim 3,
    the (inward-pushed) min-max center of an all-skew tetrahedron for codim 4."""
    if F.codim == 3:
        Q = spherical_link(P, F)
        cls = classify_triangle(SphericalTriangle.from_polytope(Q), tol)
        if cls.verdict == NICE:
            return Q.basis.T @ cls.witness
    elif F.codim == 4:
        Q = spherical_link(P, F)
        try:
            acute_edge_cycle(Q, tol)
        except Exception:
            return None
        Y, _, _, support = _minmax(Q, tol)
        if len(support) < 4:
            Y = Y + 1e-6 * Q.vertices.sum(axis=0)
        return Q.basis.T @ (Y / np.linalg.norm(Y))
    return None


def certify_nice(P: Polytope, F: Face, budget: int = 20000, rng: np.random.Generator | None = None,
                 seeds: list | None = None, depth: int = 50, tol: float = DEFAULT_TOL
                 ) -> NiceCertificate | NotFound:
    """Look for y in the cone of F with at least ``2k + 1`` critical points.

    Order: caller seeds, the link-derived direction, ``budget`` random
    directions inside the cone, then hill-climbing from the best ones along
    exact line profiles.  The witness returned is ``base + scale * w``.
    """
    k = F.codim
    if k < 3 or F.dim < 0:
        raise PreconditionFailed("nice certification needs a proper face of codim >= 3")
    rng = rng or np.random.default_rng(0)
    table = cone_table(P, F)
    C = table.cone
    target = 2 * k + 1
    probes = 0

    def accept(w, method):
        w = _robust(table, w, rng)
        y = C.base + P.scale * w
        rep = cone_sqd_critical_points(C, y, tol, P)
        if rep.count >= target and not rep.marginal:
            return NiceCertificate(F.id, k, y, rep.count, rep.records, method, probes)
        return None

    cand = [(s, "seed") for s in (seeds or [])]
    lw = link_witness_direction(P, F, tol)
    if lw is not None:
        cand.append((lw, "link"))
    for w, method in cand:
        w = np.asarray(w, dtype=float)
        if not np.all(C.normals @ w < 0):
            continue
        probes += 1
        if table.counts_dir(w)[0] >= target:
            cert = accept(w / np.linalg.norm(w), method)
            if cert:
                return cert
    W = _link_directions(C, rng, budget)
    counts, flags = table.counts_dir(W, with_flags=True)
    probes += budget
    counts = np.where(flags, 0, counts)
    order = np.argsort(-counts, kind="stable")
    for i in order[:20]:
        if counts[i] >= target:
            cert = accept(W[i], "random")
            if cert:
                return cert
    best_w, best_c = W[order[0]], int(counts[order[0]])
    for i in order[:5]:
        w, c, used = _climb(table, W[i], rng, depth, target)
        probes += used
        if c > best_c:
            best_w, best_c = w, c
        if c >= target:
            cert = accept(w, "climb")
            if cert:
                return cert
    return NotFound(F.id, k, best_c, C.base + P.scale * best_w, probes)


# -- propagation ---------------------------------------------------------------------

@dataclass
class PropagationEntry:
    face_id: int
    found: bool
    count: int
    target: int
    seeded: bool
    certificate: object = field(repr=False, default=None)


@dataclass
class PropagationReport:
    face_id: int
    entries: list

    @property
    def ok(self) -> bool:
        return all(e.found for e in self.entries)


def travel_seeds(P: Polytope, F: Face, G: Face, witness) -> list[np.ndarray]:
    """Seed directions for the cone of a facet G of F: translate the witness
    parallel to F until its projection reaches G's hull, then step back into
    the side of the new facet hyperplane h that contains F."""
    (j,) = G.facet_ids - F.facet_ids
    y = np.asarray(witness, dtype=float)
    PiF = F.projector
    yF = F.point + PiF @ (y - F.point)
    w = y - yF
    inward = -(PiF @ P.normals[j])
    inward /= np.linalg.norm(inward)
    r = np.linalg.norm(w)
    return [w + s * r * inward for s in (0.01, 0.05, 0.2, 0.5, 1.0, 2.0)]


def check_propagation(P: Polytope, F: Face, certificate: NiceCertificate,
                      budget: int = 20000, rng: np.random.Generator | None = None
                      ) -> PropagationReport:
    if not isinstance(certificate, NiceCertificate) or certificate.face_id != F.id:
        raise PreconditionFailed("propagation needs a certificate for this face")
    rng = rng or np.random.default_rng(0)
    out = []
    for G in P.subfaces(F, 1):
        seeds = travel_seeds(P, F, G, certificate.witness)
        res = certify_nice(P, G, budget, rng, seeds=seeds)
        found = isinstance(res, NiceCertificate)
        out.append(PropagationEntry(
            G.id, found, res.count if found else res.best_count, 2 * G.codim + 1,
            found and res.method == "seed", res))
    return PropagationReport(F.id, out)


def nice_census(P: Polytope, tol: float = DEFAULT_TOL) -> dict:
    """Link verdict of every (n-3)-face."""
    out = {}
    for F in P.faces_of_dim(P.dim - 3):
        Q = spherical_link(P, F)
        out[F.id] = classify_triangle(SphericalTriangle.from_polytope(Q), tol)
    return out
