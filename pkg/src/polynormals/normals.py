"""Normals from interior points as critical points of the squared distance.

Two independent routes are provided:

* :func:`normals_from_point` projects ``y`` on every face and applies the
  criticality test against the vertices of P directly;
* :class:`RegionTable` stores every active region as an open polyhedron in
  ``y`` and counts memberships, which is what the searches use since it
  vectorizes over many points and gives exact event positions along lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MarginalRecordsPresent, MorseViolation, NonGenericSample, PointNotInterior
from .geometry import DEFAULT_TOL, Face, Polytope, cone_of_face


@dataclass(frozen=True)
class NormalRecord:
    face_id: int
    dim: int
    base: np.ndarray
    sqdist: float
    morse_index: int
    slack: float
    margin: float
    marginal: bool = False

    def to_json(self) -> dict:
        return {"face": self.face_id, "dim": self.dim, "index": self.morse_index,
                "base": [float(x) for x in self.base], "sqdist": float(self.sqdist)}


@dataclass(frozen=True)
class MorseTally:
    counts: tuple
    total: int
    alternating: int

    @property
    def expected_alternating(self) -> int:
        n = len(self.counts)
        return 1 + (-1) ** (n - 1)


def _face_tables(P: Polytope) -> dict:
    cache = P.__dict__.setdefault("_normals_cache", {})
    if "faces" not in cache:
        F = P.faces
        nv, m = len(P.vertices), P.n_facets
        in_face = np.zeros((len(F), nv), dtype=bool)
        facet_in = np.zeros((len(F), m), dtype=bool)
        for f in F:
            in_face[f.id, list(f.vertex_ids)] = True
            facet_in[f.id, list(f.facet_ids)] = True
        cache["faces"] = {
            "points": np.stack([f.point for f in F]),
            "proj": np.stack([f.projector for f in F]),
            "in_face": in_face,
            "facet_in": facet_in,
            "dims": np.array([f.dim for f in F]),
        }
    return cache["faces"]


def _require_interior(P: Polytope, y: np.ndarray) -> None:
    if y.shape != (P.dim,) or not P.is_interior(y):
        raise PointNotInterior(f"point {y.tolist()} is not strictly inside the polytope")


def normals_from_point(P: Polytope, y, tol: float = DEFAULT_TOL) -> list[NormalRecord]:
    """All normals from ``y``, one record per face carrying a base, by distance.

    A face F contributes when the projection z of y on aff(F) lies in relint F
    and ``<y - z, v - z> >= 0`` for every vertex v (vertices of F give zero and
    are left out of the slack).  Records within ``tol`` of either threshold are
    kept but flagged ``marginal``.
    """
    y = np.asarray(y, dtype=float)
    _require_interior(P, y)
    T = _face_tables(P)
    z = T["points"] + np.einsum("fij,fj->fi", T["proj"], y - T["points"])
    w = y - z
    bz = P.offsets[None, :] - z @ P.normals.T
    margin = np.where(T["facet_in"], np.inf, bz).min(axis=1)
    vw = w @ P.vertices.T - np.einsum("fi,fi->f", w, z)[:, None]
    slack = np.where(T["in_face"], np.inf, vw).min(axis=1)
    mtol = tol * P.scale
    stol = tol * P.scale ** 2
    hits = np.flatnonzero((margin >= -mtol) & (slack >= -stol))
    n = P.dim
    out = []
    for i in hits:
        d = int(T["dims"][i])
        out.append(NormalRecord(
            face_id=int(i), dim=d, base=z[i], sqdist=float(w[i] @ w[i]),
            morse_index=n - 1 - d, slack=float(slack[i]), margin=float(margin[i]),
            marginal=bool(margin[i] < mtol or slack[i] < stol)))
    out.sort(key=lambda r: (r.sqdist, r.face_id))
    return out


def normals_generic(P: Polytope, y, rng: np.random.Generator, tol: float = DEFAULT_TOL,
                    retries: int = 5, eps: float = 1e-7):
    """Like :func:`normals_from_point` but nudges ``y`` off non-generic strata.

    Returns ``(y_used, records)``.
    """
    y = np.asarray(y, dtype=float)
    for _ in range(retries + 1):
        recs = normals_from_point(P, y, tol)
        if not any(r.marginal for r in recs):
            return y, recs
        y = y + eps * P.scale * rng.standard_normal(P.dim)
    raise MarginalRecordsPresent("point stays marginal after perturbation")


def morse_tally(records: list[NormalRecord], n: int) -> MorseTally:
    """Counts per Morse index, checked against the index/dimension law,
    evenness and the Euler characteristic of the boundary sphere."""
    if any(r.marginal for r in records):
        raise MarginalRecordsPresent("tally needs a generic evaluation; perturb the point")
    counts = [0] * n
    for r in records:
        if r.morse_index != n - 1 - r.dim:
            raise MorseViolation(f"index {r.morse_index} at a {r.dim}-face")
        if r.morse_index == n - 1 and r.dim != 0:
            raise MorseViolation("maximum away from a vertex")
        if r.morse_index == 0 and r.dim != n - 1:
            raise MorseViolation("minimum away from a facet")
        counts[r.morse_index] += 1
    tally = MorseTally(tuple(counts), len(records),
                       sum((-1) ** m * c for m, c in enumerate(counts)))
    if tally.total % 2:
        raise MorseViolation(f"odd number of normals: {tally.total}")
    if tally.alternating != tally.expected_alternating:
        raise MorseViolation(f"alternating sum {tally.alternating} != {tally.expected_alternating}")
    return tally


# -- active regions ----------------------------------------------------------

@dataclass(frozen=True)
class ActiveRegion:
    """AR(F) as ``slab`` (projection in relint F) and ``wedge`` (criticality).

    Both are lists of rows ``(A, b)`` meaning ``A @ y < b``.  The wedge rows are
    ``<y - p, r> > 0`` for the extreme rays r of the cone of F, which is the
    vertex condition restated: ``<w, v - z>`` does not depend on z in aff F and
    P - p lies in lin F + cone(r).
    """

    face_id: int
    slab: tuple
    wedge: tuple

    def rows(self) -> tuple[np.ndarray, np.ndarray]:
        A = np.vstack([self.slab[0], self.wedge[0]])
        b = np.concatenate([self.slab[1], self.wedge[1]])
        return A, b

    def margin(self, y) -> float:
        A, b = self.rows()
        return float(np.min(b - A @ np.asarray(y, dtype=float)))

    def contains(self, y, margin: float = 0.0) -> bool:
        return self.margin(y) > margin


def active_region(P: Polytope, F: Face) -> ActiveRegion:
    p = F.point
    Pi = F.projector
    others = [j for j in range(P.n_facets) if j not in F.facet_ids]
    SA, Sb = [], []
    for j in others:
        row = Pi @ P.normals[j]
        nrm = np.linalg.norm(row)
        if nrm < 1e-12:
            continue
        rhs = P.offsets[j] - P.normals[j] @ p + row @ p
        SA.append(row / nrm)
        Sb.append(rhs / nrm)
    rays = cone_of_face(P, F).rays
    WA = -rays
    Wb = -rays @ p
    SA = np.array(SA).reshape(-1, P.dim)
    return ActiveRegion(F.id, (SA, np.array(Sb)), (WA, Wb))


@dataclass(frozen=True)
class LineProfile:
    """Piecewise-constant count along ``y0 + t d`` on the open interval
    ``(ts[0], ts[-1])``; ``counts[i]`` holds on ``(ts[i], ts[i+1])``."""

    y0: np.ndarray
    d: np.ndarray
    ts: np.ndarray
    counts: np.ndarray

    def point(self, t: float) -> np.ndarray:
        return self.y0 + t * self.d

    def best(self, min_width: float = 0.0) -> tuple[int, float]:
        """Largest count over pieces wider than ``min_width``, with its midpoint."""
        widths = np.diff(self.ts)
        ok = widths > min_width
        if not ok.any():
            ok = widths >= widths.max()
        c = np.where(ok, self.counts, -1)
        # widest piece among the maximal ones
        cands = np.flatnonzero(c == c.max())
        i = cands[np.argmax(widths[cands])]
        return int(self.counts[i]), 0.5 * (self.ts[i] + self.ts[i + 1])


class RegionTable:
    """A family of open polyhedra ``{y : A_g y < b_g}`` inside a domain.

    Rows are unit-normalized so margins are Euclidean distances.
    """

    def __init__(self, groups: list, rows: list, domain: tuple, scale: float, tol: float):
        self.groups = list(groups)
        A = np.vstack([r[0] for r in rows])
        b = np.concatenate([r[1] for r in rows])
        nrm = np.linalg.norm(A, axis=1)
        keep = nrm > 1e-14
        sizes = np.array([len(r[1]) for r in rows])
        gid = np.repeat(np.arange(len(rows)), sizes)
        self.A, self.b, gid = A[keep] / nrm[keep, None], b[keep] / nrm[keep], gid[keep]
        self.starts = np.flatnonzero(np.r_[True, gid[1:] != gid[:-1]])
        if len(self.starts) != len(self.groups):
            raise ValueError("every group needs at least one non-trivial row")
        self.gid = gid
        dA, db = domain
        dn = np.linalg.norm(dA, axis=1)
        self.dA, self.db = dA / dn[:, None], db / dn
        self.scale = scale
        self.tol = tol

    def margins(self, Y) -> np.ndarray:
        """``(N, G)`` array: min over each group's rows of ``b - A y``."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        vals = self.b[None, :] - Y @ self.A.T
        return np.minimum.reduceat(vals, self.starts, axis=1)

    def domain_margin(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return (self.db[None, :] - Y @ self.dA.T).min(axis=1)

    def counts(self, Y, with_flags: bool = False):
        M = self.margins(Y)
        c = (M > 0).sum(axis=1)
        if with_flags:
            return c, (np.abs(M) < self.tol * self.scale).any(axis=1)
        return c

    def members(self, y) -> list:
        M = self.margins(y)[0]
        return [self.groups[i] for i in np.flatnonzero(M > 0)]

    def line_profile(self, y0, d, lo: float = -np.inf, hi: float = np.inf) -> LineProfile:
        y0 = np.asarray(y0, dtype=float)
        d = np.asarray(d, dtype=float)
        dlo, dhi = _interval(self.db - self.dA @ y0, self.dA @ d)
        dlo, dhi = max(dlo.max(), lo), min(dhi.min(), hi)
        if not dlo < dhi:
            return LineProfile(y0, d, np.array([lo, lo]), np.array([0]))
        rlo, rhi = _interval(self.b - self.A @ y0, self.A @ d)
        glo = np.maximum.reduceat(rlo, self.starts)
        ghi = np.minimum.reduceat(rhi, self.starts)
        ends = np.concatenate([glo, ghi])
        ends = ends[(ends > dlo) & (ends < dhi)]
        ts = np.unique(np.concatenate([[dlo, dhi], ends]))
        mids = 0.5 * (ts[1:] + ts[:-1])
        inside = (glo[None, :] < mids[:, None]) & (mids[:, None] < ghi[None, :])
        return LineProfile(y0, d, ts, inside.sum(axis=1))


def _interval(c: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per row, the t-interval where ``c - t e > 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r = c / e
    lo = np.where(e < 0, r, -np.inf)
    hi = np.where(e > 0, r, np.inf)
    dead = (e == 0) & (c <= 0)
    lo = np.where(dead, np.inf, lo)
    hi = np.where(dead, -np.inf, hi)
    return lo, hi


def region_table(P: Polytope) -> RegionTable:
    """Active regions of every face of P, cached on the polytope."""
    cache = P.__dict__.setdefault("_normals_cache", {})
    if "table" not in cache:
        rows = []
        for F in P.faces:
            ar = active_region(P, F)
            rows.append(ar.rows())
        cache["table"] = RegionTable([F.id for F in P.faces], rows,
                                     (P.normals, P.offsets), P.scale, P.tol)
    return cache["table"]


# -- segment scans -------------------------------------------------------------

@dataclass
class SegmentScan:
    a: np.ndarray
    b: np.ndarray
    samples: list
    crossings: list = field(default_factory=list)
    unresolved: list = field(default_factory=list)

    @property
    def counts(self) -> list[int]:
        return [c for _, c in self.samples]

    def to_csv_rows(self) -> list[tuple]:
        return [(float(t), int(c)) for t, c in self.samples]


def scan_segment(P: Polytope, a, b, steps: int = 100, max_depth: int = 40,
                 strict: bool = False) -> SegmentScan:
    """Counts along ``[a, b]`` with bisection localization of every change.

    Each change interval is halved until it is below ``2**-max_depth`` of a
    step; a final interval whose count change is not ``+-2`` is reported in
    ``unresolved`` (or raises with ``strict``).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _require_interior(P, a)
    _require_interior(P, b)
    table = region_table(P)
    d = b - a
    length = np.linalg.norm(d)

    def count_at(t: float, width: float) -> tuple[float, int, bool]:
        # step off marginal samples within a fraction of the current width
        for k in range(8):
            c, flag = table.counts(a + t * d, with_flags=True)
            if not flag[0]:
                return t, int(c[0]), False
            t = t + width * 1e-3 * (k + 1) * (-1) ** k
        return t, int(c[0]), True

    ts = np.linspace(0.0, 1.0, steps + 1)
    samples = [count_at(float(t), 1.0 / steps)[:2] for t in ts]
    samples[0] = (0.0, samples[0][1])
    samples[-1] = (1.0, samples[-1][1])
    scan = SegmentScan(a, b, samples)

    def refine(t0, c0, t1, c1, depth):
        if c0 == c1:
            return
        tm, cm, stuck = count_at(0.5 * (t0 + t1), t1 - t0)
        # an interval inside the tolerance band of a wall cannot be split further
        if stuck or depth >= max_depth or (t1 - t0) * length < 1e-14 * P.scale:
            scan.crossings.append((t0, t1, c1 - c0))
            if abs(c1 - c0) != 2:
                scan.unresolved.append((t0, t1, c1 - c0))
            return
        refine(t0, c0, tm, cm, depth + 1)
        refine(tm, cm, t1, c1, depth + 1)

    for (t0, c0), (t1, c1) in zip(samples[:-1], samples[1:]):
        refine(t0, c0, t1, c1, 0)
    if strict and scan.unresolved:
        raise NonGenericSample(f"{len(scan.unresolved)} multi-sheet crossings")
    return scan


def segment_events(P: Polytope, a, b) -> list[tuple[float, int]]:
    """Exact count changes along ``[a, b]`` from the active-region intervals,
    as ``(t, delta)`` with events closer than 1e-12 merged."""
    a = np.asarray(a, dtype=float)
    prof = region_table(P).line_profile(a, np.asarray(b, dtype=float) - a, 0.0, 1.0)
    events = []
    for i in range(1, len(prof.ts) - 1):
        delta = int(prof.counts[i] - prof.counts[i - 1])
        if events and prof.ts[i] - events[-1][0] < 1e-12:
            events[-1] = (events[-1][0], events[-1][1] + delta)
        elif delta:
            events.append((float(prof.ts[i]), delta))
    return [e for e in events if e[1]]
