"""Polytope generators, the max-normal-count search and the theorem harness."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .errors import DegenerateInput, GenerationFailed, NotSimple, UnknownName
from .geometry import DEFAULT_TOL, Polytope, build_polytope, check_genericity, polytope_from_halfspaces
from .nicefaces import NiceCertificate, certify_nice, cone_table, link_witness_direction
from .normals import normals_from_point, region_table
from .spherical import NICE, SKEW, SphericalTriangle, classify_triangle, spherical_link


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    m: int
    seed: int = 0
    method: str = "tangent_planes"
    genericity_tol: float = 1e-6
    base: str | None = None
    eps: float = 1e-3
    max_retries: int = 500


def random_simple_polytope(spec: GeneratorSpec) -> Polytope:
    """Intersection of ``m`` half-spaces tangent to the unit sphere at uniform
    points (or a canned polytope with ``eps``-perturbed half-spaces), resampled
    until it is bounded, has all m facets, is simple and passes genericity."""
    n, m = spec.n, spec.m
    if spec.method == "tangent_planes" and m < n + 1:
        raise GenerationFailed("need at least n+1 facets")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    if spec.method == "perturbed_canned":
        base = canned_polytope(spec.base or "cube3")
        n, m = base.dim, base.n_facets
    elif spec.method != "tangent_planes":
        raise UnknownName(f"unknown generator method {spec.method!r}")
    for _ in range(spec.max_retries):
        if spec.method == "tangent_planes":
            A = rng.standard_normal((m, n))
            A /= np.linalg.norm(A, axis=1, keepdims=True)
            b = np.ones(m)
        else:
            A = base.normals + spec.eps * rng.standard_normal(base.normals.shape)
            b = base.offsets + spec.eps * rng.standard_normal(m)
        try:
            P = polytope_from_halfspaces(A, b)
        except (DegenerateInput, NotSimple):
            continue
        if P.n_facets != m:
            continue
        if not check_genericity(P, spec.genericity_tol).passed:
            continue
        P.label = f"{spec.method}:n={n},m={m},seed={spec.seed}"
        return P
    raise GenerationFailed(f"no admissible polytope after {spec.max_retries} attempts")


def _regular_simplex(n: int) -> np.ndarray:
    E = np.eye(n + 1) - 1.0 / (n + 1)
    _, _, vt = np.linalg.svd(E)
    V = E @ vt[:n].T
    return V / np.linalg.norm(V[0])


# long axis x, cross-section of order 0.05 in y and z
_THIN_BASE = np.array([[-0.972, 0.047, -0.047], [-0.904, -0.048, 0.011],
                       [0.746, -0.033, -0.102], [1.062, -0.06, 0.08]])


def thin_tetrahedron(param: float | None = None) -> Polytope:
    """Flattened tetrahedron; without ``param`` the frozen tuned fixture."""
    if param is None:
        data = json.loads(resources.files("polynormals.data").joinpath(
            "thin_tetrahedron.json").read_text())
        return Polytope.from_json(data["polytope"])
    V = _THIN_BASE * np.array([1.0, param / 0.05, param / 0.05])
    return build_polytope(V)


def canned_polytope(name: str) -> Polytope:
    """``triangle``, ``square``, ``cube3``, ``cube4``, ``simplexN`` /
    ``simplex(N)`` and ``thin_tetrahedron`` / ``thin_tetrahedron(t)``."""
    key = name.strip().lower().replace(" ", "")
    if key == "triangle":
        a = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
        P = build_polytope(np.column_stack([np.cos(a), np.sin(a)]))
    elif key == "square":
        P = build_polytope([[-1, -1], [1, -1], [1, 1], [-1, 1]])
    elif re.fullmatch(r"cube([2-6])", key):
        n = int(key[-1])
        P = build_polytope(np.array(np.meshgrid(*[[-1.0, 1.0]] * n)).reshape(n, -1).T)
    elif m := re.fullmatch(r"simplex\(?(\d+)\)?", key):
        P = build_polytope(_regular_simplex(int(m.group(1))))
    elif m := re.fullmatch(r"thin_tetrahedron(?:\(([-+.\deE]+)\))?", key):
        P = thin_tetrahedron(float(m.group(1)) if m.group(1) else None)
    else:
        raise UnknownName(f"unknown canned polytope {name!r}")
    P.label = f"canned:{key}"
    return P


def polytope_hash(P: Polytope) -> str:
    blob = json.dumps(np.round(P.vertices, 10).tolist()).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# -- search ------------------------------------------------------------------------

@dataclass
class StrategyStats:
    probes: int = 0
    lines: int = 0
    cone_probes: int = 0
    best: int = 0


@dataclass
class SearchReport:
    polytope: str
    n: int
    best_point: list
    best_count: int
    target: int
    probes_used: int
    seed: int
    baseline_probe: int | None
    strategies: dict = field(default_factory=dict)
    budget: int = 0
    doubled: bool = False

    @property
    def achieved(self) -> bool:
        return self.best_count >= self.target

    @property
    def baseline_ok(self) -> bool:
        return self.baseline_probe is not None and self.baseline_probe < 1000

    def to_json(self) -> dict:
        d = asdict(self)
        d["achieved"] = self.achieved
        d["baseline_ok"] = self.baseline_ok
        return d


class _Tracker:
    """Best point bookkeeping; probes are counted in evaluation order."""

    def __init__(self, P: Polytope, budget: int, target: int):
        self.P, self.budget, self.target = P, budget, target
        self.table = region_table(P)
        self.best_count, self.best_point, self.best_width = 0, None, 0.0
        self.probes = 0
        self.baseline = None
        self.stats: dict[str, StrategyStats] = {}

    @property
    def done(self) -> bool:
        return self.best_count >= self.target or self.probes >= self.budget

    def _update(self, name: str, count: int, point: np.ndarray, width: float, idx: int):
        st = self.stats.setdefault(name, StrategyStats())
        st.best = max(st.best, count)
        if self.baseline is None and count >= 2 * self.P.dim + 2:
            self.baseline = idx
        if count > self.best_count or (count == self.best_count and width > self.best_width):
            self.best_count, self.best_point, self.best_width = count, point.copy(), width

    def points(self, name: str, Y: np.ndarray) -> np.ndarray:
        Y = Y[: max(0, self.budget - self.probes)]
        st = self.stats.setdefault(name, StrategyStats())
        if not len(Y):
            return np.zeros(0, dtype=int)
        M = self.table.margins(Y)
        counts = (M > 0).sum(axis=1)
        # a sample's robustness: distance to the nearest region boundary
        width = np.abs(M).min(axis=1)
        ok = width > self.table.tol * self.table.scale
        counts_ok = np.where(ok, counts, 0)
        i = int(np.argmax(counts_ok + width / (width.max() + 1.0)))
        if self.baseline is None:
            hit = np.flatnonzero(counts_ok >= 2 * self.P.dim + 2)
            if len(hit):
                self.baseline = self.probes + int(hit[0])
        self._update(name, int(counts_ok[i]), Y[i], float(width[i]), self.probes + i)
        self.probes += len(Y)
        st.probes += len(Y)
        return counts_ok

    def line(self, name: str, y0, d, lo: float, hi: float) -> tuple[int, np.ndarray] | None:
        if self.probes >= self.budget:
            return None
        prof = self.table.line_profile(y0, d, lo, hi)
        self.probes += 1
        st = self.stats.setdefault(name, StrategyStats())
        st.probes += 1
        st.lines += 1
        if len(prof.counts) == 0 or prof.ts[0] >= prof.ts[-1]:
            return None
        c, t = prof.best()
        i = int(np.searchsorted(prof.ts, t)) - 1
        width = float(prof.ts[i + 1] - prof.ts[i]) * np.linalg.norm(d) / 2
        y = prof.point(t)
        self._update(name, c, y, width, self.probes - 1)
        return c, y


def _interior_samples(P: Polytope, rng: np.random.Generator, count: int,
                      rounds: int = 8) -> np.ndarray:
    """Uniform points of P by rejection from the bounding box.  Thin polytopes
    fill a tiny part of their box; after ``rounds`` batches the rest are
    random convex combinations of the vertices."""
    lo, hi = P.vertices.min(axis=0), P.vertices.max(axis=0)
    out, have = [], 0
    for _ in range(rounds):
        if have >= count:
            break
        Y = rng.uniform(lo, hi, size=(max(2 * count, 1024), P.dim))
        Y = Y[(P.slack(Y) > 1e-9 * P.scale).all(axis=1)]
        out.append(Y)
        have += len(Y)
    while have < count:
        Y = rng.dirichlet(np.ones(len(P.vertices)), size=count) @ P.vertices
        Y = Y[(P.slack(Y) > 1e-9 * P.scale).all(axis=1)]
        out.append(Y)
        have += len(Y)
    return np.vstack(out)[:count]


def _exit_time(P: Polytope, y0, d) -> float:
    s = P.normals @ d
    r = (P.offsets - P.normals @ y0)
    with np.errstate(divide="ignore"):
        t = np.where(s > 1e-15, r / s, np.inf)
    return float(t.min())


def max_normals_search(P: Polytope, budget: int | None = None, seed: int = 0,
                       target: int | None = None, stop_at_target: bool = True,
                       climb_depth: int = 50) -> SearchReport:
    """Best normal count found on P; a lower bound on the true maximum.

    Strategies, in order: ``vertex`` (rays leaving each vertex along cone
    witness directions and random inward directions, scanned exactly),
    ``nice`` (rays from nice (n-3)-faces along their link witness),
    ``uniform`` (interior sampling) and ``climb`` (exact line searches from
    the best points).  One probe is one point evaluation or one exact line
    profile.
    """
    n = P.dim
    budget = budget or (10 ** 5 if n <= 4 else 5 * 10 ** 5)
    target = target or 2 * n + 4
    ss = np.random.SeedSequence(seed)
    r_vertex, r_nice, r_uniform, r_climb = (np.random.default_rng(s) for s in ss.spawn(4))
    trk = _Tracker(P, budget if not stop_at_target else budget, target if stop_at_target else 10 ** 9)

    # (b) vertex-proximal rays: the cone witness of a vertex seen from nearby
    for v in range(len(P.vertices)):
        if trk.done:
            break
        F = P.vertex_face(v)
        V = P.vertices[v]
        dirs = []
        if n >= 3:
            cert = certify_nice(P, F, budget=400, rng=r_vertex, depth=10)
            st = trk.stats.setdefault("vertex", StrategyStats())
            st.cone_probes += cert.probes
            w = (cert.witness if isinstance(cert, NiceCertificate) else cert.best_point) - V
            dirs.append(w / np.linalg.norm(w))
        C = cone_table(P, F).cone
        mu = r_vertex.dirichlet(np.ones(n), size=2)
        dirs.extend(mu @ C.rays)
        for d in dirs:
            trk.line("vertex", V, d, 1e-12, _exit_time(P, V, d))
            if trk.done:
                break

    # (c) nice-face guided rays
    if n >= 3 and not trk.done:
        for F in P.faces_of_dim(n - 3):
            if trk.done:
                break
            w = link_witness_direction(P, F)
            if w is None:
                continue
            Vf = P.vertices[sorted(F.vertex_ids)]
            for lam in r_nice.dirichlet(np.ones(len(Vf)), size=3):
                p = lam @ Vf
                trk.line("nice", p, w, 1e-12, _exit_time(P, p, w))

    # (a) uniform interior sampling
    chunk = 4096
    share = budget // 2
    used = 0
    while not trk.done and used < share:
        Y = _interior_samples(P, r_uniform, min(chunk, share - used))
        trk.points("uniform", Y)
        used += len(Y)

    # (d) exact line climbing from the best point found so far
    restarts = 0
    while not trk.done and trk.best_point is not None:
        y = trk.best_point if restarts % 2 == 0 else _interior_samples(P, r_climb, 1)[0]
        restarts += 1
        for _ in range(climb_depth):
            d = r_climb.standard_normal(n)
            d /= np.linalg.norm(d)
            lo = -_exit_time(P, y, -d)
            hi = _exit_time(P, y, d)
            res = trk.line("climb", y, d, lo, hi)
            if res is None or trk.done:
                break
            if res[0] >= int(trk.table.counts(y[None, :])[0]):
                y = res[1]

    best = trk.best_point if trk.best_point is not None else P.chebyshev_center()[0]
    return SearchReport(
        polytope=getattr(P, "label", None) or polytope_hash(P), n=n,
        best_point=[float(x) for x in best], best_count=int(trk.best_count),
        target=2 * n + 4, probes_used=int(trk.probes), seed=int(seed),
        baseline_probe=trk.baseline,
        strategies={k: asdict(v) for k, v in sorted(trk.stats.items())}, budget=int(budget))


def verify_theorem(P: Polytope, budget: int | None = None, seed: int = 0) -> SearchReport:
    """Search for 2n+4 normals; on a miss the budget doubles once."""
    rep = max_normals_search(P, budget, seed)
    if not rep.achieved:
        rep = max_normals_search(P, 2 * rep.budget, seed)
        rep.doubled = True
    return rep


def failure_fixture(P: Polytope, report: SearchReport) -> dict:
    """Self-contained replay record: polytope, seed and starting budget."""
    budget = report.budget // 2 if report.doubled else report.budget
    return {"polytope": P.to_json(), "seed": report.seed, "budget": budget,
            "report": report.to_json()}


def replay_fixture(doc: dict) -> SearchReport:
    return verify_theorem(Polytope.from_json(doc["polytope"]), doc["budget"], doc["seed"])


def dense_grid_counts(P: Polytope, per_axis: int, chunk: int = 250_000) -> dict:
    """Normal counts on a ``per_axis^n`` grid over the bounding box (interior
    points only).  Points within tolerance of a region boundary are skipped and
    counted separately."""
    lo, hi = P.vertices.min(axis=0), P.vertices.max(axis=0)
    axes = [np.linspace(a, b, per_axis + 2)[1:-1] for a, b in zip(lo, hi)]
    table = region_table(P)
    hist: dict[int, int] = {}
    skipped = 0
    total = per_axis ** P.dim
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(start + chunk, total)), (per_axis,) * P.dim)
        Y = np.column_stack([ax[i] for ax, i in zip(axes, idx)])
        Y = Y[(P.slack(Y) > 1e-9 * P.scale).all(axis=1)]
        c, flag = table.counts(Y, with_flags=True)
        skipped += int(flag.sum())
        for k, v in zip(*np.unique(c[~flag], return_counts=True)):
            hist[int(k)] = hist.get(int(k), 0) + int(v)
    return {"per_axis": per_axis, "max": max(hist) if hist else 0,
            "histogram": dict(sorted(hist.items())), "skipped": skipped}


def reproduce_count(P: Polytope, report: SearchReport) -> int:
    """Independent re-evaluation of the reported best point."""
    return len(normals_from_point(P, report.best_point))


# -- skew census -------------------------------------------------------------------

@dataclass
class SkewCensus:
    n: int
    verdicts: dict
    acute: dict
    signature_failures: list
    coloring_valid: bool
    colorable: bool | None
    alarm: bool

    @property
    def nice_count(self) -> int:
        return sum(v == NICE for v in self.verdicts.values())

    @property
    def skew_count(self) -> int:
        return sum(v == SKEW for v in self.verdicts.values())

    def to_json(self) -> dict:
        return {"n": self.n, "nice": self.nice_count, "skew": self.skew_count,
                "degenerate": len(self.verdicts) - self.nice_count - self.skew_count,
                "verdicts": {str(k): v for k, v in self.verdicts.items()},
                "signature_failures": self.signature_failures,
                "coloring_valid": self.coloring_valid, "colorable": self.colorable,
                "alarm": self.alarm}


def dihedral_acute(P: Polytope, G) -> bool:
    """Interior dihedral angle along an (n-2)-face G is acute iff the two
    outward facet normals make an obtuse angle."""
    i, j = sorted(G.facet_ids)
    return bool(P.normals[i] @ P.normals[j] < 0)


def skew_census(P: Polytope, tol: float = DEFAULT_TOL) -> SkewCensus:
    """Link verdicts of every (n-3)-face, and when they are all skew the
    acute-red coloring of (n-2)-faces with its validity and colorability."""
    from .coloring import find_coloring, instance_from_polytope

    n = P.dim
    if n < 3:
        raise NotSimple("census needs n >= 3")
    verdicts, acute, fails = {}, {}, []
    for F in P.faces_of_dim(n - 3):
        Q = spherical_link(P, F)
        T = SphericalTriangle.from_polytope(Q)
        cls = classify_triangle(T, tol)
        verdicts[F.id] = cls.verdict
        roles = [a < np.pi / 2 for a in T.angles]
        for G_id, r in zip(Q.labels, roles):
            acute.setdefault(G_id, set()).add(r)
        if cls.verdict == SKEW and sum(roles) != 2:
            fails.append(F.id)
    consistent = all(len(s) == 1 for s in acute.values())
    roles = {g: next(iter(s)) for g, s in acute.items() if len(s) == 1}
    inst = instance_from_polytope(P)
    valid = consistent and inst.is_valid({k: roles[g] for k, g in inst.item_faces.items()})
    all_skew = all(v == SKEW for v in verdicts.values())
    colorable = None
    if all_skew:
        colorable = find_coloring(inst).satisfiable
    alarm = bool(fails) or not consistent or (all_skew and n > 4 and valid)
    return SkewCensus(n, verdicts, {g: roles.get(g) for g in acute}, fails, valid, colorable, alarm)
