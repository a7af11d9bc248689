"""Command-line front end.

Exit codes: 0 success, 1 expected negative outcome (target missed,
unsatisfiable, no certificate), 2 invalid input, 3 consistency alarm.  Errors
are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import coloring, nicefaces, normals, search, spherical
from .errors import ConsistencyAlarm, PolynormalsError, SignatureMismatch
from .geometry import DEFAULT_TOL, Polytope

COMMANDS = ("gen", "normals", "scan", "link", "classify", "nice", "color", "verify", "census")


class InvalidInput(PolynormalsError):
    pass


@dataclass
class RunConfig:
    command: str
    input: list
    canned: list
    gen: str | None
    seed: int = 0
    tol: float = DEFAULT_TOL
    budget: int | None = None
    out: str | None = None
    format: str = "json"
    jobs: int = 1
    figure: str | None = None
    fixtures: str | None = None

    @classmethod
    def from_file(cls, path: str, base: "RunConfig") -> "RunConfig":
        with open(path) as fh:
            data = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidInput(f"unknown config fields: {', '.join(unknown)}")
        merged = asdict(base)
        merged.update(data)
        return cls(**merged)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("UsageError", message)
        raise SystemExit(2)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise InvalidInput(f"cannot parse numbers from {text!r}") from exc


def parse_gen(text: str) -> list[search.GeneratorSpec]:
    """``n=4,m=8,count=20`` (m may be a range ``5..8``, cycled over the
    batch); optional ``method`` and ``base``."""
    opts = {}
    for part in text.split(","):
        if "=" not in part:
            raise InvalidInput(f"bad generator field {part!r}")
        k, v = part.split("=", 1)
        opts[k.strip()] = v.strip()
    unknown = set(opts) - {"n", "m", "count", "method", "base", "eps"}
    if unknown:
        raise InvalidInput(f"unknown generator fields: {sorted(unknown)}")
    try:
        n = int(opts["n"])
        count = int(opts.get("count", 1))
        mtext = opts.get("m", str(n + 1))
        if ".." in mtext:
            lo, hi = (int(x) for x in mtext.split(".."))
            ms = list(range(lo, hi + 1))
        else:
            ms = [int(mtext)]
        eps = float(opts.get("eps", 1e-3))
    except (KeyError, ValueError) as exc:
        raise InvalidInput(f"bad generator spec {text!r}") from exc
    return [dict(n=n, m=ms[i % len(ms)], method=opts.get("method", "tangent_planes"),
                 base=opts.get("base"), eps=eps) for i in range(count)]


def instance_seeds(seed: int, count: int) -> list[int]:
    """Independent 32-bit seeds per batch item from one root seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def load_polytopes(cfg: RunConfig) -> list[Polytope]:
    out = []
    for path in cfg.input:
        with open(path) as fh:
            data = json.load(fh)
        items = data if isinstance(data, list) else [data]
        for item in items:
            P = Polytope.from_json(item.get("polytope", item), tol=cfg.tol)
            P.label = path
            if "seed" in item and "polytope" in item:       # a replay fixture
                P.replay = (int(item["seed"]), item.get("budget"))
            out.append(P)
    for name in cfg.canned:
        out.append(search.canned_polytope(name))
    if cfg.gen:
        specs = parse_gen(cfg.gen)
        for spec, s in zip(specs, instance_seeds(cfg.seed, len(specs))):
            out.append(search.random_simple_polytope(search.GeneratorSpec(seed=s, **spec)))
    if not out:
        raise InvalidInput("no polytope given (use --input, --canned or --gen)")
    return out


def _one(polys: list[Polytope]) -> Polytope:
    if len(polys) != 1:
        raise InvalidInput("this command takes exactly one polytope")
    return polys[0]


def _point(text: str | None, P: Polytope) -> np.ndarray:
    if text is None:
        return P.chebyshev_center()[0]
    y = np.array(_floats(text))
    if len(y) != P.dim:
        raise InvalidInput(f"point has {len(y)} coordinates, polytope lives in R^{P.dim}")
    return y


def _face(P: Polytope, text: str | None):
    if text is None:
        return None
    if ":" in text:
        kind, val = text.split(":", 1)
        if kind == "facets":
            return P.face_by_facets(int(x) for x in val.split(","))
        if kind == "vertex":
            return P.vertex_face(int(val))
        raise InvalidInput(f"bad face selector {text!r}")
    try:
        return P.faces[int(text)]
    except (ValueError, IndexError) as exc:
        raise InvalidInput(f"no face {text!r}") from exc


# -- commands ----------------------------------------------------------------------

def cmd_gen(cfg, args):
    polys = load_polytopes(cfg)
    docs = [dict(P.to_json(), label=getattr(P, "label", None)) for P in polys]
    return 0, docs[0] if len(docs) == 1 else docs, None


def cmd_normals(cfg, args):
    P = _one(load_polytopes(cfg))
    y = _point(args.point, P)
    recs = normals.normals_from_point(P, y, cfg.tol)
    doc = {"point": y.tolist(), "count": len(recs), "records": [r.to_json() for r in recs]}
    if not any(r.marginal for r in recs):
        tally = normals.morse_tally(recs, P.dim)
        doc["tally"] = list(tally.counts)
        doc["alternating"] = tally.alternating
    else:
        doc["marginal"] = [r.face_id for r in recs if r.marginal]
    if cfg.figure:
        from .plotting import plot_normals_2d
        plot_normals_2d(P, y, recs, cfg.figure)
    rows = [("face", "dim", "index", "sqdist", *[f"base{i}" for i in range(P.dim)])]
    rows += [(r.face_id, r.dim, r.morse_index, r.sqdist, *r.base) for r in recs]
    return 0, doc, rows


def cmd_scan(cfg, args):
    P = _one(load_polytopes(cfg))
    if args.start is None or args.end is None:
        raise InvalidInput("scan needs --from and --to")
    a, b = _point(args.start, P), _point(args.end, P)
    scan = normals.scan_segment(P, a, b, steps=args.steps)
    doc = {"a": a.tolist(), "b": b.tolist(), "samples": scan.to_csv_rows(),
           "crossings": [list(c) for c in scan.crossings],
           "unresolved": [list(c) for c in scan.unresolved]}
    if cfg.figure:
        from .plotting import plot_scan
        plot_scan(scan, cfg.figure)
    return (1 if scan.unresolved else 0), doc, [("t", "count")] + scan.to_csv_rows()


def cmd_link(cfg, args):
    P = _one(load_polytopes(cfg))
    F = _face(P, args.face)
    if F is None:
        raise InvalidInput("link needs --face")
    Q = spherical.spherical_link(P, F)
    doc = Q.to_json()
    if Q.vertices.shape == (3, 3):
        cls = spherical.classify_triangle(spherical.SphericalTriangle.from_polytope(Q), cfg.tol)
        doc["classification"] = cls.to_json()
    return 0, doc, None


def cmd_classify(cfg, args):
    if args.triangle:
        V = np.array(_floats(args.triangle)).reshape(-1, 3)
    elif cfg.input:
        with open(cfg.input[0]) as fh:
            V = np.array(json.load(fh)["vertices"], dtype=float)
    else:
        raise InvalidInput("classify needs --triangle or --input")
    if V.shape != (3, 3):
        raise InvalidInput("a triangle is three unit vectors in R^3")
    T = spherical.SphericalTriangle.of(*V)
    cls = spherical.classify_triangle(T, cfg.tol)
    doc = cls.to_json()
    doc["vertices"] = T.V.tolist()
    if cls.verdict == spherical.SKEW:
        sig = spherical.skew_signature(T, np.random.default_rng(cfg.seed))
        doc["skew_signature"] = {"labeling": sig.labeling, "item3_failures": sig.item3_failures}
        if not sig.ok:
            raise SignatureMismatch("skew triangle without the two-long-edges signature")
    return 0, doc, None


def cmd_nice(cfg, args):
    P = _one(load_polytopes(cfg))
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    F = _face(P, args.face)
    faces = [F] if F is not None else P.faces_of_dim(P.dim - 3)
    budget = cfg.budget or 20000
    out, code = [], 0
    for F in faces:
        res = nicefaces.certify_nice(P, F, budget, rng, tol=cfg.tol)
        entry = res.to_json()
        if isinstance(res, nicefaces.NiceCertificate):
            if args.propagate and F.dim > 0:
                rep = nicefaces.check_propagation(P, F, res, budget, rng)
                entry["propagation"] = [{"face": e.face_id, "found": e.found, "count": e.count,
                                         "target": e.target, "seeded": e.seeded}
                                        for e in rep.entries]
        else:
            code = 1
        out.append(entry)
    return code, out, None


def cmd_color(cfg, args):
    P = _one(load_polytopes(cfg))
    inst = coloring.instance_from_polytope(P)
    mode = args.mode
    if mode == "auto":
        mode = "exhaustive" if len(inst.items) <= 24 else "backtracking"
    res = coloring.find_coloring(inst, mode)
    doc = {"items": len(inst.items), "constraints": len(inst.constraints), "mode": mode,
           **res.to_json()}
    div = coloring.divisibility_certificate(inst)
    doc["divisibility"] = {"red_incidences": div.red_incidences, "item_degree": div.item_degree,
                           "refutes": div.refutes}
    if args.dimacs:
        with open(args.dimacs, "w") as fh:
            fh.write(coloring.to_dimacs(inst))
    return (0 if res.satisfiable else 1), doc, None


def _verify_one(job):
    P, seed, budget = job
    rep = search.verify_theorem(P, budget, seed)
    return rep


def cmd_verify(cfg, args):
    polys = load_polytopes(cfg)
    seeds = instance_seeds(cfg.seed + 1, len(polys))
    jobs = []
    for P, s in zip(polys, seeds):
        replay = getattr(P, "replay", None)
        jobs.append((P, replay[0], replay[1]) if replay else (P, s, cfg.budget))
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            reports = list(ex.map(_verify_one, jobs))
    else:
        reports = [_verify_one(j) for j in jobs]
    for P, r in zip(polys, reports):
        if search.reproduce_count(P, r) != r.best_count:
            raise ConsistencyAlarm(f"best count of {r.polytope} does not reproduce")
    passed = sum(r.achieved for r in reports)
    doc = {"passed": passed, "total": len(reports),
           "summary": [{"polytope": r.polytope, "n": r.n, "best_count": r.best_count,
                        "target": r.target, "achieved": r.achieved,
                        "baseline_probe": r.baseline_probe} for r in reports],
           "reports": [r.to_json() for r in reports]}
    failures = [search.failure_fixture(P, r) for P, r in zip(polys, reports)
                if not (r.achieved and r.baseline_ok)]
    if failures:
        doc["failures"] = failures
        if cfg.fixtures:
            os.makedirs(cfg.fixtures, exist_ok=True)
            for i, fx in enumerate(failures):
                with open(os.path.join(cfg.fixtures, f"failure_{i:03d}.json"), "w") as fh:
                    json.dump(fx, fh, indent=1, sort_keys=True)
    if cfg.figure:
        from .plotting import plot_verify_summary
        plot_verify_summary(reports, cfg.figure)
    rows = [("polytope", "n", "best_count", "target", "achieved")]
    rows += [(r.polytope, r.n, r.best_count, r.target, int(r.achieved)) for r in reports]
    return (0 if passed == len(reports) else 1), doc, rows


def cmd_census(cfg, args):
    out, alarm = [], False
    for P in load_polytopes(cfg):
        c = search.skew_census(P, cfg.tol)
        out.append(dict(c.to_json(), polytope=getattr(P, "label", None)))
        alarm |= c.alarm
    if alarm:
        _emit_error("ConsistencyAlarm", "skew census contradicts the coloring obstruction")
        return 3, out if len(out) > 1 else out[0], None
    return 0, out if len(out) > 1 else out[0], None


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", action="append", default=[], help="polytope JSON file")
    common.add_argument("--canned", action="append", default=[],
                        help="triangle, square, cube3, cube4, simplexN, thin_tetrahedron")
    common.add_argument("--gen", help="generator spec, e.g. n=4,m=8,count=20")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL)
    common.add_argument("--budget", type=int, default=None)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--figure", help="also render a PNG figure to this path")
    common.add_argument("--config", help="JSON file with run settings")
    common.add_argument("--fixtures", help="directory for replayable verify failure files")

    p = _Parser(prog="polynormals", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("gen", parents=[common], help="emit polytope JSON")
    s = sub.add_parser("normals", parents=[common], help="normals from a point")
    s.add_argument("--point")
    s = sub.add_parser("scan", parents=[common], help="normal counts along a segment")
    s.add_argument("--from", dest="start")
    s.add_argument("--to", dest="end")
    s.add_argument("--steps", type=int, default=100)
    s = sub.add_parser("link", parents=[common], help="spherical link of a face")
    s.add_argument("--face", help="face id, facets:i,j,.. or vertex:i")
    s = sub.add_parser("classify", parents=[common], help="nice/skew verdict of a triangle")
    s.add_argument("--triangle", help="nine numbers: three vectors of R^3")
    s = sub.add_parser("nice", parents=[common], help="nice-face certificates")
    s.add_argument("--face")
    s.add_argument("--propagate", action="store_true")
    s = sub.add_parser("color", parents=[common], help="two-red-one-blue coloring")
    s.add_argument("--mode", choices=("auto", "backtracking", "exhaustive"), default="auto",
                   help="auto: exhaustive up to 24 items, else backtracking")
    s.add_argument("--dimacs", help="also write the CNF encoding here")
    sub.add_parser("verify", parents=[common], help="search for 2n+4 normals")
    sub.add_parser("census", parents=[common], help="nice/skew census of (n-3)-faces")
    return p


def _config(args) -> RunConfig:
    fmt = args.format or ("csv" if args.command == "scan" else "json")
    cfg = RunConfig(args.command, args.input, args.canned, args.gen, args.seed, args.tol,
                    args.budget, args.out, fmt, args.jobs, args.figure, args.fixtures)
    if args.config:
        cfg = RunConfig.from_file(args.config, cfg)
    if cfg.jobs < 1:
        raise InvalidInput("--jobs must be positive")
    return cfg


def _render(cfg: RunConfig, doc, rows) -> str:
    if cfg.format == "csv":
        if rows is None:
            raise InvalidInput(f"{cfg.command} has no CSV form")
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        return buf.getvalue()
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


_VALUE_FLAGS = ("--point", "--from", "--to", "--triangle")


def _glue_values(argv: list[str]) -> list[str]:
    """``--from -0.5,0.2`` would read the value as a flag; glue it on."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run(argv=None) -> int:
    argv = _glue_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _config(args)
        code, doc, rows = HANDLERS[cfg.command](cfg, args)
        text = _render(cfg, doc, rows)
        if cfg.out:
            with open(cfg.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return code
    except PolynormalsError as exc:
        _emit_error(type(exc).__name__, str(exc))
        return exc.exit_code
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
