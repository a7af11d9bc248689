"""Two-red-one-blue colorings of (n-2)-faces.

Items are (n-2)-faces and every (n-3)-face gives a constraint on the three
items containing it: exactly two red, one blue.  Everything here is integer
combinatorics.  Items and constraints are keyed by their facet sets (sorted
tuples), which is stable under vertex relabelling.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from importlib import resources

import networkx as nx
import numpy as np

from .errors import BadIncidence
from .geometry import Polytope

RED, BLUE = "Red", "Blue"


@dataclass(frozen=True)
class ColoringInstance:
    items: tuple
    constraints: tuple
    item_vertices: dict = field(default_factory=dict, compare=False)
    item_faces: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        index = {it: i for i, it in enumerate(self.items)}
        for c in self.constraints:
            if len(set(c)) != 3 or any(it not in index for it in c):
                raise BadIncidence(f"constraint {c} does not name 3 distinct items")
        object.__setattr__(self, "_index", index)

    def index(self, item) -> int:
        return self._index[item]

    @property
    def triples(self) -> np.ndarray:
        return np.array([[self._index[it] for it in c] for c in self.constraints],
                        dtype=np.int64).reshape(-1, 3)

    @property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.triples.ravel(), minlength=len(self.items))

    def is_valid(self, assignment: dict) -> bool:
        """``assignment`` maps items to True (red) / False (blue) or to the
        color names."""
        red = {it: (v is True or v == RED) for it, v in assignment.items()}
        return all(sum(red[it] for it in c) == 2 for c in self.constraints)

    def to_json(self) -> dict:
        return {"items": [list(it) for it in self.items],
                "constraints": [[list(it) for it in c] for c in self.constraints]}

    @classmethod
    def from_json(cls, data: dict) -> "ColoringInstance":
        items = tuple(tuple(it) for it in data["items"])
        cons = tuple(tuple(tuple(it) for it in c) for c in data["constraints"])
        return cls(items, cons)


def instance_from_polytope(P: Polytope) -> ColoringInstance:
    n = P.dim
    if n < 3:
        raise BadIncidence("the coloring instance needs n >= 3")
    key = lambda f: tuple(sorted(f.facet_ids))
    items = tuple(key(G) for G in P.faces_of_dim(n - 2))
    cons = []
    for F in P.faces_of_dim(n - 3):
        inc = [key(G) for G in P.faces_containing(F) if G.dim == n - 2]
        if len(inc) != 3:
            raise BadIncidence(f"(n-3)-face {F.id} has {len(inc)} incident (n-2)-faces")
        cons.append(tuple(sorted(inc)))
    return ColoringInstance(
        items, tuple(cons),
        item_vertices={key(G): frozenset(G.vertex_ids) for G in P.faces_of_dim(n - 2)},
        item_faces={key(G): G.id for G in P.faces_of_dim(n - 2)})


def simplex_instance(d: int) -> ColoringInstance:
    """Instance of the boundary of the d-simplex, built from facet subsets:
    (d-2)-faces are pairs of its d+1 facets, (d-3)-faces are triples."""
    items = tuple(itertools.combinations(range(d + 1), 2))
    cons = tuple(tuple(itertools.combinations(T, 2)) for T in itertools.combinations(range(d + 1), 3))
    verts = {it: frozenset(set(range(d + 1)) - set(it)) for it in items}
    return ColoringInstance(items, cons, item_vertices=verts)


def vertex_cut_instance(inst: ColoringInstance, vertex: int) -> ColoringInstance:
    """The instance inherited by the simplex cutting off ``vertex``: the
    constraints whose three items all pass through the vertex."""
    if not inst.item_vertices:
        raise BadIncidence("instance carries no vertex incidence")
    through = {it for it in inst.items if vertex in inst.item_vertices[it]}
    cons = tuple(c for c in inst.constraints if all(it in through for it in c))
    items = tuple(it for it in inst.items if any(it in c for c in cons))
    return ColoringInstance(items, cons,
                            item_vertices={it: inst.item_vertices[it] for it in items})


def incidence_graph(inst: ColoringInstance) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from((("i", it) for it in inst.items), kind="item")
    for j, c in enumerate(inst.constraints):
        g.add_node(("c", j), kind="constraint")
        g.add_edges_from((("c", j), ("i", it)) for it in c)
    return g


def isomorphic(a: ColoringInstance, b: ColoringInstance) -> bool:
    return nx.is_isomorphic(incidence_graph(a), incidence_graph(b),
                            node_match=lambda x, y: x["kind"] == y["kind"])


# -- solving -------------------------------------------------------------------------

@dataclass
class ColoringResult:
    satisfiable: bool
    assignment: dict | None
    certificate: str
    nodes: int = 0

    def red_count(self) -> int | None:
        if self.assignment is None:
            return None
        return sum(v == RED for v in self.assignment.values())

    def to_json(self) -> dict:
        return {"satisfiable": self.satisfiable, "certificate": self.certificate,
                "nodes": self.nodes, "red": self.red_count(),
                "assignment": None if self.assignment is None else
                [[list(k), v] for k, v in self.assignment.items()]}


@dataclass(frozen=True)
class DivisibilityCertificate:
    red_incidences: int
    item_degree: int | None

    @property
    def applies(self) -> bool:
        return self.item_degree is not None

    @property
    def refutes(self) -> bool:
        return self.applies and self.red_incidences % self.item_degree != 0


def divisibility_certificate(inst: ColoringInstance) -> DivisibilityCertificate:
    """Each constraint needs two red incidences.  When every item lies in the
    same number r of constraints, ``r * |Red|`` must equal ``2 * |constraints|``."""
    deg = set(inst.degrees.tolist())
    return DivisibilityCertificate(2 * len(inst.constraints),
                                   deg.pop() if len(deg) == 1 else None)


def _backtrack(inst: ColoringInstance) -> tuple[np.ndarray | None, int]:
    N = len(inst.items)
    tri = inst.triples
    deg = inst.degrees
    by_item = [[] for _ in range(N)]
    for j, c in enumerate(tri):
        for i in c:
            by_item[i].append(j)
    need = 2 * len(tri)
    val = np.full(N, -1, dtype=np.int8)   # 1 red, 0 blue
    nodes = 0

    def propagate(stack: list) -> bool:
        while stack:
            i = stack.pop()
            for j in by_item[i]:
                vs = val[tri[j]]
                reds, blues = int((vs == 1).sum()), int((vs == 0).sum())
                if reds > 2 or blues > 1:
                    return False
                free = tri[j][vs == -1]
                if not len(free):
                    continue
                if blues == 1 or reds == 2:
                    fill = 1 if blues == 1 else 0
                    for f in free:
                        val[f] = fill
                        stack.append(int(f))
        red_deg = int(deg[val == 1].sum())
        open_deg = int(deg[val == -1].sum())
        return red_deg <= need <= red_deg + open_deg

    def solve() -> bool:
        nonlocal nodes
        nodes += 1
        free = np.flatnonzero(val == -1)
        if not len(free):
            return True
        i = int(free[np.argmax(deg[free])])
        for choice in (1, 0):
            saved = val.copy()
            val[i] = choice
            if propagate([i]) and solve():
                return True
            val[:] = saved
        return False

    if not propagate([]) or not solve():
        return None, nodes
    return val.copy(), nodes


def _exhaustive(inst: ColoringInstance, chunk_bits: int = 20) -> np.ndarray | None:
    N = len(inst.items)
    if N > 24:
        raise ValueError("exhaustive mode is limited to 24 items")
    tri = inst.triples
    total = 1 << N
    step = 1 << min(chunk_bits, N)
    for start in range(0, total, step):
        x = np.arange(start, min(start + step, total), dtype=np.int64)
        for a, b, c in tri:
            s = ((x >> a) & 1) + ((x >> b) & 1) + ((x >> c) & 1)
            x = x[s == 2]
            if not len(x):
                break
        if len(x):
            return ((int(x[0]) >> np.arange(N)) & 1).astype(np.int8)
    return None


def find_coloring(inst: ColoringInstance, mode: str = "backtracking") -> ColoringResult:
    """Search for a valid coloring.  Unsatisfiable results name their proof:
    ``divisibility``, ``exhaustive`` or ``search-exhaustion`` (backtracking)."""
    if mode == "exhaustive":
        val = _exhaustive(inst)
        nodes = 1 << len(inst.items)
        cert = "exhaustive"
    elif mode == "backtracking":
        div = divisibility_certificate(inst)
        if div.refutes:
            return ColoringResult(False, None, "divisibility")
        val, nodes = _backtrack(inst)
        cert = "search-exhaustion"
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if val is None:
        return ColoringResult(False, None, cert, nodes)
    assignment = {it: RED if val[i] else BLUE for i, it in enumerate(inst.items)}
    if not inst.is_valid(assignment):
        raise AssertionError("solver returned an invalid coloring")
    red_deg = int(inst.degrees[val == 1].sum())
    if red_deg != 2 * len(inst.constraints):
        raise AssertionError("red incidence count mismatch")
    return ColoringResult(True, assignment, "witness", nodes)


def to_dimacs(inst: ColoringInstance) -> str:
    """CNF with variable ``i+1`` true iff item i is red; each constraint
    becomes the exactly-two-of-three clauses."""
    lines = []
    for a, b, c in inst.triples + 1:
        lines += [f"{a} {b} 0", f"{a} {c} 0", f"{b} {c} 0", f"-{a} -{b} -{c} 0"]
    head = [f"c two-red-one-blue coloring, {len(inst.items)} items",
            f"p cnf {len(inst.items)} {len(lines)}"]
    return "\n".join(head + lines) + "\n"


def load_witness(inst: ColoringInstance, data: dict) -> ColoringResult:
    """Re-validate a stored witness against ``inst``."""
    assignment = {tuple(k): v for k, v in data["assignment"]}
    if set(assignment) != set(inst.items) or not inst.is_valid(assignment):
        raise BadIncidence("stored coloring is not valid for this instance")
    return ColoringResult(True, assignment, "stored")


def stored_witness(name: str = "cube4") -> tuple[ColoringInstance, ColoringResult]:
    """The frozen coloring shipped with the package, re-validated on load."""
    from .search import canned_polytope
    data = json.loads(resources.files("polynormals.data").joinpath(
        f"{name}_coloring.json").read_text())
    inst = instance_from_polytope(canned_polytope(data["polytope"]))
    return inst, load_witness(inst, data)
