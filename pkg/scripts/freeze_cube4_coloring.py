"""Regenerate src/polynormals/data/cube4_coloring.json, a two-red-one-blue
coloring of the 2-faces of [-1,1]^4 keyed by facet pairs."""

import json
from pathlib import Path

from polynormals.coloring import find_coloring, instance_from_polytope
from polynormals.search import canned_polytope


def main() -> None:
    inst = instance_from_polytope(canned_polytope("cube4"))
    res = find_coloring(inst)
    out = Path(__file__).resolve().parents[1] / "src/polynormals/data/cube4_coloring.json"
    doc = {"polytope": "cube4", "red": res.red_count(),
           "assignment": [[list(k), v] for k, v in sorted(res.assignment.items())]}
    out.write_text(json.dumps(doc, indent=1) + "\n")
    print(out, res.red_count())


if __name__ == "__main__":
    main()
