import json
import os
import subprocess
import sys
from pathlib import Path

import networkx as nx
import numpy as np
import pytest

from polynormals import cli, spherical
from polynormals.geometry import Polytope
from polynormals.search import canned_polytope

GOLDEN = Path(__file__).parent / "golden"


def call(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rounded(obj, digits=8):
    if isinstance(obj, float):
        return round(obj, digits) + 0.0
    if isinstance(obj, list):
        return [rounded(x, digits) for x in obj]
    if isinstance(obj, dict):
        return {k: rounded(v, digits) for k, v in obj.items()}
    return obj


GOLDEN_CASES = {
    "normals_cube3": ["normals", "--canned", "cube3", "--point", "0,0,0"],
    "normals_triangle": ["normals", "--canned", "triangle", "--point", "0,0"],
    "color_simplex4": ["color", "--canned", "simplex4"],
    "color_simplex3": ["color", "--canned", "simplex3"],
    "link_cube3_vertex": ["link", "--canned", "cube3", "--face", "vertex:0"],
    "classify_octant": ["classify", "--triangle", "1,0,0,0,1,0,0,0,1"],
    "gen_square": ["gen", "--canned", "square"],
}


@pytest.mark.parametrize("name", sorted(GOLDEN_CASES))
def test_golden_reports(name, capsys):
    code, out, _ = call(capsys, *GOLDEN_CASES[name])
    doc = rounded(json.loads(out))
    path = GOLDEN / f"{name}.json"
    if os.environ.get("UPDATE_GOLDEN"):
        path.write_text(json.dumps({"exit": code, "report": doc}, indent=1, sort_keys=True) + "\n")
    expected = json.loads(path.read_text())
    assert code == expected["exit"]
    assert doc == expected["report"]


def test_cube_normals_example(capsys):
    code, out, _ = call(capsys, "normals", "--canned", "cube3", "--point", "0,0,0")
    doc = json.loads(out)
    assert code == 0 and doc["count"] == 26 and doc["tally"] == [6, 12, 8]
    assert doc["alternating"] == 2


def test_simplex4_coloring_example(capsys):
    code, out, _ = call(capsys, "color", "--canned", "simplex4")
    doc = json.loads(out)
    assert code == 1 and not doc["satisfiable"] and doc["certificate"] == "exhaustive"
    assert doc["divisibility"]["refutes"]


def test_invalid_input_exit_two(capsys):
    code, out, err = call(capsys, "normals", "--canned", "cube3", "--point", "5,0,0")
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "PointNotInterior"
    code, _, err = call(capsys, "normals", "--canned", "cube3", "--point", "0,0")
    assert code == 2 and json.loads(err)["error"] == "InvalidInput"
    code, _, err = call(capsys, "frobnicate")
    assert code == 2 and json.loads(err)["error"] == "UsageError"
    code, _, err = call(capsys, "normals", "--canned", "nonagon")
    assert code == 2 and json.loads(err)["error"] == "UnknownName"


def test_unknown_config_field(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"seed": 3, "colour": "red"}))
    code, _, err = call(capsys, "gen", "--canned", "square", "--config", str(cfg))
    assert code == 2 and "colour" in json.loads(err)["message"]


def test_config_file_sets_fields(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"format": "csv"}))
    code, out, _ = call(capsys, "normals", "--canned", "square", "--config", str(cfg))
    assert code == 0 and out.splitlines()[0].startswith("face,dim,index,sqdist")


def test_consistency_alarm_exit_three(capsys, monkeypatch):
    broken = spherical.SkewSignature(None, 0, 0)
    monkeypatch.setattr(spherical, "skew_signature", lambda *a, **k: broken)
    tri = "-0.8758,-0.4349,0.2092,-0.9677,-0.2005,-0.1526,0.7932,0.3148,0.5212"
    code, _, err = call(capsys, "classify", "--triangle", tri)
    assert code == 3 and json.loads(err)["error"] == "SignatureMismatch"


def test_scan_csv(capsys):
    code, out, _ = call(capsys, "scan", "--canned", "square", "--from", "-0.5,-0.3",
                        "--to", "0.6,0.2", "--steps", "10")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "t,count" and len(lines) == 12
    assert {line.split(",")[1] for line in lines[1:]} == {"8"}


def test_figures_are_written(tmp_path, capsys):
    png = tmp_path / "n.png"
    code, _, _ = call(capsys, "normals", "--canned", "triangle", "--figure", str(png),
                      "--out", str(tmp_path / "n.json"))
    assert code == 0 and png.read_bytes()[:4] == b"\x89PNG"
    png = tmp_path / "s.png"
    call(capsys, "scan", "--canned", "triangle", "--from", "0,0", "--to", "0.3,0.1",
         "--figure", str(png))
    assert png.exists()


def _lattice_graph(P: Polytope) -> nx.Graph:
    g = nx.Graph()
    for F in P.faces:
        g.add_node(("f", F.id), dim=F.dim)
        for v in F.vertex_ids:
            g.add_edge(("f", F.id), ("v", v))
    for v in range(len(P.vertices)):
        g.nodes[("v", v)]["dim"] = -1
    return g


@pytest.mark.parametrize("source", [["--canned", "cube3"], ["--gen", "n=4,m=7"],
                                    ["--canned", "thin_tetrahedron"]])
def test_polytope_json_round_trip(source, tmp_path, capsys):
    code, out, _ = call(capsys, "gen", *source, "--seed", "5")
    path = tmp_path / "p.json"
    path.write_text(out)
    P = Polytope.from_json(json.loads(out))
    code, out2, _ = call(capsys, "gen", "--input", str(path))
    Q = Polytope.from_json(json.loads(out2))
    assert P.face_counts() == Q.face_counts()
    assert nx.is_isomorphic(_lattice_graph(P), _lattice_graph(Q),
                            node_match=lambda a, b: a["dim"] == b["dim"])


def test_verify_example_batch(capsys):
    code, out, _ = call(capsys, "verify", "--gen", "n=4,m=8,count=20", "--seed", "7")
    doc = json.loads(out)
    assert code == 0 and doc["passed"] == doc["total"] == 20
    assert all(s["best_count"] >= 12 for s in doc["summary"])


def test_verify_jobs_do_not_change_output(tmp_path):
    outs = []
    for jobs in ("1", "2"):
        path = tmp_path / f"v{jobs}.json"
        subprocess.run([sys.executable, "-m", "polynormals.cli", "verify", "--gen",
                        "n=3,m=4..8,count=5", "--seed", "2", "--jobs", jobs, "--out", str(path)],
                       check=True)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_verify_failure_writes_fixture(tmp_path, capsys):
    fx = tmp_path / "fx"
    code, out, _ = call(capsys, "verify", "--canned", "triangle", "--budget", "1000",
                        "--fixtures", str(fx))
    assert code == 1
    files = sorted(fx.iterdir())
    assert len(files) == 1
    code, out2, _ = call(capsys, "verify", "--input", str(files[0]))
    a, b = json.loads(out)["reports"][0], json.loads(out2)["reports"][0]
    assert a["best_point"] == b["best_point"] and a["seed"] == b["seed"]


def test_nice_and_census_commands(capsys):
    code, out, _ = call(capsys, "nice", "--gen", "n=4,m=6", "--seed", "1", "--face", "0")
    assert code in (0, 1)
    code, out, _ = call(capsys, "census", "--gen", "n=5,m=7", "--seed", "1")
    doc = json.loads(out)
    assert code == 0 and doc["nice"] >= 1 and not doc["alarm"]


def test_color_dimacs_export(tmp_path, capsys):
    path = tmp_path / "c.cnf"
    code, _, _ = call(capsys, "color", "--canned", "cube4", "--dimacs", str(path))
    text = path.read_text()
    assert code == 0 and "p cnf 24 128" in text
