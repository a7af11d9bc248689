import numpy as np
import pytest

from polynormals.errors import PointNotInCone, PreconditionFailed
from polynormals.geometry import build_polytope, cone_of_face
from polynormals.nicefaces import (NiceCertificate, NotFound, certify_nice, check_propagation,
                                   cone_sqd_critical_points, cone_table, nice_census)
from polynormals.spherical import (NICE, SKEW, SphericalPolytope, SphericalTriangle,
                                   all_skew_mask, classify_triangle, random_tetrahedra,
                                   spherical_link)

SKEW_SAMPLE = [[-0.8758, -0.4349, 0.2092], [-0.9677, -0.2005, -0.1526], [0.7932, 0.3148, 0.5212]]


def apex_polytope(directions):
    """Simplex with one vertex at the origin and edges along ``directions``."""
    D = np.asarray(directions, dtype=float)
    D = D / np.linalg.norm(D, axis=1)[:, None]
    P = build_polytope(np.vstack([np.zeros(D.shape[1]), D]))
    v = int(np.argmin(np.linalg.norm(P.vertices, axis=1)))
    return P, P.vertex_face(v)


def cone_points(C, rng, count):
    mu = rng.dirichlet(np.ones(len(C.rays)), size=count) * rng.uniform(0.2, 3.0, (count, 1))
    Y = C.base + mu @ C.rays
    if len(C.lineality):
        Y = Y + rng.standard_normal((count, len(C.lineality))) @ C.lineality
    return Y


def test_octant_cone_records(cube3):
    v = int(np.argmin(cube3.vertices.sum(axis=1)))          # (-1, -1, -1)
    C = cone_of_face(cube3, cube3.vertex_face(v))
    rep = cone_sqd_critical_points(C, [0.0, 0.0, 0.0], P=cube3)
    assert rep.count == 7 and not rep.marginal
    by_dim = sorted((r.dim, round(r.sqdist, 9)) for r in rep.records)
    assert by_dim == [(0, 3.0)] + [(1, 2.0)] * 3 + [(2, 1.0)] * 3
    assert all(r.morse_index == 2 - r.dim for r in rep.records)
    mins = sorted(tuple(np.round(r.base, 9)) for r in rep.records if r.dim == 2)
    assert mins == [(-1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (0.0, 0.0, -1.0)]


def test_perturbed_octant_still_has_seven():
    rng = np.random.default_rng(21)
    for _ in range(10):
        P, F = apex_polytope(np.eye(3) + 0.05 * rng.standard_normal((3, 3)))
        C = cone_of_face(P, F)
        y = C.base + 0.5 * C.rays.sum(axis=0)
        rep = cone_sqd_critical_points(C, y)
        assert rep.count == 7 and not rep.marginal


def test_halfspace_cone_has_one_record(generic3):
    P = generic3[0]
    F = P.faces_of_dim(P.dim - 1)[0]
    C = cone_of_face(P, F)
    rng = np.random.default_rng(22)
    for y in cone_points(C, rng, 20):
        rep = cone_sqd_critical_points(C, y)
        assert rep.count == 1 and rep.records[0].dim == P.dim - 1


def test_point_outside_cone_rejected(cube3):
    C = cone_of_face(cube3, cube3.vertex_face(0))
    with pytest.raises(PointNotInCone):
        cone_sqd_critical_points(C, C.base - C.rays.sum(axis=0))


@pytest.mark.parametrize("family", ["generic3", "generic4", "generic5"])
def test_parity_and_alternating_sum(family, request):
    rng = np.random.default_rng(23)
    for P in request.getfixturevalue(family):
        for F in P.faces[::3]:
            if F.codim < 1 or F.dim < 0:
                continue
            C = cone_of_face(P, F)
            for y in cone_points(C, rng, 8):
                rep = cone_sqd_critical_points(C, y)
                if rep.marginal:
                    continue
                assert rep.count % 2 == 1
                assert sum((-1) ** r.morse_index for r in rep.records) == 1


def test_cone_table_matches_reference(generic4):
    rng = np.random.default_rng(24)
    for P in generic4:
        for F in P.faces_of_dim(P.dim - 3)[:4]:
            table = cone_table(P, F)
            Y = cone_points(table.cone, rng, 200)
            counts, flags = table.counts(Y, with_flags=True)
            for y, c, f in zip(Y, counts, flags):
                rep = cone_sqd_critical_points(table.cone, y)
                if not f and not rep.marginal:
                    assert c == rep.count


def test_nice_links_certify_and_propagate(generic4):
    checked = 0
    for P in generic4[:3]:
        census = nice_census(P)
        for fid, cls in list(census.items())[:4]:
            F = P.faces[fid]
            cert = certify_nice(P, F, rng=np.random.default_rng(fid))
            if cls.verdict != NICE:
                continue
            assert isinstance(cert, NiceCertificate) and cert.count >= 7
            rep = cone_sqd_critical_points(cone_of_face(P, F), cert.witness)
            assert rep.count == cert.count
            prop = check_propagation(P, F, cert, rng=np.random.default_rng(1))
            assert prop.ok and all(e.count >= 9 for e in prop.entries)
            checked += 1
    assert checked > 0


def test_propagation_chain_to_vertex(generic5):
    P = generic5[0]
    F = next(F for F, cls in ((P.faces[i], c) for i, c in nice_census(P).items())
             if cls.verdict == NICE)
    cert = certify_nice(P, F)
    assert isinstance(cert, NiceCertificate)
    while F.dim > 0:
        prop = check_propagation(P, F, cert)
        assert prop.ok
        entry = prop.entries[0]
        F, cert = P.faces[entry.face_id], entry.certificate
    assert cert.count >= 2 * P.dim + 1


def test_certificate_stable_under_perturbation(generic4):
    rng = np.random.default_rng(25)
    P = generic4[1]
    for F in P.faces_of_dim(P.dim - 3):
        cert = certify_nice(P, F, rng=rng)
        if isinstance(cert, NiceCertificate):
            C = cone_of_face(P, F)
            for _ in range(5):
                y = cert.witness + 1e-8 * rng.standard_normal(P.dim)
                assert cone_sqd_critical_points(C, y).count == cert.count


def test_translation_parallel_to_face_preserves_distances(generic4):
    P = generic4[2]
    F = P.faces_of_dim(1)[0]
    cert = certify_nice(P, F)
    assert isinstance(cert, NiceCertificate)
    C = cone_of_face(P, F)
    base = np.sort([r.sqdist for r in cert.records])
    for s in (-3.0, 0.7, 5.0):
        rep = cone_sqd_critical_points(C, cert.witness + s * F.basis[0])
        assert rep.count == cert.count
        assert np.allclose(np.sort([r.sqdist for r in rep.records]), base)


def test_skew_vertex_link_gives_not_found():
    P, F = apex_polytope(SKEW_SAMPLE)
    T = SphericalTriangle.from_polytope(spherical_link(P, F))
    assert classify_triangle(T).verdict == SKEW
    res = certify_nice(P, F, budget=5000)
    assert isinstance(res, NotFound) and res.best_count < 7


def test_skew_links_in_sampled_cones():
    rng = np.random.default_rng(26)
    found = 0
    for _ in range(200):
        D = rng.standard_normal((3, 3))
        P, F = apex_polytope(D)
        if classify_triangle(SphericalTriangle.from_polytope(spherical_link(P, F))).verdict != SKEW:
            continue
        found += 1
        assert isinstance(certify_nice(P, F, budget=2000), NotFound)
        if found == 5:
            break
    assert found == 5


def test_all_skew_vertex_in_four_space_is_nice():
    tets = random_tetrahedra(np.random.default_rng(27), 4000)
    tets = tets[all_skew_mask(tets)]
    assert len(tets)
    for V in tets[:5]:
        P, F = apex_polytope(V)
        cert = certify_nice(P, F)
        assert isinstance(cert, NiceCertificate)
        assert cert.count >= 9 and cert.method == "link"


def test_codim_two_rejected(cube3):
    with pytest.raises(PreconditionFailed):
        certify_nice(cube3, cube3.faces_of_dim(1)[0])


def test_propagation_needs_certificate(generic4):
    P = generic4[0]
    F = P.faces_of_dim(P.dim - 3)[0]
    with pytest.raises(PreconditionFailed):
        check_propagation(P, F, None)
