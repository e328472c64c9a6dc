"""Domain sampling: interior/boundary residence, normals, tagging."""

import numpy as np
import pytest

from sinn import geometry as geo
from sinn.geometry import (DIRICHLET, NEUMANN, Box, Cylinder, Sphere,
                           build_point_set, export_csv, rule_all,
                           rule_cylinder_caps, rule_threshold, sample_boundary,
                           sample_interior, tag_boundary)

DOMAINS = [
    Box((0, 0, 0), (1, 1, 1)),
    Box((-1, 0, 2), (0.5, 3, 2.5)),
    Sphere((1, 2, 3), 0.5),
    Cylinder((0, 0, 0), 0.15, 0.9),
]


def test_grid_unit_box_eight_points():
    pts = sample_interior(Box((0, 0, 0), (1, 1, 1)), 8, strategy="grid")
    want = {0.25, 0.75}
    got = sorted(map(tuple, pts))
    expect = sorted((a, b, c) for a in want for b in want for c in want)
    np.testing.assert_allclose(got, expect, atol=1e-15)


@pytest.mark.parametrize("domain", DOMAINS)
@pytest.mark.parametrize("strategy", ["grid", "halton"])
def test_interior_points_strictly_inside(domain, strategy):
    pts = sample_interior(domain, 300, strategy=strategy, seed=1)
    assert pts.shape == (300, 3)
    eps = 1e-9 * domain.diameter()
    assert np.all(domain.signed_distance(pts) < -eps)


def test_interior_determinism():
    dom = Sphere((0, 0, 0), 1.0)
    a = sample_interior(dom, 123, strategy="halton", seed=42)
    b = sample_interior(dom, 123, strategy="halton", seed=42)
    np.testing.assert_array_equal(a, b)
    c = sample_interior(dom, 123, strategy="halton", seed=43)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("domain", DOMAINS)
def test_boundary_residence_and_normals(domain):
    pts, nrm = sample_boundary(domain, 400, seed=3)
    assert np.max(np.abs(domain.signed_distance(pts))) <= 1e-10
    np.testing.assert_allclose(np.linalg.norm(nrm, axis=1), 1.0, atol=1e-12)
    # outwardness: small steps along +/- normal cross the surface
    assert np.all(domain.signed_distance(pts + 1e-6 * nrm) > 0)
    assert np.all(domain.signed_distance(pts - 1e-6 * nrm) < 0)


def test_sphere_normals_radial():
    dom = Sphere((1, 2, 3), 0.5)
    pts, nrm = sample_boundary(dom, 100, seed=0)
    np.testing.assert_allclose(nrm, (pts - np.array([1, 2, 3])) / 0.5, atol=1e-12)


def test_box_normals_axis_aligned():
    pts, nrm = sample_boundary(Box((0, 0, 0), (2, 1, 1)), 100, seed=0)
    # each normal is a signed coordinate axis
    assert np.all(np.sum(np.abs(nrm), axis=1) == 1.0)
    assert np.all(np.max(np.abs(nrm), axis=1) == 1.0)


def test_cylinder_lateral_normals():
    dom = Cylinder((1, -1, 0), 0.3, 1.0)
    pts, nrm = sample_boundary(dom, 500, seed=0)
    lateral = np.abs(nrm[:, 2]) < 0.5
    radial = (pts[lateral, :2] - np.array([1, -1])) / 0.3
    np.testing.assert_allclose(nrm[lateral, :2], radial, atol=1e-12)
    np.testing.assert_allclose(nrm[lateral, 2], 0.0, atol=0)


def test_tag_threshold_rule():
    pts, nrm = sample_boundary(Box((0, 0, 0), (1, 1, 1)), 200, seed=0)
    tags = tag_boundary(pts, nrm, rule_threshold(2, 0.5, NEUMANN, DIRICHLET))
    assert set(tags) == {NEUMANN, DIRICHLET}
    assert np.all(tags[pts[:, 2] <= 0.5] == NEUMANN)
    assert np.all(tags[pts[:, 2] > 0.5] == DIRICHLET)
    # bottom face is entirely flux-tagged
    assert np.all(tags[pts[:, 2] == 0.0] == NEUMANN)


def test_tag_all_dirichlet():
    pts, nrm = sample_boundary(Sphere((0, 0, 0), 1.0), 64, seed=1)
    tags = tag_boundary(pts, nrm, rule_all(DIRICHLET))
    assert np.all(tags == DIRICHLET)


def test_tag_cylinder_caps():
    dom = Cylinder((0, 0, 0), 0.15, 0.9)
    pts, nrm = sample_boundary(dom, 600, seed=0)
    tags = tag_boundary(pts, nrm, rule_cylinder_caps(dom, NEUMANN, DIRICHLET))
    caps = np.abs(nrm[:, 2]) > 0.5
    assert np.all(tags[caps] == NEUMANN)
    assert np.all(tags[~caps] == DIRICHLET)
    assert caps.sum() > 0 and (~caps).sum() > 0


def test_tag_rejects_uncovered_points():
    pts, nrm = sample_boundary(Box((0, 0, 0), (1, 1, 1)), 20, seed=0)
    only_low = [(lambda x, n: x[2] < 0.2, NEUMANN)]
    with pytest.raises(ValueError, match="untagged"):
        tag_boundary(pts, nrm, only_low)
    double = [(lambda x, n: True, NEUMANN), (lambda x, n: True, DIRICHLET)]
    with pytest.raises(ValueError, match="doubly-tagged"):
        tag_boundary(pts, nrm, double)


def test_point_set_counts_and_export(tmp_path):
    ps = build_point_set(Box((0, 0, 0), (1, 1, 1)), 40, 60,
                         rule_threshold(0, 0.25, NEUMANN, DIRICHLET), seed=2)
    assert ps.n_pde == 40
    assert ps.n_dbc + ps.n_nbc == 60
    path = tmp_path / "points.csv"
    export_csv(ps, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x,y,z,nx,ny,nz,tag"
    assert len(lines) == 1 + 40 + 60


def test_invalid_domains():
    with pytest.raises(ValueError):
        Box((0, 0, 0), (0, 1, 1))
    with pytest.raises(ValueError):
        Sphere((0, 0, 0), 0.0)
    with pytest.raises(ValueError):
        Cylinder((0, 0, 0), 0.1, -1.0)
    with pytest.raises(ValueError):
        sample_interior(Box((0, 0, 0), (1, 1, 1)), 0)


def test_halton_sequence_properties():
    h = geo.halton(1, 512)
    assert h.shape == (512, 3)
    assert np.all((h > 0) & (h < 1))
    # low discrepancy: each third of [0,1) gets roughly a third of points
    for dim in range(3):
        counts, _ = np.histogram(h[:, dim], bins=3, range=(0, 1))
        assert counts.min() > 512 / 3 - 30
