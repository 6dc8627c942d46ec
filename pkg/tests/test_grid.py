import math

import numpy as np
import pytest

from conftest import nopt, nopt_dual
from spherefv.geometry import circumcenter, geodesic_distance, spherical_triangle_area
from spherefv.grid import (DelaunayGrid, DelaunayViolation, GridError, GridFormatError,
                           build_icosahedron, build_voronoi_dual, check_delaunay, check_uniformity,
                           format_grid, parse_grid, read_grid, refine, triangle_margins, write_grid)


def _tri_areas(g):
    x = g.vertices[g.triangles]
    return spherical_triangle_area(x[:, 0], x[:, 1], x[:, 2])


class TestIcosahedron:
    def test_counts(self):
        g = build_icosahedron()
        assert (g.n_vertices, g.n_triangles, g.n_edges) == (12, 20, 30)
        assert g.euler_characteristic() == 2

    def test_poles_and_unit_norm(self):
        g = build_icosahedron()
        assert np.allclose(np.linalg.norm(g.vertices, axis=1), 1.0, atol=1e-15)
        assert np.array_equal(g.vertices[0], [0, 0, 1]) and np.array_equal(g.vertices[-1], [0, 0, -1])

    def test_equal_edges(self):
        g = build_icosahedron()
        e = g.edges
        d = geodesic_distance(g.vertices[e[:, 0]], g.vertices[e[:, 1]])
        assert np.ptp(d) < 1e-12
        # regular icosahedron edge angle: arctan(2)
        assert d[0] == pytest.approx(math.atan(2.0), abs=1e-14)

    def test_counterclockwise(self):
        g = build_icosahedron()
        a, b, c = (g.vertices[g.triangles[:, k]] for k in range(3))
        assert np.all(np.einsum("ij,ij->i", np.cross(b - a, c - a), a) > 0)


@pytest.mark.parametrize("level", range(0, 6))
def test_counts_and_euler(level):
    g = nopt(level)
    assert g.n_vertices == 10 * 4**level + 2
    assert g.n_triangles == 20 * 4**level
    assert g.n_edges == 30 * 4**level
    assert g.euler_characteristic() == 2
    assert g.level == level


def test_first_three_vertex_counts():
    assert [nopt(k).n_vertices for k in range(3)] == [12, 42, 162]


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_refine_preserves_parents_and_tiles(level):
    g = nopt(level)
    r = refine(g)
    assert np.array_equal(r.vertices[: g.n_vertices], g.vertices)
    assert r.n_vertices == g.n_vertices + g.n_edges
    child = _tri_areas(r).reshape(-1, 4).sum(axis=1)
    assert np.allclose(child, _tri_areas(g), rtol=1e-12, atol=0)
    mids = r.vertices[g.n_vertices:]
    e = g.edges
    assert np.allclose(geodesic_distance(mids, g.vertices[e[:, 0]]),
                       geodesic_distance(mids, g.vertices[e[:, 1]]), atol=1e-14)


def test_edges_shared_by_two_triangles():
    g = nopt(3)
    et = g.edge_tris
    assert et.min() >= 0
    # t1 traverses i -> j and t2 traverses j -> i
    for e, (t1, t2) in zip(g.edges[:200], et[:200]):
        i, j = e
        tri1, tri2 = list(g.triangles[t1]), list(g.triangles[t2])
        assert tri1[(tri1.index(i) + 1) % 3] == j
        assert tri2[(tri2.index(j) + 1) % 3] == i


def test_broken_topology_rejected():
    g = build_icosahedron()
    with pytest.raises(GridError):
        DelaunayGrid(0, g.vertices, g.triangles[:-1])._topology


def test_deterministic_rebuild():
    from spherefv.grid import build_grid

    a, b = build_grid(4), build_grid(4)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.triangles, b.triangles)
    assert np.array_equal(a.edges, b.edges)


class TestDual:
    def test_level0_congruent_pentagons(self):
        d = nopt_dual(0)
        assert all(len(c) == 5 for c in d.cells)
        assert np.allclose(d.cell_areas, 4 * math.pi / 12, rtol=1e-14, atol=0)

    @pytest.mark.parametrize("level", range(0, 6))
    def test_area_partition(self, level):
        d = nopt_dual(level)
        assert abs(d.cell_areas.sum() - 4 * math.pi) <= 1e-12 * 4 * math.pi
        assert d.cell_areas.min() > 0 and d.dual_lengths.min() > 0

    @pytest.mark.parametrize("level", [2, 4])
    def test_area_oracle_l_huilier_fans(self, level):
        # independent oracle: unsigned fans of each cell polygon with the geometry module
        d = nopt_dual(level)
        for i in range(0, d.n_cells, max(1, d.n_cells // 40)):
            poly = d.cell_polygon(i)
            x = d.grid.vertices[i]
            area = spherical_triangle_area(x, poly, np.roll(poly, -1, axis=0)).sum()
            assert d.cell_areas[i] == pytest.approx(area, rel=1e-13)

    @pytest.mark.parametrize("level", [1, 3, 5])
    def test_circumcenters_equidistant(self, level):
        d = nopt_dual(level)
        g = d.grid
        e, et = g.edges, g.edge_tris
        for k in range(2):
            q = d.circumcenters[et[:, k]]
            gap = geodesic_distance(g.vertices[e[:, 0]], q) - geodesic_distance(g.vertices[e[:, 1]], q)
            assert np.max(np.abs(gap)) < 1e-10

    @pytest.mark.parametrize("level", [1, 3, 5])
    def test_dual_edge_plane_holds_primal_midpoint(self, level):
        d = nopt_dual(level)
        g = d.grid
        e, et = g.edges, g.edge_tris
        n = np.cross(d.circumcenters[et[:, 0]], d.circumcenters[et[:, 1]])
        n /= np.linalg.norm(n, axis=1)[:, None]
        mid = g.vertices[e[:, 0]] + g.vertices[e[:, 1]]
        mid /= np.linalg.norm(mid, axis=1)[:, None]
        assert np.max(np.abs(np.einsum("ij,ij->i", n, mid))) < 1e-10

    def test_circumcenters_match_geometry_module(self):
        d = nopt_dual(2)
        x = d.grid.vertices[d.grid.triangles]
        assert np.allclose(d.circumcenters, circumcenter(x[:, 0], x[:, 1], x[:, 2]), atol=1e-15)

    def test_cells_counterclockwise(self):
        d = nopt_dual(2)
        for i in range(d.n_cells):
            p = d.cell_polygon(i)
            x = d.grid.vertices[i]
            turn = np.einsum("ij,j->i", np.cross(p, np.roll(p, -1, axis=0)), x)
            assert np.all(turn > 0)

    def test_neighbor_sets(self):
        d = nopt_dual(1)
        nb = d.neighbor_sets
        assert [len(s) for s in nb[:12]] == [5] * 12
        assert all(len(s) == 6 for s in nb[12:])
        for i, s in enumerate(nb):
            for j in s:
                assert i in nb[j]

    def test_h_is_max_circumradius(self):
        d = nopt_dual(2)
        for i in range(d.n_cells):
            far = geodesic_distance(d.grid.vertices[i], d.cell_polygon(i)).max()
            assert d.h_cells[i] == pytest.approx(far, rel=1e-13)

    def test_h_halves(self):
        hs = [nopt_dual(k).h for k in range(7)]
        for a, b in zip(hs, hs[1:]):
            assert 0.85 <= 2 * b / a <= 1.15

    def test_fan_triangles_cover_cells(self):
        d = nopt_dual(2)
        owner, a, b, c = d.fan_triangles()
        fan = np.bincount(owner, spherical_triangle_area(a, b, c), minlength=d.n_cells)
        assert np.allclose(fan, d.cell_areas, rtol=1e-13)


class TestDelaunay:
    @pytest.mark.parametrize("level", range(0, 4))
    def test_nopt_passes(self, level):
        rep = check_delaunay(nopt(level))
        assert rep.passed and rep.worst_margin > 0

    def test_perturbed_vertex_fails(self):
        g = nopt(2)
        t = 17
        q = circumcenter(*g.vertices[g.triangles[t]])
        # the vertex across edge (a, b) of triangle t, pulled to the circumcenter
        other = g.triangles[g.tri_neighbors[t, 0]]
        v = [k for k in other if k not in g.triangles[t]][0]
        x = g.vertices.copy()
        x[v] = q + 0.05 * (x[v] - q)
        x[v] /= np.linalg.norm(x[v])
        bad = g.with_vertices(x)
        rep = check_delaunay(bad)
        assert not rep.passed
        with pytest.raises(DelaunayViolation, match="triangle"):
            build_voronoi_dual(bad)

    def test_margin_definition(self):
        # brute force over all vertices for one triangle
        g = nopt(1)
        margin, nearest = triangle_margins(g)
        for t in (0, 33, 79):
            tri = g.triangles[t]
            q = circumcenter(*g.vertices[tri])
            r = geodesic_distance(q, g.vertices[tri[0]])
            others = np.setdiff1d(np.arange(g.n_vertices), tri)
            d = geodesic_distance(q, g.vertices[others])
            assert margin[t] == pytest.approx(d.min() - r, abs=1e-14)
            # cocircular ties are common on symmetric grids; the reported vertex attains the minimum
            assert geodesic_distance(q, g.vertices[nearest[t]]) == pytest.approx(d.min(), abs=1e-14)


class TestUniformity:
    def test_level0_finite(self):
        rep = check_uniformity(nopt_dual(0))
        assert math.isfinite(rep.c0) and math.isfinite(rep.c1)
        assert rep.min_area == pytest.approx(rep.max_area, rel=1e-14)

    def test_bounded_across_levels(self):
        c1 = [check_uniformity(nopt_dual(k)).c1 for k in range(7)]
        c0 = [check_uniformity(nopt_dual(k)).c0 for k in range(7)]
        for a, b in zip(c1, c1[1:]):
            assert 0.5 <= b / a <= 2.0
        assert max(c0) < 10 and max(c1) < 10

    def test_zero_edge_flags_infinity(self):
        import dataclasses

        d = nopt_dual(1)
        lengths = d.dual_lengths.copy()
        lengths[3] = 0.0
        bad = dataclasses.replace(d, dual_lengths=lengths)
        assert check_uniformity(bad).c0 == math.inf


class TestFormat:
    def test_round_trip_byte_identical(self, tmp_path):
        g = nopt(2)
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        write_grid(g, p1)
        back = read_grid(p1)
        write_grid(back, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert np.array_equal(back.vertices, g.vertices)
        assert np.array_equal(back.triangles, g.triangles)

    def test_header(self):
        text = format_grid(nopt(1))
        assert text.splitlines()[0] == "SVDGRID 1 1 42 80"
        assert text.splitlines()[1].startswith("v ")

    @pytest.mark.parametrize("text", [
        "",
        "GRID 1 0 12 20\n",
        "SVDGRID 1 0 12 20\nv 1 0 0\n",
        "SVDGRID 1 0 1 1\nv 1 0 zero\nt 0 0 0\n",
        "SVDGRID 1 0 1 1\nv 1 0 0\nt 0 0 5\n",
        "SVDGRID 1 0 1 1\nx 1 0 0\nt 0 0 0\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(GridFormatError):
            parse_grid(text)
