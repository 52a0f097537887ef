import math

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from xcbound import jellium as jl
from xcbound import lattice as lt

KINDS = ("sc", "fcc", "bcc")


@pytest.fixture(scope="module", params=KINDS)
def lattice_cell(request):
    lat = lt.BravaisLattice.named(request.param)
    return lat, jl.ws_cell(lat)


def sphere_pseudo_cell(n, radius):
    """Inscribed polytope of a sphere built from a Fibonacci point set."""
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    phi = math.pi * (1 + math.sqrt(5)) * i
    pts = radius * np.column_stack([np.sqrt(1 - z * z) * np.cos(phi), np.sqrt(1 - z * z) * np.sin(phi), z])
    hull = ConvexHull(pts)
    faces = []
    for simplex, eq in zip(hull.simplices, hull.equations):
        v = pts[simplex]
        if np.dot(np.cross(v[1] - v[0], v[2] - v[0]), eq[:3]) < 0:
            v = v[::-1]
        faces.append(lt.Face(v, eq[:3], -eq[3]))
    return lt.WignerSeitzCell(tuple(faces), np.zeros((0, 4, 3)), pts, hull.volume)


def test_unit_determinant(lattice_cell):
    lat, _ = lattice_cell
    assert abs(abs(np.linalg.det(lat.basis)) - 1) <= 1e-12


def test_rescales_any_basis():
    lat = lt.BravaisLattice(3.0 * np.eye(3) + 0.2 * np.ones((3, 3)))
    assert lat.volume == pytest.approx(1.0, abs=1e-12)
    assert lat.kind == "CUSTOM"


@pytest.mark.parametrize("kind,faces", [("sc", 6), ("fcc", 12), ("bcc", 14)])
def test_face_count(kind, faces):
    assert jl.ws_cell(lt.BravaisLattice.named(kind)).n_faces == faces


def test_unit_volume(lattice_cell):
    _, cell = lattice_cell
    assert cell.volume == pytest.approx(1.0, abs=1e-10)
    vol, _, _ = lt.cell_moments(cell)
    assert vol == pytest.approx(1.0, abs=1e-10)


def test_inversion_symmetric(lattice_cell):
    _, cell = lattice_cell
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1.2, 1.2, size=(20000, 3))
    assert np.array_equal(cell.contains(pts), cell.contains(-pts))


def test_cell_is_voronoi_region(lattice_cell):
    lat, cell = lattice_cell
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1.2, 1.2, size=(5000, 3))
    neigh = lat.points_within(3.0)
    closest_to_origin = np.all(
        np.linalg.norm(pts, axis=1)[:, None] <= np.linalg.norm(pts[:, None, :] - neigh[None], axis=2), axis=1)
    inside = cell.contains(pts)
    assert np.array_equal(inside, closest_to_origin)


def test_quadrupole_free(lattice_cell):
    _, cell = lattice_cell
    assert lt.quadrupole_free(cell)


def test_anisotropic_cell_detected():
    lat = lt.BravaisLattice(np.diag([1.0, 1.0, 2.0]))
    cell = lt.build_ws_cell(lat)
    assert not lt.quadrupole_free(cell)
    with pytest.raises(ValueError):
        jl.jellium_energy(lat, 6)


def test_degenerate_basis():
    with pytest.raises(lt.LatticeError):
        lt.BravaisLattice([[1, 0, 0], [0, 1, 0], [1, 1, 0]])
    with pytest.raises(lt.LatticeError):
        lt.BravaisLattice.named("hcp")


def test_points_within_sorted_and_complete():
    lat = lt.BravaisLattice.named("sc")
    pts = lat.points_within(2.0)
    r = np.linalg.norm(pts, axis=1)
    assert np.all(np.diff(r) >= -1e-12)
    # 6 + 12 + 8 + 6 points up to radius 2
    assert len(pts) == 32
    assert lat.nearest_neighbour_distance() == pytest.approx(1.0)


@pytest.mark.parametrize("point", [(0.1, 0.2, -0.05), (0.45, 0.3, 0.2), (0.7, 0.1, 0.0), (2.0, 1.5, -1.0)])
def test_potential_analytic_vs_quadrature(lattice_cell, point):
    _, cell = lattice_cell
    analytic = lt.polyhedron_potential(cell, np.array([point]))[0]
    quad = lt.polyhedron_potential_quadrature(cell, point, order=8, levels=4)
    assert analytic == pytest.approx(quad, rel=1e-6)


def test_potential_far_field_is_point_charge(lattice_cell):
    _, cell = lattice_cell
    x = np.array([[30.0, 11.0, -7.0]])
    assert lt.polyhedron_potential(cell, x)[0] == pytest.approx(1 / np.linalg.norm(x), rel=1e-7)


class TestSelfPotential:
    def test_cube_value(self):
        cell = jl.ws_cell(lt.BravaisLattice.named("sc"))
        assert jl.cell_self_potential(cell) == pytest.approx(2.38008, abs=1e-4)

    def test_cube_monte_carlo_oracle(self):
        # 1/|y| has infinite variance near 0; sample the radial part exactly instead:
        # int_cube dy/|y| = int_{S^2} dOmega rho(Omega)^2 / 2 with rho the exit distance
        rng = np.random.default_rng(11)
        d = rng.normal(size=(2_000_000, 3))
        d /= np.linalg.norm(d, axis=1)[:, None]
        exit_r = 0.5 / np.max(np.abs(d), axis=1)
        samples = 4 * math.pi * exit_r**2 / 2
        mean, se = samples.mean(), samples.std() / math.sqrt(len(samples))
        cell = jl.ws_cell(lt.BravaisLattice.named("sc"))
        assert abs(jl.cell_self_potential(cell) - mean) <= 4 * se
        assert se < 1e-3

    @pytest.mark.parametrize("kind", KINDS)
    def test_two_routes_and_refinement(self, kind):
        cell = jl.ws_cell(lt.BravaisLattice.named(kind))
        analytic = jl.cell_self_potential(cell)
        vals = [jl.cell_self_potential(cell, "quadrature", order=o) for o in (4, 8, 12)]
        assert abs(vals[-1] - analytic) <= 1e-9
        assert abs(vals[-1] - analytic) <= abs(vals[0] - analytic) + 1e-12

    def test_ball_pseudo_cell(self):
        radius = (3 / (4 * math.pi)) ** (1 / 3)
        exact = 1.5 * (4 * math.pi / 3) ** (1 / 3)
        assert exact == pytest.approx(2 * math.pi * radius**2, rel=1e-14)
        errs = []
        for n in (200, 800, 3200):
            cell = sphere_pseudo_cell(n, radius)
            errs.append(abs(lt.polyhedron_potential(cell, np.zeros((1, 3)))[0] - exact) / exact)
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 2e-3

    def test_dilation(self):
        cell = jl.ws_cell(lt.BravaisLattice.named("bcc"))
        assert jl.cell_self_potential(cell.scaled(2.0)) == pytest.approx(4 * jl.cell_self_potential(cell),
                                                                         rel=1e-12)

    def test_origin_outside(self):
        cell = jl.ws_cell(lt.BravaisLattice.named("sc"))
        shifted = lt.WignerSeitzCell(
            tuple(lt.Face(f.vertices + 2.0, f.normal, f.offset + 2.0 * f.normal.sum()) for f in cell.faces),
            cell.tetrahedra + 2.0, cell.vertices + 2.0, 1.0)
        with pytest.raises(ValueError):
            jl.cell_self_potential(shifted)


def test_second_moment_ball_bound():
    lower = jl.ball_moment_lower_bound()
    radius = (3 / (4 * math.pi)) ** (1 / 3)
    # (2 pi / 3) int_ball |x|^2 = (2 pi / 3) 4 pi R^5 / 5
    assert lower == pytest.approx(2 * math.pi / 3 * 4 * math.pi * radius**5 / 5, rel=1e-14)
    assert lower == pytest.approx(0.4836, abs=1e-4)
