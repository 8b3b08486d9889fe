import math

import numpy as np
import pytest

from qlab.domains import Mesh, ResolutionError, Tag, cylinder, disk, quarter_ball


@pytest.fixture(scope="module")
def qb64():
    return quarter_ball(2, 1.0, 1 / 64)


def test_quarter_ball_corner_vertex():
    mesh = quarter_ball(2, 1.0, 0.5)
    v = mesh.vertex_at((0, 0))
    assert v >= 0
    assert mesh.has_tag(v, Tag.CORNER_L)
    assert mesh.has_tag(v, Tag.V0) and mesh.has_tag(v, Tag.V1)
    assert np.count_nonzero(mesh.tag_mask(Tag.CORNER_L)) == 1


def test_quarter_ball_vertex_count(qb64):
    expected = (math.pi / 4) / (1 / 64) ** 2
    assert abs(qb64.nv - expected) / expected < 0.05


@pytest.mark.parametrize("m,h", [(2, 1 / 16), (2, 1 / 64), (3, 1 / 8)])
def test_quarter_ball_tags_near_their_sets(m, h):
    mesh = quarter_ball(m, 1.0, h)
    x = mesh.vertices
    assert np.all(x[mesh.tag_mask(Tag.V0), 0] <= h)
    assert np.all(x[mesh.tag_mask(Tag.V1), 1] <= h)
    lat = np.linalg.norm(x[mesh.tag_mask(Tag.LATERAL)], axis=1)
    assert np.all(np.abs(lat - 1.0) <= h)
    corner = x[mesh.tag_mask(Tag.CORNER_L)]
    assert np.all(np.abs(corner[:, :2]) <= h)
    assert mesh.is_connected()
    assert np.all(mesh.contains(x))


def test_quarter_ball_3d_has_corner_line():
    mesh = quarter_ball(3, 1.0, 1 / 8)
    corner = mesh.vertices[mesh.tag_mask(Tag.CORNER_L)]
    assert len(corner) > 2
    assert np.allclose(corner[:, :2], 0)


def test_resolution_errors():
    with pytest.raises(ResolutionError):
        quarter_ball(2, 1.0, 1.0)
    with pytest.raises(ResolutionError):
        disk(0.5, 0.6)
    with pytest.raises(ResolutionError):
        cylinder(1.0)
    with pytest.raises(ValueError):
        quarter_ball(4, 1.0, 0.1)


def test_cylinder_examples():
    coarse = cylinder(0.5)
    v = coarse.vertex_at((0, 0, 0))
    assert v >= 0 and coarse.has_tag(v, Tag.BOTTOM)
    mesh = cylinder(1 / 16)
    z = np.linalg.norm(mesh.vertices[mesh.tag_mask(Tag.LATERAL), :2], axis=1)
    assert np.all(np.abs(z - 1.0) <= 1 / 16)
    assert mesh.is_connected()
    assert np.all(mesh.vertices[mesh.tag_mask(Tag.BOTTOM), 2] == 0)
    assert np.allclose(mesh.vertices[mesh.tag_mask(Tag.TOP), 2], 1.0)


def test_disk_examples():
    coarse = disk(1.0, 0.5)
    v = coarse.vertex_at((0, 0))
    assert coarse.tags[v] == frozenset({Tag.FREE})
    mesh = disk(1.0, 1 / 64)
    rim = np.count_nonzero(mesh.tag_mask(Tag.LATERAL))
    assert abs(rim - 2 * math.pi * 64) / (2 * math.pi * 64) < 0.10
    assert not mesh.tag_mask(Tag.V0, Tag.V1, Tag.CORNER_L).any()


@pytest.mark.parametrize("build", [lambda h: quarter_ball(2, 1.0, h), lambda h: disk(1.0, h),
                                   lambda h: quarter_ball(3, 1.0, h)])
def test_refinement_nests(build):
    coarse, fine = build(1 / 8), build(1 / 16)
    for p in coarse.vertices:
        assert np.min(np.linalg.norm(fine.vertices - p, axis=1)) <= 1 / 16 + 1e-12


@pytest.mark.parametrize("name,build,exact", [
    ("quarter_ball", lambda h: quarter_ball(2, 1.0, h), math.pi / 4),
    ("disk", lambda h: disk(1.0, h), math.pi),
    ("cylinder", lambda h: cylinder(h), math.pi),
])
def test_affine_energy_is_consistent(name, build, exact):
    errors = []
    for h in ((1 / 8, 1 / 16) if name == "cylinder" else (1 / 16, 1 / 32)):
        mesh = build(h)
        errors.append(abs(mesh.energy(mesh.vertices[:, 0]) - exact) / exact)
    assert errors[-1] < 0.15
    assert errors[-1] < errors[0]  # error shrinks with h


def test_energy_of_affine_within_ten_percent_at_h32():
    mesh = quarter_ball(2, 1.0, 1 / 32)
    assert abs(mesh.energy(mesh.vertices[:, 0]) - math.pi / 4) / (math.pi / 4) < 0.10


def test_mesh_text_round_trip(tmp_path):
    mesh = quarter_ball(2, 1.0, 1 / 8)
    path = tmp_path / "mesh.txt"
    mesh.save(path)
    text = path.read_text().splitlines()
    assert text[0] == "# qlab-mesh v1"
    back = Mesh.load(path)
    assert back.kind == mesh.kind and back.h == mesh.h
    assert np.array_equal(back.index, mesh.index)
    assert np.array_equal(back.edges, mesh.edges)
    assert np.array_equal(back.weights, mesh.weights)
    assert back.tags == mesh.tags


def test_positive_weights_and_bipartite_colouring():
    mesh = disk(1.0, 1 / 16)
    assert np.all(mesh.weights > 0)
    c = mesh.colors()
    assert np.all(c[mesh.edges[:, 0]] != c[mesh.edges[:, 1]])
