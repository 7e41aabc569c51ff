import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trnewton.mesh import (
    MeshError,
    ScenarioError,
    ScenarioSpec,
    TetMesh,
    apply_scenario,
    export_vtk,
    generate_beam,
    load_mesh,
    precompute_rest,
    read_vtk,
    write_tetgen,
)


def write_pair(tmp_path, nodes, tets, base=0, name="m"):
    node = tmp_path / f"{name}.node"
    ele = tmp_path / f"{name}.ele"
    node.write_text(f"{len(nodes)} 3 0 0\n" + "".join(
        f"{i + base} {x} {y} {z}\n" for i, (x, y, z) in enumerate(nodes)))
    ele.write_text(f"{len(tets)} 4 0\n" + "".join(
        f"{i + base} " + " ".join(str(v + base) for v in t) + "\n" for i, t in enumerate(tets)))
    return node


CORNER = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]


def test_tetgen_single_corner_tet(tmp_path):
    m = load_mesh(write_pair(tmp_path, CORNER, [(0, 1, 2, 3)]))
    assert m.n_vertices == 4 and m.n_tets == 1
    assert precompute_rest(m).volume[0] == pytest.approx(1 / 6)


def test_tetgen_one_based_detected(tmp_path):
    m = load_mesh(write_pair(tmp_path, CORNER, [(0, 1, 2, 3)], base=1))
    assert m.tets.tolist() == [[0, 1, 2, 3]]


def test_negative_orientation_is_swapped(tmp_path):
    m = load_mesh(write_pair(tmp_path, CORNER, [(0, 2, 1, 3)]))
    assert precompute_rest(m).volume[0] > 0
    assert sorted(m.tets[0]) == [0, 1, 2, 3]
    assert m.tets[0].tolist() != [0, 2, 1, 3]


def test_out_of_range_index(tmp_path):
    with pytest.raises(MeshError):
        load_mesh(write_pair(tmp_path, CORNER, [(0, 1, 2, 4)]))


def test_missing_and_garbled_files(tmp_path):
    with pytest.raises(MeshError):
        load_mesh(tmp_path / "nope.node")
    (tmp_path / "g.node").write_text("4 3 0 0\n0 0 0 zero\n")
    (tmp_path / "g.ele").write_text("1 4 0\n0 0 1 2 3\n")
    with pytest.raises(MeshError):
        load_mesh(tmp_path / "g.node")


def test_zero_volume_tet_rejected(tmp_path):
    flat = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)]
    with pytest.raises(MeshError):
        load_mesh(write_pair(tmp_path, flat, [(0, 1, 2, 3)]))


def test_msh_v2(tmp_path):
    p = tmp_path / "t.msh"
    p.write_text(
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n"
        "10 0 0 0\n11 1 0 0\n12 0 1 0\n13 0 0 1\n$EndNodes\n"
        "$Elements\n2\n1 15 2 0 1 10\n2 4 2 0 1 10 12 11 13\n$EndElements\n"
    )
    m = load_mesh(p, "msh")
    assert m.n_tets == 1
    assert precompute_rest(m).volume[0] == pytest.approx(1 / 6)


def test_tetmesh_invariants():
    x = np.array(CORNER, dtype=float)
    with pytest.raises(MeshError):
        TetMesh(x, [[0, 1, 1, 2]])
    with pytest.raises(MeshError):
        TetMesh(x, [[0, 1, 2, 3]], fixed_vertices=(0, 0))
    with pytest.raises(MeshError):
        TetMesh(x, [[0, 1, 2, 3]], fixed_vertices=(7,))


@pytest.mark.parametrize("div,nv,nt", [((1, 1, 1), 8, 6), ((2, 2, 8), 81, 192), ((3, 3, 12), 208, 648)])
def test_beam_counts(div, nv, nt):
    m = generate_beam(div)
    # oracle: (nx+1)(ny+1)(nz+1) vertices, 6 nx ny nz tets
    assert m.n_vertices == math.prod(d + 1 for d in div) == nv
    assert m.n_tets == 6 * math.prod(div) == nt


def test_unit_cube_volume():
    assert precompute_rest(generate_beam((1, 1, 1))).volume.sum() == pytest.approx(1.0, rel=1e-12)


@given(
    st.tuples(*[st.integers(1, 4)] * 3),
    st.tuples(*[st.floats(0.05, 10.0)] * 3),
)
def test_beam_volume_partitions_box(div, extent):
    rest = precompute_rest(generate_beam(div, extent))
    assert (rest.volume > 0).all()
    assert rest.volume.sum() == pytest.approx(math.prod(extent), rel=1e-10)


def test_beam_is_reproducible():
    a, b = generate_beam((2, 3, 4), (1, 2, 3)), generate_beam((2, 3, 4), (1, 2, 3))
    assert np.array_equal(a.tets, b.tets) and np.array_equal(a.rest_positions, b.rest_positions)


def test_beam_bad_divisions():
    with pytest.raises(MeshError):
        generate_beam((0, 1, 1))


def test_rest_data_corner_and_scaling():
    x = np.array(CORNER, dtype=float)
    r = precompute_rest(TetMesh(x, [[0, 1, 2, 3]]))
    assert np.allclose(r.dm_inv[0], np.eye(3))
    m = generate_beam((2, 1, 3), (1, 2, 1))
    r1 = precompute_rest(m)
    r2 = precompute_rest(TetMesh(2 * m.rest_positions, m.tets))
    assert np.allclose(r2.volume, 8 * r1.volume, rtol=1e-12)
    assert np.allclose(r2.dm_inv, 0.5 * r1.dm_inv, rtol=1e-12)


def test_dm_inv_inverts_rest_shape():
    m = generate_beam((2, 2, 3), (1.0, 0.5, 2.0))
    r = precompute_rest(m)
    x = m.rest_positions
    dm = (x[m.tets[:, 1:]] - x[m.tets[:, :1]]).transpose(0, 2, 1)
    assert np.allclose(r.dm_inv @ dm, np.eye(3), atol=1e-12)


def test_flat_tet_degenerate():
    x = np.array([(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 1e-16)], dtype=float)
    with pytest.raises(MeshError):
        precompute_rest(TetMesh(x, [[0, 1, 2, 3]]))


# ------------------------------------------------------------- scenarios

def test_stretch_four_times():
    m = generate_beam((2, 2, 8), (1, 1, 2))
    y, fixed = apply_scenario(m, ScenarioSpec("stretch", 4.0))
    assert np.ptp(y[:, 2]) == pytest.approx(4 * np.ptp(m.rest_positions[:, 2]), rel=1e-14)
    assert np.array_equal(y[:, :2], m.rest_positions[:, :2])
    # default slabs pin both end faces
    assert len(fixed) == 2 * 9


def test_identity_and_shared_fixed_set():
    m = generate_beam((2, 2, 6))
    y, f0 = apply_scenario(m, ScenarioSpec("identity", fixed_region=(0.2, 0.1)))
    assert np.array_equal(y, m.rest_positions)
    m2 = TetMesh(y, m.tets)
    y2, f1 = apply_scenario(m2, ScenarioSpec("identity", fixed_region=(0.2, 0.1)))
    assert np.array_equal(y2, y) and f0 == f1
    for kind in ("stretch", "compress", "bend", "twist"):
        _, f = apply_scenario(m, ScenarioSpec(kind, 0.5, fixed_region=(0.2, 0.1)))
        assert f == f0


def test_twist_closed_form():
    m = generate_beam((2, 2, 4), (1, 1, 2))
    y, _ = apply_scenario(m, ScenarioSpec("twist", math.pi))
    c = np.array([0.5, 0.5])
    x = m.rest_positions
    r0 = x[:, :2] - c
    r1 = y[:, :2] - c
    assert np.allclose(np.linalg.norm(r0, axis=1), np.linalg.norm(r1, axis=1), atol=1e-12)
    t = x[:, 2] / 2.0
    for level, angle in [(1.0, math.pi), (0.5, math.pi / 2)]:
        sel = np.isclose(t, level) & (np.linalg.norm(r0, axis=1) > 0)
        rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        assert np.allclose(r1[sel], r0[sel] @ rot.T, atol=1e-12)


def test_bend_quarter_circle():
    m = generate_beam((2, 2, 8), (1, 1, 4))
    y, _ = apply_scenario(m, ScenarioSpec("bend", math.pi / 2, axis=(0, 0, 1)))
    x = m.rest_positions
    radius = 4.0 / (math.pi / 2)
    top = np.isclose(x[:, 2], 4.0)
    # end face turned by 90 degrees: it lies in a plane of constant y
    assert np.allclose(y[top, 1], 0.5 + radius, atol=1e-12)
    assert np.allclose(y[top, 2], radius - (x[top, 1] - 0.5), atol=1e-12)
    # the third cross-section coordinate is carried along unchanged
    assert np.array_equal(y[:, 0], x[:, 0])
    bottom = np.isclose(x[:, 2], 0.0)
    assert np.allclose(y[bottom], x[bottom], atol=1e-12)


def test_scenario_validation():
    with pytest.raises(ScenarioError):
        ScenarioSpec("stretch", 0.0)
    with pytest.raises(ScenarioError):
        ScenarioSpec("stretch", 2.0, fixed_region=(0.5, 0.0))
    with pytest.raises(ScenarioError):
        ScenarioSpec("wobble")


def test_empty_explicit_fixed_set_raises():
    m = TetMesh(np.array(CORNER, dtype=float), [[0, 1, 2, 3]])
    with pytest.raises(ScenarioError):
        apply_scenario(m, ScenarioSpec("identity"), fixed_vertices=[])


# ------------------------------------------------------------- vtk

def test_vtk_roundtrip(tmp_path):
    m = generate_beam((1, 2, 2))
    y = m.rest_positions * 1.2345678901234567
    export_vtk(m, y, tmp_path / "a.vtk")
    text = (tmp_path / "a.vtk").read_text()
    assert "CELL_TYPES" in text
    x, tets = read_vtk(tmp_path / "a.vtk")
    assert np.allclose(x, y, atol=1e-9) and np.array_equal(tets, m.tets)


def test_vtk_single_tet_cell_type(tmp_path):
    m = TetMesh(np.array(CORNER, dtype=float), [[0, 1, 2, 3]])
    export_vtk(m, m.rest_positions, tmp_path / "t.vtk")
    lines = (tmp_path / "t.vtk").read_text().split("\n")
    i = next(k for k, ln in enumerate(lines) if ln.startswith("CELL_TYPES"))
    assert lines[i] == "CELL_TYPES 1" and lines[i + 1] == "10"


def test_vtk_empty_mesh_error(tmp_path):
    m = TetMesh(np.zeros((0, 3)), np.zeros((0, 4), dtype=int))
    with pytest.raises(MeshError):
        export_vtk(m, m.rest_positions, tmp_path / "e.vtk")


def test_tetgen_roundtrip(tmp_path):
    m = generate_beam((2, 1, 3), (0.3, 0.7, 1.1))
    write_tetgen(m, tmp_path / "beam")
    r = load_mesh(tmp_path / "beam.node")
    assert np.array_equal(r.rest_positions, m.rest_positions) and np.array_equal(r.tets, m.tets)
