import numpy as np
import pytest

from stfr.mesh import (
    MeshFormatError,
    disk_mesh,
    interval_mesh,
    read_mesh,
    rect_mesh,
    write_mesh,
    _edge_pair,
)


def quad_signed_area2(p):
    return sum(p[i][0] * p[(i + 1) % 4][1] - p[(i + 1) % 4][0] * p[i][1]
               for i in range(4))


def test_interval_periodic_faces():
    m = interval_mesh(4)
    assert m.faces.n == 4 and len(m.dirichlet) == 0
    m2 = interval_mesh(4, periodic=False)
    assert m2.faces.n == 3 and len(m2.dirichlet) == 2


def test_rect_counts_and_pairing():
    m = rect_mesh(3, 2)
    assert m.n_elems == 6
    # interior: 4 x-faces + 3 y-faces; periodic: 2 + 3
    assert m.faces.n == 12
    assert not np.any(m.faces.flip)  # structured mesh is orientation-aligned


def test_rect_dirichlet():
    m = rect_mesh(3, 2, periodic=False)
    assert len(m.dirichlet) == 2 * 3 + 2 * 2
    assert m.faces.n == 4 + 3


def test_every_interior_face_two_elements():
    m = disk_mesh(0)
    counts = {}
    for e, en in enumerate(m.elems):
        for edge in range(4):
            key = tuple(sorted(_edge_pair(en, edge, 2)))
            counts[key] = counts.get(key, 0) + 1
    assert set(counts.values()) <= {1, 2}
    n_interior = sum(1 for v in counts.values() if v == 2)
    assert m.faces.n == n_interior


@pytest.mark.parametrize("level,expected", [(0, 20), (1, 80), (2, 320)])
def test_disk_element_counts(level, expected):
    assert disk_mesh(level).n_elems == expected


def test_disk_boundary_on_circle():
    m = disk_mesh(1)
    ids = set()
    for e, g in m.dirichlet:
        ids.update(_edge_pair(m.elems[e], g, 2))
    r = np.linalg.norm(m.nodes[sorted(ids)], axis=1)
    assert np.all(np.abs(r - 0.5) <= 1e-12)


def test_disk_ccw_and_valid():
    m = disk_mesh(1)
    for q in m.elems:
        assert quad_signed_area2(m.nodes[q]) > 0


def test_refinement():
    assert interval_mesh(8).refined().n_elems == 16
    assert rect_mesh(4, 4).refined().n_elems == 64
    assert disk_mesh(0).refined().n_elems == 80


def test_mesh_file_roundtrip(tmp_path):
    for m in (interval_mesh(5), rect_mesh(3, 3), disk_mesh(0),
              rect_mesh(2, 2, periodic=False)):
        path = tmp_path / "m.txt"
        write_mesh(m, path)
        m2 = read_mesh(str(path))
        assert m2.dim == m.dim
        assert np.allclose(m2.nodes, m.nodes)
        assert np.array_equal(m2.elems, m.elems)
        assert m2.faces.n == m.faces.n
        assert len(m2.dirichlet) == len(m.dirichlet)


def test_read_mesh_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("not a header\n")
    with pytest.raises(MeshFormatError, match=":1:"):
        read_mesh(str(p))
    p.write_text("1 2 1 0\n0.0\n")
    with pytest.raises(MeshFormatError):
        read_mesh(str(p))
    p.write_text("1 2 1 2\n0.0\n1.0\n0 1\n0 badtag\n1 badtag\n")
    with pytest.raises(MeshFormatError, match="unknown boundary tag"):
        read_mesh(str(p))


def test_periodic_flip_from_file(tmp_path):
    # two quads side by side, periodic in x via tags, dirichlet in y
    text = """2 6 2 6
0.0 0.0
1.0 0.0
2.0 0.0
0.0 1.0
1.0 1.0
2.0 1.0
0 1 4 3
1 2 5 4
0 3 periodic:a
2 5 periodic:a
0 1 dirichlet
1 2 dirichlet
3 4 dirichlet
4 5 dirichlet
"""
    p = tmp_path / "two.txt"
    p.write_text(text)
    m = read_mesh(str(p))
    assert m.faces.n == 2  # one interior + one periodic
    assert len(m.dirichlet) == 4
