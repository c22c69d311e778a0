"""Meshes: interval (1D), structured rectangle and butterfly disk (2D quads),
plus the plain-text mesh file format.

Local edge conventions for quads (element nodes CCW, mapped to reference
corners (-1,-1), (1,-1), (1,1), (-1,1)):

    edge 0: eta = -1, nodes (n0, n1), parametrized by increasing xi
    edge 1: xi  = +1, nodes (n1, n2), parametrized by increasing eta
    edge 2: eta = +1, nodes (n3, n2), parametrized by increasing xi
    edge 3: xi  = -1, nodes (n0, n3), parametrized by increasing eta

1D elements (n0, n1): edge 0 is the left end, edge 1 the right end.

Interior/periodic faces carry a `flip` flag: True when the two elements
traverse the shared edge in opposite tangential order.
"""

from dataclasses import dataclass, field

import numpy as np

EDGE_NODES_2D = ((0, 1), (1, 2), (3, 2), (0, 3))


class MeshFormatError(ValueError):
    """Malformed mesh file; message carries the offending line number."""


@dataclass
class FaceList:
    """Paired faces (interior + periodic) as flat index arrays."""

    elem_l: np.ndarray
    edge_l: np.ndarray
    elem_r: np.ndarray
    edge_r: np.ndarray
    flip: np.ndarray

    @property
    def n(self) -> int:
        return len(self.elem_l)


@dataclass
class Mesh:
    """Spatial mesh with connectivity, face pairing, and boundary tags.

    `nodes` holds the reference (t = 0) coordinates; motion prescriptions
    produce displaced copies and never mutate the mesh.
    """

    dim: int
    nodes: np.ndarray            # (n_nodes, dim)
    elems: np.ndarray            # (n_elems, 2) or (n_elems, 4), CCW
    faces: FaceList
    dirichlet: np.ndarray        # (n_bf, 2): (elem, edge)
    spec: dict = field(default_factory=dict)   # builder recipe, for refinement
    domain_period: tuple | None = None         # period lengths if fully periodic

    @property
    def n_elems(self) -> int:
        return len(self.elems)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def elem_corners(self, coords: np.ndarray | None = None) -> np.ndarray:
        """Corner coordinates per element, (n_elems, n_corners, dim)."""
        c = self.nodes if coords is None else coords
        return c[self.elems]

    def refined(self) -> "Mesh":
        """One uniform refinement level (element count x4 in 2D, x2 in 1D)."""
        s = dict(self.spec)
        kind = s.get("type")
        if kind == "interval":
            s["n"] *= 2
            return interval_mesh(**{k: v for k, v in s.items() if k != "type"})
        if kind == "rect":
            s["nx"] *= 2
            s["ny"] *= 2
            return rect_mesh(**{k: v for k, v in s.items() if k != "type"})
        if kind == "disk":
            s["level"] += 1
            return disk_mesh(**{k: v for k, v in s.items() if k != "type"})
        raise ValueError(f"mesh of type {kind!r} cannot be refined automatically")


def _edge_pair(elem_nodes, edge: int, dim: int):
    if dim == 1:
        return (int(elem_nodes[edge]),)
    a, b = EDGE_NODES_2D[edge]
    return (int(elem_nodes[a]), int(elem_nodes[b]))


def _build_faces(dim, elems, periodic_pairs, dirichlet_keys):
    """Pair element edges into faces.

    periodic_pairs: list of ((elemA, edgeA), (elemB, edgeB), flip)
    dirichlet_keys: set of sorted node tuples tagged dirichlet
    """
    n_edges = 2 if dim == 1 else 4
    seen: dict[tuple, list] = {}
    for e, en in enumerate(elems):
        for edge in range(n_edges):
            pair = _edge_pair(en, edge, dim)
            key = tuple(sorted(pair))
            seen.setdefault(key, []).append((e, edge, pair))

    fl, gl, fr, gr, flip = [], [], [], [], []
    boundary = []
    for key, hits in seen.items():
        if len(hits) > 2:
            raise ValueError(f"edge {key} shared by more than two elements")
        if len(hits) == 2:
            (eL, gL, pL), (eR, gR, pR) = hits
            fl.append(eL); gl.append(gL); fr.append(eR); gr.append(gR)
            flip.append(pL != pR)  # equal tuples -> same tangential order
        else:
            boundary.append(hits[0])

    diri = []
    matched = set()
    for (ea, ga), (eb, gb), fp in periodic_pairs:
        fl.append(ea); gl.append(ga); fr.append(eb); gr.append(gb)
        flip.append(fp)
        matched.add((ea, ga))
        matched.add((eb, gb))
    for e, edge, pair in boundary:
        if (e, edge) in matched:
            continue
        key = tuple(sorted(pair))
        if dirichlet_keys is not None and key not in dirichlet_keys:
            raise ValueError(f"boundary edge {key} has no tag")
        diri.append((e, edge))

    faces = FaceList(
        elem_l=np.asarray(fl, dtype=int),
        edge_l=np.asarray(gl, dtype=int),
        elem_r=np.asarray(fr, dtype=int),
        edge_r=np.asarray(gr, dtype=int),
        flip=np.asarray(flip, dtype=bool),
    )
    return faces, np.asarray(diri, dtype=int).reshape(-1, 2)


def interval_mesh(n: int, xmin: float = 0.0, xmax: float = 1.0,
                  periodic: bool = True) -> Mesh:
    """Uniform 1D mesh of n elements on [xmin, xmax]."""
    if n < 1:
        raise ValueError("interval_mesh requires n >= 1")
    nodes = np.linspace(xmin, xmax, n + 1)[:, None]
    elems = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    periodic_pairs = []
    dirichlet_keys = None
    if periodic:
        periodic_pairs.append(((n - 1, 1), (0, 0), False))
    else:
        dirichlet_keys = {(0,), (n,)}
    faces, diri = _build_faces(1, elems, periodic_pairs, dirichlet_keys)
    return Mesh(
        dim=1, nodes=nodes, elems=elems, faces=faces, dirichlet=diri,
        spec={"type": "interval", "n": n, "xmin": xmin, "xmax": xmax,
              "periodic": periodic},
        domain_period=(xmax - xmin,) if periodic else None,
    )


def rect_mesh(nx: int, ny: int, xmin: float = 0.0, xmax: float = 1.0,
              ymin: float = 0.0, ymax: float = 1.0,
              periodic: bool = True) -> Mesh:
    """Structured nx-by-ny quad mesh of [xmin, xmax] x [ymin, ymax]."""
    if nx < 1 or ny < 1:
        raise ValueError("rect_mesh requires nx, ny >= 1")
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)

    def nid(i, j):
        return j * (nx + 1) + i

    elems = []
    for j in range(ny):
        for i in range(nx):
            elems.append([nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)])
    elems = np.asarray(elems, dtype=int)

    def eid(i, j):
        return j * nx + i

    periodic_pairs = []
    dirichlet_keys = None
    if periodic:
        for j in range(ny):
            periodic_pairs.append(((eid(nx - 1, j), 1), (eid(0, j), 3), False))
        for i in range(nx):
            periodic_pairs.append(((eid(i, ny - 1), 2), (eid(i, 0), 0), False))
    else:
        dirichlet_keys = set()
        for i in range(nx):
            dirichlet_keys.add(tuple(sorted((nid(i, 0), nid(i + 1, 0)))))
            dirichlet_keys.add(tuple(sorted((nid(i, ny), nid(i + 1, ny)))))
        for j in range(ny):
            dirichlet_keys.add(tuple(sorted((nid(0, j), nid(0, j + 1)))))
            dirichlet_keys.add(tuple(sorted((nid(nx, j), nid(nx, j + 1)))))
    faces, diri = _build_faces(2, elems, periodic_pairs, dirichlet_keys)
    return Mesh(
        dim=2, nodes=nodes, elems=elems, faces=faces, dirichlet=diri,
        spec={"type": "rect", "nx": nx, "ny": ny, "xmin": xmin, "xmax": xmax,
              "ymin": ymin, "ymax": ymax, "periodic": periodic},
        domain_period=(xmax - xmin, ymax - ymin) if periodic else None,
    )


def _ccw_fix(nodes, elems):
    """Reorder any clockwise quad to counter-clockwise in place."""
    for q in elems:
        p = nodes[q]
        area2 = 0.0
        for i in range(4):
            x0, y0 = p[i]
            x1, y1 = p[(i + 1) % 4]
            area2 += x0 * y1 - x1 * y0
        if area2 < 0:
            q[1], q[3] = q[3], q[1]
    return elems


def disk_mesh(level: int = 0, radius: float = 0.5) -> Mesh:
    """All-quad butterfly mesh of the disk of given radius centered at (0,0).

    Five blocks (center square plus four ring blocks); refinement level r
    gives 20 * 4**r elements.  Every boundary node sits exactly on the
    circle.  Boundary faces are tagged dirichlet (analytic states).
    """
    if level < 0:
        raise ValueError("disk_mesh requires level >= 0")
    n = 2 * 2**level          # divisions per block edge
    a = 0.5 * radius          # half-width of the central square block

    key2id: dict[tuple, int] = {}
    coords: list[tuple] = []

    def add_node(x, y):
        key = (round(float(x), 12), round(float(y), 12))
        if key not in key2id:
            key2id[key] = len(coords)
            coords.append((float(x), float(y)))
        return key2id[key]

    elems = []

    # center block
    s = np.linspace(-1.0, 1.0, n + 1)
    cid = [[add_node(a * si, a * sj) for si in s] for sj in s]
    for j in range(n):
        for i in range(n):
            elems.append([cid[j][i], cid[j][i + 1], cid[j + 1][i + 1], cid[j + 1][i]])

    # ring blocks: inner curve = square edge, outer curve = circular arc
    def ring_block(inner_fn, phi0):
        u = np.linspace(-1.0, 1.0, n + 1)
        w = np.linspace(0.0, 1.0, n + 1)
        ids = np.empty((n + 1, n + 1), dtype=int)
        for iu, uu in enumerate(u):
            xi, yi = inner_fn(uu)
            phi = phi0 + uu * np.pi / 4
            xo, yo = radius * np.cos(phi), radius * np.sin(phi)
            for iw, ww in enumerate(w):
                ids[iu, iw] = add_node((1 - ww) * xi + ww * xo,
                                       (1 - ww) * yi + ww * yo)
        for iu in range(n):
            for iw in range(n):
                elems.append([ids[iu, iw], ids[iu + 1, iw],
                              ids[iu + 1, iw + 1], ids[iu, iw + 1]])

    ring_block(lambda u: (a, a * u), 0.0)                 # east
    ring_block(lambda u: (-a * u, a), np.pi / 2)          # north
    ring_block(lambda u: (-a, -a * u), np.pi)             # west
    ring_block(lambda u: (a * u, -a), 3 * np.pi / 2)      # south

    nodes = np.asarray(coords)
    elems = _ccw_fix(nodes, np.asarray(elems, dtype=int))

    # all untagged boundary edges of this generator lie on the circle
    faces, diri = _build_faces(2, elems, [], dirichlet_keys=None)
    mesh = Mesh(
        dim=2, nodes=nodes, elems=elems, faces=faces, dirichlet=diri,
        spec={"type": "disk", "level": level, "radius": radius},
        domain_period=None,
    )
    return mesh


def write_mesh(mesh: Mesh, path: str) -> None:
    """Serialize a mesh to the plain-text format (see read_mesh)."""
    lines = []
    # reconstruct boundary-face lines: dirichlet faces plus periodic pairs
    bfaces = []
    for e, g in mesh.dirichlet:
        bfaces.append((_edge_pair(mesh.elems[e], g, mesh.dim), "dirichlet"))
    pid = 0
    for i in range(mesh.faces.n):
        eL, gL = mesh.faces.elem_l[i], mesh.faces.edge_l[i]
        eR, gR = mesh.faces.elem_r[i], mesh.faces.edge_r[i]
        pL = _edge_pair(mesh.elems[eL], gL, mesh.dim)
        pR = _edge_pair(mesh.elems[eR], gR, mesh.dim)
        if tuple(sorted(pL)) != tuple(sorted(pR)):  # periodic, not interior
            bfaces.append((pL, f"periodic:{pid}"))
            bfaces.append((pR, f"periodic:{pid}"))
            pid += 1
    lines.append(f"{mesh.dim} {mesh.n_nodes} {mesh.n_elems} {len(bfaces)}")
    for p in mesh.nodes:
        lines.append(" ".join(repr(float(v)) for v in p))
    for en in mesh.elems:
        lines.append(" ".join(str(int(v)) for v in en))
    for pair, tag in bfaces:
        lines.append(" ".join(str(v) for v in pair) + f" {tag}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path: str) -> Mesh:
    """Parse the plain-text mesh format.

    Header `dim n_nodes n_elems n_bfaces`, then node lines `x [y]`,
    element lines of 0-based CCW node indices, and boundary-face lines
    `node_a [node_b] tag` with tag `periodic:<pair_id>` or `dirichlet`.

    Raises:
        MeshFormatError: on malformed content, naming the line number.
    """
    with open(path) as fh:
        raw = fh.read().splitlines()

    def fail(lineno, msg):
        raise MeshFormatError(f"{path}:{lineno}: {msg}")

    if not raw:
        fail(1, "empty file")
    try:
        dim, n_nodes, n_elems, n_bf = (int(v) for v in raw[0].split())
    except Exception:
        fail(1, f"bad header {raw[0]!r}")
    if dim not in (1, 2):
        fail(1, f"unsupported dim {dim}")
    need = 1 + n_nodes + n_elems + n_bf
    if len(raw) < need:
        fail(len(raw), f"expected {need} lines, found {len(raw)}")

    nodes = np.zeros((n_nodes, dim))
    for i in range(n_nodes):
        ln = 1 + i
        parts = raw[ln].split()
        if len(parts) != dim:
            fail(ln + 1, f"expected {dim} coordinates, got {len(parts)}")
        try:
            nodes[i] = [float(v) for v in parts]
        except ValueError:
            fail(ln + 1, f"bad coordinate in {raw[ln]!r}")

    npc = 2 if dim == 1 else 4
    elems = np.zeros((n_elems, npc), dtype=int)
    for i in range(n_elems):
        ln = 1 + n_nodes + i
        parts = raw[ln].split()
        if len(parts) != npc:
            fail(ln + 1, f"expected {npc} node indices, got {len(parts)}")
        try:
            elems[i] = [int(v) for v in parts]
        except ValueError:
            fail(ln + 1, f"bad node index in {raw[ln]!r}")
        if np.any(elems[i] < 0) or np.any(elems[i] >= n_nodes):
            fail(ln + 1, "node index out of range")

    # boundary faces
    diri_keys = set()
    periodic_groups: dict[str, list] = {}
    nk = 1 if dim == 1 else 2
    for i in range(n_bf):
        ln = 1 + n_nodes + n_elems + i
        parts = raw[ln].split()
        if len(parts) != nk + 1:
            fail(ln + 1, f"expected {nk} node indices and a tag")
        try:
            ids = tuple(int(v) for v in parts[:nk])
        except ValueError:
            fail(ln + 1, f"bad node index in {raw[ln]!r}")
        tag = parts[nk]
        if tag == "dirichlet":
            diri_keys.add(tuple(sorted(ids)))
        elif tag.startswith("periodic:"):
            periodic_groups.setdefault(tag[len("periodic:"):], []).append(
                (ids, ln + 1))
        else:
            fail(ln + 1, f"unknown boundary tag {tag!r}")

    # locate (elem, edge) owning each tagged boundary edge
    owner = {}
    n_edges = 2 if dim == 1 else 4
    for e, en in enumerate(elems):
        for edge in range(n_edges):
            pair = _edge_pair(en, edge, dim)
            owner.setdefault(tuple(sorted(pair)), []).append((e, edge, pair))

    periodic_pairs = []
    for pid, group in periodic_groups.items():
        if len(group) != 2:
            fail(group[0][1], f"periodic pair {pid!r} has {len(group)} faces")
        (ids_a, ln_a), (ids_b, _) = group
        hits_a = owner.get(tuple(sorted(ids_a)))
        hits_b = owner.get(tuple(sorted(ids_b)))
        if not hits_a or not hits_b:
            fail(ln_a, f"periodic face nodes {ids_a} or {ids_b} not on any element")
        (ea, ga, pa), (eb, gb, pb) = hits_a[0], hits_b[0]
        if dim == 1:
            fp = False
        else:
            # orientation from the translation between the two faces
            t = nodes[list(pb)].mean(axis=0) - nodes[list(pa)].mean(axis=0)
            d_same = np.linalg.norm(nodes[pa[0]] + t - nodes[pb[0]])
            d_flip = np.linalg.norm(nodes[pa[0]] + t - nodes[pb[1]])
            fp = d_flip < d_same
        periodic_pairs.append(((ea, ga), (eb, gb), fp))

    faces, diri = _build_faces(dim, elems, periodic_pairs, diri_keys or None)
    return Mesh(dim=dim, nodes=nodes, elems=elems, faces=faces, dirichlet=diri,
                spec={"type": "file", "path": path})
