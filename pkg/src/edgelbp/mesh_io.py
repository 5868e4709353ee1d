"""Vertex-colored surface tessellations: loading, validation, adjacency.

Meshes are polygonal (triangles, quads or larger convex polygons) with one
RGB color per vertex.  On construction the full edge/face adjacency is built
and validated; meshes with non-manifold edges (more than two incident faces)
are rejected because the ring walk relies on at most two faces per edge.
"""

import struct
from dataclasses import dataclass, field

import numpy as np


class MeshLoadError(Exception):
    """Raised when a mesh file cannot be parsed or fails validation."""


# CIE Lab constants, D65 white point, normalized Y_n = 1.
_LAB_DELTA = 6.0 / 29.0


class SurfaceMesh:
    """A vertex-colored polygonal mesh with full edge adjacency.

    Parameters
    ----------
    vertices : (V, 3) float array
        Vertex positions in model units.
    colors : (V, 3) int array
        Per-vertex RGB, each channel in 0..255.
    faces : sequence of index lists
        Each face is a list of >= 3 vertex indices forming a simple convex
        polygon, listed in cyclic order.

    Attributes
    ----------
    edges : (E, 2) int array
        Unique undirected edges as (min, max) vertex index pairs.
    edge_faces : list of lists
        For each edge, the indices of its 1 or 2 incident faces.
    vertex_edges : list of lists
        For each vertex, the indices of its incident edges.
    face_edges : list of lists
        For each face, the edge index of each boundary segment, aligned so
        ``face_edges[f][i]`` joins ``faces[f][i]`` and ``faces[f][(i+1) % k]``.
    boundary_edge : (E,) bool array
        True for edges with exactly one incident face.
    boundary_vertex : (V,) bool array
        True for vertices incident to at least one boundary edge.
    """

    def __init__(self, vertices, colors, faces):
        self.vertices = np.asarray(vertices, dtype=np.float64)
        self.colors = np.asarray(colors, dtype=np.int64)
        self.faces = [list(map(int, f)) for f in faces]

        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshLoadError("vertices must be an (V, 3) array")
        if len(self.vertices) == 0:
            raise MeshLoadError("empty mesh: no vertices")
        if self.colors.shape != self.vertices.shape:
            raise MeshLoadError("colors must match vertices one-to-one")
        if self.colors.min(initial=0) < 0 or self.colors.max(initial=0) > 255:
            raise MeshLoadError("color channels must lie in 0..255")

        self._build_adjacency()

    # ------------------------------------------------------------------
    # construction helpers

    def _build_adjacency(self):
        nv = len(self.vertices)
        edge_ids = {}
        edges = []
        edge_faces = []
        face_edges = []

        for fi, face in enumerate(self.faces):
            k = len(face)
            if k < 3:
                raise MeshLoadError(f"face {fi} has fewer than 3 vertices")
            if len(set(face)) != k:
                raise MeshLoadError(f"face {fi} repeats a vertex")
            fedges = []
            for i in range(k):
                a, b = face[i], face[(i + 1) % k]
                if not (0 <= a < nv and 0 <= b < nv):
                    raise MeshLoadError(
                        f"face {fi} references vertex {max(a, b)} "
                        f"but the mesh has {nv} vertices"
                    )
                key = (a, b) if a < b else (b, a)
                eid = edge_ids.get(key)
                if eid is None:
                    eid = len(edges)
                    edge_ids[key] = eid
                    edges.append(key)
                    edge_faces.append([])
                edge_faces[eid].append(fi)
                if len(edge_faces[eid]) > 2:
                    raise MeshLoadError(f"non-manifold edge {eid} {key}")
                fedges.append(eid)
            face_edges.append(fedges)

        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.edge_faces = edge_faces
        self.face_edges = face_edges

        if len(self.edges):
            lengths = np.linalg.norm(
                self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]],
                axis=1,
            )
            if np.any(lengths == 0.0):
                eid = int(np.argmin(lengths))
                raise MeshLoadError(f"zero-length edge {eid}")

        vertex_edges = [[] for _ in range(nv)]
        for eid, (a, b) in enumerate(self.edges):
            vertex_edges[a].append(eid)
            vertex_edges[b].append(eid)
        self.vertex_edges = vertex_edges

        self.boundary_edge = np.fromiter(
            (len(fs) == 1 for fs in edge_faces), dtype=bool, count=len(edge_faces)
        )
        self.boundary_vertex = np.zeros(nv, dtype=bool)
        for eid in np.flatnonzero(self.boundary_edge):
            a, b = self.edges[eid]
            self.boundary_vertex[a] = True
            self.boundary_vertex[b] = True

        vertex_faces = [[] for _ in range(nv)]
        for fi, face in enumerate(self.faces):
            for v in face:
                vertex_faces[v].append(fi)
        self.vertex_faces = vertex_faces

    # ------------------------------------------------------------------

    @property
    def vertex_count(self):
        return len(self.vertices)

    @property
    def edge_count(self):
        return len(self.edges)

    @property
    def face_count(self):
        return len(self.faces)

    def face_normal(self, f):
        """Newell normal of face ``f`` (length equals twice the face area)."""
        face = self.faces[f]
        pts = self.vertices[face]
        n = np.zeros(3)
        for i in range(len(face)):
            p, q = pts[i], pts[(i + 1) % len(face)]
            n[0] += (p[1] - q[1]) * (p[2] + q[2])
            n[1] += (p[2] - q[2]) * (p[0] + q[0])
            n[2] += (p[0] - q[0]) * (p[1] + q[1])
        return n

    def vertex_normal(self, v):
        """Area-weighted unit normal at vertex ``v``.

        Face contributions are weighted by face area (Newell vectors carry the
        area weight already); degenerate faces contribute nothing.

        Raises
        ------
        ValueError
            If ``v`` has no incident face or all incident faces are degenerate.
        """
        faces = self.vertex_faces[v]
        if not faces:
            raise ValueError(f"vertex {v} has no incident face")
        n = np.zeros(3)
        for f in faces:
            n += self.face_normal(f)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            raise ValueError(f"vertex {v}: degenerate normal")
        return n / norm

    def __repr__(self):
        return (
            f"SurfaceMesh({self.vertex_count} vertices, "
            f"{self.edge_count} edges, {self.face_count} faces)"
        )


@dataclass
class ScalarField:
    """Per-vertex scalar derived from vertex colors.

    ``values`` are the mode's raw values raised to ``exponent``:
    grayscale = 0.21 R + 0.72 G + 0.07 B in [0, 255]; cielab_l is the CIE
    L* channel in [0, 100] (sRGB decoding, D65 white point).
    """

    values: np.ndarray
    mode: str = "cielab_l"
    exponent: float = 1.0

    def range_max(self):
        """Upper bound of the mode's raw range, raised to the exponent."""
        top = 100.0 if self.mode == "cielab_l" else 255.0
        return top**self.exponent


def srgb_to_lab_l(rgb):
    """CIE L* for an array of sRGB colors with channels in 0..255.

    Uses the standard sRGB piecewise gamma decoding and the D65 white point.
    Only the luminance row of the RGB -> XYZ matrix is needed for L*.
    """
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    y = lin[..., 0] * 0.2126 + lin[..., 1] * 0.7152 + lin[..., 2] * 0.0722
    fy = np.where(
        y > _LAB_DELTA**3,
        np.cbrt(y),
        y / (3.0 * _LAB_DELTA**2) + 4.0 / 29.0,
    )
    return 116.0 * fy - 16.0


def compute_scalar_field(mesh, mode="cielab_l", exponent=1.0):
    """Derive the per-vertex scalar field h from the mesh colors.

    Parameters
    ----------
    mesh : SurfaceMesh
    mode : {"cielab_l", "grayscale"}
    exponent : float
        Positive power applied to the raw values.

    Returns
    -------
    ScalarField
    """
    if exponent <= 0:
        raise ValueError("exponent must be positive")
    if mode == "grayscale":
        c = mesh.colors.astype(np.float64)
        values = 0.21 * c[:, 0] + 0.72 * c[:, 1] + 0.07 * c[:, 2]
    elif mode == "cielab_l":
        values = srgb_to_lab_l(mesh.colors)
    else:
        raise ValueError(f"unknown scalar field mode {mode!r}")
    if exponent != 1.0:
        values = values**exponent
    return ScalarField(values=values, mode=mode, exponent=float(exponent))


# ----------------------------------------------------------------------
# file formats

_PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def load_mesh(path, fmt=None):
    """Load a vertex-colored mesh from a PLY or OBJ file.

    Parameters
    ----------
    path : str or Path
    fmt : {"ply", "obj"}, optional
        Inferred from the file extension when omitted.

    Returns
    -------
    SurfaceMesh

    Raises
    ------
    MeshLoadError
        On parse failure, missing vertex colors, bad indices, or
        non-manifold connectivity.
    """
    path = str(path)
    if fmt is None:
        fmt = path.rsplit(".", 1)[-1].lower()
    if fmt == "ply":
        return _load_ply(path)
    if fmt == "obj":
        return _load_obj(path)
    raise MeshLoadError(f"unsupported mesh format {fmt!r}")


def _load_ply(path):
    with open(path, "rb") as fh:
        line = fh.readline().strip()
        if line != b"ply":
            raise MeshLoadError(f"{path}: not a PLY file")
        fmt = None
        elements = []  # (name, count, [(prop_name, dtype) or ("list", idx_t, cnt_t, name)])
        while True:
            line = fh.readline()
            if not line:
                raise MeshLoadError(f"{path}: unterminated PLY header")
            tokens = line.decode("ascii", "replace").split()
            if not tokens or tokens[0] == "comment":
                continue
            if tokens[0] == "format":
                fmt = tokens[1]
            elif tokens[0] == "element":
                elements.append((tokens[1], int(tokens[2]), []))
            elif tokens[0] == "property":
                if not elements:
                    raise MeshLoadError(f"{path}: property before element")
                if tokens[1] == "list":
                    elements[-1][2].append(("list", tokens[2], tokens[3], tokens[4]))
                else:
                    elements[-1][2].append((tokens[2], tokens[1]))
            elif tokens[0] == "end_header":
                break
        if fmt not in ("ascii", "binary_little_endian"):
            raise MeshLoadError(f"{path}: unsupported PLY format {fmt!r}")

        vertices = colors = None
        faces = []
        for name, count, props in elements:
            if name == "vertex":
                vertices, colors = _read_ply_vertices(fh, fmt, count, props, path)
            elif name == "face":
                faces = _read_ply_faces(fh, fmt, count, props, path)
            else:
                _skip_ply_element(fh, fmt, count, props, path)

    if vertices is None:
        raise MeshLoadError(f"{path}: no vertex element")
    if colors is None:
        raise MeshLoadError(f"{path}: vertex colors missing (red/green/blue)")
    return SurfaceMesh(vertices, colors, faces)


def _read_ply_vertices(fh, fmt, count, props, path):
    names = [p[0] for p in props]
    for req in ("x", "y", "z"):
        if req not in names:
            raise MeshLoadError(f"{path}: vertex property {req!r} missing")
    has_color = all(c in names for c in ("red", "green", "blue"))

    if any(p[0] == "list" for p in props):
        raise MeshLoadError(f"{path}: list property on vertex element")

    if fmt == "ascii":
        rows = []
        for _ in range(count):
            line = fh.readline()
            if not line:
                raise MeshLoadError(f"{path}: truncated vertex data")
            rows.append(line.split())
        data = np.asarray(rows, dtype=np.float64)
        if data.shape[1] != len(names):
            raise MeshLoadError(f"{path}: vertex row width mismatch")
        cols = {n: data[:, i] for i, n in enumerate(names)}
    else:
        dtype = np.dtype([(n, "<" + _PLY_DTYPES[t]) for n, t in props])
        raw = fh.read(dtype.itemsize * count)
        if len(raw) < dtype.itemsize * count:
            raise MeshLoadError(f"{path}: truncated vertex data")
        rec = np.frombuffer(raw, dtype=dtype, count=count)
        cols = {n: rec[n].astype(np.float64) for n in names}

    vertices = np.column_stack([cols["x"], cols["y"], cols["z"]])
    if not has_color:
        return vertices, None
    colors = np.column_stack([cols["red"], cols["green"], cols["blue"]])
    return vertices, np.rint(colors).astype(np.int64)


def _read_ply_faces(fh, fmt, count, props, path):
    faces = []
    if fmt == "ascii":
        for _ in range(count):
            line = fh.readline()
            if not line:
                raise MeshLoadError(f"{path}: truncated face data")
            tokens = line.split()
            n = int(tokens[0])
            faces.append([int(t) for t in tokens[1 : 1 + n]])
        return faces
    # binary: faces may be preceded/followed by other scalar properties,
    # but the common layout is a single list property
    for _ in range(count):
        for p in props:
            if p[0] == "list":
                cnt_t = np.dtype("<" + _PLY_DTYPES[p[1]])
                idx_t = np.dtype("<" + _PLY_DTYPES[p[2]])
                n = int(np.frombuffer(fh.read(cnt_t.itemsize), dtype=cnt_t)[0])
                idx = np.frombuffer(fh.read(idx_t.itemsize * n), dtype=idx_t, count=n)
                faces.append([int(i) for i in idx])
            else:
                fh.read(np.dtype("<" + _PLY_DTYPES[p[1]]).itemsize)
    return faces


def _skip_ply_element(fh, fmt, count, props, path):
    if fmt == "ascii":
        for _ in range(count):
            fh.readline()
        return
    for _ in range(count):
        for p in props:
            if p[0] == "list":
                cnt_t = np.dtype("<" + _PLY_DTYPES[p[1]])
                idx_t = np.dtype("<" + _PLY_DTYPES[p[2]])
                n = int(np.frombuffer(fh.read(cnt_t.itemsize), dtype=cnt_t)[0])
                fh.read(idx_t.itemsize * n)
            else:
                fh.read(np.dtype("<" + _PLY_DTYPES[p[1]]).itemsize)


def _load_obj(path):
    vertices = []
    colors = []
    faces = []
    with open(path, "r") as fh:
        for ln, line in enumerate(fh, 1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            if tokens[0] == "v":
                if len(tokens) not in (4, 7):
                    raise MeshLoadError(f"{path}:{ln}: expected 'v x y z [r g b]'")
                vertices.append([float(t) for t in tokens[1:4]])
                if len(tokens) == 7:
                    rgb = [float(t) for t in tokens[4:7]]
                    colors.append([int(round(c * 255.0)) for c in rgb])
                else:
                    colors.append(None)
            elif tokens[0] == "f":
                idx = []
                for t in tokens[1:]:
                    # tolerate v/vt/vn references; only the vertex index is used
                    idx.append(int(t.split("/")[0]) - 1)
                faces.append(idx)
    if not vertices:
        raise MeshLoadError(f"{path}: no vertices")
    if any(c is None for c in colors):
        raise MeshLoadError(f"{path}: vertex colors missing on some 'v' lines")
    return SurfaceMesh(vertices, colors, faces)


def write_ply(mesh, path):
    """Write a mesh as ascii PLY with uchar red/green/blue vertex colors.

    Output is byte-deterministic: coordinates use a fixed '%.9g' format.
    """
    with open(path, "w", newline="\n") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {mesh.vertex_count}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        fh.write(f"element face {mesh.face_count}\n")
        fh.write("property list uchar int vertex_indices\n")
        fh.write("end_header\n")
        for (x, y, z), (r, g, b) in zip(mesh.vertices, mesh.colors):
            fh.write("%.9g %.9g %.9g %d %d %d\n" % (x, y, z, r, g, b))
        for face in mesh.faces:
            fh.write(" ".join([str(len(face))] + [str(i) for i in face]) + "\n")
