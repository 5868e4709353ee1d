"""Procedural vertex-colored test meshes with binary color patterns.

Builds a small retrieval benchmark in the spirit of patterned-object
datasets: a few base shapes crossed with a few binary patterns, where the
pattern (not the shape) defines the class.  Patterns are painted through a
parametric mapping whose coordinates are in model units, so one pattern
keeps its physical scale across shapes.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np

from .mesh_io import SurfaceMesh, write_ply

SHAPE_KINDS = ("plane_grid", "sphere", "cylinder", "torus", "bumpy_plane")
PATTERN_KINDS = ("stripes", "checker", "dots", "waves", "zigzag")


@dataclass(frozen=True)
class ShapeSpec:
    kind: str
    resolution: int = 10000   # target vertex count
    size: float = 2.0         # characteristic length, model units

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.resolution < 100:
            raise ValueError("resolution must be >= 100 vertices")


@dataclass(frozen=True)
class PatternSpec:
    kind: str
    scale: float = 0.4        # pattern period, model units
    phase: float = 0.0
    foreground: tuple = (0, 0, 0)
    background: tuple = (255, 255, 255)

    def __post_init__(self):
        if self.kind not in PATTERN_KINDS:
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        if self.scale <= 0:
            raise ValueError("pattern scale must be positive")


# ----------------------------------------------------------------------
# base shapes

def _grid_faces(nx, ny):
    """Triangulated regular grid: 2 (nx-1)(ny-1) triangles, fixed diagonal."""
    faces = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            b = a + 1
            c = a + nx
            d = c + 1
            faces.append([a, b, d])
            faces.append([a, d, c])
    return faces


def _wrap_grid_faces(n_u, n_v, wrap_v=False):
    """Grid faces with the u direction closed; optionally close v as well."""
    faces = []
    for j in range(n_v if wrap_v else n_v - 1):
        j1 = (j + 1) % n_v
        for i in range(n_u):
            i1 = (i + 1) % n_u
            a = j * n_u + i
            b = j * n_u + i1
            c = j1 * n_u + i
            d = j1 * n_u + i1
            faces.append([a, b, d])
            faces.append([a, d, c])
    return faces


def _white(n):
    return np.full((n, 3), 255, dtype=np.int64)


def _make_plane(res, size, height=None):
    n = max(2, int(round(np.sqrt(res))))
    xs = np.linspace(0.0, size, n)
    gx, gy = np.meshgrid(xs, xs)
    z = np.zeros_like(gx) if height is None else height(gx, gy)
    vertices = np.column_stack([gx.ravel(), gy.ravel(), z.ravel()])
    return SurfaceMesh(vertices, _white(len(vertices)), _grid_faces(n, n))


def _make_sphere(res, size):
    radius = size / 2.0
    n_th = max(4, int(round(np.sqrt(res / 2.0))))
    n_phi = 2 * n_th
    theta = np.linspace(0.0, np.pi, n_th)[1:-1]
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    ring_pts = np.column_stack([
        (radius * np.sin(tt) * np.cos(pp)).ravel(),
        (radius * np.sin(tt) * np.sin(pp)).ravel(),
        (radius * np.cos(tt)).ravel(),
    ])
    north = [[0.0, 0.0, radius]]
    south = [[0.0, 0.0, -radius]]
    vertices = np.vstack([north, ring_pts, south])

    faces = []
    for i in range(n_phi):                      # polar caps
        faces.append([0, 1 + i, 1 + (i + 1) % n_phi])
    base_last = 1 + (n_th - 3) * n_phi
    last = len(vertices) - 1
    for i in range(n_phi):
        faces.append([last, base_last + (i + 1) % n_phi, base_last + i])
    for j in range(n_th - 3):                   # latitude bands
        r0 = 1 + j * n_phi
        r1 = r0 + n_phi
        for i in range(n_phi):
            i1 = (i + 1) % n_phi
            faces.append([r0 + i, r1 + i, r1 + i1])
            faces.append([r0 + i, r1 + i1, r0 + i1])
    return SurfaceMesh(vertices, _white(len(vertices)), faces)


def _make_cylinder(res, size):
    radius = size / 4.0
    height = size
    ratio = 2.0 * np.pi * radius / height
    n_u = max(8, int(round(np.sqrt(res * ratio))))
    n_v = max(3, int(round(res / n_u)))
    theta = np.linspace(0.0, 2.0 * np.pi, n_u, endpoint=False)
    zs = np.linspace(-height / 2.0, height / 2.0, n_v)
    tt, zz = np.meshgrid(theta, zs, indexing="xy")
    side = np.column_stack([
        (radius * np.cos(tt)).ravel(),
        (radius * np.sin(tt)).ravel(),
        zz.ravel(),
    ])
    bottom_center = [[0.0, 0.0, -height / 2.0]]
    top_center = [[0.0, 0.0, height / 2.0]]
    vertices = np.vstack([side, bottom_center, top_center])

    faces = _wrap_grid_faces(n_u, n_v)
    bc = len(side)
    tc = bc + 1
    top0 = (n_v - 1) * n_u
    for i in range(n_u):                        # cap fans
        i1 = (i + 1) % n_u
        faces.append([bc, i1, i])
        faces.append([tc, top0 + i, top0 + i1])
    return SurfaceMesh(vertices, _white(len(vertices)), faces)


def _make_torus(res, size):
    major = size / 3.0
    minor = size / 9.0
    n_u = max(8, int(round(np.sqrt(res * major / minor))))
    n_v = max(8, int(round(res / n_u)))
    theta = np.linspace(0.0, 2.0 * np.pi, n_u, endpoint=False)
    phi = np.linspace(0.0, 2.0 * np.pi, n_v, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="xy")
    vertices = np.column_stack([
        ((major + minor * np.cos(pp)) * np.cos(tt)).ravel(),
        ((major + minor * np.cos(pp)) * np.sin(tt)).ravel(),
        (minor * np.sin(pp)).ravel(),
    ])
    faces = _wrap_grid_faces(n_u, n_v, wrap_v=True)
    return SurfaceMesh(vertices, _white(len(vertices)), faces)


def _make_bumpy_plane(res, size, seed):
    rng = np.random.default_rng(seed)
    n_bumps = 6
    centers = rng.uniform(0.0, size, (n_bumps, 2))
    amps = rng.uniform(-size / 12.0, size / 12.0, n_bumps)
    widths = rng.uniform(size / 6.0, size / 3.0, n_bumps)

    def height(gx, gy):
        z = np.zeros_like(gx)
        for (cx, cy), a, w in zip(centers, amps, widths):
            z += a * np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2.0 * w * w))
        return z

    return _make_plane(res, size, height)


def generate_base_mesh(spec, seed=0):
    """Generate a white triangle mesh near the target vertex count.

    Closed shapes (sphere, cylinder, torus) are watertight; planes have a
    boundary.  Generation is deterministic for a given (spec, seed); only
    ``bumpy_plane`` consumes random numbers.
    """
    if spec.kind == "plane_grid":
        return _make_plane(spec.resolution, spec.size)
    if spec.kind == "sphere":
        return _make_sphere(spec.resolution, spec.size)
    if spec.kind == "cylinder":
        return _make_cylinder(spec.resolution, spec.size)
    if spec.kind == "torus":
        return _make_torus(spec.resolution, spec.size)
    if spec.kind == "bumpy_plane":
        return _make_bumpy_plane(spec.resolution, spec.size, seed)
    raise ValueError(f"unknown shape kind {spec.kind!r}")


# ----------------------------------------------------------------------
# pattern painting

def param_coords(mesh, mapping):
    """Per-vertex parameter coordinates in model units.

    Returns (u, v, valid); vertices with a degenerate parameterization
    (points on the cylindrical axis) are flagged invalid and painted with
    the background color.
    """
    pts = mesh.vertices
    if mapping == "planar":
        return pts[:, 0].copy(), pts[:, 1].copy(), np.ones(len(pts), dtype=bool)
    if mapping == "spherical":
        center = pts.mean(axis=0)
        rel = pts - center
        r = np.linalg.norm(rel, axis=1)
        r_mean = float(r.mean())
        theta = np.arctan2(rel[:, 1], rel[:, 0])
        with np.errstate(invalid="ignore"):
            phi = np.arccos(np.clip(rel[:, 2] / np.maximum(r, 1e-300), -1.0, 1.0))
        valid = r > 1e-12 * max(r_mean, 1.0)
        return theta * r_mean, phi * r_mean, valid
    if mapping == "cylindrical":
        r_xy = np.hypot(pts[:, 0], pts[:, 1])
        rim = float(r_xy.max())
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        valid = r_xy > 1e-9 * max(rim, 1.0)
        return theta * rim, pts[:, 2].copy(), valid
    raise ValueError(f"unknown mapping {mapping!r}")


def _indicator(kind, u, v, scale, phase):
    su = (u + phase) / scale
    sv = (v + phase) / scale
    if kind == "stripes":
        return np.mod(su, 1.0) < 0.5
    if kind == "checker":
        return (np.floor(2.0 * su) + np.floor(2.0 * sv)) % 2 == 0
    if kind == "dots":
        du = np.mod(u + phase, scale) - scale / 2.0
        dv = np.mod(v + phase, scale) - scale / 2.0
        return du * du + dv * dv < (0.32 * scale) ** 2
    if kind == "waves":
        offset = 0.25 * np.sin(2.0 * np.pi * v / scale)
        return np.mod(su + offset, 1.0) < 0.5
    if kind == "zigzag":
        tri = 2.0 * np.abs(np.mod(v / scale, 1.0) - 0.5)
        return np.mod(su + 0.5 * tri, 1.0) < 0.5
    raise ValueError(f"unknown pattern kind {kind!r}")


def apply_pattern(mesh, pattern, mapping="planar"):
    """Color a mesh by a binary pattern evaluated in parameter coordinates.

    Returns a new mesh sharing geometry and connectivity; vertices where the
    pattern indicator holds take the foreground color, invalid-parameter
    vertices the background.
    """
    u, v, valid = param_coords(mesh, mapping)
    fg = _indicator(pattern.kind, u, v, pattern.scale, pattern.phase) & valid
    colors = np.where(
        fg[:, None],
        np.asarray(pattern.foreground, dtype=np.int64),
        np.asarray(pattern.background, dtype=np.int64),
    )
    return SurfaceMesh(mesh.vertices.copy(), colors, [list(f) for f in mesh.faces])


def subdivide_with_color(mesh, steps=1):
    """Midpoint 1-to-4 triangle subdivision with color interpolation.

    Geometry stays on the original surface (flat splits); each new edge
    midpoint takes the channelwise mean of its endpoints' colors, rounded
    to integers.  Original vertices keep position and color unchanged.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    for _ in range(steps):
        if any(len(f) != 3 for f in mesh.faces):
            raise ValueError("subdivision requires a triangle mesh")
        vertices = [tuple(p) for p in mesh.vertices]
        colors = [tuple(c) for c in mesh.colors]
        midpoint = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            m = midpoint.get(key)
            if m is None:
                m = len(vertices)
                midpoint[key] = m
                pa, pb = mesh.vertices[a], mesh.vertices[b]
                vertices.append(tuple((pa + pb) / 2.0))
                ca, cb = mesh.colors[a], mesh.colors[b]
                colors.append(tuple(int(x) for x in np.rint((ca + cb) / 2.0)))
            return m

        faces = []
        for a, b, c in mesh.faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            faces.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]])
        mesh = SurfaceMesh(np.asarray(vertices), np.asarray(colors), faces)
    return mesh


# ----------------------------------------------------------------------
# benchmark assembly

def default_shapes(resolution=10000, size=2.0):
    """The five stock shapes at a common scale."""
    return [ShapeSpec(kind, resolution, size) for kind in SHAPE_KINDS]


def default_patterns(scale=0.4, count=4):
    """The first ``count`` stock patterns at a common period."""
    return [PatternSpec(kind, scale) for kind in PATTERN_KINDS[:count]]


def _mapping_for(shape_kind):
    return {
        "plane_grid": "planar",
        "bumpy_plane": "planar",
        "sphere": "spherical",
        "cylinder": "cylindrical",
        "torus": "cylindrical",
    }[shape_kind]


def build_cpp_like_dataset(shapes, patterns, out_dir, seed=0):
    """One colored mesh per (shape, pattern) pair plus a manifest CSV.

    The class of a model is its pattern, mirroring pattern-retrieval
    benchmarks where the same decoration appears on many supports.  Returns
    the manifest rows as (file, shape id, pattern class) tuples.
    """
    if len(shapes) < 2 or len(patterns) < 2:
        raise ValueError("need at least two shapes and two patterns")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for si, shape in enumerate(shapes):
        base = generate_base_mesh(shape, seed + si)
        mapping = _mapping_for(shape.kind)
        for pi, pattern in enumerate(patterns):
            mesh = apply_pattern(base, pattern, mapping)
            shape_id = f"s{si:02d}_{shape.kind}"
            pattern_id = f"p{pi:02d}_{pattern.kind}"
            fname = f"{shape_id}__{pattern_id}.ply"
            write_ply(mesh, os.path.join(out_dir, fname))
            rows.append((fname, shape_id, pattern_id))
    with open(os.path.join(out_dir, "manifest.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file", "shape", "pattern_class"])
        writer.writerows(rows)
    return rows


def load_manifest(path):
    """Read a manifest CSV back as (file, shape, pattern_class) rows."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["file", "shape", "pattern_class"]:
            raise ValueError(f"{path}: not a dataset manifest")
        return [tuple(row[:3]) for row in reader]
