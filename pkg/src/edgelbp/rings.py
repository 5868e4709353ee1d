"""Concentric sphere-edge intersection rings around mesh vertices.

A ring of radius R around a vertex v is the closed polyline through the
points where mesh edges cross the sphere of radius R centered at v,
restricted to the connected surface region that contains v.  Rings for
several increasing radii are extracted in a single outward region growth;
each ring is oriented counter-clockwise around the vertex normal, anchored
at a deterministic starting point, and resampled to a fixed number of
equidistant points.

A vertex is admissible when every requested radius yields exactly one
closed curve and the grown region never touches the surface boundary;
otherwise extraction returns a verdict with a reason code instead of rings.

The per-vertex walk is deliberately written in plain scalar Python over
flattened mesh arrays: regions are tiny (tens of vertices), where numpy
per-call overhead costs more than the arithmetic itself.
"""

from dataclasses import dataclass
from math import sqrt
from typing import Optional

import numpy as np

# Vertices whose distance from the sphere center equals the radius within
# this relative tolerance count as inside, so spheres passing exactly
# through a vertex are handled deterministically.
_ON_SPHERE_RTOL = 1e-12
# Segment parameters this close to an endpoint snap onto it, which keeps
# interpolated h values bit-stable under rigid motions of the mesh.
_PARAM_SNAP = 1e-9
# Absolute tolerance for ties when picking the maximal-h starting point.
_H_TIE_TOL = 1e-9

REASON_BOUNDARY = "boundary contact"
REASON_MULTIPLE = "multiple curves"
REASON_OPEN = "open curve"
REASON_EMPTY = "empty ring"


@dataclass
class RingCurve:
    """Closed polyline of sphere-edge crossing points around one vertex."""

    points: np.ndarray        # (k, 3) ordered crossing points
    h_values: np.ndarray      # (k,) scalar field interpolated at each point
    source_edges: np.ndarray  # (k,) edge index that produced each point
    closed: bool = True

    def __len__(self):
        return len(self.points)


@dataclass
class RingSamples:
    """Equidistant resampling of a ring polyline."""

    samples: np.ndarray      # (P, 3)
    h_samples: np.ndarray    # (P,)
    start_point: np.ndarray  # (3,) anchor the resampling started from


@dataclass
class VertexRingSet:
    """All rings around one vertex, or a non-admissibility verdict."""

    center: int
    radii: list
    rings: list          # N_r RingSamples when admissible, else []
    admissible: bool
    reason: Optional[str] = None
    curves: list = None  # oriented RingCurve per radius, for diagnostics
    starts: list = None  # starting point index into each oriented curve


def radii_schedule(r_max, n_rings):
    """Uniformly spaced ring radii ending exactly at ``r_max``.

    >>> radii_schedule(0.5, 5)
    [0.1, 0.2, 0.3, 0.4, 0.5]
    """
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    if n_rings < 1:
        raise ValueError("need at least one ring")
    return [r_max * i / n_rings for i in range(1, n_rings)] + [r_max]


def edge_sphere_intersection(a, b, center, radius):
    """Crossing of segment [a, b] with the sphere (center, radius).

    Returns ``(point, t)`` with ``t`` the segment parameter measured from
    ``a``, or ``None`` when the segment lies entirely inside the sphere.
    Endpoints within 1e-12 relative of the radius count as inside.

    Raises
    ------
    ValueError
        If both endpoints are outside: the ring walk only ever probes edges
        reached from inside, so this signals corrupt adjacency.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    limit = radius * (1.0 + _ON_SPHERE_RTOL)
    da = np.linalg.norm(a - center)
    db = np.linalg.norm(b - center)
    a_in, b_in = da <= limit, db <= limit
    if a_in and b_in:
        return None
    if not a_in and not b_in:
        raise ValueError("both segment endpoints lie outside the sphere")
    d = b - a
    rel = a - center
    qa = float(d @ d)
    qb = 2.0 * float(rel @ d)
    qc = float(rel @ rel) - radius * radius
    disc = qb * qb - 4.0 * qa * qc
    disc = sqrt(disc) if disc > 0.0 else 0.0
    # outward crossing is the larger root when a is inside, else the smaller
    t = (-qb + disc) / (2.0 * qa) if a_in else (-qb - disc) / (2.0 * qa)
    if t < _PARAM_SNAP:
        t = 0.0
    elif t > 1.0 - _PARAM_SNAP:
        t = 1.0
    return a + t * d, t


def orient_ring(curve, normal, center):
    """Order the curve counter-clockwise around ``normal`` as seen from outside.

    The signed area of the polyline projected on the plane through ``center``
    with the given normal decides the orientation; a negative area reverses
    the point order.
    """
    pts = curve.points - np.asarray(center, dtype=np.float64)
    nxt = np.roll(pts, -1, axis=0)
    area = 0.5 * float(np.cross(pts, nxt).sum(axis=0) @ np.asarray(normal))
    radius_sq = float(np.max(np.sum(pts * pts, axis=1)))
    if abs(area) < 1e-12 * radius_sq:
        raise ValueError("degenerate ring: projected area is numerically zero")
    if area >= 0.0:
        return curve
    return RingCurve(
        points=curve.points[::-1].copy(),
        h_values=curve.h_values[::-1].copy(),
        source_edges=curve.source_edges[::-1].copy(),
        closed=curve.closed,
    )


def select_start_point(curve, h_tol=_H_TIE_TOL):
    """Index of the ring point with maximal h.

    Points within ``h_tol`` (absolute) of the maximum tie; among those the
    point with the largest summed Euclidean distance to all other ring
    points wins, and any remaining tie resolves to the smallest index.
    """
    h = curve.h_values
    candidates = np.flatnonzero(h >= h.max() - h_tol)
    if len(candidates) == 1:
        return int(candidates[0])
    pts = curve.points
    spread = np.array(
        [np.linalg.norm(pts - pts[c], axis=1).sum() for c in candidates]
    )
    return int(candidates[np.argmax(spread)])


def align_inner_start(curve, anchor):
    """Index of the curve point closest to ``anchor``; ties pick the smallest."""
    d = np.linalg.norm(curve.points - np.asarray(anchor), axis=1)
    return int(np.argmin(d))


def resample_ring(curve, n_samples, start=0):
    """Resample a closed ring into ``n_samples`` arc-length-equidistant points.

    Sample 0 sits exactly on the curve point ``start``; sample j sits at arc
    length ``j * L / n_samples`` along the oriented polyline of total length
    L.  h is interpolated linearly within each polyline segment.
    """
    if n_samples < 4:
        raise ValueError("need at least 4 samples per ring")
    k = len(curve.points)
    order = np.concatenate([np.arange(start, k), np.arange(0, start)])
    pts = curve.points[order]
    h = curve.h_values[order]
    loop = np.vstack([pts, pts[:1]])
    h_loop = np.concatenate([h, h[:1]])
    seg = np.linalg.norm(np.diff(loop, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    extent = float(np.max(np.linalg.norm(curve.points - curve.points.mean(axis=0), axis=1)))
    if total < 1e-9 * max(extent, 1e-300):
        raise ValueError("degenerate ring: zero polyline length")

    target = np.arange(n_samples) * (total / n_samples)
    idx = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, k - 1)
    seg_len = seg[idx]
    with np.errstate(invalid="ignore"):
        u = np.where(seg_len > 0.0, (target - cum[idx]) / seg_len, 0.0)
    u[u < _PARAM_SNAP] = 0.0
    u[u > 1.0 - _PARAM_SNAP] = 1.0
    samples = loop[idx] + u[:, None] * (loop[idx + 1] - loop[idx])
    h_samples = h_loop[idx] + u * (h_loop[idx + 1] - h_loop[idx])
    return RingSamples(samples=samples, h_samples=h_samples, start_point=pts[0].copy())


class RingExtractor:
    """Extracts ring sets for many vertices of one mesh.

    Flattens the mesh into plain Python structures once so that the
    per-vertex region growth runs without numpy overhead.  Instances are
    read-only after use and safe to share across worker processes.
    """

    def __init__(self, mesh, field):
        self.mesh = mesh
        self.field = field
        v = mesh.vertices
        self._xs = v[:, 0].tolist()
        self._ys = v[:, 1].tolist()
        self._zs = v[:, 2].tolist()
        self._h = [float(x) for x in field.values]
        self._vertex_edges = mesh.vertex_edges
        # neighbor vertex aligned with each entry of vertex_edges
        edges = mesh.edges
        self._vertex_nbrs = [
            [int(edges[e, 1]) if edges[e, 0] == u else int(edges[e, 0])
             for e in mesh.vertex_edges[u]]
            for u in range(len(v))
        ]
        self._edge_faces = mesh.edge_faces
        self._face_vertices = mesh.faces
        self._face_edges = mesh.face_edges
        self._boundary_vertex = mesh.boundary_vertex.tolist()

        normals = _all_vertex_normals(mesh)
        self._nx = normals[:, 0].tolist()
        self._ny = normals[:, 1].tolist()
        self._nz = normals[:, 2].tolist()

        nv, ne, nf = len(v), len(edges), len(mesh.faces)
        self._in_stamp = [0] * nv
        self._dist_stamp = [0] * nv
        self._dist = [0.0] * nv
        self._cross_stamp = [0] * ne
        self._cross_idx = [0] * ne
        self._face_stamp = [0] * nf
        self._tick = 0

    # ------------------------------------------------------------------

    def extract(self, center, radii, n_samples=None):
        """Grow outward once and harvest one ring per radius.

        Parameters
        ----------
        center : int
            Vertex index.
        radii : list of float
            Strictly increasing sphere radii.
        n_samples : int, optional
            When given, every ring is resampled to this many equidistant
            points and the result carries :class:`RingSamples`.

        Returns
        -------
        VertexRingSet
        """
        levels, reason = self._walk(center, radii)
        if reason is not None:
            return VertexRingSet(center, list(radii), [], False, reason)
        starts = self._orient_and_anchor(center, radii, levels)

        curves = [
            RingCurve(
                points=np.column_stack([px, py, pz]),
                h_values=np.asarray(ph),
                source_edges=np.asarray(pe, dtype=np.int64),
            )
            for px, py, pz, ph, pe in levels
        ]
        rings = []
        if n_samples is not None:
            rings = [
                resample_ring(curve, n_samples, start)
                for curve, start in zip(curves, starts)
            ]
        return VertexRingSet(
            center, list(radii), rings, True, None, curves=curves, starts=starts
        )

    def values(self, center, radii, n_samples, h_center):
        """edgeLBP value per ring for one vertex, or ``(None, reason)``.

        Equivalent to extracting, resampling and counting samples above
        ``h_center``, without building any intermediate objects.
        """
        levels, reason = self._walk(center, radii)
        if reason is not None:
            return None, reason
        starts = self._orient_and_anchor(center, radii, levels)

        counts = []
        for (px, py, pz, ph, _), start in zip(levels, starts):
            k = len(px)
            cum = [0.0] * (k + 1)
            total = 0.0
            i = start
            for n in range(k):
                j = i + 1 - k if i + 1 >= k else i + 1
                dx = px[j] - px[i]
                dy = py[j] - py[i]
                dz = pz[j] - pz[i]
                total += sqrt(dx * dx + dy * dy + dz * dz)
                cum[n + 1] = total
                i = j
            if total < 1e-9 * radii[0]:
                raise ValueError("degenerate ring: zero polyline length")
            step = total / n_samples
            count = 0
            seg = 0
            for s in range(n_samples):
                target = s * step
                while seg < k - 1 and cum[seg + 1] <= target:
                    seg += 1
                width = cum[seg + 1] - cum[seg]
                u = (target - cum[seg]) / width if width > 0.0 else 0.0
                if u < _PARAM_SNAP:
                    u = 0.0
                elif u > 1.0 - _PARAM_SNAP:
                    u = 1.0
                ia = start + seg
                if ia >= k:
                    ia -= k
                ib = ia + 1
                if ib >= k:
                    ib -= k
                hs = ph[ia] + u * (ph[ib] - ph[ia])
                if hs > h_center:
                    count += 1
            counts.append(count)
        return counts, None

    # ------------------------------------------------------------------

    def _walk(self, center, radii):
        """Region-grow once over increasing radii; harvest a cycle per level.

        Returns ``(levels, None)`` with one ``(px, py, pz, ph, pe)`` tuple
        per radius (crossing coordinates, interpolated h, source edges, in
        cycle order), or ``(None, reason)`` on a non-admissibility verdict.
        """
        for a, b in zip(radii, radii[1:]):
            if b <= a:
                raise ValueError("radii must be strictly increasing")
        boundary = self._boundary_vertex
        if boundary[center]:
            return None, REASON_BOUNDARY

        xs, ys, zs = self._xs, self._ys, self._zs
        vertex_edges = self._vertex_edges
        vertex_nbrs = self._vertex_nbrs
        in_stamp = self._in_stamp
        dist_stamp = self._dist_stamp
        dist = self._dist
        cx, cy, cz = xs[center], ys[center], zs[center]

        self._tick += 1
        tick = self._tick
        in_stamp[center] = tick
        dist_stamp[center] = tick
        dist[center] = 0.0

        frontier = []  # (edge, inside vertex, outside vertex)
        queue = [center]
        levels = []

        for r in radii:
            limit = r * (1.0 + _ON_SPHERE_RTOL)

            if frontier:
                kept = []
                for entry in frontier:
                    w = entry[2]
                    if in_stamp[w] == tick:
                        continue
                    if dist[w] <= limit:
                        in_stamp[w] = tick
                        queue.append(w)
                        if boundary[w]:
                            return None, REASON_BOUNDARY
                    else:
                        kept.append(entry)
                frontier = kept

            qi = 0
            while qi < len(queue):
                u = queue[qi]
                qi += 1
                nbrs = vertex_nbrs[u]
                uedges = vertex_edges[u]
                for n in range(len(uedges)):
                    w = nbrs[n]
                    if in_stamp[w] == tick:
                        continue
                    if dist_stamp[w] == tick:
                        dw = dist[w]
                    else:
                        dx = xs[w] - cx
                        dy = ys[w] - cy
                        dz = zs[w] - cz
                        dw = sqrt(dx * dx + dy * dy + dz * dz)
                        dist[w] = dw
                        dist_stamp[w] = tick
                    if dw <= limit:
                        in_stamp[w] = tick
                        queue.append(w)
                        if boundary[w]:
                            return None, REASON_BOUNDARY
                    else:
                        frontier.append((uedges[n], u, w))
            queue = []

            if not frontier:
                return None, REASON_EMPTY
            level = self._assemble(frontier, r, cx, cy, cz, tick)
            if isinstance(level, str):
                return None, level
            levels.append(level)
        return levels, None

    def _assemble(self, frontier, radius, cx, cy, cz, tick):
        """Chain one level's crossing points into a closed cycle.

        Returns ``(px, py, pz, ph, pe)`` in cycle order, or a reason code
        when the crossings do not form a single closed curve.
        """
        xs, ys, zs = self._xs, self._ys, self._zs
        h = self._h
        r_sq = radius * radius
        cross_stamp = self._cross_stamp
        cross_idx = self._cross_idx
        self._tick += 1
        ctick = self._tick

        n = len(frontier)
        px = [0.0] * n
        py = [0.0] * n
        pz = [0.0] * n
        ph = [0.0] * n
        pe = [0] * n
        for i in range(n):
            e, a, b = frontier[i]
            ax, ay, az = xs[a], ys[a], zs[a]
            dx = xs[b] - ax
            dy = ys[b] - ay
            dz = zs[b] - az
            rx = ax - cx
            ry = ay - cy
            rz = az - cz
            qa = dx * dx + dy * dy + dz * dz
            qb = 2.0 * (rx * dx + ry * dy + rz * dz)
            qc = rx * rx + ry * ry + rz * rz - r_sq
            disc = qb * qb - 4.0 * qa * qc
            t = (-qb + sqrt(disc)) / (2.0 * qa) if disc > 0.0 else -qb / (2.0 * qa)
            if t < _PARAM_SNAP:
                t = 0.0
            elif t > 1.0 - _PARAM_SNAP:
                t = 1.0
            px[i] = ax + t * dx
            py[i] = ay + t * dy
            pz[i] = az + t * dz
            ha = h[a]
            ph[i] = ha + t * (h[b] - ha)
            pe[i] = e
            cross_stamp[e] = ctick
            cross_idx[e] = i

        # pair crossings within each crossed face: walking the face cycle, an
        # exit crossing (in -> out) chains to the next entering one
        in_stamp = self._in_stamp
        face_stamp = self._face_stamp
        face_edges = self._face_edges
        face_vertices = self._face_vertices
        edge_faces = self._edge_faces
        nbr_a = [-1] * n
        nbr_b = [-1] * n
        for e, _, _ in frontier:
            for f in edge_faces[e]:
                if face_stamp[f] == ctick:
                    continue
                face_stamp[f] = ctick
                cyc_edges = face_edges[f]
                cyc_verts = face_vertices[f]
                hits = []
                for i in range(len(cyc_edges)):
                    eid = cyc_edges[i]
                    if cross_stamp[eid] == ctick:
                        hits.append((cross_idx[eid], in_stamp[cyc_verts[i]] == tick))
                if len(hits) % 2:
                    raise RuntimeError(
                        f"odd number of sphere crossings in face {f}: "
                        "inconsistent adjacency"
                    )
                m = len(hits)
                for i in range(m):
                    j, is_exit = hits[i]
                    if is_exit:
                        k = hits[i + 1 - m][0] if i + 1 >= m else hits[i + 1][0]
                        if nbr_a[j] < 0:
                            nbr_a[j] = k
                        elif nbr_b[j] < 0:
                            nbr_b[j] = k
                        else:
                            return REASON_OPEN
                        if nbr_a[k] < 0:
                            nbr_a[k] = j
                        elif nbr_b[k] < 0:
                            nbr_b[k] = j
                        else:
                            return REASON_OPEN

        for i in range(n):
            if nbr_a[i] < 0 or nbr_b[i] < 0:
                return REASON_OPEN

        order = [0]
        prev = -1
        cur = 0
        while True:
            a = nbr_a[cur]
            nxt = nbr_b[cur] if a == prev else a
            if nxt == 0:
                break
            order.append(nxt)
            prev, cur = cur, nxt
        if len(order) < n:
            return REASON_MULTIPLE

        return (
            [px[i] for i in order],
            [py[i] for i in order],
            [pz[i] for i in order],
            [ph[i] for i in order],
            [pe[i] for i in order],
        )

    def _orient_and_anchor(self, center, radii, levels):
        """Orient every level counter-clockwise (reversing in place) and pick
        the per-level starting indices anchored on the outermost ring."""
        nx = self._nx[center]
        ny = self._ny[center]
        nz = self._nz[center]
        nn = nx * nx + ny * ny + nz * nz
        if nn == 0.0:
            raise ValueError(f"vertex {center}: degenerate normal")
        cx, cy, cz = self._xs[center], self._ys[center], self._zs[center]

        for (px, py, pz, ph, pe), r in zip(levels, radii):
            k = len(px)
            area = 0.0
            ax = px[k - 1] - cx
            ay = py[k - 1] - cy
            az = pz[k - 1] - cz
            for i in range(k):
                bx = px[i] - cx
                by = py[i] - cy
                bz = pz[i] - cz
                area += (
                    (ay * bz - az * by) * nx
                    + (az * bx - ax * bz) * ny
                    + (ax * by - ay * bx) * nz
                )
                ax, ay, az = bx, by, bz
            if abs(area) < 2e-12 * r * r:
                raise ValueError("degenerate ring: projected area is numerically zero")
            if area < 0.0:
                px.reverse()
                py.reverse()
                pz.reverse()
                ph.reverse()
                pe.reverse()

        opx, opy, opz, oph, _ = levels[-1]
        start_outer = self._select_start(opx, opy, opz, oph)
        anchor = (opx[start_outer], opy[start_outer], opz[start_outer])

        starts = []
        for px, py, pz, ph, _ in levels[:-1]:
            best = 0
            best_d = -1.0
            axx, ayy, azz = anchor
            for i in range(len(px)):
                dx = px[i] - axx
                dy = py[i] - ayy
                dz = pz[i] - azz
                d = dx * dx + dy * dy + dz * dz
                if best_d < 0.0 or d < best_d:
                    best_d = d
                    best = i
            starts.append(best)
        starts.append(start_outer)
        return starts

    @staticmethod
    def _select_start(px, py, pz, ph):
        k = len(ph)
        h_max = max(ph)
        threshold = h_max - _H_TIE_TOL
        candidates = [i for i in range(k) if ph[i] >= threshold]
        if len(candidates) == 1:
            return candidates[0]
        best = candidates[0]
        best_spread = -1.0
        for c in candidates:
            cxx, cyy, czz = px[c], py[c], pz[c]
            s = 0.0
            for i in range(k):
                dx = px[i] - cxx
                dy = py[i] - cyy
                dz = pz[i] - czz
                s += sqrt(dx * dx + dy * dy + dz * dz)
            if s > best_spread:
                best_spread = s
                best = c
        return best


def _all_vertex_normals(mesh):
    """Area-weighted vertex normals for the whole mesh at once.

    Triangle contributions are vectorized; larger polygons fall back to the
    Newell loop.  Vertices without valid incident faces get a zero normal,
    which only raises once a ring extraction actually needs them.
    """
    normals = np.zeros_like(mesh.vertices)
    tri = [f for f in mesh.faces if len(f) == 3]
    if tri:
        t = np.asarray(tri, dtype=np.int64)
        p0 = mesh.vertices[t[:, 0]]
        cr = np.cross(mesh.vertices[t[:, 1]] - p0, mesh.vertices[t[:, 2]] - p0)
        for col in range(3):
            np.add.at(normals, t[:, col], cr)
    for fi, face in enumerate(mesh.faces):
        if len(face) == 3:
            continue
        newell = mesh.face_normal(fi)
        for v in face:
            normals[v] += newell
    norm = np.linalg.norm(normals, axis=1)
    ok = norm > 0.0
    normals[ok] /= norm[ok, None]
    return normals


def extract_rings(mesh, field, center, radii, n_samples=None):
    """One-shot ring extraction; see :meth:`RingExtractor.extract`.

    Builds the flattened walk structures on every call, so prefer a shared
    :class:`RingExtractor` when processing many vertices of the same mesh.
    """
    return RingExtractor(mesh, field).extract(center, radii, n_samples)


def start_field_export(mesh, field, radius, out):
    """Write the starting-point offset vector of every admissible vertex.

    For each vertex v whose single ring at ``radius`` is admissible, writes
    one line ``vertex_id dx dy dz`` where (dx, dy, dz) is the vector from v
    to the ring's starting point.  Returns the number of exported vertices.
    """
    extractor = RingExtractor(mesh, field)
    count = 0
    with open(out, "w", newline="\n") as fh:
        for v in range(mesh.vertex_count):
            ring_set = extractor.extract(v, [radius])
            if not ring_set.admissible:
                continue
            curve = ring_set.curves[0]
            vec = curve.points[ring_set.starts[0]] - mesh.vertices[v]
            fh.write("%d %.9g %.9g %.9g\n" % (v, vec[0], vec[1], vec[2]))
            count += 1
    return count
