"""Per-vertex ring LBP values and the per-mesh histogram descriptor.

The value of a vertex on one ring is the number of ring samples whose
scalar exceeds the vertex's own scalar (strict comparison, unit weights),
an integer in 0..P.  The mesh descriptor is an N_r x (P+1) matrix whose
row n histograms the values of all admissible vertices on ring n,
normalized by the admissible-vertex count so each row sums to one.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mesh_io import compute_scalar_field
from .rings import RingExtractor, radii_schedule


class NoAdmissibleVertices(Exception):
    """Raised when no vertex of a mesh yields valid rings (R_max too large)."""


@dataclass(frozen=True)
class EdgeLbpParams:
    """Descriptor settings: ring sample count, ring count, largest radius."""

    samples: int = 15            # P, points per ring
    rings: int = 5               # N_r
    r_max: float = 1.0           # radius of the outermost ring, model units
    h_mode: str = "cielab_l"
    exponent: float = 1.0

    def __post_init__(self):
        if self.samples < 4:
            raise ValueError("samples per ring must be >= 4")
        if self.rings < 1:
            raise ValueError("ring count must be >= 1")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        if self.h_mode not in ("cielab_l", "grayscale"):
            raise ValueError(f"unknown h mode {self.h_mode!r}")
        if self.exponent <= 0:
            raise ValueError("exponent must be positive")

    @property
    def radii(self):
        return radii_schedule(self.r_max, self.rings)


@dataclass
class Descriptor:
    """Normalized ring-value histogram matrix of one mesh."""

    matrix: np.ndarray          # (N_r, P+1), rows sum to 1
    params: EdgeLbpParams
    admissible_count: int
    rejections: dict = field(default_factory=dict)  # reason -> vertex count


def edge_lbp_value(h_center, h_samples):
    """Number of ring samples strictly greater than the center value.

    Independent of sample order; equal values contribute nothing.
    """
    return int(np.count_nonzero(np.asarray(h_samples) > h_center))


def _count_range(extractor, radii, n_samples, h_values, lo, hi):
    n_rings = len(radii)
    counts = np.zeros((n_rings, n_samples + 1), dtype=np.int64)
    rejections = {}
    for v in range(lo, hi):
        values, reason = extractor.values(v, radii, n_samples, h_values[v])
        if values is None:
            rejections[reason] = rejections.get(reason, 0) + 1
            continue
        for li in range(n_rings):
            counts[li, values[li]] += 1
    return counts, rejections


_POOL_STATE = {}


def _pool_init(mesh, field_, radii, n_samples):
    _POOL_STATE["extractor"] = RingExtractor(mesh, field_)
    _POOL_STATE["radii"] = radii
    _POOL_STATE["n_samples"] = n_samples
    _POOL_STATE["h"] = [float(x) for x in field_.values]


def _pool_work(span):
    lo, hi = span
    return _count_range(
        _POOL_STATE["extractor"],
        _POOL_STATE["radii"],
        _POOL_STATE["n_samples"],
        _POOL_STATE["h"],
        lo,
        hi,
    )


def compute_descriptor(mesh, params, field_=None, threads=1):
    """Compute the ring-LBP descriptor of a vertex-colored mesh.

    Parameters
    ----------
    mesh : SurfaceMesh
    params : EdgeLbpParams
    field_ : ScalarField, optional
        Precomputed scalar field; derived from ``params`` when omitted.
    threads : int
        Worker processes for the per-vertex extraction.  The histogram is
        an integer-count reduction, so results are identical for any count.

    Raises
    ------
    NoAdmissibleVertices
        When every vertex is rejected (R_max too large for the mesh).
    """
    if field_ is None:
        field_ = compute_scalar_field(mesh, params.h_mode, params.exponent)
    radii = params.radii
    nv_total = mesh.vertex_count

    if threads <= 1:
        extractor = RingExtractor(mesh, field_)
        h_values = [float(x) for x in field_.values]
        counts, rejections = _count_range(
            extractor, radii, params.samples, h_values, 0, nv_total
        )
    else:
        chunk = max(256, (nv_total + threads * 4 - 1) // (threads * 4))
        spans = [(lo, min(lo + chunk, nv_total)) for lo in range(0, nv_total, chunk)]
        counts = np.zeros((params.rings, params.samples + 1), dtype=np.int64)
        rejections = {}
        ctx_args = {"initializer": _pool_init,
                    "initargs": (mesh, field_, radii, params.samples)}
        if hasattr(os, "fork"):
            import multiprocessing
            ctx_args["mp_context"] = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=threads, **ctx_args) as pool:
            for part, rej in pool.map(_pool_work, spans):
                counts += part
                for k, v in rej.items():
                    rejections[k] = rejections.get(k, 0) + v

    n_admissible = int(counts[0].sum())
    if n_admissible == 0:
        raise NoAdmissibleVertices(
            "no admissible vertices: every ring extraction failed "
            f"({rejections}); r_max={params.r_max} is likely too large"
        )
    matrix = counts.astype(np.float64) / n_admissible
    return Descriptor(matrix, params, n_admissible, rejections)


def lbp_values(ring_set, h_center):
    """Per-ring LBP values for one admissible, resampled vertex ring set."""
    return [edge_lbp_value(h_center, r.h_samples) for r in ring_set.rings]


# ----------------------------------------------------------------------
# baseline color histograms

@dataclass
class BaselineHistogram:
    """Plain 16-bin histogram of the scalar field, for baseline comparisons."""

    bins: np.ndarray
    normalized_range: bool  # True: per-mesh min/max range; False: fixed range


def baseline_histogram(field_, variant="hist1"):
    """16-bin histogram descriptor of a scalar field.

    ``hist1`` spreads the bins over this mesh's own [min, max] value range;
    ``hist2`` uses the fixed full range of the field mode.  A constant field
    with ``hist1`` puts all mass in bin 0 by convention.
    """
    values = np.asarray(field_.values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty scalar field")
    if variant == "hist1":
        lo, hi = float(values.min()), float(values.max())
        if hi == lo:
            bins = np.zeros(16)
            bins[0] = 1.0
            return BaselineHistogram(bins, True)
        counts, _ = np.histogram(values, bins=16, range=(lo, hi))
        return BaselineHistogram(counts / counts.sum(), True)
    if variant == "hist2":
        counts, _ = np.histogram(values, bins=16, range=(0.0, field_.range_max()))
        return BaselineHistogram(counts / max(counts.sum(), 1), False)
    raise ValueError(f"unknown baseline variant {variant!r}")


# ----------------------------------------------------------------------
# descriptor files

def save_descriptor(desc, path):
    """Write a descriptor as plain text with a parameter header line."""
    p = desc.params
    with open(path, "w", newline="\n") as fh:
        fh.write(
            "edgelbp %d %d %.17g %s %.17g %d\n"
            % (p.samples, p.rings, p.r_max, p.h_mode, p.exponent,
               desc.admissible_count)
        )
        for row in desc.matrix:
            fh.write(" ".join("%.17g" % x for x in row) + "\n")


def load_descriptor(path):
    """Read a descriptor written by :func:`save_descriptor`."""
    with open(path, "r") as fh:
        header = fh.readline().split()
        if len(header) != 7 or header[0] != "edgelbp":
            raise ValueError(f"{path}: not a descriptor file")
        params = EdgeLbpParams(
            samples=int(header[1]),
            rings=int(header[2]),
            r_max=float(header[3]),
            h_mode=header[4],
            exponent=float(header[5]),
        )
        n_admissible = int(header[6])
        rows = [[float(t) for t in fh.readline().split()] for _ in range(params.rings)]
    matrix = np.asarray(rows, dtype=np.float64)
    if matrix.shape != (params.rings, params.samples + 1):
        raise ValueError(f"{path}: matrix shape does not match header")
    return Descriptor(matrix, params, n_admissible)
