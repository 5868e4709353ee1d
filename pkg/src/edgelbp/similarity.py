"""Distances between descriptors and the dataset distance matrix."""

from dataclasses import dataclass

import numpy as np

from .descriptor import BaselineHistogram, Descriptor

METRICS = ("bhattacharyya", "euclidean", "emd")


class IncompatibleDescriptors(Exception):
    """Raised when two descriptors were computed with different settings."""


def _rows(obj):
    if isinstance(obj, Descriptor):
        return obj.matrix
    if isinstance(obj, BaselineHistogram):
        return obj.bins[None, :]
    return np.atleast_2d(np.asarray(obj, dtype=np.float64))


def _compat_key(obj):
    if isinstance(obj, Descriptor):
        p = obj.params
        return ("edgelbp", p.samples, p.rings, p.r_max, p.h_mode, p.exponent)
    if isinstance(obj, BaselineHistogram):
        return ("baseline", obj.normalized_range, len(obj.bins))
    return ("raw",) + tuple(_rows(obj).shape)


def _check_pair(a, b):
    ka, kb = _compat_key(a), _compat_key(b)
    if ka != kb:
        raise IncompatibleDescriptors(f"descriptor settings differ: {ka} vs {kb}")
    return _rows(a), _rows(b)


def bhattacharyya_rows(a, b):
    """Mean per-row Bhattacharyya distance between row-stochastic matrices.

    Per row, sqrt(1 - sum(sqrt(a * b))); the coefficient is clipped at 1 to
    absorb rounding on identical rows.  Result lies in [0, 1].
    """
    coeff = np.sqrt(np.asarray(a) * np.asarray(b)).sum(axis=1)
    return float(np.sqrt(np.maximum(1.0 - coeff, 0.0)).mean())


def euclidean_rows(a, b):
    """Entrywise Euclidean (Frobenius) distance between two matrices."""
    return float(np.sqrt(((np.asarray(a) - np.asarray(b)) ** 2).sum()))


def emd_rows(a, b):
    """Mean per-row 1-D earth mover's distance with unit bin spacing.

    For histograms on the integer line the optimal transport cost is the L1
    distance between cumulative distributions, summed over bins.
    """
    diff = np.cumsum(np.asarray(a) - np.asarray(b), axis=1)
    return float(np.abs(diff).sum(axis=1).mean())


_ROW_METRICS = {
    "bhattacharyya": bhattacharyya_rows,
    "euclidean": euclidean_rows,
    "emd": emd_rows,
}


def bhattacharyya_distance(a, b):
    """Bhattacharyya distance between two compatible descriptors."""
    return bhattacharyya_rows(*_check_pair(a, b))


def euclidean_distance(a, b):
    """Euclidean distance between two compatible descriptors."""
    return euclidean_rows(*_check_pair(a, b))


def emd_distance(a, b):
    """Per-ring 1-D earth mover's distance between compatible descriptors."""
    return emd_rows(*_check_pair(a, b))


def descriptor_distance(a, b, metric="bhattacharyya"):
    """Distance between two descriptors under the named metric."""
    try:
        fn = _ROW_METRICS[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return fn(*_check_pair(a, b))


@dataclass
class DistanceMatrix:
    """Symmetric pairwise distances over a labeled set of models."""

    labels: list
    values: np.ndarray
    metric: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        n = len(self.labels)
        if self.values.shape != (n, n):
            raise ValueError("distance matrix size does not match labels")


def distance_matrix(descriptors, metric="bhattacharyya", labels=None):
    """Full pairwise distance matrix of mutually compatible descriptors.

    Distances are computed for i < j and mirrored, so the matrix is exactly
    symmetric with a zero diagonal.  Any incompatible pair aborts with both
    labels named.
    """
    if len(descriptors) < 2:
        raise ValueError("need at least two descriptors")
    if labels is None:
        labels = [str(i) for i in range(len(descriptors))]
    if len(labels) != len(descriptors):
        raise ValueError("labels length does not match descriptors")
    try:
        fn = _ROW_METRICS[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")

    n = len(descriptors)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            try:
                rows_i, rows_j = _check_pair(descriptors[i], descriptors[j])
            except IncompatibleDescriptors as exc:
                raise IncompatibleDescriptors(
                    f"{labels[i]} vs {labels[j]}: {exc}"
                ) from None
            d = fn(rows_i, rows_j)
            values[i, j] = d
            values[j, i] = d
    return DistanceMatrix(list(labels), values, metric)


def save_distance_matrix(dm, path):
    """Write labels plus the square matrix as decimal CSV."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(dm.labels) + "\n")
        for row in dm.values:
            fh.write(",".join("%.17g" % x for x in row) + "\n")


def load_distance_matrix(path, metric="unknown"):
    """Read a matrix written by :func:`save_distance_matrix`."""
    with open(path, "r") as fh:
        labels = fh.readline().rstrip("\n").split(",")
        rows = [[float(t) for t in fh.readline().split(",")] for _ in labels]
    return DistanceMatrix(labels, np.asarray(rows), metric)
