"""Retrieval and classification quality measures over a distance matrix.

Every model queries the dataset in turn (itself excluded); rankings are by
ascending distance with ties broken by model index so results are
reproducible.  All measures are rank-based and therefore invariant under
any strictly increasing transform of the distances.
"""

import warnings
from dataclasses import dataclass

import numpy as np

TIER_NONE, TIER_ST, TIER_FT, TIER_NN = 0, 1, 2, 3

_TIER_COLORS = {
    TIER_NONE: (255, 255, 255),
    TIER_ST: (0, 0, 255),
    TIER_FT: (255, 0, 0),
    TIER_NN: (0, 0, 0),
}


@dataclass
class LabeledDataset:
    """A distance matrix plus one class identifier per model."""

    matrix: "DistanceMatrix"
    classes: list

    def __post_init__(self):
        if len(self.classes) != len(self.matrix.labels):
            raise ValueError("class list length does not match matrix size")

    @property
    def size(self):
        return len(self.classes)

    def class_sizes(self):
        sizes = {}
        for c in self.classes:
            sizes[c] = sizes.get(c, 0) + 1
        return sizes


@dataclass
class EvalReport:
    nn: float
    ft: float
    st: float
    e_measure: float
    mean_ap: float
    ndcg: float
    pr_recall: np.ndarray
    pr_precision: np.ndarray
    confusion: np.ndarray     # (n_classes, n_classes) NN classification counts
    class_names: list
    tier_image: np.ndarray    # (n, n) codes: 0 none, 1 ST, 2 FT, 3 NN


def rank_all(dataset):
    """Ranked retrieval lists: per query, all other models by ascending distance.

    Ties break by ascending model index.
    """
    values = dataset.matrix.values
    n = dataset.size
    ranked = []
    idx = np.arange(n)
    for q in range(n):
        others = idx[idx != q]
        d = values[q, others]
        order = np.lexsort((others, d))
        ranked.append(others[order])
    return ranked


def _relevance(dataset, ranked):
    """Per query: boolean relevance along its ranking, and its class size."""
    classes = dataset.classes
    rel = []
    csize = []
    sizes = dataset.class_sizes()
    for q, order in enumerate(ranked):
        c = classes[q]
        rel.append(np.array([classes[j] == c for j in order], dtype=bool))
        csize.append(sizes[c])
    return rel, csize


def tier_scores(dataset, ranked=None):
    """Nearest-neighbor, first-tier and second-tier scores.

    FT counts relevant items in the top |C|-1 retrievals, ST in the top
    2(|C|-1); both divide by |C|-1, so all three scores lie in [0, 1].
    """
    for c, s in dataset.class_sizes().items():
        if s < 2:
            raise ValueError(f"class {c!r} has a single member; tiers undefined")
    if ranked is None:
        ranked = rank_all(dataset)
    rel, csize = _relevance(dataset, ranked)
    nn = ft = st = 0.0
    for r, c in zip(rel, csize):
        k = c - 1
        nn += float(r[0])
        ft += r[:k].sum() / k
        st += min(r[: 2 * k].sum(), k) / k
    n = dataset.size
    return nn / n, ft / n, st / n


def precision_recall(dataset, ranked=None):
    """Averaged precision-recall curve and mean average precision.

    Per query, precision is read at each relevant retrieval; the curve is
    averaged across queries at the union of their recall levels j/(|C|-1).
    """
    if ranked is None:
        ranked = rank_all(dataset)
    rel, csize = _relevance(dataset, ranked)

    query_curves = []
    ap_values = []
    levels = set()
    for r, c in zip(rel, csize):
        k = c - 1
        hits = np.flatnonzero(r) + 1.0          # 1-based ranks of relevant items
        found = len(hits)
        prec = np.arange(1, found + 1) / hits
        recall = np.arange(1, k + 1) / k
        # relevant items are always retrieved somewhere in the full ranking
        query_curves.append((recall, prec))
        ap_values.append(prec.sum() / k)
        levels.update(recall.tolist())

    grid = np.array(sorted(levels))
    acc = np.zeros(len(grid))
    for recall, prec in query_curves:
        # precision at the first relevant retrieval reaching each level
        j = np.searchsorted(recall, grid - 1e-12)
        acc += prec[np.clip(j, 0, len(prec) - 1)]
    return grid, acc / len(query_curves), float(np.mean(ap_values))


def e_measure(dataset, k=32, ranked=None):
    """Harmonic mean of precision and recall over the top-k retrievals."""
    if k < 1:
        raise ValueError("cutoff k must be >= 1")
    if k > dataset.size - 1:
        warnings.warn(
            f"e-measure cutoff {k} exceeds dataset size; clamped to {dataset.size - 1}"
        )
        k = dataset.size - 1
    if ranked is None:
        ranked = rank_all(dataset)
    rel, csize = _relevance(dataset, ranked)
    total = 0.0
    for r, c in zip(rel, csize):
        hits = r[:k].sum()
        if hits:
            p = hits / k
            rc = hits / (c - 1)
            total += 2.0 * p * rc / (p + rc)
    return total / dataset.size


def ndcg(dataset, ranked=None):
    """Normalized discounted cumulative gain with binary relevance.

    DCG credits the first retrieval fully and discounts position i by
    1/log2(i) afterwards; normalization divides by the ideal ordering.
    """
    if ranked is None:
        ranked = rank_all(dataset)
    rel, csize = _relevance(dataset, ranked)
    n_items = dataset.size - 1
    disc = np.empty(n_items)
    disc[0] = 1.0
    if n_items > 1:
        disc[1:] = 1.0 / np.log2(np.arange(2, n_items + 1))
    total = 0.0
    for r, c in zip(rel, csize):
        ideal = disc[: c - 1].sum()
        total += (r * disc).sum() / ideal
    return total / dataset.size


def confusion_and_tier(dataset, ranked=None):
    """NN confusion matrix over classes, and the per-pair tier image.

    The tier image marks the strongest tier model j attains for query i:
    NN over FT over ST, with 0 for none.  The diagonal stays unmarked since
    queries never retrieve themselves.
    """
    if ranked is None:
        ranked = rank_all(dataset)
    classes = dataset.classes
    names = sorted(set(classes))
    index = {c: i for i, c in enumerate(names)}
    sizes = dataset.class_sizes()

    confusion = np.zeros((len(names), len(names)), dtype=np.int64)
    n = dataset.size
    tier = np.zeros((n, n), dtype=np.int64)
    for q, order in enumerate(ranked):
        confusion[index[classes[q]], index[classes[order[0]]]] += 1
        k = sizes[classes[q]] - 1
        tier[q, order[0]] = TIER_NN
        tier[q, order[1:k]] = TIER_FT
        tier[q, order[k : 2 * k]] = TIER_ST
    return confusion, names, tier


def evaluate(dataset, ecut=32):
    """All measures in one pass over a shared ranking."""
    ranked = rank_all(dataset)
    nn, ft, st = tier_scores(dataset, ranked)
    recall, precision, mean_ap = precision_recall(dataset, ranked)
    e = e_measure(dataset, ecut, ranked)
    gain = ndcg(dataset, ranked)
    confusion, names, tier = confusion_and_tier(dataset, ranked)
    return EvalReport(
        nn=nn, ft=ft, st=st, e_measure=e, mean_ap=mean_ap, ndcg=gain,
        pr_recall=recall, pr_precision=precision,
        confusion=confusion, class_names=names, tier_image=tier,
    )


# ----------------------------------------------------------------------
# report files

def write_tier_ppm(tier, path):
    """Render the tier image as an ascii portable pixmap.

    Black marks the nearest neighbor, red the first tier, blue the second
    tier, white everything else.
    """
    n = tier.shape[0]
    with open(path, "w", newline="\n") as fh:
        fh.write(f"P3\n{n} {n}\n255\n")
        for row in tier:
            fh.write(" ".join("%d %d %d" % _TIER_COLORS[int(v)] for v in row) + "\n")


def write_report(report, out_dir):
    """Write the scalar summary, PR curve, confusion matrix and tier image."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.txt"), "w", newline="\n") as fh:
        fh.write("NN=%.6f\n" % report.nn)
        fh.write("FT=%.6f\n" % report.ft)
        fh.write("ST=%.6f\n" % report.st)
        fh.write("e=%.6f\n" % report.e_measure)
        fh.write("mAP=%.6f\n" % report.mean_ap)
        fh.write("nDCG=%.6f\n" % report.ndcg)
    with open(os.path.join(out_dir, "pr_curve.csv"), "w", newline="\n") as fh:
        fh.write("recall,precision\n")
        for r, p in zip(report.pr_recall, report.pr_precision):
            fh.write("%.9g,%.9g\n" % (r, p))
    with open(os.path.join(out_dir, "confusion.csv"), "w", newline="\n") as fh:
        fh.write(",".join(str(c) for c in report.class_names) + "\n")
        for row in report.confusion:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
    write_tier_ppm(report.tier_image, os.path.join(out_dir, "tier_image.ppm"))
