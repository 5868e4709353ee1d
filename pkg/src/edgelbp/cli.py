"""Batch pipeline front end: generate / describe / distmat / evaluate / inspect.

The pipeline is staged through plain files so intermediate artifacts stay
inspectable and cacheable: meshes -> descriptor files -> distance matrix
CSV -> evaluation report.  All numeric output uses fixed formats, making
reruns byte-comparable; worker counts never change any output byte.

Exit codes: 0 success, 2 input parse failure, 3 descriptor incompatibility,
4 no admissible vertices, 1 anything else.
"""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import datagen, evaluation
from .descriptor import (
    EdgeLbpParams,
    NoAdmissibleVertices,
    compute_descriptor,
    load_descriptor,
    save_descriptor,
)
from .mesh_io import MeshLoadError, compute_scalar_field, load_mesh
from .rings import RingExtractor, start_field_export
from .similarity import (
    IncompatibleDescriptors,
    DistanceMatrix,
    descriptor_distance,
    load_distance_matrix,
    save_distance_matrix,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_INCOMPATIBLE = 3
EXIT_NO_ADMISSIBLE = 4

_H_MODES = {"lab": "cielab_l", "gray": "grayscale"}
_METRICS = {"bha": "bhattacharyya", "euc": "euclidean", "emd": "emd"}

_DEFAULTS = {
    "P": 15,
    "Nr": 5,
    "Rmax": 0.1,
    "h": "lab",
    "exp": 1.0,
    "metric": "bha",
    "threads": 1,
    "seed": 0,
    "ecut": 32,
}


@dataclass
class RunConfig:
    params: EdgeLbpParams
    metric: str
    threads: int
    seed: int
    ecut: int


def _read_config_file(path):
    values = {}
    with open(path, "r") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def _resolve_config(args):
    """Merge defaults, config file and explicit flags (flags win)."""
    merged = dict(_DEFAULTS)
    if getattr(args, "config", None):
        file_values = _read_config_file(args.config)
        unknown = set(file_values) - set(_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_values)
    for key in _DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag

    h = str(merged["h"])
    metric = str(merged["metric"])
    if h not in _H_MODES:
        raise ValueError(f"--h must be one of {sorted(_H_MODES)}")
    if metric not in _METRICS:
        raise ValueError(f"--metric must be one of {sorted(_METRICS)}")
    params = EdgeLbpParams(
        samples=int(merged["P"]),
        rings=int(merged["Nr"]),
        r_max=float(merged["Rmax"]),
        h_mode=_H_MODES[h],
        exponent=float(merged["exp"]),
    )
    return RunConfig(
        params=params,
        metric=_METRICS[metric],
        threads=int(merged["threads"]),
        seed=int(merged["seed"]),
        ecut=int(merged["ecut"]),
    )


def _add_common_flags(parser):
    parser.add_argument("--config", help="key=value config file; flags override it")
    parser.add_argument("--P", type=int, help="samples per ring")
    parser.add_argument("--Nr", type=int, help="number of rings")
    parser.add_argument("--Rmax", type=float, help="outermost ring radius")
    parser.add_argument("--h", choices=sorted(_H_MODES), help="scalar field mode")
    parser.add_argument("--exp", type=float, help="scalar field exponent")
    parser.add_argument("--metric", choices=sorted(_METRICS))
    parser.add_argument("--threads", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--ecut", type=int, help="e-measure cutoff")


def cmd_describe(args):
    config = _resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    failures = []
    for path in args.meshes:
        stem = os.path.splitext(os.path.basename(path))[0]
        try:
            mesh = load_mesh(path)
            desc = compute_descriptor(mesh, config.params, threads=config.threads)
        except (MeshLoadError, NoAdmissibleVertices, OSError) as exc:
            print(f"describe {path}: FAILED: {exc}", file=sys.stderr)
            failures.append(exc)
            continue
        out_path = os.path.join(args.out, stem + ".desc")
        save_descriptor(desc, out_path)
        rate = desc.admissible_count / mesh.vertex_count
        print(
            f"describe {path}: vertices={mesh.vertex_count} "
            f"admissible={desc.admissible_count} rate={rate:.4f} -> {out_path}"
        )
    if failures:
        last = failures[-1]
        if isinstance(last, NoAdmissibleVertices):
            return EXIT_NO_ADMISSIBLE
        if isinstance(last, (MeshLoadError, OSError)):
            return EXIT_PARSE
        return EXIT_ERROR
    return EXIT_OK


def _pair_distance(task):
    i, j, metric = task
    return i, j, descriptor_distance(_PAIR_POOL[i], _PAIR_POOL[j], metric)


_PAIR_POOL = []


def _pool_pairs_init(descriptors):
    global _PAIR_POOL
    _PAIR_POOL = descriptors


def cmd_distmat(args):
    config = _resolve_config(args)
    descriptors = []
    labels = []
    for path in args.descriptors:
        descriptors.append(load_descriptor(path))
        labels.append(os.path.splitext(os.path.basename(path))[0])

    n = len(descriptors)
    if n < 2:
        raise ValueError("need at least two descriptor files")
    pairs = [(i, j, config.metric) for i in range(n) for j in range(i + 1, n)]
    values = np.zeros((n, n))
    if config.threads <= 1:
        results = (_pair_distance_direct(descriptors, t) for t in pairs)
    else:
        import multiprocessing

        ctx = {"initializer": _pool_pairs_init, "initargs": (descriptors,)}
        if hasattr(os, "fork"):
            ctx["mp_context"] = multiprocessing.get_context("fork")
        pool = ProcessPoolExecutor(max_workers=config.threads, **ctx)
        results = pool.map(_pair_distance, pairs)
    for i, j, d in results:
        values[i, j] = d
        values[j, i] = d
    if config.threads > 1:
        pool.shutdown()

    dm = DistanceMatrix(labels, values, config.metric)
    save_distance_matrix(dm, args.out)
    print(f"distmat: {n} descriptors, metric={config.metric} -> {args.out}")
    return EXIT_OK


def _pair_distance_direct(descriptors, task):
    i, j, metric = task
    return i, j, descriptor_distance(descriptors[i], descriptors[j], metric)


def cmd_evaluate(args):
    config = _resolve_config(args)
    dm = load_distance_matrix(args.matrix, config.metric)
    rows = datagen.load_manifest(args.manifest)
    class_by_stem = {
        os.path.splitext(fname)[0]: cls for fname, _, cls in rows
    }
    missing = [lb for lb in dm.labels if lb not in class_by_stem]
    if missing:
        raise ValueError(f"manifest has no class for matrix labels: {missing}")
    classes = [class_by_stem[lb] for lb in dm.labels]

    dataset = evaluation.LabeledDataset(dm, classes)
    report = evaluation.evaluate(dataset, ecut=config.ecut)
    evaluation.write_report(report, args.out)
    print(
        "evaluate: NN=%.4f FT=%.4f ST=%.4f e=%.4f mAP=%.4f nDCG=%.4f -> %s"
        % (report.nn, report.ft, report.st, report.e_measure,
           report.mean_ap, report.ndcg, args.out)
    )
    return EXIT_OK


def cmd_generate(args):
    config = _resolve_config(args)
    shapes = datagen.default_shapes(args.resolution, args.size)
    patterns = datagen.default_patterns(args.pattern_scale, args.patterns)
    rows = datagen.build_cpp_like_dataset(shapes, patterns, args.out, config.seed)
    print(f"generate: {len(rows)} models -> {args.out}")
    return EXIT_OK


def cmd_inspect(args):
    config = _resolve_config(args)
    mesh = load_mesh(args.mesh)
    params = config.params
    field = compute_scalar_field(mesh, params.h_mode, params.exponent)
    extractor = RingExtractor(mesh, field)
    ring_set = extractor.extract(args.vertex, params.radii, params.samples)
    if not ring_set.admissible:
        print(f"vertex {args.vertex}: non-admissible ({ring_set.reason})")
        return EXIT_OK
    h_center = float(field.values[args.vertex])
    print(f"vertex {args.vertex}: admissible, h={h_center:.6g}")
    for li, (radius, ring) in enumerate(zip(params.radii, ring_set.rings)):
        curve = ring_set.curves[li]
        value = int(np.count_nonzero(ring.h_samples > h_center))
        print(f"ring {li}: R={radius:.6g} points={len(curve)} lbp={value}")
        for p, h in zip(curve.points, curve.h_values):
            print("  point %.6g %.6g %.6g h=%.6g" % (p[0], p[1], p[2], h))
        for s, h in zip(ring.samples, ring.h_samples):
            print("  sample %.6g %.6g %.6g h=%.6g" % (s[0], s[1], s[2], h))
    if args.start_field:
        count = start_field_export(mesh, field, params.r_max, args.start_field)
        print(f"start field: {count} vertices -> {args.start_field}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="edgelbp",
        description="Color pattern retrieval on surface tessellations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="compute one descriptor per mesh")
    p.add_argument("meshes", nargs="+")
    p.add_argument("--out", required=True, help="output directory")
    _add_common_flags(p)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("distmat", help="pairwise distance matrix of descriptors")
    p.add_argument("descriptors", nargs="+")
    p.add_argument("--out", required=True, help="output CSV file")
    _add_common_flags(p)
    p.set_defaults(func=cmd_distmat)

    p = sub.add_parser("evaluate", help="retrieval measures for a labeled matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="report directory")
    _add_common_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generate", help="build the synthetic patterned dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=int, default=10000)
    p.add_argument("--size", type=float, default=2.0)
    p.add_argument("--pattern-scale", type=float, default=0.4)
    p.add_argument("--patterns", type=int, default=4, help="number of pattern classes")
    _add_common_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("inspect", help="dump rings and samples of one vertex")
    p.add_argument("mesh")
    p.add_argument("--vertex", type=int, required=True)
    p.add_argument("--start-field", help="also export the start-point field here")
    _add_common_flags(p)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (MeshLoadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except IncompatibleDescriptors as exc:
        print(f"error: incompatible descriptors: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except NoAdmissibleVertices as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_ADMISSIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
