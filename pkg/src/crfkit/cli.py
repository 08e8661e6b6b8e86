"""Command-line entry point: ``crfkit <command> ...``.

Exit codes: 0 success, 1 data error or failed verification, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import sys
from dataclasses import dataclass, field

import numpy as np

from . import distribution, estimation, fixtures, frames, sampling
from .cloud import PointCloud
from .errors import CRFError
from .geom import as_rng, format_rotation, random_rotation, rotation_angle
from .io import TriangleMesh, normalize_unit_sphere, read_cloud, sample_mesh_surface, write_cloud
from .verify import run_suite

REPORT_COLUMNS = ["trial", "method", "ad", "correct", "angle_error_deg", "anchor_src", "anchor_tgt"]


@dataclass
class RunConfig:
    command: str
    inputs: list[str] = field(default_factory=list)
    output: str | None = None
    n_points: int = 1024
    k_neighbors: int = 16
    eps: float = frames.DEFAULT_EPS
    seed: int = 0
    trials: int = 16
    noise_sigma: float = 0.0
    method: str = estimation.GEOMETRIC
    raw_logits: bool = False
    covariant: bool = False
    anchor_axis: str = "column"
    # command-specific
    estimate_normals: bool = False
    centers: list[int] | None = None
    m: int | None = None
    count: int = 8
    weights: str = "dirichlet"
    alpha: float = 0.1
    max_iter: int = 2000
    tol: float = 1e-7
    use_fixtures: bool = False
    inject_fault: bool = False
    dump_distances: str | None = None
    dump_relation: str | None = None
    methods: list[str] = field(default_factory=lambda: [estimation.GEOMETRIC, estimation.ICP])

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")

    @property
    def axis(self) -> int:
        return 0 if self.anchor_axis == "column" else 1


# --- helpers ---------------------------------------------------------------


def _load(path: str, cfg: RunConfig) -> PointCloud:
    """Read a cloud; meshes are surface-sampled and normalized to the unit sphere."""
    data = read_cloud(path)
    if isinstance(data, TriangleMesh):
        cloud = normalize_unit_sphere(sample_mesh_surface(data, cfg.n_points, cfg.seed, cfg.eps))
        return cloud.with_normals(frames.orient_normals(cloud.points, cloud.normals, cfg.eps))
    return data


def _with_normals(cloud: PointCloud, cfg: RunConfig, force: bool = False) -> PointCloud:
    if cloud.normals is None or force:
        return frames.estimate_normals(cloud.without_normals(), cfg.k_neighbors, cfg.eps)
    return cloud


def _dump_matrix(path: str, m: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(m), fmt="%.17g")


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _csv(rows, columns) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


# --- commands --------------------------------------------------------------


def cmd_ingest(cfg: RunConfig) -> int:
    cloud = _load(cfg.inputs[0], cfg)
    if not isinstance(read_cloud(cfg.inputs[0]), TriangleMesh):
        cloud = normalize_unit_sphere(cloud)
        if cloud.normals is not None:
            cloud = cloud.with_normals(frames.orient_normals(cloud.points, cloud.normals, cfg.eps))
    if cfg.estimate_normals:
        cloud = _with_normals(cloud, cfg, force=True)
    if cfg.output is None:
        raise ValueError("ingest needs --output")
    write_cloud(cfg.output, cloud)
    print(f"wrote {len(cloud)} points to {cfg.output}")
    return 0


def cmd_normals(cfg: RunConfig) -> int:
    cloud = _with_normals(_load(cfg.inputs[0], cfg), cfg, force=True)
    if cfg.output is None:
        raise ValueError("normals needs --output")
    write_cloud(cfg.output, cloud)
    print(f"wrote {len(cloud)} points with normals to {cfg.output}")
    return 0


def cmd_crf(cfg: RunConfig) -> int:
    cloud = _with_normals(_load(cfg.inputs[0], cfg), cfg)
    if cfg.centers is not None:
        centers = cfg.centers
    else:
        centers = sampling.fps(cloud, min(cfg.m or 16, len(cloud)))
    k = min(cfg.k_neighbors, len(cloud))
    lines = ["# center neighbor x y z"]
    for c, group in zip(centers, sampling.knn(cloud, centers, k)):
        frame = frames.crf_basis(cloud.points[c], cloud.normals[c], cfg.eps, query_index=c)
        local = frame.transform(cloud.points[group])
        for j, xyz in zip(group, local):
            lines.append(f"{c} {j} " + " ".join(f"{x:.9g}" for x in xyz))
    _emit("\n".join(lines) + "\n", cfg.output)
    return 0


def _verify_targets(cfg: RunConfig):
    if cfg.use_fixtures:
        for name in fixtures.NAMES:
            yield name, fixtures.sampled_cloud(name, cfg.n_points, cfg.seed)
    for path in cfg.inputs:
        yield path, normalize_unit_sphere(_load(path, cfg))
    if not cfg.use_fixtures and not cfg.inputs:
        rng = as_rng(cfg.seed)
        pts = rng.standard_normal((256, 3)) * np.array([1.0, 0.7, 0.4])
        normals = rng.standard_normal((256, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        yield "random-256", normalize_unit_sphere(PointCloud(pts, normals))


def cmd_verify(cfg: RunConfig) -> int:
    failed = 0
    for name, cloud in _verify_targets(cfg):
        print(f"== {name} ({len(cloud)} points)")
        checks = run_suite(
            cloud,
            seed=cfg.seed,
            k=cfg.k_neighbors,
            eps=cfg.eps,
            trials=cfg.trials,
            raw_logits=cfg.raw_logits,
            inject_fault=cfg.inject_fault,
        )
        for check in checks:
            print(check.line())
        bad = [c for c in checks if not c.passed]
        failed += len(bad)
        worst = max((c.residual for c in checks if np.isfinite(c.residual) and c.tol < 0.5), default=0.0)
        print(f"-- {len(checks) - len(bad)}/{len(checks)} passed, max residual {worst:.3e}")
    print("verify: OK" if not failed else f"verify: {failed} check(s) FAILED")
    return 0 if not failed else 1


def _estimate(source, target, method, cfg: RunConfig):
    return estimation.estimate_rotation(
        source,
        target,
        method,
        k=cfg.k_neighbors,
        eps=cfg.eps,
        anchor_axis=cfg.axis,
        max_iter=cfg.max_iter,
        tol=cfg.tol,
    )


def cmd_estimate(cfg: RunConfig) -> int:
    source = _with_normals(_load(cfg.inputs[0], cfg), cfg)
    target = _with_normals(_load(cfg.inputs[1], cfg), cfg)
    rep = _estimate(source, target, cfg.method, cfg)
    if cfg.dump_relation and cfg.method == estimation.RELATIONAL:
        f_s = estimation.radial_features(source)
        _, w = sampling.relation_module(f_s, *estimation.default_relation_maps(f_s.shape[1]))
        _dump_matrix(cfg.dump_relation, w)
    row = {
        "trial": 0,
        "method": rep.method,
        "ad": rep.ad,
        "correct": rep.correct,
        "anchor_src": rep.anchor_source,
        "anchor_tgt": rep.anchor_target,
        "rotation": format_rotation(rep.predicted_rotation, 12),
    }
    _emit(_csv([row], REPORT_COLUMNS + ["rotation"]), cfg.output)
    if cfg.output:
        print(f"rotation: {row['rotation']}")
    return 0


def run_benchmark(cloud: PointCloud, cfg: RunConfig):
    """Per-trial rows and a per-method summary for K random rotations of ``cloud``."""
    rng = as_rng(cfg.seed)
    noisy = cfg.noise_sigma > 0
    target = _with_normals(cloud, cfg, force=noisy)
    diam = estimation.diameter(target)
    rows = []
    for trial in range(cfg.trials):
        r = random_rotation(rng)
        source = target.rotated(r)
        if noisy:
            pts = source.points + cfg.noise_sigma * rng.standard_normal(source.points.shape)
            source = _with_normals(PointCloud(pts), cfg)
        for method in cfg.methods:
            rep = _estimate(source, target, method, cfg)
            rows.append(
                {
                    "trial": trial,
                    "method": method,
                    "ad": rep.ad,
                    "correct": rep.correct,
                    "angle_error_deg": float(np.degrees(rotation_angle(rep.predicted_rotation @ r))),
                    "anchor_src": rep.anchor_source,
                    "anchor_tgt": rep.anchor_target,
                }
            )
    summary = {}
    for method in cfg.methods:
        ads = [row["ad"] for row in rows if row["method"] == method]
        summary[method] = {
            "ad": float(np.mean(ads)),
            "accuracy": estimation.pose_accuracy(ads, diam),
            "trials": len(ads),
        }
    return rows, summary, diam


def cmd_benchmark(cfg: RunConfig) -> int:
    if cfg.inputs:
        cloud = normalize_unit_sphere(_load(cfg.inputs[0], cfg))
    else:
        cloud = fixtures.asymmetric_cloud(cfg.n_points, cfg.seed)
    rows, summary, diam = run_benchmark(cloud, cfg)
    _emit(_csv(rows, REPORT_COLUMNS), cfg.output)
    print(f"# points={len(cloud)} trials={cfg.trials} noise={cfg.noise_sigma:g} diameter={diam:.6g}")
    for method, s in summary.items():
        print(f"# {method}: AD={s['ad']:.6e} accuracy={s['accuracy']:.4f}")
    return 0


def cmd_sample_rot(cfg: RunConfig) -> int:
    cloud = _with_normals(_load(cfg.inputs[0], cfg), cfg)
    rng = as_rng(cfg.seed)
    dist = distribution.build_mixture(cloud)
    lines = []
    for _ in range(cfg.count):
        if cfg.weights == "uniform":
            w = distribution.uniform_weights(len(cloud))
        else:
            w = distribution.dirichlet_weights(len(cloud), cfg.alpha, rng)
        frame = distribution.sample_rotation(dist, cloud, w, rng, cfg.eps, covariant=cfg.covariant)
        lines.append(format_rotation(frame.basis))
    _emit("\n".join(lines) + "\n", cfg.output)
    return 0


def cmd_fps(cfg: RunConfig) -> int:
    cloud = _load(cfg.inputs[0], cfg)
    m = min(cfg.m or 16, len(cloud))
    idx = sampling.fps(cloud, m)
    if cfg.dump_distances:
        _dump_matrix(cfg.dump_distances, sampling.pairwise_distances(cloud))
    if cfg.output:
        write_cloud(cfg.output, cloud.subset(idx))
    print(" ".join(str(i) for i in idx))
    return 0


def cmd_chamfer(cfg: RunConfig) -> int:
    a, b = (_load(p, cfg) for p in cfg.inputs[:2])
    print(f"{sampling.chamfer(a, b):.17g}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "normals": cmd_normals,
    "crf": cmd_crf,
    "verify": cmd_verify,
    "estimate": cmd_estimate,
    "benchmark": cmd_benchmark,
    "sample-rot": cmd_sample_rot,
    "fps": cmd_fps,
    "chamfer": cmd_chamfer,
}


def cli_run(cfg: RunConfig) -> int:
    try:
        return COMMANDS[cfg.command](cfg)
    except (CRFError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


# --- argument parsing ------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--eps", type=float, default=frames.DEFAULT_EPS, help="singularity guard")
    common.add_argument("-k", "--k-neighbors", type=int, default=16, help="neighbors for normals / grouping")
    common.add_argument("-n", "--n-points", type=int, default=1024, help="surface samples when reading a mesh")
    common.add_argument("-o", "--output")

    parser = argparse.ArgumentParser(prog="crfkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="mesh/cloud -> normalized XYZ")
    p.add_argument("input")
    p.add_argument("--estimate-normals", action="store_true", help="re-estimate normals by k-NN")

    p = sub.add_parser("normals", parents=[common], help="fill normals, write 6-column XYZ")
    p.add_argument("input")

    p = sub.add_parser("crf", parents=[common], help="CRF coordinates of k-NN groups")
    p.add_argument("input")
    p.add_argument("--centers", type=_int_list)
    p.add_argument("-m", type=int, help="pick this many centers by FPS (default 16)")

    p = sub.add_parser("verify", parents=[common], help="run the invariance suite")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--fixtures", action="store_true", help="check every shipped fixture")
    p.add_argument("--trials", type=int, default=16)
    p.add_argument("--raw-logits", action="store_true", help="also check attention sampling on raw logits")
    p.add_argument("--inject-fault", action="store_true", help="perturb one check (harness self-test)")

    p = sub.add_parser("estimate", parents=[common], help="rotation taking source onto target")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--method", choices=estimation.METHODS, default=estimation.GEOMETRIC)
    p.add_argument("--anchor-axis", choices=["column", "row"], default="column")
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--dump-relation", help="write the relation matrix W of the source")

    p = sub.add_parser("benchmark", parents=[common], help="AD / accuracy over random rotations")
    p.add_argument("input", nargs="?")
    p.add_argument("--trials", type=int, default=16)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--methods", nargs="+", choices=estimation.METHODS, default=[estimation.GEOMETRIC, estimation.ICP])
    p.add_argument("--anchor-axis", choices=["column", "row"], default="column")
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-7)

    p = sub.add_parser("sample-rot", parents=[common], help="rotations drawn from the mixture distribution")
    p.add_argument("input")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--weights", choices=["dirichlet", "uniform"], default="dirichlet")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--covariant", action="store_true", help="draw noise in a cloud-anchored frame")

    p = sub.add_parser("fps", parents=[common], help="farthest point sampling indices")
    p.add_argument("input")
    p.add_argument("-m", type=int, default=16)
    p.add_argument("--dump-distances", help="write the pairwise distance matrix")

    p = sub.add_parser("chamfer", parents=[common], help="Chamfer distance between two clouds")
    p.add_argument("a")
    p.add_argument("b")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    a = vars(args)
    inputs = []
    for key in ("input", "source", "target", "a", "b"):
        if a.get(key):
            inputs.append(a[key])
    inputs += a.get("inputs") or []
    cfg = RunConfig(
        command=args.command,
        inputs=inputs,
        output=args.output,
        n_points=args.n_points,
        k_neighbors=args.k_neighbors,
        eps=args.eps,
        seed=args.seed,
        trials=a.get("trials", 16),
        noise_sigma=a.get("noise", 0.0),
        method=a.get("method", estimation.GEOMETRIC),
        raw_logits=a.get("raw_logits", False),
        covariant=a.get("covariant", False),
        anchor_axis=a.get("anchor_axis", "column"),
        estimate_normals=a.get("estimate_normals", False),
        centers=a.get("centers"),
        m=a.get("m"),
        count=a.get("count", 8),
        weights=a.get("weights", "dirichlet"),
        alpha=a.get("alpha", 0.1),
        max_iter=a.get("max_iter", 2000),
        tol=a.get("tol", 1e-7),
        use_fixtures=a.get("fixtures", False),
        inject_fault=a.get("inject_fault", False),
        dump_distances=a.get("dump_distances"),
        dump_relation=a.get("dump_relation"),
    )
    if a.get("methods"):
        cfg.methods = list(a["methods"])
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ValueError as exc:
        parser.error(str(exc))
    return cli_run(cfg)


if __name__ == "__main__":
    sys.exit(main())
