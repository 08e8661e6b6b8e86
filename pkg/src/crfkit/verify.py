"""Numerical invariance suite run by ``crfkit verify``.

Each check draws random rotations, measures the largest deviation from an
exact identity and compares it against a fixed tolerance. Where a module's
error contract applies instead (e.g. normals of a collinear cloud), the check
passes when the same error is raised for the cloud and for its rotated copy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import distribution, estimation, frames, sampling
from .cloud import PointCloud
from .errors import DegenerateConfiguration, DegenerateNeighborhood
from .geom import as_rng, is_rotation, random_rotation, rotation_about_z

# perturbation added by --inject-fault; far above every tolerance below
FAULT = 1e-6


@dataclass
class Check:
    name: str
    residual: float
    tol: float
    note: str = ""

    @property
    def passed(self) -> bool:
        # tol == 0 demands exact equality
        return bool(self.residual < self.tol or (self.tol == 0 and self.residual == 0))

    def line(self) -> str:
        status = "ok  " if self.passed else "FAIL"
        note = f"  ({self.note})" if self.note else ""
        return f"{status} {self.name:<34s} residual={self.residual:.3e}  tol={self.tol:.0e}{note}"


def _unit_rows(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _queries(cloud: PointCloud, rng, count: int) -> np.ndarray:
    idx = rng.choice(len(cloud), size=min(count, len(cloud)), replace=False)
    return np.sort(idx)


def _rank(points, rel_tol=1e-6) -> int:
    s = np.linalg.svd(points, compute_uv=False)
    return int(np.sum(s > rel_tol * s[0])) if s[0] > 0 else 0


def _generic(q, eps) -> bool:
    w = q / np.linalg.norm(q)
    return np.linalg.norm(q) > eps and np.hypot(w[0], w[1]) > eps


def check_rz(rng) -> list[Check]:
    angles = rng.uniform(-10.0, 10.0, (200, 2))
    ortho = comm = 0.0
    for a, b in angles:
        ra, rb = rotation_about_z(a), rotation_about_z(b)
        ortho = max(ortho, np.abs(ra.T @ ra - np.eye(3)).max(), abs(np.linalg.det(ra) - 1.0))
        comm = max(comm, np.abs(ra @ rb - rb @ ra).max(), np.abs(ra @ rb - rotation_about_z(a + b)).max())
    return [Check("geom.rz_is_rotation", ortho, 1e-12), Check("geom.rz_subgroup", comm, 1e-12)]


def check_pcrf(cloud, rng, eps, n_queries) -> list[Check]:
    pts = cloud.points
    z_inv = conj = fact = 0.0
    used = 0
    for i in _queries(cloud, rng, n_queries):
        q = pts[i]
        if not _generic(q, eps):
            continue
        used += 1
        theta = rng.uniform(-np.pi, np.pi)
        rz = rotation_about_z(theta)
        b = frames.pcrf_basis(q, eps)
        z_inv = max(z_inv, np.abs(frames.pcrf_basis(rz @ q, eps).transform(pts @ rz.T) - b.transform(pts)).max())
        r = random_rotation(rng)
        th = frames.factor_rotation(r, q, eps)
        lhs = frames.pcrf_basis(r @ q, eps).transform(pts @ r.T)
        conj = max(conj, np.abs(lhs - b.transform(pts) @ rotation_about_z(th).T).max())
        fact = max(fact, frames.factor_residual(r, q, eps))
    note = f"{used} queries"
    return [
        Check("frames.pcrf_z_invariance", z_inv, 1e-10, note),
        Check("frames.pcrf_conjugation", conj, 1e-9, note),
        Check("frames.pcrf_factorization", fact, 1e-9, note),
    ]


def check_crf(cloud, normals, rng, eps, n_queries, inject_fault=False) -> list[Check]:
    pts = cloud.points
    inv = equi = own = 0.0
    for i in _queries(cloud, rng, n_queries):
        q, n = pts[i], normals[i]
        r = random_rotation(rng)
        b = frames.crf_basis(q, n, eps)
        b_rot = frames.crf_basis(r @ q, r @ n, eps)
        moved = pts @ r.T
        if inject_fault:
            moved = moved + FAULT
        inv = max(inv, np.abs(b_rot.transform(moved) - b.transform(pts)).max())
        equi = max(equi, np.abs(b_rot.basis - r @ b.basis).max())
        own = max(own, abs(b_rot.transform(r @ q)[2] - b.transform(q)[2]))
    return [
        Check("frames.crf_invariance", inv, 1e-9),
        Check("frames.crf_equivariance", equi, 1e-9),
        Check("frames.crf_query_image", own, 1e-10),
    ]


def check_subgroup(cloud, rng, eps, count) -> Check:
    worst = 0.0
    for i in _queries(cloud, rng, count):
        q = cloud.points[i]
        r, x = random_rotation(rng), random_rotation(rng)
        eta_x = frames.subgroup_map(x, q, eps)
        theta = frames.factor_rotation(r, x @ q, eps)
        worst = max(worst, np.abs(frames.subgroup_map(r @ x, q, eps) - rotation_about_z(theta) @ eta_x).max())
    return Check("frames.subgroup_equivariance", worst, 1e-9)


def check_normals(cloud, rng, k, eps) -> Check:
    r = random_rotation(rng)
    k = min(k, len(cloud))
    try:
        est = frames.estimate_normals(cloud.without_normals(), k, eps)
    except DegenerateNeighborhood:
        try:
            frames.estimate_normals(cloud.without_normals().rotated(r), k, eps)
        except DegenerateNeighborhood:
            return Check("frames.normals_equivariance", 0.0, 1e-9, "degenerate on both; error contract")
        return Check("frames.normals_equivariance", np.inf, 1e-9, "degenerate only before rotation")
    est_rot = frames.estimate_normals(cloud.without_normals().rotated(r), k, eps)
    # sign ties are broken by a rule that does not rotate with the cloud
    decided = np.abs(np.einsum("ij,ij->i", est.normals, est.points)) > 1e-6
    if not decided.any():
        return Check("frames.normals_equivariance", 0.0, 1e-9, "all points sign-tied; skipped")
    resid = np.abs(est_rot.normals[decided] - est.normals[decided] @ r.T).max()
    return Check("frames.normals_equivariance", resid, 1e-9, f"{decided.sum()} untied points")


def check_sampling(cloud, rng, m, k) -> list[Check]:
    pts = cloud.points
    n = len(pts)
    r = random_rotation(rng)
    rot = pts @ r.T
    m = min(m, n)
    k = min(k, n)
    checks = []
    d, d_rot = sampling.pairwise_distances(pts), sampling.pairwise_distances(rot)
    checks.append(Check("sampling.pairwise_invariance", np.abs(d - d_rot).max(), 1e-12))
    sel = sampling.fps(pts, m)
    checks.append(Check("sampling.fps_equivariance", float(sel != sampling.fps(rot, m)), 0.5, f"m={m}"))
    groups = sampling.knn(pts, sel, k)
    checks.append(Check("sampling.knn_equivariance", float(groups != sampling.knn(rot, sel, k)), 0.5, f"k={k}"))
    other = pts[sel] + 0.01 * rng.standard_normal((m, 3))
    checks.append(
        Check("sampling.chamfer_invariance", abs(sampling.chamfer(pts, other) - sampling.chamfer(rot, other @ r.T)), 1e-12)
    )
    lin = rng.standard_normal((m, n))
    a = sampling.attention_sample(pts, lin).points
    a_rot = sampling.attention_sample(rot, lin).points
    checks.append(Check("sampling.attention_equivariance", np.abs(a_rot - a @ r.T).max(), 1e-10))
    if n >= 2:
        s = distribution.build_mixture(pts).sigma
        s_rot = distribution.build_mixture(rot).sigma
        checks.append(Check("distribution.sigma_invariance", abs(s - s_rot), 1e-12))
    return checks


def check_raw_logits(cloud, rng) -> Check:
    n = len(cloud)
    j = rng.integers(n, size=4)
    logits = np.full((4, n), -1000.0)
    logits[np.arange(4), j] = 1000.0
    out = sampling.attention_sample(cloud, logits=logits).points
    return Check("sampling.attention_raw_logits", np.abs(out - cloud.points[j]).max(), 1e-6)


def check_relation(rng, n=32, c=6, d=4) -> list[Check]:
    f = rng.standard_normal((n, c))
    pa, pb, psi = rng.standard_normal((c, d)), rng.standard_normal((c, d)), rng.standard_normal((c, c))
    f_hat, w = sampling.relation_module(f, pa, pb, psi)
    rows = np.abs(w.sum(axis=1) - 1.0).max()
    zero_hat, _ = sampling.relation_module(f, pa, pb, np.zeros((c, c)))
    perm = rng.permutation(n)
    p_hat, p_w = sampling.relation_module(f[perm], pa, pb, psi)
    perm_res = max(np.abs(p_hat - f_hat[perm]).max(), np.abs(p_w - w[np.ix_(perm, perm)]).max())
    return [
        Check("sampling.relation_row_sums", rows, 1e-12),
        Check("sampling.relation_zero_psi", np.abs(zero_hat - f).max(), 0.0, "exact"),
        Check("sampling.relation_permutation", perm_res, 1e-12),
    ]


def check_distribution(cloud, normals, rng, eps) -> list[Check]:
    if len(cloud) < 3:
        return []
    if _rank(cloud.points) < 2:
        # a cloud on a line through the origin has no frame that rotates with it
        note = "skipped: cloud lies on a line through the origin"
        return [Check("distribution.sample_covariance", 0.0, 1e-10, note)]
    dist = distribution.build_mixture(cloud)
    weights = distribution.dirichlet_weights(len(cloud), 0.1, rng)
    r = random_rotation(rng)
    dist_rot = distribution.build_mixture(cloud.points @ r.T)
    seed = int(rng.integers(2**31))
    p = distribution.sample_point(dist, weights, seed, covariant=True)
    p_rot = distribution.sample_point(dist_rot, weights, seed, covariant=True)
    checks = [Check("distribution.sample_covariance", np.abs(p_rot - r @ p).max(), 1e-10)]
    with_n = PointCloud(cloud.points, normals)
    f = distribution.sample_rotation(dist, with_n, weights, seed, eps, covariant=True)
    f_rot = distribution.sample_rotation(dist_rot, with_n.rotated(r), weights, seed, eps, covariant=True)
    checks.append(Check("distribution.rotation_equivariance", np.abs(f_rot.basis - r @ f.basis).max(), 1e-8))
    checks.append(Check("distribution.rotation_is_so3", 0.0 if is_rotation(f.basis, 1e-10) else np.inf, 1e-10))
    return checks


def check_estimation(cloud, normals, rng, eps, trials) -> list[Check]:
    with_n = PointCloud(cloud.points, normals)
    worst_r = worst_ad = 0.0
    for _ in range(trials):
        r = random_rotation(rng)
        rep = estimation.estimate_rotation(with_n.rotated(r), with_n, eps=eps)
        worst_r = max(worst_r, np.abs(rep.predicted_rotation - r.T).max())
        worst_ad = max(worst_ad, rep.ad)
    checks = [
        Check("estimation.exact_recovery", worst_r, 1e-8, f"{trials} trials"),
        Check("estimation.exact_recovery_ad", worst_ad, 1e-8),
    ]
    r = random_rotation(rng)
    rank = _rank(cloud.points)
    try:
        kab = estimation.kabsch_rotation(cloud.points, cloud.points @ r.T)
        checks.append(Check("estimation.kabsch_recovery", np.abs(kab - r).max(), 1e-10))
    except DegenerateConfiguration:
        ok = rank < 2
        checks.append(Check("estimation.kabsch_recovery", 0.0 if ok else np.inf, 1e-10, f"degenerate, rank {rank}"))
    return checks


def run_suite(
    cloud: PointCloud,
    *,
    seed=0,
    k: int = 16,
    eps: float = frames.DEFAULT_EPS,
    n_queries: int = 64,
    trials: int = 16,
    raw_logits: bool = False,
    inject_fault: bool = False,
) -> list[Check]:
    """Run every invariance check on ``cloud`` and return the results.

    The cloud's own normals feed the frame checks; without normals, estimated
    normals are used, and failing that, random unit directions (the frame
    identities hold for any direction field that rotates with the cloud).
    """
    rng = as_rng(seed)
    normals = cloud.normals
    note = "cloud normals"
    if normals is None:
        try:
            normals = frames.estimate_normals(cloud, min(k, len(cloud)), eps).normals
            note = "estimated normals"
        except (DegenerateNeighborhood, ValueError):
            normals = _unit_rows(rng, len(cloud))
            note = "random directions"
    checks = check_rz(rng)
    checks += check_pcrf(cloud, rng, eps, n_queries)
    crf = check_crf(cloud, normals, rng, eps, n_queries, inject_fault)
    for c in crf:
        c.note = note
    checks += crf
    checks.append(check_subgroup(cloud, rng, eps, n_queries))
    if len(cloud) >= 3:
        checks.append(check_normals(cloud, rng, k, eps))
    checks += check_sampling(cloud, rng, 32, k)
    if raw_logits:
        checks.append(check_raw_logits(cloud, rng))
    checks += check_relation(rng)
    checks += check_distribution(cloud, normals, rng, eps)
    checks += check_estimation(cloud, normals, rng, eps, trials)
    return checks
