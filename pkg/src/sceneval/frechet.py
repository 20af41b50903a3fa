"""Frechet distance between Gaussian fits of two embedding sets.

The score is ||mu_x - mu_y||^2 + Tr(C_x) + Tr(C_y) - 2 Tr((C_x C_y)^{1/2})
with unbiased (N-1) sample covariances. The matrix square-root trace is
computed through the stable symmetric route: eigendecompose C_x = Q L Q^T,
form S = L^{1/2} Q^T C_y Q L^{1/2} (symmetric PSD, similar to C_x C_y) and
sum the square roots of S's eigenvalues.

Symmetric eigendecompositions run through a self-contained cyclic Jacobi
solver up to JACOBI_DIM_LIMIT and through numpy's LAPACK binding beyond it
(the sweep loop costs O(d^3) per pass and stops being practical around a few
hundred dimensions); every decomposition, from either path, is validated
against its reconstruction before use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .store import EmbeddingSet

SYMMETRY_RTOL = 1e-8
EIG_CLAMP_RTOL = 1e-8
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
# Above this size the O(d^3)-per-sweep Jacobi loop costs minutes per matrix,
# so the validated decomposition falls back to LAPACK via numpy.
JACOBI_DIM_LIMIT = 160
FID_NEGATIVE_TOL = 1e-6
_COV_BLOCK = 1024


@dataclass(frozen=True, eq=False)
class GaussianStats:
    """Sample mean, symmetrized unbiased covariance, and sample count."""

    mean: np.ndarray
    cov: np.ndarray
    n: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValidationError("Gaussian stats need at least 2 samples")
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise ValidationError("covariance shape does not match mean")
        _check_symmetric(self.cov)
        self.mean.setflags(write=False)
        self.cov.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def _check_symmetric(a: np.ndarray, rtol: float = SYMMETRY_RTOL) -> None:
    scale = np.abs(a).max(initial=0.0)
    asym = np.abs(a - a.T).max(initial=0.0)
    if asym > rtol * max(scale, 1.0):
        raise ValidationError(f"matrix is not symmetric (max asymmetry {asym:g})")


def fit_gaussian(eset: EmbeddingSet) -> GaussianStats:
    """Sample mean and unbiased covariance of an embedding set."""
    if eset.n < 2:
        raise ValidationError(f"need at least 2 rows to fit a Gaussian, got {eset.n}")
    x = np.ascontiguousarray(eset.vectors, dtype=np.float64)
    mean = x.mean(axis=0)
    centered = x - mean
    # Fixed serial block order keeps the accumulation deterministic.
    acc = np.zeros((eset.dim, eset.dim), dtype=np.float64)
    for lo in range(0, eset.n, _COV_BLOCK):
        blk = centered[lo : lo + _COV_BLOCK]
        acc += blk.T @ blk
    cov = acc / (eset.n - 1)
    cov = 0.5 * (cov + cov.T)
    return GaussianStats(mean=mean, cov=cov, n=eset.n)


def _tournament_rounds(d: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Round-robin pairing schedule covering every index pair once per sweep.

    Each round's pairs are disjoint, so their rotations commute and a whole
    round can be applied as one batched update.
    """
    players = list(range(d))
    if d % 2:
        players.append(-1)  # bye slot
    n = len(players)
    rounds = []
    order = players[1:]
    for _ in range(n - 1):
        arrangement = [players[0]] + order
        ps, rs = [], []
        for i in range(n // 2):
            x, y = arrangement[i], arrangement[n - 1 - i]
            if x < 0 or y < 0:
                continue
            ps.append(min(x, y))
            rs.append(max(x, y))
        rounds.append((np.array(ps, dtype=np.intp), np.array(rs, dtype=np.intp)))
        order = order[-1:] + order[:-1]
    return rounds


def _apply_round(work: np.ndarray, q: np.ndarray, p: np.ndarray, r: np.ndarray) -> None:
    apr = work[p, r]
    active = apr != 0.0
    if not active.any():
        return
    p, r, apr = p[active], r[active], apr[active]
    diff = work[r, r] - work[p, p]
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = diff / (2.0 * apr)
        t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
    t = np.where(theta == 0.0, 1.0, t)
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c

    row_p = work[p, :].copy()
    row_r = work[r, :].copy()
    work[p, :] = c[:, None] * row_p - s[:, None] * row_r
    work[r, :] = s[:, None] * row_p + c[:, None] * row_r
    col_p = work[:, p].copy()
    col_r = work[:, r].copy()
    work[:, p] = col_p * c[None, :] - col_r * s[None, :]
    work[:, r] = col_p * s[None, :] + col_r * c[None, :]
    work[p, r] = 0.0
    work[r, p] = 0.0

    qp = q[:, p].copy()
    qr = q[:, r].copy()
    q[:, p] = qp * c[None, :] - qr * s[None, :]
    q[:, r] = qp * s[None, :] + qr * c[None, :]


def jacobi_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    One sweep visits every index pair once, in round-robin rounds of disjoint
    pairs so each round is a single batched update. Returns (eigenvalues
    ascending, eigenvectors as columns). Convergence is declared when the
    off-diagonal Frobenius norm drops below JACOBI_TOL relative to the input
    norm; exceeding JACOBI_MAX_SWEEPS raises. The reconstruction
    Q diag(w) Q^T is validated to 1e-8 relative Frobenius.
    """
    a = np.array(a, dtype=np.float64)
    _check_symmetric(a)
    d = a.shape[0]
    q = np.eye(d)
    norm0 = float(np.sqrt((a * a).sum()))
    if d <= 1 or norm0 == 0.0:
        return np.diag(a).copy(), q

    def off_norm(m: np.ndarray) -> float:
        off = m.copy()
        np.fill_diagonal(off, 0.0)
        return float(np.sqrt((off * off).sum()))

    rounds = _tournament_rounds(d)
    work = 0.5 * (a + a.T)
    converged = False
    for _ in range(JACOBI_MAX_SWEEPS):
        if off_norm(work) <= JACOBI_TOL * norm0:
            converged = True
            break
        for p, r in rounds:
            _apply_round(work, q, p, r)
    if not converged and off_norm(work) > JACOBI_TOL * norm0:
        raise NumericalError(
            f"Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )

    w = np.diag(work).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    q = q[:, order]

    recon = (q * w[None, :]) @ q.T
    err = float(np.sqrt(((recon - a) ** 2).sum()))
    if err > 1e-8 * norm0:
        raise NumericalError(
            f"eigendecomposition validation failed: relative error {err / norm0:g}"
        )
    return w, q


def validated_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition with a per-call reconstruction check.

    Uses the self-contained Jacobi solver up to JACOBI_DIM_LIMIT and LAPACK
    (numpy.linalg.eigh) beyond it; both paths return ascending eigenvalues
    and are held to the same 1e-8 relative reconstruction tolerance.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape[0] <= JACOBI_DIM_LIMIT:
        return jacobi_eigh(a)
    _check_symmetric(a)
    w, q = np.linalg.eigh(0.5 * (a + a.T))
    norm0 = float(np.sqrt((a * a).sum()))
    if norm0 > 0.0:
        recon = (q * w[None, :]) @ q.T
        err = float(np.sqrt(((recon - a) ** 2).sum()))
        if err > 1e-8 * norm0:
            raise NumericalError(
                f"eigendecomposition validation failed: relative error {err / norm0:g}"
            )
    return w, q


def _clamp_psd_eigenvalues(w: np.ndarray, context: str) -> np.ndarray:
    lam_max = float(w.max(initial=0.0))
    floor = -EIG_CLAMP_RTOL * max(lam_max, 0.0)
    if float(w.min(initial=0.0)) < floor:
        raise NumericalError(
            f"{context}: eigenvalue {w.min():g} below PSD clamp tolerance {floor:g}"
        )
    return np.clip(w, 0.0, None)


def sqrtm_product_trace(a: np.ndarray, b: np.ndarray) -> float:
    """Tr((a b)^{1/2}) for symmetric PSD a, b via the symmetric route."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("inputs must be square matrices of equal shape")
    _check_symmetric(a)
    _check_symmetric(b)
    wa, qa = validated_eigh(a)
    wa = _clamp_psd_eigenvalues(wa, "first covariance")
    sa = np.sqrt(wa)
    inner = qa.T @ b @ qa
    s = sa[:, None] * inner * sa[None, :]
    s = 0.5 * (s + s.T)
    ws, _ = validated_eigh(s)
    ws = _clamp_psd_eigenvalues(ws, "product matrix")
    return float(np.sqrt(ws).sum())


def fid_from_stats(x: GaussianStats, y: GaussianStats) -> float:
    """Frechet distance between two Gaussian fits."""
    if x.dim != y.dim:
        raise ValidationError(f"dim mismatch: {x.dim} vs {y.dim}")
    delta = x.mean - y.mean
    value = (
        float((delta * delta).sum())
        + float(np.trace(x.cov))
        + float(np.trace(y.cov))
        - 2.0 * sqrtm_product_trace(x.cov, y.cov)
    )
    if value < -FID_NEGATIVE_TOL:
        raise NumericalError(f"FID evaluated to {value:g}, beyond round-off tolerance")
    return max(value, 0.0)


def fid(x: EmbeddingSet, y: EmbeddingSet) -> float:
    if x.dim != y.dim:
        raise ValidationError(f"dim mismatch: {x.dim} vs {y.dim}")
    return fid_from_stats(fit_gaussian(x), fit_gaussian(y))


def covariance_rank(stats: GaussianStats) -> int:
    """Numerical rank of the covariance (eigenvalues above the PSD clamp)."""
    w, _ = validated_eigh(stats.cov)
    lam_max = float(w.max(initial=0.0))
    if lam_max <= 0.0:
        return 0
    return int((w > EIG_CLAMP_RTOL * lam_max).sum())
