"""Randomized solvers for A x = lambda B x: two-pass, single-pass, and Nystrom.

All three share the B-weighted range finder and return B-orthonormal
eigenvectors (U^T B U = I) with the low-rank form A ~ (BU) Lambda (BU)^T,
plus exact matvec accounting split by operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.linalg.lapack import dpstrf

from . import borth
from .operators import ConfigError, IllConditionedError, LinearMap, NumericalError, SpdOperator
from .sketch import RangeResult, SketchConfig, derive_seed, gaussian_matrix, range_finder_b

_SYMMETRY_PROBES = 3


@dataclass
class GhepSolution:
    """Approximate dominant eigenpairs of a pencil (A, B).

    ``eigenvalues`` is length k, sorted descending; ``counts`` holds the
    A-applies, B-applies and B-solves consumed by the algorithm proper
    (symmetry-probe applies are excluded and reported in diagnostics, as are
    any extra B-applies triggered by re-orthogonalization).
    """

    U: np.ndarray
    eigenvalues: np.ndarray
    method: str
    counts: dict
    seed: int
    k: int
    p: int
    diagnostics: dict = field(default_factory=dict)
    basis: Optional[borth.BOrthoBasis] = None

    def report_dict(self) -> dict:
        """JSON-serializable summary (drops the dense factors)."""
        return {
            "method": self.method,
            "k": self.k,
            "p": self.p,
            "seed": self.seed,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "counts": {key: int(v) for key, v in self.counts.items()},
            "diagnostics": {
                key: v for key, v in self.diagnostics.items() if not isinstance(v, np.ndarray)
            },
        }


class _CountDelta:
    """Snapshot A/B counters and report the consumption of a code region."""

    def __init__(self, A: LinearMap, B: SpdOperator) -> None:
        self.A, self.B = A, B
        self.a0 = A.matvec_count
        self.b0 = B.matvec_count
        self.s0 = B.solve_count

    def counts(self) -> dict:
        return {
            "a_applies": self.A.matvec_count - self.a0,
            "b_applies": self.B.matvec_count - self.b0,
            "b_solves": self.B.solve_count - self.s0,
        }


def _check_symmetry(A: LinearMap, seed: int, tol: float = 1e-8) -> int:
    """Probe |x^T A y - y^T A x| on a few random pairs; returns applies spent."""
    n = A.dim_in
    if A.dim_out != n:
        raise ConfigError("A must be square")
    probes = gaussian_matrix(n, 2 * _SYMMETRY_PROBES, derive_seed(seed, 0x51A))
    X, Ynd = probes[:, :_SYMMETRY_PROBES], probes[:, _SYMMETRY_PROBES:]
    AX = A.apply(X)
    AY = A.apply(Ynd)
    for j in range(_SYMMETRY_PROBES):
        lhs = X[:, j] @ AY[:, j]
        rhs = Ynd[:, j] @ AX[:, j]
        scale = abs(lhs) + abs(rhs) + np.linalg.norm(AX[:, j]) * np.linalg.norm(Ynd[:, j])
        if abs(lhs - rhs) > tol * max(scale, 1e-300):
            raise ConfigError("A failed the symmetry probe; GHEP solvers need symmetric A")
    return 2 * _SYMMETRY_PROBES


def _validate(A: LinearMap, B: SpdOperator, cfg: SketchConfig) -> None:
    if A.dim_in != B.dim or A.dim_out != B.dim:
        raise ConfigError("A and B dimensions do not agree")
    if cfg.r > B.dim:
        raise ConfigError(f"sketch size k+p={cfg.r} exceeds n={B.dim}")


def _sort_truncate(lam: np.ndarray, S: np.ndarray, k: int, order: str):
    idx = np.argsort(-np.abs(lam) if order == "abs" else -lam, kind="stable")
    lam, S = lam[idx], S[:, idx]
    kk = min(k, lam.size)
    return lam[:kk], S[:, :kk], lam


def _base_diagnostics(rng: RangeResult, probe_applies: int, qr_alg: str) -> dict:
    basis = rng.basis
    return {
        "qr_alg": qr_alg,
        "effective_rank": int(basis.n_kept),
        "reorth_b_applies": int(basis.n_reorth_applies),
        "symmetry_probe_applies": probe_applies,
        "fast_path": rng.Ybar is None,
    }


def ghep_two_pass(
    A: LinearMap,
    B: SpdOperator,
    cfg: SketchConfig,
    qr_alg: str = "mgs_reorth",
    c_apply=None,
    order: str = "value",
) -> GhepSolution:
    """Two-pass solver: T = Q^T A Q from a second round of A-applies.

    Costs 2(k+p) A-applies, (k+p) B-applies and (k+p) B-solves (standard
    path, no re-orthogonalization).  T is symmetrized before the dense
    eigensolve; the top k of the k+p computed modes are kept.
    """
    _validate(A, B, cfg)
    probe = _check_symmetry(A, cfg.seed)
    delta = _CountDelta(A, B)
    rng = range_finder_b(A, B, cfg, qr_alg=qr_alg, c_apply=c_apply)
    basis = rng.basis if bool(rng.basis.rank_flags.all()) else rng.basis.compact()
    Q = basis.Q
    T = Q.T @ A.apply(Q)
    T = (T + T.T) / 2.0
    lam, S = np.linalg.eigh(T)
    lam, S, lam_full = _sort_truncate(lam, S, cfg.k, order)
    U = Q @ S
    diag = _base_diagnostics(rng, probe, qr_alg)
    diag["projected_eigenvalues_full"] = [float(v) for v in np.sort(lam_full)[::-1]]
    return GhepSolution(U, lam, "two_pass", delta.counts(), cfg.seed, cfg.k, cfg.p, diag, basis)


def ghep_single_pass(
    A: LinearMap,
    B: SpdOperator,
    cfg: SketchConfig,
    qr_alg: str = "mgs_reorth",
    order: str = "value",
) -> GhepSolution:
    """Single-pass solver: T ~ (Omega^T B Q)^{-1} (Omega^T Ybar) (Q^T B Omega)^{-1}.

    Reuses Ybar = A*Omega so only (k+p) A-applies are spent; F = Q^T B Omega
    comes from the cached BQ at O((k+p)^3) extra flops.  Reports sigma_min(F)
    and sigma_max(Omega) so the two-pass/single-pass eigenvalue gap bound can
    be evaluated.
    """
    _validate(A, B, cfg)
    probe = _check_symmetry(A, cfg.seed)
    delta = _CountDelta(A, B)
    rng = range_finder_b(A, B, cfg, qr_alg=qr_alg, need_ybar=True)
    basis = rng.basis if bool(rng.basis.rank_flags.all()) else rng.basis.compact()
    Q, BQ = basis.Q, basis.WQ
    F = BQ.T @ rng.Omega  # Q^T B Omega, no extra B-applies
    fvals = np.linalg.svd(F, compute_uv=False)
    if fvals[-1] <= 1e-10 * fvals[0]:
        raise IllConditionedError(
            "F = Q^T B Omega is numerically singular (sigma_min/sigma_max <= 1e-10); "
            "use the two-pass solver"
        )
    G = rng.Omega.T @ rng.Ybar
    if F.shape[0] == F.shape[1]:
        T = np.linalg.solve(F.T, G)
        T = np.linalg.solve(F.T, T.T).T
    else:
        Fp = np.linalg.pinv(F)
        T = Fp.T @ G @ Fp
    T = (T + T.T) / 2.0
    lam, S = np.linalg.eigh(T)
    lam, S, lam_full = _sort_truncate(lam, S, cfg.k, order)
    U = Q @ S
    diag = _base_diagnostics(rng, probe, qr_alg)
    diag["projected_eigenvalues_full"] = [float(v) for v in np.sort(lam_full)[::-1]]
    diag["sigma_min_F"] = float(fvals[-1])
    diag["sigma_max_omega"] = float(np.linalg.svd(rng.Omega, compute_uv=False)[0])
    return GhepSolution(U, lam, "single_pass", delta.counts(), cfg.seed, cfg.k, cfg.p, diag, basis)


def _psd_half_factor(T: np.ndarray, r: int) -> tuple[np.ndarray, bool, int]:
    """Cholesky half of T, falling back to pivoted Cholesky on the positive part.

    Returns (H, fallback_used, dropped) with T ~ H H^T restricted to pivots
    above 1e-12 * trace(T) / r.
    """
    try:
        L = scipy.linalg.cholesky(T, lower=True, check_finite=False)
        return L, False, 0
    except scipy.linalg.LinAlgError:
        pass
    tol = 1e-12 * max(np.trace(T), 0.0) / max(r, 1)
    c, piv, rank, info = dpstrf(T, lower=1, tol=tol)
    if info < 0:
        raise NumericalError(f"pivoted Cholesky failed with info={info}")
    rank = int(rank)
    if rank == 0:
        raise NumericalError("projected matrix Q^T A Q has no positive part; Nystrom needs A PSD on range(Q)")
    perm = np.asarray(piv, dtype=int) - 1
    L = np.tril(c)[:, :rank]
    H = np.zeros((T.shape[0], rank))
    H[perm, :] = L  # T ~ H H^T since P^T T P = L L^T
    return H, True, T.shape[0] - rank


def ghep_nystrom(
    A: LinearMap,
    B: SpdOperator,
    cfg: SketchConfig,
    qr_alg: str = "mgs_reorth",
    c_apply=None,
    order: str = "value",
) -> GhepSolution:
    """Nystrom solver: A ~ (AQ)(Q^T A Q)^{-1}(AQ)^T, re-expressed as (BU) Lambda (BU)^T.

    Factorizes T = L L^T, forms M = A Q L^{-T}, B^{-1}-orthonormalizes M
    (yielding the companion Qhat with Qhat^T B Qhat = I), and squares the
    singular values of the small R factor.  One implicit power-iteration step
    over the two-pass solver, at the price of a second round of B-solves:
    2(k+p) A-applies, (k+p) B-applies, 2(k+p) B-solves.
    """
    _validate(A, B, cfg)
    probe = _check_symmetry(A, cfg.seed)
    delta = _CountDelta(A, B)
    rng = range_finder_b(A, B, cfg, qr_alg=qr_alg, c_apply=c_apply)
    basis = rng.basis if bool(rng.basis.rank_flags.all()) else rng.basis.compact()
    Q = basis.Q
    AQ = A.apply(Q)
    T = Q.T @ AQ
    T = (T + T.T) / 2.0
    H, fallback, dropped = _psd_half_factor(T, cfg.r)
    if H.shape[0] == H.shape[1]:
        M = scipy.linalg.solve_triangular(H, AQ.T, lower=True, check_finite=False).T
    else:
        # Pseudo-inverse route on the positive part: M = AQ * H (H^T H)^{-1}.
        gram = H.T @ H
        M = np.linalg.solve(gram, (AQ @ H).T).T
    mbasis = borth.mgs_w_reorth(M, B.inverse_view())
    if not bool(mbasis.rank_flags.all()):
        mbasis = mbasis.compact()
    UM, sig, _ = np.linalg.svd(mbasis.R)
    lam_full = sig**2
    kk = min(cfg.k, lam_full.size)
    U = mbasis.WQ @ UM[:, :kk]  # WQ = B^{-1} Q_M satisfies (B^{-1}Q_M)^T B (B^{-1}Q_M) = I
    lam = lam_full[:kk]
    diag = _base_diagnostics(rng, probe, qr_alg)
    diag["projected_eigenvalues_full"] = [float(v) for v in lam_full]
    diag["cholesky_fallback"] = bool(fallback)
    diag["dropped_dimensions"] = int(dropped)
    diag["reorth_b_solves"] = int(mbasis.n_reorth_applies)
    return GhepSolution(U, lam, "nystrom", delta.counts(), cfg.seed, cfg.k, cfg.p, diag, basis)


def low_rank_apply(sol: GhepSolution, B: SpdOperator, X) -> np.ndarray:
    """Apply the decomposition (BU) Lambda (BU)^T to a block.

    Two B-applies plus small dense products; never forms the n-by-n matrix.
    """
    Xb = np.asarray(X, dtype=float)
    vec = Xb.ndim == 1
    if vec:
        Xb = Xb[:, None]
    if Xb.shape[0] != sol.U.shape[0]:
        raise ConfigError("block dimension does not match the solution")
    BX = B.apply(Xb)
    Z = sol.eigenvalues[:, None] * (sol.U.T @ BX)
    out = B.apply(sol.U @ Z)
    return out[:, 0] if vec else out
