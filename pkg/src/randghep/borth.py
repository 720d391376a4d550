"""QR factorizations in a weighted inner product <x, y>_W = y^T W x.

Four algorithms: plain modified Gram-Schmidt (MGS), MGS with Rutishauser-style
re-orthogonalization (MGS-R), CholQR, and PreCholQR.  All return the factor Q,
the cached product W*Q, and the upper-triangular R.  Householder and Givens
variants are ruled out by the weighted inner product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .operators import ConfigError, IllConditionedError, SpdOperator

EPS = np.finfo(float).eps  # unit roundoff of double precision, ~2.22e-16

MAX_REORTH_SWEEPS = 5


@dataclass
class BOrthoBasis:
    """Weighted-orthonormal factorization Y = Q R with Q^T W Q = I.

    ``rank_flags[j]`` is False where column j was declared numerically
    dependent: that column of Q/WQ is zeroed and R[j, j] = 0.  Columns are
    zeroed in place rather than removed so indexing is preserved; use
    ``compact()`` to drop them.
    """

    Q: np.ndarray
    WQ: np.ndarray
    R: np.ndarray
    rank_flags: np.ndarray
    n_w_applies: int = 0
    n_reorth_applies: int = 0

    @property
    def n_kept(self) -> int:
        return int(self.rank_flags.sum())

    def compact(self) -> "BOrthoBasis":
        """Drop rank-deficient columns (the QR identity no longer applies)."""
        keep = np.flatnonzero(self.rank_flags)
        return BOrthoBasis(
            Q=self.Q[:, keep],
            WQ=self.WQ[:, keep],
            R=self.R[np.ix_(keep, keep)],
            rank_flags=np.ones(keep.size, dtype=bool),
            n_w_applies=self.n_w_applies,
            n_reorth_applies=self.n_reorth_applies,
        )


def _check_shapes(Y: np.ndarray, W: SpdOperator) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ConfigError("Y must be a 2-D block of columns")
    n, r = Y.shape
    if r > n:
        raise ConfigError(f"more columns ({r}) than rows ({n})")
    if W.dim != n:
        raise ConfigError(f"weight operator dimension {W.dim} does not match rows {n}")
    return Y


def _mgs(Y: np.ndarray, W: SpdOperator, reorth: bool, basis: BOrthoBasis | None = None) -> BOrthoBasis:
    """Shared MGS core.

    The W-image of the working column is tracked through the projection
    updates (W(q - s*q_i) = Wq - s*Wq_i), so the mandatory first sweep costs
    one W-apply per column; every extra re-orthogonalization sweep recomputes
    the image fresh, which is what restores orthogonality for collapsing
    columns and what makes re-orthogonalization cost extra W-applies.
    """
    Y = _check_shapes(Y, W)
    n, r_new = Y.shape
    if basis is not None:
        Q = np.hstack([basis.Q, Y.astype(float)])
        WQ = np.hstack([basis.WQ, np.zeros((n, r_new))])
        r0 = basis.Q.shape[1]
        r = r0 + r_new
        R = np.zeros((r, r))
        R[:r0, :r0] = basis.R
        flags = np.concatenate([basis.rank_flags, np.ones(r_new, dtype=bool)])
        base_applies, reorth_applies = basis.n_w_applies, basis.n_reorth_applies
    else:
        Q = Y.astype(float).copy()
        WQ = np.zeros_like(Q)
        r0, r = 0, Y.shape[1]
        R = np.zeros((r, r))
        flags = np.ones(r, dtype=bool)
        base_applies, reorth_applies = 0, 0

    for k in range(r0, r):
        q = Q[:, k].copy()
        qhat = W.apply(q)
        base_applies += 1
        t = float(np.sqrt(max(qhat @ q, 0.0)))
        tt = t
        sweeps = 0
        collapsing = t == 0.0
        while t > 0.0:
            sweeps += 1
            for i in range(k):
                s = WQ[:, i] @ q
                R[i, k] += s
                q -= s * Q[:, i]
                qhat -= s * WQ[:, i]
            if sweeps > 1:
                qhat = W.apply(q)
                reorth_applies += 1
            tt = float(np.sqrt(max(qhat @ q, 0.0)))
            if tt <= 10.0 * EPS * t:
                tt = 0.0
                collapsing = False
                break
            collapsing = tt < t / 10.0
            if reorth and collapsing and sweeps < MAX_REORTH_SWEEPS:
                t = tt
                continue
            break

        if tt == 0.0 or (reorth and collapsing):
            # Dependent column: zero it, keep the index.
            R[k, k] = 0.0
            flags[k] = False
            Q[:, k] = 0.0
            WQ[:, k] = 0.0
        else:
            R[k, k] = tt
            Q[:, k] = q / tt
            WQ[:, k] = qhat / tt

    return BOrthoBasis(Q, WQ, R, flags, base_applies, reorth_applies)


def mgs_w(Y: np.ndarray, W: SpdOperator) -> BOrthoBasis:
    """Modified Gram-Schmidt with W-inner products, single sweep per column.

    Cheap baseline: one W-apply per column, but Q loses W-orthogonality on
    ill-conditioned input.
    """
    return _mgs(Y, W, reorth=False)


def mgs_w_reorth(Y: np.ndarray, W: SpdOperator, basis: BOrthoBasis | None = None) -> BOrthoBasis:
    """MGS with Rutishauser re-orthogonalization (MGS-R).

    A column is re-projected against its predecessors while its W-norm keeps
    collapsing (new norm tt < t/10 but tt > 10*eps*t); a column whose norm
    falls to 10*eps of its running reference is declared dependent and zeroed.
    R accumulates the coefficients of every sweep, so ||QR - Y|| stays at
    machine precision even for numerically rank-deficient input.  The sweep
    loop is capped at MAX_REORTH_SWEEPS; a column still collapsing at the cap
    is flagged dependent.

    Passing ``basis`` appends new columns to an existing factorization
    (used when growing a sketch), leaving the old columns untouched.
    """
    return _mgs(Y, W, reorth=True, basis=basis)


def chol_qr_w(Y: np.ndarray, W: SpdOperator) -> BOrthoBasis:
    """CholQR with W-inner products: Z = WY, C = Y^T Z, R = chol(C), Q = Y R^{-1}.

    Fast and cache-friendly but squares the condition number through the Gram
    matrix; Cholesky breakdown raises IllConditionedError pointing at
    pre_chol_qr_w / mgs_w_reorth.
    """
    Y = _check_shapes(Y, W)
    Z = W.apply(Y)
    C = Y.T @ Z
    C = (C + C.T) / 2.0
    breakdown = None
    try:
        R = scipy.linalg.cholesky(C, lower=False, check_finite=False)
        d = np.diag(R)
        # pivots at roundoff level are breakdown even if LAPACK kept them positive
        if d.size and (d.min() / d.max()) ** 2 <= 10.0 * EPS:
            breakdown = "Gram matrix pivots fell to roundoff level"
    except scipy.linalg.LinAlgError:
        breakdown = "Gram matrix Cholesky factorization failed"
    if breakdown is not None:
        raise IllConditionedError(
            f"{breakdown} (input too ill-conditioned for CholQR); "
            "use pre_chol_qr_w or mgs_w_reorth"
        )
    Q = scipy.linalg.solve_triangular(R, Y.T, trans="T", lower=False, check_finite=False).T
    WQ = scipy.linalg.solve_triangular(R, Z.T, trans="T", lower=False, check_finite=False).T
    flags = np.ones(Y.shape[1], dtype=bool)
    return BOrthoBasis(Q, WQ, R, flags, n_w_applies=Y.shape[1])


def pre_chol_qr_w(Y: np.ndarray, W: SpdOperator) -> BOrthoBasis:
    """Pre-CholQR: an ordinary thin QR of Y, then CholQR of the orthonormal factor.

    The preconditioning step leaves CholQR with a matrix whose Gram conditioning
    is bounded by W's, so it survives inputs that break plain CholQR.
    """
    Y = _check_shapes(Y, W)
    Z, S = np.linalg.qr(Y)
    d = np.sign(np.diag(S))
    d[d == 0.0] = 1.0
    Z = Z * d
    S = d[:, None] * S
    inner = chol_qr_w(Z, W)
    R = inner.R @ S
    return BOrthoBasis(inner.Q, inner.WQ, R, inner.rank_flags, inner.n_w_applies)


def qr_metrics(Y: np.ndarray, basis: BOrthoBasis, W: SpdOperator) -> tuple[float, float, float, float]:
    """The four factorization-quality spectral norms.

    Returns (||QR - Y||, ||Q^T W Q - I||, ||Q^T W Y - R||, ||Y R^{-1} - Q||).
    W is re-applied fresh so the check is independent of the cached WQ.  The
    fourth metric is +inf when R is exactly singular.
    """
    Y = np.asarray(Y, dtype=float)
    Q, R = basis.Q, basis.R
    if Q.shape != Y.shape or R.shape != (Y.shape[1], Y.shape[1]):
        raise ConfigError("basis shapes do not match Y")
    WQ = W.apply(Q)
    WY = W.apply(Y)
    r = Y.shape[1]
    m1 = np.linalg.norm(Q @ R - Y, 2)
    m2 = np.linalg.norm(Q.T @ WQ - np.eye(r), 2)
    m3 = np.linalg.norm(Q.T @ WY - R, 2)
    if np.any(np.diag(R) == 0.0):
        m4 = np.inf
    else:
        Xr = scipy.linalg.solve_triangular(R, Y.T, trans="T", lower=False, check_finite=False).T
        m4 = np.linalg.norm(Xr - Q, 2)
    return float(m1), float(m2), float(m3), float(m4)
