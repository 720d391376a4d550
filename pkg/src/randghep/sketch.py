"""Seeded Gaussian test matrices, the B = I randomized SVD/EVD, and the
B-weighted range finder shared by all GHEP solvers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import borth
from .operators import ConfigError, IllConditionedError, LinearMap, SpdOperator

#: Identifier of the pseudo-random stream: one Philox4x64 counter stream per
#: column (key = seed, counter = column << 66), uniforms mapped to normals by
#: the Box-Muller transform.  Fixed so that equal seeds give bitwise-equal
#: matrices on every platform, independent of thread count, and so that a
#: matrix can be extended by columns without touching the existing ones.
GENERATOR_ID = "philox4x64-boxmuller/v1"

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, stream: int) -> int:
    """Deterministic 64-bit child seed (SplitMix64 finalizer on seed + stream)."""
    x = (int(seed) + (int(stream) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def gaussian_matrix(n: int, r: int, seed: int, first_col: int = 0) -> np.ndarray:
    """An n-by-r block of i.i.d. N(0, 1) entries from the named generator.

    ``first_col`` shifts the column streams: ``gaussian_matrix(n, r, s)`` and
    ``gaussian_matrix(n, q, s, first_col=r)`` side by side equal
    ``gaussian_matrix(n, r + q, s)`` bitwise.
    """
    if n < 1 or r < 1:
        raise ConfigError("gaussian_matrix needs n, r >= 1")
    out = np.empty((n, r))
    half = (n + 1) // 2
    for j in range(r):
        bits = np.random.Philox(key=int(seed) & _MASK64, counter=(first_col + j) << 66)
        gen = np.random.Generator(bits)
        u1 = 1.0 - gen.random(half)  # in (0, 1], keeps log finite
        u2 = gen.random(half)
        radius = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])
        out[:, j] = z[:n]
    return out


@dataclass(frozen=True)
class SketchConfig:
    """Sketch size: target rank k, oversampling p (r = k + p columns), seed."""

    k: int
    p: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("target rank k must be >= 1")
        if self.p < 0:
            raise ConfigError("oversampling p must be >= 0")

    @property
    def r(self) -> int:
        return self.k + self.p


@dataclass
class RangeResult:
    """Output of the B-weighted range finder.

    ``basis`` holds the B-orthonormal Q with cached BQ; ``Y = B^{-1} A Omega``
    is the sketched range, ``Ybar = A Omega`` is retained for the single-pass
    solver, and ``Omega`` is the Gaussian test matrix.
    """

    basis: borth.BOrthoBasis
    Y: np.ndarray
    Ybar: Optional[np.ndarray]
    Omega: np.ndarray


_QR_ALGORITHMS = {
    "mgs": borth.mgs_w,
    "mgs_reorth": borth.mgs_w_reorth,
    "cholqr": borth.chol_qr_w,
    "precholqr": borth.pre_chol_qr_w,
}

_QR_ALIASES = {"mgs-r": "mgs_reorth", "mgsr": "mgs_reorth", "pre-cholqr": "precholqr"}


def qr_algorithm(name: str):
    key = name.lower().replace(" ", "")
    key = _QR_ALIASES.get(key, key)
    try:
        return _QR_ALGORITHMS[key]
    except KeyError:
        raise ConfigError(f"unknown QR algorithm {name!r}; choose from {sorted(_QR_ALGORITHMS)}")


def randomized_svd(A: LinearMap, cfg: SketchConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank-k randomized SVD of A (standard inner product).

    Sketch Y = A*Omega, orthonormalize, project B = Q^T A, SVD the small
    matrix, lift the left factor.  Returns (U, sigma, V) with A ~ U diag(s) V^T.
    """
    m, n = A.dim_out, A.dim_in
    if cfg.r > min(m, n):
        raise ConfigError(f"sketch size k+p={cfg.r} exceeds min(m, n)={min(m, n)}")
    Omega = gaussian_matrix(n, cfg.r, cfg.seed)
    Y = A.apply(Omega)
    Q, _ = np.linalg.qr(Y)
    B_small = A.apply_transpose(Q).T
    Ut, sig, Vt = np.linalg.svd(B_small, full_matrices=False)
    U = Q @ Ut[:, : cfg.k]
    return U, sig[: cfg.k], Vt[: cfg.k].T


def randomized_evd(
    A: LinearMap, cfg: SketchConfig, mode: str = "two_pass", order: str = "value"
) -> tuple[np.ndarray, np.ndarray]:
    """Rank-k randomized eigendecomposition of a symmetric A (B = I).

    ``two_pass`` forms T = Q^T A Q with a second round of products; the
    ``single_pass`` variant reconstructs T ~ (Q^T Y)(Q^T Omega)^{-1} from the
    sketch alone, trading accuracy for half the A-applies.  Eigenvalues come
    back sorted descending (by value, or by magnitude with order="abs").
    """
    n = A.dim_in
    if A.dim_out != n:
        raise ConfigError("randomized_evd needs a square operator")
    if cfg.r > n:
        raise ConfigError(f"sketch size k+p={cfg.r} exceeds n={n}")
    if mode not in ("two_pass", "single_pass"):
        raise ConfigError(f"unknown mode {mode!r}")
    Omega = gaussian_matrix(n, cfg.r, cfg.seed)
    Y = A.apply(Omega)
    Q, _ = np.linalg.qr(Y)
    if mode == "two_pass":
        T = Q.T @ A.apply(Q)
    else:
        G = Q.T @ Omega
        svals = np.linalg.svd(G, compute_uv=False)
        if svals[-1] <= 1e-12 * svals[0]:
            raise IllConditionedError("Q^T Omega numerically singular; use two_pass")
        T = np.linalg.solve(G.T, (Q.T @ Y).T).T
    T = (T + T.T) / 2.0
    lam, S = np.linalg.eigh(T)
    idx = np.argsort(-np.abs(lam) if order == "abs" else -lam, kind="stable")
    lam, S = lam[idx][: cfg.k], S[:, idx][:, : cfg.k]
    return Q @ S, lam


def range_finder_b(
    A: LinearMap,
    B: SpdOperator,
    cfg: SketchConfig,
    qr_alg: str = "mgs_reorth",
    c_apply=None,
    need_ybar: bool = False,
) -> RangeResult:
    """B-orthonormal basis for the dominant range of C = B^{-1}A.

    Draws Omega, forms Ybar = A*Omega and Y = B^{-1}*Ybar (exactly k+p
    A-applies and k+p B-solves), then factorizes Y with the chosen weighted
    QR.  With ``c_apply`` given and ``need_ybar`` False, Y = C*Omega is formed
    directly and the B-solves are skipped.
    """
    n = B.dim
    if A.dim_in != n or A.dim_out != n:
        raise ConfigError("A and B dimensions do not agree")
    if cfg.r > n:
        raise ConfigError(f"sketch size k+p={cfg.r} exceeds n={n}")
    factorize = qr_algorithm(qr_alg)
    Omega = gaussian_matrix(n, cfg.r, cfg.seed)
    if c_apply is not None and not need_ybar:
        Ybar = None
        Y = np.asarray(c_apply(Omega), dtype=float)
    else:
        Ybar = A.apply(Omega)
        Y = B.apply_inverse(Ybar)
    basis = factorize(Y, B)
    return RangeResult(basis=basis, Y=Y, Ybar=Ybar, Omega=Omega)
