"""Shared fixtures: KLE pencils, dense oracles, and exact-rank pencil builders."""

from __future__ import annotations

import numpy as np
import pytest

from randghep import errors, kle


def make_kle_pencil(nu: float, ell: float = 2.0, n: int = 201, fast_path: bool = False):
    """Fresh pencil (fresh counters) for the standard [-1, 1] KLE setup."""
    grid = kle.Grid1D(a=-1.0, b=1.0, n=n)
    return kle.kle_pencil(grid, kle.MaternConfig(nu=nu, ell=ell), fast_path=fast_path)


@pytest.fixture(scope="session")
def kle_oracle():
    """Memoized dense reference spectra keyed by (nu, ell, n)."""
    cache: dict = {}

    def get(nu: float, ell: float = 2.0, n: int = 201) -> errors.SpectrumReference:
        key = (nu, ell, n)
        if key not in cache:
            pencil = make_kle_pencil(nu, ell, n)
            cache[key] = errors.dense_ghep_oracle(pencil.dense_a, pencil.dense_b)
        return cache[key]

    return get


def random_spd(n: int, kappa: float, seed: int) -> np.ndarray:
    """SPD matrix with prescribed condition number and random eigenbasis."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.geomspace(1.0, 1.0 / kappa, n)
    return (Q * w) @ Q.T


def b_orthonormal_columns(Bd: np.ndarray, r: int, seed: int) -> np.ndarray:
    """Random U0 with U0^T B U0 = I."""
    rng = np.random.default_rng(seed)
    U0 = rng.standard_normal((Bd.shape[0], r))
    C = np.linalg.cholesky(U0.T @ (Bd @ U0))
    return np.linalg.solve(C, U0.T).T


def exact_rank_pencil(n: int, lams, b_kappa: float, seed: int):
    """Pencil with known spectrum: A = (B U0) diag(lams) (B U0)^T, U0^T B U0 = I.

    The nonzero pencil eigenvalues are exactly ``lams`` with eigenvectors U0.
    Returns (A_dense, B_dense, U0).
    """
    lams = np.asarray(lams, dtype=float)
    Bd = random_spd(n, b_kappa, seed)
    U0 = b_orthonormal_columns(Bd, lams.size, seed + 1)
    BU = Bd @ U0
    Ad = (BU * lams) @ BU.T
    Ad = (Ad + Ad.T) / 2.0
    return Ad, Bd, U0


def rel_eig_error(approx: np.ndarray, exact: np.ndarray) -> float:
    k = approx.size
    return float(np.sum(np.abs(exact[:k] - approx)) / np.sum(np.abs(exact[:k])))
