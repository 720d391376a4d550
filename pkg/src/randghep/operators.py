"""Matrix-free linear-operator contracts, dense backends, and matrix interchange I/O.

The solvers in this package only ever touch an operator through block
products ``A @ X``, ``B @ X`` and solves ``B^{-1} @ X``.  Square roots of B
are never requested by any algorithm; the dense backend factorizes B once
(Cholesky) purely to serve the solve contract.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse


class ConfigError(ValueError):
    """Invalid shapes, ranks or parameters.  Mapped to CLI exit code 2."""


class NumericalError(RuntimeError):
    """Numerical failure during a computation.  Mapped to CLI exit code 3."""


class MatrixFormatError(ValueError):
    """Unreadable or malformed Matrix Market input."""


class UnsupportedFieldError(MatrixFormatError):
    """Matrix Market field this library does not support (complex/pattern)."""


class NotPositiveDefiniteError(NumericalError):
    """A matrix required to be SPD has a non-positive pivot."""


class IllConditionedError(NumericalError):
    """Input too ill-conditioned for the requested algorithm."""


class PoleError(NumericalError):
    """Spectral transform hit 1 - theta*alpha = 0 (eigenvalue at infinity)."""


class _Counter:
    """Thread-safe additive counter."""

    __slots__ = ("_lock", "_value")

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._value = 0

    def add(self, m: int) -> None:
        with self._lock:
            self._value += m

    @property
    def value(self) -> int:
        return self._value


def _as_block(X, dim: int):
    """Promote a vector to a one-column block.  Returns (block, was_vector)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        if X.shape[0] != dim:
            raise ConfigError(f"operand has length {X.shape[0]}, expected {dim}")
        return X[:, None], True
    if X.ndim != 2 or X.shape[0] != dim:
        raise ConfigError(f"operand has shape {X.shape}, expected ({dim}, m)")
    return X, False


class LinearMap:
    """A linear operator applied to blocks of column vectors.

    ``apply`` maps a ``(dim_in, m)`` block to a ``(dim_out, m)`` block and
    increments the matvec counter by exactly ``m``.  One-dimensional inputs
    are treated as single columns and returned one-dimensional.

    Operators are immutable after construction and safe for concurrent
    read-only use; the counters use locked increments.
    """

    def __init__(
        self,
        dim_out: int,
        dim_in: int,
        apply: Callable[[np.ndarray], np.ndarray],
        apply_transpose: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ) -> None:
        if dim_out < 1 or dim_in < 1:
            raise ConfigError("operator dimensions must be positive")
        self.dim_out = int(dim_out)
        self.dim_in = int(dim_in)
        self._apply = apply
        self._apply_t = apply_transpose
        self._matvecs = _Counter()

    @property
    def shape(self) -> tuple[int, int]:
        return (self.dim_out, self.dim_in)

    @property
    def matvec_count(self) -> int:
        return self._matvecs.value

    def apply(self, X) -> np.ndarray:
        Xb, vec = _as_block(X, self.dim_in)
        out = np.asarray(self._apply(Xb), dtype=float)
        if out.shape != (self.dim_out, Xb.shape[1]):
            raise NumericalError(f"apply produced shape {out.shape}, expected ({self.dim_out}, {Xb.shape[1]})")
        self._matvecs.add(Xb.shape[1])
        return out[:, 0] if vec else out

    def apply_transpose(self, X) -> np.ndarray:
        if self._apply_t is None:
            raise ConfigError("operator does not expose transpose application")
        Xb, vec = _as_block(X, self.dim_out)
        out = np.asarray(self._apply_t(Xb), dtype=float)
        self._matvecs.add(Xb.shape[1])
        return out[:, 0] if vec else out


class SpdOperator(LinearMap):
    """Symmetric-positive-definite operator: ``apply`` (Bx) plus ``apply_inverse`` (B^{-1}x).

    Symmetry makes transpose application identical to ``apply``.
    """

    def __init__(
        self,
        dim: int,
        apply: Callable[[np.ndarray], np.ndarray],
        apply_inverse: Callable[[np.ndarray], np.ndarray],
    ) -> None:
        super().__init__(dim, dim, apply, apply_transpose=apply)
        self._apply_inv = apply_inverse
        self._solves = _Counter()

    @property
    def dim(self) -> int:
        return self.dim_in

    @property
    def solve_count(self) -> int:
        return self._solves.value

    def apply_inverse(self, X) -> np.ndarray:
        Xb, vec = _as_block(X, self.dim_in)
        out = np.asarray(self._apply_inv(Xb), dtype=float)
        self._solves.add(Xb.shape[1])
        return out[:, 0] if vec else out

    def inverse_view(self) -> "SpdOperator":
        """View of B^{-1} as an SpdOperator.

        Applying the view counts into this operator's solve counter (and its
        ``apply_inverse`` into the matvec counter), so cost accounting stays
        attached to the original B.
        """
        view = SpdOperator.__new__(SpdOperator)
        LinearMap.__init__(view, self.dim, self.dim, self._apply_inv, self._apply_inv)
        view._apply_inv = self._apply
        view._matvecs = self._solves
        view._solves = self._matvecs
        return view


@dataclass
class GhepPencil:
    """The pair (A, B) that every GHEP solver consumes.

    ``c_apply``, when present, applies C = B^{-1}A directly without a B-solve
    (fast path for pencils like M*Gamma*M vs. M where C = Gamma*M is cheap).
    ``dense_a``/``dense_b`` are optional dense copies for oracle-scale checks.
    """

    A: LinearMap
    B: SpdOperator
    c_apply: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dense_a: Optional[np.ndarray] = None
    dense_b: Optional[np.ndarray] = None


def check_symmetric(M: np.ndarray, tol: float = 1e-13) -> None:
    """Validate the symmetric-storage invariant ||M - M^T||_max <= tol*||M||_max."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {M.shape}")
    scale = np.abs(M).max()
    if scale == 0.0:
        return
    if np.abs(M - M.T).max() > tol * scale:
        raise ConfigError("matrix is not symmetric to within tolerance")


def dense_operator(M: np.ndarray) -> LinearMap:
    """Wrap a dense matrix as a LinearMap with transpose application."""
    M = np.array(M, dtype=float)
    M.setflags(write=False)
    return LinearMap(M.shape[0], M.shape[1], lambda X: M @ X, lambda X: M.T @ X)


def dense_spd(M: np.ndarray) -> SpdOperator:
    """SPD operator backed by a dense matrix; B^{-1}x served by a one-time Cholesky.

    Raises NotPositiveDefiniteError if the factorization meets a non-positive
    pivot, ConfigError if M is not symmetric.
    """
    M = np.array(M, dtype=float)
    check_symmetric(M)
    try:
        factor = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from exc
    M.setflags(write=False)
    op = SpdOperator(
        M.shape[0],
        lambda X: M @ X,
        lambda X: scipy.linalg.cho_solve(factor, X, check_finite=False),
    )
    return op


def c_operator(A: LinearMap, B: SpdOperator) -> LinearMap:
    """The composition C = B^{-1}A.  Applies count into both A and B-solve counters.

    C is self-adjoint with respect to the B-inner product even though it is
    not symmetric in the ordinary sense.
    """
    if A.dim_out != B.dim:
        raise ConfigError("A and B dimensions do not agree")
    return LinearMap(B.dim, A.dim_in, lambda X: B.apply_inverse(A.apply(X)))


def spectral_transform(theta: float, alpha: float, beta: float) -> float:
    """Recover lambda from theta = lambda / (alpha*lambda + beta).

    Used with indefinite B when some combination alpha*A + beta*B is positive
    definite; the transformed problem shares eigenvectors with the original.
    """
    denom = 1.0 - theta * alpha
    if denom == 0.0:
        raise PoleError("1 - theta*alpha = 0: eigenvalue at infinity")
    return theta * beta / denom


# ---------------------------------------------------------------------------
# Matrix Market and CSV interchange
# ---------------------------------------------------------------------------


def _locate_bad_line(path) -> int:
    """Best-effort scan for the first malformed body line (1-based, 0 if unknown)."""
    try:
        with open(path, "rt") as fh:
            header = fh.readline()
            if not header.startswith("%%MatrixMarket"):
                return 1
            lineno = 1
            ncols_expected = None
            for line in fh:
                lineno += 1
                if line.startswith("%") or not line.strip():
                    continue
                tokens = line.split()
                if ncols_expected is None:
                    ncols_expected = len(tokens)
                try:
                    [float(t) for t in tokens]
                except ValueError:
                    return lineno
            return 0
    except OSError:
        return 0


def load_matrix_market(path) -> np.ndarray:
    """Read a real Matrix Market file (array or coordinate) into a dense matrix.

    Symmetric/skew storage is expanded to full.  Complex and pattern fields
    raise UnsupportedFieldError; parse failures raise MatrixFormatError with
    a line number when one can be determined.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    try:
        info = scipy.io.mminfo(path)
    except Exception as exc:
        raise MatrixFormatError(f"{path}: not a valid Matrix Market header: {exc}") from exc
    fld = info[4]
    if fld == "complex":
        raise UnsupportedFieldError(f"{path}: complex field is not supported (real matrices only)")
    if fld == "pattern":
        raise UnsupportedFieldError(f"{path}: pattern field is not supported (no values)")
    try:
        M = scipy.io.mmread(path)
    except Exception as exc:
        lineno = _locate_bad_line(path)
        where = f" at line {lineno}" if lineno else ""
        raise MatrixFormatError(f"{path}: parse failure{where}: {exc}") from exc
    if scipy.sparse.issparse(M):
        M = M.toarray()
    return np.asarray(M, dtype=float)


def save_matrix_market(path, M: np.ndarray, comment: str = "") -> None:
    """Write a dense matrix as a Matrix Market array file (round-trips float64)."""
    scipy.io.mmwrite(path, np.asarray(M, dtype=float), comment=comment, precision=16)


def load_vector_csv(path) -> np.ndarray:
    """Read a vector stored one value per line ('.' decimal, scientific ok)."""
    values = []
    with open(path, "rt") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(float(text))
            except ValueError as exc:
                raise MatrixFormatError(f"{path}: bad value at line {lineno}: {text!r}") from exc
    return np.array(values, dtype=float)


def save_vector_csv(path, v: np.ndarray) -> None:
    v = np.asarray(v, dtype=float).ravel()
    with open(path, "wt") as fh:
        for x in v:
            fh.write(f"{x:.17g}\n")
