"""Matrix decompositions used by the estimators.

The top-r symmetric eigensolver is a deterministic block orthogonal
iteration (simultaneous iteration with Rayleigh-Ritz extraction); it scales
to the few-thousand-dimensional square moment matrices the estimators
produce without forming a full spectrum.  Small r x r Gram eigenproblems
and QR factorizations go through LAPACK.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_INIT_SEED = 0x5EED  # fixed seed for the iteration start block: runs are repeatable


class ConvergenceError(RuntimeError):
    """Eigensolver failed to reach the residual tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class RankDeficientError(ValueError):
    """Input matrix does not have full column rank."""


@dataclass(frozen=True)
class EigPairs:
    """Top eigenpairs of a symmetric matrix.

    ``values`` are the r algebraically largest eigenvalues in descending
    order; ``vectors`` is d x r with orthonormal columns.
    """

    values: np.ndarray
    vectors: np.ndarray


def sym_top_eigs(
    m: np.ndarray, r: int, tol: float = 1e-10, max_sweeps: int = 5000
) -> EigPairs:
    """Algebraically largest ``r`` eigenpairs of a symmetric matrix.

    The input is symmetrized as ``(m + m.T)/2`` before solving.  Block
    orthogonal iteration runs on a spectral shift of the matrix so the
    iteration targets the algebraically (not magnitude-) largest
    eigenvalues.  Each returned pair satisfies
    ``norm(m v - lam v) <= tol * norm(m)``.

    Raises
    ------
    ConvergenceError
        If the residual tolerance is not met within ``max_sweeps`` sweeps.
    ValueError
        If ``r`` exceeds the matrix dimension.
    """
    s = np.asarray(m, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    d = s.shape[0]
    r = int(r)
    if not 1 <= r <= d:
        raise ValueError(f"r={r} out of range for a {d}x{d} matrix")
    s = (s + s.T) / 2.0

    frob = float(np.linalg.norm(s))
    if frob == 0.0:
        return EigPairs(np.zeros(r), np.eye(d)[:, :r])

    # Shift by the Frobenius norm: s + shift*I is PSD with the same
    # eigenvectors, so magnitude order equals algebraic order.
    shift = frob
    block = min(d, r + 8)
    rng = np.random.default_rng(_INIT_SEED)
    q, _ = np.linalg.qr(rng.standard_normal((d, block)))

    residual = np.inf
    for _ in range(max_sweeps):
        z = s @ q
        b = q.T @ z
        b = (b + b.T) / 2.0
        theta, w = np.linalg.eigh(b)
        order = np.argsort(theta)[::-1]
        theta = theta[order]
        w = w[:, order]
        vectors = q @ w[:, :r]
        values = theta[:r]
        # s @ vectors comes for free as z @ w
        resid_cols = z @ w[:, :r] - vectors * values
        scale = max(abs(theta[0]), abs(theta[-1]))
        residual = float(np.linalg.norm(resid_cols, axis=0).max())
        if residual <= tol * scale:
            return EigPairs(values, vectors)
        q, _ = np.linalg.qr(z + shift * q)

    raise ConvergenceError(
        f"top-{r} eigensolver did not converge within {max_sweeps} sweeps "
        f"(residual {residual:.3e})",
        residual,
    )


def top_left_singular(m: np.ndarray) -> np.ndarray:
    """Top left singular vector of a nonzero matrix, sign-normalized.

    Computed as the top eigenvector of ``m @ m.T``; maximizes
    ``norm(m.T @ u)`` over unit vectors ``u``.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    if not np.any(a):
        raise ValueError("top_left_singular() of a zero matrix is undefined")
    gram = a @ a.T
    pairs = sym_top_eigs(gram, 1)
    return sign_normalize(pairs.vectors[:, 0])


def regularized_b(a: np.ndarray, floor: float = 0.1) -> np.ndarray:
    """Regularized Gram inverse ``B = A (A.T A)^{-1}``.

    Eigenvalues of the Gram matrix below ``floor`` are raised to ``floor``
    before inversion, which bounds the condition number when the columns of
    ``A`` are nearly collinear.  When no eigenvalue is floored this is the
    exact inverse and ``A.T @ B == I``.
    """
    a = np.asarray(a, dtype=float)
    dk, r = a.shape
    if r > dk:
        raise ValueError(f"need r <= d, got shape {a.shape}")
    if not 0.0 < floor < 1.0:
        raise ValueError(f"floor must lie in (0, 1), got {floor}")
    gram = a.T @ a
    w, v = np.linalg.eigh((gram + gram.T) / 2.0)
    w = np.maximum(w, floor)
    return a @ (v * (1.0 / w)) @ v.T


def qr_orthonormalize(a: np.ndarray) -> np.ndarray:
    """Thin QR orthonormalization with nonnegative R diagonal.

    Raises :class:`RankDeficientError` when ``a`` does not have full column
    rank.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[1] > a.shape[0]:
        raise ValueError(f"expected a tall matrix, got shape {a.shape}")
    q, rmat = np.linalg.qr(a)
    diag = np.diag(rmat)
    cutoff = max(a.shape) * np.finfo(float).eps * (np.abs(diag).max() if diag.size else 0.0)
    if np.any(np.abs(diag) <= cutoff):
        raise RankDeficientError(
            f"matrix of shape {a.shape} is rank deficient (|R_ii| <= {cutoff:.3e})"
        )
    signs = np.sign(diag)
    return q * signs


def projector_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Spectral distance of two unit vectors' rank-one projectors.

    Equals ``sqrt(1 - <u, v>^2)`` but is computed from the sign-aligned
    chordal gap ``||u - sign(<u,v>) v||``, which stays accurate when the
    vectors nearly coincide (the naive formula bottoms out near
    ``sqrt(eps)``).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    sign = -1.0 if float(u @ v) < 0 else 1.0
    diff = u - sign * v
    half = 0.5 * float(diff @ diff)  # equals 1 - |<u, v>|
    half = min(half, 1.0)
    return float(np.sqrt(max(0.0, half * (2.0 - half))))


def sign_normalize(v: np.ndarray) -> np.ndarray:
    """Flip a vector's sign so its largest-magnitude entry is positive.

    Ties pick the smallest index.  Loading vectors are only identified up
    to sign; this fixes one representative.
    """
    v = np.asarray(v, dtype=float)
    idx = int(np.argmax(np.abs(v)))
    if v[idx] < 0:
        return -v
    return v
