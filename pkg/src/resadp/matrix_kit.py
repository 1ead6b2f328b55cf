"""Dense-matrix helpers and the quadratic vectorization operators.

Ordering conventions (frozen, everything downstream depends on them):

* ``vecv(v)``  -> ``[v1*v1, v1*v2, ..., v1*vn, v2*v2, ..., vn*vn]``
* ``vecs(P)``  -> ``[p11, 2*p12, ..., 2*p1m, p22, ..., pmm]``
* ``vec(T)``   -> column stacking

so that ``vecv(x) @ vecs(P) == x @ P @ x``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NumericalError, RankError, StabilityError, ValidationError

RANK_RTOL = 1e-10
SYM_RTOL = 1e-10


def as_matrix(a, name="matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float array."""
    arr = np.array(a, dtype=float, ndmin=2)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def as_vector(v, name="vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.size == 0:
        raise DimensionError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def symmetrize(P, name="matrix") -> np.ndarray:
    """Return ``(P + P.T)/2`` after checking ``P`` is square and near-symmetric."""
    P = as_matrix(P, name)
    if P.shape[0] != P.shape[1]:
        raise DimensionError(f"{name} must be square, got {P.shape}")
    scale = max(1.0, float(np.max(np.abs(P))))
    if np.max(np.abs(P - P.T)) > SYM_RTOL * scale:
        raise ValidationError(f"{name} is not symmetric")
    return 0.5 * (P + P.T)


def tri_size(n: int) -> int:
    return n * (n + 1) // 2


def vecv(v) -> np.ndarray:
    v = as_vector(v, "vecv argument")
    i, j = np.triu_indices(v.size)
    return v[i] * v[j]


def vecs(P) -> np.ndarray:
    P = symmetrize(P, "vecs argument")
    i, j = np.triu_indices(P.shape[0])
    return np.where(i == j, 1.0, 2.0) * P[i, j]


def unvecs(p, m: int | None = None) -> np.ndarray:
    """Inverse of :func:`vecs`; rebuilds the symmetric matrix."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if m is None:
        m = int(round((np.sqrt(8 * p.size + 1) - 1) / 2))
    if tri_size(m) != p.size:
        raise DimensionError(f"length {p.size} is not m(m+1)/2 for any m")
    i, j = np.triu_indices(m)
    P = np.zeros((m, m))
    P[i, j] = np.where(i == j, p, p / 2.0)
    P[j, i] = P[i, j]
    return P


def vec(T) -> np.ndarray:
    return as_matrix(T, "vec argument").reshape(-1, order="F")


def unvec(t, rows: int, cols: int) -> np.ndarray:
    return np.asarray(t, dtype=float).reshape((rows, cols), order="F")


def kron(a, b) -> np.ndarray:
    return np.kron(np.array(a, dtype=float, ndmin=2), np.array(b, dtype=float, ndmin=2))


def numerical_rank(M, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def column_scales(M) -> np.ndarray:
    """Column norms used to equilibrate a data matrix (zero columns map to 1)."""
    norms = np.linalg.norm(M, axis=0)
    return np.where(norms > 0, norms, 1.0)


def solve_least_squares(M, b, rtol: float = RANK_RTOL):
    """Least-squares solve of ``M @ theta ~= b`` for a full-column-rank ``M``.

    Columns are equilibrated before the rank test and the solve; rank is
    invariant under that scaling, but the conditioning of data matrices whose
    blocks differ by orders of magnitude is not.

    Returns ``(theta, residual_norm)``.
    """
    M = as_matrix(M, "least-squares matrix")
    b = as_vector(b, "least-squares rhs")
    s, p = M.shape
    if b.size != s:
        raise DimensionError(f"rhs length {b.size} does not match {s} rows")
    if s < p:
        raise RankError(f"underdetermined system: {s} rows < {p} columns",
                        rank=min(s, p), required=p)
    scales = column_scales(M)
    Ms = M / scales
    U, sv, Vt = np.linalg.svd(Ms, full_matrices=False)
    rank = int(np.sum(sv > rtol * sv[0])) if sv[0] > 0 else 0
    if rank < p:
        raise RankError(f"matrix has numerical rank {rank} < {p} columns",
                        rank=rank, required=p)
    theta = (Vt.T @ ((U.T @ b) / sv)) / scales
    residual = float(np.linalg.norm(M @ theta - b))
    return theta, residual


def spectral_radius(A) -> float:
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"spectral radius needs a square matrix, got {A.shape}")
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    return float(np.max(np.abs(eig)))


def is_schur(A) -> bool:
    return spectral_radius(A) < 1.0


def solve_discrete_lyapunov(A, Q) -> np.ndarray:
    """Solve ``A.T @ P @ A - P + Q = 0`` by Kronecker linearization.

    One step of iterative refinement is applied; at the dimensions used here
    (at most 6x6, so a 36x36 linear system) this is cheap.
    """
    A = as_matrix(A, "A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"A must be square, got {A.shape}")
    Q = symmetrize(Q, "Q")
    if Q.shape != (n, n):
        raise DimensionError(f"Q shape {Q.shape} does not match A {A.shape}")
    if spectral_radius(A) >= 1.0 - 1e-9:
        raise StabilityError("Lyapunov solve needs a Schur matrix")
    L = np.eye(n * n) - np.kron(A.T, A.T)
    lu = np.linalg.solve
    p = lu(L, vec(Q))
    p = p + lu(L, vec(Q) - L @ p)
    P = unvec(p, n, n)
    return 0.5 * (P + P.T)


def lyapunov_residual(A, P, Q) -> float:
    return float(np.linalg.norm(A.T @ P @ A - P + Q, "fro"))


def controllability_rank(A, B) -> int:
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return numerical_rank(np.hstack(blocks), rtol=1e-10)
