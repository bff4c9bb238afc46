"""Dense complex linear algebra used by every other module.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The helpers here
validate shape and finiteness, and add the few operations numpy does not
phrase the way we need them (rank-revealing PSD factors, resolvent solves with
a condition check).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NoConvergence, NotHermitian, NotPSD, SingularResolvent


@dataclass(frozen=True)
class HermitianEigResult:
    eigenvalues: np.ndarray  # real, descending
    eigenvectors: np.ndarray  # unitary, columns match eigenvalues


def as_matrix(M, square=False):
    """Return ``M`` as a finite complex128 2-d array, raising ValueError otherwise."""
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if square and A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def hermitian_defect(H):
    return float(np.linalg.norm(H - H.conj().T, 2)) if H.size else 0.0


def _jacobi_eigh(H, max_sweeps=100):
    """Cyclic complex Jacobi rotations.  Returns (eigenvalues, V) unsorted."""
    A = H.copy()
    n = A.shape[0]
    V = np.eye(n, dtype=np.complex128)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= 1e-15 * scale:
            return np.real(np.diag(A)).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                # phase-strip apq, then the real symmetric 2x2 rotation
                phase = apq / abs(apq)
                app, aqq = A[p, p].real, A[q, q].real
                theta = 0.5 * np.arctan2(2 * abs(apq), aqq - app)
                c, s = np.cos(theta), np.sin(theta)
                J = np.array([[c, s * phase], [-s * np.conj(phase), c]])
                # columns p, q of A and V; rows p, q of A
                cols = A[:, [p, q]] @ J
                A[:, p], A[:, q] = cols[:, 0], cols[:, 1]
                rows = J.conj().T @ A[[p, q], :]
                A[p, :], A[q, :] = rows[0], rows[1]
                A[p, q] = A[q, p] = 0.0
                vcols = V[:, [p, q]] @ J
                V[:, p], V[:, q] = vcols[:, 0], vcols[:, 1]
    raise NoConvergence(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def hermitian_eig(H, tol=1e-12, method="lapack"):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues descending.

    ``method="jacobi"`` runs cyclic complex Jacobi rotations (capped at 100
    sweeps); the default delegates to LAPACK, which is what the hot loops use.
    """
    H = as_matrix(H, square=True)
    norm = np.linalg.norm(H, 2) if H.size else 0.0
    if hermitian_defect(H) > tol * (1.0 + norm):
        raise NotHermitian("matrix is not Hermitian within tolerance")
    H = 0.5 * (H + H.conj().T)
    if method == "jacobi":
        w, V = _jacobi_eigh(H)
    elif method == "lapack":
        w, V = np.linalg.eigh(H)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(-w, kind="stable")
    return HermitianEigResult(w[order], V[:, order])


def eigvalsh(H):
    """Ascending eigenvalues of the Hermitian part of H (no checks)."""
    if H.shape[0] == 0:
        return np.zeros(0)
    return np.linalg.eigvalsh(0.5 * (H + H.conj().T))


def min_eig(H):
    w = eigvalsh(H)
    return float(w[0]) if w.size else 0.0


def operator_norm(M):
    """Largest singular value, computed as sqrt of the top eigenvalue of M*M."""
    M = as_matrix(M)
    if M.size == 0:
        return 0.0
    G = M.conj().T @ M
    return float(np.sqrt(max(eigvalsh(G)[-1], 0.0)))


def psd_factor(G, clip=1e-10, rank_tol=0.0):
    """Factor a PSD matrix as ``L @ L.conj().T`` with L of full column rank.

    Eigenvalues in ``[-clip, 0)`` count as zero; anything more negative raises
    NotPSD.  Eigenvalues at or below ``rank_tol * lambda_max`` are dropped as
    well, so the column count is the numerical rank.
    """
    G = as_matrix(G, square=True)
    n = G.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    eig = hermitian_eig(G, tol=1e-8)
    w, V = eig.eigenvalues, eig.eigenvectors
    if w[-1] < -clip:
        raise NotPSD(f"smallest eigenvalue {w[-1]:.3e} below -{clip:.1e}")
    cutoff = max(rank_tol * max(w[0], 0.0), 0.0)
    keep = w > cutoff
    return V[:, keep] * np.sqrt(w[keep])


def direct_sum(*blocks):
    """Block-diagonal matrix of the given square blocks (empty blocks allowed)."""
    mats = [np.asarray(B, dtype=np.complex128).reshape(np.shape(B) if np.ndim(B) == 2 else (0, 0))
            for B in blocks]
    return scipy.linalg.block_diag(*mats) if mats else np.zeros((0, 0), dtype=np.complex128)


def resolvent_solve(A, B, cond_limit=1e12):
    """Solve ``A X = B`` by partial-pivot LU.  Returns ``(X, cond)``.

    Raises SingularResolvent when the 2-norm condition number exceeds
    ``cond_limit``.
    """
    A = np.asarray(A, dtype=np.complex128)
    if A.shape[0] == 0:
        return np.zeros((0,) + np.shape(B)[1:], dtype=np.complex128), 1.0
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularResolvent(f"resolvent condition number {cond:.3e} exceeds {cond_limit:.0e}")
    lu = scipy.linalg.lu_factor(A, check_finite=False)
    return scipy.linalg.lu_solve(lu, np.asarray(B, dtype=np.complex128), check_finite=False), cond


def random_unitary(n, rng):
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_hermitian(n, rng):
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (Z + Z.conj().T)
