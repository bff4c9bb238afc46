"""Kernels on finite point sets, the class K_S, and multiplier norms.

Conventions: a kernel on F = {z_1, ..., z_n} is stored as its Gram matrix
``gram[a, b] = k(z_a, z_b)``, holomorphic in the first argument.  For a
constraint psi the "defect" matrix is ``H[a, b] = 1 - psi(z_a) conj(psi(z_b))``
and k is in K_S when every Schur product H o gram is positive semidefinite.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (CertificateInvalid, DuplicatePoints, OutsideDomain, SingularGram,
                     SolverDiverged, WrongDimension)
from .functions import Domain, HoloFunction, eval_point
from .linalg import as_matrix, hermitian_defect, min_eig, operator_norm
from .sdp import Constraint, SdpProblem, solve_min
from .tuples import make_generic_tuple


@dataclass(frozen=True, eq=False)
class FinitePointSet:
    domain: Domain
    points: np.ndarray  # n x d complex

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.domain.d)
        if pts.ndim != 2 or (pts.size and pts.shape[1] != self.domain.d):
            raise WrongDimension(f"points must be n x {self.domain.d}")
        for a, p in enumerate(pts):
            if not self.domain.contains(p, strict=True):
                raise OutsideDomain(f"point {a} is not strictly inside the domain")
        for a in range(len(pts)):
            for b in range(a + 1, len(pts)):
                if np.linalg.norm(pts[a] - pts[b]) <= 1e-9:
                    raise DuplicatePoints(f"points {a} and {b} coincide")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def subset(self, idx):
        return FinitePointSet(self.domain, self.points[list(idx)])


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    pointset: FinitePointSet
    gram: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        G = as_matrix(self.gram, square=True)
        n = len(self.pointset)
        if G.shape[0] != n:
            raise WrongDimension(f"gram is {G.shape[0]}x{G.shape[0]}, point set has {n} points")
        scale = 1.0 + np.max(np.abs(G), initial=0.0)
        if hermitian_defect(G) > 1e-12 * scale:
            raise ValueError("kernel gram matrix is not Hermitian")
        G = 0.5 * (G + G.conj().T)
        if min_eig(G) < -1e-10 * scale:
            raise ValueError("kernel gram matrix is not positive semidefinite")
        G.setflags(write=False)
        object.__setattr__(self, "gram", G)


@dataclass(frozen=True, eq=False)
class AglerDecomposition:
    """M^2 - phi(z_a) conj(phi(z_b)) = sum_j Gamma_j[a, b] (1 - psi_j(z_a) conj(psi_j(z_b)))."""

    bound: float
    certificates: tuple
    residual: float = 0.0
    solver: dict = field(default_factory=dict)


def function_values(phi, points):
    """phi as a vector of values at ``points``; ``phi`` may already be the values."""
    if isinstance(phi, HoloFunction):
        return np.array([eval_point(phi, p) for p in points], dtype=np.complex128)
    vals = np.asarray(phi, dtype=np.complex128).reshape(-1)
    if vals.size != len(points):
        raise WrongDimension("need one value per point")
    return vals


def defect_matrices(spec, points):
    """Stack of H_j = [1 - psi_j(z_a) conj(psi_j(z_b))], shape (n_S, n, n)."""
    V = spec.values(points)
    return 1.0 - V[:, :, None] * V[:, None, :].conj()


def in_K_S(k, spec, tol=1e-10):
    """Is ``k`` in K_S on its point set (up to eigenvalue slack ``tol``)?"""
    H = defect_matrices(spec, k.pointset.points)
    return all(min_eig(Hj * k.gram) >= -tol for Hj in H)


def finite_multiplier_norm(phi, k):
    """Smallest M with [(M^2 - phi(z_a) conj(phi(z_b))) k(z_a, z_b)] >= 0.

    Computed as ||L^{-1} D_phi L|| where k.gram = L L*.
    """
    G = k.gram
    if min_eig(G) <= 1e-10:
        raise SingularGram("kernel gram matrix is singular")
    vals = function_values(phi, k.pointset.points)
    L = np.linalg.cholesky(G)
    X = scipy.linalg.solve_triangular(L, vals[:, None] * L, lower=True)
    return operator_norm(X)


def model_tuple(k):
    """Adjoint of the kernel-function model tuple on span{k_z : z in F}.

    Its joint eigenvalues are the points of F and the Gram matrix of its
    eigenvectors is the inverse of k's Gram, so that ||phi(T)|| equals the
    multiplier norm of phi restricted to F.
    """
    G = k.gram
    if min_eig(G) <= 1e-10:
        raise SingularGram("kernel gram matrix is singular")
    L = np.linalg.cholesky(G)
    Linv = scipy.linalg.solve_triangular(L, np.eye(len(G)), lower=True)
    Ginv = Linv.conj().T @ Linv
    return make_generic_tuple(k.pointset.points, 0.5 * (Ginv + Ginv.conj().T), k.pointset.domain)


def separates_points(spec, F, gap=1e-9):
    V = spec.values(F.points)
    n = len(F)
    for a in range(n):
        for b in range(a + 1, n):
            if np.max(np.abs(V[:, a] - V[:, b]), initial=0.0) <= gap:
                return False
    return True


def decomposition_residual(phi_values, F, spec, dec):
    """Spectral norm of [M^2 - phi phi*] - sum_j H_j o Gamma_j."""
    vals = np.asarray(phi_values, dtype=np.complex128)
    H = defect_matrices(spec, F.points)
    lhs = dec.bound ** 2 - np.outer(vals, vals.conj())
    rhs = sum(Hj * Gj for Hj, Gj in zip(H, dec.certificates))
    return operator_norm(lhs - rhs) if len(vals) else 0.0


def agler_problem(phi_values, F, spec):
    """The SDP  min t  s.t.  t J - phi phi* = sum_j H_j o Gamma_j,  Gamma_j >= 0."""
    vals = np.asarray(phi_values, dtype=np.complex128)
    n = len(F)
    H = defect_matrices(spec, F.points)
    cons = []
    for a in range(n):
        for b in range(n):
            terms = {(j, a, b): -H[j, a, b] for j in range(len(spec))}
            cons.append(Constraint(terms, rhs=vals[a] * np.conj(vals[b]), free={0: 1.0}))
    return SdpProblem((n,) * len(spec), cons, n_free=1, objective_free=(1.0,))


def agler_norm(phi, F, spec, tol=1e-10, max_iter=100, seed=0):
    """Norm of phi in A^inf(K_S) restricted to F, with its decomposition certificate.

    Returns ``(M, AglerDecomposition)``.
    """
    vals = function_values(phi, F.points)
    if len(F) and not separates_points(spec, F):
        warnings.warn("constraint family does not separate the points of F", RuntimeWarning)
    if len(F) == 0:
        return 0.0, AglerDecomposition(0.0, tuple(np.zeros((0, 0)) for _ in spec))
    sol = solve_min(agler_problem(vals, F, spec), max_iter=max_iter, tol=tol, seed=seed)
    sol.raise_for_status()
    t = max(float(sol.free[0]), 0.0)
    M = float(np.sqrt(t))
    certs = tuple(0.5 * (B + B.conj().T) for B in sol.blocks)
    dec = AglerDecomposition(M, certs, 0.0, {"iterations": sol.iterations, "dual_gap": sol.dual_gap})
    residual = decomposition_residual(vals, F, spec, dec)
    object.__setattr__(dec, "residual", residual)
    if residual > 1e-7 * (1 + M * M) or any(min_eig(G) < -1e-8 for G in certs):
        raise SolverDiverged(f"decomposition residual {residual:.2e} exceeds tolerance")
    return M, dec


def verify_decomposition(phi_values, F, spec, dec, tol=1e-7):
    """Independent re-check of a certificate; raises CertificateInvalid on failure."""
    res = decomposition_residual(phi_values, F, spec, dec)
    worst = min([min_eig(G) for G in dec.certificates] + [0.0])
    if res > tol * (1 + dec.bound ** 2):
        raise CertificateInvalid(f"decomposition residual {res:.2e} too large")
    if worst < -1e-8:
        raise CertificateInvalid(f"certificate has eigenvalue {worst:.2e}")
    return res


def _cubic_kernel_truncation(x, eps=1e-12):
    if x == 0.0:
        return 1
    N = 1
    while x ** (N + 1) * (N + 2) ** 2 * (1 + x) / (1 - x) ** 3 >= eps:
        N += 1
    return N


def builtin_kernel(name, F, truncation=None):
    """Szego kernel of the disk, or the weighted kernel sum (n+1)^2 z^n conj(w)^n."""
    if F.domain.d != 1:
        raise WrongDimension("built-in kernels live on the unit disk (d = 1)")
    z = F.points[:, 0]
    P = np.outer(z, z.conj())
    if name == "szego-disk":
        return KernelMatrix(F, 1.0 / (1.0 - P))
    if name == "example-2-4":
        x = float(np.max(np.abs(z), initial=0.0) ** 2)
        N = truncation if truncation is not None else _cubic_kernel_truncation(x)
        if N < 1:
            raise ValueError("truncation must be positive")
        G = np.zeros_like(P)
        for n in range(N, -1, -1):
            G = G * P + (n + 1) ** 2
        tail = x ** (N + 1) * (N + 2) ** 2 * (1 + x) / (1 - x) ** 3
        return KernelMatrix(F, G, tail_bound=float(tail))
    raise ValueError(f"unknown built-in kernel {name!r}")
