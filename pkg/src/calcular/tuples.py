"""Commuting matrix tuples, joint spectra and the holomorphic functional calculus."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .errors import (DimensionMismatch, DuplicatePoints, NotCommuting, OutsideDomain,
                     SingularGram, SpectrumOutsideDomain, UnsupportedVariant)
from .functions import (Constant, Coordinate, Domain, HoloFunction, Polynomial, Transfer,
                        eval_point, horner)
from .linalg import as_matrix, direct_sum, min_eig, operator_norm, psd_factor

COMMUTE_TOL = 1e-10
MEMBER_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CommutingTuple:
    """d square matrices of a common size, optionally with joint eigen-data.

    ``eigen`` is ``(V, points)``: V has the eigenvectors as columns and
    ``points[j]`` is the joint eigenvalue (a length-d vector) of column j.
    """

    matrices: tuple
    eigen: tuple = None

    def __post_init__(self):
        mats = tuple(as_matrix(T, square=True) for T in self.matrices)
        if not mats:
            raise ValueError("a tuple needs at least one matrix")
        if len({T.shape for T in mats}) != 1:
            raise DimensionMismatch("matrices of a tuple must share one size")
        for T in mats:
            T.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        if self.eigen is not None:
            V, pts = self.eigen
            V = as_matrix(V, square=True)
            pts = np.asarray(pts, dtype=np.complex128).reshape(V.shape[0], len(mats))
            if V.shape[0] != self.dim:
                raise DimensionMismatch("eigenvector matrix has the wrong size")
            object.__setattr__(self, "eigen", (V, pts))

    @property
    def d(self):
        return len(self.matrices)

    @property
    def dim(self):
        return self.matrices[0].shape[0]

    def __getitem__(self, r):
        return self.matrices[r]

    def conjugate_by(self, W):
        """The tuple W* T W for a unitary (or invertible, with W^{-1} supplied via W* ) W."""
        W = as_matrix(W, square=True)
        eigen = None
        if self.eigen is not None:
            V, pts = self.eigen
            eigen = (W.conj().T @ V, pts)
        return CommutingTuple(tuple(W.conj().T @ T @ W for T in self.matrices), eigen)

    def scaled(self, s):
        eigen = None
        if self.eigen is not None:
            eigen = (self.eigen[0], s * self.eigen[1])
        return CommutingTuple(tuple(s * T for T in self.matrices), eigen)


def check_commuting(T, tol=COMMUTE_TOL):
    mats = T.matrices if isinstance(T, CommutingTuple) else [as_matrix(M, square=True) for M in T]
    if len({M.shape for M in mats}) != 1:
        raise DimensionMismatch("matrices of a tuple must share one size")
    norms = [operator_norm(M) for M in mats]
    for r in range(len(mats)):
        for s in range(r + 1, len(mats)):
            comm = mats[r] @ mats[s] - mats[s] @ mats[r]
            if operator_norm(comm) > tol * (1.0 + norms[r] * norms[s]):
                return False
    return True


def joint_spectrum(T, rng=None, tol=1e-8, max_tries=8):
    """Joint eigenvalues (dim x d array, with multiplicity).

    Triangularises a random real combination of the matrices by a complex
    Schur decomposition and reads all diagonals in that basis.
    """
    if T.eigen is not None:
        return T.eigen[1].copy()
    if not check_commuting(T):
        raise NotCommuting("joint spectrum requires a commuting tuple")
    rng = np.random.default_rng(0) if rng is None else rng
    scale = 1.0 + max(operator_norm(M) for M in T.matrices)
    for _ in range(max_tries):
        c = rng.standard_normal(T.d)
        combo = sum(ci * M for ci, M in zip(c, T.matrices))
        _, Q = scipy.linalg.schur(combo, output="complex")
        tri = [Q.conj().T @ M @ Q for M in T.matrices]
        if max(np.max(np.abs(np.tril(R, -1)), initial=0.0) for R in tri) <= tol * scale:
            return np.stack([np.diag(R) for R in tri], axis=1)
    raise NotCommuting("could not simultaneously triangularise the tuple")


def match_points(a, b):
    """Largest distance in an optimal matching between two equal-size point multisets."""
    a = np.asarray(a).reshape(len(a), -1)
    b = np.asarray(b).reshape(len(b), -1)
    if a.shape != b.shape:
        return np.inf
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max()) if len(rows) else 0.0


def tuple_from_eigen(points, V):
    """The tuple T^r = V diag(points[:, r]) V^{-1}."""
    points = np.asarray(points, dtype=np.complex128)
    V = as_matrix(V, square=True)
    Vinv = np.linalg.inv(V)
    mats = tuple(V @ np.diag(points[:, r]) @ Vinv for r in range(points.shape[1]))
    return CommutingTuple(mats, (V, points))


def _check_points(points, domain):
    points = np.asarray(points, dtype=np.complex128)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    for p in points:
        if not domain.contains(p, strict=True):
            raise OutsideDomain(f"point {np.round(p, 12).tolist()} is not strictly inside the domain")
    n = len(points)
    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(points[i] - points[j]) <= 1e-9:
                raise DuplicatePoints(f"points {i} and {j} coincide")
    return points


def make_generic_tuple(points, gram, domain=None):
    """Generic tuple with joint eigenvalues ``points`` and eigenvector Gram V*V = gram."""
    points = np.asarray(points, dtype=np.complex128)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    domain = domain or Domain("polydisk", points.shape[1])
    points = _check_points(points, domain)
    G = as_matrix(getattr(gram, "gram", gram), square=True)
    if G.shape[0] != len(points):
        raise DimensionMismatch("gram size must equal the number of points")
    if min_eig(G) <= 1e-10:
        raise SingularGram("eigenvector Gram matrix is singular")
    L = psd_factor(G)
    # V = L* has V*V = L L* = G; square because G is nonsingular
    return tuple_from_eigen(points, L.conj().T)


def _horner_matrix(p, T):
    if p.d > T.d:
        raise DimensionMismatch(f"polynomial in {p.d} variables applied to a {T.d}-tuple")
    eye = np.eye(T.dim, dtype=np.complex128)
    return horner(p.terms, list(T.matrices[: p.d]), eye, lambda a, b: a @ b)


def _spectrum_inside(T, domain, strict=True):
    for p in joint_spectrum(T):
        if not domain.contains(p, strict=strict):
            return False
    return True


def apply_function(f, T, domain=None, route="auto"):
    """f(T) for a commuting tuple.

    Polynomials are evaluated by Horner in the matrices; with ``route="eigen"``
    (or ``"auto"`` when eigen-data is cached) as V diag(f(points)) V^{-1}.
    Transfer functions use the tensor form of the realization formula.
    """
    if domain is not None and not _spectrum_inside(T, domain):
        raise SpectrumOutsideDomain("joint spectrum is not strictly inside the domain")
    if isinstance(f, Constant):
        return complex(f.c) * np.eye(T.dim, dtype=np.complex128)
    if isinstance(f, Coordinate):
        if f.r > T.d:
            raise DimensionMismatch(f"coordinate {f.r} of a {T.d}-tuple")
        return T.matrices[f.r - 1].copy()
    if isinstance(f, Polynomial):
        use_eigen = route == "eigen" or (route == "auto" and T.eigen is not None)
        if use_eigen:
            if T.eigen is None:
                raise ValueError("eigen route needs a tuple with eigen-data")
            V, pts = T.eigen
            vals = np.array([eval_point(f, p) for p in pts])
            return (V * vals) @ np.linalg.inv(V)
        return _horner_matrix(f, T)
    if isinstance(f, Transfer):
        from .realization import transfer_eval_tuple

        return transfer_eval_tuple(f.realization, T, check=False)
    if isinstance(f, HoloFunction):
        raise UnsupportedVariant(f"cannot apply {type(f).__name__}")
    raise TypeError(f"not a function: {f!r}")


def direct_sum_with_scalar(T, lam, pad=1, domain=None):
    """The tuple (T^r + lam^r I_pad) in block-diagonal form."""
    lam = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    if lam.size != T.d:
        raise DimensionMismatch("scalar point must have d coordinates")
    domain = domain or Domain("polydisk", T.d)
    if not domain.contains(lam, strict=True):
        raise OutsideDomain("padding point is not strictly inside the domain")
    if pad < 1:
        raise ValueError("pad must be positive")
    return CommutingTuple(tuple(direct_sum(M, lam[r] * np.eye(pad)) for r, M in enumerate(T.matrices)))


@dataclass(frozen=True)
class ClassSpec:
    """A finite constraint family S together with its domain."""

    constraints: tuple
    domain: Domain

    def __post_init__(self):
        cons = tuple(self.constraints)
        if not cons:
            raise ValueError("constraint family must be non-empty")
        object.__setattr__(self, "constraints", cons)
        rng = np.random.default_rng(12345)
        for psi in cons:
            if isinstance(psi, Transfer):
                continue
            for z in _interior_sample(self.domain, 32, rng):
                if abs(eval_point(psi, z)) > 1.0 + 1e-9:
                    raise ValueError("a constraint leaves the closed unit disk on the domain")

    def __len__(self):
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def values(self, points):
        """n_S x n array of constraint values at the given points."""
        return np.array([[eval_point(psi, p) for p in points] for psi in self.constraints],
                        dtype=np.complex128).reshape(len(self.constraints), len(points))


def coordinate_class(domain):
    return ClassSpec(tuple(Coordinate(r + 1) for r in range(domain.d)), domain)


def _interior_sample(domain, n, rng, radius=1.0):
    g = rng.standard_normal((n, domain.d)) + 1j * rng.standard_normal((n, domain.d))
    if domain.kind == "polydisk":
        u = rng.random((n, domain.d)) ** 0.5
        return radius * (1 - domain.margin) * u * g / np.abs(g)
    u = rng.random((n, 1)) ** (1.0 / (2 * domain.d))
    return radius * (1 - domain.margin) * u * g / np.linalg.norm(g, axis=1, keepdims=True)


def interior_sample(domain, n, rng, radius=1.0):
    """n random points strictly inside ``radius`` times the domain."""
    return _interior_sample(domain, n, rng, radius)


def in_H_of_S(T, spec, member_tol=MEMBER_TOL):
    """Is T in H(S): spectrum strictly inside and every constraint contractive on T?"""
    if not check_commuting(T):
        raise NotCommuting("membership test requires a commuting tuple")
    if not _spectrum_inside(T, spec.domain):
        return False
    return all(operator_norm(apply_function(psi, T)) <= 1.0 + member_tol for psi in spec)


def matrix_norm_level_n(Phi, T, domain=None):
    """Operator norm of the block matrix [phi_ij(T)] on car(T) (x) C^n."""
    blocks = [[apply_function(f, T, domain) for f in row] for row in Phi.entries]
    return operator_norm(np.block(blocks))


def tuple_from_literal(lit):
    mats = []
    for M in lit:
        arr = np.asarray(M, dtype=float)
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise ValueError("matrix literal must be rows of [re, im] pairs")
        mats.append(arr[..., 0] + 1j * arr[..., 1])
    return CommutingTuple(tuple(mats))


def matrix_to_literal(M):
    M = np.asarray(M, dtype=np.complex128)
    return [[[float(x.real), float(x.imag)] for x in row] for row in M]


def tuple_to_literal(T):
    return [matrix_to_literal(M) for M in T.matrices]
