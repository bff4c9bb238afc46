"""Network realizations built from Agler decompositions.

A realization is a unitary colligation U = [[A, B], [C, D]] on C (+) C^m
whose state space is split into one coordinate group per constraint psi_j.
With rho(z) = sum_j psi_j(z) P_j the transfer function is

    phi(z) = A + B rho(z) (I - D rho(z))^{-1} C.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (CertificateInvalid, NotInClass, OutsideDomain,
                     RankDeficiencyUnresolvable, SingularResolvent)
from .functions import Domain, eval_point, function_from_literal, function_to_literal
from .kernels import defect_matrices, function_values, verify_decomposition
from .linalg import as_matrix, operator_norm, psd_factor, resolvent_solve
from .tuples import ClassSpec, apply_function, in_H_of_S, interior_sample

RANK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Realization:
    spec: ClassSpec
    U: np.ndarray
    groups: tuple  # boundaries g_0 = 0 <= g_1 <= ... <= g_nS = m

    def __post_init__(self):
        U = as_matrix(self.U, square=True)
        groups = tuple(int(g) for g in self.groups)
        m = U.shape[0] - 1
        if len(groups) != len(self.spec) + 1 or groups[0] != 0 or groups[-1] != m \
                or any(b < a for a, b in zip(groups, groups[1:])):
            raise ValueError("projection groups must partition the state space")
        U.setflags(write=False)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "groups", groups)

    @property
    def state_dim(self):
        return self.U.shape[0] - 1

    @property
    def A(self):
        return self.U[:1, :1]

    @property
    def B(self):
        return self.U[:1, 1:]

    @property
    def C(self):
        return self.U[1:, :1]

    @property
    def D(self):
        return self.U[1:, 1:]

    def projection(self, j):
        p = np.zeros(self.state_dim)
        p[self.groups[j]:self.groups[j + 1]] = 1.0
        return np.diag(p)

    def unitarity_residual(self):
        n = self.U.shape[0]
        return operator_norm(self.U.conj().T @ self.U - np.eye(n))


def _gauge_fix(U):
    C = U[1:, 0]
    nz = np.flatnonzero(np.abs(C) > 1e-12)
    if nz.size == 0:
        return U
    w = np.conj(C[nz[0]]) / abs(C[nz[0]])
    g = np.concatenate([[1.0], np.full(U.shape[0] - 1, w)])
    return (g[:, None] * U) * np.conj(g)[None, :]


def build_realization(phi, F, spec, dec):
    """Lurking-isometry realization of phi from a certificate with bound M <= 1.

    The certificate identity rearranges to <x_a, x_b> = <y_a, y_b> with
    x_a = (1, psi_j(z_a) h_j(z_a))_j and y_a = (phi(z_a), h_j(z_a))_j where
    Gamma_j[a, b] = <h_j(z_a), h_j(z_b)>; U is the unitary closest to
    mapping every x_a to y_a (orthogonal Procrustes).
    """
    vals = function_values(phi, F.points)
    verify_decomposition(vals, F, spec, dec)
    if dec.bound > 1 + 1e-9:
        raise CertificateInvalid(f"bound {dec.bound:.12g} exceeds 1; no contractive realization")
    n = len(F)
    certs = [np.array(G, dtype=np.complex128) for G in dec.certificates]
    H = defect_matrices(spec, F.points)
    V = spec.values(F.points)
    if n and dec.bound < 1.0:
        # (1 - M^2) J = H_j o (1 - M^2)/H_j, the latter PSD since |psi_j| < 1 on F
        j = int(np.argmin(np.max(np.abs(V), axis=1)))
        certs[j] = certs[j] + (1.0 - dec.bound ** 2) / H[j]
    factors = []
    for G in certs:
        G = 0.5 * (G + G.conj().T)
        clip = 1e-8 * (1.0 + np.linalg.norm(G, 2)) if G.size else 0.0
        factors.append(psd_factor(G, clip=clip, rank_tol=RANK_TOL) if n else np.zeros((0, 0)))
    ranks = [L.shape[1] for L in factors]
    m = sum(ranks)
    groups = tuple(np.concatenate([[0], np.cumsum(ranks)]).astype(int))
    X = np.zeros((1 + m, n), dtype=np.complex128)
    Y = np.zeros((1 + m, n), dtype=np.complex128)
    X[0] = 1.0
    Y[0] = vals
    for j, L in enumerate(factors):
        sl = slice(1 + groups[j], 1 + groups[j + 1])
        X[sl] = (V[j][:, None] * L).T
        Y[sl] = L.T
    P, _, Qh = np.linalg.svd(Y @ X.conj().T)
    U = P @ Qh
    if np.linalg.norm(U @ X - Y) > 1e-6 * (1.0 + np.linalg.norm(Y)):
        raise RankDeficiencyUnresolvable("isometry does not extend to a unitary within tolerance")
    return Realization(spec, _gauge_fix(U), groups)


def _rho_diag(R, e):
    d = np.zeros(R.state_dim, dtype=np.complex128)
    for j, v in enumerate(e):
        d[R.groups[j]:R.groups[j + 1]] = v
    return d


def transfer_eval_point(R, z):
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    e = np.array([eval_point(psi, z) for psi in R.spec])
    if np.any(np.abs(e) >= 1.0):
        raise OutsideDomain("a constraint has modulus >= 1 at this point")
    m = R.state_dim
    if m == 0:
        return complex(R.A[0, 0])
    rho = _rho_diag(R, e)
    Z, _ = resolvent_solve(np.eye(m) - R.D * rho[None, :], R.C)
    return complex(R.A[0, 0] + ((R.B * rho[None, :]) @ Z)[0, 0])


def transfer_eval_tuple(R, T, check=True, member_tol=1e-9):
    """phi(T) = I(x)A + (I(x)B) rho(T) (I - (I(x)D) rho(T))^{-1} (I(x)C)."""
    if check and not in_H_of_S(T, R.spec, member_tol):
        raise NotInClass("tuple is not in H(S)")
    dim, m = T.dim, R.state_dim
    I = np.eye(dim)
    if m == 0:
        return complex(R.A[0, 0]) * I.astype(np.complex128)
    rho = sum(np.kron(apply_function(psi, T), R.projection(j)) for j, psi in enumerate(R.spec))
    lhs = np.eye(dim * m) - np.kron(I, R.D) @ rho
    Z, _ = resolvent_solve(lhs, np.kron(I, R.C))
    return np.kron(I, R.A) + np.kron(I, R.B) @ rho @ Z


def verify_realization(R, F=None, phi=None, tol=1e-8, samples=200, seed=0):
    """Unitarity, interpolation on F and contractivity on an interior sample."""
    report = {"unitarity_residual": R.unitarity_residual()}
    report["unitarity_ok"] = report["unitarity_residual"] <= 1e-9
    if F is not None and len(F):
        vals = function_values(phi, F.points)
        errs = [abs(transfer_eval_point(R, z) - v) for z, v in zip(F.points, vals)]
        report["interpolation_errors"] = [float(e) for e in errs]
        report["interpolation_ok"] = max(errs) <= 10 * tol
    rng = np.random.default_rng(seed)
    worst, skipped = 0.0, 0
    for z in interior_sample(R.spec.domain, samples, rng, radius=0.999):
        try:
            worst = max(worst, abs(transfer_eval_point(R, z)))
        except (SingularResolvent, OutsideDomain):
            skipped += 1
    report["sample_max_modulus"] = float(worst)
    report["sample_skipped"] = skipped
    report["contractive_ok"] = worst <= 1 + 1e-8
    report["ok"] = all(v for k, v in report.items() if k.endswith("_ok"))
    return report


# -- serialization ---------------------------------------------------------------

def realization_to_dict(R):
    d = R.spec.domain
    return {
        "state_dim": R.state_dim,
        "U": [[[float(x.real), float(x.imag)] for x in row] for row in R.U],
        "groups": list(R.groups),
        "constraints": [function_to_literal(psi) for psi in R.spec],
        "domain": {"kind": d.kind, "d": d.d, "margin": d.margin},
    }


def realization_from_dict(obj):
    dom = Domain(obj["domain"]["kind"], obj["domain"]["d"], obj["domain"].get("margin", 1e-6))
    spec = ClassSpec(tuple(function_from_literal(c) for c in obj["constraints"]), dom)
    arr = np.asarray(obj["U"], dtype=float)
    U = arr[..., 0] + 1j * arr[..., 1]
    R = Realization(spec, U, tuple(obj["groups"]))
    if R.state_dim != obj["state_dim"]:
        raise ValueError("state_dim does not match U")
    return R
