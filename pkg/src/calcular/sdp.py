"""A small dense semidefinite-program solver.

Problems have Hermitian matrix blocks X_k >= 0, free real scalars x, complex
linear equality constraints and a real linear objective:

    minimize   c . x + sum_k Re tr(C_k X_k)
    subject to sum_{k,i,j} a_kij X_k[i, j] + sum_l f_l x_l = rhs   (each constraint)

Hermitian blocks are handled through the real embedding
[[Re X, -Im X], [Im X, Re X]], constraints are converted to real rows and
reduced to an orthonormal basis of their span, and the reduced problem is
solved by an infeasible primal-dual interior point method with
Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, SolverDiverged

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class Constraint:
    """sum terms[(k, i, j)] * X_k[i, j] + sum free[l] * x_l = rhs."""

    terms: dict
    rhs: complex = 0j
    free: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SdpProblem:
    block_sizes: tuple
    constraints: tuple
    n_free: int = 0
    objective_free: tuple = ()
    objective_blocks: dict = field(default_factory=dict)  # k -> Hermitian C_k

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(n) for n in self.block_sizes))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        of = tuple(float(c) for c in self.objective_free) or (0.0,) * self.n_free
        if len(of) != self.n_free:
            raise ValueError("objective_free must have one entry per free variable")
        object.__setattr__(self, "objective_free", of)
        for con in self.constraints:
            for (k, i, j) in con.terms:
                n = self.block_sizes[k]
                if not (0 <= i < n and 0 <= j < n):
                    raise ValueError(f"constraint entry ({k}, {i}, {j}) out of range")
            for l in con.free:
                if not 0 <= l < self.n_free:
                    raise ValueError(f"free variable {l} out of range")


@dataclass
class SdpSolution:
    status: str  # "optimal", "infeasible" or "diverged"
    blocks: list
    free: np.ndarray
    objective: float
    primal_residual: float
    dual_gap: float
    iterations: int
    certificate: dict = None

    def summary(self):
        return {
            "status": self.status,
            "objective": self.objective,
            "primal_residual": self.primal_residual,
            "dual_gap": self.dual_gap,
            "iterations": self.iterations,
            "free": [float(v) for v in self.free],
            "blocks": [[[[float(x.real), float(x.imag)] for x in row] for row in B] for B in self.blocks],
        }

    def raise_for_status(self):
        if self.status == "infeasible":
            raise Infeasible("semidefinite program is infeasible", self.certificate)
        if self.status != "optimal":
            raise SolverDiverged(f"interior point method ended with status {self.status!r}")
        return self


# -- real embedding ------------------------------------------------------------

def _svec_len(s):
    return s * (s + 1) // 2


def _svec(A):
    s = A.shape[0]
    iu = np.triu_indices(s)
    w = np.where(iu[0] == iu[1], 1.0, SQRT2)
    return A[iu] * w


def _smat(v, s):
    A = np.zeros((s, s))
    iu = np.triu_indices(s)
    w = np.where(iu[0] == iu[1], 1.0, 1.0 / SQRT2)
    A[iu] = v * w
    return A + np.triu(A, 1).T


def _entry_functionals(n, i, j):
    """Real symmetric 2n x 2n matrices picking Re X[i,j] and Im X[i,j] from the embedding."""
    ER = np.zeros((2 * n, 2 * n))
    ER[i, j] += 0.5
    ER[n + i, n + j] += 0.5
    EI = np.zeros((2 * n, 2 * n))
    EI[n + i, j] += 0.5
    EI[i, n + j] -= 0.5
    return 0.5 * (ER + ER.T), 0.5 * (EI + EI.T)


def _embed(C):
    C = np.asarray(C, dtype=np.complex128)
    return np.block([[C.real, -C.imag], [C.imag, C.real]])


def _unembed(Y, n):
    R = 0.5 * (Y[:n, :n] + Y[n:, n:])
    I = 0.5 * (Y[n:, :n] - Y[:n, n:])
    X = R + 1j * I
    return 0.5 * (X + X.conj().T)


def _real_rows(p):
    """Real constraint rows over (svec blocks..., free) and real right-hand sides."""
    sizes = [2 * n for n in p.block_sizes]
    offsets = np.concatenate([[0], np.cumsum([_svec_len(s) for s in sizes])]).astype(int)
    N = int(offsets[-1])
    rows, rhs = [], []
    for con in p.constraints:
        re = np.zeros(N + p.n_free)
        im = np.zeros(N + p.n_free)
        for (k, i, j), c in con.terms.items():
            c = complex(c)
            ER, EI = _entry_functionals(p.block_sizes[k], i, j)
            vR, vI = _svec(ER), _svec(EI)
            sl = slice(offsets[k], offsets[k + 1])
            re[sl] += c.real * vR - c.imag * vI
            im[sl] += c.imag * vR + c.real * vI
        for l, c in con.free.items():
            c = complex(c)
            re[N + l] += c.real
            im[N + l] += c.imag
        r = complex(con.rhs)
        rows += [re, im]
        rhs += [r.real, r.imag]
    G = np.array(rows).reshape(len(rows), N + p.n_free)
    return G, np.array(rhs), sizes, offsets


# -- interior point core -------------------------------------------------------

def _step_to_boundary(X, dX):
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li = np.linalg.inv(L)
    lam = np.linalg.eigvalsh(Li @ dX @ Li.T)[0]
    return np.inf if lam >= 0 else -1.0 / lam


class _Ipm:
    def __init__(self, Amats, B, b, Cs, cf, sizes):
        self.Amats, self.B, self.b, self.Cs, self.cf, self.sizes = Amats, B, b, Cs, cf, sizes
        self.m = b.size
        self.nf = cf.size

    def A(self, Xs):
        out = np.zeros(self.m)
        for Am, X in zip(self.Amats, Xs):
            out += Am @ X.ravel()
        return out

    def At(self, y):
        return [(y @ Am).reshape(s, s) for Am, s in zip(self.Amats, self.sizes)]


def _nt_scaling(X, S):
    L = np.linalg.cholesky(X)
    R = np.linalg.cholesky(S)
    U, d, Vt = np.linalg.svd(R.T @ L)
    G = L @ Vt.T / np.sqrt(d)
    return G, d


def solve_min(p, max_iter=100, tol=1e-10, seed=0):
    """Minimise the objective of ``p``.  Returns an :class:`SdpSolution`.

    The solver is deterministic; ``seed`` is accepted for interface symmetry
    and recorded nowhere else.  Status ``"infeasible"`` comes with a
    ``certificate`` dict holding the Farkas direction.
    """
    G, graw, sizes, offsets = _real_rows(p)
    N = int(offsets[-1])
    cf_all = np.array(p.objective_free, dtype=float)
    nblocks = len(sizes)
    Cs = [np.zeros((s, s)) for s in sizes]
    for k, C in p.objective_blocks.items():
        Cs[k] = 0.5 * _embed(C)

    # reduce the constraint rows to an orthonormal basis of their span
    if G.shape[0]:
        U, sig, Vt = np.linalg.svd(G, full_matrices=False)
        r = int(np.sum(sig > 1e-12 * max(sig[0], 1e-300)))
        b_proj = U[:, :r] @ (U[:, :r].T @ graw)
        incons = graw - b_proj
        if np.linalg.norm(incons) > 1e-9 * (1 + np.linalg.norm(graw)):
            u = incons / np.linalg.norm(incons)
            cert = {"kind": "inconsistent_equalities", "y": u.tolist(),
                    "b_dot_y": float(u @ graw), "max_eig_Aty": float(np.linalg.norm(u @ G))}
            return _failed(p, "infeasible", 0, cert)
        Gr = Vt[:r]
        b = (U[:, :r].T @ graw) / sig[:r]
    else:
        Gr = np.zeros((0, N + p.n_free))
        b = np.zeros(0)
    m = b.size
    Amats = []
    for k, s in enumerate(sizes):
        rows = Gr[:, offsets[k]:offsets[k + 1]]
        Amats.append(np.array([_smat(v, s).ravel() for v in rows]).reshape(m, s * s))
    B = Gr[:, N:]
    ipm = _Ipm(Amats, B, b, Cs, cf_all, sizes)

    ntot = sum(sizes)
    Xs, Ss = [], []
    for k, s in enumerate(sizes):
        anorm = max([np.linalg.norm(a) for a in Amats[k]] + [0.0])
        xi = max(10.0, np.sqrt(s), s * max([(1 + abs(bi)) / (1 + anorm) for bi in b] + [1.0]))
        eta = max(10.0, np.sqrt(s), anorm, np.linalg.norm(Cs[k]))
        Xs.append(xi * np.eye(s))
        Ss.append(eta * np.eye(s))
    x = np.zeros(p.n_free)
    y = np.zeros(m)
    bnorm = np.linalg.norm(b)
    cnorm = np.sqrt(sum(np.linalg.norm(C) ** 2 for C in Cs) + cf_all @ cf_all)

    inf_streak = 0
    best = (np.inf, None)  # merit and iterate, restored if the method stalls
    status = "diverged"
    it = 0
    cert = None
    for it in range(1, max_iter + 1):
        rp = b - ipm.A(Xs) - B @ x
        Aty = ipm.At(y)
        Rd = [C - a - S for C, a, S in zip(Cs, Aty, Ss)]
        rf = cf_all - B.T @ y
        mu = sum(np.sum(X * S) for X, S in zip(Xs, Ss)) / max(ntot, 1)
        pobj = cf_all @ x + sum(np.sum(C * X) for C, X in zip(Cs, Xs))
        dobj = b @ y
        pinf = np.linalg.norm(rp) / (1 + bnorm)
        dinf = np.sqrt(sum(np.linalg.norm(R) ** 2 for R in Rd) + rf @ rf) / (1 + cnorm)
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        if pinf <= tol and dinf <= tol and gap <= tol and mu * ntot <= tol * (1 + abs(pobj)):
            status = "optimal"
            break
        if not np.isfinite(pobj) or not np.isfinite(mu):
            break
        merit = max(pinf, dinf, gap)
        if merit < best[0]:
            best = (merit, ([X.copy() for X in Xs], x.copy(), y.copy(), [S.copy() for S in Ss]))
        if pobj < -1e10 * (1 + bnorm + cnorm) and pinf <= 1e-6:
            # the primal objective runs off while staying feasible: unbounded below
            cert = {"kind": "unbounded", "primal_objective": float(pobj)}
            break

        # Farkas direction for primal infeasibility: A*(y) <= 0, B^T y = 0, b.y > 0
        if dobj > 0:
            yt = y / dobj
            lam = max(max(np.linalg.eigvalsh(a)[-1] for a in Aty) / dobj if nblocks else 0.0, 0.0)
            q = max(lam, np.linalg.norm(B.T @ yt) if p.n_free else 0.0)
            if q <= 1e-8 * (1 + np.linalg.norm(yt)) and dobj > 1e6 * (1 + cnorm):
                inf_streak += 1
            else:
                inf_streak = 0
            if inf_streak >= 10:
                status = "infeasible"
                cert = {"kind": "dual_ray", "y_reduced": yt.tolist(), "b_dot_y": 1.0,
                        "max_eig_Aty": lam, "Bt_y_norm": float(np.linalg.norm(B.T @ yt)) if p.n_free else 0.0}
                break

        try:
            scal = [_nt_scaling(X, S) for X, S in zip(Xs, Ss)]
        except np.linalg.LinAlgError:
            break
        Ws = [Gk @ Gk.T for Gk, _ in scal]
        # Schur complement  M_ij = <A_i, W A_j W>
        M = np.zeros((m, m))
        for Am, W, s in zip(Amats, Ws, sizes):
            if m:
                WAW = (W @ Am.reshape(m, s, s) @ W).reshape(m, s * s)
                M += Am @ WAW.T
        K = np.block([[M, B], [B.T, np.zeros((p.n_free, p.n_free))]]) if p.n_free else M

        def direction(Rcs):
            rhs1 = rp - ipm.A([Rc - W @ R @ W for Rc, W, R in zip(Rcs, Ws, Rd)])
            rhs = np.concatenate([rhs1, rf])
            if rhs.size:
                try:
                    sol = np.linalg.solve(K, rhs)
                except np.linalg.LinAlgError:
                    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            else:
                sol = rhs
            dy, dx = sol[:m], sol[m:]
            Atdy = ipm.At(dy)
            dS = [R - a for R, a in zip(Rd, Atdy)]
            dX = [Rc - W @ S_ @ W for Rc, W, S_ in zip(Rcs, Ws, dS)]
            dX = [0.5 * (D + D.T) for D in dX]
            return dX, dx, dy, dS

        def rc_from(Rtil):
            out = []
            for (Gk, d), Rt in zip(scal, Rtil):
                H = 2.0 * Rt / (d[:, None] + d[None, :])
                out.append(Gk @ H @ Gk.T)
            return out

        def steps(dX, dS):
            ap = min([_step_to_boundary(X, D) for X, D in zip(Xs, dX)] + [np.inf])
            ad = min([_step_to_boundary(S, D) for S, D in zip(Ss, dS)] + [np.inf])
            return ap, ad

        # predictor
        Rt_aff = [-np.diag(d ** 2) for _, d in scal]
        try:
            dXa, dxa, dya, dSa = direction(rc_from(Rt_aff))
        except np.linalg.LinAlgError:
            break
        ap, ad = steps(dXa, dSa)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = sum(np.sum((X + ap * dx_) * (S + ad * ds_))
                     for X, dx_, S, ds_ in zip(Xs, dXa, Ss, dSa)) / max(ntot, 1)
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        # corrector
        Rt = []
        for (Gk, d), D1, D2 in zip(scal, dXa, dSa):
            Gi = np.linalg.inv(Gk)
            Xt = Gi @ D1 @ Gi.T
            St = Gk.T @ D2 @ Gk
            corr = 0.5 * (Xt @ St + St @ Xt)
            Rt.append(sigma * mu * np.eye(len(d)) - np.diag(d ** 2) - corr)
        try:
            dX, dx, dy, dS = direction(rc_from(Rt))
        except np.linalg.LinAlgError:
            break
        ap, ad = steps(dX, dS)
        tau = 0.98 if it < 5 else 0.995
        ap, ad = min(1.0, tau * ap), min(1.0, tau * ad)
        if ap < 1e-10 and ad < 1e-10:
            break
        Xs = [X + ap * D for X, D in zip(Xs, dX)]
        x = x + ap * dx
        y = y + ad * dy
        Ss = [S + ad * D for S, D in zip(Ss, dS)]
        Ss = [0.5 * (S + S.T) for S in Ss]
    else:
        it = max_iter
    if status == "diverged" and best[1] is not None:
        Xs, x, y, Ss = best[1]

    blocks = [_unembed(X, s // 2) for X, s in zip(Xs, sizes)]
    sol = SdpSolution(status, blocks, x.copy(), 0.0, 0.0, 0.0, it, cert)
    sol.objective = _objective(p, sol)
    sol.primal_residual = _max_violation(p, sol)[0]
    if status != "infeasible":
        pobj = cf_all @ x + sum(np.sum(C * X) for C, X in zip(Cs, Xs))
        sol.dual_gap = float(abs(pobj - b @ y))
        if status == "diverged" and _meets_invariants(p, sol):
            sol.status = "optimal"
    return sol


def _failed(p, status, it, cert):
    blocks = [np.zeros((n, n), dtype=np.complex128) for n in p.block_sizes]
    return SdpSolution(status, blocks, np.zeros(p.n_free), 0.0, np.inf, np.inf, it, cert)


def _objective(p, s):
    val = float(np.dot(p.objective_free, s.free)) if p.n_free else 0.0
    for k, C in p.objective_blocks.items():
        val += float(np.real(np.trace(np.asarray(C) @ s.blocks[k])))
    return val


def _max_violation(p, s):
    worst, idx = 0.0, None
    for c, con in enumerate(p.constraints):
        v = sum(complex(a) * s.blocks[k][i, j] for (k, i, j), a in con.terms.items())
        v += sum(complex(a) * s.free[l] for l, a in con.free.items())
        err = abs(v - complex(con.rhs))
        if err > worst:
            worst, idx = err, c
    return float(worst), idx


def _rhs_norm(p):
    return float(np.linalg.norm([complex(c.rhs) for c in p.constraints])) if p.constraints else 0.0


def _meets_invariants(p, s):
    # equality errors are judged against the magnitude of the terms that cancel
    scale = 1 + _rhs_norm(p) + max([np.linalg.norm(B) for B in s.blocks] + [0.0]) \
        + float(np.max(np.abs(s.free), initial=0.0))
    if s.primal_residual > 1e-8 * scale:
        return False
    if any(np.linalg.eigvalsh(B)[0] < -1e-9 for B in s.blocks if B.size):
        return False
    return s.dual_gap <= 1e-7 * (1 + abs(s.objective))


def verify_solution(p, s, tol=1e-8):
    """Re-check PSD-ness and every equality of ``p`` at ``s``, independent of the solver."""
    failures = []
    worst_eq, worst_idx = _max_violation(p, s)
    eq_limit = tol * (1 + _rhs_norm(p))
    if worst_eq > eq_limit:
        failures.append({"check": "equality", "constraint": worst_idx, "violation": worst_eq})
    min_eigs = []
    for k, B in enumerate(s.blocks):
        B = np.asarray(B, dtype=np.complex128)
        herm = float(np.linalg.norm(B - B.conj().T)) if B.size else 0.0
        lam = float(np.linalg.eigvalsh(0.5 * (B + B.conj().T))[0]) if B.size else 0.0
        min_eigs.append(lam)
        if herm > tol * (1 + np.linalg.norm(B)):
            failures.append({"check": "hermitian", "block": k, "violation": herm})
        if lam < -tol:
            failures.append({"check": "psd", "block": k, "min_eigenvalue": lam})
    obj = _objective(p, s)
    if abs(obj - s.objective) > tol * (1 + abs(obj)):
        failures.append({"check": "objective", "recomputed": obj, "reported": s.objective})
    return {
        "ok": not failures,
        "max_equality_violation": worst_eq,
        "worst_constraint": worst_idx,
        "min_eigenvalues": min_eigs,
        "objective": obj,
        "failures": failures,
    }


def lambda_max_problem(A, scale=1.0):
    """minimize t  s.t.  t I - scale*A = Z >= 0  (a single Hermitian block)."""
    A = np.asarray(A, dtype=np.complex128)
    n = A.shape[0]
    cons = []
    for i in range(n):
        for j in range(n):
            cons.append(Constraint({(0, i, j): 1.0}, rhs=-scale * A[i, j],
                                   free={0: -1.0} if i == j else {}))
    return SdpProblem((n,), cons, n_free=1, objective_free=(1.0,))
