"""Independent oracles and property harnesses.

Nothing here calls the SDP solver to produce its answers: the kernel search
samples kernels directly and evaluates multiplier norms by the similarity
formula, so it can be compared against :func:`calcular.kernels.agler_norm`.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NoFeasibleSample, NotInClass, SingularResolvent, UnsupportedDimension
from .functions import (Constant, Coordinate, Domain, Polynomial, Transfer, as_polynomial,
                        boundary_grid, eval_many, function_to_literal)
from .kernels import (AglerDecomposition, FinitePointSet, KernelMatrix, agler_norm, defect_matrices,
                      function_values)
from .linalg import operator_norm
from .realization import build_realization, transfer_eval_tuple
from .tuples import (CommutingTuple, apply_function, in_H_of_S, interior_sample,
                     joint_spectrum, make_generic_tuple, tuple_to_literal)

RIDGE = 1e-8
CHUNK = 512


@dataclass(frozen=True)
class SearchBudget:
    samples: int = 10_000
    refine_steps: int = 200
    seed: int = 0


@dataclass(frozen=True, eq=False)
class KernelSearch:
    value: float
    kernel: KernelMatrix
    accepted: int
    rejected: int

    @property
    def rejection_rate(self):
        total = self.accepted + self.rejected
        return self.rejected / total if total else 1.0


def worker_count():
    env = os.environ.get("CALCULAR_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# -- batched kernel evaluation ----------------------------------------------------

def _divisors(H):
    """Entrywise divisors for proposals: 1, each H_j, and the product of all H_j."""
    ones = np.ones_like(H[0])
    return np.stack([ones, *H, np.prod(H, axis=0)])


def _kernels_from_factors(W, mode, divisors):
    """k = (W W* + ridge I) / divisors[mode] entrywise, trace-normalised."""
    n = W.shape[-2]
    P = W @ np.conj(np.swapaxes(W, -1, -2)) + RIDGE * np.eye(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = P / divisors[np.asarray(mode)]
        K = 0.5 * (K + np.conj(np.swapaxes(K, -1, -2)))
        tr = np.real(np.trace(K, axis1=-2, axis2=-1))
        return K * (n / tr)[..., None, None]


def _batch_values(K, H, vals):
    """Multiplier norms of vals on each kernel in K; -inf where k is not an admissible K_S member."""
    finite = np.all(np.isfinite(K), axis=(-2, -1))
    K = np.where(finite[..., None, None], K, np.eye(K.shape[-1]))
    lam = np.linalg.eigvalsh(K)[..., 0]
    ok = finite & (lam > 1e-10)
    for Hj in H:
        ok &= np.linalg.eigvalsh(Hj * K)[..., 0] >= 0.0
    out = np.full(K.shape[:-2], -np.inf)
    if not np.any(ok):
        return out, ok
    Kg = K[ok]
    L = np.linalg.cholesky(Kg)
    X = np.linalg.solve(L, vals[:, None] * L)
    G = np.conj(np.swapaxes(X, -1, -2)) @ X
    out[ok] = np.sqrt(np.maximum(np.linalg.eigvalsh(G)[..., -1], 0.0))
    return out, ok


def _draw(rng, count, n, modes):
    p = rng.integers(1, n + 1, size=count)
    W = rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))
    W *= (np.arange(n)[None, None, :] < p[:, None, None])
    mode = np.arange(count) % modes
    return W, mode


def _search_chunk(args):
    seq, count, n, H, vals = args
    rng = np.random.default_rng(seq)
    D = _divisors(H)
    W, mode = _draw(rng, count, n, len(D))
    K = _kernels_from_factors(W, mode, D)
    v, ok = _batch_values(K, H, vals)
    i = int(np.argmax(v))
    return float(v[i]), W[i], int(mode[i]), int(ok.sum())


def _single_value(W, mode, H, vals):
    K = _kernels_from_factors(W[None], np.array([mode]), _divisors(H))
    v, _ = _batch_values(K, H, vals)
    return float(v[0]), K[0]


def kernel_search_lower_bound(phi, F, spec, budget=SearchBudget()):
    """Largest multiplier norm of phi over sampled kernels in K_S, then hill-climbed.

    Kernels are Wishart Grams W W* + ridge, divided entrywise (cycling with
    the draw index) by 1, by one defect matrix H_j, or by the product of all
    of them.  Each 1 / H_j is a Szego kernel composed with psi_j, hence
    positive, so the last kind passes every Schur test by construction.
    Draws failing any K_S test are rejected.  The best draw is refined by
    coordinate perturbations of its factor W with step halving.
    """
    vals = function_values(phi, F.points)
    n = len(F)
    H = defect_matrices(spec, F.points)
    chunks = [CHUNK] * (budget.samples // CHUNK)
    if budget.samples % CHUNK:
        chunks.append(budget.samples % CHUNK)
    seqs = np.random.SeedSequence(budget.seed).spawn(len(chunks) + 1)
    jobs = [(s, c, n, H, vals) for s, c in zip(seqs, chunks)]
    workers = min(worker_count(), len(jobs)) or 1
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(_search_chunk, jobs))
    else:
        results = [_search_chunk(j) for j in jobs]
    accepted = sum(r[3] for r in results)
    if accepted == 0:
        raise NoFeasibleSample("no sampled kernel lies in K_S", rejection_rate=1.0)
    best_v, best_W, best_mode = -np.inf, None, 0
    for v, W, mode, _ in results:
        if v > best_v:
            best_v, best_W, best_mode = v, W, mode

    W = best_W.copy()
    step = 0.1 * max(np.max(np.abs(W)), 1e-3)
    cols = max(1, int(np.max(np.flatnonzero(np.any(np.abs(W) > 0, axis=0)), initial=0)) + 1)
    for _ in range(budget.refine_steps):
        improved = False
        for a in range(n):
            for b in range(cols):
                for delta in (step, -step, 1j * step, -1j * step):
                    W2 = W.copy()
                    W2[a, b] += delta
                    v, _ = _single_value(W2, best_mode, H, vals)
                    if v > best_v:
                        best_v, W, improved = v, W2, True
        if not improved:
            step *= 0.5
    _, K = _single_value(W, best_mode, H, vals)
    kernel = KernelMatrix(F, K)
    return KernelSearch(float(best_v), kernel, accepted, budget.samples - accepted)


def sample_K_S(F, spec, count, rng):
    """Up to ``count`` kernels in K_S on F (rejection sampling, at most 50 rounds)."""
    n = len(F)
    H = defect_matrices(spec, F.points)
    out = []
    for _ in range(50):
        D = _divisors(H)
        W, mode = _draw(rng, max(4 * count, 16), n, len(D))
        K = _kernels_from_factors(W, mode, D)
        _, ok = _batch_values(K, H, np.zeros(n))
        out.extend(KernelMatrix(F, k) for k in K[ok])
        if len(out) >= count:
            break
    return out[:count]


# -- random test objects -------------------------------------------------------------

def random_commuting_tuple(dim, d, rng, kind=None, norm_bound=1.0 - 1e-3):
    """A commuting d-tuple with every ||T^r|| <= norm_bound (so spectrum inside the polydisk).

    kind "generic": shared random eigenbasis with random joint eigenvalues;
    kind "polynomial": T^1 random (possibly non-normal), T^r a polynomial in T^1.
    """
    kind = kind or ("generic" if rng.random() < 0.5 else "polynomial")
    if kind == "generic":
        V = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)) + 2 * np.eye(dim)
        pts = interior_sample(Domain("polydisk", d), dim, rng, radius=0.9)
        Vinv = np.linalg.inv(V)
        mats = [V @ np.diag(pts[:, r]) @ Vinv for r in range(d)]
    else:
        T1 = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        mats = [T1]
        for _ in range(d - 1):
            c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            mats.append(c[0] * np.eye(dim) + c[1] * T1 + c[2] * T1 @ T1)
    mats = [M * (norm_bound / max(operator_norm(M), 1e-300)) for M in mats]
    return CommutingTuple(tuple(mats))


def random_polynomial(d, rng, max_degree=3, terms=4):
    coeffs = {}
    for _ in range(terms):
        alpha = tuple(int(a) for a in rng.integers(0, max_degree + 1, size=d))
        coeffs[alpha] = coeffs.get(alpha, 0j) + complex(rng.standard_normal(), rng.standard_normal())
    return Polynomial(coeffs, d)


def _scaled(f, s):
    if isinstance(f, Constant):
        return Constant(f.c * s)
    return as_polynomial(f) * s


# -- closure report -----------------------------------------------------------------

def closure_report(spec, C, phi_pool, budget=SearchBudget(200, 0, 0), tol=1e-9,
                   generic_count=8, realized=2):
    """Sample-level checks of H(S(C)) >= C, S(H(S)) >= S and H(S(H(S))) = H(S).

    C is treated as a sample of tuples; in check (b) its members are also
    offered as candidates for H(S), so a member of C on which some psi in S
    is not contractive is reported as a counterexample.
    """
    rng = np.random.default_rng(budget.seed)
    dom = spec.domain
    report = {"seed": budget.seed, "checks": {}}

    # (a) every T in C passes the Schur tests of functions normalised to S(C)
    sc = []
    for phi in phi_pool:
        norm = max([operator_norm(apply_function(phi, T)) for T in C] + [0.0])
        if norm > 0:
            sc.append(_scaled(phi, 1.0 / norm))
    cex = []
    for i, T in enumerate(C):
        for psi in sc:
            v = operator_norm(apply_function(psi, T))
            if v > 1 + tol:
                cex.append({"tuple_index": i, "tuple": tuple_to_literal(T),
                            "function": function_to_literal(psi), "norm": v})
    report["checks"]["a"] = {"tested": len(C) * len(sc), "counterexamples": cex}

    # (b) every psi in S is contractive on sampled members of H(S)
    members = list(C)
    for _ in range(generic_count):
        n = int(rng.integers(1, 5))
        pts = interior_sample(dom, n, rng, radius=0.95)
        F = FinitePointSet(dom, pts)
        ks = sample_K_S(F, spec, 1, rng)
        if ks:
            members.append(make_generic_tuple(pts, ks[0].gram.conj(), dom))
    cex = []
    for i, T in enumerate(members):
        for j, psi in enumerate(spec):
            v = operator_norm(apply_function(psi, T))
            if v > 1 + tol:
                cex.append({"candidate_index": i, "from_class": i < len(C), "constraint": j,
                            "tuple": tuple_to_literal(T), "norm": v})
    report["checks"]["b"] = {"tested": len(members) * len(spec), "counterexamples": cex}

    # (c) members of H(S) stay members against realization-certified functions of S(H(S))
    in_class = []
    for T in members:
        try:
            if in_H_of_S(T, spec, tol) and \
                    max(operator_norm(apply_function(psi, T)) for psi in spec) <= 1 - 1e-6:
                in_class.append(T)
        except NotInClass:
            pass
    transfers = []
    for phi in [f for f in phi_pool if not isinstance(f, Transfer)][:realized]:
        pts = interior_sample(dom, int(rng.integers(1, 4)), rng, radius=0.9)
        F = FinitePointSet(dom, pts)
        vals = function_values(phi, pts)
        M, dec = agler_norm(vals, F, spec)
        if M <= 0:
            continue
        unit = AglerDecomposition(1.0, tuple(G / M ** 2 for G in dec.certificates))
        transfers.append(build_realization(vals / M, F, spec, unit))
    cex = []
    skipped = 0
    for i, T in enumerate(in_class):
        for r, R in enumerate(transfers):
            try:
                v = operator_norm(transfer_eval_tuple(R, T, check=False))
            except SingularResolvent:
                skipped += 1
                continue
            if v > 1 + 1e-8:
                cex.append({"member": tuple_to_literal(T), "realization_index": r, "norm": v})
    report["checks"]["c"] = {"tested": len(in_class) * len(transfers), "skipped": skipped,
                             "counterexamples": cex}
    for chk in report["checks"].values():
        chk["verdict"] = "pass" if not chk["counterexamples"] else "fail"
    report["counterexamples"] = sum(len(c["counterexamples"]) for c in report["checks"].values())
    return report


# -- operator space axioms ---------------------------------------------------------------

def _evaluate_matrix_function(Phi, T):
    return np.block([[apply_function(f, T) for f in row] for row in Phi.entries])


def ruan_check(Phi_pool, T_pool, trials=100, seed=0):
    """Ruan's two axioms and contractive multiplication, tested per evaluated tuple."""
    rng = np.random.default_rng(seed)
    violations = []
    worst_slack = -np.inf
    for t in range(trials):
        Phi = Phi_pool[int(rng.integers(len(Phi_pool)))]
        Psi = Phi_pool[int(rng.integers(len(Phi_pool)))]
        T = T_pool[int(rng.integers(len(T_pool)))]
        n, dim = Phi.n, T.dim
        a = _evaluate_matrix_function(Phi, T)
        b = _evaluate_matrix_function(Psi, T)
        na, nb = operator_norm(a), operator_norm(b)
        if t == 0:
            X = Y = np.eye(n)
        else:
            X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            Y = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        lhs = operator_norm(np.kron(X, np.eye(dim)) @ a @ np.kron(Y, np.eye(dim)))
        rhs = operator_norm(X) * na * operator_norm(Y)
        worst_slack = max(worst_slack, lhs - rhs)
        if lhs > rhs + 1e-9 * max(1.0, rhs):
            violations.append({"trial": t, "axiom": "bimodule", "lhs": lhs, "rhs": rhs})
        ds = operator_norm(np.block([[a, np.zeros((a.shape[0], b.shape[1]))],
                                     [np.zeros((b.shape[0], a.shape[1])), b]]))
        if abs(ds - max(na, nb)) > 1e-10 * max(1.0, ds):
            violations.append({"trial": t, "axiom": "direct_sum", "lhs": ds, "rhs": max(na, nb)})
        if Psi.n == n:
            prod = operator_norm(a @ b)
            if prod > na * nb + 1e-9 * max(1.0, na * nb):
                violations.append({"trial": t, "axiom": "multiplication", "lhs": prod, "rhs": na * nb})
    return {"trials": trials, "seed": seed, "violations": violations,
            "max_bimodule_slack": float(worst_slack),
            "verdict": "pass" if not violations else "fail"}


def von_neumann_check(T, p, resolution=256, exploratory=False):
    """Compare ||p(T)|| with the sup of |p| on a torus grid plus a Lipschitz slack."""
    p = as_polynomial(p)
    d = T.d
    if d >= 3 and not exploratory:
        raise UnsupportedDimension("von Neumann/Ando checks are only asserted for d <= 2")
    norms = [operator_norm(M) for M in T.matrices]
    if max(norms) > 1 + 1e-12:
        raise NotInClass("every coordinate must be a contraction")
    dom = Domain("polydisk", d)
    if any(not dom.contains(z, strict=True) for z in joint_spectrum(T)):
        raise NotInClass("joint spectrum must lie strictly inside the polydisk")
    value = operator_norm(apply_function(p, T))
    Z, gap = boundary_grid(dom, resolution)
    sup = float(np.max(np.abs(eval_many(p, Z))))
    slack = p.derivative_bound() * gap / 2.0
    report = {"norm_p_of_T": value, "grid_sup": sup, "lipschitz_slack": slack,
              "margin": sup + slack - value, "resolution": resolution, "d": d}
    if d >= 3:
        report["verdict"] = "exploratory"
    else:
        report["verdict"] = "FAIL" if value > sup + slack + 1e-12 else "pass"
    return report
