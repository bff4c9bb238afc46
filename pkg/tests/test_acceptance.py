"""Acceptance criteria 1-7.

Each test prints one ``criterion N PASS|FAIL`` line with the measured
quantities and its runtime, then asserts.  Run on its own with

    pytest tests/test_acceptance.py -v
"""

import json
import time

import numpy as np
import pytest

from calcular.functions import Domain, eval_point
from calcular.jobs import parse_job, run_job
from calcular.kernels import (FinitePointSet, agler_norm, builtin_kernel, finite_multiplier_norm,
                              model_tuple)
from calcular.linalg import operator_norm, random_hermitian, random_unitary
from calcular.oracles import (SearchBudget, closure_report, kernel_search_lower_bound,
                              random_commuting_tuple, random_polynomial, ruan_check,
                              von_neumann_check)
from calcular.functions import MatrixFunction
from calcular.realization import build_realization, transfer_eval_point, transfer_eval_tuple
from calcular.sdp import Constraint, SdpProblem, lambda_max_problem, solve_min
from calcular.tuples import (apply_function, coordinate_class, direct_sum_with_scalar,
                             interior_sample, joint_spectrum, make_generic_tuple, match_points)


@pytest.fixture
def say(capsys):
    def emit(n, ok, detail, seconds):
        with capsys.disabled():
            print(f"\ncriterion {n} {'PASS' if ok else 'FAIL'}: {detail} ({seconds:.2f} s)")
    return emit


def pick_norm_2pt(z, w):
    """Smallest M with the 2x2 Pick matrix [(M^2 - w_a conj(w_b)) / (1 - z_a conj(z_b))] PSD."""
    a, b = 1 - abs(z[0]) ** 2, 1 - abs(z[1]) ** 2
    c = abs(1 - z[0] * np.conj(z[1])) ** 2
    u, v, x = abs(w[0]) ** 2, abs(w[1]) ** 2, w[0] * np.conj(w[1])
    coeffs = [1 / (a * b) - 1 / c, -(u + v) / (a * b) + 2 * x.real / c, u * v / (a * b) - abs(x) ** 2 / c]
    t = max([r.real for r in np.roots(coeffs) if abs(r.imag) < 1e-9] + [max(u, v)])
    return float(np.sqrt(t))


def test_criterion_1_pick_closed_form(say):
    rows, ok = [], True
    t_total = time.perf_counter()
    for target in (0.75, 0.5):
        job = {"command": "norm", "domain": {"kind": "polydisk", "d": 1},
               "points": [[[0, 0]], [[0.5, 0]]], "values": [[0, 0], [target, 0]]}
        t0 = time.perf_counter()
        got = run_job(parse_job(json.dumps(job))).report["result"]
        dt = time.perf_counter() - t0
        want = pick_norm_2pt([0, 0.5], [0, target])
        good = abs(got - want) <= 1e-6 and dt < 1.0
        ok &= good
        rows.append(f"0->0, 1/2->{target}: {got:.10f} vs Pick {want:.10f}, {dt:.3f} s")
    say(1, ok, "; ".join(rows), time.perf_counter() - t_total)
    assert ok


def test_criterion_2_three_route_agreement(say):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst_model, worst_excess, worst_gap_d1 = 0.0, -np.inf, 0.0
    for i in range(10):
        d = 1 if i < 5 else 2
        dom = Domain("polydisk", d)
        S = coordinate_class(dom)
        n = int(rng.integers(1, 4)) if d == 1 else int(rng.integers(1, 5))
        F = FinitePointSet(dom, interior_sample(dom, n, rng, radius=0.9))
        p = random_polynomial(d, rng)
        M, _ = agler_norm(p, F, S)
        search = kernel_search_lower_bound(p, F, S, SearchBudget(10_000, 200, i))
        model = operator_norm(apply_function(p, model_tuple(search.kernel)))
        kernel_value = finite_multiplier_norm(p, search.kernel)
        worst_model = max(worst_model, abs(model - kernel_value), abs(kernel_value - search.value))
        worst_excess = max(worst_excess, search.value - M)
        if d == 1:
            worst_gap_d1 = max(worst_gap_d1, M - search.value)
    dt = time.perf_counter() - t0
    ok = worst_model <= 1e-8 and worst_excess <= 1e-6 and worst_gap_d1 <= 1e-3 and dt < 60
    say(2, ok, f"|model - kernel| <= {worst_model:.2e}, max(search - SDP) = {worst_excess:.2e}, "
               f"max d=1 gap = {worst_gap_d1:.2e}", dt)
    assert ok


def test_criterion_3_realization_round_trip(say):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst_u, worst_interp, worst_tuple, tuples = 0.0, 0.0, 0.0, 0
    for i in range(10):
        d = 1 + i % 2
        dom = Domain("polydisk", d)
        S = coordinate_class(dom)
        n = int(rng.integers(1, 5))
        F = FinitePointSet(dom, interior_sample(dom, n, rng, radius=0.9))
        vals = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        M, _ = agler_norm(vals, F, S)
        vals = vals * (1.0 if i % 3 else 0.8) / M  # some with M = 1, some with M < 1
        M, dec = agler_norm(vals, F, S)
        R = build_realization(vals, F, S, dec)
        worst_u = max(worst_u, R.unitarity_residual())
        worst_interp = max(worst_interp, max(abs(transfer_eval_point(R, z) - v) for z, v in zip(F.points, vals)))
        for _ in range(20):
            T = random_commuting_tuple(int(rng.integers(1, 9)), d, rng)
            worst_tuple = max(worst_tuple, operator_norm(transfer_eval_tuple(R, T)))
            tuples += 1
    dt = time.perf_counter() - t0
    ok = worst_u <= 1e-10 and worst_interp <= 1e-8 and worst_tuple <= 1 + 1e-8 and dt < 30
    say(3, ok, f"max ||U*U - I|| = {worst_u:.2e}, max interpolation error = {worst_interp:.2e}, "
               f"max ||phi(T)|| = {worst_tuple:.6f} over {tuples} tuples", dt)
    assert ok


def test_criterion_4_sdp_suite(say):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        A = random_hermitian(int(rng.integers(1, 11)), rng)
        s = solve_min(lambda_max_problem(A))
        worst = max(worst, abs(s.free[0] - np.linalg.eigvalsh(A)[-1]) if s.status == "optimal" else np.inf)
    planted = [SdpProblem((n,), [Constraint({(0, i, i): 1.0 for i in range(n)}, rhs=-1.0)]) for n in (1, 2, 3, 5)]
    planted.append(SdpProblem((2,), [Constraint({(0, 0, 0): 1.0}, rhs=-0.5)]))
    planted.append(SdpProblem((2,), [Constraint({(0, 0, 1): 1.0}, rhs=1.0),
                                     Constraint({(0, 0, 1): 1.0}, rhs=2.0)]))
    detected = sum(solve_min(p).status == "infeasible" for p in planted)
    p = lambda_max_problem(random_hermitian(7, rng))
    same = json.dumps(solve_min(p, seed=11).summary()) == json.dumps(solve_min(p, seed=11).summary())
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and detected == len(planted) and same and dt < 10
    say(4, ok, f"max |t - lambda_max| = {worst:.2e} over 100 problems, "
               f"infeasible detected {detected}/{len(planted)}, byte-identical rerun: {same}", dt)
    assert ok


def test_criterion_5_tuple_invariants(say):
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    spec_err, norm_err = 0.0, 0.0
    for _ in range(20):
        dim = int(rng.integers(1, 7))
        T = random_commuting_tuple(dim, 2, rng)
        TW = T.conjugate_by(random_unitary(dim, rng))
        p = random_polynomial(2, rng)
        spec_err = max(spec_err, match_points(joint_spectrum(TW), joint_spectrum(T)))
        norm_err = max(norm_err, abs(operator_norm(apply_function(p, TW)) - operator_norm(apply_function(p, T))))
    sum_err = 0.0
    for _ in range(50):
        T = random_commuting_tuple(int(rng.integers(1, 6)), 2, rng)
        lam = interior_sample(Domain("polydisk", 2), 1, rng)[0]
        p = random_polynomial(2, rng)
        want = max(operator_norm(apply_function(p, T)), abs(eval_point(p, lam)))
        sum_err = max(sum_err, abs(operator_norm(apply_function(p, direct_sum_with_scalar(T, lam))) - want))
    route_err = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 7))
        W = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        T = make_generic_tuple(interior_sample(Domain("polydisk", 2), n, rng, radius=0.9), W @ W.conj().T + 0.5 * np.eye(n))
        p = random_polynomial(2, rng)
        route_err = max(route_err, np.linalg.norm(apply_function(p, T, route="eigen") - apply_function(p, T, route="horner"), 2))
    dt = time.perf_counter() - t0
    ok = spec_err <= 1e-7 and norm_err <= 1e-9 and sum_err <= 1e-12 and route_err <= 1e-8
    say(5, ok, f"spectrum {spec_err:.1e}, norm {norm_err:.1e}, direct sum {sum_err:.1e} (50 samples), "
               f"eigen vs Horner {route_err:.1e}", dt)
    assert ok


def test_criterion_6_closure_and_axioms(say):
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    closure_cex = 0
    for i in range(5):
        d = 1 + i % 2
        dom = Domain("polydisk", d)
        C = [random_commuting_tuple(int(rng.integers(1, 5)), d, rng) for _ in range(3)]
        pool = [random_polynomial(d, rng) for _ in range(3)]
        closure_cex += closure_report(coordinate_class(dom), C, pool, SearchBudget(200, 0, i))["counterexamples"]
    T_pool = [random_commuting_tuple(int(rng.integers(1, 7)), 2, rng) for _ in range(8)]
    Phi_pool = [MatrixFunction([[random_polynomial(2, rng) for _ in range(n)] for _ in range(n)]) for n in (1, 2, 3)]
    ruan = ruan_check(Phi_pool, T_pool, trials=100, seed=6)
    fails = 0
    for i in range(50):
        T = random_commuting_tuple(int(rng.integers(1, 7)), 1 + i % 2, rng)
        fails += von_neumann_check(T, random_polynomial(T.d, rng), 256)["verdict"] == "FAIL"
    dt = time.perf_counter() - t0
    ok = closure_cex == 0 and not ruan["violations"] and fails == 0 and dt < 60
    say(6, ok, f"closure counterexamples {closure_cex} over 5 configurations, Ruan violations "
               f"{len(ruan['violations'])}/100, von Neumann FAIL {fails}/50", dt)
    assert ok


def test_criterion_7_builtin_cubic_kernel(say):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    dom = Domain("polydisk", 1)
    F = FinitePointSet(dom, interior_sample(dom, 20, rng, radius=0.95))
    k = builtin_kernel("example-2-4", F)
    z = F.points[:, 0]
    x = np.outer(z, z.conj())
    closed = (1 + x) / (1 - x) ** 3
    rel = float(np.max(np.abs(k.gram - closed) / np.maximum(1.0, np.abs(closed))))
    diag = np.real(np.diag(closed))
    dt = time.perf_counter() - t0
    ok = rel <= 1e-10
    say(7, ok, f"max relative error {rel:.2e} over 20 points (400 Gram entries), "
               f"closed form up to {diag.max():.3g}", dt)
    assert ok
