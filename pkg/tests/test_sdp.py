import numpy as np
import pytest

from calcular.errors import Infeasible
from calcular.linalg import random_hermitian
from calcular.sdp import Constraint, SdpProblem, lambda_max_problem, solve_min, verify_solution


def trace_problem(n, value):
    return SdpProblem((n,), [Constraint({(0, i, i): 1.0 for i in range(n)}, rhs=value)])


def test_lambda_max(rng):
    for _ in range(20):
        n = int(rng.integers(1, 11))
        A = random_hermitian(n, rng)
        s = solve_min(lambda_max_problem(A))
        assert s.status == "optimal"
        assert abs(s.free[0] - np.linalg.eigvalsh(A)[-1]) <= 1e-8


def test_trace_feasibility():
    p = trace_problem(3, 1.0)
    s = solve_min(p)
    assert s.status == "optimal"
    assert np.trace(s.blocks[0]).real == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.eigvalsh(s.blocks[0])[0] >= -1e-9
    assert verify_solution(p, s)["ok"]


def test_trace_infeasible():
    s = solve_min(trace_problem(3, -1.0))
    assert s.status == "infeasible"
    assert s.certificate["b_dot_y"] > 0
    with pytest.raises(Infeasible):
        s.raise_for_status()


def test_inconsistent_equalities_infeasible():
    p = SdpProblem((2,), [Constraint({(0, 0, 0): 1.0}, rhs=1.0), Constraint({(0, 0, 0): 2.0}, rhs=3.0)])
    s = solve_min(p)
    assert s.status == "infeasible"
    assert s.certificate["kind"] == "inconsistent_equalities"


def test_verify_flags_bad_solution(rng):
    p = lambda_max_problem(random_hermitian(4, rng))
    s = solve_min(p)
    assert verify_solution(p, s, tol=1e-9)["ok"]
    s.blocks[0] = s.blocks[0] - (np.linalg.eigvalsh(s.blocks[0])[0] + 1e-3) * np.eye(4)
    rep = verify_solution(p, s)
    assert not rep["ok"]
    assert any(f["check"] == "psd" for f in rep["failures"])


def test_empty_problem():
    p = SdpProblem((), [])
    s = solve_min(p)
    assert verify_solution(p, s)["ok"]
    assert s.objective == 0.0


def test_determinism(rng):
    p = lambda_max_problem(random_hermitian(6, rng))
    assert solve_min(p, seed=3).summary() == solve_min(p, seed=3).summary()


def test_scaling_covariance(rng):
    A = random_hermitian(5, rng)
    base = solve_min(lambda_max_problem(A)).free[0]
    for s in (0.1, 2.0, 50.0):
        assert solve_min(lambda_max_problem(A, scale=s)).free[0] == pytest.approx(s * base, abs=1e-8 * (1 + s))


def test_complex_objective_block(rng):
    """min Re tr(C X) s.t. tr X = 1, X >= 0 equals lambda_min(C)."""
    C = random_hermitian(4, rng)
    p = SdpProblem((4,), [Constraint({(0, i, i): 1.0 for i in range(4)}, rhs=1.0)], objective_blocks={0: C})
    s = solve_min(p)
    assert s.objective == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-8)
