import numpy as np
import pytest

from calcular.errors import NotCommuting, SingularGram
from calcular.functions import Constant, Coordinate, Domain, MatrixFunction, Polynomial, eval_point
from calcular.linalg import operator_norm, random_unitary
from calcular.oracles import random_commuting_tuple, random_polynomial
from calcular.tuples import (ClassSpec, CommutingTuple, apply_function, check_commuting,
                             coordinate_class, direct_sum_with_scalar, in_H_of_S, interior_sample,
                             joint_spectrum, make_generic_tuple, match_points, matrix_norm_level_n,
                             tuple_from_literal, tuple_to_literal)

N = np.array([[0.0, 1.0], [0.0, 0.0]])
D1, D2 = Domain("polydisk", 1), Domain("polydisk", 2)


def _generic(rng, n, d=2, radius=0.9):
    pts = interior_sample(Domain("polydisk", d), n, rng, radius=radius)
    W = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return make_generic_tuple(pts, W @ W.conj().T + 0.1 * np.eye(n))


def test_check_commuting(rng):
    assert check_commuting(CommutingTuple((np.diag([1, 2]), np.diag([3j, 4]))))
    assert not check_commuting(CommutingTuple((N, N.T)))
    T1 = rng.standard_normal((4, 4))
    assert check_commuting(CommutingTuple((T1, 0.5 * T1 @ T1 - 2 * T1 + np.eye(4))))


def test_joint_spectrum_cases():
    T = CommutingTuple((np.diag([0.1, 0.2j]), np.diag([-0.3, 0.4])))
    assert match_points(joint_spectrum(T), [[0.1, -0.3], [0.2j, 0.4]]) <= 1e-12
    assert match_points(joint_spectrum(CommutingTuple((N,))), [[0], [0]]) <= 1e-12
    with pytest.raises(NotCommuting):
        joint_spectrum(CommutingTuple((N, N.T)))


def test_joint_spectrum_of_generic_tuple(rng):
    pts = interior_sample(D2, 4, rng, radius=0.9)
    W = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    T = make_generic_tuple(pts, W @ W.conj().T + np.eye(4))
    bare = CommutingTuple(T.matrices)  # forces the Schur route
    assert match_points(joint_spectrum(bare), pts) <= 1e-8
    V, lam = T.eigen
    for r in range(2):
        assert np.linalg.norm(T[r] @ V - V * lam[:, r]) <= 1e-8


def test_make_generic_tuple_cases():
    T = make_generic_tuple([[0.0], [0.5]], np.eye(2))
    assert np.allclose(T[0], np.diag([0.0, 0.5]), atol=1e-14)
    with pytest.raises(SingularGram):
        make_generic_tuple([[0.0], [0.5]], np.ones((2, 2)))


def test_apply_function_cases(rng):
    T = _generic(rng, 3)
    assert np.array_equal(apply_function(Coordinate(2), T), T[1])
    assert np.array_equal(apply_function(Constant(2j), T), 2j * np.eye(3))
    A = apply_function(Polynomial({(1, 1): 1.0}), T, route="eigen")
    B = apply_function(Polynomial({(1, 1): 1.0}), T, route="horner")
    assert np.linalg.norm(A - B) <= 1e-8


def test_multiplicativity(rng):
    T = random_commuting_tuple(5, 2, rng, kind="polynomial")
    for _ in range(5):
        f, g = random_polynomial(2, rng), random_polynomial(2, rng)
        lhs = apply_function(f * g, T)
        rhs = apply_function(f, T) @ apply_function(g, T)
        assert np.linalg.norm(lhs - rhs) <= 1e-9 * (1 + np.linalg.norm(rhs))


def test_direct_sum_with_scalar(rng):
    T = CommutingTuple((np.diag([0.5]),))
    assert np.array_equal(direct_sum_with_scalar(T, [0.0])[0], np.diag([0.5, 0.0]))
    T = random_commuting_tuple(3, 2, rng)
    lam = np.array([0.2, -0.4j])
    S = direct_sum_with_scalar(T, lam, pad=2)
    assert match_points(joint_spectrum(S), np.vstack([joint_spectrum(T), [lam, lam]])) <= 1e-7
    for _ in range(10):
        f = random_polynomial(2, rng)
        want = max(operator_norm(apply_function(f, T)), abs(eval_point(f, lam)))
        assert abs(operator_norm(apply_function(f, S)) - want) <= 1e-12 * (1 + want)


def test_unitary_invariance(rng):
    T = random_commuting_tuple(4, 2, rng, kind="polynomial")
    W = random_unitary(4, rng)
    TW = T.conjugate_by(W)
    assert match_points(joint_spectrum(TW), joint_spectrum(T)) <= 1e-7
    f = random_polynomial(2, rng)
    assert abs(operator_norm(apply_function(f, TW)) - operator_norm(apply_function(f, T))) <= 1e-9


def test_in_H_of_S_cases():
    S = coordinate_class(D1)
    assert in_H_of_S(CommutingTuple((np.array([[0.3j]]),)), S)
    assert not in_H_of_S(CommutingTuple((np.diag([0.0, 2.0]),)), S)
    assert in_H_of_S(CommutingTuple((N,)), S)
    assert not in_H_of_S(CommutingTuple((1.2 * N,)), S)
    # a strictly contractive constraint family contains every scalar point
    S2 = ClassSpec((Polynomial({(1, 1): 1.0}), Polynomial({(1, 0): 0.5, (0, 1): 0.5})), D2)
    assert in_H_of_S(CommutingTuple((np.array([[0.9]]), np.array([[-0.7j]]))), S2)


def test_matrix_norm_level_n(rng):
    T = random_commuting_tuple(3, 2, rng)
    f = random_polynomial(2, rng)
    zero = Constant(0j)
    assert abs(matrix_norm_level_n(MatrixFunction([[f, zero], [zero, f]]), T)
               - operator_norm(apply_function(f, T))) <= 1e-12
    one = Constant(1.0)
    assert matrix_norm_level_n(MatrixFunction([[one, zero], [zero, one]]), T) == pytest.approx(1.0)
    lam = np.array([0.3, 0.1 - 0.2j])
    scalar = CommutingTuple(tuple(np.array([[v]]) for v in lam))
    fs = [[random_polynomial(2, rng) for _ in range(2)] for _ in range(2)]
    want = np.linalg.norm(np.array([[eval_point(g, lam) for g in row] for row in fs]), 2)
    assert abs(matrix_norm_level_n(MatrixFunction(fs), scalar) - want) <= 1e-12


def test_tuple_literal_round_trip(rng):
    T = random_commuting_tuple(3, 2, rng)
    back = tuple_from_literal(tuple_to_literal(T))
    assert all(np.array_equal(a, b) for a, b in zip(T.matrices, back.matrices))
