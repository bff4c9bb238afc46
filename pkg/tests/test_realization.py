import json

import numpy as np
import pytest

from calcular.errors import CertificateInvalid, NotInClass
from calcular.functions import Domain, Transfer, eval_point
from calcular.kernels import AglerDecomposition, FinitePointSet, agler_norm
from calcular.linalg import operator_norm, random_unitary
from calcular.oracles import random_commuting_tuple, random_polynomial
from calcular.realization import (Realization, build_realization, realization_from_dict,
                                  realization_to_dict, transfer_eval_point, transfer_eval_tuple,
                                  verify_realization)
from calcular.tuples import CommutingTuple, coordinate_class, interior_sample

D1, D2 = Domain("polydisk", 1), Domain("polydisk", 2)
S1, S2 = coordinate_class(D1), coordinate_class(D2)


def _unit_ball_realization(rng, d=2, n=3):
    dom = Domain("polydisk", d)
    S = coordinate_class(dom)
    F = FinitePointSet(dom, interior_sample(dom, n, rng, radius=0.9))
    vals = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    M, _ = agler_norm(vals, F, S)
    vals = vals / M
    M, dec = agler_norm(vals, F, S)
    return build_realization(vals, F, S, dec), F, vals, S


def test_identity_realization_by_hand():
    F = FinitePointSet(D1, [[0.0], [0.5]])
    R = build_realization([0.0, 0.5], F, S1, AglerDecomposition(1.0, (np.ones((2, 2)),)))
    assert R.state_dim == 1
    assert np.allclose(R.U, [[0, 1], [1, 0]], atol=1e-12)
    assert transfer_eval_point(R, [0.3]) == pytest.approx(0.3, abs=1e-10)
    T = random_commuting_tuple(4, 1, np.random.default_rng(1))
    assert np.linalg.norm(transfer_eval_tuple(R, T) - T[0]) <= 1e-9


@pytest.mark.parametrize("c", [0.4, -0.3 + 0.5j, 0.0])
def test_constant_realization(c):
    F = FinitePointSet(D1, [[0.0]])
    M, dec = agler_norm([c], F, S1)
    R = build_realization([c], F, S1, dec)
    assert R.state_dim == 1
    h = np.sqrt(1 - abs(c) ** 2)
    # one interpolation point pins the first column; the second is any unit
    # vector orthogonal to it, e.g. (h, -conj(c)) up to a phase
    assert np.allclose(R.U[:, 0], [c, h], atol=1e-8)
    assert abs(R.U[0, 1]) == pytest.approx(h, abs=1e-8)
    assert abs(R.U[1, 1]) == pytest.approx(abs(c), abs=1e-8)
    assert R.unitarity_residual() <= 1e-10
    assert transfer_eval_point(R, [0.0]) == pytest.approx(c, abs=1e-10)


def test_m_zero_realization():
    R = Realization(S1, np.array([[0.5j]]), (0, 0))
    assert transfer_eval_point(R, [0.7]) == 0.5j
    T = CommutingTuple((np.diag([0.1, 0.2]),))
    assert np.allclose(transfer_eval_tuple(R, T), 0.5j * np.eye(2))


def test_round_trip(rng):
    for d in (1, 2):
        R, F, vals, S = _unit_ball_realization(rng, d=d, n=3)
        assert R.unitarity_residual() <= 1e-10
        for z, v in zip(F.points, vals):
            assert abs(transfer_eval_point(R, z) - v) <= 1e-8
        rep = verify_realization(R, F, vals)
        assert rep["ok"], rep
        for z in interior_sample(S.domain, 100, rng, radius=0.999):
            assert abs(transfer_eval_point(R, z)) <= 1 + 1e-8


def test_polynomial_realization_matches_polynomial(rng):
    """Realizing p / M on F reproduces the polynomial's own values there."""
    p = random_polynomial(2, rng)
    F = FinitePointSet(D2, interior_sample(D2, 4, rng, radius=0.8))
    M, _ = agler_norm(p, F, S2)
    vals = np.array([eval_point(p, z) for z in F.points]) / M
    _, dec = agler_norm(vals, F, S2)
    R = build_realization(vals, F, S2, dec)
    f = Transfer(R)
    for z, v in zip(F.points, vals):
        assert abs(eval_point(f, z) - v) <= 1e-8


def test_tuple_evaluation(rng):
    R, _, _, S = _unit_ball_realization(rng)
    lam = np.array([0.3, -0.2j])
    scalar = CommutingTuple(tuple(np.array([[v]]) for v in lam))
    assert transfer_eval_tuple(R, scalar)[0, 0] == pytest.approx(transfer_eval_point(R, lam), abs=1e-12)
    for _ in range(20):
        T = random_commuting_tuple(int(rng.integers(1, 9)), 2, rng)
        assert operator_norm(transfer_eval_tuple(R, T)) <= 1 + 1e-8
    with pytest.raises(NotInClass):
        transfer_eval_tuple(R, CommutingTuple((0.5 * np.eye(2), np.array([[0.0, 3.0], [0.0, 0.0]]))))


def test_gauge_invariance(rng):
    R, F, vals, S = _unit_ball_realization(rng)
    blocks = [random_unitary(R.groups[j + 1] - R.groups[j], rng) for j in range(len(S))]
    W = np.zeros((R.state_dim + 1, R.state_dim + 1), dtype=complex)
    W[0, 0] = 1
    for j, B in enumerate(blocks):
        sl = slice(1 + R.groups[j], 1 + R.groups[j + 1])
        W[sl, sl] = B
    R2 = Realization(S, W @ R.U @ W.conj().T, R.groups)
    for z in interior_sample(D2, 10, rng, radius=0.95):
        assert abs(transfer_eval_point(R, z) - transfer_eval_point(R2, z)) <= 1e-10


def test_perturbed_unitary_flagged(rng):
    R, _, _, S = _unit_ball_realization(rng)
    bad = Realization(S, R.U + 1e-3 * np.ones_like(R.U), R.groups)
    rep = verify_realization(bad)
    assert not rep["unitarity_ok"]
    assert "interpolation_ok" not in rep


def test_bound_above_one_rejected():
    F = FinitePointSet(D1, [[0.0], [0.5]])
    M, dec = agler_norm([0, 0.75], F, S1)
    with pytest.raises(CertificateInvalid):
        build_realization([0, 0.75], F, S1, dec)


def test_serialization_round_trip(rng):
    R, _, _, _ = _unit_ball_realization(rng)
    back = realization_from_dict(json.loads(json.dumps(realization_to_dict(R))))
    assert np.array_equal(back.U, R.U)
    assert back.groups == R.groups
    assert back.spec == R.spec
