"""
Tests for Fitzpatrick and sigma functions, bifunction conjugates,
translations and the dual condition.
"""
import warnings

import numpy as np
import pytest

from monotone_rep.convexfn import BoxIndicator, Quadratic, SeparableSum, abs_norm
from monotone_rep.errors import DimensionError, LowerBoundWarning, PreconditionError
from monotone_rep.operators import MonotoneOperator, PrimalDualPoint
from monotone_rep.representations import (AffineFitzpatrick, BlockSum, GridBifunction, QuadraticForm,
                                          ScaledBifunction, SeparableBifunction, bifunction_conjugate, box_grid,
                                          check_dual_condition, convex_closure, family_membership, fitzpatrick,
                                          fitzpatrick_eval, graph_conjugate_equality, midpoint_convexity,
                                          represented_operator, sigma, translate, translation_conjugate_check)

HALF_SQUARE = Quadratic([[1.0]])


def _p(x, xstar):
    return PrimalDualPoint(np.atleast_1d(x), np.atleast_1d(xstar))


def _phi_identity():
    return fitzpatrick(MonotoneOperator.identity())


# --- Operator representations --- #

def test_fitzpatrick_of_identity():
    phi = _phi_identity()
    assert phi(_p(0.0, 1.0)) == pytest.approx(0.25)
    assert phi(_p(1.0, 1.0)) == pytest.approx(1.0)
    rng = np.random.default_rng(3)
    for x, xs in rng.uniform(-3, 3, size=(20, 2)):
        assert phi(_p(x, xs)) == pytest.approx(0.25 * (x + xs) ** 2)


def test_fitzpatrick_of_zero_operator():
    phi = fitzpatrick(MonotoneOperator.zero())
    assert phi(_p(3.0, 0.0)) == 0.0
    assert phi(_p(3.0, 1.0)) == np.inf


def test_sigma_of_identity():
    s = sigma(MonotoneOperator.identity())
    assert s(_p(1.0, 1.0)) == pytest.approx(1.0)
    assert s(_p(0.0, 1.0)) == np.inf


def test_sampled_graph_representations():
    T = MonotoneOperator.sampled_graph([_p(0.0, 0.0)])
    s = sigma(T)
    assert s(_p(0.0, 0.0)) == pytest.approx(0.0)
    assert s(_p(1.0, 0.0)) == np.inf
    with pytest.warns(LowerBoundWarning):
        fitzpatrick_eval(T, _p(1.0, 1.0))


def test_block_sum_for_mixed_separable_subdifferential():
    T = MonotoneOperator.subdifferential(SeparableSum([HALF_SQUARE, abs_norm(1)]))
    phi = fitzpatrick(T)
    assert isinstance(phi, BlockSum)
    assert phi(PrimalDualPoint([0.0, 2.0], [1.0, 1.0])) == pytest.approx(2.25)


# --- Conjugates --- #

def test_separable_conjugate():
    h = SeparableBifunction(HALF_SQUARE)
    hstar = bifunction_conjugate(h)
    assert hstar(_p(1.0, 2.0)) == pytest.approx(2.5)


def test_fitzpatrick_identity_conjugate_is_transposed_sigma():
    hstar = bifunction_conjugate(_phi_identity())
    assert hstar(_p(2.0, 2.0)) == pytest.approx(4.0)
    assert hstar(_p(1.0, 2.0)) == np.inf


def test_indicator_pair_conjugate():
    origin = BoxIndicator([0.0], [0.0])
    hstar = bifunction_conjugate(SeparableBifunction(origin, g=origin))
    for u in [(0.0, 0.0), (1.5, -2.0), (-3.0, 4.0)]:
        assert hstar(_p(*u)) == 0.0


def test_affine_fitzpatrick_conjugate_nonsingular():
    A = np.array([[2.0, 1.0], [-1.0, 1.0]])
    phi = AffineFitzpatrick(A, np.array([0.5, -0.5]))
    assert phi.nonsingular
    form = phi.as_quadratic_form()
    U = np.random.default_rng(0).normal(size=(10, 4))
    assert np.allclose(form.values(U), phi.values(U))


# --- Family membership --- #

def test_family_membership():
    grid = box_grid(1, 2.0, 21)
    identity = MonotoneOperator.identity()
    assert family_membership(_phi_identity(), identity, grid).verdict

    report = family_membership(QuadraticForm.pairing(1), identity, grid)
    assert not report.verdict
    assert not report.convexity_ok

    abs_operator = MonotoneOperator.subdifferential(abs_norm(1))
    assert family_membership(SeparableBifunction(abs_norm(1)), abs_operator, grid).verdict


def test_family_membership_dimension_mismatch():
    with pytest.raises(DimensionError):
        family_membership(_phi_identity(), MonotoneOperator.rotation2d(), box_grid(1, 1.0, 5))


# --- Translation --- #

def test_translation_by_zero_is_identity():
    h = SeparableBifunction(HALF_SQUARE)
    U = box_grid(1, 2.0, 9)
    assert np.allclose(translate(h, [0.0], [0.0]).values(U), h.values(U))


def test_translation_values_and_gap_identity():
    h = SeparableBifunction(HALF_SQUARE)
    z, zstar = np.array([1.0]), np.array([1.0])
    hz = translate(h, z, zstar)
    assert hz(_p(0.0, 0.0)) == pytest.approx(0.0)

    rng = np.random.default_rng(11)
    for x, xs in rng.uniform(-2, 2, size=(25, 2)):
        p = _p(x, xs)
        shifted = _p(x + z[0], xs + zstar[0])
        assert hz.gap(p) == pytest.approx(h.gap(shifted), abs=1e-12)


def test_translation_composes_back():
    h = _phi_identity().as_quadratic_form()
    back = translate(translate(h, [0.7], [-0.4]), [-0.7], [0.4])
    U = box_grid(1, 2.0, 9)
    assert np.allclose(back.values(U), h.values(U), atol=1e-12)


def test_translation_commutes_with_conjugation():
    h = SeparableBifunction(HALF_SQUARE)
    assert translation_conjugate_check(h, [1.0], [0.0], [[0.0, 0.0]]) <= 1e-12
    assert translate(h.conjugate(), [0.0], [1.0])(_p(0.0, 0.0)) == pytest.approx(0.5)

    rng = np.random.default_rng(5)
    B = rng.normal(size=(4, 4))
    form = QuadraticForm(B.T @ B + np.eye(4), rng.normal(size=4), 0.3)
    samples = rng.uniform(-2, 2, size=(40, 4))
    assert translation_conjugate_check(form, rng.normal(size=2), rng.normal(size=2), samples) <= 1e-9


# --- Dual condition --- #

def test_dual_condition_holds_for_representations():
    grid = box_grid(1, 2.0, 21)
    assert check_dual_condition(SeparableBifunction(HALF_SQUARE), grid).verdict
    assert check_dual_condition(translate(SeparableBifunction(HALF_SQUARE), [0.5], [-0.3]), grid).verdict

    rotation = fitzpatrick(MonotoneOperator.rotation2d())
    report = check_dual_condition(rotation, box_grid(2, 2.0, 11))
    assert report.verdict
    assert report.primal_min_gap == pytest.approx(0.0, abs=1e-12)


def test_dual_condition_fails_below_pairing():
    report = check_dual_condition(QuadraticForm.pairing(1, -0.1), box_grid(1, 2.0, 21))
    assert not report.verdict
    assert report.primal_min_gap == pytest.approx(-0.1)


def test_translation_keeps_dual_condition():
    grid = box_grid(1, 2.0, 21)
    h = SeparableBifunction(HALF_SQUARE)
    rng = np.random.default_rng(8)
    for z, zstar in rng.uniform(-1.5, 1.5, size=(5, 2)):
        assert check_dual_condition(translate(h, [z], [zstar]), grid).verdict, (z, zstar)

    shifted = translate(QuadraticForm.pairing(1, -0.1), [0.4], [-0.7])
    assert not check_dual_condition(shifted, grid).verdict


def test_midpoint_convexity_with_infinite_values():
    h = SeparableBifunction(BoxIndicator([-1.0], [1.0]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ok, witness = midpoint_convexity(h, np.array([-2.0, -2.0]), np.array([2.0, 2.0]), 200, 0, 1e-9)
    assert ok and witness is None


# --- Graph points and represented operator --- #

def test_graph_conjugate_equality():
    phi = _phi_identity()
    assert graph_conjugate_equality(phi, _p(1.0, 1.0))
    assert not graph_conjugate_equality(QuadraticForm.pairing(1), _p(1.0, 2.0))
    with pytest.raises(PreconditionError):
        graph_conjugate_equality(phi, _p(0.0, 1.0))


def test_represented_operator_of_identity():
    result = represented_operator(_phi_identity(), box_grid(1, 2.0, 21))
    assert result.n_points == 21
    assert result.monotone
    assert result.conjugate_equality_ok
    for q in result.operator.points:
        assert q.x[0] == pytest.approx(q.xstar[0])


# --- Convex closure --- #

def test_convex_closure_keeps_convex_samples():
    h = GridBifunction.sample(SeparableBifunction(HALF_SQUARE), radius=1.0, resolution=11)
    closed = convex_closure(h)
    assert np.allclose(closed.raw_values, h.raw_values, atol=1e-9)


def test_convex_closure_of_bump():
    nodes = box_grid(1, 1.0, 11)
    x, y = nodes[:, 0], nodes[:, 1]
    h = GridBifunction(nodes, np.maximum(x * y, 1.0 - x ** 2 - y ** 2))
    closed = convex_closure(h)
    assert np.all(closed.raw_values <= h.raw_values + 1e-12)
    origin = int(np.argmin(np.linalg.norm(nodes, axis=1)))
    assert closed.raw_values[origin] <= 1e-9

    slopes = np.random.default_rng(2).uniform(-1, 1, size=(30, 2))
    assert np.allclose(closed.conjugate().values(slopes), h.conjugate().values(slopes), atol=1e-9)

    with pytest.raises(PreconditionError):
        convex_closure(_phi_identity())


# --- Proximal maps --- #

def test_fitzpatrick_identity_prox():
    Q = 0.5 * np.ones((2, 2))
    v = np.array([0.3, -1.2])
    assert np.allclose(_phi_identity().prox(v), np.linalg.solve(Q + np.eye(2), v))

    s = 0.4
    D = np.diag([1.0 / s, s])
    assert np.allclose(ScaledBifunction(_phi_identity(), s).prox(v), np.linalg.solve(D @ Q @ D + np.eye(2), v))


def test_translated_prox_matches_closed_form():
    v = np.array([0.9, -0.4])
    for h in (_phi_identity().as_quadratic_form(), SeparableBifunction(HALF_SQUARE)):
        hz = translate(h, [0.5], [-1.0])
        assert np.allclose(hz.prox(v), hz.materialize().prox(v))


if __name__ == "__main__":
    print("=" * 60)
    print("Testing representations")
    print("=" * 60)
    raise SystemExit(pytest.main([__file__, "-q"]))
