"""
Tests for primal-dual points, the operator catalogue, monotonicity and
epsilon-enlargements.
"""
import numpy as np
import pytest

from monotone_rep.convexfn import Quadratic, abs_norm
from monotone_rep.errors import ConvexityError, DimensionError
from monotone_rep.operators import (MonotoneOperator, PrimalDualPoint, duality_product, eps_enlargement_test,
                                    monotonicity_check, operator_eval)


def _p(x, xstar):
    return PrimalDualPoint(np.atleast_1d(x), np.atleast_1d(xstar))


def test_duality_product_examples():
    assert duality_product(_p(0.0, 7.0)) == 0.0
    assert duality_product(_p([1.0, 2.0], [3.0, -1.0])) == 1.0
    assert duality_product(_p(1.0, 1.0)) == 1.0


def test_point_dimension_mismatch():
    with pytest.raises(DimensionError):
        PrimalDualPoint(np.zeros(2), np.zeros(3))


def test_point_does_not_freeze_caller_arrays():
    x = np.array([1.0, 2.0])
    p = PrimalDualPoint(x, np.zeros(2))
    x[0] = 5.0
    assert p.x[0] == 1.0


def test_operator_eval_catalogue():
    assert operator_eval(MonotoneOperator.identity(), [2.0]).contains([2.0])
    interval = operator_eval(MonotoneOperator.subdifferential(abs_norm(1)), [0.0])
    assert interval.is_box
    assert interval.lo.tolist() == [-1.0] and interval.hi.tolist() == [1.0]
    assert operator_eval(MonotoneOperator.rotation2d(), [1.0, 0.0]).contains([0.0, 1.0])


def test_sampled_graph_lookup():
    T = MonotoneOperator.sampled_graph([_p(0.0, 0.0), _p(0.0, 1.0), _p(1.0, 2.0)])
    values = operator_eval(T, [0.0])
    assert sorted(values.points.ravel().tolist()) == [0.0, 1.0]
    assert operator_eval(T, [0.5]).is_empty()


def test_monotonicity_examples():
    identity = [_p(t, t) for t in (-1.0, 0.0, 1.0)]
    assert monotonicity_check(identity).monotone

    result = monotonicity_check([_p(0.0, 0.0), _p(1.0, -1.0)])
    assert not result.monotone
    assert result.min_product == pytest.approx(-1.0)
    assert result.witness[0].x.tolist() == [0.0]

    angles = 2 * np.pi * np.arange(8) / 8
    circle = [PrimalDualPoint([np.cos(a), np.sin(a)], [-np.sin(a), np.cos(a)]) for a in angles]
    rotation = monotonicity_check(circle, tol=1e-12)
    assert rotation.monotone
    assert abs(rotation.min_product) < 1e-12


def test_constructors_reject_non_monotone_input():
    with pytest.raises(ConvexityError):
        MonotoneOperator.affine([[-1.0]])
    with pytest.raises(ConvexityError):
        MonotoneOperator.sampled_graph([_p(0.0, 0.0), _p(1.0, -1.0)])
    with pytest.raises(DimensionError):
        MonotoneOperator.affine(np.eye(2), [1.0])


def test_enlargement_of_identity():
    T = MonotoneOperator.identity()
    inside = eps_enlargement_test(T, _p(0.0, 1.0), 0.25)
    assert inside.contains
    assert inside.inf_value == pytest.approx(-0.25, abs=1e-12)
    assert inside.witness.x[0] == pytest.approx(0.5)

    outside = eps_enlargement_test(T, _p(0.0, 1.0), 0.2)
    assert not outside.contains
    assert outside.inf_value == pytest.approx(-0.25, abs=1e-12)


def test_enlargement_is_monotone_in_eps():
    T = MonotoneOperator.affine([[2.0, 1.0], [-1.0, 1.0]], [0.5, 0.0])
    p = _p([0.3, -0.2], [1.0, 0.4])
    verdicts = [eps_enlargement_test(T, p, eps).contains for eps in np.linspace(0.0, 2.0, 21)]
    first = verdicts.index(True)
    assert all(verdicts[first:])


def test_graph_points_pass_at_zero():
    for T in (MonotoneOperator.identity(), MonotoneOperator.rotation2d(),
              MonotoneOperator.subdifferential(abs_norm(1))):
        xs = np.linspace(-1.0, 1.0, 5)[:, None] if T.dim == 1 else np.array([[1.0, 0.0], [0.3, -0.7]])
        for q in T.sample_graph(xs):
            assert eps_enlargement_test(T, q, 0.0).contains


def test_zero_operator_unbounded_enlargement():
    result = eps_enlargement_test(MonotoneOperator.zero(), _p(1.0, 1.0), 10.0)
    assert not result.contains
    assert result.inf_value == -np.inf


def test_graph_projection():
    q, dist = MonotoneOperator.identity().project(_p(0.0, 1.0))
    assert q.x[0] == pytest.approx(0.5) and q.xstar[0] == pytest.approx(0.5)
    assert dist == pytest.approx(np.sqrt(0.5))

    q, dist = MonotoneOperator.subdifferential(abs_norm(1)).project(_p(2.0, 0.3))
    assert q.x[0] == pytest.approx(2.0) and q.xstar[0] == pytest.approx(1.0)
    assert dist == pytest.approx(0.7)

    q, _ = MonotoneOperator.subdifferential(Quadratic([[1.0]], [1.0])).project(_p(0.0, 0.0))
    assert q.xstar[0] == pytest.approx(q.x[0] + 1.0)


if __name__ == "__main__":
    print("=" * 60)
    print("Testing operators")
    print("=" * 60)
    raise SystemExit(pytest.main([__file__, "-q"]))
