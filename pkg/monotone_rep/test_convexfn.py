"""
Tests for the convex function catalogue: conjugates, Fenchel-Young gaps,
eps-subdifferentials and Fenchel duality.
"""
import numpy as np
import pytest

from monotone_rep.convexfn import (BoxIndicator, BoxSupport, GridFunction, MaxAffine, Quadratic, SeparableSum,
                                   abs_norm, conjugate, eps_subdiff_test, fenchel_duality, fenchel_young_gap,
                                   perturb)
from monotone_rep.errors import BoundaryTouchWarning, ConvexityError, QualificationError
from monotone_rep.operators import MonotoneOperator, PrimalDualPoint, operator_eval


def _p(x, xstar):
    return PrimalDualPoint(np.atleast_1d(x), np.atleast_1d(xstar))


def test_quadratic_conjugate():
    half_square = Quadratic([[1.0]])
    assert conjugate(half_square)([3.0]) == pytest.approx(4.5)

    f = Quadratic([[2.0, 0.5], [0.5, 1.0]], [1.0, -1.0], 0.3)
    fstar = conjugate(f)
    s = np.array([0.7, -0.2])
    x_opt = np.linalg.solve(f.A, s - f.b)
    assert fstar(s) == pytest.approx(s @ x_opt - f(x_opt), abs=1e-12)


def test_abs_and_indicator_conjugates():
    abs_conj = conjugate(abs_norm(1))
    assert abs_conj([0.5]) == 0.0
    assert abs_conj([1.5]) == np.inf

    zero_set = conjugate(BoxIndicator([0.0], [0.0]))
    for s in (-3.0, 0.0, 2.5):
        assert zero_set([s]) == 0.0


def test_separable_sum_conjugate():
    f = SeparableSum([Quadratic([[1.0]]), abs_norm(1)])
    fstar = conjugate(f)
    assert fstar([1.0, 0.5]) == pytest.approx(0.5)
    assert fstar([1.0, 2.0]) == np.inf


def test_grid_conjugate_matches_closed_form():
    grid = GridFunction.sample(Quadratic([[1.0]]), radius=2.0, resolution=401)
    gstar = grid.conjugate()
    s = np.linspace(-1.5, 1.5, 31)[:, None]
    assert np.max(np.abs(gstar.evaluate(s) - 0.5 * s[:, 0] ** 2)) < 1e-4
    with pytest.warns(BoundaryTouchWarning):
        gstar([3.0])


def test_separable_grid_conjugates_per_axis():
    f = SeparableSum([GridFunction.sample(Quadratic([[1.0]]), radius=2.0, resolution=201),
                      GridFunction.sample(abs_norm(1), radius=2.0, resolution=201)])
    fstar = conjugate(f)
    assert isinstance(fstar, SeparableSum)
    assert all(isinstance(c, MaxAffine) and c.dim == 1 for c in fstar.components)
    s = np.column_stack([np.linspace(-1.5, 1.5, 13), np.linspace(-0.9, 0.9, 13)])
    assert np.max(np.abs(fstar.evaluate(s) - 0.5 * s[:, 0] ** 2)) < 1e-3


def test_conjugation_reverses_order():
    x = np.linspace(-1.0, 1.0, 9)[:, None]
    s = np.linspace(-3.0, 3.0, 25)[:, None]
    pairs = [
        (Quadratic([[1.0]]), Quadratic([[2.0]])),
        (abs_norm(1), perturb(abs_norm(1), const=0.5)),
        (BoxIndicator([-2.0], [2.0]), BoxIndicator([-1.0], [1.0])),
    ]
    for f, g in pairs:
        assert np.all(f.evaluate(x) <= g.evaluate(x))
        assert np.all(conjugate(g).evaluate(s) <= conjugate(f).evaluate(s))


def _same_values(a, b, tol=1e-9):
    both_inf = np.isinf(a) & np.isinf(b)
    return bool(np.all(both_inf | np.isclose(a, b, rtol=tol, atol=tol)))


def test_biconjugate_of_each_catalogue_kind():
    rng = np.random.default_rng(11)
    B = rng.normal(size=(2, 2))
    catalogue = [
        Quadratic(B.T @ B + 0.5 * np.eye(2), b=[0.4, -1.0], c=0.7),
        BoxSupport([-1.0, -0.5], [2.0, 1.0], center=[0.3, -0.2], const=1.5),
        BoxIndicator([-1.0, 0.0], [1.0, 2.0], linear=[0.5, -1.0], const=0.25),
        perturb(abs_norm(2), shift=[1.0, -0.5], linear=[0.2, 0.3]),
        SeparableSum([Quadratic([[2.0]], b=[0.5]), BoxIndicator([-1.0], [1.0], linear=[0.3])]),
    ]
    X = rng.uniform(-2.5, 2.5, size=(200, 2))
    for f in catalogue:
        assert _same_values(conjugate(conjugate(f)).evaluate(X), f.evaluate(X)), f

    grid = GridFunction.sample(Quadratic([[1.0]]), radius=2.0, resolution=41)
    assert _same_values(conjugate(conjugate(grid)).evaluate(grid.nodes), grid.evaluate(grid.nodes))


def test_max_affine_prox_with_many_pieces():
    rng = np.random.default_rng(5)
    centers = rng.uniform(-1.0, 1.0, size=(3000, 4))
    # tangents of 1/2 |y|^2 at the centers
    f = MaxAffine(centers, 0.5 * np.sum(centers ** 2, axis=1))
    v = rng.normal(scale=0.5, size=4)
    y = f.prox(v)

    def objective(u):
        return f(u) + 0.5 * np.sum((u - v) ** 2)

    base = objective(y)
    for d in rng.normal(size=(64, 4)):
        assert objective(y + 1e-3 * d / np.linalg.norm(d)) >= base - 1e-10


def test_fenchel_young_gap():
    half_square = Quadratic([[1.0]])
    assert fenchel_young_gap(half_square, _p(1.0, 1.0)) == pytest.approx(0.0)
    assert fenchel_young_gap(half_square, _p(0.0, 1.0)) == pytest.approx(0.5)
    assert fenchel_young_gap(abs_norm(1), _p(2.0, 1.0)) == pytest.approx(0.0)
    assert fenchel_young_gap(abs_norm(1), _p(2.0, 3.0)) == np.inf


@pytest.mark.parametrize("method", ["conjugate", "definition"])
def test_eps_subdifferential(method):
    half_square = Quadratic([[1.0]])
    assert eps_subdiff_test(half_square, _p(0.0, 1.0), 0.5, method=method)
    assert not eps_subdiff_test(half_square, _p(0.0, 1.0), 0.4, method=method)


@pytest.mark.parametrize("f", [abs_norm(1), Quadratic([[1.0]], b=[0.5]), BoxIndicator([-1.0], [1.0], linear=[0.2])],
                         ids=["abs", "quadratic", "box_indicator"])
def test_exact_subdifferential_matches_operator(f):
    T = MonotoneOperator.subdifferential(f)
    for x in (-2.0, -1.0, 0.0, 0.5, 1.0, 2.0):
        for xstar in (-1.5, -1.0, 0.0, 0.3, 1.0, 1.5):
            expected = operator_eval(T, [x]).contains([xstar])
            assert eps_subdiff_test(f, _p(x, xstar), 0.0) == expected, (x, xstar)


def test_perturbation_folds_and_conjugates():
    shifted = perturb(abs_norm(1), shift=[-1.0])
    assert shifted([3.0]) == pytest.approx(2.0)
    assert conjugate(shifted)([0.5]) == pytest.approx(0.5)

    q = perturb(Quadratic([[1.0]]), shift=[1.0], linear=[2.0], const=0.5)
    assert isinstance(q, Quadratic)
    assert q([1.0]) == pytest.approx(0.5 * 4.0 + 2.0 + 0.5)


def test_non_convex_quadratic_rejected():
    with pytest.raises(ConvexityError):
        Quadratic([[-1.0]])


def test_fenchel_duality_closed_form_examples():
    half_square = Quadratic([[1.0]])
    report = fenchel_duality(half_square, half_square)
    assert report.primal_value == pytest.approx(0.0, abs=1e-12)
    assert report.dual_value == pytest.approx(0.0, abs=1e-12)

    left = Quadratic([[1.0]], b=[-1.0], c=0.5)
    right = Quadratic([[1.0]], b=[1.0], c=0.5)
    report = fenchel_duality(left, right)
    assert report.primal_value == pytest.approx(1.0)
    assert report.dual_value == pytest.approx(1.0)
    assert report.dual_maximizer[0] == pytest.approx(1.0)


def test_fenchel_duality_polyhedral():
    report = fenchel_duality(abs_norm(1), perturb(abs_norm(1), shift=[-1.0]))
    assert report.primal_value == pytest.approx(1.0, abs=1e-9)
    assert report.dual_value == pytest.approx(1.0, abs=1e-9)
    assert report.dual_maximizer[0] == pytest.approx(-1.0, abs=1e-9)
    assert abs(report.gap) <= 1e-9


def test_fenchel_duality_random_quadratics():
    rng = np.random.default_rng(7)
    for _ in range(50):
        B1, B2 = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
        f = Quadratic(B1.T @ B1 + 0.5 * np.eye(2), rng.normal(size=2), rng.normal())
        g = Quadratic(B2.T @ B2 + 0.5 * np.eye(2), rng.normal(size=2), rng.normal())
        report = fenchel_duality(f, g)
        assert abs(report.primal_value - report.dual_value) <= 1e-9 * max(1.0, abs(report.primal_value))


def test_fenchel_duality_without_qualification():
    with pytest.raises(QualificationError):
        fenchel_duality(BoxIndicator([10.0], [11.0]), abs_norm(1))


if __name__ == "__main__":
    print("=" * 60)
    print("Testing convex functions")
    print("=" * 60)
    raise SystemExit(pytest.main([__file__, "-q"]))
