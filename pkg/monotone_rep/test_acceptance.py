"""
End-to-end checks of the toolkit on the reference examples: extremality of
the Fitzpatrick function, conjugate pairs, translations, regularized
minimization, refinement, strict refinement, Fenchel duality, the
maximality probe and the dual condition.
"""
import math

import numpy as np
import pytest

from monotone_rep.config import GRID
from monotone_rep.convexfn import Quadratic, abs_norm, fenchel_duality, perturb
from monotone_rep.errors import PreconditionError
from monotone_rep.operators import MonotoneOperator, PrimalDualPoint
from monotone_rep.refine import br_refine, maximality_probe, regularized_min, strict_br
from monotone_rep.representations import (QuadraticForm, SeparableBifunction, bifunction_conjugate, box_grid,
                                          check_dual_condition, fitzpatrick, sigma, translate,
                                          translation_conjugate_check)

SHIFTED_SQUARE = Quadratic([[1.0]], b=[1.0])


def _operators_with_potentials():
    """(T, f) with T the subdifferential of f."""
    return [
        (MonotoneOperator.identity(), Quadratic([[1.0]])),
        (MonotoneOperator.affine([[1.0]], [1.0]), SHIFTED_SQUARE),
        (MonotoneOperator.subdifferential(abs_norm(1)), abs_norm(1)),
    ]


def test_fitzpatrick_extremality():
    U = box_grid(1, 2.0, 41)
    for T, f in _operators_with_potentials():
        phi, sig, sep = fitzpatrick(T).values(U), sigma(T).values(U), SeparableBifunction(f).values(U)
        assert np.all(phi <= sep + 1e-9)
        assert np.all(sep <= sig + 1e-9)
        assert np.any(np.isfinite(sig))

        graph = T.sample_graph(np.linspace(-2.0, 2.0, 41)[:, None])
        G = np.array([q.as_vector() for q in graph])
        assert np.max(np.abs(fitzpatrick(T).gaps(G))) <= 1e-9


def test_conjugate_pair_identity():
    T = MonotoneOperator.identity()
    phi, sig = fitzpatrick(T), sigma(T)
    phi_star, sig_star = bifunction_conjugate(phi), bifunction_conjugate(sig)
    rng = np.random.default_rng(0)
    xs = rng.uniform(-2, 2, size=(100, 2))
    xs[::2, 1] = xs[::2, 0]
    worst_phi, worst_sig = 0.0, 0.0
    for x, xstar in xs:
        lhs, rhs = phi_star(PrimalDualPoint([xstar], [x])), sig(PrimalDualPoint([x], [xstar]))
        if not (np.isinf(lhs) and np.isinf(rhs)):
            worst_phi = max(worst_phi, abs(lhs - rhs))
        worst_sig = max(worst_sig, abs(sig_star(PrimalDualPoint([xstar], [x])) - phi(PrimalDualPoint([x], [xstar]))))
    assert worst_phi <= 1e-9
    assert worst_sig <= 1e-9


@pytest.mark.parametrize("kind", ["separable", "quadratic_form"])
def test_translation_identities(kind):
    rng = np.random.default_rng(1)
    if kind == "separable":
        h = SeparableBifunction(Quadratic([[1.0]]))
    else:
        B = rng.normal(size=(2, 2))
        h = QuadraticForm(B.T @ B + np.eye(2), rng.normal(size=2), 0.1)
    gap_dev, conj_dev = 0.0, 0.0
    for _ in range(100):
        z, zstar = rng.uniform(-2, 2, size=1), rng.uniform(-2, 2, size=1)
        q = rng.uniform(-2, 2, size=2)
        p = PrimalDualPoint(q[:1], q[1:])
        shifted = PrimalDualPoint(p.x + z, p.xstar + zstar)
        gap_dev = max(gap_dev, abs(translate(h, z, zstar).gap(p) - h.gap(shifted)))
        conj_dev = max(conj_dev, translation_conjugate_check(h, z, zstar, q[None, :]))
    assert gap_dev <= 1e-12
    assert conj_dev <= 1e-9


def test_regularized_minimization_example():
    sol = regularized_min(SeparableBifunction(SHIFTED_SQUARE), 0.2)
    assert sol.inner_point.allclose(PrimalDualPoint([-0.5], [0.5]))
    assert abs(sol.inner_value) <= 1e-9
    assert sol.norm_bound == pytest.approx(0.5)
    assert sol.inner_point.x @ sol.inner_point.x == pytest.approx(0.25)
    assert sol.inner_point.x @ sol.inner_point.x <= sol.norm_bound
    cert = sol.dual_certificate
    assert abs(np.linalg.norm(cert.x) - np.linalg.norm(sol.inner_point.x)) <= 1e-6
    assert abs(np.linalg.norm(cert.xstar) - np.linalg.norm(sol.inner_point.xstar)) <= 1e-6


def _refinement_instances(count: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    catalogue = [
        (fitzpatrick(MonotoneOperator.identity()), None),
        (fitzpatrick(MonotoneOperator.affine([[1.0]], [1.0])), None),
        (fitzpatrick(MonotoneOperator.affine([[2.0, 1.0], [-1.0, 1.0]])), None),
        (SeparableBifunction(Quadratic([[1.0]])), None),
        (SeparableBifunction(abs_norm(1)), 1.0),
    ]
    out = []
    while len(out) < count:
        h, dual_box = catalogue[rng.integers(len(catalogue))]
        x = rng.uniform(-2, 2, size=h.dim)
        xstar = rng.uniform(-(dual_box or 2.0), dual_box or 2.0, size=h.dim)
        p = PrimalDualPoint(x, xstar)
        gap = h.gap(p)
        if not (np.isfinite(gap) and gap >= 0.01):
            continue
        out.append((h, p, gap / rng.uniform(0.1, 0.9)))
    return out


def test_refinement_iteration():
    for h, p, eps in _refinement_instances(200):
        trace = br_refine(h, p, eps)
        assert trace.converged, trace.diagnostic
        for k, g in enumerate(trace.gaps):
            assert g < trace.theta ** k * trace.eps0 + 1e-8
        assert all(trace.step_bounds_ok)
        raw = trace.raw_limit
        assert np.max(np.abs(raw.x - p.x)) < math.sqrt(eps)
        assert np.max(np.abs(raw.xstar - p.xstar)) < math.sqrt(eps)
        assert h.gap(raw) <= 1e-8


def test_strict_refinement():
    T = MonotoneOperator.identity()
    p = PrimalDualPoint([0.0], [1.0])
    result = strict_br(T, p, eps=0.25, eta=0.3, lam=0.5)
    t = result.point.x[0]
    assert 0.4 < t < 0.5
    assert result.point.xstar[0] == pytest.approx(t, abs=1e-9)

    rng = np.random.default_rng(6)
    for _ in range(50):
        eps = rng.uniform(0.25, 1.0)
        eta = eps * rng.uniform(1.1, 2.0)
        lam = rng.uniform(0.2, 2.0)
        result = strict_br(T, p, eps, eta, lam)
        assert np.linalg.norm(result.point.x - p.x) < lam
        assert np.linalg.norm(result.point.xstar - p.xstar) < eta / lam


def _check_duality(f, g):
    report = fenchel_duality(f, g)
    assert abs(report.primal_value - report.dual_value) <= 1e-6
    s = report.dual_maximizer
    attained = -f.conjugate()(-s) - g.conjugate()(s)
    assert attained == pytest.approx(report.dual_value, abs=1e-9)


def test_fenchel_duality_examples():
    half_square = Quadratic([[1.0]])
    _check_duality(half_square, half_square)
    _check_duality(Quadratic([[1.0]], b=[-1.0], c=0.5), Quadratic([[1.0]], b=[1.0], c=0.5))
    _check_duality(abs_norm(1), perturb(abs_norm(1), shift=[-1.0]))

    rng = np.random.default_rng(8)
    for _ in range(50):
        n = int(rng.integers(1, 3))
        B1, B2 = rng.normal(size=(n, n)), rng.normal(size=(n, n))
        _check_duality(Quadratic(B1.T @ B1 + 0.5 * np.eye(n), rng.normal(size=n)),
                       Quadratic(B2.T @ B2 + 0.5 * np.eye(n), rng.normal(size=n)))


def test_maximality_probe():
    h = SeparableBifunction(Quadratic([[1.0]]))
    result = maximality_probe(h, PrimalDualPoint([0.5], [0.5]))
    assert result.verdict
    assert result.distances[-1] <= 1e-3
    assert len(result.sequence) <= 200

    result = maximality_probe(h, PrimalDualPoint([0.5], [0.501]), tolerances=GRID)
    assert result.verdict
    assert result.distances[-1] < 1e-3
    for q in result.sequence:
        assert q.x[0] == pytest.approx(q.xstar[0], abs=1e-12)

    with pytest.raises(PreconditionError) as excinfo:
        maximality_probe(h, PrimalDualPoint([0.0], [1.0]))
    assert excinfo.value.measured == pytest.approx(-0.25, abs=1e-6)


def test_dual_condition():
    report = check_dual_condition(SeparableBifunction(Quadratic([[1.0]])), box_grid(1, 2.0, 41))
    assert report.verdict
    assert report.primal_min_gap >= -1e-6 and report.dual_min_gap >= -1e-6

    report = check_dual_condition(fitzpatrick(MonotoneOperator.rotation2d()), box_grid(2, 2.0, 21))
    assert report.verdict
    assert report.primal_min_gap >= -1e-6 and report.dual_min_gap >= -1e-6

    assert not check_dual_condition(QuadraticForm.pairing(1, -0.1), box_grid(1, 2.0, 41)).verdict


if __name__ == "__main__":
    print("=" * 60)
    print("Acceptance checks")
    print("=" * 60)
    checks = [
        ("Fitzpatrick extremality", test_fitzpatrick_extremality),
        ("Conjugate pair for the identity", test_conjugate_pair_identity),
        ("Translation identities", lambda: [test_translation_identities(k) for k in ("separable", "quadratic_form")]),
        ("Regularized minimization", test_regularized_minimization_example),
        ("Refinement iteration", test_refinement_iteration),
        ("Strict refinement", test_strict_refinement),
        ("Fenchel duality", test_fenchel_duality_examples),
        ("Maximality probe", test_maximality_probe),
        ("Dual condition", test_dual_condition),
    ]
    failed = 0
    for i, (label, check) in enumerate(checks, start=1):
        print(f"{i}. {label}...")
        try:
            check()
            print("   ✓ passed")
        except AssertionError as e:
            failed += 1
            print(f"   ✗ failed: {e}")
    print()
    print("=" * 60)
    print("✓ All checks passed" if not failed else f"✗ {failed} check(s) failed")
    print("=" * 60)
    raise SystemExit(1 if failed else 0)
