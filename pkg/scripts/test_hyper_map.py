#!/usr/bin/env python3
"""
Hypergeometric map tests
Separable moments, the determinant closed form, qKZ shifts, the mu-equation and total differences
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from math import pi

import numpy as np
import pytest

from api.utils import hyper_map as hm
from api.utils import weight_functions as wf
from api.utils.errors import ConvergenceRegimeError, QuadratureError
from api.utils.qkz_operators import ModelParams

Z2 = (0.11 + 0.07j, -0.13 + 0.02j)
Z3 = Z2 + (0.05 - 0.16j,)
Z4 = Z3 + (0.17 + 0.12j,)


def params(n=2, ell=1, mu=1j * pi):
    return ModelParams(n=n, ell=ell, mu=mu, z={2: Z2, 3: Z3, 4: Z4}[n])


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_vandermonde_shift_expansion():
    assert hm.vandermonde_shift(1, 1.0) == {(0,): 1.0}
    assert hm.vandermonde_shift(2, 1.0) == {(0, 0): -1.0, (1, 0): 1.0, (0, 1): -1.0}
    # three factors, each linear: total degree 3
    assert max(sum(e) for e in hm.vandermonde_shift(3, 1.0)) == 3


def test_coordinate_sum():
    assert hm.coordinate_sum(2) == {(1, 0): 1.0, (0, 1): 1.0}


def test_richardson_is_exact_for_quadratics():
    eps = [0.2, 0.1, 0.05]
    values = [np.array([3.0 + 2 * e - 5 * e ** 2]) for e in eps]
    assert abs(hm.richardson(values, eps)[0] - 3.0) < 1e-12


def test_numerical_rank():
    assert hm.numerical_rank(np.array([1.0, 0.5, 1e-9])) == (2, pytest.approx(5e8))
    rank, gap = hm.numerical_rank(np.array([1.0, 0.5]))
    assert rank == 2 and gap == float("inf")
    assert hm.numerical_rank(np.array([]))[0] == 0


def test_det_closed_form_trivial_weight():
    assert hm.det_closed_form(params(ell=0)) == 1.0


@pytest.mark.parametrize("n,ell", [(2, 1), (3, 1), (3, 2), (4, 2)])
def test_det_closed_form_shift_matches_det_k(n, ell):
    p = params(n=n, ell=ell)
    for m in range(1, n + 1):
        closed, direct = hm.det_shift_ratio(p, m)
        assert rel(closed, direct) < 1e-10


def test_moments_diverge_at_mu_zero():
    with pytest.raises(ConvergenceRegimeError):
        hm.MomentTable.compute(params(n=2, mu=0.0), max_power=1)


def test_hyper_matrix_determinant():
    p = params(n=2, ell=1)
    matrix = hm.hyper_matrix(p)
    assert matrix.entries.shape == (2, 2)
    assert rel(matrix.det(), hm.det_closed_form(p)) < 1e-6


def test_hyper_integral_is_linear_in_W():
    p = params(n=2, ell=1)
    matrix = hm.hyper_matrix(p)
    coeffs = wf.PeriodicFnCoeffs(2, 1, [0.3 - 1j, 2.0])
    value, _ = hm.hyper_integral((2,), coeffs, p)
    assert rel(value, matrix.entries[1] @ coeffs.coeffs) < 1e-9
    psi = hm.psi_of_W(coeffs, p, matrix=matrix)
    assert np.allclose(psi.weight_coords(1), matrix.entries @ coeffs.coeffs)


def test_psi_rejects_wrong_arity():
    with pytest.raises(ValueError):
        hm.psi_of_W(wf.PeriodicFnCoeffs.constant(2), params(n=2, ell=1))


@pytest.mark.slow
def test_separable_entry_matches_iterated_oracle():
    p = params(n=3, ell=2)
    M = N = (1, 2)
    entry, _ = hm.hyper_integral(M, N, p)
    path = hm.asym_path_entry(M, N, p)
    assert rel(path.value, entry) < 1e-6


def test_qkz_shift():
    p = params(n=2, ell=1, mu=0.5j * pi)
    coeffs = wf.PeriodicFnCoeffs(2, 1, [1.0, -0.4 + 0.7j])
    for m in (1, 2):
        assert hm.qkz_shift_residual(coeffs, p, m) < 1e-6


def test_singular_solutions_at_mu_zero():
    p = params(n=2, ell=1, mu=0.0)
    coeffs = wf.PeriodicFnCoeffs(2, 1, [0.8, 1.3j])
    assert hm.singular_residual(hm.psi_of_W(coeffs, p)) < 1e-5


@pytest.mark.slow
def test_mu_equation():
    p = params(n=2, ell=1, mu=1j * pi)
    coeffs = wf.PeriodicFnCoeffs(2, 1, [1.0, 0.5])
    assert hm.mu_ode_residual(coeffs, p) < 1e-5


@pytest.mark.slow
@pytest.mark.parametrize("family", ["w", "g", "r_M"])
def test_total_differences_integrate_to_zero(family):
    p = params(n=2, ell=1, mu=1j * pi)
    coeffs = wf.PeriodicFnCoeffs(2, 1, [1.0, -0.6j])
    report = hm.total_difference_residual((1,), coeffs, p, family=family, tol=1e-9)
    assert report.family == family
    assert report.residual < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("family", ["w", "g", "r_M"])
def test_total_differences_vanish_at_mu_zero(family):
    p = params(n=2, ell=1, mu=0.0)
    coeffs = wf.PeriodicFnCoeffs(2, 1, [0.7, 1.0 + 0.2j])
    report = hm.total_difference_residual((2,), coeffs, p, family=family, tol=1e-9)
    assert report.residual < 1e-6


def test_r_m_integral_at_mu_zero_stays_in_the_convergent_range():
    # the coordinate-sum term has coefficient e^mu - 1 = 0
    p = params(n=4, ell=2, mu=0.0)
    coeffs = wf.PeriodicFnCoeffs(4, 2, [1.0, -0.3j, 0.5, 0.2, -0.8, 0.4 + 0.1j])
    report = hm.total_difference_residual((1, 2), coeffs, p, family="r_M", tol=1e-9)
    assert report.family == "r_M"
    assert report.residual < 1e-6


def test_unknown_total_difference_family():
    with pytest.raises(ValueError):
        hm.total_difference_residual((1,), wf.PeriodicFnCoeffs(2, 1, [1, 0]), params(), family="bogus")


def test_exponential_vanishing_uses_the_regularized_limit(monkeypatch):
    # entries linear in eps extrapolate to base; mu = 0 itself does not converge
    base = np.arange(1, 10, dtype=complex).reshape(3, 3) + np.eye(3)

    def fake_hyper_matrix(p, tol=hm.DEFAULT_TOL, workers=1, allow_boundary=False, max_depth=hm.MAX_DEPTH):
        eps = p.mu.imag
        if eps == 0:
            raise QuadratureError("no convergence after depth 14")
        return hm.HyperMatrix(p, (1 + eps) * base, np.zeros((3, 3)))

    monkeypatch.setattr(hm, "hyper_matrix", fake_hyper_matrix)
    p = params(n=3, ell=2, mu=0.0).with_mu(0)
    report = hm.exponential_vanishing_report(p, rng=np.random.default_rng(7))

    rng = np.random.default_rng(7)
    expected = 0.0
    for fn in wf.exponential_subspace_basis(2, p):
        coeffs, _ = wf.fit_coeffs(fn, 2, p, rng)
        c = coeffs.coeffs
        expected = max(expected, np.linalg.norm(base @ c) / (np.linalg.norm(base) * np.linalg.norm(c)))
    assert report.dimension == 1
    assert report.regularized == pytest.approx(expected, rel=1e-9)
    assert report.direct is None
    assert "no convergence" in report.direct_error


@pytest.mark.slow
def test_exponential_vanishing_at_mu_zero():
    report = hm.exponential_vanishing_report(params(n=3, ell=2, mu=0.0), rng=np.random.default_rng(3))
    assert report.fit_residual < 1e-8
    assert report.regularized < 1e-5


def test_kernel_report_argument_checks():
    with pytest.raises(ConvergenceRegimeError):
        hm.kernel_report(params(n=2, ell=1))
    with pytest.raises(ConvergenceRegimeError):
        hm.kernel_report(params(n=3, ell=2, mu=0.0))


def test_kernel_report_rank_cut():
    p = params(n=2, ell=1, mu=0.0)
    matrix = hm.HyperMatrix(p, np.diag([1.0, 1e-4]).astype(complex), np.zeros((2, 2)))
    loose = hm.kernel_report(p, matrix=matrix)
    assert loose.rank == 2 and not loose.holds
    strict = hm.kernel_report(p, matrix=matrix, rank_cut=1e-3)
    assert strict.rank == strict.expected_rank == 1
    assert strict.holds


@pytest.mark.slow
def test_kernel_at_mu_zero():
    report = hm.kernel_report(params(n=4, ell=1, mu=0.0))
    assert report.rank == report.expected_rank == 3
    assert report.holds
    assert report.kernel_angle < 1e-3
    assert report.image_angle < 1e-3


def test_x_image_dimension():
    basis, dim = hm.x_image_coords(4, 2)
    assert basis.shape == (6, dim)
    assert hm.x_image_coords(4, 0)[1] == 0


def main():
    """Run all hypergeometric map tests"""
    print("🧪 Starting hypergeometric map tests...\n")

    tests = [
        ("Polynomial Expansion", test_vandermonde_shift_expansion),
        ("Richardson", test_richardson_is_exact_for_quadratics),
        ("Numerical Rank", test_numerical_rank),
        ("Convergence Regime", test_moments_diverge_at_mu_zero),
        ("Determinant", test_hyper_matrix_determinant),
        ("Linearity", test_hyper_integral_is_linear_in_W),
        ("Iterated Oracle", test_separable_entry_matches_iterated_oracle),
        ("qKZ Shift", test_qkz_shift),
        ("Singular at mu = 0", test_singular_solutions_at_mu_zero),
        ("mu Equation", test_mu_equation),
        ("Rank Cut", test_kernel_report_rank_cut),
        ("r_M at mu = 0", test_r_m_integral_at_mu_zero_stays_in_the_convergent_range),
        ("Kernel at mu = 0", test_kernel_at_mu_zero),
    ]

    results = {}
    for test_name, test_func in tests:
        try:
            test_func()
            results[test_name] = True
        except Exception as e:
            print(f"❌ {test_name} failed: {e}")
            results[test_name] = False

    passed = sum(results.values())
    for test_name, result in results.items():
        print(f"{test_name}: {'✅ PASSED' if result else '❌ FAILED'}")
    print(f"\n📊 Overall: {passed}/{len(results)} tests passed")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
