#!/usr/bin/env python3
"""
Weight function tests
Rational and periodic weight functions, Theta/Xi identities, the phase function and the X maps
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from fractions import Fraction
from math import comb, pi

import numpy as np
import pytest

from api.utils import weight_functions as wf
from api.utils.errors import PoleError
from api.utils.qkz_operators import ModelParams

Z3 = (0.11 + 0.07j, -0.13 + 0.02j, 0.05 - 0.16j)
Z4 = Z3 + (0.17 + 0.12j,)


def params(n=3, ell=2, mu=1j * pi):
    return ModelParams(n=n, ell=ell, mu=mu, z=Z3 if n == 3 else Z4[:n])


def points(p, ell, seed=5):
    return wf.random_points(ell, p, np.random.default_rng(seed))


def rel(value, scale):
    return abs(value) / max(abs(scale), 1e-300)


def test_w_is_antisymmetric():
    p = params()
    t = points(p, 2)
    for M in [(1, 2), (1, 3), (2, 3)]:
        assert abs(wf.eval_w(M, t, p) + wf.eval_w(M, t[::-1], p)) < 1e-12 * abs(wf.eval_w(M, t, p))


def test_w_vector_has_one_entry_per_subset():
    p = params(n=4)
    assert wf.w_vector(points(p, 2), p).shape == (6,)


def test_g_pole_is_guarded():
    p = params()
    with pytest.raises(PoleError):
        wf.eval_g((1,), [p.z[0]], p)
    with pytest.raises(ValueError):
        wf.eval_g((1, 2), [0.3], p)


def test_W_is_periodic():
    p = params()
    t = points(p, 2)
    moved = [t[0] + p.p, t[1] - 2 * p.p]
    for N in [(1, 2), (2, 3)]:
        assert rel(wf.eval_W(N, t, p) - wf.eval_W(N, moved, p), wf.eval_W(N, t, p)) < 1e-11


def test_W_antisymmetrizes_G():
    p = params()
    t = points(p, 2)
    N = (1, 3)
    expected = wf.eval_G(N, t, p) - wf.eval_G(N, t[::-1], p)
    assert rel(wf.eval_W(N, t, p) - expected, expected) < 1e-13
    with pytest.raises(PoleError):
        wf.eval_G((1,), [p.z[1] + p.p], p)


def test_theta_xi_values():
    p = params()
    t = points(p, 2)
    one = wf.eval_theta_xi(t[:1], p)
    assert one.xi2 is None
    assert one.xi1 == pytest.approx(one.theta - 1)
    two = wf.eval_theta_xi(t, p)
    th1, th2 = wf.theta(t[0], p), wf.theta(t[1], p)
    expected = (th1 * th2 - 1) * wf.pair_E(t[0], t[1], p) + th1 - th2
    assert rel(two.xi2 - expected, expected) < 1e-12
    with pytest.raises(ValueError):
        wf.eval_theta_xi(list(t) + [t[0] + 0.3], p)


def test_periodic_coeffs_shape_is_checked():
    with pytest.raises(ValueError):
        wf.PeriodicFnCoeffs(3, 2, np.ones(2))
    basis = wf.PeriodicFnCoeffs.basis((1, 3), 3)
    assert list(basis.coeffs) == [0, 1, 0]
    p = params()
    t = points(p, 2)
    assert basis.evaluate(t, p) == pytest.approx(wf.eval_W((1, 3), t, p))
    assert wf.PeriodicFnCoeffs.constant(3).evaluate([], p) == 1.0


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_detm_is_exact(n):
    rng = np.random.default_rng(n)
    for _ in range(3):
        x = [Fraction(int(v), 7) for v in rng.integers(-20, 20, n)]
        y = [Fraction(int(v), 5) for v in rng.integers(-20, 20, n)]
        assert wf.identity_residuals("detM", (x, y)) == 0


def test_lemma_index_data_covers_every_site():
    data = wf.lemma_index_data((2, 4), 5)
    assert data == [(1, 1), (1, 2), (2, 3), (2, 4), (3, 5)]


@pytest.mark.parametrize("kind", ["lemmaD1_first", "lemmaD1_second"])
def test_lemma_identities(kind):
    p = params(n=4)
    N = (2,)
    t = points(p, 2)
    for b, m in wf.lemma_index_data(N, p.n):
        residual = wf.identity_residuals(kind, t, p, N=N, b=b, m=m)
        assert abs(residual) <= 1e-10 * wf.identity_scale(kind, t, p, N=N, b=b, m=m)


@pytest.mark.parametrize("kind", ["lemmaD1_first", "lemmaD1_second"])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_lemma_identities_every_index(kind, n):
    rng = np.random.default_rng(100 + n)
    for size in range(0, min(2, n - 1) + 1):
        p = params(n=n, ell=size + 1)
        for N in wf.subsets(n, size):
            for b, m in wf.lemma_index_data(N, n):
                for _ in range(25):
                    t = wf.random_points(size + 1, p, rng)
                    residual = wf.identity_residuals(kind, t, p, N=N, b=b, m=m)
                    scale = wf.identity_scale(kind, t, p, N=N, b=b, m=m)
                    assert abs(residual) <= 1e-10 * scale, (N, b, m, residual)


def test_lemma_scale_survives_an_empty_sum():
    # m = 1: the lower sum has no terms
    p = params(n=4)
    t = points(p, 2)
    lhs, rhs = wf.lemma_first_sides((2,), 1, 1, t, p)
    scale = wf.identity_scale("lemmaD1_first", t, p, N=(2,), b=1, m=1)
    assert lhs == 0
    assert scale >= 1.0 and scale >= wf.lemma_term_mass("lemmaD1_first", (2,), 1, 1, t, p)
    assert abs(rhs) <= 1e-10 * scale


def test_lemma_rejects_bad_index():
    p = params(n=4)
    with pytest.raises(ValueError):
        wf.identity_residuals("lemmaD1_first", points(p, 2), p, N=(2,), b=1, m=3)


@pytest.mark.parametrize("kind,arity", [("xp1", 1), ("xp2", 2), ("xp2_split", 2)])
def test_theta_xi_identities(kind, arity):
    p = params(n=4)
    for seed in range(3):
        t = points(p, arity, seed)
        residual = wf.identity_residuals(kind, t, p)
        assert abs(residual) <= 1e-10 * wf.identity_scale(kind, t, p)


def test_r_m_closed_form_matches_differences():
    p = params(n=3, mu=0.3 + 1.1j)
    for M in [(1, 2), (2, 3)]:
        t = points(p, 2)
        residual = wf.identity_residuals("rM", t, p, M=M)
        assert abs(residual) <= 1e-9 * wf.identity_scale("rM", t, p, M=M)
    spec = wf.build_total_difference_rM((1, 3), p)
    assert spec.tag == "r_M"
    assert "t_a = z_m - p" in spec.pole_set(p)


def test_phase_shift():
    p = params(n=2, ell=1)
    t = points(p, 1)[0]
    ratio = wf.eval_phase(t + p.p, p) / wf.eval_phase(t, p)
    expected = np.exp(p.mu) * wf.shift_ratio(t, p)
    assert rel(ratio - expected, expected) < 1e-11
    assert abs(wf.identity_residuals("phase_shift", [t], p)) < 1e-10 * abs(wf.eval_phase(t, p))


def test_apply_D_index_is_checked():
    p = params(n=2, ell=1)
    with pytest.raises(IndexError):
        wf.apply_D(lambda s: 1.0, 2, p)([0.4])


def test_phase_envelope_bounds_decay():
    p = params(n=2, ell=1, mu=1j * pi)
    far = np.array([p.zbar + 40j, p.zbar - 40j])
    assert np.all(np.abs(np.exp(wf.log_phase(far, p))) <= 2.0 * wf.phase_envelope(far, p))


@pytest.mark.parametrize("a,ell", [(1, 1), (1, 2), (2, 2), (2, 3)])
def test_x_matrix_matches_pointwise(a, ell):
    p = params(n=4)
    rng = np.random.default_rng(ell)
    coeffs = wf.PeriodicFnCoeffs(4, ell - a, rng.normal(size=comb(4, ell - a)))
    image = wf.apply_X(a, coeffs, p)
    assert image.ell == ell
    for seed in range(2):
        t = points(p, ell, seed)
        direct = wf.apply_X_pointwise(a, coeffs, t, p)
        assert rel(image.evaluate(t, p) - direct, direct) < 1e-9


def test_x_matrix_argument_checks():
    with pytest.raises(ValueError):
        wf.x_matrix(3, 4, 3)
    with pytest.raises(ValueError):
        wf.x_matrix(2, 4, 1)


def test_fit_recovers_a_basis_function():
    p = params(n=3)
    fitted, residual = wf.fit_coeffs(lambda t: wf.eval_W((1, 3), t, p), 2, p, np.random.default_rng(1))
    assert residual < 1e-10
    assert np.allclose(fitted.coeffs, [0, 1, 0], atol=1e-8)


def test_degree_profile_of_W():
    p = params(n=3)
    profile = wf.degree_profile((1,), p)
    assert profile.in_periodic_space(p.n)


def test_exponential_subspace_has_expected_size():
    p = params(n=4)
    assert len(wf.exponential_subspace_basis(2, p)) == comb(3, 2)


def test_exponential_subspace_degrees():
    p = params(n=3, ell=1)
    for e, fn in enumerate(wf.exponential_subspace_basis(1, p), start=1):
        profile = wf.degree_profile(fn, p, ell=1)
        assert profile.lowest == profile.highest == e
        assert profile.in_exponential_subspace(p.n)
    with pytest.raises(ValueError):
        wf.degree_profile(lambda t: 1.0, p)


def main():
    """Run all weight function tests"""
    print("🧪 Starting weight function tests...\n")

    tests = [
        ("Antisymmetry", test_w_is_antisymmetric),
        ("Pole Guards", test_g_pole_is_guarded),
        ("Periodicity", test_W_is_periodic),
        ("Coefficient Vectors", test_periodic_coeffs_shape_is_checked),
        ("Lemma Index Data", test_lemma_index_data_covers_every_site),
        ("Lemma Empty Sum", test_lemma_scale_survives_an_empty_sum),
        ("r_M Closed Form", test_r_m_closed_form_matches_differences),
        ("Phase Shift", test_phase_shift),
        ("Envelope", test_phase_envelope_bounds_decay),
        ("Fit", test_fit_recovers_a_basis_function),
        ("Degree Profile", test_degree_profile_of_W),
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
