# api/utils/weight_functions.py
"""
Scalar functions entering the hypergeometric integrals.

Rational weight functions g_M / w_M, trigonometric functions G_N / W_N, the
functions Theta and Xi, the phase function phi, the difference operator D,
the total difference r_M, and the X maps on coefficient vectors.

Kernels named u_factor, h_factor and log_phase are vectorized over numpy
arrays and skip pole checks; the eval_* functions are the guarded pointwise
versions.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from math import comb, factorial, pi
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from api.utils import grassmann
from api.utils.errors import PoleError
from api.utils.qkz_operators import ModelParams
from api.utils.special import loggamma
from api.utils.tensor_space import SubsetIndex, subsets, validate_subset

logger = logging.getLogger(__name__)

POLE_REL_TOL = 1e-10
PRECISION_LIMIT = 1e6

Point = Sequence[complex]
Kernel = Callable[[Point], complex]


# ── helpers ──────────────────────────────────────────────────────────────────

def permutation_sign(perm: Sequence[int]) -> int:
    inversions = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return -1 if inversions & 1 else 1


def asym(kernel: Kernel, t: Point):
    """sum over S_l of sgn(sigma) kernel(t_sigma(1), ..., t_sigma(l))"""
    t = list(t)
    total = 0
    for perm in permutations(range(len(t))):
        term = kernel([t[i] for i in perm])
        total = total + term if permutation_sign(perm) > 0 else total - term
    return total


def local_scale(t: Point, params: ModelParams) -> float:
    spread = max((abs(ta - zm) for ta in np.ravel(t) for zm in params.z), default=0.0)
    return max(abs(params.p), spread)


def _guard(distance, scale: float, what: str, location):
    if np.min(np.abs(distance)) < POLE_REL_TOL * scale:
        raise PoleError(f"{what} pole within {POLE_REL_TOL:g} relative distance", location=location)


def _check_arity(t: Point, ell: int):
    if len(t) != ell:
        raise ValueError(f"expected {ell} points, got {len(t)}")


# ── rational weight functions ────────────────────────────────────────────────

def prefix_product(m: int, t, params: ModelParams):
    """P_m(t) = prod_{j<m} (t - z_j - hbar)/(t - z_j); P_{n+1} is the full shift ratio"""
    t = np.asarray(t, dtype=complex)
    out = np.ones_like(t)
    for j in range(1, m):
        zj = params.z[j - 1]
        out = out * (t - zj - params.hbar) / (t - zj)
    return out


def u_factor(m: int, t, params: ModelParams):
    t = np.asarray(t, dtype=complex)
    return prefix_product(m, t, params) / (t - params.z[m - 1])


def g_kernel(members: SubsetIndex, t: Point, params: ModelParams):
    """g_M = prod_a u_{m_a}(t_a) * prod_{a<b} (t_a - t_b - hbar), vectorized"""
    out = 1.0 + 0j
    for m, ta in zip(members, t):
        out = out * u_factor(m, ta, params)
    for a in range(len(t)):
        for b in range(a + 1, len(t)):
            out = out * (np.asarray(t[a]) - np.asarray(t[b]) - params.hbar)
    return out


def _guard_rational(t: Point, params: ModelParams):
    scale = local_scale(t, params)
    for ta in t:
        for zm in params.z:
            _guard(ta - zm, scale, "rational weight", ta)


def eval_g(M: Sequence[int], t: Point, params: ModelParams) -> complex:
    M = validate_subset(M, params.n)
    _check_arity(t, len(M))
    _guard_rational(t, params)
    return complex(g_kernel(M, t, params))


def eval_w(M: Sequence[int], t: Point, params: ModelParams) -> complex:
    """w_M = Asym g_M"""
    M = validate_subset(M, params.n)
    _check_arity(t, len(M))
    _guard_rational(t, params)
    return complex(asym(lambda s: g_kernel(M, s, params), t))


def w_vector(t: Point, params: ModelParams) -> np.ndarray:
    """(w_M(t))_M over all l-subsets in lexicographic order"""
    ell = len(t)
    return np.array([eval_w(M, t, params) for M in subsets(params.n, ell)])


# ── trigonometric weight functions ───────────────────────────────────────────

def h_factor(m: int, t, params: ModelParams):
    """h_m(t) = 1/(Exp(t-z_m)-1) prod_{j<m} (Exp(t-z_j)+1)/(Exp(t-z_j)-1), vectorized"""
    t = np.asarray(t, dtype=complex)
    out = 1.0 / (params.exp_p(t - params.z[m - 1]) - 1)
    for j in range(1, m):
        e = params.exp_p(t - params.z[j - 1])
        out = out * (e + 1) / (e - 1)
    return out


def G_kernel(members: SubsetIndex, t: Point, params: ModelParams):
    out = 1.0 + 0j
    for m, ta in zip(members, t):
        out = out * h_factor(m, ta, params)
    return out


def _guard_periodic(t: Point, params: ModelParams):
    for ta in t:
        for zm in params.z:
            _guard(params.exp_p(ta - zm) - 1, 1.0, "periodic weight", ta)


def eval_G(N: Sequence[int], t: Point, params: ModelParams) -> complex:
    N = validate_subset(N, params.n)
    _check_arity(t, len(N))
    _guard_periodic(t, params)
    return complex(G_kernel(N, t, params))


def eval_W(N: Sequence[int], t: Point, params: ModelParams) -> complex:
    """W_N = Asym G_N, p-periodic in every t_a"""
    N = validate_subset(N, params.n)
    _check_arity(t, len(N))
    _guard_periodic(t, params)
    return complex(asym(lambda s: G_kernel(N, s, params), t))


@dataclass
class PeriodicFnCoeffs:
    """sum_N coeffs[N] W_N over l-subsets N of {1..n}"""
    n: int
    ell: int
    coeffs: np.ndarray
    exponential: bool = False

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        expected = comb(self.n, self.ell)
        if self.coeffs.shape != (expected,):
            raise ValueError(f"expected {expected} coefficients for n={self.n}, l={self.ell}, "
                             f"got {self.coeffs.shape}")

    @classmethod
    def basis(cls, N: Sequence[int], n: int) -> "PeriodicFnCoeffs":
        N = validate_subset(N, n)
        vec = np.zeros(comb(n, len(N)), dtype=complex)
        vec[subsets(n, len(N)).index(N)] = 1.0
        return cls(n, len(N), vec)

    @classmethod
    def constant(cls, n: int) -> "PeriodicFnCoeffs":
        return cls(n, 0, np.ones(1, dtype=complex))

    def evaluate(self, t: Point, params: ModelParams) -> complex:
        _check_arity(t, self.ell)
        if self.ell == 0:
            return complex(self.coeffs[0])
        total = 0j
        for N, c in zip(subsets(self.n, self.ell), self.coeffs):
            if c != 0:
                total += c * eval_W(N, t, params)
        return total


# ── Theta, Xi and the pair functions E, F ─────────────────────────────────────

def theta(t, params: ModelParams):
    t = np.asarray(t, dtype=complex)
    out = np.ones_like(t)
    for zm in params.z:
        e = params.exp_p(t - zm)
        out = out * (e + 1) / (e - 1)
    return out


def pair_E(t1, t2, params: ModelParams):
    e = params.exp_p(np.asarray(t1) - np.asarray(t2))
    return (e - 1) / (e + 1)


def pair_F(t1, t2, params: ModelParams):
    return theta(t1, params) * theta(t2, params) * pair_E(t1, t2, params)


@dataclass
class ThetaXi:
    theta: complex
    xi1: complex
    xi2: Optional[complex] = None


def eval_theta_xi(t: Point, params: ModelParams) -> ThetaXi:
    """Theta(t_1), Xi1(t_1) and, for two points, Xi2(t_1, t_2)"""
    if len(t) not in (1, 2):
        raise ValueError(f"Theta/Xi take one or two points, got {len(t)}")
    _guard_periodic(t, params)
    th1 = complex(theta(t[0], params))
    xi2 = None
    if len(t) == 2:
        e12 = params.exp_p(t[0] - t[1])
        _guard(e12 + 1, 1.0, "Xi2 exchange", t)
        th2 = complex(theta(t[1], params))
        ratio = complex((e12 - 1) / (e12 + 1))
        xi2 = (th1 * th2 - 1) * ratio + th1 - th2
    return ThetaXi(theta=th1, xi1=th1 - 1, xi2=xi2)


# ── phase function ───────────────────────────────────────────────────────────

def log_phase(t, params: ModelParams):
    """log phi(t) = mu t/p + sum_m [lgamma((t-z_m-hbar)/p) - lgamma((t-z_m)/p)], vectorized"""
    t = np.asarray(t, dtype=complex)
    p = params.p
    out = params.mu * t / p
    for zm in params.z:
        out = out + loggamma((t - zm - params.hbar) / p) - loggamma((t - zm) / p)
    return out


def eval_phase(t: complex, params: ModelParams) -> complex:
    if abs(t) > PRECISION_LIMIT * abs(params.p):
        logger.warning(f"phase function evaluated far out at |t|={abs(t):.3e}, precision degrades")
    return complex(np.exp(log_phase(t, params)))


def phase_envelope(t, params: ModelParams, safety: float = 1.0):
    """|((t - zbar)/p)^(-n/2) exp(mu t/p)| with the principal branch"""
    s = (np.asarray(t, dtype=complex) - params.zbar) / params.p
    log_env = -0.5 * params.n * np.log(s) + params.mu * np.asarray(t, dtype=complex) / params.p
    return safety * np.exp(log_env.real)


# ── difference operator and total differences ────────────────────────────────

def shift_ratio(t, params: ModelParams):
    """phi(t+p)/phi(t) divided by e^mu"""
    return prefix_product(params.n + 1, t, params)


def apply_D(f: Kernel, a: int, params: ModelParams) -> Kernel:
    """(D_a f)(t) = f(t) - e^mu f(.., t_a + p, ..) prod_j (t_a-z_j-hbar)/(t_a-z_j)"""
    em = np.exp(params.mu)

    def shifted(t: Point):
        if not 1 <= a <= len(t):
            raise IndexError(f"variable index {a} out of range 1..{len(t)}")
        moved = list(t)
        moved[a - 1] = moved[a - 1] + params.p
        return f(t) - em * f(moved) * shift_ratio(t[a - 1], params)

    return shifted


def _union(N: Sequence[int], k: int) -> SubsetIndex:
    return tuple(sorted(set(N) | {k}))


def _swap(M: Sequence[int], k: int, m: int) -> SubsetIndex:
    return tuple(sorted((set(M) - {m}) | {k}))


def r_M_explicit(M: SubsetIndex, t: Point, params: ModelParams) -> complex:
    """Closed combination of w-functions forming the total difference r_M"""
    n, hbar = params.n, params.hbar
    em = np.exp(params.mu)
    ell = len(M)
    w_M = eval_w(M, t, params)
    total = (em - 1) / hbar * sum(params.z[m - 1] for m in M) * w_M + em * ell * w_M
    for m in M:
        for k in range(1, n + 1):
            if k in M:
                continue
            term = eval_w(_swap(M, k, m), t, params)
            total += term if k < m else em * term
    total -= (em - 1) / hbar * sum(t) * w_M
    return complex(total)


def _leading_kernel(N: SubsetIndex, params: ModelParams) -> Kernel:
    """g_N(t_2..t_l) prod_{a>=2} (t_1 - t_a - hbar)"""
    def kernel(t: Point):
        out = g_kernel(N, list(t[1:]), params)
        for ta in t[1:]:
            out = out * (t[0] - ta - params.hbar)
        return out
    return kernel


def total_difference(N: SubsetIndex, params: ModelParams) -> Kernel:
    """hbar^-1 Asym(D_1(g_N(t_2..) prod_{a>=2}(t_1 - t_a - hbar)))"""
    d1 = apply_D(_leading_kernel(N, params), 1, params)
    return lambda t: asym(d1, t) / params.hbar


def r_M_differences(M: SubsetIndex, t: Point, params: ModelParams) -> complex:
    _guard_rational(t, params)
    total = 0j
    for a in range(len(M)):
        N = M[:a] + M[a + 1:]
        total += complex(total_difference(N, params)(t))
    return total


# ── rational families ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class RationalFamilySpec:
    """A named rational function family with its index data"""
    tag: str
    subset: SubsetIndex = ()
    index: Dict[str, int] = field(default_factory=dict)

    def evaluate(self, t: Point, params: ModelParams) -> complex:
        if self.tag not in _FAMILIES:
            raise ValueError(f"unknown function family {self.tag!r}")
        return _FAMILIES[self.tag](self, t, params)

    def pole_set(self, params: ModelParams) -> List[str]:
        if self.tag in ("E", "F"):
            return ["t_a = z_m + p k", "t_1 - t_2 = hbar + p k"]
        poles = ["t_a = z_m"]
        if self.tag == "r_M":
            poles.append("t_a = z_m - p")
        return poles


def build_total_difference_rM(M: Sequence[int], params: ModelParams) -> RationalFamilySpec:
    return RationalFamilySpec(tag="r_M", subset=validate_subset(M, params.n))


_FAMILIES: Dict[str, Callable[[RationalFamilySpec, Point, ModelParams], complex]] = {
    "g": lambda spec, t, params: eval_g(spec.subset, t, params),
    "w": lambda spec, t, params: eval_w(spec.subset, t, params),
    "r_M": lambda spec, t, params: r_M_explicit(spec.subset, t, params),
    "r_M_differences": lambda spec, t, params: r_M_differences(spec.subset, t, params),
    "E": lambda spec, t, params: complex(pair_E(t[0], t[1], params)),
    "F": lambda spec, t, params: complex(pair_F(t[0], t[1], params)),
}


# ── identities ───────────────────────────────────────────────────────────────

def lemma_index_data(N: Sequence[int], n: int) -> List[Tuple[int, int]]:
    """Every admissible (b, m) with n_{b-1} < m <= n_b, n_0 = 0, n_l = n"""
    bounds = [0] + list(N) + [n]
    out = []
    for b in range(1, len(N) + 2):
        for m in range(bounds[b - 1] + 1, bounds[b] + 1):
            out.append((b, m))
    return out


def _validate_lemma_index(N: SubsetIndex, b: int, m: int, n: int):
    if (b, m) not in lemma_index_data(N, n):
        raise ValueError(f"invalid index data N={N}, b={b}, m={m} for n={n}")


def _tail_ratio(m: int, t1, params: ModelParams):
    out = 1.0 + 0j
    for k in range(m, params.n + 1):
        zk = params.z[k - 1]
        out = out * (t1 - zk - params.hbar) / (t1 - zk)
    return out


def _lemma_first_terms(N: SubsetIndex, b: int, m: int, t: Point, params: ModelParams):
    hbar = params.hbar
    lhs_terms = [hbar * eval_w(_union(N, k), t, params) for k in range(1, m) if k not in N]

    def kernel(s: Point):
        t1 = s[0]
        minus = plus = tail = 1.0 + 0j
        for a in range(2, b + 1):
            minus *= t1 - s[a - 1] - hbar
            plus *= t1 - s[a - 1] + hbar
        for a in range(b + 1, len(s) + 1):
            tail *= t1 - s[a - 1] - hbar
        bracket = minus - plus * prefix_product(m, t1, params)
        return bracket * tail * g_kernel(N, list(s[1:]), params)

    return lhs_terms, kernel


def _lemma_second_terms(N: SubsetIndex, b: int, m: int, t: Point, params: ModelParams):
    hbar = params.hbar
    lhs_terms = [hbar * eval_w(_union(N, k), t, params) for k in range(m, params.n + 1) if k not in N]

    def kernel(s: Point):
        t1 = s[0]
        minus = plus = head = 1.0 + 0j
        for a in range(b + 1, len(s) + 1):
            minus *= t1 - s[a - 1] - hbar
            plus *= t1 - s[a - 1] + hbar
        for a in range(2, b + 1):
            head *= t1 - s[a - 1] + hbar
        bracket = minus - plus * _tail_ratio(m, t1, params)
        return bracket * head * prefix_product(m, t1, params) * g_kernel(N, list(s[1:]), params)

    return lhs_terms, kernel


def lemma_first_sides(N: SubsetIndex, b: int, m: int, t: Point, params: ModelParams) -> Tuple[complex, complex]:
    lhs_terms, kernel = _lemma_first_terms(N, b, m, t, params)
    return complex(sum(lhs_terms)), complex(asym(kernel, t))


def lemma_second_sides(N: SubsetIndex, b: int, m: int, t: Point, params: ModelParams) -> Tuple[complex, complex]:
    lhs_terms, kernel = _lemma_second_terms(N, b, m, t, params)
    return complex(sum(lhs_terms)), complex(asym(kernel, t))


def lemma_term_mass(kind: str, N: SubsetIndex, b: int, m: int, t: Point, params: ModelParams) -> float:
    """Sum of the magnitudes of the terms on both sides of a D1 identity"""
    terms = _lemma_first_terms if kind == "lemmaD1_first" else _lemma_second_terms
    lhs_terms, kernel = terms(N, b, m, t, params)
    t = list(t)
    rhs_mass = sum(abs(kernel([t[i] for i in perm])) for perm in permutations(range(len(t))))
    return float(sum(abs(v) for v in lhs_terms) + rhs_mass)


def detm_matrix(x: Sequence[Fraction], y: Sequence[Fraction]) -> List[List[Fraction]]:
    """Row j: coefficients of u^0..u^{n-1} in prod_{i<j}(u - x_i) prod_{i>j}(u + y_i)"""
    n = len(x)
    if len(y) != n:
        raise ValueError("x and y must have equal length")
    rows = []
    for j in range(n):
        poly = [Fraction(1)]
        roots = [-x[i] for i in range(j)] + [y[i] for i in range(j + 1, n)]
        for r in roots:
            nxt = [Fraction(0)] * (len(poly) + 1)
            for k, c in enumerate(poly):
                nxt[k] += c * r
                nxt[k + 1] += c
            poly = nxt
        rows.append(poly)
    return rows


def detm_product(x: Sequence[Fraction], y: Sequence[Fraction]) -> Fraction:
    out = Fraction(1)
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            out *= x[i] + y[j]
    return out


def identity_residuals(kind: str, point, params: Optional[ModelParams] = None, **index) -> Union[complex, Fraction]:
    """LHS - RHS of a named function identity at one point"""
    if kind == "detM":
        x, y = point
        return grassmann.exact_det(detm_matrix(x, y)) - detm_product(x, y)
    if params is None:
        raise ValueError(f"identity {kind!r} needs model parameters")
    if kind in ("lemmaD1_first", "lemmaD1_second"):
        N = validate_subset(index["N"], params.n)
        b, m = index["b"], index["m"]
        _validate_lemma_index(N, b, m, params.n)
        _check_arity(point, len(N) + 1)
        sides = lemma_first_sides if kind == "lemmaD1_first" else lemma_second_sides
        lhs, rhs = sides(N, b, m, point, params)
        return lhs - rhs
    if kind == "xp1":
        tx = eval_theta_xi(point[:1], params)
        return tx.xi1 - 2 * sum(eval_W((m,), point[:1], params) for m in range(1, params.n + 1))
    if kind == "xp2":
        tx = eval_theta_xi(point[:2], params)
        return tx.xi2 - 4 * sum(eval_W(S, point[:2], params) for S in subsets(params.n, 2))
    if kind == "xp2_split":
        t1, t2 = point[:2]
        tx = eval_theta_xi(point[:2], params)
        split = pair_F(t1, t2, params) - pair_E(t1, t2, params) + theta(t1, params) - theta(t2, params)
        return tx.xi2 - complex(split)
    if kind == "rM":
        M = validate_subset(index["M"], params.n)
        return r_M_explicit(M, point, params) - r_M_differences(M, point, params)
    if kind == "phase_shift":
        f = index.get("f", lambda s: 1.0)
        t = point[0]
        lhs = eval_phase(t, params) * apply_D(lambda s: f(s), 1, params)([t])
        rhs = eval_phase(t, params) * f([t]) - eval_phase(t + params.p, params) * f([t + params.p])
        return complex(lhs - rhs)
    raise ValueError(f"unknown identity {kind!r}")


def identity_scale(kind: str, point, params: ModelParams, **index) -> float:
    """Magnitude the residual of an identity is measured against"""
    if kind in ("lemmaD1_first", "lemmaD1_second"):
        N = validate_subset(index["N"], params.n)
        # an empty sum makes one side exactly zero
        return max(lemma_term_mass(kind, N, index["b"], index["m"], point, params), 1.0)
    if kind == "xp1":
        return max(abs(eval_theta_xi(point[:1], params).theta) + 1, 1e-300)
    if kind in ("xp2", "xp2_split"):
        tx = eval_theta_xi(point[:2], params)
        return max(abs(tx.xi2), abs(tx.theta) + 1, 1e-300)
    if kind == "rM":
        return max(abs(r_M_explicit(validate_subset(index["M"], params.n), point, params)), 1e-300)
    return 1.0


# ── X maps ───────────────────────────────────────────────────────────────────

def x_factor(a: int, ell: int) -> int:
    """Scalar relating X^(a) to wedge by phi^(a) at target arity l"""
    return 2 * factorial(ell - 1) if a == 1 else 8 * factorial(ell - 2)


def x_matrix(a: int, n: int, ell: int) -> np.ndarray:
    """Matrix of X^(a) from arity l-a to arity l in the W bases, built from exact wedges"""
    if a not in (1, 2):
        raise ValueError(f"X^(a) is defined for a in (1, 2), got {a}")
    if ell < a:
        raise ValueError(f"X^({a}) needs target arity >= {a}, got {ell}")
    phi = grassmann.phi_elements(n)[a - 1]
    scale = x_factor(a, ell)
    columns = [phi.wedge(b).coeffs(ell) for b in grassmann.monomial_basis(n, ell - a)]
    out = np.zeros((comb(n, ell), len(columns)), dtype=complex)
    for j, col in enumerate(columns):
        out[:, j] = [complex(c) * scale for c in col]
    return out


def apply_X(a: int, coeffs: PeriodicFnCoeffs, params: Optional[ModelParams] = None) -> PeriodicFnCoeffs:
    """Coefficients of X^(a) F in the W basis"""
    ell = coeffs.ell + a
    return PeriodicFnCoeffs(coeffs.n, ell, x_matrix(a, coeffs.n, ell) @ coeffs.coeffs)


def apply_X_pointwise(a: int, coeffs: PeriodicFnCoeffs, t: Point, params: ModelParams) -> complex:
    """Asym(Xi^(a)(t_1[, t_2]) F(t_{a+1}, ..)) evaluated directly"""
    _check_arity(t, coeffs.ell + a)

    def kernel(s: Point):
        tx = eval_theta_xi(s[:a], params)
        factor = tx.xi1 if a == 1 else tx.xi2
        return factor * coeffs.evaluate(list(s[a:]), params)

    return complex(asym(kernel, t))


def x_image_basis(n: int, ell: int) -> List[grassmann.GrassmannElement]:
    """Spanning set of im X^(1) + im X^(2) at arity l as exact Grassmann elements"""
    phi1, phi2, _ = grassmann.phi_elements(n)
    out = []
    if ell >= 1:
        out += [phi1.wedge(b) for b in grassmann.monomial_basis(n, ell - 1)]
    if ell >= 2:
        out += [phi2.wedge(b) for b in grassmann.monomial_basis(n, ell - 2)]
    return [e for e in out if e.terms]


# ── random points and subspaces ──────────────────────────────────────────────

def random_points(ell: int, params: ModelParams, rng: np.random.Generator,
                  width: float = 2.0, min_gap: float = 0.05) -> List[complex]:
    """Seeded points z_bar + p (x + i y), |y| < 1/4, kept away from every pole family"""
    p, hbar = params.p, params.hbar
    for _ in range(1000):
        s = rng.uniform(-width, width, ell) + 1j * rng.uniform(-0.25, 0.25, ell)
        t = [params.zbar + p * sj for sj in s]
        ok = True
        for ta in t:
            for zm in params.z:
                for offset in (0, hbar):
                    shift = (ta - zm - offset) / p
                    if abs(shift - round(shift.real)) < min_gap:
                        ok = False
        for a in range(ell):
            for b in range(a + 1, ell):
                for offset in (0, hbar):
                    shift = (t[a] - t[b] - offset) / p
                    if abs(shift - round(shift.real)) < min_gap:
                        ok = False
        if ok:
            return t
    raise PoleError("could not draw a point away from the pole families")


def exponential_subspace_basis(ell: int, params: ModelParams) -> List[Kernel]:
    """W with W exp(-2 pi i sum t/p) prod (1 - Exp(t_a - z_m)) polynomial in the exponentials"""
    n = params.n
    exponents = list(subsets(n - 1, ell))
    basis = []
    for e in exponents:
        def fn(t: Point, e=e):
            x = [params.exp_p(ta) for ta in t]
            num = np.linalg.det(np.array([[xb ** ea for xb in x] for ea in e], dtype=complex))
            den = 1.0 + 0j
            for ta in t:
                for zm in params.z:
                    den *= 1 - params.exp_p(ta - zm)
            return complex(num / den)
        basis.append(fn)
    return basis


def fit_coeffs(fn: Kernel, ell: int, params: ModelParams, rng: np.random.Generator,
               samples: Optional[int] = None) -> Tuple[PeriodicFnCoeffs, float]:
    """Least-squares coefficients of fn in the W_N basis and the relative residual"""
    basis = subsets(params.n, ell)
    samples = samples or 3 * len(basis) + 2
    points = [random_points(ell, params, rng) for _ in range(samples)]
    design = np.array([[eval_W(N, t, params) for N in basis] for t in points])
    target = np.array([fn(t) for t in points])
    coeffs, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.linalg.norm(design @ coeffs - target) / max(np.linalg.norm(target), 1e-300))
    return PeriodicFnCoeffs(params.n, ell, coeffs), residual


@dataclass
class DegreeProfile:
    lowest: int
    highest: int
    coefficients: List[complex]

    def in_periodic_space(self, n: int) -> bool:
        return self.highest < n

    def in_exponential_subspace(self, n: int) -> bool:
        return self.highest < n and self.lowest >= 1


def degree_profile(target: Union[Sequence[int], Kernel], params: ModelParams,
                   rng: Optional[np.random.Generator] = None, ell: Optional[int] = None,
                   rel_tol: float = 1e-9) -> DegreeProfile:
    """Degrees in x = Exp(t_1) of W(t) prod_m (1 - Exp(t_1 - z_m)), other variables fixed"""
    if callable(target):
        fn = target
        if ell is None:
            raise ValueError("ell is required for a callable target")
    else:
        N = validate_subset(target, params.n)
        ell = len(N)
        fn = lambda t: eval_W(N, t, params)
    rng = rng or np.random.default_rng(0)
    others = random_points(ell, params, rng)[1:] if ell > 1 else []
    nodes = params.n + 2
    radius = 3.0 * max(abs(params.exp_p(zm)) for zm in params.z)
    values = []
    for k in range(nodes):
        x = radius * np.exp(2j * pi * k / nodes)
        t1 = params.p * np.log(x) / (2j * pi)
        factor = np.prod([1 - params.exp_p(t1 - zm) for zm in params.z])
        values.append(fn([t1] + list(others)) * factor)
    coeffs = np.fft.fft(values) / nodes / radius ** np.arange(nodes)
    scale = max(np.max(np.abs(coeffs)), 1e-300)
    nonzero = [k for k, c in enumerate(coeffs) if abs(c) > rel_tol * scale]
    if not nonzero:
        return DegreeProfile(lowest=-1, highest=-1, coefficients=coeffs.tolist())
    return DegreeProfile(lowest=nonzero[0], highest=nonzero[-1], coefficients=coeffs.tolist())
