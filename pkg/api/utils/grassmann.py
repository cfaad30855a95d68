# api/utils/grassmann.py
"""
Exact exterior algebra C[xi_1..xi_n] over Gaussian rationals.

Elements are sparse maps from subset bitmasks to coefficients. On top of the
algebra sit the phi-elements, the change of variables to zeta coordinates with
its sl2 triple, the Jordan-Wigner representation on V^{⊗n}, and the quantum
group operators E(q), F(q), K(q) together with their q -> i limits.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from api.utils.tensor_space import (
    orthonormal,
    principal_angles,
    subset_mask,
    subsets,
    weight_indices,
)

logger = logging.getLogger(__name__)

Number = Union[int, Fraction, "GaussianRational"]


# ── Gaussian rationals ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class GaussianRational:
    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", Fraction(self.re))
        object.__setattr__(self, "im", Fraction(self.im))

    @classmethod
    def of(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, complex):
            re, im = Fraction(value.real), Fraction(value.imag)
            if re.denominator > 2 ** 20 or im.denominator > 2 ** 20:
                raise ValueError(f"{value} is not an exact Gaussian rational")
            return cls(re, im)
        return cls(Fraction(value), Fraction(0))

    def __add__(self, other):
        other = GaussianRational.of(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-GaussianRational.of(other))

    def __rsub__(self, other):
        return GaussianRational.of(other) - self

    def __mul__(self, other):
        other = GaussianRational.of(other)
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def norm2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __truediv__(self, other):
        other = GaussianRational.of(other)
        den = other.norm2()
        if den == 0:
            raise ZeroDivisionError("division by exact zero")
        num = self * other.conjugate()
        return GaussianRational(num.re / den, num.im / den)

    def __rtruediv__(self, other):
        return GaussianRational.of(other) / self

    def __pow__(self, k: int):
        if k < 0:
            return GaussianRational(1) / (self ** (-k))
        out, base = GaussianRational(1), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __bool__(self):
        return self.re != 0 or self.im != 0

    def __eq__(self, other):
        try:
            other = GaussianRational.of(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return str(self.re)
        return f"({self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i)"


ZERO = GaussianRational(0)
ONE = GaussianRational(1)
I_UNIT = GaussianRational(0, 1)


def minus_i_power(k: int) -> GaussianRational:
    return (-I_UNIT) ** k


# ── exact linear algebra ─────────────────────────────────────────────────────

def exact_rank(vectors: Iterable[Dict]) -> int:
    """Rank of sparse vectors (dict key -> exact scalar) by Gaussian elimination"""
    pivots: Dict = {}
    rank = 0
    for vec in vectors:
        row = {k: v for k, v in vec.items() if v}
        while row:
            key = min(row)
            if key not in pivots:
                pivots[key] = row
                rank += 1
                break
            pivot_row = pivots[key]
            factor = row[key] / pivot_row[key]
            for k, v in pivot_row.items():
                updated = row.get(k, ZERO) - factor * v
                if updated:
                    row[k] = updated
                else:
                    row.pop(k, None)
    return rank


def exact_det(matrix: Sequence[Sequence]) -> Fraction:
    """Determinant of a dense matrix over an exact field"""
    rows = [list(r) for r in matrix]
    size = len(rows)
    det = Fraction(1)
    for col in range(size):
        pivot = next((r for r in range(col, size) if rows[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            rows[col], rows[pivot] = rows[pivot], rows[col]
            det = -det
        det *= rows[col][col]
        for r in range(col + 1, size):
            if rows[r][col] != 0:
                factor = rows[r][col] / rows[col][col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[col])]
    return det


def exact_inverse(matrix: Sequence[Sequence]) -> List[List[Fraction]]:
    size = len(matrix)
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(size)]
           for i, row in enumerate(matrix)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if aug[r][col] != 0), None)
        if pivot is None:
            raise ZeroDivisionError("matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        scale = aug[col][col]
        aug[col] = [x / scale for x in aug[col]]
        for r in range(size):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [a - factor * b for a, b in zip(aug[r], aug[col])]
    return [row[size:] for row in aug]


# ── exterior algebra ─────────────────────────────────────────────────────────

def _popcount(x: int) -> int:
    return bin(x).count("1")


def _wedge_sign(a: int, b: int) -> int:
    """Sign of reordering xi_A xi_B into increasing order"""
    swaps = 0
    bits = b
    while bits:
        low = bits & -bits
        swaps += _popcount(a & ~((low << 1) - 1))
        bits ^= low
    return -1 if swaps & 1 else 1


def _members(mask: int) -> Tuple[int, ...]:
    out, m = [], 1
    while mask:
        if mask & 1:
            out.append(m)
        mask >>= 1
        m += 1
    return tuple(out)


@dataclass(frozen=True)
class GrassmannElement:
    n: int
    terms: Dict[int, GaussianRational] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for mask, coeff in self.terms.items():
            if mask >> self.n:
                raise ValueError(f"monomial {_members(mask)} uses generators beyond {self.n}")
            coeff = GaussianRational.of(coeff)
            if coeff:
                clean[mask] = coeff
        object.__setattr__(self, "terms", clean)

    @classmethod
    def zero(cls, n: int) -> "GrassmannElement":
        return cls(n, {})

    @classmethod
    def one(cls, n: int) -> "GrassmannElement":
        return cls(n, {0: ONE})

    @classmethod
    def generator(cls, m: int, n: int) -> "GrassmannElement":
        if not 1 <= m <= n:
            raise IndexError(f"generator {m} out of range 1..{n}")
        return cls(n, {1 << (m - 1): ONE})

    @classmethod
    def monomial(cls, members: Sequence[int], n: int, coeff=ONE) -> "GrassmannElement":
        out = cls.one(n)
        for m in members:
            out = out.wedge(cls.generator(m, n))
        return out.scale(coeff)

    @classmethod
    def from_coeffs(cls, n: int, degree: int, coeffs: Sequence) -> "GrassmannElement":
        """Element sum_N c_N xi_N over degree-subsets N in lexicographic order"""
        basis = subsets(n, degree)
        if len(coeffs) != len(basis):
            raise ValueError(f"expected {len(basis)} coefficients, got {len(coeffs)}")
        return cls(n, {subset_mask(N): GaussianRational.of(c) for N, c in zip(basis, coeffs)})

    def coeffs(self, degree: int) -> List[GaussianRational]:
        return [self.terms.get(subset_mask(N), ZERO) for N in subsets(self.n, degree)]

    def _check(self, other: "GrassmannElement"):
        if other.n != self.n:
            raise ValueError(f"generator-count mismatch: {self.n} vs {other.n}")

    def __add__(self, other: "GrassmannElement") -> "GrassmannElement":
        self._check(other)
        out = dict(self.terms)
        for mask, coeff in other.terms.items():
            out[mask] = out.get(mask, ZERO) + coeff
        return GrassmannElement(self.n, out)

    def __neg__(self) -> "GrassmannElement":
        return self.scale(-1)

    def __sub__(self, other: "GrassmannElement") -> "GrassmannElement":
        return self + (-other)

    def __eq__(self, other):
        if not isinstance(other, GrassmannElement):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def scale(self, c) -> "GrassmannElement":
        c = GaussianRational.of(c)
        return GrassmannElement(self.n, {m: c * v for m, v in self.terms.items()})

    def wedge(self, other: "GrassmannElement") -> "GrassmannElement":
        self._check(other)
        out: Dict[int, GaussianRational] = {}
        for a, ca in self.terms.items():
            for b, cb in other.terms.items():
                if a & b:
                    continue
                value = ca * cb if _wedge_sign(a, b) > 0 else -(ca * cb)
                out[a | b] = out.get(a | b, ZERO) + value
        return GrassmannElement(self.n, out)

    __mul__ = wedge

    def derivation(self, k: int) -> "GrassmannElement":
        """Left derivation d/dxi_k"""
        if not 1 <= k <= self.n:
            raise IndexError(f"derivation index {k} out of range 1..{self.n}")
        bit = 1 << (k - 1)
        out = {}
        for mask, coeff in self.terms.items():
            if mask & bit:
                sign = -1 if _popcount(mask & (bit - 1)) & 1 else 1
                out[mask ^ bit] = coeff if sign > 0 else -coeff
        return GrassmannElement(self.n, out)

    def is_homogeneous(self) -> Optional[int]:
        degrees = {_popcount(m) for m in self.terms}
        return degrees.pop() if len(degrees) == 1 else None

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for mask in sorted(self.terms, key=lambda m: (_popcount(m), m)):
            word = "".join(f"ξ{m}" for m in _members(mask)) or "1"
            parts.append(f"{self.terms[mask]!r}·{word}")
        return " + ".join(parts)


def wedge(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    return a.wedge(b)


def derivation(k: int, a: GrassmannElement) -> GrassmannElement:
    return a.derivation(k)


def linear_form(coeffs: Sequence, n: int) -> GrassmannElement:
    return GrassmannElement(n, {1 << j: c for j, c in enumerate(coeffs)})


def phi_elements(n: int) -> Tuple[GrassmannElement, GrassmannElement, GrassmannElement]:
    """phi1 = sum xi_m, phi2 = sum_{k<m} xi_k xi_m, phi~ = sum_{k<m<n} xi_k xi_m"""
    phi1 = linear_form([1] * n, n)
    phi2 = GrassmannElement(n, {subset_mask(S): ONE for S in subsets(n, 2)})
    phi_t = GrassmannElement(n, {subset_mask(S): ONE for S in subsets(n - 1, 2)}) if n >= 2 \
        else GrassmannElement.zero(n)
    return phi1, phi2, phi_t


def monomial_basis(n: int, degree: int) -> List[GrassmannElement]:
    return [GrassmannElement(n, {subset_mask(S): ONE}) for S in subsets(n, degree)]


def image_vectors(factor: GrassmannElement, degree_in: int) -> List[Dict[int, GaussianRational]]:
    return [factor.wedge(b).terms for b in monomial_basis(factor.n, degree_in)]


@dataclass
class ImageDims:
    n: int
    ell: int
    phi1: int
    phi2: int
    total: int
    expected_total: Optional[int]
    phi_tilde: Optional[int]
    phi_tilde_expected: Optional[int]

    @property
    def holds(self) -> bool:
        ok = self.expected_total is None or self.total == self.expected_total
        if self.phi_tilde is not None:
            ok = ok and self.phi_tilde == self.phi_tilde_expected
        return ok


def image_dims(n: int, ell: int) -> ImageDims:
    """Exact ranks of phi1∧ and phi2∧ landing in degree l, and of phi~∧ on n-1 generators"""
    phi1, phi2, _ = phi_elements(n)
    v1 = image_vectors(phi1, ell - 1) if ell >= 1 else []
    v2 = image_vectors(phi2, ell - 2) if ell >= 2 else []
    expected = comb(n, ell - 1) if (ell >= 1 and 2 * ell <= n) else (0 if ell == 0 else None)
    phi_tilde = phi_tilde_expected = None
    if n >= 2 and ell >= 2:
        _, _, pt = phi_elements(n)
        pt = GrassmannElement(n - 1, pt.terms)
        phi_tilde = exact_rank(image_vectors(pt, ell - 2))
        phi_tilde_expected = min(comb(n - 1, ell - 2), comb(n - 1, ell))
    return ImageDims(
        n=n, ell=ell,
        phi1=exact_rank(v1), phi2=exact_rank(v2), total=exact_rank(v1 + v2),
        expected_total=expected,
        phi_tilde=phi_tilde, phi_tilde_expected=phi_tilde_expected,
    )


# ── zeta variables and the sl2 triple ────────────────────────────────────────

def zeta_matrix(n: int) -> List[List[int]]:
    """Rows are the xi-coordinates of zeta_1..zeta_{n-1}"""
    gens = n - 1
    rows = [[0] * gens for _ in range(gens)]
    for k in range(1, gens + 1):
        if 2 * k < n:
            for j in range(k, n - k):
                rows[k - 1][j - 1] = 1
            for j in range(k + 1, n - k + 1):
                rows[n - k - 1][j - 1] = 1
        elif 2 * k == n:
            rows[k - 1][k - 1] = 1
    return rows


def zeta_elements(n: int) -> List[GrassmannElement]:
    return [linear_form(row, n - 1) for row in zeta_matrix(n)]


def zeta_derivations(n: int) -> List[Callable[[GrassmannElement], GrassmannElement]]:
    """Derivations dual to the zeta generators, written in xi coordinates"""
    gens = n - 1
    inv = exact_inverse(zeta_matrix(n))
    dual = [[inv[j][k] for j in range(gens)] for k in range(gens)]  # transpose of the inverse

    def make(k):
        def d(x: GrassmannElement) -> GrassmannElement:
            out = GrassmannElement.zero(gens)
            for j, c in enumerate(dual[k]):
                if c != 0:
                    out = out + x.derivation(j + 1).scale(c)
            return out
        return d

    return [make(k) for k in range(gens)]


def sl2_operators(n: int):
    """(D, phi_hat) acting on C[xi_1..xi_{n-1}]"""
    gens = n - 1
    _, _, pt = phi_elements(n)
    phi_t = GrassmannElement(gens, pt.terms)
    derivs = zeta_derivations(n)

    def phi_hat(x: GrassmannElement) -> GrassmannElement:
        return phi_t.wedge(x)

    def big_d(x: GrassmannElement) -> GrassmannElement:
        out = GrassmannElement.zero(gens)
        for k in range(1, n):
            if 2 * k < n:
                out = out + derivs[k - 1](derivs[n - k - 1](x))
        return out

    return big_d, phi_hat


def operator_columns(op, gens: int, degree: int) -> List[GrassmannElement]:
    return [op(b) for b in monomial_basis(gens, degree)]


def _bracket(a, b):
    return lambda x: a(b(x)) - b(a(x))


@dataclass
class Sl2Report:
    n: int
    zeta_identity: bool
    zeta_invertible: bool
    anticommutators: bool
    h_phi: bool
    h_d: bool
    top_degree_vanishes: bool
    graded_dims: List[int]
    h_weights: Dict[int, Dict[int, int]]
    phi_tilde_ranks_from_weights: Dict[int, int]

    @property
    def holds(self) -> bool:
        return all([self.zeta_identity, self.zeta_invertible, self.anticommutators,
                    self.h_phi, self.h_d, self.top_degree_vanishes])


def _weight_dims(h, gens: int, degree: int, max_weight: int) -> Dict[int, int]:
    cols = operator_columns(h, gens, degree)
    dim = len(cols)
    out = {}
    for lam in range(-max_weight, max_weight + 1):
        shifted = [(c - b.scale(lam)).terms for c, b in zip(cols, monomial_basis(gens, degree))]
        mult = dim - exact_rank(shifted)
        if mult:
            out[lam] = mult
    return out


def zeta_sl2_check(n: int, rng: Optional[np.random.Generator] = None) -> Sl2Report:
    """Exact sl2 relations for e = phi_hat, f = -D, h = [D, phi_hat] on every graded piece"""
    if n < 2:
        raise ValueError("the zeta calculus needs n >= 2")
    rng = rng or np.random.default_rng(0)
    gens = n - 1
    zetas = zeta_elements(n)
    _, _, pt = phi_elements(n)
    phi_t = GrassmannElement(gens, pt.terms)

    rebuilt = GrassmannElement.zero(gens)
    for k in range(1, n):
        if 2 * k < n:
            rebuilt = rebuilt + zetas[k - 1].wedge(zetas[n - k - 1])
    zeta_identity = rebuilt == phi_t
    zeta_invertible = exact_rank([z.terms for z in zetas]) == gens

    derivs = zeta_derivations(n)
    sample = random_element(gens, rng)
    anticommutators = True
    for k in range(gens):
        for m in range(gens):
            lhs = derivs[k](zetas[m].wedge(sample)) + zetas[m].wedge(derivs[k](sample))
            rhs = sample if k == m else GrassmannElement.zero(gens)
            anticommutators = anticommutators and lhs == rhs

    big_d, phi_hat = sl2_operators(n)
    h = _bracket(big_d, phi_hat)
    h_phi = h_d = True
    for degree in range(gens + 1):
        for b in monomial_basis(gens, degree):
            h_phi = h_phi and (_bracket(h, phi_hat)(b) == phi_hat(b).scale(2))
            h_d = h_d and (_bracket(h, big_d)(b) == big_d(b).scale(-2))
    top = GrassmannElement(gens, {(1 << gens) - 1: ONE}) if gens else GrassmannElement.one(0)
    top_vanishes = phi_hat(top) == GrassmannElement.zero(gens) if gens >= 2 else True

    pairs = sum(1 for k in range(1, n) if 2 * k < n)
    weights = {d: _weight_dims(h, gens, d, pairs) for d in range(gens + 1)}
    ranks = {}
    for d in range(gens - 1):
        ranks[d + 2] = sum(min(mult, weights[d + 2].get(lam + 2, 0)) for lam, mult in weights[d].items())

    return Sl2Report(
        n=n,
        zeta_identity=zeta_identity,
        zeta_invertible=zeta_invertible,
        anticommutators=anticommutators,
        h_phi=h_phi,
        h_d=h_d,
        top_degree_vanishes=top_vanishes,
        graded_dims=[comb(gens, d) for d in range(gens + 1)],
        h_weights=weights,
        phi_tilde_ranks_from_weights=ranks,
    )


def random_element(n: int, rng: np.random.Generator, max_num: int = 5) -> GrassmannElement:
    terms = {}
    for mask in range(1 << n):
        re = int(rng.integers(-max_num, max_num + 1))
        im = int(rng.integers(-max_num, max_num + 1))
        terms[mask] = GaussianRational(Fraction(re, int(rng.integers(1, 4))), Fraction(im))
    return GrassmannElement(n, terms)


# ── sparse exact operators on V^{⊗n} ─────────────────────────────────────────

@dataclass(frozen=True)
class ExactOperator:
    """Sparse matrix {(row, col): value} on the 2^n-dimensional space"""
    n: int
    entries: Dict[Tuple[int, int], object]

    def __matmul__(self, other: "ExactOperator") -> "ExactOperator":
        by_row: Dict[int, List[Tuple[int, object]]] = {}
        for (r, c), v in other.entries.items():
            by_row.setdefault(r, []).append((c, v))
        out: Dict[Tuple[int, int], object] = {}
        for (r, k), v in self.entries.items():
            for c, w in by_row.get(k, ()):
                out[(r, c)] = out.get((r, c), 0) + v * w
        return ExactOperator(self.n, {k: v for k, v in out.items() if v})

    def __add__(self, other: "ExactOperator") -> "ExactOperator":
        out = dict(self.entries)
        for k, v in other.entries.items():
            out[k] = out.get(k, 0) + v
        return ExactOperator(self.n, {k: v for k, v in out.items() if v})

    def scale(self, c) -> "ExactOperator":
        return ExactOperator(self.n, {k: c * v for k, v in self.entries.items() if c * v})

    def apply_to_basis(self, col: int) -> Dict[int, object]:
        return {r: v for (r, c), v in self.entries.items() if c == col}

    def to_numpy(self) -> np.ndarray:
        dim = 2 ** self.n
        out = np.zeros((dim, dim), dtype=complex)
        for (r, c), v in self.entries.items():
            out[r, c] = complex(v)
        return out

    def same_as(self, other: "ExactOperator") -> bool:
        keys = set(self.entries) | set(other.entries)
        return all(self.entries.get(k, 0) == other.entries.get(k, 0) for k in keys)


def _site_lowering(n: int, m: int, coeff: Callable[[int], object]) -> Dict[Tuple[int, int], object]:
    bit = 1 << (m - 1)
    out = {}
    for col in range(2 ** n):
        if col & bit:
            continue
        value = coeff(col)
        if value:
            out[(col | bit, col)] = value
    return out


def jw_rep(n: int) -> List[ExactOperator]:
    """rho(xi_m) = (-i)^m sigma3_1 ... sigma3_{m-1} sigma-_m"""
    ops = []
    for m in range(1, n + 1):
        phase = minus_i_power(m)
        lower = (1 << (m - 1)) - 1

        def coeff(col, phase=phase, lower=lower):
            return -phase if _popcount(col & lower) & 1 else phase

        ops.append(ExactOperator(n, _site_lowering(n, m, coeff)))
    return ops


def identity_operator(n: int) -> ExactOperator:
    return ExactOperator(n, {(i, i): ONE for i in range(2 ** n)})


def represent(element: GrassmannElement, rho: Optional[List[ExactOperator]] = None) -> ExactOperator:
    rho = rho or jw_rep(element.n)
    out = ExactOperator(element.n, {})
    for mask, coeff in element.terms.items():
        op = identity_operator(element.n)
        for m in _members(mask):
            op = op @ rho[m - 1]
        out = out + op.scale(coeff)
    return out


def intertwiner(members: Sequence[int], n: int) -> Tuple[GaussianRational, int]:
    """xi_M -> (-i)^{sum M} v_M, returned as (scalar, basis index)"""
    return minus_i_power(sum(members)), subset_mask(members)


@dataclass
class JWReport:
    n: int
    anticommute: bool
    faithful: bool
    intertwiner_matches: bool
    phi1_matches_F1: bool
    phi2_matches_F2: bool
    divisibility: bool

    @property
    def holds(self) -> bool:
        return all([self.anticommute, self.faithful, self.intertwiner_matches,
                    self.phi1_matches_F1, self.phi2_matches_F2, self.divisibility])


def jw_check(n: int) -> JWReport:
    rho = jw_rep(n)
    anticommute = all(
        not (rho[a] @ rho[b] + rho[b] @ rho[a]).entries
        for a in range(n) for b in range(a, n)
    )
    monomials = []
    intertwined = True
    for mask in range(2 ** n):
        members = _members(mask)
        op = represent(GrassmannElement(n, {mask: ONE}), rho)
        monomials.append({(r, c): v for (r, c), v in op.entries.items()})
        image = op.apply_to_basis(0)
        scalar, index = intertwiner(members, n)
        intertwined = intertwined and image == {index: scalar}
    faithful = exact_rank(monomials) == 2 ** n

    phi1, phi2, _ = phi_elements(n)
    f1, f2, divisible = exact_F_limits(n)
    return JWReport(
        n=n,
        anticommute=anticommute,
        faithful=faithful,
        intertwiner_matches=intertwined,
        phi1_matches_F1=represent(phi1, rho).same_as(f1),
        phi2_matches_F2=represent(phi2, rho).same_as(f2),
        divisibility=divisible,
    )


# ── U_q(sl2) operators ───────────────────────────────────────────────────────

def _spin_signs(col: int, sites: Iterable[int]) -> int:
    """Sum of sigma3 eigenvalues over the given sites"""
    return sum(-1 if col & (1 << (j - 1)) else 1 for j in sites)


def _uq_entries(n: int, kind: str, qpow: Callable[[int], object]) -> Dict[Tuple[int, int], object]:
    out: Dict[Tuple[int, int], object] = {}
    if kind == "K":
        for col in range(2 ** n):
            out[(col, col)] = qpow(_spin_signs(col, range(1, n + 1)))
        return out
    for m in range(1, n + 1):
        bit = 1 << (m - 1)
        for col in range(2 ** n):
            if kind == "F" and not col & bit:
                out[(col | bit, col)] = qpow(-_spin_signs(col, range(1, m)))
            elif kind == "E" and col & bit:
                out[(col ^ bit, col)] = qpow(_spin_signs(col, range(m + 1, n + 1)))
    return out


def uq_matrix(kind: str, q: complex, n: int) -> np.ndarray:
    """E(q), F(q) or K(q) on V^{⊗n} as a dense complex matrix"""
    q = complex(q)
    dim = 2 ** n
    out = np.zeros((dim, dim), dtype=complex)
    for (r, c), v in _uq_entries(n, kind, lambda k: q ** k).items():
        out[r, c] += v
    return out


def uq_exact(kind: str, q: GaussianRational, n: int) -> ExactOperator:
    q = GaussianRational.of(q)
    return ExactOperator(n, _uq_entries(n, kind, lambda k: q ** k))


def Fq_ops(q, n: int) -> Dict[str, object]:
    """F(q) (exact when q is a Gaussian rational, else numeric) with the exact F1 and F2"""
    f1, f2, _ = exact_F_limits(n)
    try:
        fq = uq_exact("F", GaussianRational.of(q), n)
    except (TypeError, ValueError):
        fq = uq_matrix("F", q, n)
    return {"F": fq, "F1": f1, "F2": f2}


# Laurent polynomials in q: {exponent: int}

def _laurent_mul(a: Dict[int, int], b: Dict[int, int]) -> Dict[int, int]:
    out: Dict[int, int] = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            out[ea + eb] = out.get(ea + eb, 0) + ca * cb
    return {e: c for e, c in out.items() if c}


def _divide_by_1_plus_q2(poly: Dict[int, int]) -> Optional[Dict[int, int]]:
    """Exact quotient of a Laurent polynomial by 1 + q^2, None if not divisible"""
    if not poly:
        return {}
    low = min(poly)
    coeffs = [0] * (max(poly) - low + 1)
    for e, c in poly.items():
        coeffs[e - low] = c
    quotient = [0] * max(len(coeffs) - 2, 0)
    rem = list(coeffs)
    for i in range(len(coeffs) - 1, 1, -1):
        lead = rem[i]
        if lead:
            quotient[i - 2] = lead
            rem[i] -= lead
            rem[i - 2] -= lead
    if any(rem):
        return None
    return {i + low: c for i, c in enumerate(quotient) if c}


def _eval_laurent_at_i(poly: Dict[int, int]) -> GaussianRational:
    out = ZERO
    for e, c in poly.items():
        out = out + I_UNIT ** e * c
    return out


def exact_F_limits(n: int) -> Tuple[ExactOperator, ExactOperator, bool]:
    """F1 = -i F(i) and F2 = -lim F(q)^2/(1+q^2), the latter by exact division"""
    mono = _uq_entries(n, "F", lambda k: {k: 1})
    f1 = ExactOperator(n, {rc: -I_UNIT * _eval_laurent_at_i(p) for rc, p in mono.items()})

    by_row: Dict[int, List[Tuple[int, Dict[int, int]]]] = {}
    for (r, c), p in mono.items():
        by_row.setdefault(r, []).append((c, p))
    square: Dict[Tuple[int, int], Dict[int, int]] = {}
    for (r, k), p in mono.items():
        for c, w in by_row.get(k, ()):
            acc = square.setdefault((r, c), {})
            for e, v in _laurent_mul(p, w).items():
                acc[e] = acc.get(e, 0) + v
    divisible = True
    f2_entries = {}
    for rc, poly in square.items():
        poly = {e: v for e, v in poly.items() if v}
        quotient = _divide_by_1_plus_q2(poly)
        if quotient is None:
            divisible = False
            continue
        value = -_eval_laurent_at_i(quotient)
        if value:
            f2_entries[rc] = value
    return f1, ExactOperator(n, f2_entries), divisible


def _block(mat: np.ndarray, n: int, ell_out: int, ell_in: int) -> np.ndarray:
    return mat[np.ix_(list(weight_indices(n, ell_out)), list(weight_indices(n, ell_in)))]


@dataclass
class UqReport:
    q: complex
    n: int
    ke: float
    kf: float
    ef: float
    exact: Optional[bool] = None

    @property
    def holds(self) -> bool:
        ok = max(self.ke, self.kf, self.ef) <= 1e-12
        return ok and self.exact is not False


def uq_relations_check(n: int, q: complex, exact_q: Optional[Fraction] = None) -> UqReport:
    """KE = q^2 EK, KF = q^-2 FK and [E,F] = (K - K^-1)/(q - q^-1)"""
    e, f, k = (uq_matrix(kind, q, n) for kind in ("E", "F", "K"))
    k_inv = np.linalg.inv(k)
    scale = max(np.linalg.norm(e) * np.linalg.norm(k), 1e-300)

    def rel(x):
        return float(np.linalg.norm(x) / scale)

    exact = None
    if exact_q is not None:
        qe = GaussianRational.of(exact_q)
        ee, fe, ke = (uq_exact(kind, qe, n) for kind in ("E", "F", "K"))
        ke_inv = uq_exact("K", ONE / qe, n)
        lhs = ee @ fe + (fe @ ee).scale(-1)
        rhs = (ke + ke_inv.scale(-1)).scale(ONE / (qe - ONE / qe))
        exact = (lhs.same_as(rhs)
                 and (ke @ ee).same_as((ee @ ke).scale(qe * qe))
                 and (ke @ fe).same_as((fe @ ke).scale(ONE / (qe * qe))))

    return UqReport(
        q=complex(q), n=n,
        ke=rel(k @ e - q ** 2 * e @ k),
        kf=rel(k @ f - q ** -2 * f @ k),
        ef=rel(e @ f - f @ e - (k - k_inv) / (q - 1 / q)),
        exact=exact,
    )


def default_q_sequence(js: Iterable[int] = range(2, 11)) -> List[complex]:
    return [1j * (1 + 2.0 ** (-j)) for j in js]


@dataclass
class SubspaceLimitReport:
    n: int
    ell: int
    rhs_dim: int
    expected_dim: int
    angles: List[float]
    monotone: bool
    final_angle: float
    collapsed: List[int]

    @property
    def holds(self) -> bool:
        return (self.rhs_dim == self.expected_dim and self.monotone
                and self.final_angle < 1e-2 and not self.collapsed)


def limit_rhs_basis(n: int, ell: int) -> Tuple[np.ndarray, int]:
    """Columns spanning F1 V_{l-1} + F2 V_{l-2} in v_M coordinates, with its exact dimension"""
    f1, f2, _ = exact_F_limits(n)
    rows = set(weight_indices(n, ell))
    vectors = []
    for op, src in ((f1, ell - 1), (f2, ell - 2)):
        if src < 0:
            continue
        for col in weight_indices(n, src):
            vectors.append({r: v for r, v in op.apply_to_basis(col).items() if r in rows})
    dim = exact_rank(vectors)
    index = {r: i for i, r in enumerate(weight_indices(n, ell))}
    dense = np.zeros((len(index), len(vectors)), dtype=complex)
    for j, vec in enumerate(vectors):
        for r, v in vec.items():
            dense[index[r], j] = complex(v)
    return orthonormal(dense, rcond=1e-10), dim


def subspace_limit_check(n: int, ell: int, q_sequence: Optional[Sequence[complex]] = None) -> SubspaceLimitReport:
    """Principal angle between F(q_j) V_{l-1} and F1 V_{l-1} + F2 V_{l-2} as q_j -> i"""
    if 2 * ell > n or ell < 1:
        raise ValueError(f"the limit check needs 1 <= l and 2l <= n, got n={n}, l={ell}")
    q_sequence = list(q_sequence or default_q_sequence())
    rhs, dim = limit_rhs_basis(n, ell)
    expected = comb(n, ell - 1)
    angles, collapsed = [], []
    for j, q in enumerate(q_sequence):
        block = _block(uq_matrix("F", q, n), n, ell, ell - 1)
        s = np.linalg.svd(block, compute_uv=False)
        if s[-1] < 1e-12 * s[0]:
            logger.warning(f"F(q) image collapsed numerically at q={q}")
            collapsed.append(j)
        angles.append(float(principal_angles(orthonormal(block), rhs)[0]))
    monotone = all(b <= 1.1 * a or b < 1e-13 for a, b in zip(angles, angles[1:]))
    return SubspaceLimitReport(
        n=n, ell=ell, rhs_dim=dim, expected_dim=expected, angles=angles,
        monotone=monotone, final_angle=angles[-1], collapsed=collapsed,
    )


@dataclass
class IntersectionReport:
    """intersection_dim counts principal angles below angle_cut between the extrapolated limit subspaces"""
    n: int
    ell: int
    limit_angles: List[float]
    intersection_dim: int
    angle_cut: float
    extrapolation_change: float
    steps: List[float] = field(default_factory=list)


INTERSECTION_ANGLE_CUT = 1e-6


def _limit_projector(basis_at: Callable[[complex], np.ndarray], steps: Sequence[float]) -> np.ndarray:
    """Neville extrapolation to h = 0 of the orthogonal projectors onto basis_at(i (1 + h))"""
    table = []
    for h in steps:
        basis = basis_at(1j * (1 + h))
        table.append(basis @ basis.conj().T)
    h = list(steps)
    for level in range(1, len(table)):
        table = [(h[i] * table[i + 1] - h[i + level] * table[i]) / (h[i] - h[i + level])
                 for i in range(len(table) - 1)]
    return table[0]


def _dominant_subspace(projector: np.ndarray, dim: int) -> np.ndarray:
    hermitian = 0.5 * (projector + projector.conj().T)
    _, vecs = np.linalg.eigh(hermitian)
    return vecs[:, ::-1][:, :dim]


def singular_limit_intersection(n: int, ell: int, js: Iterable[int] = range(8, 13),
                                angle_cut: float = INTERSECTION_ANGLE_CUT) -> IntersectionReport:
    """Dimension of lim ker E(q) ∩ lim F(q) V_{l-1} as q -> i

    For q near i both subspaces have constant dimension and vary analytically
    in h = q/i - 1, so their projectors are extrapolated to h = 0 from
    q_j = i (1 + 2^-j). The dimension counts principal angles below angle_cut
    between the two limit subspaces.
    """
    if ell < 1 or ell > n:
        raise ValueError(f"the intersection needs 1 <= l <= n, got n={n}, l={ell}")
    d_sing = comb(n, ell) - comb(n, ell - 1)
    d_image = comb(n, ell - 1)
    if d_sing <= 0:
        raise ValueError(f"no singular vectors for n={n}, l={ell}")

    def kernel_at(q):
        _, _, vh = np.linalg.svd(_block(uq_matrix("E", q, n), n, ell - 1, ell))
        return vh.conj().T[:, -d_sing:]

    def image_at(q):
        u, _, _ = np.linalg.svd(_block(uq_matrix("F", q, n), n, ell, ell - 1), full_matrices=False)
        return u[:, :d_image]

    steps = [2.0 ** (-j) for j in js]
    kernel_p = _limit_projector(kernel_at, steps)
    image_p = _limit_projector(image_at, steps)
    # one node fewer shows how far the extrapolation has settled
    change = max(float(np.linalg.norm(_limit_projector(kernel_at, steps[:-1]) - kernel_p)),
                 float(np.linalg.norm(_limit_projector(image_at, steps[:-1]) - image_p)))
    angles = np.sort(principal_angles(_dominant_subspace(kernel_p, d_sing), _dominant_subspace(image_p, d_image)))
    dim = int(np.sum(angles < angle_cut))
    logger.debug(f"singular limit n={n} l={ell}: smallest angles {angles[:3]}, extrapolation change {change:.1e}")
    return IntersectionReport(
        n=n, ell=ell, limit_angles=angles.tolist(), intersection_dim=dim, angle_cut=angle_cut,
        extrapolation_change=change, steps=steps,
    )
