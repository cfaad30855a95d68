# api/utils/hyper_map.py
"""
Hypergeometric integrals I(w_M, W), the matrix [I(w_M, W_N)], solutions Psi_W
and the solution checks built on them.

Matrix entries use int_{C^l} w_M G_N prod phi = I(w_M, W_N). Since the
polynomial part of g_M expands into monomials, every entry is a signed sum
of products of one-variable moments

    J(k, m, n') = int_C t^k u_m(t) h_n'(t) phi(t) dt,

so l-fold integrals reduce to one-dimensional ones. The tensor-product rule of
contour_quadrature serves as an independent oracle for single entries.
"""

import cmath
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations
from math import comb, factorial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from api.utils import grassmann
from api.utils import weight_functions as wf
from api.utils.contour_quadrature import (
    MAX_DEPTH,
    branch_power,
    build_contour,
    integrate_iterated,
    integrate_path,
)
from api.utils.errors import ConvergenceRegimeError, InconclusiveError, QuadratureError
from api.utils.qkz_operators import ModelParams, det_K_weight, mu_generator_L, qkz_K
from api.utils.special import GAMMA_MINUS_HALF
from api.utils.tensor_space import (
    TensorVector,
    global_sl2,
    orthonormal,
    principal_angles,
    singular_coords,
    subsets,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-11
RANK_CUT = 1e-6
RANK_GAP = 10.0
REGULARIZATION_EPS = (0.2, 0.1, 0.05)

Poly = Dict[Tuple[int, ...], complex]


# ── polynomial part of g_M ───────────────────────────────────────────────────

def _poly_mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0) + ca * cb
    return {e: c for e, c in out.items() if c != 0}


def _linear(ell: int, coeffs: Dict[int, complex], constant: complex = 0) -> Poly:
    out: Poly = {}
    if constant != 0:
        out[(0,) * ell] = constant
    for a, c in coeffs.items():
        e = [0] * ell
        e[a] = 1
        out[tuple(e)] = c
    return out


def vandermonde_shift(ell: int, hbar: complex) -> Poly:
    """prod_{a<b} (t_a - t_b - hbar) expanded in monomials"""
    poly: Poly = {(0,) * ell: 1.0}
    for a in range(ell):
        for b in range(a + 1, ell):
            poly = _poly_mul(poly, _linear(ell, {a: 1.0, b: -1.0}, -hbar))
    return poly


def coordinate_sum(ell: int) -> Poly:
    return _linear(ell, {a: 1.0 for a in range(ell)})


# ── moments ──────────────────────────────────────────────────────────────────

def _moment_kernel(k: int, m: int, n_col: int, params: ModelParams):
    def kernel(t):
        t = np.asarray(t, dtype=complex)
        return t ** k * wf.u_factor(m, t, params) * wf.h_factor(n_col, t, params)
    return kernel


def _phase_weight(params: ModelParams):
    return lambda t: np.exp(wf.log_phase(t, params))


def _check_regime(params: ModelParams, max_power: int, allow_boundary: bool):
    if abs(params.mu.imag) > 1e-14 or allow_boundary:
        return
    # upward the integrand decays like t^(k - 1 - n/2)
    if 2 * max_power >= params.n:
        raise ConvergenceRegimeError(
            f"at mu = 0 the moments of degree {max_power} diverge for n={params.n}"
        )


@dataclass
class MomentTable:
    """J(k, m, n') for 0 <= k <= max_power and 1 <= m, n' <= n"""
    params: ModelParams
    values: Dict[Tuple[int, int, int], complex]
    errors: Dict[Tuple[int, int, int], float]

    @classmethod
    def compute(cls, params: ModelParams, max_power: int, tol: float = DEFAULT_TOL,
                workers: int = 1, allow_boundary: bool = False, max_depth: int = MAX_DEPTH) -> "MomentTable":
        _check_regime(params, max_power, allow_boundary)
        contour = build_contour(params, tol=tol, max_depth=max_depth)
        weight = _phase_weight(params)
        keys = [(k, m, nc) for k in range(max_power + 1)
                for m in range(1, params.n + 1) for nc in range(1, params.n + 1)]

        def one(key):
            k, m, nc = key
            return integrate_path(_moment_kernel(k, m, nc, params), contour, tol=tol, weight=weight)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one, keys))
        else:
            results = [one(key) for key in keys]
        return cls(
            params=params,
            values={key: r.value for key, r in zip(keys, results)},
            errors={key: r.error for key, r in zip(keys, results)},
        )


def separable_entry(M: Sequence[int], N: Sequence[int], poly: Poly, table: MomentTable) -> Tuple[complex, float]:
    """sum_sigma sgn(sigma) int poly(t_sigma) prod_a u_{m_a}(t_sigma(a)) prod_b h_{n_b}(t_b) phi(t_b)"""
    ell = len(M)
    value, error = 0j, 0.0
    for perm in permutations(range(ell)):
        sign = wf.permutation_sign(perm)
        inverse = [0] * ell
        for a, b in enumerate(perm):
            inverse[b] = a
        for exps, c in poly.items():
            factors, errs = [], []
            for b in range(ell):
                a = inverse[b]
                key = (exps[a], M[a], N[b])
                factors.append(table.values[key])
                errs.append(table.errors[key])
            prod = c * np.prod(factors) if factors else c
            value += sign * prod
            for j in range(ell):
                others = np.prod([abs(f) for i, f in enumerate(factors) if i != j])
                error += abs(c) * errs[j] * others
    return complex(value), float(error)


# ── matrices and solutions ───────────────────────────────────────────────────

@dataclass
class HyperMatrix:
    """[I(w_M, W_N)], rows M and columns N in lexicographic order"""
    params: ModelParams
    entries: np.ndarray
    errors: np.ndarray
    moments: Optional[MomentTable] = field(default=None, repr=False)

    @property
    def ell(self) -> int:
        return self.params.ell

    def det(self) -> complex:
        return complex(np.linalg.det(self.entries))

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.entries, compute_uv=False)


def hyper_matrix(params: ModelParams, tol: float = DEFAULT_TOL, workers: int = 1,
                 allow_boundary: bool = False, max_depth: int = MAX_DEPTH) -> HyperMatrix:
    ell, n = params.ell, params.n
    if ell == 0:
        return HyperMatrix(params, np.ones((1, 1), dtype=complex), np.zeros((1, 1)))
    table = MomentTable.compute(params, ell - 1, tol=tol, workers=workers, allow_boundary=allow_boundary,
                                max_depth=max_depth)
    poly = vandermonde_shift(ell, params.hbar)
    rows = subsets(n, ell)
    entries = np.zeros((len(rows), len(rows)), dtype=complex)
    errors = np.zeros((len(rows), len(rows)))
    for i, M in enumerate(rows):
        for j, N in enumerate(rows):
            entries[i, j], errors[i, j] = separable_entry(M, N, poly, table)
    logger.debug(f"hyper matrix n={n} l={ell} mu={params.mu}: max entry error {errors.max():.2e}")
    return HyperMatrix(params, entries, errors, moments=table)


def hyper_integral(M: Sequence[int], W, params: ModelParams, tol: float = DEFAULT_TOL,
                   allow_boundary: bool = False, max_depth: int = MAX_DEPTH) -> Tuple[complex, float]:
    """I(w_M, W) with an error estimate; W is a subset N or a PeriodicFnCoeffs"""
    ell = len(M)
    if ell == 0:
        return 1.0 + 0j, 0.0
    if not isinstance(W, wf.PeriodicFnCoeffs):
        W = wf.PeriodicFnCoeffs.basis(W, params.n)
    table = MomentTable.compute(params, ell - 1, tol=tol, allow_boundary=allow_boundary, max_depth=max_depth)
    poly = vandermonde_shift(ell, params.hbar)
    value, error = 0j, 0.0
    for N, c in zip(subsets(params.n, ell), W.coeffs):
        if c == 0:
            continue
        v, e = separable_entry(tuple(M), N, poly, table)
        value += c * v
        error += abs(c) * e
    return value, error


def psi_of_W(coeffs: wf.PeriodicFnCoeffs, params: ModelParams, matrix: Optional[HyperMatrix] = None,
             tol: float = DEFAULT_TOL, allow_boundary: bool = False, max_depth: int = MAX_DEPTH) -> TensorVector:
    """Psi_W = sum_M I(w_M, W) v_M"""
    if coeffs.ell != params.ell:
        raise ValueError(f"W has arity {coeffs.ell}, parameters have l={params.ell}")
    matrix = matrix or hyper_matrix(params, tol=tol, allow_boundary=allow_boundary, max_depth=max_depth)
    return TensorVector.from_weight_coords(params.n, params.ell, matrix.entries @ coeffs.coeffs)


def asym_path_entry(M: Sequence[int], N: Sequence[int], params: ModelParams,
                    tol: float = 1e-9, refine: bool = False, max_depth: int = MAX_DEPTH):
    """(1/l!) int w_M W_N prod phi over C^l by the tensor-product rule"""
    ell = len(M)
    contour = build_contour(params, tol=tol, max_depth=max_depth)

    def integrand(ts):
        w = wf.asym(lambda s: wf.g_kernel(tuple(M), s, params), ts)
        big_w = wf.asym(lambda s: wf.G_kernel(tuple(N), s, params), ts)
        return w * big_w

    res = integrate_iterated(integrand, contour, ell, weight=_phase_weight(params), refine=refine, tol=tol)
    res.value /= factorial(ell)
    res.error /= factorial(ell)
    return res


# ── closed form of the determinant ───────────────────────────────────────────

def det_closed_form(params: ModelParams) -> complex:
    """((ip)^{n(n-1)/2} (i Gamma(-1/2))^n (e^mu-1)^{n/2} e^{mu sum z/p})^{C(n-1,l-1)}
    times prod_{k<m} (z_k - z_m - hbar)^{-C(n-2,l-1)}"""
    n, ell, p, hbar, mu = params.n, params.ell, params.p, params.hbar, params.mu
    if ell == 0:
        return 1.0 + 0j
    outer = comb(n - 1, ell - 1)
    inner = comb(n - 2, ell - 1) if n >= 2 else 0
    base = ((1j * p) ** (n * (n - 1) // 2)
            * (1j * GAMMA_MINUS_HALF) ** n
            * branch_power(cmath.exp(mu) - 1, n / 2)
            * cmath.exp(mu * sum(params.z) / p))
    out = base ** outer
    for k in range(n):
        for m in range(k + 1, n):
            out *= (params.z[k] - params.z[m] - hbar) ** (-inner)
    return complex(out)


def det_shift_ratio(params: ModelParams, m: int) -> Tuple[complex, complex]:
    """(closed form at z + p e_m divided by closed form at z, det K_m on the weight block)"""
    ratio = det_closed_form(params.shifted(m)) / det_closed_form(params)
    return ratio, det_K_weight(m, params, params.ell)


# ── solution residuals ───────────────────────────────────────────────────────

def _relative(vec: np.ndarray, ref: np.ndarray) -> float:
    return float(np.linalg.norm(vec) / max(np.linalg.norm(ref), 1e-300))


def _against(vec: np.ndarray, scale: float) -> float:
    return float(np.linalg.norm(vec) / max(float(scale), 1e-300))


def qkz_shift_residual(coeffs: wf.PeriodicFnCoeffs, params: ModelParams, m: int,
                       tol: float = DEFAULT_TOL, allow_boundary: bool = False,
                       max_depth: int = MAX_DEPTH) -> float:
    """|Psi_W(.., z_m + p, ..) - K_m(z) Psi_W(z)| / |Psi_W(z)|"""
    psi = psi_of_W(coeffs, params, tol=tol, allow_boundary=allow_boundary, max_depth=max_depth)
    psi_shift = psi_of_W(coeffs, params.shifted(m), tol=tol, allow_boundary=allow_boundary, max_depth=max_depth)
    moved = qkz_K(m, params) @ psi
    return _relative(psi_shift.data - moved.data, psi.data)


def singular_residual(psi: TensorVector) -> float:
    """|Sigma^+ Psi| / |Psi|"""
    return _relative(global_sl2("plus", psi.n).data @ psi.data, psi.data)


def mu_ode_residual(coeffs: wf.PeriodicFnCoeffs, params: ModelParams, delta: float = 1e-2,
                    tol: float = DEFAULT_TOL, max_depth: int = MAX_DEPTH) -> float:
    """|p dPsi/dmu - L Psi| / |Psi| with Richardson over delta and delta/2"""
    psi = psi_of_W(coeffs, params, tol=tol, max_depth=max_depth).data

    def central(step):
        plus = psi_of_W(coeffs, params.with_mu(params.mu + step), tol=tol, max_depth=max_depth).data
        minus = psi_of_W(coeffs, params.with_mu(params.mu - step), tol=tol, max_depth=max_depth).data
        return (plus - minus) / (2 * step)

    if params.ell == 0:
        derivative = np.zeros_like(psi)
    else:
        derivative = (4 * central(delta / 2) - central(delta)) / 3
    lhs = params.p * derivative
    rhs = mu_generator_L(params).data @ psi
    return _relative(lhs - rhs, psi)


@dataclass
class TotalDifferenceReport:
    value: complex
    scale: float
    family: str

    @property
    def residual(self) -> float:
        return abs(self.value) / max(self.scale, 1e-300)


def _w_combination(coeffs: wf.PeriodicFnCoeffs, params: ModelParams):
    rows = subsets(params.n, coeffs.ell)

    def big_w(ts):
        out = 0j
        for N, c in zip(rows, coeffs.coeffs):
            if c != 0:
                out = out + c * wf.asym(lambda s, N=N: wf.G_kernel(N, s, params), ts)
        return out
    return big_w


def total_difference_residual(M: Sequence[int], coeffs: wf.PeriodicFnCoeffs, params: ModelParams,
                              family: str = "w", tol: float = 1e-10,
                              max_depth: int = MAX_DEPTH) -> TotalDifferenceReport:
    """|I(D_1 f, W)| against the size of its two halves

    family "w" or "g" integrates D_1 w_M or D_1 g_M on the contour that keeps
    z_m - p on the right; family "r_M" uses the explicit combination through
    separable moments.
    """
    M = tuple(M)
    if family == "r_M":
        return _r_M_integral(M, coeffs, params, tol, max_depth=max_depth)
    if family not in ("w", "g"):
        raise ValueError(f"unknown total-difference family {family!r}")
    kernel = (lambda s: wf.g_kernel(M, s, params)) if family == "g" else \
        (lambda s: wf.asym(lambda r: wf.g_kernel(M, r, params), s))
    big_w = _w_combination(coeffs, params)
    em = cmath.exp(params.mu)

    def direct(ts):
        return kernel(ts) * big_w(ts)

    def shifted(ts):
        moved = [ts[0] + params.p] + list(ts[1:])
        return em * wf.shift_ratio(ts[0], params) * kernel(moved) * big_w(ts)

    contour = build_contour(params, tol=tol, right_depth=1, max_depth=max_depth)
    weight = _phase_weight(params)
    guide_anchor = [contour.to_t(0.37 * (a + 1)) for a in range(len(M) - 1)]
    guide = lambda t: direct([t] + [np.full(np.shape(t), x) for x in guide_anchor])
    first = integrate_iterated(direct, contour, len(M), weight=weight, guide=guide, tol=tol).value
    second = integrate_iterated(shifted, contour, len(M), weight=weight, guide=guide, tol=tol).value
    return TotalDifferenceReport(value=first - second, scale=max(abs(first), abs(second)), family=family)


def _r_M_integral(M: Tuple[int, ...], coeffs: wf.PeriodicFnCoeffs, params: ModelParams,
                  tol: float, max_depth: int = MAX_DEPTH) -> TotalDifferenceReport:
    n, hbar, ell = params.n, params.hbar, len(M)
    em = cmath.exp(params.mu)
    # at e^mu = 1 the coordinate-sum term drops out and degree l - 1 suffices
    at_zero = abs(em - 1) < 1e-14
    table = MomentTable.compute(params, ell - 1 if at_zero else ell, tol=tol, max_depth=max_depth)
    base = vandermonde_shift(ell, hbar)
    rows = subsets(n, ell)

    def integral(subset, poly):
        return sum(c * separable_entry(subset, N, poly, table)[0]
                   for N, c in zip(rows, coeffs.coeffs) if c != 0)

    terms = [((em - 1) / hbar * sum(params.z[m - 1] for m in M) + em * ell) * integral(M, base)]
    if not at_zero:
        with_sum = _poly_mul(coordinate_sum(ell), base)
        terms.append(-(em - 1) / hbar * integral(M, with_sum))
    for m in M:
        for k in range(1, n + 1):
            if k in M:
                continue
            swapped = tuple(sorted((set(M) - {m}) | {k}))
            factor = 1.0 if k < m else em
            terms.append(factor * integral(swapped, base))
    return TotalDifferenceReport(value=complex(sum(terms)), scale=float(sum(abs(x) for x in terms)),
                                 family="r_M")


# ── kernel and image at mu = 0 ───────────────────────────────────────────────

@dataclass
class KernelReport:
    n: int
    ell: int
    singular_values: List[float]
    rank: int
    expected_rank: int
    gap: float
    kernel_angle: float
    image_angle: float
    inclusion_residual: float
    x_image_dim: int

    @property
    def holds(self) -> bool:
        return self.rank == self.expected_rank and self.gap >= RANK_GAP


def x_image_coords(n: int, ell: int) -> Tuple[np.ndarray, int]:
    """Orthonormal basis of im X^(1) + im X^(2) in W coordinates, with its exact dimension"""
    blocks = []
    if ell >= 1:
        blocks.append(wf.x_matrix(1, n, ell))
    if ell >= 2:
        blocks.append(wf.x_matrix(2, n, ell))
    if not blocks:
        return np.zeros((comb(n, ell), 0), dtype=complex), 0
    dim = grassmann.exact_rank([e.terms for e in wf.x_image_basis(n, ell)])
    return orthonormal(np.hstack(blocks), rcond=1e-10), dim


def numerical_rank(singular_values: np.ndarray, cut: float = RANK_CUT) -> Tuple[int, float]:
    """Rank under the relative cut and the ratio across the cut"""
    if singular_values.size == 0 or singular_values[0] == 0:
        return 0, float("inf")
    rel = singular_values / singular_values[0]
    rank = int(np.sum(rel > cut))
    if rank == singular_values.size:
        return rank, float("inf")
    gap = float(singular_values[rank - 1] / max(singular_values[rank], 1e-300)) if rank else float("inf")
    return rank, gap


def kernel_report(params: ModelParams, tol: float = DEFAULT_TOL, matrix: Optional[HyperMatrix] = None,
                  rank_cut: float = RANK_CUT, max_depth: int = MAX_DEPTH) -> KernelReport:
    """Rank, kernel and image of the hypergeometric map at mu = 0; rank_cut is relative to the top singular value"""
    n, ell = params.n, params.ell
    if abs(params.mu) > 1e-14:
        raise ConvergenceRegimeError("the kernel analysis runs at mu = 0")
    if 2 * ell > n:
        raise ConvergenceRegimeError(f"the kernel analysis needs 2l <= n, got n={n}, l={ell}")
    matrix = matrix or hyper_matrix(params, tol=tol, max_depth=max_depth)
    u, s, vh = np.linalg.svd(matrix.entries)
    rank, gap = numerical_rank(s, cut=rank_cut)
    expected = comb(n, ell) - (comb(n, ell - 1) if ell >= 1 else 0)
    if gap < RANK_GAP:
        logger.warning(f"rank gap {gap:.2f} below {RANK_GAP} for n={n} l={ell}")
        raise InconclusiveError(f"singular-value gap {gap:.2f} is below {RANK_GAP}: rank undecided")

    kernel = vh.conj().T[:, rank:]
    image = u[:, :rank]
    x_basis, x_dim = x_image_coords(n, ell)
    kernel_angle = float(principal_angles(kernel, x_basis)[0]) if kernel.shape[1] and x_basis.shape[1] else 0.0
    if kernel.shape[1] != x_basis.shape[1]:
        kernel_angle = float(np.pi / 2)
    sing = singular_coords(n, ell)
    image_angle = float(principal_angles(image, sing)[0]) if image.shape[1] and sing.shape[1] else 0.0
    if image.shape[1] != sing.shape[1]:
        image_angle = float(np.pi / 2)
    inclusion = 0.0
    if x_basis.shape[1]:
        inclusion = float(np.linalg.norm(matrix.entries @ x_basis) / max(s[0], 1e-300))
    return KernelReport(
        n=n, ell=ell, singular_values=s.tolist(), rank=rank, expected_rank=expected, gap=gap,
        kernel_angle=kernel_angle, image_angle=image_angle, inclusion_residual=inclusion,
        x_image_dim=x_dim,
    )


# ── regularization at mu -> 0 ────────────────────────────────────────────────

@dataclass
class RegularizedMatrix:
    eps: List[float]
    matrices: List[np.ndarray]
    extrapolated: np.ndarray
    cauchy: List[float]


def richardson(values: Sequence[np.ndarray], eps: Sequence[float]) -> np.ndarray:
    """Neville extrapolation to eps = 0 of values sampled at eps"""
    table = [np.asarray(v, dtype=complex) for v in values]
    eps = list(eps)
    for level in range(1, len(table)):
        table = [
            (eps[i] * table[i + 1] - eps[i + level] * table[i]) / (eps[i] - eps[i + level])
            for i in range(len(table) - 1)
        ]
    return table[0]


def regularized_matrix(params: ModelParams, eps_list: Sequence[float] = REGULARIZATION_EPS,
                       tol: float = DEFAULT_TOL, allow_boundary: bool = False,
                       max_depth: int = MAX_DEPTH) -> RegularizedMatrix:
    """Matrices at mu = i eps and their extrapolation to eps = 0"""
    mats = [hyper_matrix(params.with_mu(1j * e), tol=tol, allow_boundary=allow_boundary, max_depth=max_depth).entries
            for e in eps_list]
    cauchy = [_relative(b - a, a) for a, b in zip(mats, mats[1:])]
    return RegularizedMatrix(eps=list(eps_list), matrices=mats,
                             extrapolated=richardson(mats, eps_list), cauchy=cauchy)


@dataclass
class VanishingReport:
    """regularized decides the check; direct is None when the mu = 0 quadrature did not converge"""
    n: int
    ell: int
    dimension: int
    fit_residual: float
    regularized: float
    direct: Optional[float] = None
    direct_error: Optional[str] = None


def exponential_vanishing_report(params: ModelParams, rng: Optional[np.random.Generator] = None,
                                 tol: float = DEFAULT_TOL, max_depth: int = MAX_DEPTH) -> VanishingReport:
    """|Psi_W| / scale for W spanning the exponential subspace, 2l > n

    The value at mu = 0 is the limit of mu = i eps, eps -> 0. The matrix
    taken at mu = 0 itself sits on the boundary of convergence and is only
    reported alongside.
    """
    rng = rng or np.random.default_rng(0)
    params = params.with_mu(0)
    basis = wf.exponential_subspace_basis(params.ell, params)
    reg = regularized_matrix(params, tol=tol, allow_boundary=True, max_depth=max_depth).extrapolated
    direct_matrix, direct_error = None, None
    try:
        direct_matrix = hyper_matrix(params, tol=tol, allow_boundary=True, max_depth=max_depth).entries
    except QuadratureError as e:
        direct_error = str(e)
        logger.info(f"mu = 0 matrix for n={params.n} l={params.ell} not available: {direct_error}")

    worst_fit = worst_reg = 0.0
    worst_direct = None if direct_matrix is None else 0.0
    for fn in basis:
        coeffs, fit = wf.fit_coeffs(fn, params.ell, params, rng)
        worst_fit = max(worst_fit, fit)
        c_norm = np.linalg.norm(coeffs.coeffs)
        worst_reg = max(worst_reg, _against(reg @ coeffs.coeffs, np.linalg.norm(reg) * c_norm))
        if direct_matrix is not None:
            worst_direct = max(worst_direct, _against(direct_matrix @ coeffs.coeffs,
                                                       np.linalg.norm(direct_matrix) * c_norm))
    return VanishingReport(n=params.n, ell=params.ell, dimension=len(basis), fit_residual=worst_fit,
                           regularized=worst_reg, direct=worst_direct, direct_error=direct_error)
