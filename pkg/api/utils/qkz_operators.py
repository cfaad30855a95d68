# api/utils/qkz_operators.py
"""
R-matrix, qKZ operators and the mu-generator at level zero (p = 2 hbar).

ModelParams carries every global parameter of the model. Operators are built
densely on V^{⊗n}; the helpers at the bottom return normalized residuals of
the compatibility identities used by the verification suites.
"""

import cmath
import logging
from dataclasses import dataclass, field, replace
from math import comb, pi
from typing import Dict, List, Sequence, Tuple

import numpy as np

from api.utils.errors import ConfigError, GenericityError, PoleError
from api.utils.tensor_space import (
    TensorOperator,
    commutator,
    global_sl2,
    identity,
    permutation,
    relative_norm,
    site_operator,
)

logger = logging.getLogger(__name__)

POLE_TOL = 1e-12
GENERICITY_TOL = 1e-8


def _dist_to_integers(x: complex) -> float:
    return abs(x - round(x.real))


@dataclass(frozen=True)
class ModelParams:
    """(n, l, hbar, p = 2 hbar, mu, z_1..z_n) with the genericity invariants"""
    n: int
    ell: int
    hbar: complex = 1.0
    mu: complex = 1j * pi
    z: Tuple[complex, ...] = ()
    genericity_tol: float = GENERICITY_TOL
    p_override: complex = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "hbar", complex(self.hbar))
        object.__setattr__(self, "mu", complex(self.mu))
        object.__setattr__(self, "z", tuple(complex(v) for v in self.z))
        if self.n < 1:
            raise ConfigError(f"n must be positive, got {self.n}", field="n")
        if not 0 <= self.ell <= self.n:
            raise ConfigError(f"ell must lie in 0..{self.n}, got {self.ell}", field="ell")
        if self.hbar == 0:
            raise ConfigError("hbar must be nonzero", field="hbar")
        if self.p_override is not None and abs(complex(self.p_override) - 2 * self.hbar) > 1e-14 * abs(self.hbar):
            raise ConfigError(f"level zero requires p = 2*hbar, got p={self.p_override}", field="p")
        if not 0 <= self.mu.imag < 2 * pi:
            raise ConfigError(f"Im mu must lie in [0, 2pi), got {self.mu.imag}", field="mu")
        if len(self.z) != self.n:
            raise ConfigError(f"expected {self.n} z values, got {len(self.z)}", field="z")
        self.check_generic()

    @property
    def p(self) -> complex:
        return 2 * self.hbar

    @property
    def zbar(self) -> complex:
        return sum(self.z) / self.n

    def exp_p(self, x):
        """Exp(x) = exp(2 pi i x / p), vectorized"""
        return np.exp(2j * pi * np.asarray(x) / self.p)

    def genericity_report(self) -> Dict[str, float]:
        smallest_sum = float("inf")
        smallest_disc = float("inf")
        for k in range(self.n):
            for m in range(self.n):
                if k == m:
                    continue
                if k < m:
                    value = abs(self.exp_p(self.z[k]) + self.exp_p(self.z[m]))
                    smallest_sum = min(smallest_sum, float(value))
                shift = (self.z[k] - self.z[m] + self.hbar) / self.p
                smallest_disc = min(smallest_disc, _dist_to_integers(shift) * abs(self.p))
        return {"min_exp_sum": smallest_sum, "min_discriminant_distance": smallest_disc}

    def check_generic(self):
        report = self.genericity_report()
        if report["min_exp_sum"] <= self.genericity_tol:
            raise GenericityError(
                f"z is not generic: |Exp(z_k)+Exp(z_m)| = {report['min_exp_sum']:.3e}"
            )
        if report["min_discriminant_distance"] <= self.genericity_tol:
            raise GenericityError(
                f"z lies on the discriminant: distance {report['min_discriminant_distance']:.3e}"
            )

    def with_z(self, z: Sequence[complex]) -> "ModelParams":
        return replace(self, z=tuple(z))

    def with_mu(self, mu: complex) -> "ModelParams":
        return replace(self, mu=mu)

    def shifted(self, m: int, k: int = 1) -> "ModelParams":
        """Parameters with z_m replaced by z_m + k p"""
        z = list(self.z)
        z[m - 1] += k * self.p
        return self.with_z(z)


def random_generic_z(n: int, rng: np.random.Generator, spread: float = 0.4,
                     hbar: complex = 1.0, tol: float = GENERICITY_TOL) -> Tuple[complex, ...]:
    """Seeded z drawn in a box of side `spread` around 0, rejecting non-generic draws"""
    for _ in range(100):
        z = rng.uniform(-spread / 2, spread / 2, n) + 1j * rng.uniform(-spread / 2, spread / 2, n)
        try:
            ModelParams(n=n, ell=0, hbar=hbar, z=tuple(z), genericity_tol=max(tol, 1e-3))
        except GenericityError:
            continue
        return tuple(complex(v) for v in z)
    raise GenericityError(f"could not draw generic z for n={n}")


def r_matrix(x: complex, hbar: complex) -> TensorOperator:
    """R(x) = (x + hbar P)/(x + hbar) on V⊗V"""
    if abs(x + hbar) < POLE_TOL * max(1.0, abs(hbar)):
        raise PoleError(f"R-matrix pole at x = -hbar (x={x})", location=x)
    return TensorOperator(2, (x * np.eye(4) + hbar * permutation(1, 2, 2).data) / (x + hbar))


def r_operator(i: int, j: int, x: complex, hbar: complex, n: int) -> TensorOperator:
    """R_ij(x) acting on factors i and j of V^{⊗n}"""
    if abs(x + hbar) < POLE_TOL * max(1.0, abs(hbar)):
        raise PoleError(f"R-matrix pole at x = -hbar (x={x})", location=x)
    return TensorOperator(n, (x * np.eye(2 ** n) + hbar * permutation(i, j, n).data) / (x + hbar))


def exp_mu_H(m: int, mu: complex, n: int) -> TensorOperator:
    h = site_operator("H", m, n).data
    return TensorOperator(n, np.eye(2 ** n) + (cmath.exp(mu) - 1) * h)


def qkz_K(m: int, params: ModelParams) -> TensorOperator:
    """K_m(z) for the level-zero qKZ system"""
    n, z, p, hbar = params.n, params.z, params.p, params.hbar
    if not 1 <= m <= n:
        raise IndexError(f"m={m} out of range 1..{n}")
    out = identity(n)
    for j in range(m - 1, 0, -1):
        out = out @ r_operator(m, j, z[m - 1] - z[j - 1] + p, hbar, n)
    out = out @ exp_mu_H(m, params.mu, n)
    for j in range(n, m, -1):
        out = out @ r_operator(m, j, z[m - 1] - z[j - 1], hbar, n)
    return out


def qkz_K_tilde(m: int, params: ModelParams) -> TensorOperator:
    """K_m(z_1+p..z_{m-1}+p, z_m..) ... K_1(z), the transport shifting z_1..z_m by p"""
    out = identity(params.n)
    current = params
    for j in range(1, m + 1):
        out = qkz_K(j, current) @ out
        current = current.shifted(j)
    return out


def mu_generator_L(params: ModelParams) -> TensorOperator:
    """L such that p d/dmu Psi = L Psi"""
    n = params.n
    em = cmath.exp(params.mu)
    if abs(em - 1) < POLE_TOL:
        raise PoleError("the mu-generator is singular at exp(mu) = 1", location=params.mu)
    h_sum = np.zeros((2 ** n, 2 ** n), dtype=complex)
    weighted = np.zeros_like(h_sum)
    for m in range(1, n + 1):
        h = site_operator("H", m, n).data
        h_sum += h
        weighted += params.z[m - 1] * h
    hopping = np.zeros_like(h_sum)
    for m in range(1, n + 1):
        for k in range(1, m):
            hopping += em * site_operator("minus", k, n).data @ site_operator("plus", m, n).data
            hopping += site_operator("plus", k, n).data @ site_operator("minus", m, n).data
    return TensorOperator(n, weighted + params.hbar / (em - 1) * (em * h_sum + hopping))


def det_K_weight(m: int, params: ModelParams, ell: int) -> complex:
    """Closed form of det K_m restricted to the weight-l block"""
    n, z, p, hbar = params.n, params.z, params.p, params.hbar
    if not 0 <= ell <= n:
        raise ValueError(f"ell={ell} out of range for n={n}")
    c1 = comb(n - 1, ell - 1) if ell >= 1 else 0
    c2 = comb(n - 2, ell - 1) if ell >= 1 and n >= 2 else 0
    ratio = 1.0 + 0j
    for j in range(1, n + 1):
        if j == m:
            continue
        d = z[m - 1] - z[j - 1]
        if j < m:
            num, den = d - hbar + p, d + hbar + p
        else:
            num, den = d - hbar, d + hbar
        if abs(den) < POLE_TOL:
            raise PoleError(f"det K_{m} pole at z_{m}-z_{j}", location=d)
        ratio *= num / den
    return cmath.exp(params.mu * c1) * ratio ** c2


def det_K_direct(m: int, params: ModelParams, ell: int) -> complex:
    return complex(np.linalg.det(qkz_K(m, params).block(ell)))


def transfer_trace(u: complex, params: ModelParams) -> TensorOperator:
    """tr_0 R_10(z_1-u)...R_n0(z_n-u) exp(-mu H_0), auxiliary space as factor n+1"""
    n = params.n
    aux = n + 1
    out = identity(n + 1)
    for m in range(1, n + 1):
        x = params.z[m - 1] - u
        if abs(x + params.hbar) < POLE_TOL * max(1.0, abs(params.hbar)):
            raise PoleError(f"transfer trace pole at u = z_{m} + hbar", location=u)
        out = out @ r_operator(m, aux, x, params.hbar, n + 1)
    out = out @ exp_mu_H(aux, -params.mu, n + 1)
    dim = 2 ** n
    # the auxiliary factor is the most significant bit
    blocks = out.data.reshape(2, dim, 2, dim)
    return TensorOperator(n, np.einsum("aiaj->ij", blocks))


@dataclass
class TraceExpansion:
    coefficients: Dict[str, complex]
    leading_residual: float
    first_order_residual: float
    second_order_residual: float
    radius: float


def _laurent_coefficients(params: ModelParams, orders: int, nodes: int, radius: float) -> List[np.ndarray]:
    em = cmath.exp(params.mu)
    angles = 2 * pi * np.arange(nodes) / nodes
    samples = [em * transfer_trace(radius * cmath.exp(1j * a), params).data for a in angles]
    out = []
    for k in range(orders):
        acc = sum(s * (radius * cmath.exp(1j * a)) ** k for s, a in zip(samples, angles))
        out.append(acc / nodes)
    return out


def _fit_diagonal(target: np.ndarray, basis: List[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    design = np.stack([b.ravel() for b in basis], axis=1)
    coeffs, *_ = np.linalg.lstsq(design, target.ravel(), rcond=None)
    return coeffs, (design @ coeffs).reshape(target.shape)


def trace_expansion(params: ModelParams, nodes: int = 64, radius: float = None) -> TraceExpansion:
    """Fit exp(mu) T(u) = c00 + u^-1 (c10 + c11 S) + u^-2 (c20 + c21 S + c22 S^2 + hbar (e^mu - 1) L) + ...

    Residuals are relative to max(|a_k|, |I| (1 + |e^mu|)); a_0 = (1 + e^mu) I vanishes at mu = i pi.
    """
    n = params.n
    if radius is None:
        radius = 10.0 * max(abs(zm) + abs(params.hbar) for zm in params.z)
    a0, a1, a2 = _laurent_coefficients(params, 3, nodes, radius)
    eye = np.eye(2 ** n)
    s = sum(site_operator("H", m, n).data for m in range(1, n + 1))
    l_op = mu_generator_L(params).data
    em = cmath.exp(params.mu)

    c0, fit0 = _fit_diagonal(a0, [eye])
    c1, fit1 = _fit_diagonal(a1, [eye, s])
    target2 = a2 - params.hbar * (em - 1) * l_op
    c2, fit2 = _fit_diagonal(target2, [eye, s, s @ s])

    floor = float(np.linalg.norm(eye)) * (1 + abs(em))

    def rel(res, ref):
        return float(np.linalg.norm(res) / max(np.linalg.norm(ref), floor))

    return TraceExpansion(
        coefficients={
            "c00": complex(c0[0]), "c10": complex(c1[0]), "c11": complex(c1[1]),
            "c20": complex(c2[0]), "c21": complex(c2[1]), "c22": complex(c2[2]),
        },
        leading_residual=rel(a0 - fit0, a0),
        first_order_residual=rel(a1 - fit1, a1),
        second_order_residual=rel(target2 - fit2, a2),
        radius=radius,
    )


def large_u_residual(params: ModelParams, u: complex = 1e8) -> float:
    """|T(u) - (1 + e^-mu) I| against |I| (1 + |e^-mu|)"""
    far = transfer_trace(u, params).data
    em = cmath.exp(-params.mu)
    eye = np.eye(2 ** params.n)
    return float(np.linalg.norm(far - (1 + em) * eye) / (np.linalg.norm(eye) * (1 + abs(em))))


def yang_baxter_residual(x: complex, y: complex, hbar: complex) -> float:
    """R12(x-y) R13(x) R23(y) - R23(y) R13(x) R12(x-y) on V^{⊗3}"""
    r12 = r_operator(1, 2, x - y, hbar, 3)
    r13 = r_operator(1, 3, x, hbar, 3)
    r23 = r_operator(2, 3, y, hbar, 3)
    lhs = r12 @ r13 @ r23
    rhs = r23 @ r13 @ r12
    return relative_norm(lhs - rhs, r12, r13, r23)


def unitarity_residual(x: complex, hbar: complex) -> float:
    prod = r_operator(1, 2, x, hbar, 2) @ r_operator(2, 1, -x, hbar, 2)
    return (prod - identity(2)).frobenius() / 2.0


def zigzag_residual(j: int, m: int, params: ModelParams) -> float:
    """K_j(..z_m+p..) K_m(z) against K_m(..z_j+p..) K_j(z)"""
    lhs = qkz_K(j, params.shifted(m)) @ qkz_K(m, params)
    rhs = qkz_K(m, params.shifted(j)) @ qkz_K(j, params)
    return relative_norm(lhs - rhs, lhs)


def weight_preservation_residual(m: int, params: ModelParams) -> float:
    k = qkz_K(m, params)
    return relative_norm(commutator(k, global_sl2("three", params.n)), k)


def sl2_commutation_residual(m: int, params: ModelParams) -> float:
    """max over a in {+,-,3} of |[K_m, Sigma^a]|, meaningful at mu = 0"""
    k = qkz_K(m, params)
    return max(
        relative_norm(commutator(k, global_sl2(kind, params.n)), k)
        for kind in ("plus", "minus", "three")
    )


def _dK_dmu(m: int, params: ModelParams, step: float) -> np.ndarray:
    plus = qkz_K(m, params.with_mu(params.mu + step)).data
    minus = qkz_K(m, params.with_mu(params.mu - step)).data
    return (plus - minus) / (2 * step)


@dataclass
class CompatResidual:
    m: int
    lk: float
    lk_tilde: float
    richardson: bool


def compat_residual(params: ModelParams, tol: float = 1e-7) -> List[CompatResidual]:
    """Residuals of L(z+p e_m) K_m - p dK_m/dmu - K_m L and of [L, K~_m]"""
    l_op = mu_generator_L(params)
    step = 1e-5 * max(1.0, abs(params.mu))
    out = []
    for m in range(1, params.n + 1):
        k = qkz_K(m, params)
        l_shift = mu_generator_L(params.shifted(m))

        def residual(derivative):
            res = l_shift.data @ k.data - params.p * derivative - k.data @ l_op.data
            return float(np.linalg.norm(res) / (l_shift.frobenius() * k.frobenius()))

        value = residual(_dK_dmu(m, params, step))
        richardson = False
        if value > tol:
            coarse = _dK_dmu(m, params, step)
            fine = _dK_dmu(m, params, step / 2)
            value = residual((4 * fine - coarse) / 3)
            richardson = True

        k_tilde = qkz_K_tilde(m, params)
        out.append(CompatResidual(
            m=m,
            lk=value,
            lk_tilde=relative_norm(commutator(l_op, k_tilde), l_op, k_tilde),
            richardson=richardson,
        ))
    return out
