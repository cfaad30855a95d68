# api/utils/contour_quadrature.py
"""
Pole-separating contours and contour integrals.

A contour is realized as a vertical line in the rotated coordinate
s = (t - center)/scale together with a finite list of residue corrections for
poles that sit on the wrong side of the line. Line integrals use vectorized
adaptive Gauss-Legendre panels (16 points, error against 8 points); tails
that only decay algebraically are mapped onto a finite interval.

The whole contour can be frozen into a single one-dimensional rule
(nodes, weights) so that l-fold integrals are tensor products of it.
"""

import cmath
import logging
from dataclasses import dataclass, field
from math import log, pi
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from api.utils.errors import BranchError, ConvergenceRegimeError, PoleError, QuadratureError
from api.utils.qkz_operators import ModelParams
from api.utils.special import GAMMA_MINUS_HALF, gamma, loggamma

logger = logging.getLogger(__name__)

HIGH_ORDER = 16
LOW_ORDER = 8
MAX_DEPTH = 14
LINE_CLEARANCE = 1e-8
SOFT_CLEARANCE = 0.05
PLACEMENT_RETRIES = 3
ALGEBRAIC_RATE = 0.25
ALGEBRAIC_HEIGHT = 4.0
RESIDUE_NODES = 32

_X_HIGH, _W_HIGH = np.polynomial.legendre.leggauss(HIGH_ORDER)
_X_LOW, _W_LOW = np.polynomial.legendre.leggauss(LOW_ORDER)

Integrand = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Correction:
    """A pole on the wrong side of the line: contributes sign * 2 pi i * Res"""
    pole: complex
    sign: int
    radius: float
    family: str = "left"


@dataclass(frozen=True)
class Contour:
    """Line Re s = x0 with s = (t - center)/scale, plus residue corrections"""
    center: complex
    scale: complex
    x0: float
    up: float
    down: float
    up_algebraic: bool = False
    down_algebraic: bool = False
    corrections: Tuple[Correction, ...] = ()
    tol: float = 1e-10
    rates: Tuple[float, float] = (0.0, 0.0)
    max_depth: int = MAX_DEPTH

    def to_t(self, y):
        """Point on the line at height y"""
        return self.center + self.scale * (self.x0 + 1j * np.asarray(y))

    @property
    def dt_dy(self) -> complex:
        return 1j * self.scale

    def tail_bound(self) -> float:
        """Envelope bound of the discarded exponential tails, relative to unit amplitude"""
        bound = 0.0
        for height, rate, algebraic in ((self.up, self.rates[0], self.up_algebraic),
                                        (self.down, self.rates[1], self.down_algebraic)):
            if not algebraic:
                bound += np.exp(-rate * height) / rate
        return float(bound * abs(self.scale))


@dataclass
class QuadratureResult:
    value: complex
    error: float
    evaluations: int
    panels: List[Tuple[float, float]] = field(default_factory=list)
    tail_bound: float = 0.0

    def __complex__(self):
        return complex(self.value)


# ── contour construction ─────────────────────────────────────────────────────

def _height(rate: float, tol: float) -> Tuple[float, bool]:
    if rate >= ALGEBRAIC_RATE:
        return (log(1.0 / tol) + 10.0) / rate, False
    return ALGEBRAIC_HEIGHT, True


def _decay_rates(mu: complex) -> Tuple[float, float]:
    """(upward, downward) exponential decay rates in s units for phase-weighted integrands"""
    return mu.imag, 2 * pi - mu.imag


def _families(right_origins: Sequence[complex], left_origins: Sequence[complex],
              x0: float, right_depth: int) -> List[Tuple[complex, int, str]]:
    poles = []
    for origin in left_origins:
        k = 0
        while (origin - k).real > x0:
            poles.append((origin - k, +1, "left"))
            k += 1
    for origin in right_origins:
        for k in range(-right_depth, 1):
            if (origin + k).real < x0:
                poles.append((origin + k, -1, "right"))
    return poles


def _nearby(right_origins, left_origins, x0: float, right_depth: int) -> List[complex]:
    """Every family member within reach of the line, for clearances and radii"""
    out = []
    for origin in left_origins:
        out += [origin - k for k in range(0, int(abs(origin.real - x0)) + 3)]
    for origin in right_origins:
        out += [origin + k for k in range(-right_depth - 1, int(abs(origin.real - x0)) + 3)]
    return out


def make_contour(center: complex, scale: complex, right_origins: Sequence[complex],
                 left_origins: Sequence[complex], mu: complex, tol: float = 1e-10,
                 right_depth: int = 0, shift: float = 0.0, max_depth: int = MAX_DEPTH) -> Contour:
    """Line left of every right-family origin, corrected for left poles it leaves behind"""
    right_origins = [complex(s) for s in right_origins]
    left_origins = [complex(s) for s in left_origins]
    x0 = min(s.real for s in right_origins) - 0.25 + shift
    everything = _nearby(right_origins, left_origins, x0, right_depth)
    for attempt in range(PLACEMENT_RETRIES + 1):
        clearance = min(abs(s.real - x0) for s in everything)
        if clearance >= SOFT_CLEARANCE:
            break
        if attempt == PLACEMENT_RETRIES:
            if clearance < LINE_CLEARANCE:
                raise QuadratureError(f"a pole stays within {LINE_CLEARANCE:g} of the line x0={x0}")
            break
        logger.warning(f"pole at distance {clearance:.2e} from the contour line, moving x0")
        x0 -= SOFT_CLEARANCE * (attempt + 1)

    corrections = []
    for pole_s, sign, family in _families(right_origins, left_origins, x0, right_depth):
        others = [abs(pole_s - s) for s in everything if abs(pole_s - s) > 1e-12]
        radius_s = min(min(others, default=1.0) / 3.0, abs(pole_s.real - x0) / 2, 0.125)
        corrections.append(Correction(
            pole=center + scale * pole_s, sign=sign,
            radius=radius_s * abs(scale), family=family,
        ))

    up_rate, down_rate = _decay_rates(complex(mu))
    up, up_alg = _height(up_rate, tol)
    down, down_alg = _height(down_rate, tol)
    contour = Contour(
        center=complex(center), scale=complex(scale), x0=float(x0),
        up=up, down=down, up_algebraic=up_alg, down_algebraic=down_alg,
        corrections=tuple(corrections), tol=tol, rates=(up_rate, down_rate), max_depth=max_depth,
    )
    logger.debug(f"contour x0={x0:.4f} corrections={len(corrections)} heights=({up:.1f}, {down:.1f})")
    return contour


def build_contour(params: ModelParams, tol: float = 1e-10, right_depth: int = 0,
                  shift: float = 0.0, max_depth: int = MAX_DEPTH) -> Contour:
    """Contour separating {z_m + hbar - p k} (left) from {z_m + p k} (right), k >= 0

    right_depth = 1 also keeps z_m - p on the right, which is the contour on
    which integrals of total differences vanish.
    """
    center, p = params.zbar, params.p
    s = [(zm - center) / p for zm in params.z]
    left = [sm + params.hbar / p for sm in s]
    return make_contour(center, p, s, left, params.mu, tol=tol, right_depth=right_depth, shift=shift,
                        max_depth=max_depth)


def barnes_contour(mu: complex, tol: float = 1e-10, shift: float = 0.0, max_depth: int = MAX_DEPTH) -> Contour:
    """Line Re u = -1/4 between the poles of Gamma(k-u) and of Gamma(u-1/2)"""
    return make_contour(0.0, 1.0, [0.0], [0.5], mu, tol=tol, shift=shift, max_depth=max_depth)


def line_contour(center: complex, scale: complex, x0: float, height: float, tol: float = 1e-10) -> Contour:
    """Bare truncated line without corrections, for integrands with known decay"""
    return Contour(center=complex(center), scale=complex(scale), x0=x0, up=height, down=height,
                   tol=tol, rates=(np.inf, np.inf))


# ── adaptive Gauss-Legendre ──────────────────────────────────────────────────

def _panel_rules(a: np.ndarray, b: np.ndarray, xs: np.ndarray, ws: np.ndarray):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[:, None] + half[:, None] * xs[None, :]
    weights = half[:, None] * ws[None, :]
    return nodes, weights


def adaptive_segments(g: Callable[[np.ndarray], np.ndarray], segments: Sequence[Tuple[float, float]],
                      tol: float, atol: float = 0.0, max_depth: int = MAX_DEPTH,
                      initial_width: float = 1.0) -> QuadratureResult:
    """Adaptive 16/8-point Gauss-Legendre of a vectorized real-parameter integrand"""
    active: List[Tuple[float, float, int]] = []
    for a, b in segments:
        count = max(1, int(np.ceil((b - a) / initial_width)))
        edges = np.linspace(a, b, count + 1)
        active += [(edges[i], edges[i + 1], 0) for i in range(count)]

    accepted: List[Tuple[float, float, complex, float]] = []
    evaluations = 0
    while active:
        a = np.array([x[0] for x in active])
        b = np.array([x[1] for x in active])
        n_hi, w_hi = _panel_rules(a, b, _X_HIGH, _W_HIGH)
        n_lo, w_lo = _panel_rules(a, b, _X_LOW, _W_LOW)
        values_hi = np.asarray(g(n_hi), dtype=complex).reshape(n_hi.shape)
        values_lo = np.asarray(g(n_lo), dtype=complex).reshape(n_lo.shape)
        evaluations += values_hi.size + values_lo.size
        if not np.all(np.isfinite(values_hi)):
            bad = int(np.argmax(~np.all(np.isfinite(values_hi), axis=1)))
            raise QuadratureError(f"non-finite integrand on panel [{a[bad]:.6g}, {b[bad]:.6g}]",
                                  worst_panel=(float(a[bad]), float(b[bad])))
        q_hi = np.sum(values_hi * w_hi, axis=1)
        q_lo = np.sum(values_lo * w_lo, axis=1)
        err = np.abs(q_hi - q_lo)

        scale = sum(abs(x[2]) for x in accepted) + float(np.sum(np.abs(q_hi)))
        panels = len(accepted) + len(active)
        threshold = max(tol * scale, atol) / panels

        nxt = []
        failures = []
        for i, (pa, pb, depth) in enumerate(active):
            if err[i] <= threshold:
                accepted.append((pa, pb, q_hi[i], err[i]))
            elif depth >= max_depth:
                failures.append((err[i], pa, pb))
                accepted.append((pa, pb, q_hi[i], err[i]))
            else:
                mid = 0.5 * (pa + pb)
                nxt += [(pa, mid, depth + 1), (mid, pb, depth + 1)]
        if failures:
            worst = max(failures)
            raise QuadratureError(
                f"no convergence after depth {max_depth}: panel [{worst[1]:.6g}, {worst[2]:.6g}] "
                f"error {worst[0]:.3e}",
                worst_panel=(float(worst[1]), float(worst[2])),
            )
        active = nxt

    accepted.sort(key=lambda x: x[0])
    return QuadratureResult(
        value=complex(sum(x[2] for x in accepted)),
        error=float(sum(x[3] for x in accepted)),
        evaluations=evaluations,
        panels=[(x[0], x[1]) for x in accepted],
    )


def _line_pieces(contour: Contour, f: Integrand):
    """Real-parameter integrands and intervals covering the line and its tails"""
    dt = contour.dt_dy

    def body(y):
        return f(contour.to_t(y)) * dt

    pieces = [(body, (-contour.down, contour.up))]
    if contour.up_algebraic:
        height = contour.up

        def upper(v):
            v = np.asarray(v)
            return f(contour.to_t(height / v ** 2)) * dt * 2 * height / v ** 3

        pieces.append((upper, (0.0, 1.0)))
    if contour.down_algebraic:
        height = contour.down

        def lower(v):
            v = np.asarray(v)
            return f(contour.to_t(-height / v ** 2)) * dt * 2 * height / v ** 3

        pieces.append((lower, (0.0, 1.0)))
    return pieces


def _tail_safe(fn):
    def wrapped(v):
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape, dtype=complex)
        live = v > 0
        if np.any(live):
            with np.errstate(over="ignore", invalid="ignore", under="ignore"):
                vals = fn(v[live])
            out[live] = np.where(np.isfinite(vals), vals, 0.0)
        return out
    return wrapped


def integrate_line(f: Integrand, contour: Contour, tol: Optional[float] = None,
                   atol: float = 0.0) -> QuadratureResult:
    tol = contour.tol if tol is None else tol
    total, error, evals = 0j, 0.0, 0
    for idx, (g, interval) in enumerate(_line_pieces(contour, f)):
        if idx > 0:
            g = _tail_safe(g)
        res = adaptive_segments(g, [interval], tol, atol, max_depth=contour.max_depth,
                                 initial_width=1.0 if idx == 0 else 0.25)
        total += res.value
        error += res.error
        evals += res.evaluations
    return QuadratureResult(value=total, error=error, evaluations=evals)


# ── residues ─────────────────────────────────────────────────────────────────

def _circle(pole: complex, radius: float, nodes: int):
    theta = 2 * pi * np.arange(nodes) / nodes
    offsets = radius * np.exp(1j * theta)
    return pole + offsets, offsets


def _laurent(f: Integrand, pole: complex, radius: float, nodes: int) -> Tuple[complex, complex, float]:
    points, offsets = _circle(pole, radius, nodes)
    values = np.asarray(f(points), dtype=complex)
    a_minus1 = complex(np.mean(values * offsets))
    a_minus2 = complex(np.mean(values * offsets ** 2))
    return a_minus1, a_minus2, float(np.max(np.abs(values)))


def residue_numeric(f: Integrand, pole: complex, radius: float, nodes: int = RESIDUE_NODES,
                    rel_tol: float = 1e-12) -> complex:
    """(1/2 pi i) times the circle integral of f around a simple pole, trapezoid rule"""
    res, a2, peak = _laurent(f, pole, radius, nodes)
    res_fine, _, _ = _laurent(f, pole, radius, 2 * nodes)
    scale = max(abs(res_fine), peak * radius, 1e-300)
    if abs(res_fine - res) > 1e-8 * scale:
        logger.warning(f"residue at {pole} changed by {abs(res_fine - res):.2e} under node doubling")
    if abs(a2) > 1e-8 * max(peak * radius ** 2, 1e-300) and abs(a2) > 1e-6 * abs(res_fine) * radius:
        raise PoleError(f"pole at {pole} is not simple (second Laurent coefficient {abs(a2):.3e})",
                        location=pole)
    res_half, _, _ = _laurent(f, pole, radius / 2, 2 * nodes)
    if abs(res_half - res_fine) > 1e-7 * scale:
        raise PoleError(f"residue at {pole} unstable under radius halving", location=pole)
    if abs(res_fine - res) > rel_tol * scale:
        logger.debug(f"residue at {pole}: node doubling difference {abs(res_fine - res):.2e}")
    return res_fine


def integrate_path(f: Integrand, contour: Contour, tol: Optional[float] = None,
                   atol: float = 0.0, weight: Optional[Integrand] = None) -> QuadratureResult:
    """Line integral plus sign * 2 pi i * Res for every correction"""
    g = f if weight is None else (lambda t: weight(t) * f(t))
    line = integrate_line(g, contour, tol=tol, atol=atol)
    total, error = line.value, line.error
    for corr in contour.corrections:
        total += corr.sign * 2j * pi * residue_numeric(g, corr.pole, corr.radius)
    return QuadratureResult(value=total, error=error, evaluations=line.evaluations,
                            tail_bound=contour.tail_bound())


def integrate_polyline(f: Integrand, vertices: Sequence[complex], tol: float = 1e-12) -> QuadratureResult:
    """Integral of f along straight segments joining the vertices"""
    total, error, evals = 0j, 0.0, 0
    for a, b in zip(vertices, vertices[1:]):
        a, b = complex(a), complex(b)
        seg = lambda u, a=a, b=b: f(a + (b - a) * np.asarray(u)) * (b - a)
        res = adaptive_segments(seg, [(0.0, 1.0)], tol, initial_width=0.125)
        total += res.value
        error += res.error
        evals += res.evaluations
    return QuadratureResult(value=total, error=error, evaluations=evals)


# ── one-dimensional rules and iterated integrals ─────────────────────────────

@dataclass
class Rule:
    """Nodes and complex weights with sum w_j f(t_j) ~ integral over the contour"""
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.nodes.size


def _map_piece(contour: Contour, kind: str, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(t, dt/du) on the body or a mapped tail"""
    if kind == "body":
        return contour.to_t(u), np.full(u.shape, contour.dt_dy)
    height = contour.up if kind == "up" else contour.down
    sign = 1.0 if kind == "up" else -1.0
    return contour.to_t(sign * height / u ** 2), contour.dt_dy * 2 * height / u ** 3


def _rule_from_panels(contour: Contour, panels: List[Tuple[str, float, float]]) -> Rule:
    nodes, weights = [], []
    for kind, a, b in panels:
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        u = mid + half * _X_HIGH
        t, jac = _map_piece(contour, kind, u)
        nodes.append(t)
        weights.append(half * _W_HIGH * jac)
    for corr in contour.corrections:
        points, offsets = _circle(corr.pole, corr.radius, RESIDUE_NODES)
        nodes.append(points)
        weights.append(corr.sign * 2j * pi * offsets / RESIDUE_NODES)
    return Rule(nodes=np.concatenate(nodes), weights=np.concatenate(weights))


def learn_panels(guide: Integrand, contour: Contour, tol: Optional[float] = None) -> List[Tuple[str, float, float]]:
    """Adaptive partition of the line pieces driven by a one-variable guide integrand"""
    tol = contour.tol if tol is None else tol
    kinds = ["body"]
    if contour.up_algebraic:
        kinds.append("up")
    if contour.down_algebraic:
        kinds.append("down")
    out = []
    for kind, (g, interval) in zip(kinds, _line_pieces(contour, guide)):
        if kind != "body":
            g = _tail_safe(g)
        res = adaptive_segments(g, [interval], tol, max_depth=contour.max_depth,
                                 initial_width=1.0 if kind == "body" else 0.25)
        out += [(kind, a, b) for a, b in res.panels]
    return out


def rule(contour: Contour, guide: Integrand, weight: Optional[Integrand] = None,
         tol: Optional[float] = None) -> Tuple[Rule, List[Tuple[str, float, float]]]:
    """Freeze the contour into one rule; weight (e.g. the phase function) is absorbed"""
    panels = learn_panels(guide if weight is None else (lambda t: weight(t) * guide(t)), contour, tol)
    base = _rule_from_panels(contour, panels)
    return _absorb(base, weight), panels


def _absorb(base: Rule, weight: Optional[Integrand]) -> Rule:
    if weight is None:
        return base
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        w = np.asarray(weight(base.nodes), dtype=complex)
    w = np.where(np.isfinite(w), w, 0.0)
    return Rule(nodes=base.nodes, weights=base.weights * w)


def tensor_sum(f: Callable[[List[np.ndarray]], np.ndarray], rule_1d: Rule, ell: int,
               chunk: int = 1 << 21) -> complex:
    """sum over the l-fold tensor product of a one-dimensional rule"""
    if ell == 0:
        return complex(f([]))
    size = len(rule_1d)
    per_row = size ** (ell - 1)
    rows = max(1, chunk // max(per_row, 1))
    total = 0j
    for start in range(0, size, rows):
        stop = min(size, start + rows)
        grids = [rule_1d.nodes[start:stop].reshape((-1,) + (1,) * (ell - 1))]
        wprod = rule_1d.weights[start:stop].reshape((-1,) + (1,) * (ell - 1))
        for axis in range(1, ell):
            shape = [1] * ell
            shape[axis] = size
            grids.append(rule_1d.nodes.reshape(shape))
            wprod = wprod * rule_1d.weights.reshape(shape)
        with np.errstate(over="ignore", invalid="ignore"):
            values = np.asarray(f(grids), dtype=complex)
            terms = np.where(wprod == 0, 0.0, values * wprod)
        total += complex(np.sum(terms))
    return total


def integrate_iterated(f: Callable[[List[np.ndarray]], np.ndarray], contour: Contour, ell: int,
                       weight: Optional[Integrand] = None, guide: Optional[Integrand] = None,
                       refine: bool = False, tol: Optional[float] = None) -> QuadratureResult:
    """l-fold integral over the contour, corrections applied in every variable

    The tensor product of the line-plus-circles rule contains every
    line/residue and residue/residue combination.
    """
    if ell == 0:
        return QuadratureResult(value=complex(f([])), error=0.0, evaluations=1)
    if guide is None:
        anchors = [contour.to_t(0.37 * (a + 1)) for a in range(ell - 1)]
        guide = lambda t: f([t] + [np.full(np.shape(t), x) for x in anchors])
    try:
        rule_1d, panels = rule(contour, guide, weight=weight, tol=tol)
    except QuadratureError as exc:
        raise QuadratureError(str(exc), worst_panel=exc.worst_panel, variable=1) from exc
    value = tensor_sum(f, rule_1d, ell)
    error = 0.0
    evaluations = len(rule_1d) ** ell
    if refine:
        finer = _absorb(_rule_from_panels(contour, [
            (kind, a + h * (b - a) / 2, a + (h + 1) * (b - a) / 2)
            for kind, a, b in panels for h in (0, 1)
        ]), weight)
        fine_value = tensor_sum(f, finer, ell)
        error = abs(fine_value - value)
        value = fine_value
        evaluations += len(finer) ** ell
    return QuadratureResult(value=value, error=error, evaluations=evaluations)


# ── Barnes integral ──────────────────────────────────────────────────────────

def barnes_integrand(k: int, mu: complex) -> Integrand:
    """e^{u(mu - pi i)} Gamma(u - 1/2) Gamma(k - u)"""
    def f(u):
        u = np.asarray(u, dtype=complex)
        return np.exp(u * (mu - 1j * pi) + loggamma(u - 0.5) + loggamma(k - u))
    return f


def branch_power(w: complex, exponent: complex) -> complex:
    """w**exponent with 0 <= arg w < 2 pi"""
    if w == 0:
        raise BranchError("zero base has no argument")
    arg = cmath.phase(w) % (2 * pi)
    if not 0 <= arg < 2 * pi:
        raise BranchError(f"argument {arg} outside [0, 2 pi)")
    return cmath.exp(exponent * (log(abs(w)) + 1j * arg))


def barnes_reference(k: int, mu: complex) -> complex:
    """2 pi Gamma(k - 1/2) e^{k mu} (e^mu - 1)^{1/2 - k}"""
    em1 = cmath.exp(mu) - 1
    if abs(em1) < 1e-14:
        raise BranchError("e^mu = 1 leaves the branch of (e^mu - 1) undefined")
    g = GAMMA_MINUS_HALF if k == 0 else complex(gamma(k - 0.5))
    return 2 * pi * g * cmath.exp(k * mu) * branch_power(em1, 0.5 - k)


def barnes_integral(k: int, mu: complex, tol: float = 1e-12, shift: float = 0.0,
                    max_depth: int = MAX_DEPTH) -> QuadratureResult:
    mu = complex(mu)
    if not 0 < mu.imag < 2 * pi:
        raise ConvergenceRegimeError(f"the Barnes integral converges for 0 < Im mu < 2 pi, got {mu.imag}")
    contour = barnes_contour(mu, tol=tol, shift=shift, max_depth=max_depth)
    return integrate_path(barnes_integrand(k, mu), contour, tol=tol)


def barnes_ode_residual(k: int, mu: complex, step: float = 1e-5) -> float:
    """|2(e^mu - 1) f' - (e^mu - 2k) f| / |f| for the closed form, central difference"""
    f = barnes_reference(k, mu)
    deriv = (barnes_reference(k, mu + step) - barnes_reference(k, mu - step)) / (2 * step)
    em = cmath.exp(mu)
    return abs(2 * (em - 1) * deriv - (em - 2 * k) * f) / abs(f)


def barnes_pole_asymptotics(k: int, mu: complex) -> complex:
    """Contribution of the pole u = 1/2, dominant as Re mu grows"""
    g = GAMMA_MINUS_HALF if k == 0 else complex(gamma(k - 0.5))
    return 2 * pi * g * cmath.exp(mu / 2)
