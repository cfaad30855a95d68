"""
Verification Orchestrator for the qKZ level-zero lab

Plans the checks of the selected suites, runs them on a work queue and
composes the VerificationReport. Random draws happen while planning, so a run
is deterministic given its seed no matter how many workers execute it.
"""

import logging
import time
import traceback
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import comb, pi
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from sqlalchemy.orm import Session

from api.schemas.verification import CheckRecord, ReportSummary, RunConfig, VerificationReport
from api.utils import contour_quadrature as cq
from api.utils import grassmann
from api.utils import hyper_map as hm
from api.utils import qkz_operators as qo
from api.utils import tensor_space as ts
from api.utils import weight_functions as wf
from api.utils.report import to_jsonable
from db.models import VerificationRun

logger = logging.getLogger(__name__)


class RunState(Enum):
    PLANNING = "planning"
    EXECUTING = "executing"
    COMPOSING = "composing"
    COMPLETED = "completed"
    ERROR = "error"


class SuiteName(str, Enum):
    BARNES = "barnes"
    DETM = "detm"
    IDENTITIES = "identities"
    SPECTRUM = "spectrum"
    DET_INTEGRAL = "det-integral"
    SHIFT = "shift"
    MU_ODE = "mu-ode"
    VANISHING = "vanishing"
    KERNEL = "kernel"
    GRASSMANN = "grassmann"


SUITE_DESCRIPTIONS = {
    SuiteName.BARNES: "Barnes integral against its closed form, its mu-ODE and contour independence",
    SuiteName.DETM: "Exact determinant of the polynomial coefficient matrix against prod (x_i + y_j)",
    SuiteName.IDENTITIES: "Randomized function and operator identities: Yang-Baxter, D1 identities, Theta/Xi, compatibilities",
    SuiteName.SPECTRUM: "Spectrum and kernel of A_0 on every weight block",
    SuiteName.DET_INTEGRAL: "Determinant of the hypergeometric matrix against the closed form",
    SuiteName.SHIFT: "Psi_W solves the qKZ shift equations, singular-valued at mu = 0",
    SuiteName.MU_ODE: "Psi_W solves p dPsi/dmu = L Psi",
    SuiteName.VANISHING: "Integrals of total differences vanish; exponential subspace at mu = 0",
    SuiteName.KERNEL: "Rank, kernel and image of the hypergeometric map at mu = 0",
    SuiteName.GRASSMANN: "Exact Grassmann dimensions, sl2 triple, Jordan-Wigner and U_q limits",
}

TOLERANCES = {
    "barnes": 1e-8,
    "barnes-ode": 1e-7,
    "barnes-asymptotics": 1e-6,
    "algebraic": 1e-10,
    "finite-difference": 1e-7,
    "spectrum": 1e-12,
    "det-integral-1": 1e-6,
    "det-integral-2": 1e-4,
    "shift": 1e-6,
    "shift-mu-zero": 1e-5,
    "mu-ode": 1e-5,
    "total-difference": 1e-6,
    "exponential-vanishing": 1e-5,
    "mu-zero-continuity": 5e-2,
    "angle": 1e-3,
    "subspace-limit": 1e-2,
}

DEFAULT_CASES = {
    SuiteName.DET_INTEGRAL: [(2, 1), (3, 1), (4, 1), (4, 2)],
    SuiteName.SHIFT: [(2, 1), (3, 1), (4, 2)],
    SuiteName.MU_ODE: [(1, 1), (2, 1), (3, 1)],
    SuiteName.VANISHING: [(2, 1), (4, 2)],
    SuiteName.KERNEL: [(2, 1), (3, 1), (4, 1), (4, 2)],
}


@dataclass
class CheckOutcome:
    residual: Optional[float] = None
    computed: Dict[str, Any] = field(default_factory=dict)
    reference: Dict[str, Any] = field(default_factory=dict)
    passed: Optional[bool] = None


@dataclass
class CheckJob:
    check_id: str
    anchor: str
    suite: SuiteName
    inputs: Dict[str, Any]
    run: Callable[[], CheckOutcome]
    tolerance: Optional[float] = None


def call_check_safe(job: CheckJob) -> CheckRecord:
    """Run one check; failures become failed records, never exceptions"""
    start_time = time.time()
    try:
        outcome = job.run()
        passed = outcome.passed
        if passed is None:
            passed = outcome.residual is not None and job.tolerance is not None \
                and bool(outcome.residual <= job.tolerance)
        return CheckRecord(
            check_id=job.check_id,
            anchor=job.anchor,
            suite=job.suite.value,
            inputs=to_jsonable(job.inputs),
            computed=to_jsonable(outcome.computed),
            reference=to_jsonable(outcome.reference),
            residual=None if outcome.residual is None else float(outcome.residual),
            tolerance=job.tolerance,
            passed=passed,
            elapsed=time.time() - start_time,
        )
    except Exception as e:
        error_msg = f"{type(e).__name__}: {str(e)}"
        logger.error(f"Check {job.check_id} failed: {error_msg}")
        logger.debug(f"Traceback: {traceback.format_exc()}")
        return CheckRecord(
            check_id=job.check_id,
            anchor=job.anchor,
            suite=job.suite.value,
            inputs=to_jsonable(job.inputs),
            tolerance=job.tolerance,
            passed=False,
            error=error_msg,
            elapsed=time.time() - start_time,
        )


def _rel(value: complex, reference: complex) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


def _mu_label(mu: complex) -> str:
    return f"{mu.real:g}{mu.imag:+g}i"


class SuitePlanner:
    """Builds the check jobs of every suite from one RunConfig"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.tol = config.quadrature.tol
        self.max_depth = config.quadrature.max_depth
        self.rank_cut = config.rank_threshold
        self.mu_explicit = "mu" in config.model_fields_set

    def rng(self, suite: SuiteName) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, list(SuiteName).index(suite)])

    def cases(self, suite: SuiteName, valid: Callable[[int, int], bool]) -> List[tuple]:
        cfg = self.config
        if cfg.n_values is None and cfg.ell_values is None:
            return DEFAULT_CASES[suite]
        n_values = cfg.n_values or sorted({n for n, _ in DEFAULT_CASES[suite]})
        out = []
        for n in n_values:
            for ell in cfg.ell_values or range(0, n + 1):
                if 0 <= ell <= n and valid(n, ell):
                    out.append((n, ell))
        return out

    def z_for(self, n: int, rng: np.random.Generator) -> tuple:
        cfg = self.config
        if cfg.z.explicit is not None and len(cfg.z.explicit) == n:
            return tuple(v.to_complex() for v in cfg.z.explicit)
        return qo.random_generic_z(n, rng, spread=cfg.z.spread, hbar=cfg.hbar)

    def params(self, n: int, ell: int, mu: complex, rng: np.random.Generator) -> qo.ModelParams:
        return qo.ModelParams(n=n, ell=ell, hbar=self.config.hbar, mu=mu, z=self.z_for(n, rng))

    def plan(self, suite: SuiteName) -> List[CheckJob]:
        builder = getattr(self, "_" + suite.value.replace("-", "_"))
        return builder(self.rng(suite))

    # ── barnes ──────────────────────────────────────────────────────────────

    def _barnes(self, rng) -> List[CheckJob]:
        mus = [self.config.mu_value()] if self.mu_explicit else [0.5j * pi, 1j * pi, 1 + 1j * pi]
        jobs = []
        for mu in mus:
            for k in range(5):
                def run(k=k, mu=mu):
                    quad = cq.barnes_integral(k, mu, tol=min(self.tol, 1e-12), max_depth=self.max_depth)
                    ref = cq.barnes_reference(k, mu)
                    return CheckOutcome(residual=_rel(quad.value, ref),
                                        computed={"value": quad.value, "error": quad.error},
                                        reference={"value": ref})
                jobs.append(CheckJob(f"barnes/k={k}/mu={_mu_label(mu)}", "barnes-closed-form", SuiteName.BARNES,
                                     {"k": k, "mu": mu}, run, TOLERANCES["barnes"]))
        for k in range(5):
            def ode(k=k):
                return CheckOutcome(residual=cq.barnes_ode_residual(k, 1j * pi))
            jobs.append(CheckJob(f"barnes-ode/k={k}", "barnes-mu-ode", SuiteName.BARNES,
                                 {"k": k, "mu": 1j * pi}, ode, TOLERANCES["barnes-ode"]))

            def shifted(k=k):
                base = cq.barnes_integral(k, 1j * pi, tol=1e-12, max_depth=self.max_depth).value
                moved = cq.barnes_integral(k, 1j * pi, tol=1e-12, shift=-0.5, max_depth=self.max_depth).value
                return CheckOutcome(residual=_rel(moved, base), computed={"shifted": moved},
                                    reference={"value": base})
            jobs.append(CheckJob(f"barnes-contour/k={k}", "contour-independence", SuiteName.BARNES,
                                 {"k": k, "shift": -0.5}, shifted, TOLERANCES["barnes"]))

            def asymptotics(k=k, mu=20 + 1j * pi):
                approx = cq.barnes_pole_asymptotics(k, mu)
                ref = cq.barnes_reference(k, mu)
                return CheckOutcome(residual=_rel(approx, ref), computed={"value": approx},
                                    reference={"value": ref})
            jobs.append(CheckJob(f"barnes-asymptotics/k={k}", "barnes-pole-asymptotics", SuiteName.BARNES,
                                 {"k": k, "mu": 20 + 1j * pi}, asymptotics, TOLERANCES["barnes-asymptotics"]))
        return jobs

    # ── detm ────────────────────────────────────────────────────────────────

    def _detm(self, rng) -> List[CheckJob]:
        n_values = [n for n in (self.config.n_values or range(1, 7)) if n >= 1]
        jobs = []
        for n in n_values:
            for sample in range(5):
                x = [Fraction(int(rng.integers(-50, 51)), int(rng.integers(1, 20))) for _ in range(n)]
                y = [Fraction(int(rng.integers(-50, 51)), int(rng.integers(1, 20))) for _ in range(n)]

                def run(x=x, y=y):
                    det = grassmann.exact_det(wf.detm_matrix(x, y))
                    product = wf.detm_product(x, y)
                    diff = det - product
                    return CheckOutcome(residual=float(abs(diff)), computed={"det": det},
                                        reference={"product": product}, passed=diff == 0)
                jobs.append(CheckJob(f"detm/n={n}/sample={sample}", "detm-product", SuiteName.DETM,
                                     {"x": x, "y": y}, run, 0.0))
        return jobs

    # ── randomized identities ───────────────────────────────────────────────

    def _sampled(self, check_id: str, anchor: str, tolerance: float, draw: Callable, evaluate: Callable,
                 inputs: Dict[str, Any]) -> CheckJob:
        """One record for the worst residual over config.samples seeded draws"""
        draws = [draw() for _ in range(self.config.samples)]

        def run():
            residuals = [float(evaluate(d)) for d in draws]
            worst = int(np.argmax(residuals))
            return CheckOutcome(residual=residuals[worst],
                                computed={"worst_sample": worst, "median": float(np.median(residuals))})
        return CheckJob(check_id, anchor, SuiteName.IDENTITIES, dict(inputs, samples=len(draws)), run, tolerance)

    def _identities(self, rng) -> List[CheckJob]:
        hbar, mu = self.config.hbar, self.config.mu_value()
        alg, fd = TOLERANCES["algebraic"], TOLERANCES["finite-difference"]

        def cplx():
            return complex(rng.normal(), rng.normal())

        jobs = [
            self._sampled("yang-baxter", "yang-baxter", alg, lambda: (cplx(), cplx()),
                          lambda d: qo.yang_baxter_residual(d[0], d[1], hbar), {"hbar": hbar}),
            self._sampled("r-unitarity", "r-unitarity", alg, cplx,
                          lambda x: qo.unitarity_residual(x, hbar), {"hbar": hbar}),
        ]

        for kind, anchor in (("lemmaD1_first", "d1-lower-sum"), ("lemmaD1_second", "d1-upper-sum")):
            for n, size in ((3, 0), (3, 1), (4, 1), (4, 2)):
                params = self.params(n, size + 1, mu, rng)

                def draw(params=params, n=n, size=size):
                    N = tuple(sorted(int(v) + 1 for v in rng.choice(n, size, replace=False)))
                    options = wf.lemma_index_data(N, n)
                    b, m = options[int(rng.integers(len(options)))]
                    return N, b, m, wf.random_points(size + 1, params, rng)

                def evaluate(d, params=params, kind=kind):
                    N, b, m, t = d
                    res = wf.identity_residuals(kind, t, params, N=N, b=b, m=m)
                    return abs(res) / wf.identity_scale(kind, t, params, N=N, b=b, m=m)

                jobs.append(self._sampled(f"{anchor}/n={n}/|N|={size}", anchor, alg, draw, evaluate,
                                          {"n": n, "z": params.z, "mu": mu}))

        for kind, ell, anchor in (("xp1", 1, "theta-xi-one"), ("xp2", 2, "theta-xi-two"),
                                  ("xp2_split", 2, "theta-xi-split")):
            for n in (2, 3, 4):
                params = self.params(n, ell, mu, rng)

                def evaluate(t, params=params, kind=kind):
                    return abs(wf.identity_residuals(kind, t, params)) / wf.identity_scale(kind, t, params)

                jobs.append(self._sampled(f"{anchor}/n={n}", anchor, alg,
                                          lambda params=params, ell=ell: wf.random_points(ell, params, rng),
                                          evaluate, {"n": n, "z": params.z, "mu": mu}))

        for n, ell in ((2, 1), (3, 1), (3, 2), (4, 2)):
            params = self.params(n, ell, mu, rng)

            def draw(params=params, n=n, ell=ell):
                M = tuple(sorted(int(v) + 1 for v in rng.choice(n, ell, replace=False)))
                return M, wf.random_points(ell, params, rng)

            def evaluate(d, params=params):
                M, t = d
                return abs(wf.identity_residuals("rM", t, params, M=M)) / wf.identity_scale("rM", t, params, M=M)

            jobs.append(self._sampled(f"r-m-total-difference/n={n}/l={ell}", "r-m-total-difference", alg,
                                      draw, evaluate, {"n": n, "ell": ell, "z": params.z, "mu": mu}))

        for n in (2, 3):
            z_draw = lambda n=n: self.params(n, 0, mu, rng)
            jobs.append(self._sampled(
                f"zigzag-compatibility/n={n}", "zigzag-compatibility", alg, z_draw,
                lambda p: max(qo.zigzag_residual(j, m, p) for j in range(1, p.n + 1)
                              for m in range(1, p.n + 1) if j != m),
                {"n": n, "mu": mu}))
            jobs.append(self._sampled(
                f"mu-compatibility/n={n}", "mu-compatibility", fd, z_draw,
                lambda p: max(r.lk for r in qo.compat_residual(p)), {"n": n, "mu": mu}))
            jobs.append(self._sampled(
                f"mu-transport-compatibility/n={n}", "mu-transport-compatibility", alg, z_draw,
                lambda p: max(r.lk_tilde for r in qo.compat_residual(p)), {"n": n, "mu": mu}))
            zero = lambda n=n: self.params(n, 0, 0.0, rng)
            jobs.append(self._sampled(
                f"sl2-invariance-mu-zero/n={n}", "sl2-invariance-mu-zero", alg, zero,
                lambda p: max(qo.sl2_commutation_residual(m, p) for m in range(1, p.n + 1)), {"n": n}))
            jobs.append(self._sampled(
                f"weight-preservation/n={n}", "weight-preservation", alg, z_draw,
                lambda p: max(qo.weight_preservation_residual(m, p) for m in range(1, p.n + 1)),
                {"n": n, "mu": mu}))

        params = self.params(2, 1, mu, rng)

        def phase_eval(t, params=params):
            f = lambda s: wf.eval_w((1,), [s[0]], params)
            res = wf.identity_residuals("phase_shift", [t], params, f=f)
            scale = max(abs(wf.eval_phase(t, params) * f([t])),
                        abs(wf.eval_phase(t + params.p, params) * f([t + params.p])), 1e-300)
            return abs(res) / scale

        jobs.append(self._sampled("phase-shift/n=2", "phase-shift", alg,
                                  lambda: wf.random_points(1, params, rng)[0], phase_eval,
                                  {"n": 2, "z": params.z, "mu": mu}))

        def contour_shift(p):
            kernel = lambda t: wf.u_factor(1, t, p) * wf.h_factor(p.n, t, p)
            weight = lambda t: np.exp(wf.log_phase(t, p))
            line = cq.build_contour(p, tol=self.tol, max_depth=self.max_depth)
            shifted = cq.build_contour(p, tol=self.tol, shift=-0.5, max_depth=self.max_depth)
            base = cq.integrate_path(kernel, line, weight=weight).value
            moved = cq.integrate_path(kernel, shifted, weight=weight).value
            return _rel(moved, base)

        jobs.append(self._sampled("contour-independence/n=2", "contour-independence", fd,
                                  lambda: self.params(2, 1, mu, rng), contour_shift, {"n": 2, "mu": mu}))

        for n in (2, 3):
            params = self.params(n, 0, mu, rng)

            def trace(params=params):
                fit = qo.trace_expansion(params)
                u, v = 0.7 + 0.3j, -1.1 + 0.5j
                tu, tv = qo.transfer_trace(u, params), qo.transfer_trace(v, params)
                commuting = ts.relative_norm(ts.commutator(tu, tv), tu, tv)
                limit = qo.large_u_residual(params)
                residual = max(fit.leading_residual, fit.first_order_residual,
                               fit.second_order_residual, commuting)
                return CheckOutcome(residual=residual,
                                    computed={"coefficients": fit.coefficients, "commutator": commuting,
                                              "large_u": limit},
                                    passed=residual <= 1e-8 and limit <= 1e-6)
            jobs.append(CheckJob(f"transfer-trace/n={n}", "transfer-trace-expansion", SuiteName.IDENTITIES,
                                 {"n": n, "z": params.z, "mu": mu}, trace, 1e-8))
        return jobs

    # ── spectrum ────────────────────────────────────────────────────────────

    def _spectrum(self, rng) -> List[CheckJob]:
        jobs = []
        for n in self.config.n_values or range(1, 6):
            for ell in self.config.ell_values or range(0, n + 1):
                if not 0 <= ell <= n:
                    continue

                def run(n=n, ell=ell):
                    numeric = ts.a0_spectrum(n, ell)
                    closed = np.sort(np.concatenate(
                        [np.full(mult, value) for value, mult in ts.a0_closed_form(n, ell)]))
                    kernel_dim = ts.a0_kernel(n, ell).shape[1]
                    expected = ts.singular_dimension(n, ell)
                    residual = float(np.max(np.abs(numeric - closed))) if numeric.size == closed.size else float("inf")
                    return CheckOutcome(
                        residual=residual,
                        computed={"eigenvalues": numeric, "kernel_dim": kernel_dim},
                        reference={"eigenvalues": closed, "kernel_dim": expected},
                        passed=residual <= TOLERANCES["spectrum"] and kernel_dim == expected,
                    )
                jobs.append(CheckJob(f"a0-spectrum/n={n}/l={ell}", "a0-spectrum", SuiteName.SPECTRUM,
                                     {"n": n, "ell": ell}, run, TOLERANCES["spectrum"]))
        return jobs

    # ── hypergeometric suites ───────────────────────────────────────────────

    def _det_integral(self, rng) -> List[CheckJob]:
        mu = self.config.mu_value()
        jobs = []
        for n, ell in self.cases(SuiteName.DET_INTEGRAL, lambda n, ell: ell >= 1):
            tol = TOLERANCES["det-integral-1" if ell == 1 else "det-integral-2"]
            for index in range(self.config.z_sets):
                params = self.params(n, ell, mu, rng)

                def run(params=params):
                    matrix = hm.hyper_matrix(params, tol=self.tol, workers=1, max_depth=self.max_depth)
                    det, ref = matrix.det(), hm.det_closed_form(params)
                    return CheckOutcome(residual=_rel(det, ref),
                                        computed={"det": det, "max_entry_error": float(matrix.errors.max())},
                                        reference={"det": ref})
                jobs.append(CheckJob(f"det-integral/n={n}/l={ell}/z={index}", "hyper-determinant",
                                     SuiteName.DET_INTEGRAL, {"n": n, "ell": ell, "z": params.z, "mu": mu},
                                     run, tol))
                if index == 0:
                    def oracle(params=params):
                        M = N = ts.subsets(params.n, params.ell)[0]
                        entry = hm.hyper_integral(M, N, params, tol=self.tol, max_depth=self.max_depth)[0]
                        path = hm.asym_path_entry(M, N, params, tol=self.config.quadrature.iterated_tol,
                                                  max_depth=self.max_depth)
                        return CheckOutcome(residual=_rel(path.value, entry),
                                            computed={"iterated": path.value}, reference={"separable": entry})
                    jobs.append(CheckJob(f"hyper-entry-oracle/n={n}/l={ell}", "hyper-entry-iterated",
                                         SuiteName.DET_INTEGRAL, {"n": n, "ell": ell, "z": params.z, "mu": mu},
                                         oracle, tol))

                    def ratio(params=params):
                        worst, values = 0.0, {}
                        for m in range(1, params.n + 1):
                            closed, direct = hm.det_shift_ratio(params, m)
                            worst = max(worst, _rel(closed, direct))
                            values[f"m={m}"] = closed
                        return CheckOutcome(residual=worst, computed=values)
                    jobs.append(CheckJob(f"det-closed-form-shift/n={n}/l={ell}", "hyper-determinant-shift",
                                         SuiteName.DET_INTEGRAL, {"n": n, "ell": ell, "z": params.z, "mu": mu},
                                         ratio, TOLERANCES["algebraic"]))
        return jobs

    def _random_W(self, params: qo.ModelParams, rng) -> wf.PeriodicFnCoeffs:
        size = comb(params.n, params.ell)
        return wf.PeriodicFnCoeffs(params.n, params.ell, rng.normal(size=size) + 1j * rng.normal(size=size))

    def _shift(self, rng) -> List[CheckJob]:
        jobs = []
        for n, ell in self.cases(SuiteName.SHIFT, lambda n, ell: ell >= 1 and 2 * ell <= n):
            at_zero = (n, ell) == (4, 2) and not self.mu_explicit
            mu = 0.0 if at_zero else (self.config.mu_value() if self.mu_explicit else 0.5j * pi)
            params = self.params(n, ell, mu, rng)
            coeffs = self._random_W(params, rng)

            def run(params=params, coeffs=coeffs):
                residuals = {f"m={m}": hm.qkz_shift_residual(coeffs, params, m, tol=self.tol,
                                                             max_depth=self.max_depth)
                             for m in range(1, params.n + 1)}
                return CheckOutcome(residual=max(residuals.values()), computed=residuals)
            tol = TOLERANCES["shift-mu-zero" if abs(mu) == 0 else "shift"]
            jobs.append(CheckJob(f"qkz-shift/n={n}/l={ell}/mu={_mu_label(mu)}", "qkz-solution", SuiteName.SHIFT,
                                 {"n": n, "ell": ell, "z": params.z, "mu": mu, "W": coeffs.coeffs}, run, tol))
            if abs(mu) == 0:
                def singular(params=params, coeffs=coeffs):
                    return CheckOutcome(residual=hm.singular_residual(
                        hm.psi_of_W(coeffs, params, tol=self.tol, max_depth=self.max_depth)))
                jobs.append(CheckJob(f"singular-values/n={n}/l={ell}", "qkz-solution-singular", SuiteName.SHIFT,
                                     {"n": n, "ell": ell, "z": params.z, "W": coeffs.coeffs}, singular,
                                     TOLERANCES["shift-mu-zero"]))
        return jobs

    def _mu_ode(self, rng) -> List[CheckJob]:
        mu = self.config.mu_value()
        jobs = []
        for n, ell in self.cases(SuiteName.MU_ODE, lambda n, ell: True):
            params = self.params(n, ell, mu, rng)
            coeffs = self._random_W(params, rng)

            def run(params=params, coeffs=coeffs):
                residual = hm.mu_ode_residual(coeffs, params, tol=self.tol, max_depth=self.max_depth)
                return CheckOutcome(residual=residual)
            jobs.append(CheckJob(f"mu-ode/n={n}/l={ell}", "mu-equation", SuiteName.MU_ODE,
                                 {"n": n, "ell": ell, "z": params.z, "mu": mu, "W": coeffs.coeffs},
                                 run, TOLERANCES["mu-ode"]))
        return jobs

    def _total_difference_jobs(self, n: int, ell: int, mu: complex, rng) -> List[CheckJob]:
        params = self.params(n, ell, mu, rng)
        coeffs = self._random_W(params, rng)
        rows = ts.subsets(n, ell)
        picks = sorted({0, int(rng.integers(len(rows)))})
        jobs = []
        for family in ("w", "g", "r_M"):
            for i in picks:
                M = rows[i]

                def run(M=M, family=family, params=params, coeffs=coeffs):
                    rep = hm.total_difference_residual(M, coeffs, params, family=family,
                                                       tol=self.config.quadrature.iterated_tol,
                                                       max_depth=self.max_depth)
                    return CheckOutcome(residual=rep.residual, computed={"value": rep.value, "scale": rep.scale})
                anchor = "r-m-integral-vanishing" if family == "r_M" else "total-difference-vanishing"
                jobs.append(CheckJob(f"total-difference/{family}/n={n}/l={ell}/mu={_mu_label(mu)}/M={M}", anchor,
                                     SuiteName.VANISHING, {"n": n, "ell": ell, "M": M, "z": params.z,
                                                           "mu": mu, "W": coeffs.coeffs},
                                     run, TOLERANCES["total-difference"]))
        return jobs

    def _vanishing(self, rng) -> List[CheckJob]:
        mu = complex(self.config.mu_value())
        jobs = []
        for n, ell in self.cases(SuiteName.VANISHING, lambda n, ell: ell >= 1):
            jobs += self._total_difference_jobs(n, ell, mu, rng)
            # mu = 0 converges only for 2l <= n
            if mu != 0 and 2 * ell <= n:
                jobs += self._total_difference_jobs(n, ell, 0j, rng)

        if self.config.n_values is None:
            exp_params = self.params(3, 2, 0.0, rng)
            exp_rng_seed = int(rng.integers(2 ** 31))

            def exponential(params=exp_params):
                rep = hm.exponential_vanishing_report(params, rng=np.random.default_rng(exp_rng_seed),
                                                      tol=self.tol, max_depth=self.max_depth)
                return CheckOutcome(residual=rep.regularized,
                                    computed={"dimension": rep.dimension, "fit_residual": rep.fit_residual,
                                              "direct": rep.direct, "direct_error": rep.direct_error},
                                    passed=rep.regularized <= TOLERANCES["exponential-vanishing"]
                                    and rep.fit_residual <= 1e-8)
            jobs.append(CheckJob("exponential-vanishing/n=3/l=2", "exponential-subspace-vanishing",
                                 SuiteName.VANISHING, {"n": 3, "ell": 2, "z": exp_params.z,
                                                       "eps": hm.REGULARIZATION_EPS},
                                 exponential, TOLERANCES["exponential-vanishing"]))

            cont_params = self.params(4, 1, 0.0, rng)

            def continuity(params=cont_params):
                reg = hm.regularized_matrix(params, tol=self.tol, max_depth=self.max_depth)
                direct = hm.hyper_matrix(params, tol=self.tol, max_depth=self.max_depth).entries
                residual = float(np.linalg.norm(reg.extrapolated - direct) / np.linalg.norm(direct))
                return CheckOutcome(residual=residual, computed={"cauchy": reg.cauchy})
            jobs.append(CheckJob("mu-zero-continuity/n=4/l=1", "mu-zero-continuity", SuiteName.VANISHING,
                                 {"n": 4, "ell": 1, "z": cont_params.z, "eps": hm.REGULARIZATION_EPS},
                                 continuity, TOLERANCES["mu-zero-continuity"]))
        return jobs

    def _kernel(self, rng) -> List[CheckJob]:
        jobs = []
        for n, ell in self.cases(SuiteName.KERNEL, lambda n, ell: ell >= 1 and 2 * ell <= n):
            params = self.params(n, ell, 0.0, rng)

            def run(params=params):
                rep = hm.kernel_report(params, tol=self.tol, rank_cut=self.rank_cut, max_depth=self.max_depth)
                angle = max(rep.kernel_angle, rep.image_angle)
                return CheckOutcome(
                    residual=angle,
                    computed={"rank": rep.rank, "gap": rep.gap, "kernel_angle": rep.kernel_angle,
                              "image_angle": rep.image_angle, "singular_values": rep.singular_values,
                              "inclusion": rep.inclusion_residual},
                    reference={"rank": rep.expected_rank, "x_image_dim": rep.x_image_dim},
                    passed=rep.holds and angle <= TOLERANCES["angle"],
                )
            jobs.append(CheckJob(f"kernel/n={n}/l={ell}", "mu-zero-kernel-image", SuiteName.KERNEL,
                                 {"n": n, "ell": ell, "z": params.z, "mu": 0.0}, run, TOLERANCES["angle"]))
        return jobs

    # ── grassmann ───────────────────────────────────────────────────────────

    def _grassmann(self, rng) -> List[CheckJob]:
        jobs = []
        for n in range(1, 9):
            def dims(n=n):
                reports = [grassmann.image_dims(n, ell) for ell in range(0, n + 1)]
                bad = [r.ell for r in reports if not r.holds]
                return CheckOutcome(computed={"totals": [r.total for r in reports], "failing_l": bad},
                                    reference={"expected": [r.expected_total for r in reports]}, passed=not bad)
            jobs.append(CheckJob(f"phi-image-dims/n={n}", "phi-image-dimensions", SuiteName.GRASSMANN,
                                 {"n": n}, dims))
        for n in range(2, 7):
            seed = int(rng.integers(2 ** 31))

            def sl2(n=n, seed=seed):
                rep = grassmann.zeta_sl2_check(n, np.random.default_rng(seed))
                return CheckOutcome(computed={"graded_dims": rep.graded_dims,
                                              "phi_tilde_ranks": rep.phi_tilde_ranks_from_weights},
                                    passed=rep.holds)
            jobs.append(CheckJob(f"zeta-sl2/n={n}", "zeta-sl2-triple", SuiteName.GRASSMANN, {"n": n}, sl2))
        for n in range(1, 6):
            def jw(n=n):
                rep = grassmann.jw_check(n)
                return CheckOutcome(computed={k: v for k, v in vars(rep).items() if k != "n"}, passed=rep.holds)
            jobs.append(CheckJob(f"jordan-wigner/n={n}", "jordan-wigner", SuiteName.GRASSMANN, {"n": n}, jw))
        for n in range(1, 5):
            def divisible(n=n):
                _, _, ok = grassmann.exact_F_limits(n)
                return CheckOutcome(passed=ok)
            jobs.append(CheckJob(f"f-square-divisibility/n={n}", "f-square-divisibility", SuiteName.GRASSMANN,
                                 {"n": n}, divisible))

            def uq(n=n):
                numeric = grassmann.uq_relations_check(n, 0.7 + 0.4j)
                exact = grassmann.uq_relations_check(n, 2.0, exact_q=Fraction(2))
                residual = max(numeric.ke, numeric.kf, numeric.ef)
                return CheckOutcome(residual=residual, computed={"exact": exact.exact},
                                    passed=numeric.holds and exact.holds)
            jobs.append(CheckJob(f"uq-relations/n={n}", "uq-sl2-relations", SuiteName.GRASSMANN, {"n": n},
                                 uq, 1e-12))

        def limit():
            rep = grassmann.subspace_limit_check(4, 2)
            return CheckOutcome(residual=rep.final_angle, computed={"angles": rep.angles, "monotone": rep.monotone},
                                reference={"rhs_dim": rep.expected_dim}, passed=rep.holds)
        jobs.append(CheckJob("subspace-limit/n=4/l=2", "f-image-limit", SuiteName.GRASSMANN,
                             {"n": 4, "ell": 2, "q": grassmann.default_q_sequence()}, limit,
                             TOLERANCES["subspace-limit"]))

        for n, ell, asserted in ((4, 2, True), (3, 1, False)):
            def intersection(n=n, ell=ell, asserted=asserted):
                rep = grassmann.singular_limit_intersection(n, ell)
                return CheckOutcome(computed={"intersection_dim": rep.intersection_dim,
                                              "limit_angles": rep.limit_angles, "angle_cut": rep.angle_cut,
                                              "extrapolation_change": rep.extrapolation_change},
                                    passed=rep.intersection_dim >= 1 if asserted else True)
            jobs.append(CheckJob(f"singular-limit-intersection/n={n}/l={ell}", "singular-limit-intersection",
                                 SuiteName.GRASSMANN, {"n": n, "ell": ell, "asserted": asserted}, intersection))
        return jobs


class VerificationOrchestrator:
    """Main orchestrator for a verification run"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.run_id = str(uuid.uuid4())
        self.current_state = RunState.PLANNING
        self.timings: Dict[str, float] = {}

    def plan(self) -> List[CheckJob]:
        planner = SuitePlanner(self.config)
        jobs = []
        for name in self.config.selected_suites():
            suite = SuiteName(name)
            start = time.time()
            suite_jobs = planner.plan(suite)
            self.timings[f"plan/{suite.value}"] = time.time() - start
            logger.info(f"Suite {suite.value}: {len(suite_jobs)} checks planned")
            jobs.extend(suite_jobs)
        return jobs

    def execute(self, jobs: List[CheckJob]) -> List[CheckRecord]:
        if self.config.workers > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                return list(pool.map(call_check_safe, jobs))
        return [call_check_safe(job) for job in jobs]

    def compose(self, records: List[CheckRecord]) -> VerificationReport:
        passed = sum(1 for r in records if r.passed)
        failed = len(records) - passed
        for name in self.config.selected_suites():
            suite_records = [r for r in records if r.suite == name]
            bad = sum(1 for r in suite_records if not r.passed)
            self.timings[f"run/{name}"] = sum(r.elapsed for r in suite_records)
            logger.info(f"Suite {name} finished: {len(suite_records) - bad}/{len(suite_records)} passed")
        return VerificationReport(
            config_echo=self.config.model_dump(mode="json", exclude={"output", "persist", "workers"}),
            checks=records,
            summary=ReportSummary(total=len(records), passed=passed, failed=failed,
                                  status="pass" if failed == 0 else "fail"),
            environment={
                "seed": self.config.seed,
                "tolerances": dict(TOLERANCES, quadrature=self.config.quadrature.tol),
                "timings": self.timings,
            },
        )

    def run(self) -> VerificationReport:
        try:
            self.current_state = RunState.PLANNING
            jobs = self.plan()

            self.current_state = RunState.EXECUTING
            records = self.execute(jobs)

            self.current_state = RunState.COMPOSING
            report = self.compose(records)

            self.current_state = RunState.COMPLETED
            return report
        except Exception as e:
            failed_in = self.current_state
            self.current_state = RunState.ERROR
            logger.error(f"Orchestrator error while {failed_in.value}: {e}")
            raise


class RunStore:
    """Finished reports persisted as VerificationRun rows"""

    def __init__(self, db_session: Session):
        self.db_session = db_session

    def save(self, run_id: str, report: VerificationReport) -> VerificationRun:
        record = VerificationRun(
            run_id=run_id,
            suites=[r for r in report.config_echo.get("suites", [])],
            status=report.summary.status,
            passed=report.summary.passed,
            failed=report.summary.failed,
            config=report.config_echo,
            report=report.model_dump(mode="json"),
        )
        self.db_session.add(record)
        self.db_session.commit()
        self.db_session.refresh(record)
        logger.info(f"Stored run {run_id} ({report.summary.status})")
        return record

    def recent(self, limit: int = 50) -> List[VerificationRun]:
        return (self.db_session.query(VerificationRun)
                .order_by(VerificationRun.id.desc()).limit(limit).all())

    def get(self, run_id: str) -> Optional[VerificationReport]:
        record = self.db_session.query(VerificationRun).filter(VerificationRun.run_id == run_id).first()
        if not record:
            return None
        return VerificationReport.model_validate(record.report)


def run_suite(config: RunConfig) -> VerificationReport:
    return VerificationOrchestrator(config).run()


def list_suites() -> List[Dict[str, str]]:
    return [{"name": s.value, "description": SUITE_DESCRIPTIONS[s]} for s in SuiteName]
