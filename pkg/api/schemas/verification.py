from pydantic import BaseModel, Field, field_validator, model_validator
from typing import Any, Dict, List, Optional
from datetime import datetime
from math import pi

SCHEMA_VERSION = "1.0"

SUITE_NAMES = (
    "barnes", "detm", "identities", "spectrum", "det-integral", "shift",
    "mu-ode", "vanishing", "kernel", "grassmann",
)


class ComplexValue(BaseModel):
    re: float = 0.0
    im: float = 0.0

    @classmethod
    def of(cls, value: complex) -> "ComplexValue":
        value = complex(value)
        return cls(re=value.real, im=value.imag)

    def to_complex(self) -> complex:
        return complex(self.re, self.im)


class ZSpec(BaseModel):
    explicit: Optional[List[ComplexValue]] = Field(None, description="Explicit z_1..z_n; overrides random draws")
    spread: float = Field(0.4, gt=0, description="Side of the box around 0 that random z are drawn from")


class QuadratureSettings(BaseModel):
    tol: float = Field(1e-10, gt=0, description="Relative tolerance of one-dimensional contour integrals")
    max_depth: int = Field(14, ge=1, le=30, description="Bisection depth limit of adaptive panels")
    iterated_tol: float = Field(1e-9, gt=0, description="Tolerance of the tensor-product oracle")


class RunConfig(BaseModel):
    """Validated description of one verification run"""
    suites: List[str] = Field(default_factory=lambda: ["all"], description="Suites to run, or 'all'")
    n_values: Optional[List[int]] = Field(None, description="Override the suite default n grid")
    ell_values: Optional[List[int]] = Field(None, description="Override the suite default l grid")
    hbar: float = Field(1.0, description="Step hbar; p = 2 hbar")
    p: Optional[float] = Field(None, description="Shift p, must equal 2 hbar when given")
    mu: ComplexValue = Field(default_factory=lambda: ComplexValue(re=0.0, im=pi), description="Twist parameter mu")
    z: ZSpec = Field(default_factory=ZSpec)
    quadrature: QuadratureSettings = Field(default_factory=QuadratureSettings)
    rank_threshold: float = Field(1e-6, gt=0, description="Relative singular-value cut for numerical rank")
    samples: int = Field(100, ge=1, description="Random points per randomized identity")
    z_sets: int = Field(2, ge=1, description="Random generic z-sets per determinant case")
    seed: int = Field(42, description="Seed of every random draw in the run")
    workers: int = Field(1, ge=1, description="Threads of the check work queue")
    output: Optional[str] = Field(None, description="Report path; stdout when empty")
    format: str = Field("json", description="json or text")
    persist: bool = Field(False, description="Store the finished report in the database")

    @model_validator(mode="before")
    @classmethod
    def single_suite(cls, data: Any) -> Any:
        if isinstance(data, dict) and "suite" in data:
            data = dict(data)
            suite = data.pop("suite")
            data.setdefault("suites", [suite] if isinstance(suite, str) else list(suite))
        return data

    @field_validator("suites")
    @classmethod
    def known_suites(cls, value: List[str]) -> List[str]:
        for name in value:
            if name != "all" and name not in SUITE_NAMES:
                raise ValueError(f"unknown suite {name!r}")
        return value

    @field_validator("format")
    @classmethod
    def known_format(cls, value: str) -> str:
        if value not in ("json", "text"):
            raise ValueError(f"format must be json or text, got {value!r}")
        return value

    @field_validator("mu")
    @classmethod
    def mu_in_strip(cls, value: ComplexValue) -> ComplexValue:
        if not 0 <= value.im < 2 * pi:
            raise ValueError(f"Im mu must lie in [0, 2pi), got {value.im}")
        return value

    @model_validator(mode="after")
    def level_zero(self) -> "RunConfig":
        if self.hbar == 0:
            raise ValueError("hbar must be nonzero")
        if self.p is not None and abs(self.p - 2 * self.hbar) > 1e-14 * abs(self.hbar):
            raise ValueError(f"level zero requires p = 2*hbar, got p={self.p}")
        return self

    def selected_suites(self) -> List[str]:
        if "all" in self.suites:
            return list(SUITE_NAMES)
        return [s for s in SUITE_NAMES if s in self.suites]

    def mu_value(self) -> complex:
        return self.mu.to_complex()


class CheckRecord(BaseModel):
    check_id: str
    anchor: str
    suite: str
    inputs: Dict[str, Any] = Field(default_factory=dict)
    computed: Dict[str, Any] = Field(default_factory=dict)
    reference: Dict[str, Any] = Field(default_factory=dict)
    residual: Optional[float] = None
    tolerance: Optional[float] = None
    passed: bool
    error: Optional[str] = None
    elapsed: float = 0.0


class ReportSummary(BaseModel):
    total: int
    passed: int
    failed: int
    status: str


class VerificationReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    config_echo: Dict[str, Any]
    checks: List[CheckRecord]
    summary: ReportSummary
    environment: Dict[str, Any] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.summary.failed == 0


class SuiteInfo(BaseModel):
    name: str
    description: str


class RunListItem(BaseModel):
    run_id: str
    suites: List[str]
    status: str
    passed: int
    failed: int
    created_at: Optional[datetime] = None

    class Config:
        from_attributes = True


class RunListResponse(BaseModel):
    runs: List[RunListItem]
    total: int
