"""Model exponents, derived constants and regime classification."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

DEFAULT_EPSILON = 1e-8
LOG_CRITICAL_TOL = 1e-12


class ParameterError(ValueError):
    """Raised for exponents outside the admissible range."""


@dataclass(frozen=True)
class DerivedConstants:
    lam: float
    delta: float
    gamma: float
    alpha: float
    sigma: float


@dataclass(frozen=True)
class RegimeReport:
    barenblatt_ok: bool
    shannon_ok: bool
    convergence_ok: bool
    diffusion_dominated: bool
    log_critical: bool


@dataclass(frozen=True)
class ModelParams:
    """Exponents of ``u_t = Lap(u^m) - u^p`` plus the regularisation strength.

    ``epsilon`` adds the linear diffusion ``epsilon * Lap(u)`` used to keep the
    implicit systems nonsingular where the density vanishes.
    """

    n: int
    m: float
    p: float
    epsilon: float = DEFAULT_EPSILON
    absorption_enabled: bool = True
    _derived: DerivedConstants = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError(f"dimension n must be an integer >= 2, got {self.n}")
        if not 0.0 < self.m < 1.0:
            raise ParameterError(f"diffusion exponent m must lie in (0, 1), got {self.m}")
        if not self.p > 1.0:
            raise ParameterError(f"absorption exponent p must exceed 1, got {self.p}")
        if not self.epsilon >= 0.0:
            raise ParameterError(f"epsilon must be nonnegative, got {self.epsilon}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "_derived", derive_constants(self))

    @property
    def lam(self) -> float:
        return self._derived.lam

    @property
    def delta(self) -> float:
        return self._derived.delta

    @property
    def gamma(self) -> float:
        return self._derived.gamma

    @property
    def alpha(self) -> float:
        return self._derived.alpha

    @property
    def sigma(self) -> float:
        return self._derived.sigma

    @property
    def k(self) -> float:
        """Profile exponent 1/(1-m)."""
        return 1.0 / (1.0 - self.m)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def derive_constants(params: ModelParams) -> DerivedConstants:
    n, m, p = params.n, params.m, params.p
    if n < 2 or not 0.0 < m < 1.0 or not p > 1.0:
        raise ParameterError(f"invalid exponents (n={n}, m={m}, p={p})")
    lam = 2.0 - n * (1.0 - m)
    gamma = 2.0 * m / (1.0 - m)
    return DerivedConstants(
        lam=lam,
        delta=n * p - n * m - 2.0,
        gamma=gamma,
        alpha=2.0 * m * lam / (1.0 - m),
        sigma=n * (1.0 - m) / (2.0 * m),
    )


def classify_regime(params: ModelParams) -> RegimeReport:
    n, m, p = params.n, params.m, params.p
    delta = params.delta
    return RegimeReport(
        barenblatt_ok=m > (n - 2) / n,
        shannon_ok=m > n / (n + 2),
        convergence_ok=m > (n - 1) / n and p > m + 2.0 / n,
        diffusion_dominated=delta > 0.0,
        log_critical=abs(delta - 1.0) <= LOG_CRITICAL_TOL,
    )
