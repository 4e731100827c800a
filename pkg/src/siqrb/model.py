"""Domain types and vector fields of the SIQRB cholera model.

State ordering is always ``(S, I, Q, R, B)``: susceptible, infectious,
quarantined and recovered humans, plus the bacterial concentration in the
water supply (cells/ml). Costates follow the same ordering.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

STATE_NAMES = ("S", "I", "Q", "R", "B")
PARAM_NAMES = (
    "Lambda", "mu", "beta", "kappa", "omega", "delta",
    "epsilon", "alpha1", "alpha2", "eta", "d",
)
REQUIRED_POSITIVE = ("Lambda", "mu", "beta", "kappa", "eta", "d")
OPTIONAL_NONNEGATIVE = ("omega", "delta", "epsilon", "alpha1", "alpha2")


class ModelError(ValueError):
    """Base class for invalid inputs to the model."""


class NonPositiveRequiredRate(ModelError):
    def __init__(self, name: str, value: float | None = None):
        self.field = name
        super().__init__(f"{name} must be > 0 (got {value!r})")


class NegativeOptionalRate(ModelError):
    def __init__(self, name: str, value: float | None = None):
        self.field = name
        super().__init__(f"{name} must be >= 0 (got {value!r})")


class DomainError(ModelError):
    pass


class ControlOutOfRange(ModelError):
    pass


class NonPositiveWeight(ModelError):
    pass


class State(NamedTuple):
    S: float
    I: float
    Q: float
    R: float
    B: float


@dataclass(frozen=True)
class ModelParams:
    """Rates and constants of the model. Units are persons and days."""

    Lambda: float
    mu: float
    beta: float
    kappa: float
    omega: float
    delta: float
    epsilon: float
    alpha1: float
    alpha2: float
    eta: float
    d: float

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in PARAM_NAMES}


@dataclass(frozen=True)
class ValidatedParams(ModelParams):
    """Parameters that passed the sign checks, with the composite exit rates.

    ``a1`` is the total exit rate from I, ``a2`` from Q and ``a3`` from R.
    """

    a1: float = field(init=False)
    a2: float = field(init=False)
    a3: float = field(init=False)

    def __post_init__(self):
        for name in REQUIRED_POSITIVE:
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise NonPositiveRequiredRate(name, value)
        for name in OPTIONAL_NONNEGATIVE:
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise NegativeOptionalRate(name, value)
        object.__setattr__(self, "a1", self.delta + self.alpha1 + self.mu)
        object.__setattr__(self, "a2", self.epsilon + self.alpha2 + self.mu)
        object.__setattr__(self, "a3", self.omega + self.mu)

    def replace(self, **changes) -> "ValidatedParams":
        return validate_params(ModelParams(**{**self.as_dict(), **changes}))

    @property
    def population_bound(self) -> float:
        """Upper bound Λ/μ of the total human population in the invariant region."""
        return self.Lambda / self.mu

    @property
    def bacteria_bound(self) -> float:
        return self.Lambda * self.eta / (self.mu * self.d)


def validate_params(raw: ModelParams) -> ValidatedParams:
    """Check parameter signs and precompute ``a1``, ``a2``, ``a3``.

    Raises:
        NonPositiveRequiredRate: Lambda, mu, beta, kappa, eta or d is not > 0.
        NegativeOptionalRate: omega, delta, epsilon, alpha1 or alpha2 is < 0.
    """
    if isinstance(raw, ValidatedParams):
        return raw
    return ValidatedParams(**{name: float(getattr(raw, name)) for name in PARAM_NAMES})


def recruitment_from_population(n0: float) -> float:
    """Recruitment rate (persons/day) for a crude birth rate of 24.4 per 1000 per year."""
    return 24.4 * n0 / 365000.0


def _validated(params) -> ValidatedParams:
    return params if isinstance(params, ValidatedParams) else validate_params(params)


def _check_control(u: float) -> None:
    if not 0.0 <= u <= 1.0:
        raise ControlOutOfRange(f"control must lie in [0, 1], got {u!r}")


def force_of_infection(B: float, params: ModelParams) -> float:
    """Saturating per-capita infection rate ``beta*B/(kappa+B)``."""
    if B < 0:
        raise DomainError(f"bacterial concentration must be >= 0, got {B!r}")
    return params.beta * B / (params.kappa + B)


def _rhs(x, u: float, p: ValidatedParams) -> np.ndarray:
    S, I, Q, R, B = x
    infection = p.beta * B / (p.kappa + B) * S
    quarantined = p.delta * u * I
    return np.array([
        p.Lambda - infection + p.omega * R - p.mu * S,
        infection - quarantined - (p.alpha1 + p.mu) * I,
        quarantined - p.a2 * Q,
        p.epsilon * Q - p.a3 * R,
        p.eta * I - p.d * B,
    ])


def uncontrolled_rhs(x: Sequence[float], params: ModelParams) -> np.ndarray:
    """Time derivative of (S, I, Q, R, B) with the constant quarantine rate."""
    return _rhs(x, 1.0, _validated(params))


def controlled_rhs(x: Sequence[float], u: float, params: ModelParams) -> np.ndarray:
    """Time derivative when only a fraction ``u`` of the quarantine flow is applied.

    ``u = 1`` reproduces :func:`uncontrolled_rhs` exactly.
    """
    _check_control(u)
    return _rhs(x, u, _validated(params))


def adjoint_rhs(l: Sequence[float], x: Sequence[float], u: float, params: ModelParams) -> np.ndarray:
    """Costate derivatives ``-dH/dx`` for the running cost ``I + B + (W/2) u^2``."""
    _check_control(u)
    p = _validated(params)
    l1, l2, l3, l4, l5 = l
    S, I, Q, R, B = x
    lam = p.beta * B / (p.kappa + B)
    dlam_S = p.beta * p.kappa * S / (p.kappa + B) ** 2
    ud = u * p.delta
    return np.array([
        l1 * (lam + p.mu) - l2 * lam,
        -1.0 + l2 * (ud + p.alpha1 + p.mu) - l3 * ud - l5 * p.eta,
        l3 * p.a2 - l4 * p.epsilon,
        -l1 * p.omega + l4 * p.a3,
        -1.0 + l1 * dlam_S - l2 * dlam_S + l5 * p.d,
    ])


def running_cost(x: Sequence[float], u: float, W: float) -> float:
    return x[1] + x[4] + 0.5 * W * u * u


def hamiltonian(x: Sequence[float], u: float, l: Sequence[float], W: float, params: ModelParams) -> float:
    if W <= 0:
        raise NonPositiveWeight(f"cost weight W must be > 0, got {W!r}")
    f = controlled_rhs(x, u, params)
    return float(running_cost(x, u, W) + np.dot(np.asarray(l, dtype=float), f))


@dataclass(frozen=True)
class ControlSignal:
    """Piecewise-linear control on an ordered time grid, values in [0, 1]."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("control times and values must be 1-D arrays of equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("control times must be strictly increasing")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ControlOutOfRange("control values must lie in [0, 1]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, times, value: float) -> "ControlSignal":
        times = np.asarray(times, dtype=float)
        return cls(times, np.full(times.shape, float(value)))

    def at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))
