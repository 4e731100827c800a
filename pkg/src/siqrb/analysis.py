"""Threshold quantities, equilibria and local stability of the SIQRB model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from siqrb.model import ModelParams, State, ValidatedParams, uncontrolled_rhs, validate_params

RESIDUAL_LIMIT = 1e-8
CRITICAL_TOLERANCE = 1e-12

STABLE = "locally-asymptotically-stable"
UNSTABLE = "unstable"
CRITICAL = "critical"


class DegenerateEigenstructure(ArithmeticError):
    pass


@dataclass(frozen=True)
class EquilibriumReport:
    kind: str
    state: State
    residual_norm: float
    R0: float
    lambda_star: float | None = None


@dataclass(frozen=True)
class StabilityVerdict:
    classification: str
    routh_margin: float


class BifurcationCoefficients(NamedTuple):
    a: float
    b: float
    w: np.ndarray
    v: np.ndarray
    beta_star: float


def basic_reproduction_number(params: ModelParams) -> float:
    p = validate_params(params)
    return p.beta * p.Lambda * p.eta / (p.mu * p.kappa * p.d * p.a1)


def next_generation_matrices(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """New-infection Jacobian F0 and transition Jacobian V0 at the disease-free state."""
    p = validate_params(params)
    c = p.beta * p.Lambda / (p.mu * p.kappa)
    F0 = np.zeros((5, 5))
    F0[1, 4] = c
    V0 = np.array([
        [p.mu, 0.0, 0.0, -p.omega, c],
        [0.0, p.a1, 0.0, 0.0, 0.0],
        [0.0, -p.delta, p.a2, 0.0, 0.0],
        [0.0, 0.0, -p.epsilon, p.a3, 0.0],
        [0.0, -p.eta, 0.0, 0.0, p.d],
    ])
    return F0, V0


def spectral_radius_r0(params: ModelParams) -> float:
    """R0 as the spectral radius of F0 V0^-1, computed numerically."""
    F0, V0 = next_generation_matrices(params)
    return float(np.max(np.abs(np.linalg.eigvals(F0 @ np.linalg.inv(V0)))))


def residual_norm(x, params: ModelParams) -> float:
    """Max-norm of the vector field at ``x``, relative to the largest state component."""
    f = uncontrolled_rhs(x, params)
    return float(np.max(np.abs(f)) / max(1.0, float(np.max(np.abs(x)))))


def disease_free_equilibrium(params: ModelParams) -> EquilibriumReport:
    p = validate_params(params)
    state = State(p.Lambda / p.mu, 0.0, 0.0, 0.0, 0.0)
    return EquilibriumReport("disease-free", state, residual_norm(state, p), basic_reproduction_number(p))


def endemic_equilibrium(params: ModelParams) -> EquilibriumReport | None:
    """Positive equilibrium, or ``None`` when R0 <= 1.

    The equilibrium force of infection has a closed form in terms of R0; every
    compartment then follows from it linearly.
    """
    p = validate_params(params)
    r0 = basic_reproduction_number(p)
    if r0 <= 1.0:
        return None
    a1, a2, a3 = p.a1, p.a2, p.a3
    cycle = p.delta * p.epsilon * p.omega
    lam = (p.mu * p.kappa * p.d * a1 * a2 * a3 * (r0 - 1.0)
           / (p.kappa * (a1 * a2 * a3 - cycle) * p.d + p.Lambda * p.eta * a2 * a3))
    D = a1 * a2 * a3 * (lam + p.mu) - cycle * lam
    L = p.Lambda
    state = State(
        L * a1 * a2 * a3 / D,
        L * a2 * a3 * lam / D,
        L * p.delta * a3 * lam / D,
        L * p.delta * p.epsilon * lam / D,
        L * p.eta * a2 * a3 * lam / (D * p.d),
    )
    res = residual_norm(state, p)
    if not res < RESIDUAL_LIMIT:
        raise ArithmeticError(f"endemic equilibrium residual {res:.3e} exceeds {RESIDUAL_LIMIT:g}")
    return EquilibriumReport("endemic", state, res, r0, lambda_star=lam)


def routh_margin(params: ModelParams) -> float:
    """Constant coefficient ``a1*d - beta*Lambda*eta/(mu*kappa)`` of the DFE quadratic factor."""
    p = validate_params(params)
    return p.a1 * p.d - p.beta * p.Lambda * p.eta / (p.mu * p.kappa)


def dfe_stability(params: ModelParams) -> StabilityVerdict:
    p = validate_params(params)
    margin = routh_margin(p)
    if abs(margin) <= CRITICAL_TOLERANCE * p.a1 * p.d:
        return StabilityVerdict(CRITICAL, margin)
    return StabilityVerdict(STABLE if margin > 0 else UNSTABLE, margin)


def dfe_eigenvalues(params: ModelParams) -> np.ndarray:
    """Eigenvalues of the Jacobian at the DFE from the factored characteristic polynomial.

    Three roots are ``-mu``, ``-a2``, ``-a3``; the other two solve
    ``x^2 + (a1+d) x + routh_margin = 0`` and are always real.
    """
    p = validate_params(params)
    s = p.a1 + p.d
    disc = s * s - 4.0 * routh_margin(p)
    root = np.sqrt(max(disc, 0.0))
    return np.array([-p.mu, -p.a2, -p.a3, 0.5 * (-s + root), 0.5 * (-s - root)])


def jacobian_at(x, params: ModelParams, u: float = 1.0) -> np.ndarray:
    """Analytic Jacobian of the vector field at ``x`` (controlled when ``u < 1``)."""
    p = validate_params(params)
    S, I, Q, R, B = x
    lam = p.beta * B / (p.kappa + B)
    phi = p.beta * p.kappa * S / (p.kappa + B) ** 2
    qd = p.delta * u
    return np.array([
        [-lam - p.mu, 0.0, 0.0, p.omega, -phi],
        [lam, -(qd + p.alpha1 + p.mu), 0.0, 0.0, phi],
        [0.0, qd, -p.a2, 0.0, 0.0],
        [0.0, 0.0, p.epsilon, -p.a3, 0.0],
        [0.0, p.eta, 0.0, 0.0, -p.d],
    ])


def jacobian_eigenvalues(x, params: ModelParams) -> np.ndarray:
    return np.linalg.eigvals(jacobian_at(x, params))


def second_derivatives_at(x, params: ModelParams) -> np.ndarray:
    """Tensor ``H[k, i, j] = d2 f_k / dx_i dx_j`` of the uncontrolled vector field."""
    p = validate_params(params)
    S, _, _, _, B = x
    g_sb = p.beta * p.kappa / (p.kappa + B) ** 2
    g_bb = -2.0 * p.beta * p.kappa * S / (p.kappa + B) ** 3
    H = np.zeros((5, 5, 5))
    for k, sign in ((0, -1.0), (1, 1.0)):
        H[k, 0, 4] = H[k, 4, 0] = sign * g_sb
        H[k, 4, 4] = sign * g_bb
    return H


def beta_derivative_jacobian(x, params: ModelParams) -> np.ndarray:
    """Matrix ``M[k, i] = d2 f_k / dx_i d(beta)``."""
    p = validate_params(params)
    S, _, _, _, B = x
    M = np.zeros((5, 5))
    for k, sign in ((0, -1.0), (1, 1.0)):
        M[k, 0] = sign * B / (p.kappa + B)
        M[k, 4] = sign * p.kappa * S / (p.kappa + B) ** 2
    return M


def critical_beta(params: ModelParams) -> float:
    """Ingestion rate at which R0 = 1."""
    p = validate_params(params)
    return p.mu * p.kappa * p.d * p.a1 / (p.Lambda * p.eta)


def bifurcation_coefficients(params: ModelParams) -> BifurcationCoefficients:
    """Center-manifold coefficients ``a`` and ``b`` at the transcritical point R0 = 1.

    ``a < 0`` with ``b > 0`` means the endemic branch born at R0 = 1 is locally
    stable. Eigenvectors are normalized so their I-components equal 1.

    Raises:
        DegenerateEigenstructure: zero is not a simple eigenvalue of the
            Jacobian at the disease-free state.
    """
    p = validate_params(params)
    beta_star = critical_beta(p)
    ps = p.replace(beta=beta_star)
    a1, a2, a3 = ps.a1, ps.a2, ps.a3
    cycle = ps.delta * ps.epsilon * ps.omega

    J0 = jacobian_at(disease_free_equilibrium(ps).state, ps)
    eig = np.linalg.eigvals(J0)
    scale = max(1.0, float(np.max(np.abs(J0))))
    if np.count_nonzero(np.abs(eig) < 1e-8 * scale) != 1:
        raise DegenerateEigenstructure(f"zero eigenvalue is not simple: {eig}")

    w = np.array([(cycle / (a2 * a3) - a1) / ps.mu, 1.0, ps.delta / a2, ps.delta * ps.epsilon / (a2 * a3), ps.eta / ps.d])
    v = np.array([0.0, 1.0, 0.0, 0.0, a1 / ps.eta])

    a = (2.0 * ps.eta * beta_star / (ps.d * ps.kappa * ps.mu)
         * ((cycle - a1 * a2 * a3) / (a2 * a3) - ps.Lambda * ps.eta / (ps.d * ps.kappa)))
    b = ps.Lambda * ps.eta / (ps.mu * ps.kappa * ps.d)
    return BifurcationCoefficients(a, b, w, v, beta_star)


def center_manifold_sums(params: ModelParams, w: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """``a`` and ``b`` evaluated directly as tensor contractions with the given eigenvectors."""
    ps = validate_params(params).replace(beta=critical_beta(params))
    x0 = disease_free_equilibrium(ps).state
    a = float(np.einsum("k,i,j,kij->", v, w, w, second_derivatives_at(x0, ps)))
    b = float(np.einsum("k,i,ki->", v, w, beta_derivative_jacobian(x0, ps)))
    return a, b
