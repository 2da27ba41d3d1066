"""Gaussian wavepacket, its position-dependent phase, and derived quantities.

All core math is dimensionless.  Positions are expressed as
``x = (q - q0) / sigma``; the packet envelope is

    envelope(x) = (2*pi)**-0.25 * exp(-x**2/4) * exp(i*theta(x))

and the plane-wave factor ``exp(i*k*q)`` is never sampled here: operations
that need it receive the wavenumber symbolically and use oscillatory
quadrature.  Phase-basis coefficients are stored in dimensionless form
(physical coefficient times sigma**2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import numerics
from .errors import DegenerateInputError
from .numerics import ComplexPolynomial, QuadratureResult

__all__ = [
    "PacketParams",
    "PhaseBasisTerm",
    "PhaseSpec",
    "density",
    "phase_value",
    "phase_derivative",
    "wavefunction",
    "derivative_polynomial",
    "momentum_amplitude",
]

_NORM = (2.0 * math.pi) ** -0.25


@dataclass(frozen=True)
class PacketParams:
    """Gaussian packet and kinematics.

    Parameters
    ----------
    sigma : float
        Packet width (> 0).
    q0 : float
        Mean initial position; the arrival point is fixed at the origin.
    E0 : float
        Kinetic energy (> 0).
    mu : float
        Mass (> 0).
    hbar : float
        Reduced Planck constant in the chosen unit system (> 0).
    units : str
        "natural" or "SI"; bookkeeping only, the formulas are identical for
        any internally consistent unit system.
    """

    sigma: float
    q0: float
    E0: float
    mu: float = 1.0
    hbar: float = 1.0
    units: str = "natural"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.E0 <= 0:
            raise ValueError("E0 must be positive")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if self.units not in ("natural", "SI"):
            raise ValueError("units must be 'natural' or 'SI'")

    @property
    def wavenumber(self) -> float:
        """k = sqrt(2 mu E0) / hbar."""
        return math.sqrt(2.0 * self.mu * self.E0) / self.hbar

    @property
    def speed(self) -> float:
        """v0 = sqrt(2 E0 / mu)."""
        return math.sqrt(2.0 * self.E0 / self.mu)

    @property
    def momentum(self) -> float:
        return self.mu * self.speed

    @property
    def tau_class(self) -> float:
        """Classical arrival time at the origin, -q0/v0."""
        return -self.q0 / self.speed

    @property
    def k_sigma(self) -> float:
        """Dimensionless expansion parameter k*sigma."""
        return self.wavenumber * self.sigma

    @property
    def offset_ratio(self) -> float:
        """Dimensionless packet offset q0/sigma."""
        return self.q0 / self.sigma


# ---------------------------------------------------------------------------
# Parity phase basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseBasisTerm:
    """One definite-parity Hermite basis function for the packet phase.

    ``parity`` is the parity of theta itself: an "odd" term has an even
    polynomial derivative built from H_{2l}, H_{2m}; an "even" term has an
    odd derivative built from H_{2l+1}, H_{2m+1}.  Both satisfy the two
    linear phase conditions (zero mean and zero position-weighted mean of
    density * theta') identically, for every l != m.
    """

    parity: str
    l: int
    m: int

    def __post_init__(self):
        if self.parity not in ("odd", "even"):
            raise ValueError("parity must be 'odd' or 'even'")
        if self.l < 0 or self.m < 0:
            raise ValueError("basis indices must be nonnegative")
        if self.l == self.m:
            raise ValueError("basis indices l and m must differ")

    def derivative_coefficients(self) -> np.ndarray:
        """Monomial coefficients (ascending) of d(theta)/dx for this term.

        The two-function determinant construction fixes the basis only up to
        overall sign; the convention here makes the coefficient of the
        lower-order Hermite component positive, which is the orientation for
        which the leading phased correction factor comes out negative.
        """
        i, j = max(self.l, self.m), min(self.l, self.m)
        if self.parity == "odd":
            hi, hj = 2 * i, 2 * j
            n_i = _prefactor(i, j, hi, hj)
            n_j = _prefactor(j, i, hj, hi)
        else:
            hi, hj = 2 * i + 1, 2 * j + 1
            n_i = _prefactor(i, j, hi, hj)
            n_j = _prefactor(j, i, hj, hi)
        coeffs_j = np.asarray(numerics.hermite_coefficients(hj), dtype=float)
        coeffs_i = np.asarray(numerics.hermite_coefficients(hi), dtype=float)
        out = np.zeros(max(hi, hj) + 1)
        out[: hj + 1] += n_i * coeffs_j
        out[: hi + 1] -= n_j * coeffs_i
        return out

    def value_coefficients(self) -> np.ndarray:
        """Monomial coefficients of theta(x): term-wise Hermite antiderivative.

        No integration constant is added, so the representation is
        deterministic; a constant phase offset is physically irrelevant.
        """
        return _antiderivative(self.derivative_coefficients())


def _prefactor(i: int, j: int, deg_i: int, deg_j: int) -> float:
    # Normalisation from the orthogonality construction: the coefficient
    # multiplying the Hermite polynomial of degree deg_j, the partner index
    # being i.  Equal-condition residuals cancel exactly for every l != m.
    return (
        2.0
        * math.sqrt(math.pi)
        / (2.0 ** (i + j) * math.factorial(i))
        * math.sqrt(math.factorial(deg_i) / math.factorial(deg_j))
    )


def _antiderivative(coeffs: np.ndarray) -> np.ndarray:
    out = np.zeros(len(coeffs) + 1)
    powers = np.arange(1, len(coeffs) + 1, dtype=float)
    out[1:] = np.asarray(coeffs, dtype=float) / powers
    return out


@dataclass(frozen=True)
class PhaseSpec:
    """Real phase as a linear combination of parity Hermite basis terms.

    Coefficients are dimensionless (physical coefficient times sigma**2).
    """

    terms: tuple[tuple[float, PhaseBasisTerm], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(
            self,
            "terms",
            tuple((float(c), t) for c, t in self.terms),
        )

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[float, PhaseBasisTerm]]) -> "PhaseSpec":
        return cls(tuple(terms))

    def scaled(self, factor: float) -> "PhaseSpec":
        return PhaseSpec(tuple((factor * c, t) for c, t in self.terms))

    def derivative_poly(self) -> np.ndarray:
        """Monomial coefficients of d(theta)/dx (a real polynomial)."""
        if not self.terms:
            return np.zeros(0)
        parts = [c * t.derivative_coefficients() for c, t in self.terms]
        n = max(len(p) for p in parts)
        out = np.zeros(n)
        for p in parts:
            out[: len(p)] += p
        return out

    def value_poly(self) -> np.ndarray:
        """Monomial coefficients of theta(x)."""
        return _antiderivative(self.derivative_poly())

    @property
    def is_zero(self) -> bool:
        return not self.terms or not np.any(self.derivative_poly())


def _poly_eval(coeffs: np.ndarray, x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c in coeffs[::-1]:
        out = out * x + c
    return out if out.ndim else float(out)


def _poly_derivative(coeffs: np.ndarray, order: int) -> np.ndarray:
    out = np.asarray(coeffs, dtype=float)
    for _ in range(order):
        if len(out) <= 1:
            return np.zeros(0)
        out = out[1:] * np.arange(1, len(out), dtype=float)
    return out


def phase_value(spec: PhaseSpec | None, x):
    """theta(x) for the dimensionless position x; zero for ``spec=None``."""
    if spec is None or not spec.terms:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        return out if out.ndim else 0.0
    return _poly_eval(spec.value_poly(), x)


def phase_derivative(spec: PhaseSpec | None, x, order: int = 1):
    """n-th derivative of theta at x, taken analytically (never by differences)."""
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    if spec is None or not spec.terms:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        return out if out.ndim else 0.0
    return _poly_eval(_poly_derivative(spec.value_poly(), order), x)


# ---------------------------------------------------------------------------
# Densities and wavefunctions (dimensionless frame)
# ---------------------------------------------------------------------------

def density(x):
    """Dimensionless probability density (2*pi)**-0.5 exp(-x**2/2).

    The physical density is density((q - q0)/sigma) / sigma.
    """
    return numerics.gauss_weight(x)


def wavefunction(params: PacketParams | None, spec: PhaseSpec | None, x):
    """Dimensionless envelope (2*pi)**-0.25 exp(-x**2/4) exp(i*theta(x)).

    The plane-wave factor exp(i*k*q) is carried symbolically by the
    wavenumber in ``params`` and never sampled here.
    """
    x = np.asarray(x, dtype=float)
    env = _NORM * np.exp(-0.25 * x * x)
    out = env * np.exp(1j * phase_value(spec, x))
    return out if out.ndim else complex(out)


def derivative_polynomial(spec: PhaseSpec | None, n: int) -> ComplexPolynomial:
    """Polynomial P_n with envelope^(n)(x) = P_n(x) * envelope(x).

    Built by the recurrence P_0 = 1, P_{n+1} = P_n' + (i*theta'(x) - x/2) P_n,
    which follows from differentiating the Gaussian-times-phase envelope.
    """
    if n < 0:
        raise ValueError("derivative order must be nonnegative")
    return derivative_polynomials(spec, n)[n]


def derivative_polynomials(spec: PhaseSpec | None, up_to: int) -> list[ComplexPolynomial]:
    """All P_0 ... P_{up_to} from the same recurrence (cheap, done in one pass)."""
    if spec is None:
        dtheta = ComplexPolynomial.zero()
    else:
        dtheta = ComplexPolynomial(spec.derivative_poly().astype(complex))
    multiplier = 1j * dtheta + ComplexPolynomial((0.0, -0.5))
    polys = [ComplexPolynomial.one()]
    for _ in range(up_to):
        p = polys[-1]
        polys.append(p.derivative() + multiplier * p)
    return polys


def momentum_amplitude(
    params: PacketParams,
    spec: PhaseSpec | None,
    p,
    tol: float = 1e-10,
) -> complex | np.ndarray:
    """Momentum-space amplitude of the full initial wavefunction.

    Computes (2*pi*hbar)**-0.5 * integral psi0(q) exp(-i p q / hbar) dq with
    psi0 including the plane-wave factor, through the dimensionless Fourier
    transform of the envelope evaluated by oscillatory quadrature.
    """
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    sigma, hbar = params.sigma, params.hbar
    k = params.wavenumber
    prefactor = math.sqrt(sigma / (2.0 * math.pi * hbar))
    dtheta = spec.derivative_poly() if spec is not None else np.zeros(0)

    out = np.empty(p_arr.shape, dtype=complex)
    for idx, p_val in enumerate(p_arr):
        eta = (p_val / hbar - k) * sigma

        def integrand(x, _eta=eta):
            return wavefunction(params, spec, x) * np.exp(-1j * _eta * x)

        def local_rate(x, _eta=eta):
            return np.abs(_poly_eval(dtheta, x)) + abs(_eta) if len(dtheta) else np.full_like(
                np.asarray(x, dtype=float), abs(_eta)
            )

        result: QuadratureResult = numerics.integrate_oscillatory(
            integrand, eta, tol=tol, rate=local_rate,
            tail_cut=numerics.DEFAULT_TAIL_CUT + max(0.0, len(dtheta) - 1.0),
        )
        phase0 = (k - p_val / hbar) * params.q0
        out[idx] = prefactor * complex(np.exp(1j * phase0)) * complex(result.value)
    if np.isscalar(p) or np.asarray(p).ndim == 0:
        return complex(out[0])
    return out
