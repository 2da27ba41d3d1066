"""Quantum correction terms, the summed arrival-time series, and its oracle.

Two independent routes to the arrival-time expectation value live here:

* ``asymptotic_arrival_time`` sums the inverse-power series in the
  dimensionless parameter k*sigma.  Every coefficient is an exact
  Gaussian-moment integral of ``polynomial * gauss_weight`` built from the
  envelope derivative polynomials, so the only numerical error is float
  rounding (tracked and reported as a noise floor).

* ``exact_arrival_time`` evaluates the defining double integral of the
  arrival-time kernel by oscillatory panel quadrature, with no expansion.

The series coefficients come in two families: the even family multiplies
(k*sigma)**(-2n) and the odd family (k*sigma)**(-(2n+1)).  The generic
definitions (derivative-polynomial route) are normative.  The closed-form
expressions for orders 1..6 drop envelope-phase cross couplings beyond
order 2 and are exposed for comparison via :func:`closed_form_correction`;
see :mod:`qtoa.diagnostics` for the audit.

Dimensionless weights: changing variables q = sigma*x + q0 in the defining
integrals produces an (x + q0/sigma) weight in *both* families.  The even
coefficients are reported normalised by q0/sigma so the zeroth one equals 1;
the "plain" form (offset weight dropped) is available as a diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import (
    DegenerateInputError,
    InvalidPhaseError,
    SeriesDivergenceError,
)
from .numerics import ComplexPolynomial
from .wavepacket import PacketParams, PhaseSpec, derivative_polynomials

__all__ = [
    "CorrectionSeries",
    "ExactToaResult",
    "correction_coefficient_even",
    "correction_coefficient_odd",
    "closed_form_correction",
    "correction_series",
    "asymptotic_arrival_time",
    "exact_arrival_time",
    "exact_arrival_time_result",
    "leading_correction_no_phase",
    "leading_correction_with_phase",
]

_EPS = float(np.finfo(float).eps)

# Residual tolerance on the first/second-order conditions required before a
# phase may be called "cancelling" (preconditions of the leading factors).
_CANCEL_TOL = 1e-8


# ---------------------------------------------------------------------------
# Correction coefficients (generic definitions, exact moments)
# ---------------------------------------------------------------------------

def _weighted(poly: ComplexPolynomial, u: float) -> ComplexPolynomial:
    return poly.shift_up() + u * poly


def _even_parts(n: int, spec: PhaseSpec | None) -> tuple[float, float, float]:
    """(plain, offset_part, noise_bound) for the even-family coefficient."""
    p_n = derivative_polynomials(spec, n)[n]
    dens = (p_n * p_n.conjugate()).real_part()
    plain = float(np.real(dens.gaussian_expectation()))
    offset = float(np.real(dens.shift_up().gaussian_expectation()))
    bound = dens.gaussian_expectation_bound() + dens.shift_up().gaussian_expectation_bound()
    return plain, offset, bound


def correction_coefficient_even(
    n: int,
    params: PacketParams,
    spec: PhaseSpec | None,
    form: str = "weighted",
) -> float:
    """Dimensionless coefficient of (k*sigma)**(-2n) in the arrival-time series.

    ``form="weighted"`` (default, normative) keeps the full offset weight
    produced by the change of variables and normalises by q0/sigma, so
    n = 0 gives exactly 1.  ``form="plain"`` drops the offset-weighted part
    (the symmetric-density shortcut, exact only when the integrand is even);
    it is exposed for comparison.
    """
    if n < 0:
        raise ValueError("order must be nonnegative")
    if form not in ("weighted", "plain"):
        raise ValueError("form must be 'weighted' or 'plain'")
    plain, offset, _ = _even_parts(n, spec)
    if form == "plain":
        return plain
    u = params.offset_ratio
    if offset == 0.0:
        return plain
    if u == 0.0:
        raise DegenerateInputError(
            "offset-weighted coefficient is singular for q0 = 0 (asymmetric integrand)"
        )
    return plain + offset / u


def correction_coefficient_odd(n: int, params: PacketParams, spec: PhaseSpec | None) -> float:
    """Dimensionless coefficient entering at (k*sigma)**(-(2n+1)).

    Offset-weighted imaginary overlap of the envelope with its (2n+1)-th
    derivative; vanishes identically for a real (phase-free) envelope.
    """
    if n < 0:
        raise ValueError("order must be nonnegative")
    p = derivative_polynomials(spec, 2 * n + 1)[2 * n + 1]
    imp = p.imag_part()
    return float(np.real(_weighted(imp, params.offset_ratio).gaussian_expectation()))


# ---------------------------------------------------------------------------
# Closed-form expressions, orders 1..6
# ---------------------------------------------------------------------------

def _theta_derivative_polys(spec: PhaseSpec | None, up_to: int) -> list[ComplexPolynomial]:
    """[theta', theta'', ...] as polynomials, up_to entries."""
    if spec is None:
        first = ComplexPolynomial.zero()
    else:
        first = ComplexPolynomial(spec.derivative_poly().astype(complex))
    out = [first]
    for _ in range(up_to - 1):
        out.append(out[-1].derivative())
    return out


# Ratios of sqrt-density derivatives to sqrt-density, as polynomials in x.
_SQRT_DENS_RATIO_1 = ComplexPolynomial((0.0, -0.5))                  # s'/s
_SQRT_DENS_RATIO_2 = ComplexPolynomial((-0.5, 0.0, 0.25))            # s''/s
_SQRT_DENS_RATIO_3 = ComplexPolynomial((0.0, 0.75, 0.0, -0.125))     # s'''/s


def closed_form_correction(order: int, params: PacketParams, spec: PhaseSpec | None) -> float:
    """Closed-form correction expression for series orders 1..6.

    Orders 1 and 2 coincide with the generic coefficients.  Orders 3..6 are
    the published reduced forms that keep only pure-phase and pure-density
    terms; they drop envelope-phase cross couplings and therefore differ from
    the generic definitions away from special phase configurations (the
    second-order double-root family makes the order-3 cross terms cancel).
    Even orders are normalised by q0/sigma like the generic even family.
    """
    if order not in (1, 2, 3, 4, 5, 6):
        raise ValueError("closed forms exist for orders 1..6 only")
    u = params.offset_ratio
    t1, t2, t3, t4, t5 = _theta_derivative_polys(spec, 5)

    if order == 1:
        body = t1
    elif order == 2:
        body = t1 * t1 + ComplexPolynomial((0.0, 0.0, 0.25))
    elif order == 3:
        body = t3 - t1 * t1 * t1
    elif order == 4:
        body = _SQRT_DENS_RATIO_2 * _SQRT_DENS_RATIO_2 + t2 * t2 + t1 * t1 * t1 * t1
    elif order == 5:
        t1sq = t1 * t1
        body = t5 + t1sq * t1sq * t1 - 10.0 * (t3 * t1sq) - 15.0 * (t1 * t2 * t2)
    else:
        t1sq = t1 * t1
        t1cu = t1sq * t1
        body = (
            _SQRT_DENS_RATIO_3 * _SQRT_DENS_RATIO_3
            - 6.0 * (t2 * t1 * _SQRT_DENS_RATIO_3)
            + 9.0 * (t2 * t2 * t1sq)
            + t3 * t3
            + t1cu * t1cu
            + 2.0 * (t3 * t1cu)
        )

    weighted = _weighted(body.real_part(), u)
    value = float(np.real(weighted.gaussian_expectation()))
    if order % 2 == 1:
        return value
    if u == 0.0:
        if value == 0.0:
            return 0.0
        raise DegenerateInputError("even-order closed form is normalised by q0/sigma")
    return value / u


# ---------------------------------------------------------------------------
# Series assembly and super-asymptotic truncation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrectionSeries:
    """Ordered series terms with optimal-truncation metadata.

    ``terms`` holds (order_in_hbar, value) pairs, the value being the term's
    contribution to tau_quant / tau_class; the zeroth term is exactly 1.
    ``truncation_index`` is the order of the smallest nonzero term among the
    computed ones; the summed value includes terms up to and including it.
    ``truncation_error_estimate`` is that term's magnitude (in time units),
    floored by the float roundoff of the coefficient arithmetic: an error
    claim below the representable precision of the assembled sum would be
    meaningless.
    """

    terms: tuple[tuple[int, float], ...]
    truncation_index: int
    truncation_error_estimate: float

    def partial_sum(self) -> float:
        return math.fsum(v for m, v in self.terms if m <= self.truncation_index)


def correction_series(
    params: PacketParams,
    spec: PhaseSpec | None,
    max_order: int = 8,
) -> CorrectionSeries:
    """Series terms up to ``max_order`` with super-asymptotic truncation.

    Raises
    ------
    DegenerateInputError
        For q0 = 0 (the series is normalised by the classical time).
    SeriesDivergenceError
        If the first nonzero correction already reaches the zeroth term:
        the expansion parameter is too small, use the exact route.
    """
    if max_order < 0:
        raise ValueError("max_order must be nonnegative")
    u = params.offset_ratio
    if u == 0.0:
        raise DegenerateInputError("series normalisation requires q0 != 0")
    kappa = params.k_sigma

    terms: list[tuple[int, float]] = []
    noise = 0.0
    for order in range(max_order + 1):
        n, is_even = divmod(order, 2)[0], order % 2 == 0
        if is_even:
            plain, offset, bound = _even_parts(n, spec)
            coeff = plain + (offset / u if offset != 0.0 else 0.0)
            scale = (bound / abs(u) + abs(plain)) / kappa ** order
        else:
            p = derivative_polynomials(spec, order)[order]
            imp = p.imag_part()
            w = _weighted(imp, u)
            coeff = -((-1.0) ** n) * float(np.real(w.gaussian_expectation())) / u
            scale = w.gaussian_expectation_bound() / abs(u) / kappa ** order
        value = coeff / kappa ** order if is_even else coeff
        terms.append((order, value))
        noise += _EPS * scale

    nonzero = [(m, v) for m, v in terms if m > 0 and v != 0.0]
    if nonzero and abs(nonzero[0][1]) >= abs(terms[0][1]):
        raise SeriesDivergenceError(
            f"correction series grows from its first term at k*sigma = {kappa:g}; "
            "use the exact arrival-time evaluation",
            best_estimate=params.tau_class,
        )
    if nonzero:
        trunc_index = min(nonzero, key=lambda mv: abs(mv[1]))[0]
        smallest = min(abs(v) for _, v in nonzero)
    else:
        trunc_index, smallest = 0, 0.0

    tau_scale = abs(params.tau_class)
    estimate = max(smallest, 8.0 * noise) * tau_scale
    return CorrectionSeries(
        terms=tuple(terms),
        truncation_index=trunc_index,
        truncation_error_estimate=estimate,
    )


def asymptotic_arrival_time(
    params: PacketParams,
    spec: PhaseSpec | None = None,
    max_order: int | None = None,
) -> tuple[float, CorrectionSeries]:
    """Super-asymptotically truncated arrival-time expectation value.

    ``max_order=None`` scans orders 0..8 and truncates at the smallest
    nonzero term; an explicit ``max_order`` restricts the scan.
    """
    series = correction_series(params, spec, 8 if max_order is None else max_order)
    return params.tau_class * series.partial_sum(), series


# ---------------------------------------------------------------------------
# Exact evaluation of the kernel double integral
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactToaResult:
    value: float
    error_estimate: float
    imag_residue: float
    evaluations: int


def _poly_eval_longdouble(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for c in coeffs[::-1]:
        out = out * x + np.longdouble(c)
    return out


def _exact_pass(params: PacketParams, spec: PhaseSpec | None, nodes: int, max_phase: float):
    kappa = params.k_sigma
    u = params.offset_ratio
    dtheta = spec.derivative_poly() if spec is not None else np.zeros(0)
    theta = spec.value_poly() if spec is not None else np.zeros(0)
    degree = max(len(dtheta) - 1, 0)
    half_range = 12.0 + max(abs(u), float(degree))

    def rate(x):
        x = np.asarray(x, dtype=float)
        local = np.abs(_poly_eval_float(dtheta, x)) if len(dtheta) else np.zeros_like(x)
        return kappa + local + 2.0

    edges = numerics.panel_edges_by_rate(-half_range, half_range, rate, max_phase)
    x, w = numerics.gauss_panel_nodes(edges, nodes)  # (panels, nodes)

    # Total phase of g(x) = envelope(x) * exp(i*kappa*x), reduced mod 2*pi in
    # extended precision: at kappa*x ~ 2e3 rad the float64 product alone
    # carries ~4e-13 rad of quantisation, far above the quadrature error.
    xl = x.astype(np.longdouble)
    phase = _poly_eval_longdouble(theta, xl) + np.longdouble(kappa) * xl
    phase = np.mod(phase, 2.0 * np.longdouble(np.pi)).astype(float)
    env = (2.0 * math.pi) ** -0.25 * np.exp(-0.25 * x * x)
    g = env * np.exp(1j * phase)

    matrix = np.asarray(numerics.antiderivative_matrix(nodes))
    half_widths = 0.5 * (edges[1:] - edges[:-1])[:, None]

    def cumulative(values: np.ndarray) -> tuple[np.ndarray, complex]:
        panel_totals = np.sum(w * values, axis=1).astype(np.clongdouble)
        prefix = np.concatenate([[0.0 + 0.0j], np.cumsum(panel_totals)[:-1]])
        inner = half_widths * (values @ matrix.T)
        total = complex(np.sum(panel_totals))
        return prefix[:, None] + inner, total

    g0, t0 = cumulative(g)
    g1, t1 = cumulative(x * g)

    psi = (x + 2.0 * u) * (2.0 * g0 - t0) + (2.0 * g1 - t1)
    j_total = np.sum((w * np.conj(g)).astype(np.clongdouble) * psi.astype(np.clongdouble))
    j_total = complex(j_total)

    prefactor = params.mu * params.sigma**2 / params.hbar
    value = 0.25 * prefactor * j_total.imag
    residue = 0.25 * prefactor * abs(j_total.real)
    return value, residue, x.size


def _poly_eval_float(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for c in coeffs[::-1]:
        out = out * x + c
    return out


def exact_arrival_time_result(
    params: PacketParams,
    spec: PhaseSpec | None = None,
    nodes: int = 16,
) -> ExactToaResult:
    """Kernel double integral with an error estimate from grid refinement.

    The inner half-line integrals are rewritten exactly as cumulative
    antiderivatives of envelope * exp(i*k*sigma*x), evaluated panel-wise
    with a spectral integration matrix (panels no longer than half an
    oscillation period of the total local phase).  The outer integral reuses
    the same panels.  A second pass on twice-refined panels provides the
    error estimate.
    """
    coarse, _, n1 = _exact_pass(params, spec, nodes, math.pi)
    fine, residue, n2 = _exact_pass(params, spec, nodes + 4, 0.5 * math.pi)
    return ExactToaResult(
        value=fine,
        error_estimate=abs(fine - coarse),
        imag_residue=residue,
        evaluations=n1 + n2,
    )


def exact_arrival_time(params: PacketParams, spec: PhaseSpec | None = None) -> float:
    """Arrival-time expectation value from the defining double integral."""
    return exact_arrival_time_result(params, spec).value


# ---------------------------------------------------------------------------
# Leading correction factors
# ---------------------------------------------------------------------------

def leading_correction_no_phase(params: PacketParams) -> float:
    """Leading correction factor of the phase-free packet: 1/(4 (k*sigma)**2).

    Computed as the moment integral of the squared sqrt-density derivative
    divided by (k*sigma)**2; the closed value is exactly 1/4.
    """
    integrand = ComplexPolynomial((0.0, 0.0, 0.25))  # (d sqrt(weight)/dx)^2 / weight
    value = float(np.real(integrand.gaussian_expectation()))
    return value / params.k_sigma**2


def leading_correction_with_phase(params: PacketParams, spec: PhaseSpec) -> float:
    """Leading correction factor once the first two orders are cancelled.

    Requires the phase to satisfy the first- and second-order cancellation
    conditions to 1e-8 (raises InvalidPhaseError otherwise); evaluates the
    closed-form third-order integrand (offset-weighted curvature minus cubed
    slope) scaled by (sigma/q0) / (k*sigma)**3.
    """
    if spec is None:
        raise InvalidPhaseError("a phase specification is required")
    u = params.offset_ratio
    if u == 0.0:
        raise DegenerateInputError("leading phased factor is normalised by q0/sigma")
    r1 = correction_coefficient_odd(0, params, spec)
    t1 = _theta_derivative_polys(spec, 1)[0]
    body2 = t1 * t1 + ComplexPolynomial((0.0, 0.0, 0.25))
    r2 = float(np.real(_weighted(body2.real_part(), u).gaussian_expectation()))
    if abs(r1) > _CANCEL_TOL or abs(r2) > _CANCEL_TOL:
        raise InvalidPhaseError(
            f"phase does not cancel the first two orders (residuals {r1:.2e}, {r2:.2e})"
        )
    return closed_form_correction(3, params, spec) / u / params.k_sigma**3
