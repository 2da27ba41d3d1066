"""Special functions, Gaussian moments, polynomials and quadrature engines.

Everything in this module is pure and deterministic; no shared mutable state
beyond immutable caches, so it is safe to call from many threads at once.

Conventions
-----------
The standard Gaussian weight used throughout is

    gauss_weight(x) = (2*pi)**-0.5 * exp(-x**2 / 2)

All "exact" integrals of ``polynomial * gauss_weight`` are evaluated through
:func:`gaussian_moment` (odd moments vanish, even moments are double
factorials); adaptive quadrature is the fallback and the cross-check.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalConvergenceError

__all__ = [
    "QuadratureResult",
    "ComplexPolynomial",
    "hermite_eval",
    "hermite_coefficients",
    "double_factorial",
    "gaussian_moment",
    "gauss_weight",
    "gaussian_expectation",
    "gaussian_expectation_bound",
    "integrate",
    "integrate_oscillatory",
    "gauss_panel_nodes",
    "panel_edges_by_rate",
    "antiderivative_matrix",
]

# Default truncation radius for unbounded domains.  The Gaussian weight at
# |x| = 12 is below 6e-32, so for Gaussian-type integrands the truncation
# error is negligible against every tolerance used in this package.  Callers
# integrating wider envelopes (large packet offset, high-degree phase) must
# extend it.
DEFAULT_TAIL_CUT = 12.0

_DOUBLE_FACTORIAL_OVERFLOW = 300


@dataclass(frozen=True)
class QuadratureResult:
    """Value, error estimate and cost of a numerical integration."""

    value: complex
    error_estimate: float
    evaluations: int

    def __post_init__(self):
        if self.error_estimate < 0:
            raise ValueError("error_estimate must be nonnegative")

    @property
    def real(self) -> float:
        return float(np.real(self.value))


# ---------------------------------------------------------------------------
# Hermite polynomials (physicists' convention)
# ---------------------------------------------------------------------------

def hermite_eval(n: int, x):
    """Evaluate the physicists' Hermite polynomial H_n at ``x``.

    Uses the three-term recurrence H_0 = 1, H_1 = 2x,
    H_{n+1} = 2x H_n - 2n H_{n-1}.  Works on scalars and arrays.
    """
    if n < 0:
        raise ValueError("Hermite order must be nonnegative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = 2.0 * x
    for j in range(1, n):
        h, h_prev = 2.0 * x * h - 2.0 * j * h_prev, h
    return h if h.ndim else float(h)


@lru_cache(maxsize=None)
def hermite_coefficients(n: int) -> tuple[float, ...]:
    """Monomial coefficients (ascending powers) of H_n."""
    if n < 0:
        raise ValueError("Hermite order must be nonnegative")
    if n == 0:
        return (1.0,)
    if n == 1:
        return (0.0, 2.0)
    prev = np.array([1.0])
    cur = np.array([0.0, 2.0])
    for j in range(1, n):
        nxt = np.zeros(j + 2)
        nxt[1:] = 2.0 * cur
        nxt[: j] -= 2.0 * j * prev  # len(prev) == j
        prev, cur = cur, nxt
    return tuple(cur)


# ---------------------------------------------------------------------------
# Gaussian moments
# ---------------------------------------------------------------------------

def double_factorial(k: int) -> float:
    """(k)!! in floating point; k = -1 and k = 0 give 1."""
    if k < -1:
        raise ValueError("double factorial needs k >= -1")
    if k > _DOUBLE_FACTORIAL_OVERFLOW:
        raise OverflowError(
            f"double factorial of {k} exceeds the representable range"
        )
    result = 1.0
    while k > 1:
        result *= k
        k -= 2
    return result


def gaussian_moment(k: int) -> float:
    """Moment ``integral x**k gauss_weight(x) dx``: 0 for odd k, (k-1)!! for even k."""
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    if k % 2 == 1:
        return 0.0
    return double_factorial(k - 1)


def gauss_weight(x):
    """Standard Gaussian density (2*pi)**-0.5 * exp(-x**2/2)."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return out if out.ndim else float(out)


def gaussian_expectation(coefficients: Sequence[complex]) -> complex:
    """Exact ``integral poly(x) gauss_weight(x) dx`` for ascending coefficients."""
    total = 0.0 + 0.0j
    for k in range(0, len(coefficients), 2):
        c = coefficients[k]
        if c != 0:
            total += c * gaussian_moment(k)
    if total.imag == 0.0:
        return total.real
    return total


def gaussian_expectation_bound(coefficients: Sequence[complex]) -> float:
    """Sum of |c_k| * moment(k): the cancellation scale of the exact sum.

    Multiplying by machine epsilon gives an honest floor on the roundoff of
    :func:`gaussian_expectation` for the same coefficients.
    """
    return float(
        sum(abs(coefficients[k]) * gaussian_moment(k) for k in range(0, len(coefficients), 2))
    )


# ---------------------------------------------------------------------------
# Complex polynomials
# ---------------------------------------------------------------------------

class ComplexPolynomial:
    """Immutable polynomial with complex coefficients (index = power of x).

    The zero polynomial has an empty coefficient tuple; otherwise the last
    stored coefficient is nonzero, so ``degree`` is the index of the last
    nonzero coefficient.  Arithmetic is exact over the coefficient field up
    to floating rounding.
    """

    __slots__ = ("coefficients",)

    def __init__(self, coefficients: Sequence[complex] = ()):
        coeffs = [complex(c) for c in coefficients]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coefficients", tuple(coeffs))

    def __setattr__(self, *_):
        raise AttributeError("ComplexPolynomial is immutable")

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls) -> "ComplexPolynomial":
        return cls(())

    @classmethod
    def one(cls) -> "ComplexPolynomial":
        return cls((1.0,))

    @classmethod
    def x(cls) -> "ComplexPolynomial":
        return cls((0.0, 1.0))

    # -- structure ---------------------------------------------------------
    @property
    def degree(self) -> int:
        return max(len(self.coefficients) - 1, 0)

    def is_zero(self) -> bool:
        return not self.coefficients

    def __eq__(self, other) -> bool:
        return isinstance(other, ComplexPolynomial) and self.coefficients == other.coefficients

    def __hash__(self) -> int:
        return hash(self.coefficients)

    def __repr__(self) -> str:
        return f"ComplexPolynomial({list(self.coefficients)!r})"

    # -- algebra -----------------------------------------------------------
    def __add__(self, other: "ComplexPolynomial") -> "ComplexPolynomial":
        a, b = self.coefficients, other.coefficients
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] += c
        return ComplexPolynomial(out)

    def __neg__(self) -> "ComplexPolynomial":
        return ComplexPolynomial([-c for c in self.coefficients])

    def __sub__(self, other: "ComplexPolynomial") -> "ComplexPolynomial":
        return self + (-other)

    def __mul__(self, other) -> "ComplexPolynomial":
        if isinstance(other, ComplexPolynomial):
            if self.is_zero() or other.is_zero():
                return ComplexPolynomial.zero()
            out = np.convolve(
                np.asarray(self.coefficients, dtype=complex),
                np.asarray(other.coefficients, dtype=complex),
            )
            return ComplexPolynomial(out)
        return ComplexPolynomial([other * c for c in self.coefficients])

    __rmul__ = __mul__

    def derivative(self) -> "ComplexPolynomial":
        return ComplexPolynomial(
            [k * c for k, c in enumerate(self.coefficients)][1:]
        )

    def conjugate(self) -> "ComplexPolynomial":
        return ComplexPolynomial([c.conjugate() for c in self.coefficients])

    def real_part(self) -> "ComplexPolynomial":
        return ComplexPolynomial([c.real for c in self.coefficients])

    def imag_part(self) -> "ComplexPolynomial":
        return ComplexPolynomial([c.imag for c in self.coefficients])

    def shift_up(self, powers: int = 1) -> "ComplexPolynomial":
        """Multiply by x**powers."""
        if self.is_zero():
            return self
        return ComplexPolynomial((0.0,) * powers + self.coefficients)

    def __call__(self, x):
        if self.is_zero():
            x = np.asarray(x)
            out = np.zeros_like(x, dtype=complex)
            return out if out.ndim else complex(out)
        x = np.asarray(x)
        out = np.zeros_like(x, dtype=complex)
        for c in reversed(self.coefficients):
            out = out * x + c
        return out if out.ndim else complex(out)

    # -- Gaussian integrals -------------------------------------------------
    def gaussian_expectation(self) -> complex:
        """Exact integral of self(x) * gauss_weight(x) over the real line."""
        return gaussian_expectation(self.coefficients)

    def gaussian_expectation_bound(self) -> float:
        return gaussian_expectation_bound(self.coefficients)


# ---------------------------------------------------------------------------
# Panel machinery shared by the quadrature engines
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _leggauss(n: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return tuple(nodes), tuple(weights)


def gauss_panel_nodes(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on each panel defined by ``edges``.

    Returns arrays of shape (panels, n).
    """
    ref_x, ref_w = (np.asarray(a) for a in _leggauss(n))
    a = np.asarray(edges[:-1])[:, None]
    b = np.asarray(edges[1:])[:, None]
    half = 0.5 * (b - a)
    return a + half * (ref_x[None, :] + 1.0), half * ref_w[None, :]


def panel_edges_by_rate(
    a: float,
    b: float,
    rate: Callable[[np.ndarray], np.ndarray],
    max_phase: float = math.pi,
) -> np.ndarray:
    """Panel edges on [a, b] so the local phase change per panel <= max_phase.

    ``rate(x)`` is the local oscillation rate in radians per unit length; it
    is sampled at both candidate panel ends and the larger value wins, which
    keeps the sizing conservative for monotonically growing rates.
    """
    if not b > a:
        raise ValueError("need b > a")
    edges = [a]
    x = a
    # Guard: never fewer than 4 panels, never more than ~2e6.
    min_step = (b - a) / 2_000_000
    max_step = (b - a) / 4
    while x < b:
        r = float(max(rate(np.asarray([x]))[0], 1e-12))
        h = min(max_phase / r, max_step)
        r2 = float(rate(np.asarray([min(x + h, b)]))[0])
        if r2 > r:
            h = min(max_phase / r2, max_step)
        h = max(h, min_step)
        x = min(x + h, b)
        edges.append(x)
    edges[-1] = b
    return np.asarray(edges)


@lru_cache(maxsize=None)
def antiderivative_matrix(n: int) -> tuple[tuple[float, ...], ...]:
    """Spectral integration matrix on the n-point Gauss-Legendre grid.

    M maps samples f(x_i) on [-1, 1] to antiderivative samples
    F(x_i) = integral_{-1}^{x_i} f, exactly for polynomials of degree < n.
    """
    nodes, _ = (np.asarray(v) for v in _leggauss(n))
    vand = np.polynomial.legendre.legvander(nodes, n - 1)          # (n, n)
    anti = np.zeros((n, n))
    for j in range(n):
        basis = np.zeros(n)
        basis[j] = 1.0
        coeffs = np.polynomial.legendre.legint(basis, lbnd=-1.0)
        anti[:, j] = np.polynomial.legendre.legval(nodes, coeffs)
    m = anti @ np.linalg.inv(vand)
    return tuple(map(tuple, m))


# ---------------------------------------------------------------------------
# Adaptive quadrature
# ---------------------------------------------------------------------------

def _clip_domain(a: float, b: float, tail_cut: float) -> tuple[float, float]:
    lo = -tail_cut if math.isinf(a) else a
    hi = tail_cut if math.isinf(b) else b
    if not hi > lo:
        raise ValueError("integration domain is empty after tail truncation")
    return lo, hi


def _gauss_eval(f, a: float, b: float, n: int) -> tuple[complex, int]:
    ref_x, ref_w = (np.asarray(v) for v in _leggauss(n))
    half = 0.5 * (b - a)
    x = a + half * (ref_x + 1.0)
    vals = np.asarray(f(x))
    return half * complex(np.sum(ref_w * vals)), x.size


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float = -math.inf,
    b: float = math.inf,
    tol: float = 1e-10,
    *,
    tail_cut: float = DEFAULT_TAIL_CUT,
    nodes: int = 15,
    max_panels: int = 4096,
) -> QuadratureResult:
    """Adaptive Gauss-Legendre quadrature with an embedded error estimate.

    Each panel's error is estimated by comparing its single-rule value with
    the sum over its two halves; the worst panel is split until the summed
    estimate is below ``tol``.  Unbounded endpoints are truncated at
    ``tail_cut`` (the integrand must decay at least Gaussian-fast there).

    Parameters
    ----------
    f : callable
        Vectorized real- or complex-valued integrand.
    a, b : float
        Domain endpoints, possibly infinite.
    tol : float
        Absolute tolerance on the summed per-panel error estimate.

    Raises
    ------
    NumericalConvergenceError
        If the panel budget is exhausted; carries the best estimate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = _clip_domain(a, b, tail_cut)

    evaluations = 0

    def refine(lo_, hi_):
        nonlocal evaluations
        whole, n1 = _gauss_eval(f, lo_, hi_, nodes)
        mid = 0.5 * (lo_ + hi_)
        left, n2 = _gauss_eval(f, lo_, mid, nodes)
        right, n3 = _gauss_eval(f, mid, hi_, nodes)
        evaluations += n1 + n2 + n3
        better = left + right
        return better, abs(whole - better)

    # Seed with a handful of panels so localized structure is not missed.
    seed_edges = np.linspace(lo, hi, 9)
    heap: list[tuple[float, int, float, float, complex, float]] = []
    counter = 0
    for lo_, hi_ in zip(seed_edges[:-1], seed_edges[1:]):
        val, err = refine(lo_, hi_)
        heapq.heappush(heap, (-err, counter, lo_, hi_, val, err))
        counter += 1

    while True:
        total_err = sum(item[5] for item in heap)
        if total_err <= tol:
            break
        if len(heap) >= max_panels:
            best = sum(item[4] for item in heap)
            raise NumericalConvergenceError(
                f"quadrature did not reach tol={tol:g} within {max_panels} panels",
                best_estimate=best,
                error_estimate=total_err,
            )
        _, _, lo_, hi_, _, _ = heapq.heappop(heap)
        mid = 0.5 * (lo_ + hi_)
        for seg in ((lo_, mid), (mid, hi_)):
            val, err = refine(*seg)
            heapq.heappush(heap, (-err, counter, seg[0], seg[1], val, err))
            counter += 1

    value = sum(item[4] for item in heap)
    err = sum(item[5] for item in heap)
    if abs(value.imag) == 0.0:
        value = value.real
    return QuadratureResult(value=value, error_estimate=float(err), evaluations=evaluations)


def integrate_oscillatory(
    f: Callable[[np.ndarray], np.ndarray],
    kappa: float,
    a: float = -math.inf,
    b: float = math.inf,
    tol: float = 1e-9,
    *,
    tail_cut: float = DEFAULT_TAIL_CUT,
    nodes: int = 12,
    max_refinements: int = 10,
    rate: Callable[[np.ndarray], np.ndarray] | None = None,
) -> QuadratureResult:
    """Quadrature for integrands carrying an exp(i*kappa*u) factor.

    The domain is cut into panels no longer than pi/|kappa| (so at most half
    an oscillation period per panel), each integrated with a fixed
    Gauss-Legendre rule.  The panel count is doubled until two successive
    passes agree within ``tol``; their difference is the error estimate.

    ``rate`` optionally supplies a *local* oscillation rate (rad per unit
    length) that overrides the constant |kappa|, for integrands whose phase
    is steeper than the carrier (e.g. polynomial chirps).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = _clip_domain(a, b, tail_cut)

    base_rate = max(abs(kappa), 1.0)
    if rate is None:
        edges = np.linspace(lo, hi, max(4, math.ceil((hi - lo) * base_rate / math.pi)) + 1)
    else:
        edges = panel_edges_by_rate(lo, hi, lambda x: np.maximum(rate(x), base_rate))

    evaluations = 0

    def composite(edges_: np.ndarray) -> complex:
        nonlocal evaluations
        x, w = gauss_panel_nodes(edges_, nodes)
        vals = np.asarray(f(x.ravel())).reshape(x.shape)
        evaluations += x.size
        return complex(np.sum(w * vals))

    prev = composite(edges)
    for _ in range(max_refinements):
        mids = 0.5 * (edges[:-1] + edges[1:])
        edges = np.sort(np.concatenate([edges, mids]))
        cur = composite(edges)
        err = abs(cur - prev)
        if err <= tol:
            value = cur
            if value.imag == 0.0:
                value = value.real
            return QuadratureResult(value=value, error_estimate=float(err), evaluations=evaluations)
        prev = cur
    raise NumericalConvergenceError(
        f"oscillatory quadrature did not reach tol={tol:g} after {max_refinements} refinements",
        best_estimate=prev,
        error_estimate=float(err),
    )
