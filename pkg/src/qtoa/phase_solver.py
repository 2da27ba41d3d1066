"""Parity phase bases and the coefficient conditions that cancel corrections.

The two linear conditions (zero mean and zero position-weighted mean of
``density * theta'``) hold by construction for every parity basis term.  The
first nonlinear condition -- vanishing of the second-order correction -- is
evaluated here as an exact Gaussian-moment integral; the printed closed-form
quadratic is used only as a cross-check of that evaluation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import DegenerateInputError, PhaseSolveInfeasible
from .wavepacket import PhaseBasisTerm, PhaseSpec

__all__ = [
    "SolveReport",
    "build_parity_phase",
    "build_combined_phase",
    "condition_residuals",
    "second_order_residual",
    "third_order_residual",
    "solve_a_from_b",
    "solve_phase_general",
]


def build_parity_phase(parity: str, l: int, m: int, coefficient: float = 1.0) -> PhaseSpec:
    """Single-term parity phase; raises ValueError for l == m."""
    return PhaseSpec(((coefficient, PhaseBasisTerm(parity, l, m)),))


def build_combined_phase(a: float, b: float, l: int = 0, m: int = 1) -> PhaseSpec:
    """Odd-plus-even combination a * theta_odd + b * theta_even.

    With the default (l, m) = (0, 1) this is the two-parameter family whose
    coefficients the second-order solvers determine.
    """
    return PhaseSpec(
        (
            (a, PhaseBasisTerm("odd", l, m)),
            (b, PhaseBasisTerm("even", l, m)),
        )
    )


# ---------------------------------------------------------------------------
# Condition integrals (exact Gaussian moments throughout)
# ---------------------------------------------------------------------------

def _weighted_by(coeffs: np.ndarray, u: float) -> np.ndarray:
    """(x + u) * poly for ascending monomial coefficients."""
    out = np.zeros(len(coeffs) + 1)
    out[1:] += coeffs
    out[: len(coeffs)] += u * coeffs
    return out


def condition_residuals(spec: PhaseSpec | None) -> tuple[float, float]:
    """Residuals of the two linear phase conditions.

    Returns (integral density * theta' dx, integral x * density * theta' dx);
    both vanish identically for parity-basis phases.
    """
    if spec is None:
        return 0.0, 0.0
    dtheta = spec.derivative_poly()
    if not len(dtheta):
        return 0.0, 0.0
    r1 = numerics.gaussian_expectation(dtheta)
    r2 = numerics.gaussian_expectation(np.concatenate([[0.0], dtheta]))
    return float(np.real(r1)), float(np.real(r2))


def _second_order_poly(dtheta: np.ndarray, u: float) -> np.ndarray:
    """(x+u) * (theta'(x)**2 + x**2/4), ascending coefficients."""
    if len(dtheta):
        sq = np.convolve(dtheta, dtheta)
    else:
        sq = np.zeros(1)
    body = np.zeros(max(len(sq), 3))
    body[: len(sq)] += sq
    body[2] += 0.25  # (d sqrt(density)/dx)**2 = (x**2/4) * density
    return _weighted_by(body, u)


def second_order_residual(a: float, b: float, u: float) -> float:
    """Second-order correction integral for the (l=0, m=1) combined phase.

    Evaluates, by exact moments, the offset-weighted integral of
    ``theta'(x)**2 * density + (d sqrt(density)/dx)**2`` for
    theta = a * theta_odd + b * theta_even.  Zero means the second-order
    term of the arrival-time expansion vanishes.  For a = b = 0 the value
    reduces to the pure density term u/4.
    """
    spec = build_combined_phase(a, b)
    poly = _second_order_poly(spec.derivative_poly(), u)
    return float(np.real(numerics.gaussian_expectation(poly)))


def second_order_residual_closed_form(a: float, b: float, u: float) -> float:
    """Printed quadratic for the same condition; cross-check only."""
    return (
        64.0 * math.sqrt(3.0) * math.pi * a * b
        + 16.0 * math.pi * u * (a * a + 4.0 * b * b)
        + u / 4.0
    )


def _third_order_poly(dtheta: np.ndarray, u: float) -> np.ndarray:
    """(x+u) * (theta'''(x) - theta'(x)**3), ascending coefficients."""
    # theta''' obtained from theta' by differentiating twice
    cur = np.asarray(dtheta, dtype=float)
    for _ in range(2):
        cur = cur[1:] * np.arange(1, len(cur), dtype=float) if len(cur) > 1 else np.zeros(0)
    cube = np.convolve(np.convolve(dtheta, dtheta), dtheta) if len(dtheta) else np.zeros(1)
    body = np.zeros(max(len(cur), len(cube), 1))
    if len(cur):
        body[: len(cur)] += cur
    body[: len(cube)] -= cube
    return _weighted_by(body, u)


def third_order_residual(spec: PhaseSpec | None, u: float) -> float:
    """Closed-form third-order condition integral (offset-weighted)."""
    dtheta = spec.derivative_poly() if spec is not None else np.zeros(0)
    poly = _third_order_poly(dtheta, u)
    return float(np.real(numerics.gaussian_expectation(poly)))


# ---------------------------------------------------------------------------
# Solving a from b (second-order cancellation)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolveReport:
    """Outcome of the second-order coefficient solve.

    ``a_plus``/``a_minus`` are dimensionless coefficients (physical value
    times sigma**2); ``alpha_plus``/``alpha_minus`` convert back to the
    physical normalisation of the input ``b``.  Residuals are the absolute
    values of the condition integrals for the preferred root.
    """

    a_plus: float | None
    a_minus: float | None
    discriminant: float
    feasible: bool
    residual_cond1: float
    residual_cond2: float
    residual_cond3: float
    method: str
    b: float
    sigma: float
    q0: float

    @property
    def alpha_plus(self) -> float | None:
        return None if self.a_plus is None else self.a_plus / self.sigma**2

    @property
    def alpha_minus(self) -> float | None:
        return None if self.a_minus is None else self.a_minus / self.sigma**2

    @property
    def preferred(self) -> float | None:
        """Root of smaller magnitude (smaller phase, smaller higher orders)."""
        roots = [r for r in (self.a_plus, self.a_minus) if r is not None]
        if not roots:
            return None
        return min(roots, key=abs)


def _report(a_roots, b_dl, sigma, q0, disc, feasible, method) -> SolveReport:
    if a_roots:
        a_plus, a_minus = max(a_roots), min(a_roots)
        pref = min(a_roots, key=abs)
        spec = build_combined_phase(pref, b_dl)
        r1, r2 = condition_residuals(spec)
        r3 = abs(second_order_residual(pref, b_dl, q0 / sigma))
    else:
        a_plus = a_minus = None
        r1 = r2 = r3 = math.inf
    return SolveReport(
        a_plus=a_plus,
        a_minus=a_minus,
        discriminant=disc,
        feasible=feasible,
        residual_cond1=abs(r1),
        residual_cond2=abs(r2),
        residual_cond3=r3,
        method=method,
        b=b_dl,
        sigma=sigma,
        q0=q0,
    )


def solve_a_from_b(
    b: float,
    sigma: float = 1.0,
    q0: float = -1.0,
    method: str = "closed_form",
) -> SolveReport:
    """Odd-basis coefficient(s) cancelling the second-order correction.

    Parameters
    ----------
    b : float
        Even-basis coefficient in the same normalisation as ``sigma``: the
        dimensionless coefficient is ``b * sigma**2`` (pass sigma = 1 to work
        directly in dimensionless form).
    method : str
        "closed_form" solves the quadratic exactly (requires q0 != 0);
        "numeric" brackets sign changes of the moment-evaluated condition and
        polishes with Newton steps.  Both agree to better than 1e-8 relative
        wherever both apply.

    Returns
    -------
    SolveReport
        ``feasible`` is False (and no roots are reported) when the
        discriminant is negative or sigma**2 <= q0**2 / 3.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if method not in ("closed_form", "numeric"):
        raise ValueError("method must be 'closed_form' or 'numeric'")
    b_dl = b * sigma * sigma
    u = q0 / sigma
    terms = (
        768.0 * math.pi * b_dl**2 * sigma**2,
        -256.0 * math.pi * b_dl**2 * q0**2,
        -(q0**2),
    )
    disc = math.fsum(terms)
    # Double roots sit exactly on disc = 0; do not let summation roundoff of
    # the O(|terms|) cancellation flip their sign.
    disc_tol = 8.0 * np.finfo(float).eps * sum(abs(t) for t in terms)
    disc_eff = 0.0 if abs(disc) <= disc_tol else disc
    width_ok = sigma * sigma > q0 * q0 / 3.0
    feasible = disc_eff >= 0.0 and width_ok

    if method == "closed_form":
        if q0 == 0.0:
            raise DegenerateInputError(
                "closed-form solve divides by q0; use method='numeric' for q0 = 0"
            )
        if not feasible:
            return _report([], b_dl, sigma, q0, disc, False, method)
        root = math.sqrt(math.pi * disc_eff) / sigma  # dimensionless discriminant root
        a1 = (-16.0 * math.sqrt(3.0) * math.pi * b_dl + root) / (8.0 * math.pi * u)
        a2 = (-16.0 * math.sqrt(3.0) * math.pi * b_dl - root) / (8.0 * math.pi * u)
        return _report([a1, a2], b_dl, sigma, q0, disc, True, method)

    # Numeric path: bracket + bisect + Newton on the moment evaluation.
    if not feasible:
        # q0 = 0 keeps the condition solvable (a * b = 0) even though the
        # closed-form inequalities are framed for q0 != 0.
        if q0 != 0.0:
            return _report([], b_dl, sigma, q0, disc, False, method)
    roots = _numeric_roots(b_dl, u)
    return _report(roots, b_dl, sigma, q0, disc, feasible or q0 == 0.0, method)


def _numeric_roots(b_dl: float, u: float) -> list[float]:
    func = lambda a: second_order_residual(a, b_dl, u)
    if u == 0.0:
        # Condition reduces to a linear multiple of a*b: a = 0 always works.
        return [0.0]
    # Acceptance scale: roundoff floor of the moment evaluation at unit a.
    zero_tol = 64.0 * np.finfo(float).eps * max(
        1.0, abs(func(1.0)) + abs(func(-1.0)) + abs(func(0.0))
    )
    span = abs(16.0 * math.sqrt(3.0) * b_dl / u) + abs(u) + 2.0
    grid = np.linspace(-span, span, 801)
    vals = np.array([func(a) for a in grid])
    roots: list[float] = []

    def polish(a: float) -> float:
        # Newton with a centred-difference slope; the condition is exactly
        # quadratic in a, so a couple of steps reach roundoff.
        for _ in range(8):
            h = 1e-6 * (1.0 + abs(a))
            deriv = (func(a + h) - func(a - h)) / (2.0 * h)
            if deriv == 0.0:
                break
            step = func(a) / deriv
            a -= step
            if abs(step) <= 1e-15 * (1.0 + abs(a)):
                break
        return float(a)

    for i in range(len(grid) - 1):
        f0, f1 = vals[i], vals[i + 1]
        if f0 == 0.0:
            roots.append(float(grid[i]))
            continue
        if f0 * f1 < 0.0:
            lo, hi, flo = grid[i], grid[i + 1], f0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fm = func(mid)
                if flo * fm <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            roots.append(polish(0.5 * (lo + hi)))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))

    if not roots:
        # No sign change: look for a tangential double root at the extremum
        # of the quadratic (slope sign change), accept if |f| is at the
        # roundoff floor there.
        i_min = int(np.argmin(np.abs(vals)))
        a = float(grid[i_min])
        for _ in range(60):
            h = 1e-6 * (1.0 + abs(a))
            d1 = (func(a + h) - func(a - h)) / (2.0 * h)
            d2 = (func(a + h) - 2.0 * func(a) + func(a - h)) / (h * h)
            if d2 == 0.0:
                break
            step = d1 / d2
            a -= step
            if abs(step) <= 1e-12 * (1.0 + abs(a)):
                break
        if abs(func(a)) <= zero_tol:
            roots.append(float(a))

    # Merge near-duplicates from tangential (double) roots.
    merged: list[float] = []
    for r in sorted(roots):
        if not merged or abs(r - merged[-1]) > 1e-7 * (1.0 + abs(r)):
            merged.append(r)
    return merged


# ---------------------------------------------------------------------------
# General N-order solve
# ---------------------------------------------------------------------------

_SEED_VALUES = (-1.0, -0.1, 0.1, 1.0)
_NEWTON_DAMPING = 0.5
_NEWTON_MAX_ITER = 100
_NEWTON_TOL = 1e-10


def _residual_vector(coeffs: np.ndarray, basis: list[PhaseBasisTerm], n_target: int, u: float) -> np.ndarray:
    spec = PhaseSpec(tuple((c, t) for c, t in zip(coeffs, basis)))
    dtheta = spec.derivative_poly()
    out = []
    if n_target >= 2:
        out.append(np.real(numerics.gaussian_expectation(_second_order_poly(dtheta, u))))
    if n_target >= 3:
        out.append(np.real(numerics.gaussian_expectation(_third_order_poly(dtheta, u))))
    return np.asarray(out, dtype=float)


def solve_phase_general(
    n_target: int,
    basis: list[PhaseBasisTerm] | tuple[PhaseBasisTerm, ...],
    offset_ratio: float,
) -> PhaseSpec:
    """Coefficients making the leading corrections vanish up to order n_target.

    The two linear conditions hold automatically for any parity basis, so
    n_target = 1 needs no solving; n_target = 2 additionally cancels the
    second-order term, n_target = 3 also the closed-form third-order term.
    A damped Newton iteration (factor 0.5, 100-iteration cap, residual
    infinity-norm < 1e-10) with a finite-difference Jacobian runs from the
    deterministic seed grid {-1, -0.1, 0.1, 1}^len(basis); the winner is the
    converged candidate with the lowest residual, ties broken by
    lexicographic coefficient order.

    Raises
    ------
    PhaseSolveInfeasible
        If no start converges; carries the best residual vector seen.
    """
    if n_target not in (1, 2, 3):
        raise ValueError("n_target must be 1, 2 or 3")
    basis = list(basis)
    if not basis:
        raise ValueError("basis must not be empty")
    n_conditions = max(0, n_target - 1)
    if len(basis) < n_conditions:
        raise ValueError(
            f"basis size {len(basis)} is smaller than the number of active conditions {n_conditions}"
        )

    if n_conditions == 0:
        return PhaseSpec(tuple((1.0, t) for t in basis))

    u = float(offset_ratio)
    best: tuple[float, tuple[float, ...], np.ndarray] | None = None
    for seed in itertools.product(_SEED_VALUES, repeat=len(basis)):
        coeffs = np.asarray(seed, dtype=float)
        converged = False
        for _ in range(_NEWTON_MAX_ITER):
            res = _residual_vector(coeffs, basis, n_target, u)
            if np.max(np.abs(res)) < _NEWTON_TOL:
                converged = True
                break
            jac = np.empty((len(res), len(coeffs)))
            for j in range(len(coeffs)):
                h = 1e-7 * (1.0 + abs(coeffs[j]))
                bumped = coeffs.copy()
                bumped[j] += h
                jac[:, j] = (_residual_vector(bumped, basis, n_target, u) - res) / h
            step, *_ = np.linalg.lstsq(jac, res, rcond=None)
            if not np.all(np.isfinite(step)):
                break
            coeffs = coeffs - _NEWTON_DAMPING * step
        res = _residual_vector(coeffs, basis, n_target, u)
        score = float(np.max(np.abs(res))) if len(res) else 0.0
        key = (score if converged else math.inf, tuple(coeffs))
        if best is None or key < (best[0], best[1]):
            if converged and score < _NEWTON_TOL:
                best = (score, tuple(coeffs), res)
            elif best is None:
                best = (math.inf, tuple(coeffs), res)

    if best is None or not math.isfinite(best[0]):
        raise PhaseSolveInfeasible(
            f"no real coefficients found for n_target={n_target} at offset ratio {u:g}",
            best_residuals=None if best is None else best[2],
            best_coefficients=None if best is None else best[1],
        )
    return PhaseSpec(tuple((c, t) for c, t in zip(best[1], basis)))
