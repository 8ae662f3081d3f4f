"""Energies, identities and bounds for the two-phase (double obstacle) problem.

The energy carries the nonsmooth term alpha_plus*(v)+ + alpha_minus*(v)- and
general Dirichlet data.  Dual fluxes live in the constrained set
div y + f in [-alpha_minus, alpha_plus]; outside it the dual energy is
-infinity and the corresponding operations raise.  The exact identities
mirror the classical case with the coincidence sets replaced by the sign
sets of the solution, weighted by the phase coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classical import ErrorBreakdown, ExactSolution, identity_tolerance
from .errors import AdmissibilityError, DomainError, FeasibilityError, IdentityError
from .fields import (
    Mesh1D,
    PiecewiseField,
    as_coefficient,
    divergence,
    friedrichs_constant,
    integrate,
    integrate_abs,
    merge_meshes,
    pos_neg_parts,
    sign_partition,
    sign_set,
    weighted_norm_sq,
)
from .sets import IntervalSet

BOUNDARY_REL = 1e-12


@dataclass(frozen=True)
class DoubleSpec:
    """Two-phase problem data: domain, A, f, positive phase weights, boundary values.

    The Dirichlet lift defaults to the affine function matching the boundary
    values; all energies depend on v only, so the lift choice is
    observationally irrelevant.
    """

    domain: Mesh1D
    diffusion: PiecewiseField | float
    load: PiecewiseField
    alpha_plus: float
    alpha_minus: float
    boundary: tuple[float, float]
    lift: PiecewiseField | None = None

    def __post_init__(self):
        as_coefficient(self.diffusion, self.domain)
        if not (self.alpha_plus > 0.0 and self.alpha_minus > 0.0):
            raise DomainError("phase weights must be positive")
        if self.lift is not None:
            if not (self.lift.continuous or self.lift.is_c0()):
                raise DomainError("the Dirichlet lift must be continuous")
            ga, gb = self.boundary
            scale = self.lift.scale
            if (
                abs(self.lift(self.domain.a) - ga) > BOUNDARY_REL * scale
                or abs(self.lift(self.domain.b) - gb) > BOUNDARY_REL * scale
            ):
                raise DomainError("the Dirichlet lift must match the boundary values")

    def coefficient(self) -> PiecewiseField:
        return as_coefficient(self.diffusion, self.domain)

    def lift_field(self) -> PiecewiseField:
        if self.lift is not None:
            return self.lift
        ga, gb = self.boundary
        slope = (gb - ga) / (self.domain.b - self.domain.a)
        vals = ga + slope * (self.domain.breakpoints - self.domain.a)
        return PiecewiseField.from_nodal_values(self.domain, vals)

    def friedrichs(self) -> float:
        return friedrichs_constant(self.domain, self.diffusion)


@dataclass(frozen=True)
class PhaseSets:
    """Sign decomposition of a function: where it is negative, zero, positive."""

    negative: IntervalSet
    zero: IntervalSet
    positive: IntervalSet

    @classmethod
    def of(cls, w: PiecewiseField) -> "PhaseSets":
        neg, zero, pos = sign_partition(w)
        return cls(negative=neg, zero=zero, positive=pos)


def _a_grad(v: PiecewiseField, spec: DoubleSpec) -> PiecewiseField:
    a = spec.coefficient()
    grad = v.derivative()
    mesh = merge_meshes(grad.mesh, a.mesh)
    g = grad.restricted(mesh)
    aa = a.restricted(mesh)
    return PiecewiseField(mesh, g.coeffs * aa.coeffs[:, :1], continuous=False)


def matches_boundary(v: PiecewiseField, spec: DoubleSpec, tol: float = BOUNDARY_REL) -> bool:
    ga, gb = spec.boundary
    scale = max(v.scale, 1.0 + abs(ga) + abs(gb))
    return (
        (v.continuous or v.is_c0())
        and abs(v(spec.domain.a) - ga) <= tol * scale
        and abs(v(spec.domain.b) - gb) <= tol * scale
    )


def primal_energy(v: PiecewiseField, spec: DoubleSpec) -> float:
    """J(v) = (1/2)||v'||_A^2 - (f, v) + alpha_plus*(v)+ + alpha_minus*(v)- integrated."""
    if not matches_boundary(v, spec):
        raise AdmissibilityError("v does not satisfy the Dirichlet boundary values")
    plus, minus = pos_neg_parts(v)
    return (
        0.5 * weighted_norm_sq(v.derivative(), spec.diffusion)
        - integrate(spec.load, v)
        + spec.alpha_plus * integrate(plus)
        + spec.alpha_minus * integrate(minus)
    )


def feasibility_violations(y: PiecewiseField, spec: DoubleSpec) -> list[tuple[float, float]]:
    """Cells where div y + f leaves [-alpha_minus, alpha_plus], as intervals."""
    d = divergence(y) + spec.load
    lo, hi = d.cell_ranges()
    tol = 1e-12 * (spec.alpha_plus + spec.alpha_minus)
    bad = (hi > spec.alpha_plus + tol) | (lo < -spec.alpha_minus - tol)
    bps = d.mesh.breakpoints
    return [(float(bps[i]), float(bps[i + 1])) for i in np.nonzero(bad)[0]]


def require_feasible(y: PiecewiseField, spec: DoubleSpec) -> None:
    bad = feasibility_violations(y, spec)
    if bad:
        raise FeasibilityError(
            f"div y + f leaves [{-spec.alpha_minus:.6g}, {spec.alpha_plus:.6g}] "
            f"on {len(bad)} cell(s)",
            intervals=bad,
        )


def dual_energy(y: PiecewiseField, spec: DoubleSpec) -> float:
    """I*(y) = -(1/2)||y||^2_{1/A} + boundary flux work; requires feasibility."""
    if not (y.continuous or y.is_c0()):
        raise FeasibilityError("flux has jump discontinuities: divergence is not in L2")
    require_feasible(y, spec)
    ga, gb = spec.boundary
    return (
        -0.5 * weighted_norm_sq(y, spec.diffusion, inverse=True)
        + y(spec.domain.b) * gb
        - y(spec.domain.a) * ga
    )


# -- mismatch measures (oracle mode) ------------------------------------------


def phase_mismatch(v: PiecewiseField, spec: DoubleSpec, exact: ExactSolution) -> float:
    """Integral of alpha(x)|v| over the regions where v's phases disagree with u's.

    alpha is alpha_plus where v is positive on u's zero set, alpha_minus where
    v is negative there, and their sum where the phases are swapped.
    """
    pu = PhaseSets.of(exact.u)
    pv = PhaseSets.of(v)
    w_plus = pv.positive.intersection(pu.zero)
    w_minus = pv.negative.intersection(pu.zero)
    w_swap = pv.positive.intersection(pu.negative).union(
        pv.negative.intersection(pu.positive)
    )
    return (
        spec.alpha_plus * integrate_abs(v, over=w_plus)
        + spec.alpha_minus * integrate_abs(v, over=w_minus)
        + (spec.alpha_plus + spec.alpha_minus) * integrate_abs(v, over=w_swap)
    )


def dual_phase_mismatch(y: PiecewiseField, spec: DoubleSpec, exact: ExactSolution) -> float:
    """Integrals of (alpha_plus - div y - f) u and (-alpha_minus - div y - f) u
    over the exact positive and negative phases; zero iff the equality sets of
    div y + f match them."""
    require_feasible(y, spec)
    d = divergence(y) + spec.load
    pu = PhaseSets.of(exact.u)
    out = spec.alpha_plus * integrate(exact.u, over=pu.positive)
    out -= integrate(d, exact.u, over=pu.positive)
    out -= spec.alpha_minus * integrate(exact.u, over=pu.negative)
    out -= integrate(d, exact.u, over=pu.negative)
    return out


def error_breakdowns(
    v: PiecewiseField,
    y: PiecewiseField,
    spec: DoubleSpec,
    exact: ExactSolution,
    tol: float | None = None,
) -> tuple[ErrorBreakdown, ErrorBreakdown]:
    """Both exact identities: primal and dual error splits against the energy gaps."""
    quad_p = 0.5 * weighted_norm_sq((exact.u - v).derivative(), spec.diffusion)
    gap_p = primal_energy(v, spec) - exact.energy
    primal = ErrorBreakdown.paired(quad_p, phase_mismatch(v, spec, exact), gap_p, tol)
    quad_d = 0.5 * weighted_norm_sq(exact.flux - y, spec.diffusion, inverse=True)
    gap_d = exact.energy - dual_energy(y, spec)
    dual = ErrorBreakdown.paired(quad_d, dual_phase_mismatch(y, spec, exact), gap_d, tol)
    return primal, dual


# -- fully computable gap ------------------------------------------------------


def flux_misfit(v: PiecewiseField, y: PiecewiseField, spec: DoubleSpec) -> float:
    """(1/2)||A v' - y||^2_{1/A}."""
    return 0.5 * weighted_norm_sq(_a_grad(v, spec) - y, spec.diffusion, inverse=True)


def nonlinear_remainder(v: PiecewiseField, y: PiecewiseField, spec: DoubleSpec) -> float:
    """The nonnegative nonlinear part of the computable gap (requires feasible y)."""
    require_feasible(y, spec)
    d = divergence(y) + spec.load
    plus, minus = pos_neg_parts(v)
    return (
        spec.alpha_plus * integrate(plus)
        + spec.alpha_minus * integrate(minus)
        - integrate(d, v)
    )


def duality_gap(v: PiecewiseField, y: PiecewiseField, spec: DoubleSpec, tol: float | None = None) -> float:
    """The computable combined error measure; cross-checked against J(v) - I*(y)."""
    value = flux_misfit(v, y, spec) + nonlinear_remainder(v, y, spec)
    direct = primal_energy(v, spec) - dual_energy(y, spec)
    if tol is None:
        tol = identity_tolerance(direct)
    if abs(value - direct) > tol:
        raise IdentityError(
            f"combined measure {value:.6e} disagrees with duality gap {direct:.6e}"
        )
    return value


def nonlinear_remainder_parts(
    v: PiecewiseField, y: PiecewiseField, spec: DoubleSpec
) -> tuple[float, float, float]:
    """Set-decomposed remainder (sign flips, strict-band positives, strict-band negatives).

    Computed by direct integration over each region, independently of
    :func:`nonlinear_remainder`; the three parts are nonnegative and sum to it.
    """
    require_feasible(y, spec)
    d = divergence(y) + spec.load
    at_lower = sign_set(d + spec.alpha_minus, "=0")
    at_upper = sign_set(d - spec.alpha_plus, "=0")
    whole = IntervalSet.whole(spec.domain.a, spec.domain.b)
    strict = whole.difference(at_lower.union(at_upper))
    pv = PhaseSets.of(v)
    both = spec.alpha_plus + spec.alpha_minus
    part1 = both * (
        integrate_abs(v, over=at_lower.intersection(pv.positive))
        + integrate_abs(v, over=at_upper.intersection(pv.negative))
    )
    pos_region = strict.intersection(pv.positive)
    part2 = spec.alpha_plus * integrate(v, over=pos_region) - integrate(d, v, over=pos_region)
    neg_region = strict.intersection(pv.negative)
    part3 = -spec.alpha_minus * integrate(v, over=neg_region) - integrate(d, v, over=neg_region)
    return part1, part2, part3


# -- bounds --------------------------------------------------------------------


def _check_range(lam: PiecewiseField, lo: float, hi: float, name: str) -> None:
    tol = 1e-12 * (1.0 + abs(lo) + abs(hi))
    mn, mx = lam.min(), lam.max()
    if mn < lo - tol or mx > hi + tol:
        raise DomainError(f"{name} must stay in [{lo:.6g}, {hi:.6g}] (got [{mn:.6g}, {mx:.6g}])")


def error_upper_bound(
    v: PiecewiseField,
    beta: float,
    lam_plus: PiecewiseField,
    lam_minus: PiecewiseField,
    y: PiecewiseField,
    spec: DoubleSpec,
) -> float:
    """Guaranteed bound of the primal error for multipliers in [0, 1]; y need not
    be feasible (the multipliers absorb the constraint)."""
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    _check_range(lam_plus, 0.0, 1.0, "lam_plus")
    _check_range(lam_minus, 0.0, 1.0, "lam_minus")
    d = divergence(y) + spec.load
    resid = d - spec.alpha_plus * lam_plus + spec.alpha_minus * lam_minus
    plus, minus = pos_neg_parts(v)
    c2 = spec.friedrichs() ** 2
    return (
        (1.0 + beta) * flux_misfit(v, y, spec)
        + 0.5 * (1.0 + 1.0 / beta) * c2 * weighted_norm_sq(resid, 1.0)
        + spec.alpha_plus * (integrate(plus) - integrate(lam_plus, v))
        + spec.alpha_minus * (integrate(minus) + integrate(lam_minus, v))
    )


def error_upper_bound_simple(
    v: PiecewiseField,
    beta: float,
    lam: PiecewiseField,
    y: PiecewiseField,
    spec: DoubleSpec,
) -> float:
    """Single-multiplier form with lam in [-alpha_minus, alpha_plus]."""
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    _check_range(lam, -spec.alpha_minus, spec.alpha_plus, "lam")
    d = divergence(y) + spec.load
    plus, minus = pos_neg_parts(v)
    c2 = spec.friedrichs() ** 2
    return (
        (1.0 + beta) * flux_misfit(v, y, spec)
        + 0.5 * (1.0 + 1.0 / beta) * c2 * weighted_norm_sq(d - lam, 1.0)
        + spec.alpha_plus * integrate(plus)
        + spec.alpha_minus * integrate(minus)
        - integrate(lam, v)
    )
