"""Energies, exact error identities and two-sided bounds for the obstacle problem.

The primal problem minimizes J(v) = (1/2)||v'||_A^2 - (f, v) over functions
between the obstacles with zero boundary values.  The dual problem maximizes
I*(y) over fluxes with square-integrable divergence.  For any admissible pair
the duality gap J(v) - I*(y) splits exactly into two quadratic energy errors
plus two nonnegative measures of coincidence-set mismatch; this module
evaluates every term of that identity together with computable upper and
lower bounds that need no knowledge of the exact solution.

One-sided problems are encoded with ``lower`` or ``upper`` set to None; the
dual energy then requires the matching sign of div y + f and errors out
instead of returning -infinity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, DomainError, FeasibilityError, IdentityError
from .fields import (
    Mesh1D,
    PiecewiseField,
    as_coefficient,
    divergence,
    friedrichs_constant,
    integrate,
    merge_meshes,
    pos_neg_parts,
    sign_set,
    weighted_norm_sq,
)
from .sets import IntervalSet

ADMISSIBLE_REL = 1e-12


def identity_tolerance(gap: float) -> float:
    """Default residual tolerance for the exact identities: 1e-10*(1 + |gap|)."""
    return 1e-10 * (1.0 + abs(gap))


@dataclass(frozen=True)
class ErrorBreakdown:
    """The two sides of an exact error identity.

    total = quadratic + nonlinear must match the energy gap up to floating
    point; the residual is |total - gap|.
    """

    quadratic: float
    nonlinear: float
    total: float
    gap: float
    residual: float

    @classmethod
    def paired(cls, quadratic: float, nonlinear: float, gap: float, tol: float | None = None) -> "ErrorBreakdown":
        total = quadratic + nonlinear
        residual = abs(total - gap)
        if tol is None:
            tol = identity_tolerance(gap)
        if residual > tol:
            raise IdentityError(
                f"identity residual {residual:.3e} exceeds {tol:.3e} "
                f"(quadratic={quadratic:.6e}, nonlinear={nonlinear:.6e}, gap={gap:.6e})"
            )
        return cls(quadratic, nonlinear, total, gap, residual)

    @property
    def nonlinear_share(self) -> float:
        """Nonlinear contribution to the total measure, in percent."""
        return 100.0 * self.nonlinear / self.total if self.total != 0.0 else 0.0


@dataclass(frozen=True)
class ExactSolution:
    """Oracle data: the exact minimizer, its flux A*u' and the exact energy J(u)."""

    u: PiecewiseField
    flux: PiecewiseField
    energy: float


@dataclass(frozen=True)
class ClassicalSpec:
    """Problem data: domain, diffusion A > 0, load f and obstacles.

    ``lower=None`` / ``upper=None`` encode an absent (infinite) obstacle.
    Boundary data is homogeneous.
    """

    domain: Mesh1D
    diffusion: PiecewiseField | float
    load: PiecewiseField
    lower: PiecewiseField | None = None
    upper: PiecewiseField | None = None

    def __post_init__(self):
        as_coefficient(self.diffusion, self.domain)
        tol = ADMISSIBLE_REL
        if self.lower is not None and self.upper is not None:
            gapf = self.upper - self.lower
            if gapf.min() < -tol * gapf.scale:
                raise DomainError("obstacles must satisfy lower <= upper everywhere")
        for obs, sgn, name in ((self.lower, 1.0, "lower"), (self.upper, -1.0, "upper")):
            if obs is None:
                continue
            for x in (self.domain.a, self.domain.b):
                if sgn * obs(x) > tol * obs.scale:
                    raise DomainError(f"{name} obstacle has the wrong sign at the boundary")

    def coefficient(self) -> PiecewiseField:
        return as_coefficient(self.diffusion, self.domain)

    def friedrichs(self) -> float:
        return friedrichs_constant(self.domain, self.diffusion)


def _a_grad(v: PiecewiseField, spec: ClassicalSpec) -> PiecewiseField:
    """The field A*v' (diffusion is cell-wise constant, so degree stays <= 2)."""
    a = spec.coefficient()
    grad = v.derivative()
    mesh = merge_meshes(grad.mesh, a.mesh)
    g = grad.restricted(mesh)
    aa = a.restricted(mesh)
    return PiecewiseField(mesh, g.coeffs * aa.coeffs[:, :1], continuous=False)


def admissible(v: PiecewiseField, spec: ClassicalSpec, tol: float = ADMISSIBLE_REL) -> bool:
    """True iff v is C0, vanishes at the boundary and stays between the obstacles."""
    if not (v.continuous or v.is_c0()):
        return False
    scale = v.scale
    if abs(v(spec.domain.a)) > tol * scale or abs(v(spec.domain.b)) > tol * scale:
        return False
    if spec.lower is not None:
        d = v - spec.lower
        if d.min() < -tol * d.scale:
            return False
    if spec.upper is not None:
        d = spec.upper - v
        if d.min() < -tol * d.scale:
            return False
    return True


def primal_energy(v: PiecewiseField, spec: ClassicalSpec) -> float:
    """J(v) = (1/2)||v'||_A^2 - (f, v); raises for inadmissible v."""
    if not admissible(v, spec):
        raise AdmissibilityError("primal energy is only defined on the admissible set")
    return 0.5 * weighted_norm_sq(v.derivative(), spec.diffusion) - integrate(spec.load, v)


def _check_dual_sign(d: PiecewiseField, side: str, spec: ClassicalSpec) -> None:
    """With an absent obstacle, div y + f must keep the matching sign a.e."""
    lo, hi = d.cell_ranges()
    tol = 1e-12 * d.scale
    bad = hi > tol if side == "upper" else lo < -tol
    if np.any(bad):
        bps = d.mesh.breakpoints
        cells = [(float(bps[i]), float(bps[i + 1])) for i in np.nonzero(bad)[0]]
        want = "<= 0" if side == "upper" else ">= 0"
        raise FeasibilityError(
            f"dual energy is -infinity: obstacle absent on the {side} side "
            f"requires div y + f {want}",
            intervals=cells,
        )


def dual_energy(y: PiecewiseField, spec: ClassicalSpec) -> float:
    """I*(y) = -(1/2)||y||^2_{1/A} + (lower, (div y + f)-) - (upper, (div y + f)+)."""
    d = divergence(y) + spec.load
    if spec.upper is None:
        _check_dual_sign(d, "upper", spec)
    if spec.lower is None:
        _check_dual_sign(d, "lower", spec)
    dpos, dneg = pos_neg_parts(d)
    val = -0.5 * weighted_norm_sq(y, spec.diffusion, inverse=True)
    if spec.lower is not None:
        val += integrate(spec.lower, dneg)
    if spec.upper is not None:
        val -= integrate(spec.upper, dpos)
    return val


def flux_misfit(v: PiecewiseField, y: PiecewiseField, spec: ClassicalSpec) -> float:
    """(1/2)||A v' - y||^2_{1/A}: the quadratic part of the computable gap."""
    return 0.5 * weighted_norm_sq(_a_grad(v, spec) - y, spec.diffusion, inverse=True)


# -- oracle-mode measures and identities --------------------------------------


def lower_coincidence(w: PiecewiseField, spec: ClassicalSpec) -> IntervalSet:
    """The set where w touches the lower obstacle (empty when absent)."""
    if spec.lower is None:
        return IntervalSet.empty()
    return sign_set(w - spec.lower, "=0")


def upper_coincidence(w: PiecewiseField, spec: ClassicalSpec) -> IntervalSet:
    if spec.upper is None:
        return IntervalSet.empty()
    return sign_set(spec.upper - w, "=0")


def _obstacle_weight(obs: PiecewiseField, spec: ClassicalSpec, sign: float) -> PiecewiseField:
    """W = -+(div(A*obs') + f): the nonnegative weight on a coincidence set."""
    flux = _a_grad(obs, spec)
    return (flux.derivative() + spec.load) * sign


def contact_mismatch(v: PiecewiseField, spec: ClassicalSpec, exact: ExactSolution) -> float:
    """Weighted measure of v failing to touch the obstacles on the true contact sets.

    Vanishes whenever the exact contact sets are contained in those of v.
    """
    out = 0.0
    if spec.lower is not None:
        low = lower_coincidence(exact.u, spec)
        out += integrate(_obstacle_weight(spec.lower, spec, -1.0), v - spec.lower, over=low)
    if spec.upper is not None:
        up = upper_coincidence(exact.u, spec)
        out += integrate(_obstacle_weight(spec.upper, spec, 1.0), spec.upper - v, over=up)
    return out


def dual_contact_mismatch(y: PiecewiseField, spec: ClassicalSpec, exact: ExactSolution) -> float:
    """Measure of the sign sets of div y + f spilling outside the true contact sets."""
    d = divergence(y) + spec.load
    neg = sign_set(d, "<0")
    pos = sign_set(d, ">0")
    out = 0.0
    if spec.lower is not None:
        out -= integrate(exact.u - spec.lower, d, over=neg)
    elif not neg.is_empty:
        raise FeasibilityError("div y + f < 0 with no lower obstacle", intervals=neg.intervals)
    if spec.upper is not None:
        out += integrate(spec.upper - exact.u, d, over=pos)
    elif not pos.is_empty:
        raise FeasibilityError("div y + f > 0 with no upper obstacle", intervals=pos.intervals)
    return out


def primal_error_breakdown(
    v: PiecewiseField, spec: ClassicalSpec, exact: ExactSolution, tol: float | None = None
) -> ErrorBreakdown:
    """Exact identity: (1/2)||(u - v)'||_A^2 + mismatch(v) = J(v) - J(u)."""
    quadratic = 0.5 * weighted_norm_sq((exact.u - v).derivative(), spec.diffusion)
    nonlinear = contact_mismatch(v, spec, exact)
    gap = primal_energy(v, spec) - exact.energy
    return ErrorBreakdown.paired(quadratic, nonlinear, gap, tol)


def dual_error_breakdown(
    y: PiecewiseField, spec: ClassicalSpec, exact: ExactSolution, tol: float | None = None
) -> ErrorBreakdown:
    """Exact identity: (1/2)||p - y||^2_{1/A} + mismatch*(y) = I*(p) - I*(y)."""
    quadratic = 0.5 * weighted_norm_sq(exact.flux - y, spec.diffusion, inverse=True)
    nonlinear = dual_contact_mismatch(y, spec, exact)
    gap = exact.energy - dual_energy(y, spec)
    return ErrorBreakdown.paired(quadratic, nonlinear, gap, tol)


# -- fully computable gap ------------------------------------------------------


def nonlinear_remainder(v: PiecewiseField, y: PiecewiseField, spec: ClassicalSpec) -> float:
    """The nonnegative nonlinear part of the computable duality gap.

    Integrates (lower - v)(div y + f) where div y + f is negative but v is off
    the lower obstacle, and (upper - v)(div y + f) where it is positive but v
    is off the upper obstacle.  Zero when the sign sets of div y + f are
    contained in the corresponding contact sets of v.
    """
    d = divergence(y) + spec.load
    neg = sign_set(d, "<0")
    pos = sign_set(d, ">0")
    out = 0.0
    if spec.lower is not None:
        out += integrate(spec.lower - v, d, over=neg.difference(lower_coincidence(v, spec)))
    elif not neg.is_empty:
        raise FeasibilityError("div y + f < 0 with no lower obstacle", intervals=neg.intervals)
    if spec.upper is not None:
        out += integrate(spec.upper - v, d, over=pos.difference(upper_coincidence(v, spec)))
    elif not pos.is_empty:
        raise FeasibilityError("div y + f > 0 with no upper obstacle", intervals=pos.intervals)
    return out


def duality_gap(v: PiecewiseField, y: PiecewiseField, spec: ClassicalSpec, tol: float | None = None) -> float:
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


# -- bounds --------------------------------------------------------------------


@dataclass(frozen=True)
class MajorantParams:
    """Free parameters of the full upper bound: beta > 0, multipliers >= 0, C."""

    beta: float
    lam_lower: PiecewiseField
    lam_upper: PiecewiseField
    friedrichs: float

    def __post_init__(self):
        if not self.beta > 0.0:
            raise DomainError("beta must be positive")
        if not self.friedrichs > 0.0:
            raise DomainError("the Friedrichs constant must be positive")
        for lam, name in ((self.lam_lower, "lam_lower"), (self.lam_upper, "lam_upper")):
            if lam.min() < -1e-12 * lam.scale:
                raise DomainError(f"{name} must be nonnegative")

    @property
    def c_beta(self) -> float:
        return self.friedrichs**2 * (1.0 + self.beta)


def _require_zero_multiplier(lam: PiecewiseField, side: str) -> None:
    if np.max(np.abs(lam.coeffs)) > 1e-12 * lam.scale:
        raise DomainError(f"nonzero multiplier with no {side} obstacle")


def error_upper_bound(
    v: PiecewiseField, params: MajorantParams, y: PiecewiseField, spec: ClassicalSpec
) -> float:
    """Guaranteed upper bound of the primal error measure for any beta, multipliers, flux."""
    beta = params.beta
    d = divergence(y) + spec.load
    resid = d + params.lam_lower - params.lam_upper
    value = (1.0 + 1.0 / beta) * flux_misfit(v, y, spec)
    value += 0.5 * params.friedrichs**2 * (1.0 + beta) * weighted_norm_sq(resid, 1.0)
    if spec.lower is not None:
        value += integrate(params.lam_lower, v - spec.lower)
    else:
        _require_zero_multiplier(params.lam_lower, "lower")
    if spec.upper is not None:
        value += integrate(params.lam_upper, spec.upper - v)
    else:
        _require_zero_multiplier(params.lam_upper, "upper")
    return value


def error_upper_bound_simple(
    v: PiecewiseField,
    beta: float,
    y: PiecewiseField,
    spec: ClassicalSpec,
    halved_misfit: bool = False,
) -> float:
    """Multiplier-free upper bound: the residual keeps only its useless sign part.

    On the contact sets of v the residual div y + f is replaced by the sign
    part that the optimal multiplier cannot cancel; elsewhere it is kept
    whole.  ``halved_misfit`` selects a published variant that carries an
    extra 1/2 on the first term (kept for comparison; not an upper bound in
    all cases).
    """
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    d = divergence(y) + spec.load
    low_v = lower_coincidence(v, spec)
    up_v = upper_coincidence(v, spec)
    whole = IntervalSet.whole(spec.domain.a, spec.domain.b)
    free = whole.difference(low_v.union(up_v))
    active = sign_set(d, "<0").intersection(up_v)
    active = active.union(sign_set(d, ">0").intersection(low_v))
    active = active.union(free)
    normsq = integrate(d, d, over=active)
    coeff = (0.5 if halved_misfit else 1.0) * (1.0 + 1.0 / beta)
    c2 = spec.friedrichs() ** 2
    return coeff * flux_misfit(v, y, spec) + 0.5 * c2 * (1.0 + beta) * normsq


def error_upper_bound_sharp(
    v: PiecewiseField, beta: float, y: PiecewiseField, spec: ClassicalSpec
) -> float:
    """Sharper multiplier-free bound from pointwise optimization of the multipliers.

    Never exceeds :func:`error_upper_bound_simple` at the same (beta, y).
    """
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    d = divergence(y) + spec.load
    c_beta = spec.friedrichs() ** 2 * (1.0 + beta)
    shifted = v + c_beta * d
    whole = IntervalSet.whole(spec.domain.a, spec.domain.b)
    low_branch = IntervalSet.empty()
    up_branch = IntervalSet.empty()
    if spec.lower is not None:
        g = shifted - spec.lower
        low_branch = sign_set(g, "<0").union(sign_set(g, "=0"))
    if spec.upper is not None:
        g = spec.upper - shifted
        up_branch = sign_set(g, "<0").union(sign_set(g, "=0"))
        up_branch = up_branch.difference(low_branch)
    middle = whole.difference(low_branch.union(up_branch))
    acc = c_beta * integrate(d, d, over=middle)
    if spec.lower is not None and not low_branch.is_empty:
        slack = spec.lower - v
        acc -= integrate(slack, slack, over=low_branch) / c_beta
        acc += 2.0 * integrate(d, slack, over=low_branch)
    if spec.upper is not None and not up_branch.is_empty:
        slack = spec.upper - v
        acc -= integrate(slack, slack, over=up_branch) / c_beta
        acc += 2.0 * integrate(d, slack, over=up_branch)
    return (1.0 + 1.0 / beta) * flux_misfit(v, y, spec) + 0.5 * acc


def error_lower_bound(v: PiecewiseField, w: PiecewiseField, spec: ClassicalSpec) -> float:
    """J(v) - J(w): a guaranteed lower bound of the primal error for admissible w."""
    if not admissible(w, spec):
        raise AdmissibilityError("the comparison function must be admissible")
    return primal_energy(v, spec) - primal_energy(w, spec)
