"""Closed-form benchmark problems with exact solutions and perturbation families.

Two families are provided:

* a one-obstacle problem on (0, 1) with constant negative load f and constant
  negative lower obstacle; the solution touches the obstacle on a centered
  interval of half-width r = 1/2 - sqrt(2*phi/f);
* a two-phase problem on (-1, 1) with zero load, boundary values -1 and 1 and
  phase weights alpha > 2; the solution vanishes on (r_minus, r_plus).

Each family comes with primal perturbations (the same closed form driven by a
perturbed parameter) and dual perturbations (nodal re-interpolation of the
exact flux around the free boundary), which realize any prescribed mismatch
between exact and approximate coincidence sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .classical import ClassicalSpec, ExactSolution
from .errors import DomainError
from .fields import Mesh1D, PiecewiseField, interpolate_nodal
from .twophase import DoubleSpec

__all__ = [
    "ClassicalBenchmark",
    "DoubleBenchmark",
    "classical_exact",
    "classical_perturbed_primal",
    "classical_perturbed_dual",
    "double_exact",
    "double_perturbed_primal",
    "double_perturbed_dual",
]


@dataclass(frozen=True)
class ClassicalBenchmark:
    """One-obstacle benchmark; the contact set is (1/2 - r, 1/2 + r)."""

    load: float
    obstacle: float
    radius: float
    spec: ClassicalSpec
    exact: ExactSolution


def _one_obstacle_solution(f: float, phi: float) -> tuple[float, PiecewiseField]:
    """The solution for constant f < 0, lower obstacle phi < 0; returns (r, u)."""
    if not (f < 0.0 and phi < 0.0):
        raise DomainError("the closed form needs f < 0 and a negative lower obstacle")
    root = math.sqrt(2.0 * phi / f)
    r = 0.5 - root
    if not 0.0 < r < 0.5:
        raise DomainError(f"contact radius {r:.4g} outside (0, 1/2); adjust f or phi")
    s = math.sqrt(2.0 * f * phi)
    mesh = Mesh1D([0.0, 0.5 - r, 0.5 + r, 1.0])
    # local coordinates, anchored so the touch points are coefficient-exact:
    # the last piece is phi - (f/2)(x - (1/2 + r))^2
    coeffs = [
        [0.0, -s, -0.5 * f],
        [phi, 0.0, 0.0],
        [phi, 0.0, -0.5 * f],
    ]
    u = PiecewiseField(mesh, coeffs, continuous=True)
    return r, u


def classical_exact(f: float = -14.0, phi: float = -1.0) -> ClassicalBenchmark:
    r, u = _one_obstacle_solution(f, phi)
    root = math.sqrt(2.0 * phi / f)
    energy = f * phi * (4.0 / 3.0 * root - 1.0)
    mesh = u.mesh
    spec = ClassicalSpec(
        domain=mesh,
        diffusion=1.0,
        load=PiecewiseField.constant(mesh, f),
        lower=PiecewiseField.constant(mesh, phi),
        upper=None,
    )
    exact = ExactSolution(u=u, flux=u.derivative(), energy=energy)
    return ClassicalBenchmark(load=f, obstacle=phi, radius=r, spec=spec, exact=exact)


def classical_perturbed_primal(bench: ClassicalBenchmark, eps1: float) -> PiecewiseField:
    """The closed form driven by a perturbed load; its contact set shrinks by eps1."""
    r = bench.radius
    if not (r - 0.5 < eps1 < r):
        raise DomainError(f"eps1 must lie in ({r - 0.5:.4g}, {r:.4g})")
    f_eps = 2.0 * bench.obstacle / (0.5 - r + eps1) ** 2
    _, v = _one_obstacle_solution(f_eps, bench.obstacle)
    return v


def classical_perturbed_dual(bench: ClassicalBenchmark, eps2: float) -> PiecewiseField:
    """Nodal re-interpolation of the exact flux on collars of width 2*eps2."""
    r = bench.radius
    if not (0.0 < eps2 < r) or not (0.5 - r - eps2 > 0.0):
        raise DomainError(f"eps2 must lie in (0, {min(r, 0.5 - r):.4g})")
    nodes = [0.0, 0.5 - r - eps2, 0.5 - r + eps2, 0.5 + r - eps2, 0.5 + r + eps2, 1.0]
    return interpolate_nodal(bench.exact.flux, nodes)


@dataclass(frozen=True)
class DoubleBenchmark:
    """Two-phase benchmark; the solution vanishes on (r_minus, r_plus)."""

    alpha_minus: float
    alpha_plus: float
    r_minus: float
    r_plus: float
    spec: DoubleSpec
    exact: ExactSolution


def _two_phase_solution(alpha_minus: float, alpha_plus: float) -> tuple[float, float, PiecewiseField]:
    if not (alpha_minus > 2.0 and alpha_plus > 2.0):
        raise DomainError("phase weights must exceed 2 for an interior free boundary")
    r_m = math.sqrt(2.0 / alpha_minus) - 1.0
    r_p = 1.0 - math.sqrt(2.0 / alpha_plus)
    sm = math.sqrt(2.0 * alpha_minus)
    sp = math.sqrt(2.0 * alpha_plus)
    mesh = Mesh1D([-1.0, r_m, r_p, 1.0])
    # local coordinates: the left piece anchored at x = -1, the right one at
    # x = r_plus where it touches zero, so phase detection is coefficient-exact
    coeffs = [
        [-1.0, sm, -0.5 * alpha_minus],
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 0.5 * alpha_plus],
    ]
    u = PiecewiseField(mesh, coeffs, continuous=True)
    return r_m, r_p, u


def double_exact(alpha_minus: float = 8.0, alpha_plus: float = 8.0) -> DoubleBenchmark:
    r_m, r_p, u = _two_phase_solution(alpha_minus, alpha_plus)
    energy = (2.0 * math.sqrt(2.0) / 3.0) * (math.sqrt(alpha_plus) + math.sqrt(alpha_minus))
    mesh = u.mesh
    spec = DoubleSpec(
        domain=mesh,
        diffusion=1.0,
        load=PiecewiseField.zero(mesh),
        alpha_plus=alpha_plus,
        alpha_minus=alpha_minus,
        boundary=(-1.0, 1.0),
    )
    exact = ExactSolution(u=u, flux=u.derivative(), energy=energy)
    return DoubleBenchmark(
        alpha_minus=alpha_minus,
        alpha_plus=alpha_plus,
        r_minus=r_m,
        r_plus=r_p,
        spec=spec,
        exact=exact,
    )


def double_perturbed_primal(bench: DoubleBenchmark, eps1: float) -> PiecewiseField:
    """The closed form with perturbed phase weights; the zero set moves by eps1."""
    r_m, r_p = bench.r_minus, bench.r_plus
    lo = max(-1.0 + r_p, -1.0 - r_m)
    hi = min(r_p, -r_m)
    if not (lo < eps1 < hi):
        raise DomainError(f"eps1 must lie in ({lo:.4g}, {hi:.4g})")
    a_p = 2.0 / (1.0 - r_p + eps1) ** 2
    a_m = 2.0 / (1.0 + r_m + eps1) ** 2
    _, _, v = _two_phase_solution(a_m, a_p)
    return v


def double_perturbed_dual(bench: DoubleBenchmark, eps2: float) -> PiecewiseField:
    r_m, r_p = bench.r_minus, bench.r_plus
    hi = min(-r_m, r_p)
    if not (0.0 < eps2 < hi):
        raise DomainError(f"eps2 must lie in (0, {hi:.4g})")
    nodes = [-1.0, r_m - eps2, r_m + eps2, r_p - eps2, r_p + eps2, 1.0]
    return interpolate_nodal(bench.exact.flux, nodes)
