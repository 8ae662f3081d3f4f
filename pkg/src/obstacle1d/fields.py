"""1D meshes, piecewise-polynomial fields, exact quadrature and sign sets.

Every scalar function in the toolkit is a :class:`PiecewiseField`: a cell-wise
polynomial of degree at most 2 on a :class:`Mesh1D`, written in the local
coordinate t = x - x_left of each cell.  The degree cap keeps all integrals of
products of two fields exact under a 3-point Gauss rule, so identities that
equate integrals hold to floating-point accumulation only.
"""

from __future__ import annotations

import io
import math

import numpy as np

from .errors import DegreeError, DomainError, FeasibilityError
from .sets import IntervalSet

__all__ = [
    "Mesh1D",
    "PiecewiseField",
    "merge_meshes",
    "integrate",
    "integrate_abs",
    "weighted_norm_sq",
    "sign_partition",
    "sign_set",
    "pos_neg_parts",
    "interpolate_nodal",
    "friedrichs_constant",
    "divergence",
    "as_coefficient",
    "field_to_csv",
    "field_from_csv",
]

# relative tolerances for mesh point dedup, C0 checks and sign-set detection
MERGE_REL = 1e-13
C0_REL = 1e-12
TOL_SET = 1e-12

# 3-point Gauss-Legendre on [0, 1]: exact for polynomials of degree <= 5
_GAUSS_T = np.array([0.5 - math.sqrt(15.0) / 10.0, 0.5, 0.5 + math.sqrt(15.0) / 10.0])
_GAUSS_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


class Mesh1D:
    """Strictly increasing breakpoints covering the domain (a, b)."""

    __slots__ = ("breakpoints",)

    def __init__(self, breakpoints):
        pts = np.asarray(breakpoints, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise DomainError("a mesh needs at least two breakpoints")
        if not np.all(np.diff(pts) > 0.0):
            raise DomainError("breakpoints must be strictly increasing")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "breakpoints", pts)

    def __setattr__(self, name, value):
        raise AttributeError("Mesh1D is immutable")

    @property
    def a(self) -> float:
        return float(self.breakpoints[0])

    @property
    def b(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def ncells(self) -> int:
        return self.breakpoints.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def _scale(self) -> float:
        return max(1.0, abs(self.a), abs(self.b), self.b - self.a)

    def refined(self, points) -> "Mesh1D":
        """Mesh with the given interior points inserted (near-duplicates dropped)."""
        extra = [p for p in np.asarray(points, dtype=float).ravel() if self.a < p < self.b]
        if not extra:
            return self
        merged = _dedupe(np.concatenate([self.breakpoints, extra]), self._scale())
        merged[0], merged[-1] = self.a, self.b
        return Mesh1D(merged)

    def uniform(self, n: int) -> "Mesh1D":
        """This mesh refined by n uniform cells over (a, b)."""
        if n < 1:
            raise DomainError("need at least one cell")
        return self.refined(np.linspace(self.a, self.b, n + 1)[1:-1])

    def locate(self, x) -> np.ndarray:
        """Cell index containing each point (right-continuous, b maps to the last cell)."""
        idx = np.searchsorted(self.breakpoints, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.ncells - 1)

    def same_as(self, other: "Mesh1D") -> bool:
        return self is other or (
            self.breakpoints.size == other.breakpoints.size
            and np.array_equal(self.breakpoints, other.breakpoints)
        )

    def __repr__(self):
        return f"Mesh1D({self.ncells} cells on ({self.a:.6g}, {self.b:.6g}))"


def _dedupe(points: np.ndarray, scale: float) -> np.ndarray:
    pts = np.sort(points)
    tol = MERGE_REL * scale
    keep = [pts[0]]
    for x in pts[1:]:
        if x - keep[-1] > tol:
            keep.append(x)
    return np.array(keep)


def merge_meshes(m1: Mesh1D, m2: Mesh1D) -> Mesh1D:
    """Common refinement of two meshes over the same domain."""
    tol = MERGE_REL * m1._scale()
    if abs(m1.a - m2.a) > tol or abs(m1.b - m2.b) > tol:
        raise DomainError(
            f"mismatched endpoints: ({m1.a}, {m1.b}) vs ({m2.a}, {m2.b})"
        )
    if m1.same_as(m2):
        return m1
    merged = _dedupe(np.concatenate([m1.breakpoints, m2.breakpoints]), m1._scale())
    merged[0], merged[-1] = m1.a, m1.b
    return Mesh1D(merged)


class PiecewiseField:
    """Cell-wise polynomial c0 + c1*t + c2*t**2, t = x - x_left, degree <= 2.

    ``continuous`` asserts C0 continuity across interior breakpoints; it is
    verified at construction.  Fields are immutable; arithmetic re-expresses
    operands on the merged mesh.
    """

    __slots__ = ("mesh", "coeffs", "continuous")

    def __init__(self, mesh: Mesh1D, coeffs, continuous: bool = False):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 2 or c.shape[1] != 3:
            raise DegreeError("coefficients must have shape (ncells, 3): degree <= 2")
        if c.shape[0] != mesh.ncells:
            raise DomainError(
                f"coefficient rows ({c.shape[0]}) != cell count ({mesh.ncells})"
            )
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "mesh", mesh)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "continuous", bool(continuous))
        if continuous and mesh.ncells > 1:
            jump = np.max(np.abs(self._jumps()))
            if jump > C0_REL * self.scale:
                raise DomainError(f"field marked C0 has jump {jump:.3e} at a breakpoint")

    def __setattr__(self, name, value):
        raise AttributeError("PiecewiseField is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, mesh: Mesh1D) -> "PiecewiseField":
        return cls(mesh, np.zeros((mesh.ncells, 3)), continuous=True)

    @classmethod
    def constant(cls, mesh: Mesh1D, value: float) -> "PiecewiseField":
        c = np.zeros((mesh.ncells, 3))
        c[:, 0] = value
        return cls(mesh, c, continuous=True)

    @classmethod
    def from_nodal_values(cls, mesh: Mesh1D, values) -> "PiecewiseField":
        """C0 piecewise-linear field from values at the mesh breakpoints."""
        v = np.asarray(values, dtype=float)
        if v.shape != mesh.breakpoints.shape:
            raise DomainError("one nodal value per breakpoint required")
        c = np.zeros((mesh.ncells, 3))
        c[:, 0] = v[:-1]
        c[:, 1] = np.diff(v) / mesh.widths
        return cls(mesh, c, continuous=True)

    @classmethod
    def from_global_coeffs(cls, mesh: Mesh1D, pieces, continuous: bool = False) -> "PiecewiseField":
        """Field from per-cell coefficients (a0, a1, a2) of a0 + a1*x + a2*x**2 in x."""
        pieces = np.asarray(pieces, dtype=float)
        if pieces.shape != (mesh.ncells, 3):
            raise DomainError("one (a0, a1, a2) triple per cell required")
        xl = mesh.breakpoints[:-1]
        a0, a1, a2 = pieces.T
        local = np.column_stack([a0 + a1 * xl + a2 * xl**2, a1 + 2.0 * a2 * xl, a2])
        return cls(mesh, local, continuous=continuous)

    # -- basic queries -----------------------------------------------------

    @property
    def scale(self) -> float:
        return 1.0 + float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 1.0

    def _jumps(self) -> np.ndarray:
        h = self.mesh.widths[:-1]
        c = self.coeffs
        left_end = c[:-1, 0] + h * (c[:-1, 1] + h * c[:-1, 2])
        return c[1:, 0] - left_end

    def is_c0(self, rel: float = C0_REL) -> bool:
        if self.mesh.ncells == 1:
            return True
        return float(np.max(np.abs(self._jumps()))) <= rel * self.scale

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        idx = self.mesh.locate(xs)
        t = xs - self.mesh.breakpoints[idx]
        c = self.coeffs[idx]
        out = c[..., 0] + t * (c[..., 1] + t * c[..., 2])
        return float(out) if np.isscalar(x) else out

    def cell_ranges(self) -> tuple[np.ndarray, np.ndarray]:
        """Exact (min, max) of the polynomial over each cell."""
        h = self.mesh.widths
        c0, c1, c2 = self.coeffs.T
        left = c0
        right = c0 + h * (c1 + h * c2)
        lo = np.minimum(left, right)
        hi = np.maximum(left, right)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_ext = np.where(c2 != 0.0, -c1 / (2.0 * c2), -1.0)
        inside = (t_ext > 0.0) & (t_ext < h)
        if np.any(inside):
            v_ext = c0 + t_ext * (c1 + t_ext * c2)
            lo = np.where(inside, np.minimum(lo, v_ext), lo)
            hi = np.where(inside, np.maximum(hi, v_ext), hi)
        return lo, hi

    def min(self) -> float:
        return float(np.min(self.cell_ranges()[0]))

    def max(self) -> float:
        return float(np.max(self.cell_ranges()[1]))

    # -- calculus and re-expression ---------------------------------------

    def derivative(self) -> "PiecewiseField":
        """Cell-wise derivative (degree <= 1); C0 flag set when the jumps vanish."""
        c = np.zeros_like(self.coeffs)
        c[:, 0] = self.coeffs[:, 1]
        c[:, 1] = 2.0 * self.coeffs[:, 2]
        out = PiecewiseField(self.mesh, c, continuous=False)
        if out.is_c0():
            out = PiecewiseField(self.mesh, c, continuous=True)
        return out

    def restricted(self, mesh: Mesh1D) -> "PiecewiseField":
        """The same polynomials re-expressed on a refinement of the mesh."""
        if mesh.same_as(self.mesh):
            return self
        mids = 0.5 * (mesh.breakpoints[:-1] + mesh.breakpoints[1:])
        idx = self.mesh.locate(mids)
        t0 = mesh.breakpoints[:-1] - self.mesh.breakpoints[idx]
        c0, c1, c2 = self.coeffs[idx].T
        shifted = np.column_stack([c0 + t0 * (c1 + t0 * c2), c1 + 2.0 * c2 * t0, c2])
        return PiecewiseField(mesh, shifted, continuous=self.continuous)

    # -- arithmetic --------------------------------------------------------

    def _binary(self, other, op):
        if isinstance(other, PiecewiseField):
            mesh = merge_meshes(self.mesh, other.mesh)
            a = self.restricted(mesh)
            b = other.restricted(mesh)
            return PiecewiseField(
                mesh, op(a.coeffs, b.coeffs), continuous=self.continuous and other.continuous
            )
        arr = np.zeros((self.mesh.ncells, 3))
        arr[:, 0] = float(other)
        return PiecewiseField(self.mesh, op(self.coeffs, arr), continuous=self.continuous)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __radd__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return (-self)._binary(other, np.add)

    def __neg__(self):
        return PiecewiseField(self.mesh, -self.coeffs, continuous=self.continuous)

    def __mul__(self, other):
        if isinstance(other, PiecewiseField):
            raise DegreeError("field products exceed degree 2; use integrate(p, q)")
        return PiecewiseField(self.mesh, self.coeffs * float(other), continuous=self.continuous)

    __rmul__ = __mul__

    def __repr__(self):
        kind = "C0" if self.continuous else "broken"
        return f"PiecewiseField({kind}, {self.mesh!r})"


def as_coefficient(a, mesh: Mesh1D) -> PiecewiseField:
    """Normalize a diffusion coefficient (scalar or cell-wise constant field)."""
    if isinstance(a, PiecewiseField):
        if np.max(np.abs(a.coeffs[:, 1:])) > 1e-14 * a.scale:
            raise DomainError("diffusion coefficient must be cell-wise constant")
        if np.min(a.coeffs[:, 0]) <= 0.0:
            raise DomainError("diffusion coefficient must be positive")
        return a
    a = float(a)
    if a <= 0.0:
        raise DomainError("diffusion coefficient must be positive")
    return PiecewiseField.constant(mesh, a)


# -- quadrature -------------------------------------------------------------


def _aligned(fields, extra_points=()):
    mesh = fields[0].mesh
    for f in fields[1:]:
        mesh = merge_meshes(mesh, f.mesh)
    if len(extra_points):
        mesh = mesh.refined(extra_points)
    return mesh, [f.restricted(mesh) for f in fields]


def _cell_mask(mesh: Mesh1D, over: IntervalSet | None) -> np.ndarray:
    if over is None:
        return np.ones(mesh.ncells, dtype=bool)
    mids = 0.5 * (mesh.breakpoints[:-1] + mesh.breakpoints[1:])
    mask = np.zeros(mesh.ncells, dtype=bool)
    for l, r in over:
        mask |= (mids > l) & (mids < r)
    return mask


def _gauss_values(coeffs: np.ndarray, h: np.ndarray) -> np.ndarray:
    t = h[:, None] * _GAUSS_T[None, :]
    return coeffs[:, 0:1] + t * (coeffs[:, 1:2] + t * coeffs[:, 2:3])


def integrate(p: PiecewiseField, q: PiecewiseField | None = None, over: IntervalSet | None = None) -> float:
    """Exact integral of p (or of the product p*q) over the domain or a set.

    Operand meshes are merged and further refined by the set endpoints, so the
    integrand is a single polynomial of degree <= 4 on every cell and the
    3-point Gauss rule is exact.  Linear in each operand.
    """
    fields = [p] if q is None else [p, q]
    extra = over.endpoints() if over is not None else ()
    mesh, aligned = _aligned(fields, extra)
    mask = _cell_mask(mesh, over)
    if not np.any(mask):
        return 0.0
    h = mesh.widths[mask]
    vals = _gauss_values(aligned[0].coeffs[mask], h)
    if q is not None:
        vals = vals * _gauss_values(aligned[1].coeffs[mask], h)
    return float(np.sum(h * (vals @ _GAUSS_W)))


def integrate_abs(p: PiecewiseField, over: IntervalSet | None = None) -> float:
    """Exact integral of |p|: the mesh is split at sign changes first."""
    neg, _zero, pos = sign_partition(p)
    return integrate(p, over=_intersect(pos, over)) - integrate(p, over=_intersect(neg, over))


def _intersect(s: IntervalSet, over: IntervalSet | None) -> IntervalSet:
    return s if over is None else s.intersection(over)


def weighted_norm_sq(q: PiecewiseField, weight, inverse: bool = False, over: IntervalSet | None = None) -> float:
    """The squared weighted L2 norm: integral of A*q**2 (or q**2/A if inverse).

    The weight must be cell-wise constant and strictly positive.
    """
    a = as_coefficient(weight, q.mesh)
    extra = over.endpoints() if over is not None else ()
    mesh, (qa, aa) = _aligned([q, a], extra)
    mask = _cell_mask(mesh, over)
    if not np.any(mask):
        return 0.0
    h = mesh.widths[mask]
    vals = _gauss_values(qa.coeffs[mask], h) ** 2
    w = aa.coeffs[mask, 0]
    if inverse:
        w = 1.0 / w
    return float(np.sum(h * w * (vals @ _GAUSS_W)))


# -- sign sets ---------------------------------------------------------------


def _cell_cuts(c0: float, c1: float, c2: float, h: float) -> list[float]:
    """Points inside (0, h) where the cell polynomial may change sign.

    Exact roots via the numerically stable quadratic formula, plus the vertex
    of a true parabola so tangential (double-root) touches split the cell.
    """
    cuts: list[float] = []
    if c2 == 0.0:
        if c1 != 0.0:
            cuts.append(-c0 / c1)
    else:
        disc = c1 * c1 - 4.0 * c2 * c0
        # cancellation noise in the discriminant turns tangential touches into
        # spurious root pairs; below this threshold treat the touch as exact
        if disc > 1e-13 * (c1 * c1 + abs(4.0 * c2 * c0)):
            sq = math.sqrt(disc)
            qq = -0.5 * (c1 + math.copysign(sq, c1 if c1 != 0.0 else 1.0))
            cuts.append(qq / c2)
            if qq != 0.0:
                cuts.append(c0 / qq)
        cuts.append(-c1 / (2.0 * c2))
    return sorted(t for t in cuts if 0.0 < t < h)


def sign_partition(p: PiecewiseField, tol: float = TOL_SET) -> tuple[IntervalSet, IntervalSet, IntervalSet]:
    """Split the domain into (negative, zero, positive) sets of p.

    Cell polynomials are cut at their exact roots; each piece is classified by
    its midpoint value against the band tol*(1 + max|coeff|).  The three sets
    partition the domain exactly.
    """
    band = tol * p.scale
    neg: list[tuple[float, float]] = []
    zero: list[tuple[float, float]] = []
    pos: list[tuple[float, float]] = []
    bps = p.mesh.breakpoints
    for i in range(p.mesh.ncells):
        h = float(p.mesh.widths[i])
        c0, c1, c2 = (float(v) for v in p.coeffs[i])
        cuts = [0.0, *_cell_cuts(c0, c1, c2, h), h]
        for t0, t1 in zip(cuts[:-1], cuts[1:]):
            if t1 - t0 <= 0.0:
                continue
            tm = 0.5 * (t0 + t1)
            val = c0 + tm * (c1 + tm * c2)
            piece = (bps[i] + t0, bps[i] + t1)
            if val < -band:
                neg.append(piece)
            elif val > band:
                pos.append(piece)
            else:
                zero.append(piece)
    return IntervalSet(tuple(neg)), IntervalSet(tuple(zero)), IntervalSet(tuple(pos))


def sign_set(p: PiecewiseField, relation: str, tol: float = TOL_SET) -> IntervalSet:
    """The set where p is '<0', '>0' or '=0' (the last up to the detection band)."""
    neg, zero, pos = sign_partition(p, tol)
    try:
        return {"<0": neg, "=0": zero, ">0": pos}[relation]
    except KeyError:
        raise DomainError(f"unknown relation {relation!r}; use '<0', '=0' or '>0'") from None


def pos_neg_parts(p: PiecewiseField, tol: float = TOL_SET) -> tuple[PiecewiseField, PiecewiseField]:
    """(p)+ and (p)- as fields: p restricted to its positive / negated negative set.

    Both parts are nonnegative on their supports and p = (p)+ - (p)- up to the
    detection band.
    """
    neg, zero, pos = sign_partition(p, tol)
    mesh = p.mesh.refined(neg.endpoints() + zero.endpoints() + pos.endpoints())
    base = p.restricted(mesh)
    keep_pos = _cell_mask(mesh, pos)
    keep_neg = _cell_mask(mesh, neg)
    plus = np.where(keep_pos[:, None], base.coeffs, 0.0)
    minus = np.where(keep_neg[:, None], -base.coeffs, 0.0)
    return (
        PiecewiseField(mesh, plus, continuous=False),
        PiecewiseField(mesh, minus, continuous=False),
    )


# -- interpolation, divergence, Friedrichs -----------------------------------


def interpolate_nodal(src: PiecewiseField, nodes) -> PiecewiseField:
    """C0 piecewise-linear interpolation of src at the given nodes."""
    pts = np.sort(np.asarray(nodes, dtype=float))
    tol = MERGE_REL * src.mesh._scale()
    if pts[0] < src.mesh.a - tol or pts[-1] > src.mesh.b + tol:
        raise DomainError("interpolation node outside the domain")
    if abs(pts[0] - src.mesh.a) > tol or abs(pts[-1] - src.mesh.b) > tol:
        raise DomainError("interpolation nodes must include both domain endpoints")
    pts[0], pts[-1] = src.mesh.a, src.mesh.b
    mesh = Mesh1D(_dedupe(pts, src.mesh._scale()))
    return PiecewiseField.from_nodal_values(mesh, src(mesh.breakpoints))


def divergence(y: PiecewiseField) -> PiecewiseField:
    """Divergence of a flux (its cell-wise derivative); the flux must be C0."""
    if not (y.continuous or y.is_c0()):
        raise FeasibilityError("flux has jump discontinuities: divergence is not in L2")
    return y.derivative()


def friedrichs_constant(mesh: Mesh1D, diffusion) -> float:
    """Smallest C with ||w|| <= C ||w'||_A for w vanishing at the endpoints.

    Equals (b - a)/(pi*sqrt(A)) for constant A; for cell-wise constant A the
    value with min(A) is a valid upper bound.
    """
    a = as_coefficient(diffusion, mesh)
    return (mesh.b - mesh.a) / (math.pi * math.sqrt(float(np.min(a.coeffs[:, 0]))))


# -- serialization ------------------------------------------------------------

_CSV_HEADER = "breakpoint_left,breakpoint_right,c0,c1,c2"


def field_to_csv(p: PiecewiseField) -> str:
    """One CSV row per cell: left, right and the local-coordinate coefficients."""
    buf = io.StringIO()
    buf.write(_CSV_HEADER + "\n")
    bps = p.mesh.breakpoints
    for i in range(p.mesh.ncells):
        c0, c1, c2 = p.coeffs[i]
        buf.write(f"{bps[i]:.17g},{bps[i + 1]:.17g},{c0:.17g},{c1:.17g},{c2:.17g}\n")
    return buf.getvalue()


def field_from_csv(text: str) -> PiecewiseField:
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    if not rows:
        raise DomainError("no cells in CSV field")
    lefts = [float(r[0]) for r in rows]
    rights = [float(r[1]) for r in rows]
    mesh = Mesh1D(lefts + [rights[-1]])
    coeffs = [[float(r[2]), float(r[3]), float(r[4])] for r in rows]
    return PiecewiseField(mesh, coeffs, continuous=False)
