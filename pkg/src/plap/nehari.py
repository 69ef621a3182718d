"""Sign-restricted Nehari-type constraint sets and their calculus.

For a nodal field u with parts u = u_plus - u_minus the two constraint
functionals are the pairings of the energy gradient with the parts:

    phi1(u) = <E'(u), u_plus>  = int |grad u+|^p - int u+^p* - lam int f(u) u+
    phi2(u) = <E'(u), -u_minus> = int |grad u-|^p - int u-^p* + lam int f(u) u-

The constraint sets are K1 = {u >= 0, phi1 = 0}, K2 = {u <= 0, phi2 = 0}
and K3 = {phi1 = 0, phi2 = 0} with both parts nontrivial.  On a
sign-definite field both functionals reduce to <E'(u), u>, so any
critical point of the energy restricted to a K set satisfies the full
Euler-Lagrange equation: the multiplier vanishes because the constraint
gradient pairs nondegenerately with the respective part while the
constraint itself is zero.

Scaling a fixed shape w onto the constraint set leads to the scalar
fibering map t -> phi(t w).  Its coefficients for a pure power source are
A t^p - B t^p* - lam C t^q with A, B, C the integrals below, and the
first positive root is bounded above by t1 = (A / (c3 lam C))^(1/(q-p)).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    DegenerateConstraintError,
    DegenerateInputError,
    NoRootError,
    SignError,
    SupportOverlapError,
)
from .functional import (
    Nonlinearity,
    RunParameters,
    _odd_power,
    nonlin_eval,
    p_stiffness_vector,
    plus_minus_parts,
)
from .mesh import Mesh, _check_field, gradient_table, integrate

__all__ = [
    "KIndex",
    "FiberingCoefficients",
    "ScaleResult",
    "constraint_phi",
    "constraint_scale",
    "fibering_coefficients",
    "fibering_upper_bound",
    "smallest_positive_root",
    "fibering_root",
    "scale_to_manifold",
    "project_pair_to_M3",
    "constraint_gradient",
    "tangent_project",
]

MAX_DOUBLINGS = 60
SCAN_SPAN = 60          # upward scan covers [t_hi * 2^-SCAN_SPAN, t_hi]
BISECT_REL = 1e-12


class KIndex(enum.Enum):
    """Which constraint set a field is restricted to."""

    K1 = 1          # nonnegative fields, phi1 = 0
    K2 = 2          # nonpositive fields, phi2 = 0
    K3 = 3          # sign-changing fields, phi1 = phi2 = 0

    @property
    def active_constraints(self) -> tuple[int, ...]:
        return {1: (1,), 2: (2,), 3: (1, 2)}[self.value]


@dataclass(frozen=True)
class FiberingCoefficients:
    """Integrals entering the fibering map of a shape w:
    A = int |grad w|^p, B = int |w|^p*, C = int |w|^q."""

    A: float
    B: float
    C: float


class ScaleResult(NamedTuple):
    t: float                        # first positive root of the fibering map
    bracket: float                  # closed-form upper bound t1
    coefficients: FiberingCoefficients


def constraint_phi(mesh: Mesh, nl: Nonlinearity, params: RunParameters,
                   u: np.ndarray, which: int) -> float:
    """Evaluate phi1 (which=1) or phi2 (which=2) at u."""
    u = _check_field(mesh, u)
    if which not in (1, 2):
        raise ValueError(f"which must be 1 or 2, got {which}")
    plus, minus = plus_minus_parts(u)
    part = plus if which == 1 else minus
    g = gradient_table(mesh, part)
    g2 = np.einsum("sd,sd->s", g, g)
    grad_term = float(np.dot(mesh.volumes, g2 ** (params.p / 2.0)))
    crit_term = integrate(mesh, part ** params.pstar)
    f, _, _ = nonlin_eval(nl, u)
    source = params.lam * integrate(mesh, f * part)
    if which == 1:
        return grad_term - crit_term - source
    return grad_term - crit_term + source


def constraint_scale(mesh: Mesh, params: RunParameters, u: np.ndarray,
                     which: int) -> float:
    """Natural scale of phi_which at u: the part's gradient integral
    int |grad u_part|^p.  Used to make constraint tolerances relative."""
    plus, minus = plus_minus_parts(_check_field(mesh, u))
    part = plus if which == 1 else minus
    g = gradient_table(mesh, part)
    g2 = np.einsum("sd,sd->s", g, g)
    return float(np.dot(mesh.volumes, g2 ** (params.p / 2.0)))


def fibering_coefficients(mesh: Mesh, nl: Nonlinearity, params: RunParameters,
                          w: np.ndarray) -> FiberingCoefficients:
    """A, B, C for the shape w.  Homogeneous of degree p, p*, q in w."""
    w = _check_field(mesh, w)
    if not np.any(w != 0.0):
        raise DegenerateInputError("fibering coefficients of the zero field")
    g = gradient_table(mesh, w)
    g2 = np.einsum("sd,sd->s", g, g)
    A = float(np.dot(mesh.volumes, g2 ** (params.p / 2.0)))
    aw = np.abs(w)
    B = integrate(mesh, aw ** params.pstar)
    C = integrate(mesh, aw ** nl.q)
    return FiberingCoefficients(A, B, C)


def fibering_upper_bound(A: float, c3: float, lam: float, C: float,
                         q: float, p: float) -> float:
    """t1 = (A / (c3 lam C))^(1/(q-p)), an upper bound for the first root
    whenever the source term dominates c3 |u|^q."""
    return (A / (c3 * lam * C)) ** (1.0 / (q - p))


def smallest_positive_root(g: Callable[[float], float], t_start: float,
                           tol: float) -> float:
    """First positive root of g, with g > 0 near 0 and g(t) <= 0 for some t.

    t_start is doubled until g <= 0 (at most MAX_DOUBLINGS times), then the
    interval (0, t_hi] is scanned upward in multiplicative steps of 2 for
    the first sign change, which is sharpened by bisection to BISECT_REL
    relative width and |g| <= tol.
    """
    if not (t_start > 0.0) or not np.isfinite(t_start):
        raise NoRootError(f"invalid bracket start {t_start}")
    t_hi = t_start
    g_hi = g(t_hi)
    doublings = 0
    while g_hi > 0.0:
        doublings += 1
        if doublings > MAX_DOUBLINGS:
            raise NoRootError(
                f"no sign change after {MAX_DOUBLINGS} doublings from {t_start}"
            )
        t_hi *= 2.0
        g_hi = g(t_hi)

    lo = t_hi * 2.0 ** -SCAN_SPAN
    g_lo = g(lo)
    if g_lo <= 0.0:
        if g_lo == 0.0:
            return lo
        raise NoRootError("fibering map not positive near t = 0")
    hi = lo
    for k in range(SCAN_SPAN - 1, -1, -1):
        hi = t_hi * 2.0 ** -k
        g_next = g(hi)
        if g_next <= 0.0:
            if g_next == 0.0:
                return hi
            break
        lo, g_lo = hi, g_next

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if g_mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_REL * hi and abs(g_mid) <= tol:
            return mid
    mid = 0.5 * (lo + hi)
    if abs(g(mid)) <= tol:
        return mid
    raise NoRootError("bisection stalled above the constraint tolerance")


def fibering_root(A: float, B: float, lamC: float, p: float, pstar: float,
                  q: float, tol_rel: float = 1e-10) -> float:
    """First positive root of A t^p - B t^p* - lamC t^q, found with the
    same bracketing policy as `scale_to_manifold`."""
    if A <= 0.0:
        raise DegenerateInputError(f"need A > 0, got {A}")

    def g(t: float) -> float:
        return A * t ** p - B * t ** pstar - lamC * t ** q

    t_start = (A / lamC) ** (1.0 / (q - p)) if lamC > 0 else (A / B) ** (1.0 / (pstar - p))
    return smallest_positive_root(g, t_start, tol_rel * A)


def _check_sign(w: np.ndarray, which: int) -> None:
    if which == 1 and np.any(w < 0.0):
        raise SignError("expected a nonnegative field for constraint 1")
    if which == 2 and np.any(w > 0.0):
        raise SignError("expected a nonpositive field for constraint 2")


def scale_to_manifold(mesh: Mesh, nl: Nonlinearity, params: RunParameters,
                      w: np.ndarray, which: int,
                      tol_rel: float = 1e-10) -> ScaleResult:
    """Scale a sign-definite shape w onto {phi_which = 0}.

    Returns the first positive root t of t -> phi_which(t w) together
    with the closed-form bracket t1 and the fibering coefficients of w.
    The root satisfies |phi_which(t w)| <= tol_rel * A.
    """
    w = _check_field(mesh, w)
    _check_sign(w, which)
    coeffs = fibering_coefficients(mesh, nl, params, w)   # raises on w == 0
    A, B = coeffs.A, coeffs.B
    lam, p, pstar = params.lam, params.p, params.pstar
    t1 = fibering_upper_bound(A, nl.c3, lam, coeffs.C, nl.q, p)

    # On sign-definite fields both constraints coincide with <E'(tw), tw>,
    # so the map can be evaluated from the nonzero nodal values alone.
    active = w != 0.0
    wv = w[active]
    weights = mesh.lumped_mass[active]

    def g(t: float) -> float:
        tv = t * wv
        f, _, _ = nonlin_eval(nl, tv)
        return A * t ** p - B * t ** pstar - lam * float(np.dot(weights, f * tv))

    t = smallest_positive_root(g, t1, tol_rel * A)
    return ScaleResult(t, t1, coeffs)


def project_pair_to_M3(mesh: Mesh, nl: Nonlinearity, params: RunParameters,
                       w_pos: np.ndarray, w_neg: np.ndarray,
                       tol_rel: float = 1e-10):
    """Scale a nonnegative and a nonpositive shape with disjoint nodal
    supports onto K3.  The two scalar problems decouple, so each part is
    scaled independently.  Returns (t_pos, t_neg, combined field)."""
    w_pos = _check_field(mesh, w_pos)
    w_neg = _check_field(mesh, w_neg)
    _check_sign(w_pos, 1)
    _check_sign(w_neg, 2)
    if not np.any(w_pos != 0.0) or not np.any(w_neg != 0.0):
        raise DegenerateInputError("both parts must be nontrivial")
    if np.any((w_pos != 0.0) & (w_neg != 0.0)):
        raise SupportOverlapError("parts must have disjoint nodal supports")
    t_pos = scale_to_manifold(mesh, nl, params, w_pos, 1, tol_rel).t
    t_neg = scale_to_manifold(mesh, nl, params, w_neg, 2, tol_rel).t
    return t_pos, t_neg, t_pos * w_pos + t_neg * w_neg


def constraint_gradient(mesh: Mesh, nl: Nonlinearity, params: RunParameters,
                        u: np.ndarray, which: int) -> np.ndarray:
    """Nodal gradient of phi_which at u, zeroed on the boundary.

    The positive/negative part is differentiated with the almost-everywhere
    chain rule: the variation of u_plus in direction v is v on {u > 0} and
    0 elsewhere, so every entry at a node of the opposite sign vanishes
    identically, making the K3 cross-pairings exact zeros.
    """
    u = _check_field(mesh, u)
    if which not in (1, 2):
        raise ValueError(f"which must be 1 or 2, got {which}")
    plus, minus = plus_minus_parts(u)
    p, pstar, lam = params.p, params.pstar, params.lam
    f, _, fu = nonlin_eval(nl, u)
    M = mesh.lumped_mass
    if which == 1:
        chi = (u > 0.0).astype(float)
        out = p * chi * p_stiffness_vector(mesh, plus, p, params.eps)
        out -= pstar * M * plus ** (pstar - 1.0)
        out -= lam * M * (f * chi + fu * plus)
    else:
        chi = (u < 0.0).astype(float)
        out = -p * chi * p_stiffness_vector(mesh, minus, p, params.eps)
        out += pstar * M * minus ** (pstar - 1.0)
        out += lam * M * (fu * minus - f * chi)
    out[mesh.boundary] = 0.0
    return out


def _project_one(grad_phi: np.ndarray, direction: np.ndarray,
                 v: np.ndarray) -> np.ndarray:
    denom = float(np.dot(grad_phi, direction))
    scale = float(np.linalg.norm(grad_phi) * np.linalg.norm(direction))
    if scale == 0.0 or abs(denom) <= 1e-14 * scale:
        raise DegenerateConstraintError(
            "constraint gradient pairs degenerately with the field part"
        )
    alpha = float(np.dot(grad_phi, v)) / denom
    return v - alpha * direction


def tangent_project(mesh: Mesh, nl: Nonlinearity, params: RunParameters,
                    u: np.ndarray, v: np.ndarray, k: KIndex) -> np.ndarray:
    """Project a direction v onto the tangent space of the active
    constraints at u, by removing multiples of u_plus and/or u_minus."""
    u = _check_field(mesh, u)
    v = _check_field(mesh, v)
    plus, minus = plus_minus_parts(u)
    out = v
    if 1 in k.active_constraints:
        g1 = constraint_gradient(mesh, nl, params, u, 1)
        out = _project_one(g1, plus, out)
    if 2 in k.active_constraints:
        g2 = constraint_gradient(mesh, nl, params, u, 2)
        out = _project_one(g2, minus, out)
    return out
