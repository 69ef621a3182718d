"""Energy functional for the critical-exponent p-Laplace problem.

The discrete energy of a nodal field u on a mesh of (0,1)^N is

    E(u) = (1/p) int |grad u|^p  -  (1/p*) int |u|^p*  -  lam * int F(u),

with p* = N p / (N - p) the critical exponent, F the primitive of the
lower-order term f, and all nonlinear integrals evaluated by the nodal
quadrature rule of the mesh.  Two families of f are provided:

    signed :  f(u) = |u|^(q-2) u + |u|^(r-2) u        (odd in u)
    pospart:  f(u) = |u|^(q-2) u + max(u,0)^(r-1)

with p < r <= q < p*.  Both vanish at 0 and grow superlinearly but
subcritically, which is what makes the constrained minimization below
the compactness threshold (1/N) S_p^(N/p) work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .mesh import Mesh, _check_field, gradient_table, integrate

__all__ = [
    "FAMILIES",
    "Nonlinearity",
    "RunParameters",
    "nonlin_eval",
    "plus_minus_parts",
    "energy",
    "energy_parts",
    "energy_residual",
    "sobolev_constant",
    "sobolev_threshold",
]

FAMILIES = ("signed", "pospart")


@dataclass(frozen=True)
class RunParameters:
    """Problem parameters: exponent p, dimension, coupling lam, gradient
    regularization eps (used in residuals only, never in the energy)."""

    p: float
    dim: int
    lam: float
    eps: float = 1e-8

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigurationError(f"dim must be 2 or 3, got {self.dim}")
        if not (1.0 < self.p < self.dim):
            raise ConfigurationError(
                f"p must lie in (1, dim)=(1, {self.dim}), got {self.p}"
            )
        if not (self.lam > 0.0):
            raise ConfigurationError(f"lam must be positive, got {self.lam}")
        if self.eps < 0.0:
            raise ConfigurationError(f"eps must be >= 0, got {self.eps}")

    @property
    def pstar(self) -> float:
        return self.dim * self.p / (self.dim - self.p)


def _default_constants(q: float, r: float) -> dict:
    # Tightest pointwise constants for the two-term families:
    #   growth           k2 * F(u) <= f(u) u            -> k2 = r
    #   lower norm bound c3 |u|^q <= k2 F(u)             -> c3 = r/q
    #   derivative bound f(u) u <= c1 * f'(u) u^2        -> c1 = 1/(r-1)
    #   upper norm bound c1 f'(u) u^2 <= c4 |u|^q (q=r)  -> c4 = 1 + (q-1)/(r-1)
    return {
        "k2": r,
        "c3": r / q,
        "c1": 1.0 / (r - 1.0),
        "c4": 1.0 + (q - 1.0) / (r - 1.0),
    }


@dataclass(frozen=True)
class Nonlinearity:
    """Lower-order term f(u) with its growth exponents and constants.

    q and r are the two power exponents (r <= q).  The constants k2, c3,
    c1, c4 witness the superlinear growth sandwich

        c3 |u|_q^q <= k2 int F(u) <= int f(u) u
                   <= c1 int f'(u) u^2 <= c4 |u|_q^q   (for q = r)

    and default to the tightest values valid for the chosen family.
    They are stored rather than hard-coded so that the fibering bracket
    t1 = (A / (c3 lam C))^(1/(q-p)) uses the instance's own c3.
    """

    family: str
    q: float
    r: float
    k2: float = field(default=float("nan"))
    c3: float = field(default=float("nan"))
    c1: float = field(default=float("nan"))
    c4: float = field(default=float("nan"))

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(
                f"family must be one of {FAMILIES}, got {self.family!r}"
            )
        defaults = _default_constants(self.q, self.r)
        for name in ("k2", "c3", "c1", "c4"):
            if math.isnan(getattr(self, name)):
                object.__setattr__(self, name, defaults[name])

    def validate(self, params: RunParameters) -> None:
        """Check exponents and constants against p and p*."""
        p, pstar = params.p, params.pstar
        if not (p < self.q < pstar):
            raise ConfigurationError(
                f"q must lie in (p, p*)=({p}, {pstar}), got {self.q}"
            )
        if not (p < self.r <= self.q):
            raise ConfigurationError(
                f"r must lie in (p, q]=({p}, {self.q}], got {self.r}"
            )
        if not (p < self.k2 < pstar):
            raise ConfigurationError(
                f"k2 must lie in (p, p*)=({p}, {pstar}), got {self.k2}"
            )
        if not (0.0 < self.c3 < self.c4):
            raise ConfigurationError(
                f"need 0 < c3 < c4, got c3={self.c3}, c4={self.c4}"
            )
        if not (self.c1 > 0.0):
            raise ConfigurationError(f"c1 must be positive, got {self.c1}")
        # The sandwich needs c1 (r-1) >= 1, otherwise f u <= c1 f' u^2 fails
        # already for a single power.
        if self.c1 * (self.r - 1.0) < 1.0 - 1e-12:
            raise ConfigurationError(
                f"c1={self.c1} too small for r={self.r}: need c1 >= 1/(r-1)"
            )


def _odd_power(u: np.ndarray, e: float) -> np.ndarray:
    # sign(u)|u|^e with e > 0; safe at u = 0
    return np.sign(u) * np.abs(u) ** e


def _masked_power(base: np.ndarray, e: float) -> np.ndarray:
    """base**e with the convention 0**e = 0 even for e < 0 (base >= 0)."""
    if e >= 0.0:
        return base ** e
    out = np.zeros_like(base)
    mask = base > 0.0
    out[mask] = base[mask] ** e
    return out


def nonlin_eval(nl: Nonlinearity, u: np.ndarray):
    """Pointwise f(u), primitive F(u) and derivative f'(u).

    f'(0) is taken to be 0 whenever an exponent drops below 2, which is
    the continuous extension from u != 0.
    """
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    q, r = nl.q, nl.r
    f = _odd_power(u, q - 1.0)
    F = au ** q / q
    fu = (q - 1.0) * _masked_power(au, q - 2.0)
    if nl.family == "signed":
        f = f + _odd_power(u, r - 1.0)
        F = F + au ** r / r
        fu = fu + (r - 1.0) * _masked_power(au, r - 2.0)
    else:
        up = np.maximum(u, 0.0)
        f = f + up ** (r - 1.0)
        F = F + up ** r / r
        fu = fu + (r - 1.0) * _masked_power(up, r - 2.0)
    return f, F, fu


def plus_minus_parts(u: np.ndarray):
    """Nodal positive and negative parts: u = plus - minus, both >= 0."""
    u = np.asarray(u, dtype=float)
    return np.maximum(u, 0.0), np.maximum(-u, 0.0)


def energy_parts(mesh: Mesh, nl: Nonlinearity, params: RunParameters,
                 u: np.ndarray):
    """The three quadrature terms of the energy:
    (1/p) int |grad u|^p,  (1/p*) int |u|^p*,  lam int F(u)."""
    u = _check_field(mesh, u)
    g = gradient_table(mesh, u)
    g2 = np.einsum("sd,sd->s", g, g)
    grad_term = float(np.dot(mesh.volumes, g2 ** (params.p / 2.0))) / params.p
    crit_term = integrate(mesh, np.abs(u) ** params.pstar) / params.pstar
    _, F, _ = nonlin_eval(nl, u)
    source_term = params.lam * integrate(mesh, F)
    return grad_term, crit_term, source_term


def energy(mesh: Mesh, nl: Nonlinearity, params: RunParameters,
           u: np.ndarray) -> float:
    grad_term, crit_term, source_term = energy_parts(mesh, nl, params, u)
    return grad_term - crit_term - source_term


def p_stiffness_vector(mesh: Mesh, u: np.ndarray, p: float,
                       eps: float) -> np.ndarray:
    """Nodal co-vector of the regularized p-Dirichlet term: entry i pairs a
    variation v to int (|grad u|^2 + eps^2)^((p-2)/2) grad u . grad v."""
    g = gradient_table(mesh, u)
    g2 = np.einsum("sd,sd->s", g, g)
    expo = (p - 2.0) / 2.0
    if eps == 0.0 and expo < 0.0:
        w = np.zeros_like(g2)
        mask = g2 > 0.0
        w[mask] = g2[mask] ** expo
    else:
        w = (g2 + eps * eps) ** expo
    coef = mesh.volumes * w
    contrib = coef[:, None] * np.einsum("sd,sid->si", g, mesh.shape_gradients)
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.simplices.ravel(), contrib.ravel())
    return out


def energy_residual(mesh: Mesh, nl: Nonlinearity, params: RunParameters,
                    u: np.ndarray) -> np.ndarray:
    """Nodal gradient of the energy, zeroed on the boundary.

    With eps = 0 this is the exact gradient of `energy`; with eps > 0 the
    p-Dirichlet weight |grad u|^(p-2) is replaced by
    (|grad u|^2 + eps^2)^((p-2)/2), which only matters for p < 2.
    """
    u = _check_field(mesh, u)
    res = p_stiffness_vector(mesh, u, params.p, params.eps)
    f, _, _ = nonlin_eval(nl, u)
    res -= mesh.lumped_mass * (_odd_power(u, params.pstar - 1.0) + params.lam * f)
    res[mesh.boundary] = 0.0
    return res


def sobolev_constant(p: float, dim: int) -> float:
    """Best constant S_p of the Sobolev embedding W^{1,p}_0 -> L^{p*} on R^N,

        S_p = inf  int |grad u|^p / ( int |u|^p* )^(p/p*),

    in closed form through Gamma functions.
    """
    if not (1.0 < p < dim):
        raise ConfigurationError(f"need 1 < p < dim, got p={p}, dim={dim}")
    g = math.gamma
    n = float(dim)
    best_embed = (
        math.pi ** -0.5
        * n ** (-1.0 / p)
        * ((p - 1.0) / (n - p)) ** ((p - 1.0) / p)
        * (g(1.0 + n / 2.0) * g(n) / (g(n / p) * g(1.0 + n - n / p))) ** (1.0 / n)
    )
    return best_embed ** (-p)


def sobolev_threshold(params: RunParameters) -> float:
    """Compactness threshold (1/N) S_p^(N/p): constrained minimizers with
    energy below this level cannot leak mass through the critical term."""
    S = sobolev_constant(params.p, params.dim)
    return S ** (params.dim / params.p) / params.dim
