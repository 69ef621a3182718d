"""Projected descent on the sign-restricted constraint sets.

The minimizing sequence for each constraint set is generated by a
Sobolev-gradient loop:

    1. assemble the nodal energy gradient,
    2. precondition it with one discrete Dirichlet-Laplace solve,
    3. project the preconditioned direction onto the constraint tangent,
    4. take an Armijo-backtracked step,
    5. retract (clip to the admissible sign, rescale onto the constraint).

The iteration stops when the preconditioned projected-residual norm drops
below grad_tol.  Each accepted iterate is on its constraint set up to the
retraction tolerance, so the recorded energies decrease monotonically
along the constrained path.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse.linalg import splu

from .errors import (
    ConfigurationError,
    DegenerateConstraintError,
    LostSignError,
    NoRootError,
    SignError,
    StagnationError,
)
from .functional import (
    Nonlinearity,
    RunParameters,
    energy,
    energy_residual,
    sobolev_threshold,
)
from .mesh import Mesh, apply_dirichlet, build_mesh, laplace_stiffness
from .functional import plus_minus_parts
from .nehari import (
    KIndex,
    constraint_gradient,
    constraint_phi,
    constraint_scale,
    project_pair_to_M3,
    scale_to_manifold,
    tangent_project,
)

__all__ = [
    "SolverConfig",
    "SolveReport",
    "SolutionTriple",
    "SweepRow",
    "LaplacePreconditioner",
    "initial_point",
    "retract",
    "descend",
    "solve_three",
    "lambda_sweep",
]

MAX_BACKTRACKS = 60
MAX_RESCALE_SWEEPS = 50


@dataclass(frozen=True)
class SolverConfig:
    """Everything a run needs besides the mesh object itself."""

    params: RunParameters
    nonlin: Nonlinearity
    cells_per_side: int
    max_iters: int = 5000
    grad_tol: float = 1e-7
    step_init: float = 1.0
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    constraint_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        self.nonlin.validate(self.params)
        if self.cells_per_side < 2:
            raise ConfigurationError("cells_per_side must be >= 2 for a solve")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if not (self.grad_tol > 0.0):
            raise ConfigurationError("grad_tol must be positive")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ConfigurationError("backtrack_factor must lie in (0, 1)")
        if not (0.0 < self.armijo_c < 1.0):
            raise ConfigurationError("armijo_c must lie in (0, 1)")
        if not (self.step_init > 0.0):
            raise ConfigurationError("step_init must be positive")
        if not (self.constraint_tol > 0.0):
            raise ConfigurationError("constraint_tol must be positive")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one constrained descent."""

    kind: str
    converged: bool
    iterations: int
    energy: float
    constraint_residuals: tuple[float, ...]   # relative, one per active constraint
    max_constraint_residual: float            # worst relative residual over iterates
    projected_norm: float
    below_threshold: bool
    energy_history: tuple[float, ...]
    error: str | None = None


@dataclass(frozen=True)
class SolutionTriple:
    u1: np.ndarray      # nonnegative
    u2: np.ndarray      # nonpositive
    u3: np.ndarray      # sign changing
    reports: tuple[SolveReport, SolveReport, SolveReport]

    def fields(self):
        return (self.u1, self.u2, self.u3)

    def validate_distinct(self, tol: float = 1e-6) -> None:
        fields = self.fields()
        for i in range(3):
            for j in range(i + 1, 3):
                a, b = fields[i], fields[j]
                scale = max(np.max(np.abs(a)), np.max(np.abs(b)))
                if scale == 0.0 or np.max(np.abs(a - b)) < tol * scale:
                    raise DegenerateConstraintError(
                        f"solutions {i + 1} and {j + 1} are not distinct"
                    )


@dataclass(frozen=True)
class SweepRow:
    lam: float
    t_lambda: float
    c1: float
    c2: float
    c3: float
    threshold1: bool | None
    threshold2: bool | None
    threshold3: bool | None


class LaplacePreconditioner:
    """Dirichlet Laplace solver on the interior vertices, factored once."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        K = laplace_stiffness(mesh)
        self.interior = np.where(~mesh.boundary)[0]
        self._K_int = K[self.interior][:, self.interior].tocsc()
        self._lu = splu(self._K_int)

    def solve(self, covector: np.ndarray) -> np.ndarray:
        """K^-1 r on the interior, zero on the boundary."""
        out = np.zeros(self.mesh.n_vertices)
        out[self.interior] = self._lu.solve(covector[self.interior])
        return out

    def norm(self, v: np.ndarray) -> float:
        """Dirichlet energy norm sqrt(v^T K v) of an interior field."""
        vi = v[self.interior]
        return float(np.sqrt(max(vi @ (self._K_int @ vi), 0.0)))

    def dual_norm(self, covector: np.ndarray) -> float:
        """Preconditioned norm sqrt(r^T K^-1 r) of a nodal co-vector."""
        ri = covector[self.interior]
        return float(np.sqrt(max(ri @ self._lu.solve(ri), 0.0)))


def _mirror_first_axis(mesh: Mesh) -> np.ndarray:
    """Vertex permutation realizing x_1 -> 1 - x_1 on the structured grid."""
    side = mesh.cells_per_side + 1
    grid = np.arange(mesh.n_vertices).reshape((side,) * mesh.dim)
    return grid[::-1].reshape(-1)


def _transverse_profile(mesh: Mesh) -> np.ndarray:
    """prod_{i >= 2} sin(pi x_i); constant 1 in the first axis."""
    prof = np.ones(mesh.n_vertices)
    for axis in range(1, mesh.dim):
        prof *= np.sin(np.pi * mesh.vertices[:, axis])
    return prof


def initial_point(mesh: Mesh, nl: Nonlinearity, params: RunParameters,
                  k: KIndex, seed: int,
                  tol_rel: float = 1e-10) -> np.ndarray:
    """Seeded smooth bump(s), scaled onto the constraint set of k.

    K1 uses a positive product-of-sines bump with a mild multiplicative
    jitter; K2 is its exact negation drawn from the same seed, so the two
    runs start from mirror images.  K3 places one bump in each half
    {x_1 < 1/2}, {x_1 > 1/2} (requires at least 4 cells per side), the
    negative one being the mirrored negation of the positive one.
    """
    rng = np.random.default_rng(seed)
    jitter = 1.0 + 0.1 * rng.random(mesh.n_vertices)
    if k in (KIndex.K1, KIndex.K2):
        if mesh.cells_per_side < 2:
            raise ConfigurationError("need at least 2 cells per side")
        bump = np.prod(np.sin(np.pi * mesh.vertices), axis=1)
        w = apply_dirichlet(mesh, bump * jitter)
        if k is KIndex.K1:
            t = scale_to_manifold(mesh, nl, params, w, 1, tol_rel).t
            return t * w
        t = scale_to_manifold(mesh, nl, params, -w, 2, tol_rel).t
        return t * -w

    if mesh.cells_per_side < 4:
        raise ConfigurationError(
            "sign-changing initial data needs at least 4 cells per side"
        )
    x1 = mesh.vertices[:, 0]
    left = np.where(x1 < 0.5, np.sin(2.0 * np.pi * x1), 0.0)
    w_pos = apply_dirichlet(mesh, left * _transverse_profile(mesh) * jitter)
    w_pos = np.maximum(w_pos, 0.0)
    # exact mirrored negation keeps the pair antisymmetric to the last bit
    w_neg = -w_pos[_mirror_first_axis(mesh)]
    _, _, combined = project_pair_to_M3(mesh, nl, params, w_pos, w_neg, tol_rel)
    return combined


def retract(mesh: Mesh, nl: Nonlinearity, params: RunParameters,
            u: np.ndarray, k: KIndex,
            tol_rel: float = 1e-10) -> np.ndarray:
    """Map an arbitrary field back onto the constraint set of k.

    K1/K2 clip to the admissible sign and rescale; K3 rescales the
    positive and negative parts by alternating scalar root solves until
    both constraint residuals pass.
    """
    if k is KIndex.K1:
        w = apply_dirichlet(mesh, np.maximum(u, 0.0))
        if not np.any(w > 0.0):
            raise LostSignError("clipping removed the whole positive part")
        return scale_to_manifold(mesh, nl, params, w, 1, tol_rel).t * w
    if k is KIndex.K2:
        w = apply_dirichlet(mesh, np.minimum(u, 0.0))
        if not np.any(w < 0.0):
            raise LostSignError("clipping removed the whole negative part")
        return scale_to_manifold(mesh, nl, params, w, 2, tol_rel).t * w

    pos = apply_dirichlet(mesh, np.maximum(u, 0.0))
    neg = apply_dirichlet(mesh, np.minimum(u, 0.0))
    if not np.any(pos > 0.0):
        raise LostSignError("sign-changing iterate lost its positive part")
    if not np.any(neg < 0.0):
        raise LostSignError("sign-changing iterate lost its negative part")
    for _ in range(MAX_RESCALE_SWEEPS):
        pos = scale_to_manifold(mesh, nl, params, pos, 1, tol_rel).t * pos
        neg = scale_to_manifold(mesh, nl, params, neg, 2, tol_rel).t * neg
        combined = pos + neg
        ok = True
        for which, part in ((1, pos), (2, neg)):
            resid = abs(constraint_phi(mesh, nl, params, combined, which))
            scale = constraint_scale(mesh, params, combined, which)
            if resid > tol_rel * scale:
                ok = False
        if ok:
            return combined
    raise NoRootError("alternating part rescaling did not settle in "
                      f"{MAX_RESCALE_SWEEPS} sweeps")


def _remove_multipliers(mesh, nl, params, u, r, k) -> np.ndarray:
    """Subtract the constraint-normal components from the co-vector r.

    The multipliers are fixed by pairing against the same part directions
    the tangent projector uses, so afterwards <r, u_plus> = <r, u_minus> = 0
    on the active constraints.  Preconditioning the corrected co-vector
    yields a direction whose slope is a positive quadratic form, which is
    what certifies the Armijo decrease below.
    """
    plus, minus = plus_minus_parts(u)
    out = r
    for which in k.active_constraints:
        direction = plus if which == 1 else minus
        grad_phi = constraint_gradient(mesh, nl, params, u, which)
        denom = float(np.dot(grad_phi, direction))
        scale = float(np.linalg.norm(grad_phi) * np.linalg.norm(direction))
        if scale == 0.0 or abs(denom) <= 1e-14 * scale:
            raise DegenerateConstraintError(
                "constraint gradient pairs degenerately with the field part"
            )
        mu = float(np.dot(out, direction)) / denom
        out = out - mu * grad_phi
    return out


def _relative_residuals(mesh, nl, params, u, k) -> tuple[float, ...]:
    out = []
    for which in k.active_constraints:
        resid = abs(constraint_phi(mesh, nl, params, u, which))
        scale = constraint_scale(mesh, params, u, which)
        out.append(resid / scale if scale > 0.0 else float("inf"))
    return tuple(out)


def descend(mesh: Mesh, config: SolverConfig, k: KIndex,
            initial: np.ndarray,
            precond: LaplacePreconditioner | None = None):
    """Run the constrained descent from an on-constraint initial field.

    Returns (final field, SolveReport).  Raises StagnationError when the
    line search cannot certify decrease, LostSignError when every trial
    step clips away a required part.
    """
    nl, params = config.nonlin, config.params
    P = precond if precond is not None else LaplacePreconditioner(mesh)
    tol_rel = config.constraint_tol

    u = np.asarray(initial, dtype=float)
    E = energy(mesh, nl, params, u)
    history = [E]
    residuals = _relative_residuals(mesh, nl, params, u, k)
    max_resid = max(residuals)
    step = config.step_init
    converged = False
    pnorm = float("inf")
    iterations = 0

    def report(error: str | None = None) -> SolveReport:
        return SolveReport(
            kind=k.name,
            converged=converged,
            iterations=iterations,
            energy=E,
            constraint_residuals=residuals,
            max_constraint_residual=max_resid,
            projected_norm=pnorm,
            below_threshold=E < sobolev_threshold(params),
            energy_history=tuple(history),
            error=error,
        )

    for iterations in range(config.max_iters + 1):
        r = energy_residual(mesh, nl, params, u)
        r_proj = _remove_multipliers(mesh, nl, params, u, r, k)
        g = P.solve(r_proj)
        gt = tangent_project(mesh, nl, params, u, g, k)
        # <r, gt> collapses to the positive form r_proj^T K^-1 r_proj: gt is
        # tangent, and r_proj pairs to zero with the part directions.
        slope = float(np.dot(r_proj, g))
        pnorm = float(np.sqrt(max(slope, 0.0)))
        if pnorm <= config.grad_tol:
            converged = True
            break
        if iterations == config.max_iters:
            break
        if slope <= 0.0:
            raise StagnationError(
                "projected direction is not a descent direction", report()
            )
        t = step
        accepted = False
        lost = 0
        for _ in range(MAX_BACKTRACKS):
            try:
                cand = retract(mesh, nl, params, u - t * gt, k, tol_rel)
            except LostSignError:
                lost += 1
                t *= config.backtrack_factor
                continue
            E_cand = energy(mesh, nl, params, cand)
            if E_cand <= E - config.armijo_c * t * slope:
                accepted = True
                break
            t *= config.backtrack_factor
        if not accepted:
            if lost == MAX_BACKTRACKS:
                raise LostSignError(
                    "every trial step clipped away a required part"
                )
            raise StagnationError(
                f"no acceptable step in {MAX_BACKTRACKS} backtracks", report()
            )
        u = cand
        E = E_cand
        history.append(E)
        residuals = _relative_residuals(mesh, nl, params, u, k)
        max_resid = max(max_resid, max(residuals))
        step = min(config.step_init, t / config.backtrack_factor)

    return u, report()


def _descend_or_annotate(mesh, config, k, P):
    """One constraint set end to end; failures become annotated reports."""
    nl, params = config.nonlin, config.params
    try:
        u0 = initial_point(mesh, nl, params, k, config.seed,
                           config.constraint_tol)
    except (NoRootError, SignError, DegenerateConstraintError) as exc:
        empty = np.zeros(mesh.n_vertices)
        return empty, SolveReport(
            kind=k.name, converged=False, iterations=0,
            energy=float("nan"), constraint_residuals=(float("nan"),),
            max_constraint_residual=float("nan"),
            projected_norm=float("nan"), below_threshold=False,
            energy_history=(), error=f"initial point failed: {exc}")
    try:
        return descend(mesh, config, k, u0, P)
    except StagnationError as exc:
        if exc.report is not None:
            return u0, replace(exc.report, error=str(exc))
        raise
    except (LostSignError, NoRootError, DegenerateConstraintError) as exc:
        return u0, SolveReport(
            kind=k.name, converged=False, iterations=0,
            energy=energy(mesh, nl, params, u0),
            constraint_residuals=_relative_residuals(mesh, nl, params, u0, k),
            max_constraint_residual=float("nan"),
            projected_norm=float("nan"), below_threshold=False,
            energy_history=(), error=str(exc))


def solve_three(config: SolverConfig, mesh: Mesh | None = None) -> SolutionTriple:
    """Minimize on K1, K2 and K3 and return the three fields with reports."""
    if mesh is None:
        mesh = build_mesh(config.params.dim, config.cells_per_side)
    P = LaplacePreconditioner(mesh)
    fields = []
    reports = []
    for k in (KIndex.K1, KIndex.K2, KIndex.K3):
        u, rep = _descend_or_annotate(mesh, config, k, P)
        fields.append(u)
        reports.append(rep)
    triple = SolutionTriple(fields[0], fields[1], fields[2], tuple(reports))
    if all(rep.error is None for rep in reports):
        triple.validate_distinct()
    return triple


def reference_bump(mesh: Mesh, seed: int) -> np.ndarray:
    """The unscaled nonnegative bump shape used by sweeps, fixed per seed."""
    rng = np.random.default_rng(seed)
    jitter = 1.0 + 0.1 * rng.random(mesh.n_vertices)
    bump = np.prod(np.sin(np.pi * mesh.vertices), axis=1)
    return apply_dirichlet(mesh, bump * jitter)


def lambda_sweep(config: SolverConfig, lambdas) -> list[SweepRow]:
    """Scale a fixed reference bump and minimize on all three sets for each
    coupling value.  Couplings must be positive and strictly increasing;
    per-row failures are recorded as nan entries."""
    lams = [float(x) for x in lambdas]
    if not lams:
        raise ConfigurationError("lambda sweep needs at least one value")
    if any(x <= 0.0 for x in lams):
        raise ConfigurationError("sweep couplings must be positive")
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ConfigurationError("sweep couplings must be strictly increasing")

    mesh = build_mesh(config.params.dim, config.cells_per_side)
    P = LaplacePreconditioner(mesh)
    w_ref = reference_bump(mesh, config.seed)
    nl = config.nonlin
    rows = []
    for lam in lams:
        params = replace(config.params, lam=lam)
        cfg = replace(config, params=params)
        try:
            t_lam = scale_to_manifold(mesh, nl, params, w_ref, 1,
                                      config.constraint_tol).t
        except NoRootError:
            t_lam = float("nan")
        energies = []
        flags = []
        for k in (KIndex.K1, KIndex.K2, KIndex.K3):
            _, rep = _descend_or_annotate(mesh, cfg, k, P)
            if rep.error is None:
                energies.append(rep.energy)
                flags.append(rep.below_threshold)
            else:
                energies.append(float("nan"))
                flags.append(None)
        rows.append(SweepRow(lam, t_lam, energies[0], energies[1],
                             energies[2], flags[0], flags[1], flags[2]))
    return rows
