import numpy as np
import pytest

from plap.errors import ConfigurationError, LostSignError
from plap.functional import (Nonlinearity, RunParameters, energy,
                             sobolev_threshold)
from plap.mesh import apply_dirichlet, build_mesh
from plap.nehari import (KIndex, constraint_phi, constraint_scale,
                         fibering_coefficients, project_pair_to_M3)
from plap.optimizer import (LaplacePreconditioner, SolverConfig, descend,
                            initial_point, lambda_sweep, reference_bump,
                            retract, solve_three)
from plap.verify import check_membership

from conftest import coarse_config

P2 = RunParameters(p=1.5, dim=2, lam=20.0, eps=1e-8)
NL2 = Nonlinearity(family="signed", q=3.0, r=3.0)


class TestSolverConfig:
    def test_valid(self):
        coarse_config()

    @pytest.mark.parametrize("kwargs", [
        dict(armijo_c=0.0), dict(armijo_c=1.0),
        dict(backtrack_factor=0.0), dict(backtrack_factor=1.0),
        dict(grad_tol=0.0), dict(constraint_tol=-1e-9),
        dict(max_iters=0), dict(cells_per_side=1), dict(step_init=0.0),
    ])
    def test_invalid(self, kwargs):
        base = dict(params=P2, nonlin=NL2, cells_per_side=6)
        base.update(kwargs)
        with pytest.raises(ConfigurationError):
            SolverConfig(**base)

    def test_nonlinearity_validated(self):
        with pytest.raises(ConfigurationError):
            SolverConfig(params=P2,
                         nonlin=Nonlinearity(family="signed", q=7.0, r=3.0),
                         cells_per_side=6)


class TestInitialPoint:
    def test_nonnegative_start(self):
        mesh = build_mesh(2, 8)
        u = initial_point(mesh, NL2, P2, KIndex.K1, seed=0)
        assert np.all(u >= 0.0)
        assert np.any(u > 0.0)
        A = constraint_scale(mesh, P2, u, 1)
        assert abs(constraint_phi(mesh, NL2, P2, u, 1)) <= 1e-9 * A

    def test_nonpositive_start_mirrors(self):
        mesh = build_mesh(2, 8)
        u1 = initial_point(mesh, NL2, P2, KIndex.K1, seed=0)
        u2 = initial_point(mesh, NL2, P2, KIndex.K2, seed=0)
        assert np.all(u2 <= 0.0)
        assert np.array_equal(u2, -u1)
        A = constraint_scale(mesh, P2, u2, 2)
        assert abs(constraint_phi(mesh, NL2, P2, u2, 2)) <= 1e-9 * A

    def test_sign_changing_start(self):
        mesh = build_mesh(2, 8)
        u = initial_point(mesh, NL2, P2, KIndex.K3, seed=0)
        assert np.any(u > 0.0)
        assert np.any(u < 0.0)
        A = constraint_scale(mesh, P2, u, 1) + constraint_scale(mesh, P2, u, 2)
        assert abs(constraint_phi(mesh, NL2, P2, u, 1)) <= 1e-9 * A
        assert abs(constraint_phi(mesh, NL2, P2, u, 2)) <= 1e-9 * A

    def test_too_coarse_for_sign_changing(self):
        mesh = build_mesh(2, 3)
        with pytest.raises(ConfigurationError):
            initial_point(mesh, NL2, P2, KIndex.K3, seed=0)


class TestRetract:
    def test_fixed_point(self):
        mesh = build_mesh(2, 8)
        u = initial_point(mesh, NL2, P2, KIndex.K1, seed=0)
        out = retract(mesh, NL2, P2, u, KIndex.K1)
        assert np.max(np.abs(out - u)) <= 1e-9 * np.max(np.abs(u))

    def test_recovers_scaled_member(self):
        mesh = build_mesh(2, 8)
        u = initial_point(mesh, NL2, P2, KIndex.K1, seed=0)
        out = retract(mesh, NL2, P2, 1.3 * u, KIndex.K1)
        assert np.allclose(out, u, rtol=1e-8, atol=0)

    def test_clips_and_rescales(self):
        mesh = build_mesh(2, 8)
        u = initial_point(mesh, NL2, P2, KIndex.K1, seed=0)
        rng = np.random.default_rng(0)
        bent = u - 0.1 * np.max(u) * rng.random(mesh.n_vertices)
        bent = apply_dirichlet(mesh, bent)
        out = retract(mesh, NL2, P2, bent, KIndex.K1)
        assert np.all(out >= 0.0)
        A = constraint_scale(mesh, P2, out, 1)
        assert abs(constraint_phi(mesh, NL2, P2, out, 1)) <= 1e-9 * A

    def test_lost_sign(self):
        mesh = build_mesh(2, 8)
        u = initial_point(mesh, NL2, P2, KIndex.K1, seed=0)
        with pytest.raises(LostSignError):
            retract(mesh, NL2, P2, -u, KIndex.K1)

    def test_sign_changing_fixed_point(self):
        mesh = build_mesh(2, 8)
        u = initial_point(mesh, NL2, P2, KIndex.K3, seed=0)
        out = retract(mesh, NL2, P2, u, KIndex.K3)
        assert np.max(np.abs(out - u)) <= 1e-8 * np.max(np.abs(u))

    def test_sign_changing_scaled_recovery(self):
        mesh = build_mesh(2, 8)
        u = initial_point(mesh, NL2, P2, KIndex.K3, seed=0)
        out = retract(mesh, NL2, P2, 0.7 * u, KIndex.K3)
        A = (constraint_scale(mesh, P2, out, 1)
             + constraint_scale(mesh, P2, out, 2))
        assert abs(constraint_phi(mesh, NL2, P2, out, 1)) <= 1e-9 * A
        assert abs(constraint_phi(mesh, NL2, P2, out, 2)) <= 1e-9 * A


class TestPreconditioner:
    def test_norm_identities(self):
        mesh = build_mesh(2, 6)
        P = LaplacePreconditioner(mesh)
        rng = np.random.default_rng(1)
        r = apply_dirichlet(mesh, rng.standard_normal(mesh.n_vertices))
        v = P.solve(r)
        assert np.all(v[mesh.boundary] == 0.0)
        quad = float(np.dot(r, v))
        assert np.isclose(P.dual_norm(r) ** 2, quad, rtol=1e-10, atol=0)
        assert np.isclose(P.norm(v) ** 2, quad, rtol=1e-10, atol=0)


class TestDescend:
    def test_monotone_convergent_run(self, coarse_run):
        config, mesh, triple = coarse_run
        for rep, u in zip(triple.reports, triple.fields()):
            assert rep.error is None
            assert rep.converged
            assert rep.projected_norm <= config.grad_tol
            hist = rep.energy_history
            assert all(b <= a for a, b in zip(hist, hist[1:]))
            assert np.isclose(hist[-1], rep.energy, rtol=0, atol=0.0)
            assert rep.max_constraint_residual <= 1e-9
            kind = KIndex[rep.kind]
            check = check_membership(mesh, config.nonlin, config.params,
                                     u, kind)
            assert check.passed
            below = rep.energy < sobolev_threshold(config.params)
            assert rep.below_threshold == below

    def test_initial_energy_bounds_minimum(self, coarse_run):
        config, mesh, triple = coarse_run
        u0 = initial_point(mesh, config.nonlin, config.params, KIndex.K1,
                           config.seed)
        E0 = energy(mesh, config.nonlin, config.params, u0)
        assert triple.reports[0].energy <= E0 + 1e-15
        A = fibering_coefficients(mesh, config.nonlin, config.params, u0).A
        assert E0 <= A / config.params.p

    def test_descend_rejects_off_constraint_start(self):
        config = coarse_config()
        mesh = build_mesh(2, config.cells_per_side)
        u0 = initial_point(mesh, config.nonlin, config.params, KIndex.K1, 0)
        u, rep = descend(mesh, config, KIndex.K1, u0)
        assert rep.converged
        assert np.all(u >= 0.0)


class TestSolveThree:
    def test_sign_structure_and_distinctness(self, coarse_run):
        _, _, triple = coarse_run
        assert np.all(triple.u1 >= 0.0)
        assert np.all(triple.u2 <= 0.0)
        assert np.any(triple.u3 > 0.0)
        assert np.any(triple.u3 < 0.0)
        triple.validate_distinct()

    def test_odd_family_negation_symmetry(self, coarse_run):
        _, _, triple = coarse_run
        assert np.array_equal(triple.u2, -triple.u1)

    def test_deterministic_rerun(self, coarse_run):
        config, mesh, triple = coarse_run
        again = solve_three(config, mesh)
        for a, b in zip(triple.fields(), again.fields()):
            assert np.array_equal(a, b)
        assert triple.reports == again.reports


class TestLambdaSweep:
    def test_rows_and_monotone_scaling(self):
        config = coarse_config()
        rows = lambda_sweep(config, [1.0, 2.0, 4.0])
        assert len(rows) == 3
        assert [row.lam for row in rows] == [1.0, 2.0, 4.0]
        ts = [row.t_lambda for row in rows]
        assert all(b <= a + 1e-15 for a, b in zip(ts, ts[1:]))
        mesh = build_mesh(2, config.cells_per_side)
        w = reference_bump(mesh, config.seed)
        for row in rows:
            params = RunParameters(p=P2.p, dim=2, lam=row.lam, eps=P2.eps)
            c = fibering_coefficients(mesh, config.nonlin, params, w)
            bound = (c.A / (config.nonlin.c3 * row.lam * c.C)) ** (
                1.0 / (config.nonlin.q - params.p))
            assert row.t_lambda <= bound * (1 + 1e-12)
            for e in (row.c1, row.c2, row.c3):
                assert np.isfinite(e)

    @pytest.mark.parametrize("lams", [[], [2.0, 1.0], [-1.0], [1.0, 1.0]])
    def test_bad_lists(self, lams):
        with pytest.raises(ConfigurationError):
            lambda_sweep(coarse_config(), lams)
