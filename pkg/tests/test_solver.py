import math

import numpy as np
import pytest

from mpce.core import Grid2D, ScalarField, Scheme, SolverParams, flatten
from mpce.solver import SolverDivergenceError, laplacian, reaction, simulate
from mpce.solver import _stencil_py


def coscos(grid):
    x, y = grid.xy()
    return np.cos(np.pi * x) * np.cos(np.pi * y)


class TestLaplacian:
    def test_constant_is_harmonic(self):
        g = Grid2D()
        lap = laplacian(ScalarField(g, np.full(g.n_nodes, 3.7)))
        assert np.abs(lap.values).max() < 1e-10

    def test_eigenmode_truncation_bound(self):
        # 5-point stencil truncation: |err| <= (h_x^2 + h_y^2) * pi^4 / 12
        # from the exact fourth derivative of cos(pi x) cos(pi y)
        g = Grid2D()
        f = coscos(g)
        lap = laplacian(ScalarField(g, f)).as_2d()
        exact = (-2 * np.pi**2 * f).reshape(g.ny, g.nx)
        err = np.abs(lap - exact)[1:-1, 1:-1].max()
        bound = (g.h_x**2 + g.h_y**2) * np.pi**4 / 12
        assert err <= bound

    def test_linear_field_interior_zero(self):
        g = Grid2D()
        x, _ = g.xy()
        lap = laplacian(ScalarField(g, x)).as_2d()
        assert np.abs(lap[1:-1, 1:-1]).max() < 1e-10

    def test_grid_too_small(self):
        g = Grid2D(nx=2, ny=2)
        with pytest.raises(ValueError):
            laplacian(ScalarField(g, np.zeros(4)))

    def test_periodic_wraps_edges(self):
        # an impulse at the corner couples to the opposite edges under the
        # periodic closure, and not under the mirrored one
        F = np.zeros((5, 5))
        F[0, 0] = 1.0
        lap_p = _stencil_py.laplacian_2d(F, 1.0, 1.0, periodic=True)
        lap_n = _stencil_py.laplacian_2d(F, 1.0, 1.0, periodic=False)
        assert lap_p[0, 4] == 1.0 and lap_p[4, 0] == 1.0
        assert lap_n[0, 4] == 0.0 and lap_n[4, 0] == 0.0
        # mirrored ghost doubles the inner neighbor instead
        assert lap_n[0, 1] == 1.0 and lap_n[1, 0] == 1.0


class TestReaction:
    def test_homogeneous_equilibrium(self):
        du, dv = reaction(2.0, 1.5 / 2.0, 2.0, 1.5)
        assert du == pytest.approx(0.0, abs=1e-12)
        assert dv == pytest.approx(0.0, abs=1e-12)

    def test_case_i_equilibrium(self):
        du, dv = reaction(1.0, 1.7, 1.0, 1.7)
        assert du == pytest.approx(0.0, abs=1e-12)
        assert dv == pytest.approx(0.0, abs=1e-12)

    def test_direct_evaluation(self):
        # a - (1+b)u + v u^2 = 1 - 8 + 4 = -3 ; b u - v u^2 = 6 - 4 = 2
        du, dv = reaction(2.0, 1.0, 1.0, 3.0)
        assert du == pytest.approx(-3.0)
        assert dv == pytest.approx(2.0)


class TestSimulate:
    def test_fixed_point_preserved_both_schemes(self):
        g = Grid2D()
        for scheme in (Scheme.EXPLICIT_SUBSTEP, Scheme.IMEX):
            p = SolverParams(scheme=scheme)
            h2 = ScalarField(g, np.full(g.n_nodes, p.b / p.a))
            traj = simulate(h2, p)
            for s in traj.snapshots:
                assert np.abs(s.values - p.b / p.a).max() < 1e-8

    def test_diffusion_only_eigenmode_decay(self):
        # with the reaction disabled, v = cos(pi x) cos(pi y) decays at the
        # continuous rate exp(-2 pi^2 D1 t) to within 1%
        g = Grid2D()
        f0 = coscos(g)
        p = SolverParams(nt=10, t_end=0.5)
        traj = simulate(ScalarField(g, f0), p, reaction_enabled=False)
        for s, t in zip(traj.snapshots, traj.times):
            exact = f0 * math.exp(-2 * np.pi**2 * p.D1 * t)
            rel = np.abs(s.values - exact).max() / np.abs(exact).max()
            assert rel <= 0.01

    def test_snapshot_times(self):
        g = Grid2D(nx=8, ny=8)
        p = SolverParams(nt=20)
        traj = simulate(ScalarField(g, np.zeros(64)), p)
        assert np.allclose(traj.times, np.arange(1, 21) / 20)
        p2 = SolverParams(b=3.0, nt=10)
        traj2 = simulate(ScalarField(g, np.zeros(64)), p2)
        assert np.allclose(traj2.times, np.arange(1, 11) / 10)

    def test_determinism_bit_identical(self):
        g = Grid2D()
        rng = np.random.default_rng(5)
        h2 = ScalarField(g, np.abs(rng.standard_normal(g.n_nodes)) * 0.4)
        p = SolverParams()
        a = flatten(simulate(h2, p))
        b = flatten(simulate(h2, p))
        assert np.array_equal(a, b)

    def test_scheme_equivalence_case_i(self):
        g = Grid2D()
        rng = np.random.default_rng(6)
        h2 = ScalarField(g, np.abs(rng.standard_normal(g.n_nodes)) * 0.4)
        fe = flatten(simulate(h2, SolverParams()))
        fi = flatten(simulate(h2, SolverParams(scheme=Scheme.IMEX)))
        assert np.linalg.norm(fe - fi) / np.linalg.norm(fe) <= 1e-2

    def test_negative_input_warns_not_rejects(self):
        g = Grid2D()
        h2 = ScalarField(g, np.full(g.n_nodes, -0.1))
        with pytest.warns(RuntimeWarning, match="negative"):
            traj = simulate(h2, SolverParams(nt=4, t_end=0.04))
        assert traj.nt == 4

    def test_divergence_reports_step(self):
        # giant field blows up the cubic reaction under forward Euler
        g = Grid2D(nx=8, ny=8)
        h2 = ScalarField(g, np.full(64, 1e8))
        with pytest.raises(SolverDivergenceError) as exc:
            simulate(h2, SolverParams(nt=1, t_end=0.05))
        assert exc.value.step >= 0

    def test_backend_agreement(self):
        # compiled and NumPy kernels run the same arithmetic
        from mpce.solver import brusselator as bb

        g = Grid2D(nx=12, ny=12)
        rng = np.random.default_rng(8)
        h2v = np.abs(rng.standard_normal(144)) * 0.4
        p = SolverParams(nt=2, t_end=0.1)
        ref = flatten(simulate(ScalarField(g, h2v), p))

        saved = bb._kernel
        try:
            bb._kernel = _stencil_py
            alt = flatten(simulate(ScalarField(g, h2v), p))
        finally:
            bb._kernel = saved
        assert np.allclose(ref, alt, rtol=1e-12, atol=1e-14)

    def test_case_ii_transient_is_unstable_mode(self):
        # b=3 > 1 + a^2: the uniform state is unstable and the pointwise
        # dynamics head toward a limit cycle; within the unit data window the
        # probe covers the first (large, non-equilibrating) excursion
        g = Grid2D()
        rng = np.random.default_rng(9)
        h2 = ScalarField(g, np.abs(rng.standard_normal(g.n_nodes)) * 0.4)
        p = SolverParams(b=3.0, nt=10)
        traj = simulate(h2, p)
        probe = [s.as_2d()[14, 14] for s in traj.snapshots]
        # far from the (unstable) equilibrium v = b/a = 3 and still moving
        assert abs(probe[-1] - 3.0) > 0.5
        assert abs(probe[-1] - probe[-2]) > 1e-3


class TestLimitCycle:
    def test_pointwise_limit_cycle_at_case_ii_rates(self):
        # the reaction system at (a, b) = (1, 3) orbits a limit cycle with
        # period ~7.2; integrate the pointwise dynamics long enough to see a
        # non-monotone orbit that returns near its starting phase
        a, b = 1.0, 3.0
        u, v = 1.0, 0.5
        dt = 1e-3
        us, vs = [u], [v]
        for _ in range(20_000):  # t = 20
            du, dv = reaction(u, v, a, b)
            u, v = u + dt * du, v + dt * dv
            us.append(u)
            vs.append(v)
        vs = np.array(vs)
        # non-monotone: both signs of dv appear well after the transient
        dmid = np.diff(vs[5_000:])
        assert (dmid > 0).any() and (dmid < 0).any()
        # recurrence: late state comes back near an earlier state (one period)
        late = np.array([us[15_000], vs[15_000]])
        window = np.array([us[5_000:12_000], vs[5_000:12_000]]).T
        assert np.min(np.linalg.norm(window - late, axis=1)) < 0.05


@pytest.mark.slow
class TestConvergence:
    def test_spatial_order_of_accuracy(self):
        # temporal error suppressed with a small substep safety factor so the
        # h^2 stencil error dominates; observed order must sit in [1.8, 2.2]
        errs = {}
        for n in (28, 56, 112):
            g = Grid2D(nx=n, ny=n)
            f0 = coscos(g)
            p = SolverParams(nt=1, t_end=0.05, substep_safety=0.05)
            traj = simulate(ScalarField(g, f0), p, reaction_enabled=False)
            exact = f0 * math.exp(-2 * np.pi**2 * p.D1 * 0.05)
            errs[n] = np.linalg.norm(traj.snapshots[0].values - exact) / np.linalg.norm(exact)
        order1 = math.log2(errs[28] / errs[56])
        order2 = math.log2(errs[56] / errs[112])
        assert 1.8 <= order1 <= 2.2
        assert 1.8 <= order2 <= 2.2
