import numpy as np
import pytest
import scipy.linalg

from spinchain import (
    ChainModel,
    PConstControl,
    PLinearControl,
    ShiftFunction,
    ZeroControl,
    build_free_hamiltonian,
    pconst_bounds,
    pconst_propagator,
    propagate_continuous,
    propagate_fixed_rk4,
    propagate_pconst,
    uniform_grid,
    zero_control_state,
)
from spinchain.dynamics import PropagationError
from spinchain.verify import transfer_infidelity_n3

from conftest import basis_state, make_envelopes


def random_pconst(model, M, rng):
    """Admissible random piecewise-constant control within the shelves."""
    grid = uniform_grid(model.T, M)
    nu = pconst_bounds(grid, make_envelopes(model.T))
    c = rng.uniform(-1.0, 1.0, (2, M)) * nu
    return PConstControl(grid=grid, a=c.reshape(-1))


class TestPConstPropagation:
    def test_single_step_is_free_exponential(self):
        m = ChainModel(N=4, T=0.7)
        ctrl = PConstControl(grid=np.array([0.0, 0.7]), a=np.zeros(2))
        psi0 = basis_state(4, 0)
        traj = propagate_pconst(m, ctrl, psi0)
        expected = scipy.linalg.expm(-1j * build_free_hamiltonian(m) * 0.7) @ psi0
        assert np.allclose(traj.final_state, expected, atol=1e-13)
        assert abs(np.linalg.norm(traj.final_state) - 1.0) < 1e-12

    def test_zero_control_transfer_value_at_pi(self):
        # closed-form N=3 transfer infidelity at t = pi equals 5/9
        m = ChainModel(N=3, T=np.pi)
        ctrl = PConstControl(grid=uniform_grid(m.T, 64), a=np.zeros(128))
        traj = propagate_pconst(m, ctrl, basis_state(3, 0))
        infid = 1.0 - abs(traj.final_state[-1]) ** 2
        assert infid == pytest.approx(5.0 / 9.0, abs=1e-12)

    def test_rejects_non_unit_initial_state(self):
        m = ChainModel(N=3, T=1.0)
        ctrl = PConstControl(grid=uniform_grid(1.0, 4), a=np.zeros(8))
        with pytest.raises(ValueError):
            propagate_pconst(m, ctrl, np.array([1.0, 1.0, 0.0]))

    def test_rejects_degenerate_grid(self):
        with pytest.raises(ValueError):
            PConstControl(grid=np.array([0.0, 0.5, 0.5, 1.0]), a=np.zeros(6))

    def test_unitarity_of_step_matrices(self):
        rng = np.random.default_rng(11)
        m = ChainModel(N=5, T=2.0)
        prop = pconst_propagator(m, random_pconst(m, 30, rng))
        assert prop.unitarity_defect() < 1e-10

    def test_pade_and_eigh_backends_agree(self):
        rng = np.random.default_rng(3)
        m = ChainModel(N=6, T=1.5)
        ctrl = random_pconst(m, 25, rng)
        pade = pconst_propagator(m, ctrl, method="pade")
        eigh = pconst_propagator(m, ctrl, method="eigh")
        assert np.max(np.abs(pade.steps - eigh.steps)) < 1e-12

    def test_norm_preserved_along_trajectory(self):
        rng = np.random.default_rng(7)
        m = ChainModel(N=3, T=np.pi)
        traj = propagate_pconst(m, random_pconst(m, 50, rng), basis_state(3, 0))
        assert np.max(np.abs(traj.norms() - 1.0)) < 1e-9

    def test_continuity_in_coefficients(self):
        # final state depends linearly on small coefficient perturbations
        rng = np.random.default_rng(19)
        m = ChainModel(N=3, T=np.pi)
        ctrl = random_pconst(m, 40, rng)
        base = propagate_pconst(m, ctrl, basis_state(3, 0)).final_state
        direction = rng.normal(size=ctrl.a.size)
        direction /= np.linalg.norm(direction)
        errs = []
        for h in (1e-2, 1e-3, 1e-4):
            pert = PConstControl(grid=ctrl.grid, a=ctrl.a + h * direction)
            final = propagate_pconst(m, pert, basis_state(3, 0)).final_state
            errs.append(np.linalg.norm(final - base))
        assert errs[0] / errs[1] == pytest.approx(10.0, rel=0.3)
        assert errs[1] / errs[2] == pytest.approx(10.0, rel=0.3)


class TestContinuousPropagation:
    def test_zero_control_matches_analytic_flow(self):
        m = ChainModel(N=3, T=2 * np.pi)
        sig = ShiftFunction.linear(m)
        out = np.linspace(0.0, m.T, 301)
        traj = propagate_continuous(m, ZeroControl(m.T), sig, tol=1e-10, output_grid=out, psi0=basis_state(3, 0))
        ref = zero_control_state(m, out, basis_state(3, 0))
        assert np.max(np.abs(traj.states - ref)) < 1e-8

    def test_matches_exact_propagator_on_pconst_controls(self):
        rng = np.random.default_rng(23)
        for n, M in ((2, 10), (3, 50), (5, 10)):
            m = ChainModel(N=n, T=np.pi)
            ctrl = random_pconst(m, M, rng)
            sig = ShiftFunction.piecewise_midpoint(m, ctrl.grid)
            exact = propagate_pconst(m, ctrl, basis_state(n, 0))
            adaptive = propagate_continuous(m, ctrl, sig, tol=1e-10, output_grid=ctrl.grid, psi0=basis_state(n, 0))
            assert np.max(np.abs(exact.states - adaptive.states)) < 1e-7

    def test_final_norm_within_tolerance(self):
        rng = np.random.default_rng(2)
        m = ChainModel(N=4, T=np.pi)
        grid = np.linspace(0.0, m.T, 101)
        vals = np.column_stack([0.8 * np.sin(grid), 0.5 * np.sin(2 * grid)])
        ctrl = PLinearControl(grid=grid, values=vals)
        traj = propagate_continuous(m, ctrl, ShiftFunction.linear(m), tol=1e-10, psi0=basis_state(4, 0))
        assert np.max(np.abs(traj.norms() - 1.0)) < 1e-9

    def test_rejects_nonpositive_tolerance(self):
        m = ChainModel(N=2, T=1.0)
        with pytest.raises(ValueError):
            propagate_continuous(m, ZeroControl(1.0), ShiftFunction.linear(m), tol=0.0)

    def test_rejects_output_grid_outside_horizon(self):
        m = ChainModel(N=2, T=1.0)
        with pytest.raises(ValueError):
            propagate_continuous(
                m, ZeroControl(1.0), ShiftFunction.linear(m), output_grid=np.array([0.0, 1.5])
            )


class TestFixedStepCrossCheck:
    def test_rk4_agrees_with_adaptive_on_smooth_control(self):
        # an unprojected sine control is smooth, so neither route pays
        # kink-crossing error and both converge to the same flow
        from spinchain import SineBasisControl

        m = ChainModel(N=3, T=np.pi)
        envs = make_envelopes(m.T)
        ctrl = SineBasisControl(y=np.array([0.9, 1.0, -0.6, 2.0, 0.4, 1.0, 0.3, 3.0]), M_sin=2, envelopes=envs, T=m.T)
        grid = np.linspace(0.0, m.T, 801)
        sig = ShiftFunction.linear(m)
        a = propagate_continuous(m, ctrl, sig, tol=1e-12, output_grid=grid, psi0=basis_state(3, 0))
        b = propagate_fixed_rk4(m, ctrl, sig, grid, substeps=3, psi0=basis_state(3, 0))
        assert np.max(np.abs(a.states - b.states)) < 1e-9

    def test_adaptive_kink_bias_stays_small_on_plinear(self):
        # piecewise-linear controls have node kinks the adaptive stepper
        # crosses; the converged fixed-step route bounds that bias
        m = ChainModel(N=3, T=np.pi)
        grid = np.linspace(0.0, m.T, 801)
        vals = np.column_stack([1.2 * np.sin(grid), 0.7 * np.sin(2 * grid)])
        ctrl = PLinearControl(grid=grid, values=vals)
        sig = ShiftFunction.linear(m)
        a = propagate_continuous(m, ctrl, sig, tol=1e-12, output_grid=grid, psi0=basis_state(3, 0))
        b = propagate_fixed_rk4(m, ctrl, sig, grid, substeps=4, psi0=basis_state(3, 0))
        assert np.max(np.abs(a.states - b.states)) < 5e-8


class TestZeroControlState:
    def test_identity_at_time_zero(self):
        m = ChainModel(N=5, T=1.0)
        psi0 = basis_state(5, 0)
        assert np.allclose(zero_control_state(m, 0.0, psi0), psi0, atol=1e-14)

    def test_transfer_curve_matches_closed_form(self):
        m = ChainModel(N=3, T=4 * np.pi)
        t = np.linspace(0.0, m.T, 1000)
        states = zero_control_state(m, t, basis_state(3, 0))
        infid = 1.0 - np.abs(states[:, -1]) ** 2
        assert np.max(np.abs(infid - transfer_infidelity_n3(t))) < 1e-12

    def test_keeping_revival_at_two_pi(self):
        m = ChainModel(N=3, T=4 * np.pi)
        psi = zero_control_state(m, 2 * np.pi, basis_state(3, 2))
        assert 1.0 - abs(psi[-1]) ** 2 < 1e-12
