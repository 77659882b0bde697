import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dense_oracles import plate_matrix
from fpsi.config import PhysicalParams, PulseSpec
from fpsi.fpsi_plate import PlateStokesProblem, clamped_bump, hermite_interpolate

DT = 1e-4
QUIET = dataclasses.replace(PhysicalParams(), pulse=PulseSpec(p_max=0.0))


@pytest.fixture(scope="module")
def small(params):
    return PlateStokesProblem(params, 6, 3)


@pytest.fixture(scope="module")
def quiet():
    return PlateStokesProblem(QUIET, 6, 3)


def pulse_run(problem, n):
    state = problem.zero_state()
    for k in range(1, n + 1):
        state = problem.advance(state, DT, k * DT)
    return state


class TestAssembly:
    @pytest.mark.parametrize("H", [0.01, 0.001])
    @pytest.mark.parametrize("dt", [1e-4, 5e-3])
    def test_matches_dense_oracle(self, H, dt):
        params = dataclasses.replace(PhysicalParams(), geometry=dataclasses.replace(PhysicalParams().geometry, H=H))
        problem = PlateStokesProblem(params, 2, 1)
        oracle = plate_matrix(problem, dt)
        sparse = problem.unconstrained_matrix(dt).toarray()
        assert np.max(np.abs(sparse - oracle)) <= 1e-12 * np.max(np.abs(oracle))

    @pytest.mark.parametrize("nx, ny", [(2, 1), (6, 3), (20, 4)])
    def test_dimension(self, params, nx, ny):
        problem = PlateStokesProblem(params, nx, ny)
        n2, n1 = problem.fluid.n2, problem.fluid.n1
        assert n2 == (2 * nx + 1) * (2 * ny + 1) and n1 == (nx + 1) * (ny + 1)
        assert problem.size == 2 * n2 + n1 + 2 * (nx + 1) + 2 * (nx + 1)
        assert problem.step_matrix(DT).shape == (problem.size, problem.size)

    def test_constrained_rows_are_identity(self, small):
        mat = small.step_matrix(DT)
        for row in small.constrained:
            r = mat.getrow(row)
            assert r.nnz == 1 and r.indices[0] == row and r.data[0] == 1.0

    def test_fluid_block_symmetric(self, small):
        mat = small.unconstrained_matrix(DT)
        u = slice(0, 2 * small.fluid.n2)
        block = mat[u, u]
        assert abs(block - block.T).max() <= 1e-14 * abs(block).max()

    def test_bending_block_spd_after_clamping(self, small):
        kh = small.plate_matrices["Kh"].toarray()
        assert np.allclose(kh, kh.T, rtol=0, atol=1e-12 * np.abs(kh).max())
        eig = np.linalg.eigvalsh(kh)
        assert eig.min() >= -1e-9 * eig.max()
        free = np.setdiff1d(np.arange(len(kh)), small.hermite.constrained)
        assert np.linalg.eigvalsh(kh[np.ix_(free, free)]).min() > 0

    def test_zero_step_rhs(self, quiet):
        assert not np.any(quiet.step_rhs(quiet.zero_state(), DT, DT))

    def test_step_system(self, small):
        system = small.assemble_step_system(small.zero_state(), DT, DT)
        assert system.layout == small.layout
        assert set(system.split(np.zeros(small.size))) == set(small.layout)

    def test_bad_state_rejected(self, small):
        bad = small.zero_state().replace(qbar=np.zeros(3))
        with pytest.raises(ValueError):
            small.advance(bad, DT, DT)
        with pytest.raises(ValueError):
            small.advance(small.zero_state(), 0.0, 0.0)


class TestAdvance:
    def test_zero_data_stays_zero(self, quiet):
        state = quiet.zero_state()
        for k in range(1, 6):
            state = quiet.advance(state, DT, k * DT)
            for name in ("u", "pi", "w", "v", "qjump", "qbar"):
                assert not np.any(getattr(state, name))
        assert state.t == 5 * DT

    def test_reconstruction_identity(self, small):
        prev = pulse_run(small, 3)
        nxt = small.advance(prev, DT, prev.t + DT)
        assert np.max(np.abs(nxt.w - (prev.w + DT * nxt.v))) == 0.0
        assert np.all(nxt.v[small.hermite.constrained] == 0.0)
        assert np.all(nxt.u[small.fluid.n2 + small.fluid.sym_dofs] == 0.0)

    def test_divergence_free(self, small):
        state = pulse_run(small, 5)
        div = small.fluid.divergence
        assert np.linalg.norm(div @ state.u) <= 1e-9 * abs(div).max() * np.linalg.norm(state.u)
        assert np.linalg.norm(state.u) > 0

    def test_deterministic_replay(self, small):
        mid = pulse_run(small, 2)
        a = small.advance(mid, DT, mid.t + DT)
        b = small.advance(mid, DT, mid.t + DT)
        assert a.u.tobytes() == b.u.tobytes() and a.w.tobytes() == b.w.tobytes()

    def test_energy_non_increasing_without_forcing(self, quiet):
        state = quiet.initial_state(0.05)
        totals = [quiet.energy(state).total]
        for k in range(1, 30):
            state = quiet.advance(state, DT, k * DT)
            totals.append(quiet.energy(state).total)
        assert totals[0] > 0
        assert np.all(np.diff(totals) <= 1e-10 * totals[0])


class TestFiltrationVelocity:
    def test_zero_state(self, small):
        assert not np.any(small.filtration_velocity(small.zero_state()))

    @given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
    def test_saturated_condition(self, small, coeffs):
        L = small.params.geometry.L
        p = np.polynomial.Polynomial(coeffs, domain=[0, L])
        u = small.fluid.interpolate(lambda x, y: 0 * x, lambda x, y: p(x))
        state = small.zero_state().replace(u=u, v=hermite_interpolate(small.gamma.vertices, p, p.deriv()))
        assert np.allclose(small.filtration_velocity(state), 0.0, atol=1e-12)

    def test_unit_normal_velocity(self, small):
        u = small.fluid.interpolate(lambda x, y: 0 * x, lambda x, y: 1 + 0 * x)
        out = small.filtration_velocity(small.zero_state().replace(u=u))
        assert out.shape == (small.gamma.n_cells,) and np.allclose(out, 1.0, rtol=0, atol=0)


class TestInterfaceProfiles:
    def test_clamped_bump(self, small):
        L = small.params.geometry.L
        f, df = clamped_bump(0.05, L)
        assert f(np.array([0.0, L])) == pytest.approx([0, 0], abs=1e-18)
        assert df(np.array([0.0, L])) == pytest.approx([0, 0], abs=1e-17)
        assert f(L / 2) == pytest.approx(0.05)
        state = small.initial_state(0.05)
        assert np.allclose(small.displacement_profile(state), f(small.gamma.vertices))
        assert np.all(state.w[small.hermite.constrained] == 0.0)

    def test_norms_of_zero(self, small):
        assert all(v == 0 for v in small.norms(small.zero_state()).values())
        assert small.energy_norm(small.zero_state()) == 0.0


class TestPatch:
    @pytest.mark.parametrize("nx, ny, dt", [(3, 2, 1e-3), (8, 4, 1e-2), (12, 5, 5e-3)])
    def test_exact_quadratic_flow(self, nx, ny, dt):
        from patch_problem import run_patch

        result = run_patch(nx, ny, dt)
        assert result.velocity_error <= 1e-9 and result.pressure_error <= 1e-9
        assert result.interface_rows <= 1e-9
