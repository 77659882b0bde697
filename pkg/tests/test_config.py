import dataclasses
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpsi.config import (
    PRESETS,
    BulkBiotParams,
    ConfigError,
    FluidParams,
    Geometry,
    PulseSpec,
    SimConfig,
    config_from_mapping,
    config_to_mapping,
    derive_plate_coefficients,
    inlet_pressure,
    load_config,
    moens_korteweg_speed,
    n_steps,
    preset_config,
)


class TestPlateCoefficients:
    def test_bending_stiffness_near_table_value(self):
        pc = derive_plate_coefficients(BulkBiotParams())
        assert pc.D == pytest.approx(1.491e5, rel=1e-3)
        assert abs(pc.D - 1.5e5) / 1.5e5 < 0.01

    def test_storage_and_coupling(self):
        pc = derive_plate_coefficients(BulkBiotParams())
        assert pc.c0_p == pytest.approx(1e-3 + 1 / 2.816e6, rel=1e-12)
        assert pc.alpha_p == pytest.approx(2 * 5.58e5 / 2.816e6, rel=1e-12)
        assert pc.alpha_p == pytest.approx(0.39631, abs=5e-6)

    def test_pass_through_fields(self):
        bulk = BulkBiotParams()
        pc = derive_plate_coefficients(bulk)
        assert (pc.kappa_p, pc.rho_p, pc.gamma_p) == (bulk.kappa, bulk.rho_b, bulk.gamma)

    def test_zero_coupling(self):
        bulk = BulkBiotParams(alpha=0.0)
        pc = derive_plate_coefficients(bulk)
        assert pc.alpha_p == 0.0
        assert pc.c0_p == bulk.c0

    def test_nonpositive_modulus_rejected(self):
        with pytest.raises(ConfigError):
            derive_plate_coefficients(BulkBiotParams(lambda_b=-2.0e6, mu_b=5e5))

    @given(st.floats(0.1, 10.0))
    def test_homogeneity(self, c):
        bulk = BulkBiotParams()
        scaled = dataclasses.replace(bulk, lambda_b=c * bulk.lambda_b, mu_b=c * bulk.mu_b)
        a, b = derive_plate_coefficients(bulk), derive_plate_coefficients(scaled)
        assert b.D == pytest.approx(c * a.D, rel=1e-12)
        assert b.alpha_p == pytest.approx(a.alpha_p, rel=1e-12)

    def test_invariants(self):
        bulk = BulkBiotParams()
        pc = derive_plate_coefficients(bulk)
        assert pc.alpha_p <= bulk.alpha and pc.c0_p >= bulk.c0


class TestMoensKorteweg:
    @pytest.mark.parametrize("H, transit", [(0.01, 0.0298), (0.001, 0.0942)])
    def test_transit_times(self, H, transit):
        _, t = moens_korteweg_speed(Geometry(H=H), FluidParams(), BulkBiotParams())
        assert t == pytest.approx(transit, rel=2e-3)

    def test_unit_radicand(self):
        bulk = BulkBiotParams(lambda_b=0.0, mu_b=0.5)
        speed, transit = moens_korteweg_speed(Geometry(L=3.0, R_f=0.5, H=1.0), FluidParams(rho_f=1.0), bulk)
        assert speed == pytest.approx(1.0)
        assert transit == pytest.approx(3.0)

    def test_nonpositive_radicand(self):
        bulk = BulkBiotParams(lambda_b=-1.0, mu_b=0.5)
        with pytest.raises(ConfigError):
            moens_korteweg_speed(Geometry(), FluidParams(), bulk)

    @given(st.floats(1e-4, 0.1), st.floats(1e-4, 0.1), st.floats(0.5, 2.0), st.floats(0.5, 2.0))
    def test_monotone(self, h1, h2, r1, r2):
        g = Geometry()
        s = lambda H, rho: moens_korteweg_speed(dataclasses.replace(g, H=H), FluidParams(rho_f=rho), BulkBiotParams())[0]
        if h1 < h2:
            assert s(h1, 1.0) <= s(h2, 1.0)
        if r1 < r2:
            assert s(0.01, r1) >= s(0.01, r2)


class TestInletPressure:
    pulse = PulseSpec()

    def test_values(self):
        assert inlet_pressure(0.0, self.pulse) == 0.0
        assert inlet_pressure(self.pulse.t_pulse / 2, self.pulse) == pytest.approx(13333.0)
        assert inlet_pressure(self.pulse.t_pulse, self.pulse) == 0.0

    def test_negative_time(self):
        with pytest.raises(ValueError):
            inlet_pressure(-1e-3, self.pulse)

    @given(st.floats(0.0, 0.02))
    def test_bounded_and_cut_off(self, t):
        p = inlet_pressure(t, self.pulse)
        assert 0.0 <= p <= self.pulse.p_max
        if t >= self.pulse.t_pulse:
            assert p == 0.0

    def test_continuity_at_cutoff(self):
        t = self.pulse.t_pulse
        assert inlet_pressure(t * (1 - 1e-9), self.pulse) < 1e-6 * self.pulse.p_max


class TestLoadConfig:
    def test_empty_document_gives_defaults(self):
        cfg = load_config("")
        assert (cfg.nx_f, cfg.ny_f, cfg.dt) == (300, 25, 5e-5)
        assert cfg.params.geometry.H == 0.01
        assert cfg.params.bulk == BulkBiotParams()
        assert cfg.params.fluid == FluidParams()

    def test_negative_dt(self):
        with pytest.raises(ConfigError, match="dt must be positive"):
            load_config("[run]\ndt = -1\n")

    def test_overrides_echo(self):
        cfg = load_config("[run]\nnx_f = 150\nny_f = 12  # half resolution\n")
        assert (cfg.nx_f, cfg.ny_f) == (150, 12)
        assert dataclasses.replace(cfg, nx_f=300, ny_f=25) == SimConfig()

    def test_sections_and_comments(self):
        text = "# comment\n[geometry]\nh = 0.001\n[biot]\nalpha = 0.5\n[pulse]\nt_pulse=0.004\n[fluid]\nbeta=2\n"
        cfg = load_config(text)
        p = cfg.params
        assert (p.geometry.H, p.bulk.alpha, p.pulse.t_pulse, p.fluid.beta) == (0.001, 0.5, 0.004, 2.0)

    @pytest.mark.parametrize(
        "text",
        ["[run]\nbogus = 1\n", "[nowhere]\nx = 1\n", "[run]\nnx_f = abc\n", "[run\n", "[run]\nnx_f = 10\nnx_p = 20\n"],
    )
    def test_errors(self, text):
        with pytest.raises(ConfigError):
            load_config(text)

    def test_mismatched_interface_grid(self):
        with pytest.raises(ConfigError, match="nx_p"):
            SimConfig(nx_f=10, nx_p=12).validate()

    def test_roundtrip_mapping(self):
        cfg = preset_config("desk-h001").replace(nitsche_penalty=3.0, x_probe=2.0)
        assert config_from_mapping(config_to_mapping(cfg)) == cfg

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_presets_valid(self, name):
        cfg = preset_config(name)
        cfg.validate()
        assert cfg.params.geometry.H in (0.01, 0.001)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            preset_config("nope")


class TestSimConfig:
    def test_defaults_and_derived(self):
        cfg = SimConfig()
        assert cfg.penalty == 10.0
        assert cfg.probe == cfg.params.geometry.L
        assert cfg.n_steps == 800

    def test_snapshot_times(self):
        assert SimConfig().snapshot_times() == (0.0, 0.01, 0.02, 0.03)
        thin = preset_config("desk-h001")
        assert thin.snapshot_times() == (0.0, 0.031, 0.062, 0.093)

    def test_t_end_below_dt(self):
        with pytest.raises(ConfigError):
            SimConfig(t_end=1e-6).validate()

    @pytest.mark.parametrize("t_end, dt, n", [(0.04, 1e-4, 400), (0.0, 1e-4, 0), (1e-3, 3e-4, 4)])
    def test_n_steps(self, t_end, dt, n):
        assert n_steps(t_end, dt) == n == math.ceil(t_end / dt - 1e-9)
