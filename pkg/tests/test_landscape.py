import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from scrap import IntegratorConfig, PulseParams
from scrap.landscape import (GridMap, GridSpec, adiabaticity_map, critical_points,
                             efficiency_map, full_maps, max_adiabaticity, p2_adiabatic,
                             read_matrix_csv, saddle_curve_sigma, saddle_curve_ts,
                             write_matrix_csv)
from scrap.model import SQRT_2PI, gaussian_stark

T = 65.0


# adiabatic P2 ------------------------------------------------------------------

def test_p2_adiabatic_limits(ref):
    # long after both pulses the detuning is back at -S0 and the pump is off
    assert p2_adiabatic(200.0, 0.3, 2.0, ref) == pytest.approx(0.0, abs=1e-12)
    # inside the Stark pulse with the pump nearly gone: delta > 0
    assert p2_adiabatic(T, 0.3, 2.0, ref) > 0.99


def test_p2_adiabatic_half_at_resonance(ref):
    # put the Stark centre where delta(T) = 0 exactly
    sig = 2.0
    ts = saddle_curve_ts(sig * ref.sigma_p, T, ref)[0]
    tau = (ts - ref.t_p) / ref.t_p
    q = ref.with_reduced(tau, sig)
    assert abs(gaussian_stark(T, q)) < 1e-12
    assert p2_adiabatic(T, tau, sig, ref) == pytest.approx(0.5, abs=1e-12)


# saddle curves -----------------------------------------------------------------

def test_saddle_curve_ts_oracle(ref):
    lo, hi = saddle_curve_ts(24.0, T, ref)
    # independent oracle: bisection on delta(T; t_s) = 0
    f = lambda ts: gaussian_stark(T, PulseParams(sigma_s=24.0, t_s=ts))
    assert lo == pytest.approx(brentq(f, 0.0, T), abs=1e-9)
    assert hi == pytest.approx(brentq(f, T, 150.0), abs=1e-9)
    assert (lo, hi) == pytest.approx((40.80, 89.20), abs=0.01)
    assert ((lo - 50) / 50, (hi - 50) / 50) == pytest.approx((-0.184, 0.784), abs=1e-3)


def test_saddle_curve_ts_double_root_and_none(ref):
    s_star = ref.Delta0 / (SQRT_2PI * ref.S0)
    assert s_star == pytest.approx(39.894, abs=1e-3)
    lo, hi = saddle_curve_ts(s_star, T, ref)
    assert lo == pytest.approx(T) and hi == pytest.approx(T)
    assert saddle_curve_ts(s_star * 1.01, T, ref) is None


def test_saddle_curve_sigma():
    assert saddle_curve_sigma(65.0, 65.0)[0] == 0.0
    assert saddle_curve_sigma(41.0, 65.0)[0] == 24.0
    assert saddle_curve_sigma(89.0, 65.0)[0] == 24.0


# critical points ---------------------------------------------------------------

def test_critical_points_reference(ref):
    pts = critical_points(T, ref)
    got = sorted((round(c.tau, 2), round(c.sigma, 1)) for c in pts)
    assert got == [(-0.18, 4.8), (0.3, 0.0), (0.78, 4.8)]
    inter = [c for c in pts if c.kind == "intersection"]
    assert len(inter) == 2
    # symmetric about tau_T
    tau_T = (T - ref.t_p) / ref.t_p
    assert inter[0].tau + inter[1].tau == pytest.approx(2 * tau_T, abs=1e-10)
    assert inter[0].sigma == pytest.approx(inter[1].sigma)
    assert [c.kind for c in pts if c.sigma == 0] == ["rejected-degenerate"]


def test_critical_pair_equal_adiabatic_p2(ref):
    a, b = [c for c in critical_points(T, ref) if c.kind == "intersection"]
    assert p2_adiabatic(T, a.tau, a.sigma, ref) == pytest.approx(
        p2_adiabatic(T, b.tau, b.sigma, ref), abs=1e-9)


def test_critical_points_weak_stark():
    # the Gaussian peak never reaches S0 for any width in the window
    p = PulseParams(Delta0=5.0)
    pts = critical_points(T, p, sigma_range=(0.5, 6.0))
    assert [c.kind for c in pts] == ["rejected-degenerate"]


def test_probe_time_moves_tau_T(ref):
    pts = critical_points(70.0, ref)
    assert [c.tau for c in pts if c.sigma == 0] == [pytest.approx(0.4)]


# maps --------------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(n_tau=0)
    with pytest.raises(ValueError):
        GridSpec(sigma_min=0.0)
    with pytest.raises(ValueError):
        GridSpec(tau_min=1.0, tau_max=0.0)


def test_adiabaticity_map_scaling(ref):
    g = GridSpec(n_tau=7, n_sigma=6)
    a = adiabaticity_map(T, g, ref).values
    q = PulseParams(Delta0=200.0, Omega0=200.0, S0=2.0)
    b = adiabaticity_map(T, g, q).values
    # every field doubles, so AD halves
    assert np.allclose(b, a / 2, rtol=1e-10, equal_nan=True)


def test_adiabaticity_map_flat_region_small(ref):
    # both pulse peaks at the probe time: every derivative vanishes there
    g = GridSpec(tau_min=0.0, tau_max=0.0, n_tau=1, sigma_min=6.0, sigma_max=6.0, n_sigma=1)
    assert adiabaticity_map(ref.t_p, g, ref).values[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_zero_pump_gives_zero_map():
    g = GridSpec(n_tau=4, n_sigma=3)
    pa, pb = full_maps(g, PulseParams(Omega0=0.0), IntegratorConfig(), T)
    assert np.all(pa.values == 0.0) and np.all(pb.values == 0.0)


def test_full_map_deterministic_and_parallel_equal(tmp_path, ref):
    g = GridSpec(n_tau=5, n_sigma=4)
    cfg = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-8)
    a, _ = full_maps(g, ref, cfg, T, workers=1)
    b, _ = full_maps(g, ref, cfg, T, workers=2)
    pa = a.export(tmp_path / "a")[0].read_bytes()
    pb = b.export(tmp_path / "b")[0].read_bytes()
    assert pa == pb


def test_efficiency_map_adiabatic_matches_pointwise(ref):
    g = GridSpec(n_tau=6, n_sigma=5)
    m = efficiency_map("adiabatic-P2", g, ref, T=T)
    for i, s in enumerate(g.sigma_axis):
        for j, t in enumerate(g.tau_axis):
            assert m.values[i, j] == pytest.approx(p2_adiabatic(T, t, s, ref), abs=1e-14)
    with pytest.raises(ValueError):
        efficiency_map("nope", g, ref)


def test_argmax_refinement_and_ties():
    tau = np.linspace(0, 1, 11)
    sig = np.linspace(1, 2, 11)
    S, Tt = np.meshgrid(sig, tau, indexing="ij")
    v = -((Tt - 0.33) ** 2) - (S - 1.47) ** 2
    am = GridMap(tau, sig, v, T, "x").argmax()
    assert am["tau"] == pytest.approx(0.33, abs=1e-9)
    assert am["sigma"] == pytest.approx(1.47, abs=1e-9)
    flat = GridMap(tau, sig, np.ones((11, 11)), T, "x").argmax()
    assert flat["cell"] == [0, 0]
    with pytest.raises(ValueError):
        GridMap(tau, sig, np.full((11, 11), np.nan), T, "x").argmax()


def test_matrix_csv_roundtrip(tmp_path):
    rows, cols = np.array([0.1, 0.2]), np.array([1.0, 2.0, 3.0])
    vals = np.array([[1.0, np.nan, 3.0], [4.0, 5.0, 1 / 3]])
    p = write_matrix_csv(tmp_path / "m.csv", "sigma", rows, "tau", cols, vals)
    rn, r, cn, c, v = read_matrix_csv(p)
    assert (rn, cn) == ("sigma", "tau")
    assert np.array_equal(r, rows) and np.array_equal(c, cols)
    assert np.array_equal(v, vals, equal_nan=True)


@given(st.floats(-0.5, 1.0), st.floats(0.2, 6.0))
def test_max_adiabaticity_positive(tau, sigma):
    assert max_adiabaticity(tau, sigma, n=201) >= 0.0


def test_adiabaticity_ridge_at_resonance(ref):
    # resonance at T while the pump has nearly died out: highly non-adiabatic
    sig = 1.0
    ts = saddle_curve_ts(sig * ref.sigma_p, T, ref)[1]
    tau = (ts - ref.t_p) / ref.t_p
    g = GridSpec(tau_min=tau, tau_max=tau, n_tau=1, sigma_min=sig, sigma_max=sig, n_sigma=1)
    assert adiabaticity_map(T, g, ref).values[0, 0] > 1.0


def test_max_adiabaticity_resolves_weak_pump_crossing(ref):
    # resonance at t ~ 75 where the pump is ~1e-5: a spike far narrower than the uniform grid
    tau, sigma = 0.3, 1.0
    q = ref.with_reduced(tau, sigma)
    tc = saddle_curve_ts(q.sigma_s, q.t_s, q)[1]
    from scrap.model import adiabaticity, gaussian_sample
    s = gaussian_sample(tc, q)
    peak = abs(s.ddelta_dt) / (2 * s.omega ** 2)
    got = max_adiabaticity(tau, sigma, ref, T=90.0)
    assert got == pytest.approx(peak, rel=1e-3)
    coarse = np.max(adiabaticity(gaussian_sample(np.linspace(0, 90, 4001), q)))
    assert coarse < 1e-3 * got


def test_adiabatic_oracle_on_scaled_fields():
    # fields x4 lower AD four-fold, so adiabatic cells exist
    p = PulseParams(S0=4.0, Delta0=400.0, Omega0=400.0)
    from scrap import GaussianField, integrate_bloch
    from scrap.model import SOUTH_POLE
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 10:
        tau, sigma = rng.uniform(-0.5, 1.0), rng.uniform(0.05, 6.0)
        if max_adiabaticity(tau, sigma, p) >= 0.05:
            continue
        tr = integrate_bloch(GaussianField(p.with_reduced(tau, sigma)), SOUTH_POLE, 0.0, T,
                             IntegratorConfig(n_samples=2))
        assert abs((1 + tr.final_state[2]) / 2 - p2_adiabatic(T, tau, sigma, p)) < 0.05
        checked += 1


def test_reference_fields_have_adiabaticity_floor(ref):
    # the pump rising edge at delta = -S0 alone gives max AD ~ 0.086 on [0, T]
    assert max_adiabaticity(0.3, 2.0, ref) > 0.08
    assert max_adiabaticity(1.0, 0.05, ref) > 0.08
