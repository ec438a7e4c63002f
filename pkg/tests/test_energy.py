"""Fractional energy estimators: MC, quadrature, regions, inequalities."""

import json

import numpy as np
import pytest

from hopflab import energy, geometry as geo, maps
from hopflab.errors import ParameterError

PARAMS_S3 = energy.EnergyParams(s=0.5, p=6.0, n=3, critical=True)
WHOLE_S3 = energy.whole_sphere(3)
WHOLE_S2 = energy.whole_sphere(2)
CENTER_S3 = geo.sphere_point([0.0, 0.0, 0.0, 1.0])


# ---------------------------------------------------------------------------
# Parameters and regions
# ---------------------------------------------------------------------------

def test_params_validation():
    with pytest.raises(ParameterError):
        energy.EnergyParams(s=1.2, p=3.0, n=3)
    with pytest.raises(ParameterError):
        energy.EnergyParams(s=0.5, p=0.5, n=3)
    with pytest.raises(ParameterError):
        energy.EnergyParams(s=0.5, p=6.0, n=4)
    with pytest.raises(ParameterError):
        energy.EnergyParams(s=0.5, p=5.0, n=3, critical=True)  # sp != 3
    assert energy.EnergyParams(s=0.5, p=6.0, n=3).kernel_exponent == 6.0


def test_region_measures_tile():
    ball = geo.GeodesicBall(CENTER_S3, 0.8)
    b = energy.ball_region(ball).measure()
    c = energy.complement_region(ball).measure()
    assert np.isclose(b + c, WHOLE_S3.measure(), rtol=1e-14, atol=0)
    inner = geo.GeodesicBall(CENTER_S3, 0.4)
    d = energy.difference_region(ball, inner).measure()
    assert np.isclose(d, b - energy.ball_region(inner).measure(),
                      rtol=1e-14, atol=0)


def test_region_sampling_respects_bounds():
    gen = np.random.default_rng(3)
    ball = geo.GeodesicBall(CENTER_S3, 0.8)
    inner = geo.GeodesicBall(CENTER_S3, 0.4)
    for region, lo, hi in (
        (energy.ball_region(ball), 0.0, 0.8),
        (energy.complement_region(ball), 0.8, np.pi),
        (energy.difference_region(ball, inner), 0.4, 0.8),
    ):
        pts = region.sample(2000, gen)
        d = geo.geodesic_distances(pts, CENTER_S3.coords)
        assert np.all(d >= lo - 1e-12) and np.all(d <= hi + 1e-12)
        assert np.all(region.contains(pts))


def test_difference_region_must_be_concentric():
    ball = geo.GeodesicBall(CENTER_S3, 0.8)
    other = geo.GeodesicBall(geo.sphere_point([1.0, 0.0, 0.0, 0.0]), 0.4)
    with pytest.raises(ParameterError):
        energy.difference_region(ball, other)


# ---------------------------------------------------------------------------
# Monte Carlo estimator
# ---------------------------------------------------------------------------

def test_energy_of_constant_map_is_zero_exactly():
    u = maps.constant_map(3, [1.0, 0.0, 0.0])
    est = energy.energy_mc(u, PARAMS_S3, WHOLE_S3, 10_000, 0)
    assert est.value == 0.0 and est.std_error == 0.0 and est.tail_bound == 0.0


def test_energy_identity_s2_matches_closed_form():
    # s = 0.5, p = 4 on S^2 makes the integrand identically 1: E = (4 pi)^2
    params = energy.EnergyParams(s=0.5, p=4.0, n=2)
    est = energy.energy_mc(maps.identity_map(2), params, WHOLE_S2, 50_000, 1)
    exact = (4.0 * np.pi) ** 2
    # the estimator is exact up to roundoff here, so compare absolutely
    assert abs(est.value - exact) < 1e-6
    assert est.tail_bound < 1e-6


def test_energy_mc_deterministic_bitwise():
    u = maps.hopf_map()
    a = energy.energy_mc(u, PARAMS_S3, WHOLE_S3, 20_000, 42)
    b = energy.energy_mc(u, PARAMS_S3, WHOLE_S3, 20_000, 42)
    assert a.value == b.value and a.std_error == b.std_error
    assert a.to_json() == b.to_json()


def test_energy_mc_seed_matters():
    u = maps.hopf_map()
    a = energy.energy_mc(u, PARAMS_S3, WHOLE_S3, 20_000, 1)
    b = energy.energy_mc(u, PARAMS_S3, WHOLE_S3, 20_000, 2)
    assert a.value != b.value


def test_energy_mc_generator_seed_path():
    u = maps.hopf_map()
    est = energy.energy_mc(u, PARAMS_S3, WHOLE_S3, 20_000,
                           np.random.default_rng(7))
    assert est.value > 0 and np.isfinite(est.value)


def test_energy_mc_validates_inputs():
    u = maps.hopf_map()
    with pytest.raises(ParameterError):
        energy.energy_mc(u, PARAMS_S3, WHOLE_S3, 100, 0)  # too few samples
    with pytest.raises(ParameterError):
        energy.energy_mc(u, energy.EnergyParams(s=0.5, p=6.0, n=2),
                         WHOLE_S2, 10_000, 0)  # domain mismatch


def test_energy_mc_region_monotone():
    u = maps.hopf_map()
    ball = geo.GeodesicBall(CENTER_S3, 1.2)
    e_ball = energy.energy_mc(u, PARAMS_S3, energy.ball_region(ball),
                              100_000, 5)
    e_whole = energy.energy_mc(u, PARAMS_S3, WHOLE_S3, 100_000, 5)
    slack = 3 * (e_ball.std_error + e_whole.std_error)
    assert e_ball.value <= e_whole.value + slack


def test_energy_mc_se_scales_as_sqrt_n():
    u = maps.hopf_map()
    ses = [energy.energy_mc(u, PARAMS_S3, WHOLE_S3, n, 9).std_error
           for n in (50_000, 100_000, 200_000)]
    for a, b in zip(ses, ses[1:]):
        assert 1.15 < a / b < 1.75  # sqrt(2) with generous MC slack


def test_split_and_plain_estimators_agree():
    # the split path engages automatically for declared supports
    u = maps.hopf_bump(CENTER_S3, 0.6)
    plain = maps.SphereMap(u.domain_dim, u.codomain_dim, u.eval_many,
                           u.descriptor, lipschitz_hint=u.lipschitz_hint)
    a = energy.energy_mc(u, PARAMS_S3, WHOLE_S3, 200_000, 3)
    b = energy.energy_mc(plain, PARAMS_S3, WHOLE_S3, 200_000, 4)
    z = abs(a.value - b.value) / np.hypot(a.std_error, b.std_error)
    assert z < 4.0
    # the split estimator is the tighter one
    assert a.std_error < b.std_error


def test_energy_estimate_json_schema():
    u = maps.hopf_map()
    est = energy.energy_mc(u, PARAMS_S3, WHOLE_S3, 20_000, 0)
    parsed = json.loads(est.to_json())
    for key in ("value", "std_error", "n_samples", "s", "p", "n", "region",
                "seed", "tail_bound", "strata"):
        assert key in parsed
    assert parsed["n_samples"] == 20_000
    assert parsed["region"]["variant"] == "whole"


def test_tail_bound_requires_lipschitz_hint():
    u = maps.SphereMap(3, 2, maps.hopf_eval_many,
                       {"variant": "anon", "params": {}})
    with pytest.raises(ParameterError):
        energy.energy_mc(u, PARAMS_S3, WHOLE_S3, 10_000, 0)


def test_tail_bound_is_small_and_positive():
    u = maps.hopf_map()
    est = energy.energy_mc(u, PARAMS_S3, WHOLE_S3, 10_000, 0)
    assert 0.0 < est.tail_bound < 1e-20 * est.value


# ---------------------------------------------------------------------------
# Quadrature oracle
# ---------------------------------------------------------------------------

def test_quadrature_identity_anchor():
    params = energy.EnergyParams(s=0.5, p=4.0, n=2)
    q = energy.energy_quadrature(maps.identity_map(2), params, 2_000)
    exact = (4.0 * np.pi) ** 2
    assert abs(q - exact) / exact < 1e-6


def test_quadrature_matches_mc_on_hopf():
    q = energy.energy_quadrature(maps.hopf_map(), PARAMS_S3, 4_000)
    est = energy.energy_mc(maps.hopf_map(), PARAMS_S3, WHOLE_S3, 400_000, 17)
    z = abs(est.value - q) / est.std_error
    assert z < 4.0


def test_quadrature_budget_guard():
    with pytest.raises(ParameterError):
        energy.energy_quadrature(maps.hopf_map(), PARAMS_S3, 10 ** 9)


# ---------------------------------------------------------------------------
# Inequality checks
# ---------------------------------------------------------------------------

def test_gluing_bound_holds_for_hopf_bump():
    u = maps.hopf_bump(CENTER_S3, 0.6)
    ball = u.supports[0]
    rep = energy.check_gluing_bound(
        u, WHOLE_S3, eta=0.5, rho=min(2 * ball.radius, 2.0),
        params=PARAMS_S3, center=ball.center, n=60_000, seed=1,
    )
    assert rep.holds
    assert np.isfinite(rep.c_star)


def test_gluing_bound_validates_eta():
    u = maps.hopf_bump(CENTER_S3, 0.6)
    with pytest.raises(ParameterError):
        energy.check_gluing_bound(u, WHOLE_S3, eta=1.5, rho=1.0,
                                  params=PARAMS_S3,
                                  center=u.supports[0].center, n=10_000)


def test_patching_bound_holds_for_prescribed_7():
    u7 = maps.prescribed_hopf_map(7)
    pieces = [maps.map_from_descriptor(c) for c in u7.descriptor["children"]]
    rep = energy.check_patching_bound(pieces, u7, PARAMS_S3, n=60_000, seed=2)
    assert rep.holds
    assert rep.ratio < 1.0  # 2^p slack is enormous; the raw sum already wins


def test_patching_bound_rejects_wrong_pieces():
    u7 = maps.prescribed_hopf_map(7)
    with pytest.raises(ParameterError):
        energy.check_patching_bound([maps.hopf_map()], u7, PARAMS_S3,
                                    n=10_000)


def test_fiber_energy_comparison_finite_and_undefined():
    rep = energy.fiber_energy_comparison(maps.multi_bubble(1), s=0.5,
                                         n=60_000, seed=3)
    assert not rep.undefined
    assert rep.ratio > 0 and np.isfinite(rep.ratio)
    const = maps.constant_map(2, [1.0, 0.0, 0.0])
    rep0 = energy.fiber_energy_comparison(const, s=0.5, n=10_000, seed=3)
    assert rep0.undefined and rep0.ratio is None


def test_bump_energy_r_independent():
    ests = [energy.energy_mc(maps.hopf_bump(CENTER_S3, r), PARAMS_S3,
                             WHOLE_S3, 150_000, 11) for r in (0.1, 0.3)]
    diff = abs(ests[0].value - ests[1].value)
    combined = float(np.hypot(ests[0].std_error, ests[1].std_error))
    assert diff <= 3 * combined
