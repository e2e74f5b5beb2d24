import math

import pytest
from hypothesis import given, strategies as st

from kgstep.core import (
    C_NM_PER_FS,
    CONE_BAND,
    HBAR_C_EV_NM,
    PRESET_ENERGY_EV,
    PUBLISHED_TWO_XP,
    ParameterError,
    PropagatingRegimeError,
    Region,
    SpacetimePoint,
    StepParams,
    classify,
    derive_params,
    energy_to_wavenumber,
    light_cone,
)

evanescent = st.tuples(
    st.floats(1e-3, 1e3, allow_nan=False), st.floats(1e-4, 0.999, allow_nan=False)
).map(lambda mr: StepParams(mr[0], mr[0] * mr[1]))


def test_preset_derived_values(params):
    d = derive_params(params)
    assert d.q == pytest.approx(1.541168255058, rel=1e-12)
    assert d.x_p == pytest.approx(0.648858420693, rel=1e-12)
    assert 2 * d.x_p == pytest.approx(1.2977, abs=1e-4)
    # the published 2 x_p is not what 2/q gives; nothing forces them together
    assert abs(2 * d.x_p - PUBLISHED_TWO_XP) > 0.01


def test_unit_example():
    d = derive_params(StepParams(1.0, 0.5))
    assert d.q == pytest.approx(math.sqrt(0.75), rel=1e-15)


def test_energy_conversion():
    assert energy_to_wavenumber(PRESET_ENERGY_EV) == pytest.approx(5.0677e-2, rel=1e-4)
    assert energy_to_wavenumber(HBAR_C_EV_NM) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(ParameterError):
        energy_to_wavenumber(0.0)
    with pytest.raises(ParameterError):
        energy_to_wavenumber(-1.0)


def test_from_energy_ev():
    p = StepParams.from_energy_ev(1.542, 10.0)
    assert p.energy_k == pytest.approx(10.0 / HBAR_C_EV_NM)


@pytest.mark.parametrize("mu0,e", [(0.0, 0.1), (-1.0, 0.1), (1.0, 0.0), (math.inf, 0.1), (1.0, math.nan)])
def test_invalid_params(mu0, e):
    with pytest.raises(ParameterError):
        StepParams(mu0, e)


@pytest.mark.parametrize("e", [1.0, 1.5])
def test_propagating_rejected(e):
    with pytest.raises(PropagatingRegimeError):
        derive_params(StepParams(1.0, e))


def test_propagating_opt_in():
    d = derive_params(StepParams(1e-8, 0.05, allow_propagating=True))
    assert not d.evanescent
    assert abs(1 / d.k_plus + 1 / d.k_minus - 1) < 1e-12


@given(evanescent)
def test_derived_invariants(p):
    d = derive_params(p)
    assert d.evanescent
    assert d.q > 0
    assert abs(d.q**2 + p.energy_k**2 - p.mu0**2) <= 1e-15 * p.mu0**2
    assert abs(abs(d.z_plus) - 1) < 1e-15
    assert abs(abs(d.z_minus) - 1) < 1e-15
    # 1/k+ + 1/k- = 1; the plain sum is 4E^2/mu0^2, not 2
    assert abs(1 / d.k_plus + 1 / d.k_minus - 1) < 1e-14
    assert d.k_plus + d.k_minus == pytest.approx(4 * p.energy_k**2 / p.mu0**2, rel=1e-13, abs=1e-300)
    assert d.x_p * d.q == pytest.approx(1.0, rel=1e-15)
    assert d.k_plus == pytest.approx(2 * p.energy_k / complex(p.energy_k, d.q), rel=1e-15)


def test_classify_band():
    assert classify(1.0, 1.0) is Region.ON_CONE
    assert classify(1.0 + 0.5 * CONE_BAND, 1.0) is Region.ON_CONE
    assert classify(1.0 + 10 * CONE_BAND, 1.0) is Region.EXTERIOR
    assert classify(1.0 - 10 * CONE_BAND, 1.0) is Region.INTERIOR
    assert classify(0.0, 0.0) is Region.ON_CONE


def test_light_cone_origin(params):
    lc = light_cone(params, SpacetimePoint(0.0, 0.01))
    assert lc.region is Region.INTERIOR
    assert lc.xi == 1.0
    assert lc.eta == pytest.approx(params.mu0 * C_NM_PER_FS * 0.01, rel=1e-15)


def test_light_cone_outside_and_on(params):
    out = light_cone(params, SpacetimePoint(5.0, 0.01))
    assert out.region is Region.EXTERIOR and out.xi is None and out.eta is None
    on = light_cone(params, SpacetimePoint(C_NM_PER_FS * 0.01, 0.01))
    assert on.region is Region.ON_CONE and on.xi is None and on.eta == 0.0


@given(st.floats(0.0, 0.999), st.floats(1e-4, 10.0))
def test_light_cone_identities(frac, t):
    p = StepParams(1.542, 0.05064)
    ct = C_NM_PER_FS * t
    lc = light_cone(p, SpacetimePoint(frac * ct, t))
    assert lc.region is Region.INTERIOR
    assert lc.xi >= 1.0
    # eta / xi = mu0 (ct - x), eta xi = mu0 (ct + x)
    assert lc.eta / lc.xi == pytest.approx(p.mu0 * (ct - frac * ct), rel=1e-12)
    assert lc.eta * lc.xi == pytest.approx(p.mu0 * (ct + frac * ct), rel=1e-12)


@pytest.mark.parametrize("x,t", [(-1.0, 0.1), (1.0, -0.1), (math.nan, 0.1), (1.0, math.inf)])
def test_bad_points(x, t):
    with pytest.raises(ParameterError):
        SpacetimePoint(x, t)
