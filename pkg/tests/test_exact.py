import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import psi_reference
from kgstep.core import C_NM_PER_FS, ParameterError, SpacetimePoint, StepParams, derive_params, light_cone, preset_params
from kgstep.exact import (
    CancellationBudgetError,
    Method,
    ToleranceError,
    cancellation_budget,
    phi_stationary,
    psi_alt,
    psi_auto,
    psi_cutoff_asym,
    psi_exact,
    psi_free,
    psi_literal,
    psi_lommel,
)
from kgstep.specfn import LommelDivergenceError

# 60-digit reference values of the resummed series (preset barrier)
FROZEN = [
    ((0.5, 0.01), -0.0037305199431529384 - 0.03231576317886699j),
    ((0.1, 0.008), -0.004877764729334179 - 0.06220848238447378j),
    ((1.0, 0.05), -0.009363743473238154 - 0.010768352487349453j),
    ((14.9, 0.05), -5.821136366574165e-06 - 0.0017711124961361832j),
    ((3.0, 0.3), 0.0006370534708726866 + 0.00020840916668415094j),
    ((80.0, 0.3), 2.0686141223911165e-05 + 0.0003503186900687178j),
    ((0.1, 2.0), 0.04980699083773023 - 0.0262458334038511j),
]

interior = st.tuples(st.floats(0.001, 0.3), st.floats(0.0, 0.999)).map(
    lambda tf: SpacetimePoint(tf[1] * C_NM_PER_FS * tf[0], tf[0])
)


@pytest.mark.parametrize("xt,expected", FROZEN)
def test_psi_exact_frozen(params, xt, expected):
    a = psi_exact(params, SpacetimePoint(*xt))
    assert abs(a.value - expected) < 1e-13
    assert a.diag.method is Method.STABLE_SERIES
    assert a.diag.est_error <= 1e-12
    assert a.abs2 == pytest.approx(abs(expected) ** 2, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(interior)
def test_psi_exact_against_mp_reference(pt):
    p = preset_params()
    if light_cone(p, pt).region.value != "interior":
        return
    a = psi_exact(p, pt)
    assert abs(a.value - psi_reference(p, pt.x, pt.t, 40)) <= max(a.diag.est_error, 1e-15)


def test_exterior_and_cone_are_zero(params):
    assert psi_exact(params, SpacetimePoint(4.0, 0.01)).value == 0
    ct = C_NM_PER_FS * 0.01
    assert psi_exact(params, SpacetimePoint(ct, 0.01)).value == 0
    assert psi_exact(params, SpacetimePoint(0.0, 0.0)).value == 0


@given(st.floats(1e-4, 1.0), st.floats(1.0 + 1e-9, 10.0))
def test_causality_property(t, f):
    p = preset_params()
    a = psi_auto(p, SpacetimePoint(f * C_NM_PER_FS * t, t))
    assert a.value == 0 and a.abs2 == 0


def test_field_vanishes_at_the_front(params):
    t = 0.05
    ct = C_NM_PER_FS * t
    vals = [abs(psi_exact(params, SpacetimePoint(ct * (1 - d), t)).value) for d in (1e-3, 1e-5, 1e-7)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-5


@pytest.mark.parametrize("tol", [1e-15, 1e-5, 0.0])
def test_tol_range(params, tol):
    with pytest.raises(ParameterError):
        psi_exact(params, SpacetimePoint(0.5, 0.01), tol)


def test_unattainable_tol_raises(params):
    # late-time rounding floor sits above 1e-12 near the origin
    with pytest.raises(ToleranceError):
        psi_exact(params, SpacetimePoint(0.0, 50.0), 1e-14)
    assert psi_exact(params, SpacetimePoint(0.0, 50.0), 1e-10).diag.est_error <= 1e-10


@pytest.mark.parametrize("fn", [psi_literal, psi_alt])
@pytest.mark.parametrize("xt", [(0.5, 0.01), (1.0, 0.05), (14.9, 0.05), (3.0, 0.3)])
def test_printed_forms_agree(params, fn, xt):
    pt = SpacetimePoint(*xt)
    lit = fn(params, pt)
    assert abs(lit.value - psi_exact(params, pt).value) < 1e-12
    assert lit.diag.method in (Method.LITERAL_SERIES, Method.ALT_SERIES)


def test_literal_cancellation_documented(params):
    pt = SpacetimePoint(80.0, 0.3)
    lit = psi_literal(params, pt)
    assert lit.diag.cancellation_ratio > 1e30
    assert lit.diag.note.startswith("mp")
    assert abs(lit.value - psi_exact(params, pt).value) < 1e-12
    assert cancellation_budget(params, pt) > 25


def test_literal_refuses_beyond_budget(params):
    with pytest.raises(CancellationBudgetError):
        psi_literal(params, SpacetimePoint(1.0, 5.0))


def test_literal_n_max_guard(params):
    with pytest.raises(ParameterError):
        psi_literal(params, SpacetimePoint(0.5, 0.01), n_max=3)


def test_printed_forms_need_interior(params):
    with pytest.raises(ParameterError):
        psi_literal(params, SpacetimePoint(5.0, 0.01))


def test_free_form():
    k = 0.05064
    pt = SpacetimePoint(1.0, 0.01)
    theta = k * (pt.x - C_NM_PER_FS * pt.t)
    assert psi_free(k, pt).value == pytest.approx(np.exp(1j * theta) - 1, abs=1e-16)
    assert psi_free(k, SpacetimePoint(10.0, 0.01)).value == 0
    with pytest.raises(ParameterError):
        psi_free(0.0, pt)


def test_free_limit():
    k = 0.05064
    p = StepParams(1e-8, k, allow_propagating=True)
    for t in (0.01, 0.1, 0.3):
        for f in (0.1, 0.5, 0.9):
            pt = SpacetimePoint(f * C_NM_PER_FS * t, t)
            assert abs(psi_exact(p, pt).value - psi_free(k, pt).value) < 1e-6


def test_stationary_limit(params):
    pt = SpacetimePoint(0.1, 20.0)
    a = psi_exact(params, pt, 1e-10).value
    b = phi_stationary(params, pt).value
    assert abs(a - b) / abs(b) < 1e-5


def test_stationary_form(params):
    d = derive_params(params)
    phi = phi_stationary(params, SpacetimePoint(1.0, 0.0))
    assert phi.abs2 == pytest.approx(abs(d.k_plus) ** 2 * math.exp(-2 * d.q), rel=1e-14)
    assert phi.diag.method is Method.STATIONARY


def test_cutoff_asymptote_near_cone(params):
    t = 0.05
    ct = C_NM_PER_FS * t
    pt = SpacetimePoint(ct * (1 - 1e-6), t)
    asym = psi_cutoff_asym(params, pt)
    assert abs(asym.value - psi_exact(params, pt).value) <= asym.diag.est_error + 1e-15
    assert psi_cutoff_asym(params, SpacetimePoint(ct, t)).value == 0
    with pytest.raises(ParameterError):
        psi_cutoff_asym(params, SpacetimePoint(2 * ct, t))


def test_auto_dispatch(params):
    t = 0.05
    ct = C_NM_PER_FS * t
    out = psi_auto(params, SpacetimePoint(2 * ct, t))
    assert out.diag.method is Method.STABLE_SERIES and out.diag.note.startswith("bypass")
    deep = psi_auto(params, SpacetimePoint(1.0, t))
    assert deep.diag.method is Method.STABLE_SERIES and deep.diag.note == ""
    near = psi_auto(params, SpacetimePoint(ct * (1 - 1e-9), t), 1e-10)
    assert near.diag.method is Method.CUTOFF_ASYMPTOTE
    assert abs(near.value - psi_exact(params, SpacetimePoint(ct * (1 - 1e-9), t)).value) < 1e-10


def test_lommel_modulus_tracks_exact(params):
    pt = SpacetimePoint(0.4, 0.02)
    lom = psi_lommel(params, pt)
    ex = psi_exact(params, pt)
    assert lom.diag.method is Method.LOMMEL_APPROX
    assert abs(math.sqrt(lom.abs2) - math.sqrt(ex.abs2)) / math.sqrt(ex.abs2) < 0.01


def test_lommel_guards(params):
    with pytest.raises(ParameterError):
        psi_lommel(StepParams(1.0, 0.5), SpacetimePoint(0.4, 0.02))
    with pytest.raises(LommelDivergenceError):
        psi_lommel(params, SpacetimePoint(0.0, 0.02))
    with pytest.raises(ParameterError):
        psi_lommel(params, SpacetimePoint(10.0, 0.02))


@settings(max_examples=20, deadline=None)
@given(interior)
def test_exact_is_pure(pt):
    p = preset_params()
    a, b = psi_exact(p, pt), psi_exact(p, pt)
    assert a.value == b.value and a.diag == b.diag
