import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from kgstep.core import ParameterError
from kgstep.specfn import (
    LommelDivergenceError,
    bessel_j_array,
    bessel_small_arg,
    j1_zeros,
    log_bessel_bound,
    lommel_pair,
    lommel_u,
    series_tail_bound,
)


@pytest.mark.parametrize("eta", [1e-8, 0.3, 1.0, 7.5, 42.0, 138.0, 1000.0])
def test_bessel_matches_scipy(eta):
    n = int(eta) + 60
    b = bessel_j_array(n, eta)
    ref = special.jv(np.arange(n + 1), eta)
    assert np.max(np.abs(b.values - ref)) < max(b.est_error, 1e-15) * 10
    assert b.order_max == n and b.arg == eta


def test_bessel_deep_orders_against_mpmath():
    b = bessel_j_array(80, 2.0)
    for n in (30, 55, 80):
        ref = float(mpmath.besselj(n, 2.0))
        assert b.values[n] == pytest.approx(ref, rel=1e-12)


def test_bessel_at_zero():
    b = bessel_j_array(5, 0.0)
    assert b.values.tolist() == [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    assert b.est_error == 0.0


@pytest.mark.parametrize("n,eta", [(-1, 1.0), (3, -0.5), (3, math.nan), (2.5, 1.0)])
def test_bessel_bad_args(n, eta):
    with pytest.raises(ParameterError):
        bessel_j_array(n, eta)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 500.0))
def test_bessel_normalisation_and_bound(eta):
    n_max = int(eta) + 80
    b = bessel_j_array(n_max, eta)
    v = b.values
    assert abs(v[0] + 2 * v[2::2].sum() - 1.0) <= b.est_error * (n_max + 1)
    assert np.all(np.abs(v) <= 1.0 + b.est_error)


def test_small_arg():
    assert bessel_small_arg(0, 0.1) == 1.0
    assert bessel_small_arg(3, 1e-3) == pytest.approx(special.jv(3, 1e-3), rel=1e-6)
    assert bessel_small_arg(2, 0.0) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 400), st.floats(1e-3, 300.0))
def test_log_bound_is_an_upper_bound(n, eta):
    j = abs(float(special.jv(n, eta)))
    if j > 0:
        assert math.log(j) <= float(log_bessel_bound(n, eta)) + 1e-9


def test_tail_bound_covers_tail():
    eta = 60.0
    ref = np.abs(special.jv(np.arange(70, 400), eta)).sum()
    bound = series_tail_bound(70, eta)
    assert ref <= bound < 100 * ref


def _lommel_mp(n, w, z):
    with mpmath.workdps(40):
        w, z = mpmath.mpc(w), mpmath.mpf(z)
        return complex(mpmath.nsum(lambda m: (-1) ** m * (w / z) ** (n + 2 * m) * mpmath.besselj(n + 2 * m, z), [0, mpmath.inf]))


@pytest.mark.parametrize("n", [1, 3])
@pytest.mark.parametrize("w,z", [(0.5j, 2.0), (1.2 + 0.3j, 5.0), (3j, 40.0), (0.01j, 0.05)])
def test_lommel_against_mpmath(n, w, z):
    v = lommel_u(n, w, z)
    ref = _lommel_mp(n, w, z)
    assert abs(v.value - ref) <= max(v.est_error, 1e-15) * 10


def test_lommel_divergent():
    with pytest.raises(LommelDivergenceError):
        lommel_u(1, 2.0, 2.0)
    with pytest.raises(LommelDivergenceError):
        lommel_u(3, 5j, 1.0)


def test_lommel_zero_and_pair():
    assert lommel_u(1, 0j, 1.0).value == 0
    pair = lommel_pair(0.5j, 2.0)
    assert pair.u1 == lommel_u(1, 0.5j, 2.0).value
    assert pair.u3 == lommel_u(3, 0.5j, 2.0).value


def test_lommel_bad_args():
    with pytest.raises(ParameterError):
        lommel_u(1, 0.1, 0.0)
    with pytest.raises(ParameterError):
        lommel_u(-1, 0.1, 1.0)


def test_j1_zeros():
    z = j1_zeros(40.0)
    ref = special.jn_zeros(1, len(z))
    np.testing.assert_allclose(z, ref, rtol=1e-12)
    assert ref[-1] < 40.0 < special.jn_zeros(1, len(z) + 1)[-1]
