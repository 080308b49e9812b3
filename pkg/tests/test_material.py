import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nschwet.material import MaterialLaws, d_double_well, double_well
from nschwet.params import FluidPair


def laws(rl=1e3, ra=1e3, el=0.1, ea=0.1, theta=math.pi / 2, lam=1.0, sla=7.28e-2):
    return MaterialLaws(FluidPair(rl, ra, el, ea, sla, lam), theta)


def test_double_well_values():
    assert double_well([-1.0, 1.0]) == pytest.approx([0.0, 0.0])
    assert d_double_well([-1.0, 1.0, 0.0]) == pytest.approx([0.0, 0.0, 0.0])
    assert double_well(0.0) == 0.25
    assert double_well(2.0) == 2.25 and d_double_well(2.0) == 6.0


def test_density_pure_phases_and_tails():
    L = laws(2.0, 1.0)
    assert L.density(1.0) == 2.0 and L.density(-1.0) == 1.0
    assert L.density(-10.0) == 0.25
    assert L.density(-2.5) == pytest.approx(0.3125, rel=1e-15)


def test_density_matched_is_constant():
    L = laws()
    assert np.all(L.density(np.linspace(-3, 3, 13)) == 1e3)
    assert L.jflux_coefficient(1e-3) == 0.0


@pytest.mark.parametrize("phi0", [-3.0, -2.0, 2.0, 3.0])
def test_density_is_c1_at_breakpoints(phi0):
    L = laws(2.0, 1.0)
    h = 1e-7
    left, mid, right = L.density(phi0 - h), L.density(phi0), L.density(phi0 + h)
    assert abs(left - mid) <= 1e-6 * mid and abs(right - mid) <= 1e-6 * mid
    dl = (mid - L.density(phi0 - 2 * h)) / (2 * h)
    dr = (L.density(phi0 + 2 * h) - mid) / (2 * h)
    assert dl == pytest.approx(dr, rel=1e-5, abs=1e-6)


def test_density_positive_lower_bound():
    rng = np.random.default_rng(0)
    phi = rng.uniform(-10, 10, 10_000)
    for rl, ra in ((2.0, 1.0), (1e3, 1.0), (1.0, 2.0)):
        L = laws(rl, ra)
        assert np.all(L.density(phi) >= min(rl, ra) / 4 - 1e-14)


def test_viscosity_examples():
    L = laws(el=1e-1, ea=1e-3)
    assert L.viscosity(1.0) == pytest.approx(1e-1, rel=1e-14)
    assert L.viscosity(-1.0) == pytest.approx(1e-3, rel=1e-14)
    assert L.viscosity(0.0) == pytest.approx(1e-2, rel=1e-14)
    assert L.viscosity(0.5) == pytest.approx(10 ** -1.5, rel=1e-14)
    assert L.viscosity(5.0) == L.viscosity(1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 1), st.floats(1e-4, 1.0), st.floats(1e-4, 1.0), st.floats(0.2, 5.0))
def test_viscosity_bounded(phi, el, ea, lam):
    L = laws(el=el, ea=ea, lam=lam)
    v = float(L.viscosity(phi))
    assert min(el, ea) * (1 - 1e-12) <= v <= max(el, ea) * (1 + 1e-12)


def test_sigma_sf_endpoints():
    L = laws(theta=math.pi / 3)
    assert L.sigma_sf(1.0) == pytest.approx(L.sigma_sl, rel=1e-14)
    assert L.sigma_sf(-1.0) == pytest.approx(L.sigma_sa, rel=1e-14)
    assert L.d_sigma_sf([-1.0, 1.0]) == pytest.approx([0.0, 0.0])
    L4 = laws(theta=math.pi / 4)
    assert L4.d_sigma_sf(0.0) == pytest.approx(-0.75 * 7.28e-2 / math.sqrt(2), rel=1e-14)


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(1)
    phi = rng.uniform(-1.5, 1.5, 100)
    h = 1e-5
    L = laws(theta=1.1)
    fd = (double_well(phi + h) - double_well(phi - h)) / (2 * h)
    assert np.allclose(fd, d_double_well(phi), rtol=1e-8, atol=1e-10)
    fd = (L.sigma_sf(phi + h) - L.sigma_sf(phi - h)) / (2 * h)
    assert np.allclose(fd, L.d_sigma_sf(phi), rtol=1e-8, atol=1e-12)


def test_jflux_coefficient():
    L = laws(2.0, 1.0)
    assert L.jflux_coefficient(1e-3) == pytest.approx(-5e-4)
    assert np.sign(laws(1.0, 2.0).jflux_coefficient(1.0)) == 1.0
    with pytest.raises(ValueError):
        L.jflux_coefficient(0.0)
