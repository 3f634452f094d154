import math

import numpy as np
import pytest
from scipy.integrate import simpson

from hardy_bellman.extremal import build_g0, discretize_g0
from hardy_bellman.models import DomainError, MomentPair, PParams
from hardy_bellman.monotone_fn import defect
from hardy_bellman.quadrature import (
    SIGNED_EXACT_MAX_POWER,
    adaptive_simpson,
    cell_integrals,
    use_exact,
)


def test_use_exact():
    assert use_exact(2.0, "auto")
    assert not use_exact(1.5, "auto")
    assert not use_exact(2.0, "quad")
    with pytest.raises(DomainError):
        use_exact(1.5, "exact")
    with pytest.raises(DomainError):
        use_exact(2.0, "simpson")


def test_adaptive_simpson_polynomial_and_log():
    lo = np.array([0.5, 1.0])
    hi = np.array([1.0, 2.0])
    out = adaptive_simpson(lambda t, owner: np.where(owner == 0, t ** 3, 1.0 / t), lo, hi)
    assert out[0] == pytest.approx(0.234375, rel=1e-12)
    assert out[1] == pytest.approx(math.log(2.0), rel=1e-10)


def test_inverse_square_cell():
    # 0 + 1/t squared over [1/4, 1] is 3
    out = cell_integrals(np.array([0.0]), np.array([1.0]), np.array([0.25]), np.array([1.0]), 2)
    assert out[0] == 3.0


def test_split_function_second_cell():
    # Hg = 0.5 + 0.5/t on (0.5, 1] for the 1.5/0.5 split
    out = cell_integrals(np.array([0.5]), np.array([0.5]), np.array([0.5]), np.array([1.0]), 2)
    expected = 0.25 * 0.5 + 0.5 * math.log(2.0) + 0.25
    assert out[0] == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("power", [2, 3, 5])
@pytest.mark.parametrize("shift", [0, 1])
def test_exact_matches_quadrature(rng, power, shift):
    n = 100
    lo = np.sort(rng.uniform(1e-6, 0.9, size=n))
    hi = lo * np.exp(rng.uniform(0.01, 3.0, size=n))
    hi = np.minimum(hi, 1.0)
    v = rng.uniform(0.0, 3.0, size=n)
    a = rng.uniform(0.0, 1.0, size=n) * lo
    exact = cell_integrals(v, a, lo, hi, power, shift=shift, method="exact")
    quad = cell_integrals(v, a, lo, hi, power, shift=shift, method="quad")
    np.testing.assert_allclose(exact, quad, rtol=1e-9)


def test_absolute_negative_piece():
    # |(1 - 2) * 1 + 0/t|^2 over [0.5, 1] is 0.5
    out = cell_integrals(np.array([-1.0]), np.array([0.0]), np.array([0.5]), np.array([1.0]), 2,
                         absolute=True)
    assert out[0] == pytest.approx(0.5, rel=1e-15)


def test_narrow_cells_stay_accurate():
    lo = np.array([0.5])
    hi = lo * (1.0 + 1e-9)
    out = cell_integrals(np.array([1.0]), np.array([0.5]), lo, hi, 2)
    width = hi[0] - lo[0]
    assert out[0] == pytest.approx(4.0 * width, rel=1e-6)


def test_empty_input():
    assert len(cell_integrals(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0), 2)) == 0


def test_high_power_negative_pieces_use_quadrature():
    # (0.5/t - 1)^8 on [0.4, 0.5] is small next to its binomial terms
    v, a = np.array([-1.0]), np.array([0.5])
    lo, hi = np.array([0.4]), np.array([0.5])
    t = np.linspace(0.4, 0.5, 200001)
    reference = simpson((0.5 / t - 1.0) ** 8, x=t)
    auto = cell_integrals(v, a, lo, hi, 8, absolute=True)
    quad = cell_integrals(v, a, lo, hi, 8, method="quad", absolute=True)
    assert auto[0] == quad[0]
    assert auto[0] == pytest.approx(reference, rel=1e-6)


def test_low_power_negative_pieces_stay_exact():
    v, a = np.array([-1.0]), np.array([0.0])
    lo, hi = np.array([0.5]), np.array([1.0])
    out = cell_integrals(v, a, lo, hi, SIGNED_EXACT_MAX_POWER, absolute=True)
    assert out[0] == 0.5


@pytest.mark.parametrize("p", [5.0, 8.0])
def test_high_power_defect_follows_quadrature(p):
    params = PParams(p)
    moments = MomentPair(1.0, 2.0)
    g0 = build_g0(params, moments)
    g = discretize_g0(g0, 2 ** 10, moments, params)
    auto = defect(g, g0.c, params).value
    quad = defect(g, g0.c, params, method="quad").value
    assert auto == pytest.approx(quad, rel=1e-12)
