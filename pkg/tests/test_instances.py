"""Germ instance builders, the reversion oracle, and the small-divisor operator."""

import math

import numpy as np
import pytest

from kamact import (
    FOURIER,
    GOLDEN_MEAN,
    TAYLOR,
    DiophantineSpec,
    build_cohomological_j,
    build_germ_instance,
    diophantine_margin,
    germ_spec,
    identity_germ_spec,
    max_coeff_diff,
    measure_kboundedness,
    monomial,
    norm,
    reversion_oracle,
    rho,
    series_scale,
    series_sub,
    shift_series,
    zeros,
)
from kamact.rng import SplitMix64, random_series
from kamact.series import ScaledSeries

from conftest import taylor
from oracle_poly import lagrange_inversion, p_coeffs


# ---------------------------------------------------------------------------
# germ specs and instances
# ---------------------------------------------------------------------------

def test_germ_spec_rejects_vanishing_slope():
    # a = z - z^2/2 has a'(1) = 0 on the unit circle
    with pytest.raises(ValueError, match="bounded away"):
        germ_spec([0, 1, -0.5], 8)


def test_germ_spec_rejects_zero_linear_part():
    with pytest.raises(ValueError):
        germ_spec([0, 0, 1], 8)


def test_identity_instance_constants(germ_id32):
    assert germ_id32.k == 0
    assert germ_id32.measured_c == 1.0           # clamped: true ratio is far below 1
    assert germ_id32.measured_Nj == pytest.approx(1.0, abs=1e-5)
    assert 0.0 < germ_id32.measured_kappa < 1.0
    assert germ_id32.state_min_degree == 1


def test_identity_instance_j_negates(germ_id32):
    x = taylor([0, 0.2, -0.1], order=32)
    assert max_coeff_diff(germ_id32.j(x), series_scale(-1.0, x)) == 0.0


def test_identity_instance_orbit_closed_form(germ_id32):
    # act(g, 0) = ginv(g) - id, so the orbit equation has the reversion solution
    from kamact import gexp, ginv, identity_series
    xi = taylor([0, 0, 0.01, 0.004], order=32)
    g = gexp(xi)
    got = germ_id32.act(g, germ_id32.zero_state())
    want = series_sub(ginv(g).as_map(), identity_series(32))
    assert max_coeff_diff(got, want) == 0.0


def test_curved_instance_j_reciprocal(germ_quad32):
    # j(x) = -x / (1 + 0.6 z); on x = z the coefficients are -(-0.6)^{m-1}
    x = monomial(TAYLOR, 32, 1)
    out = germ_quad32.j(x)
    want = np.zeros(33, dtype=complex)
    for m in range(1, 33):
        want[m] = -((-0.6) ** (m - 1))
    assert np.allclose(out.coeffs, want, atol=1e-13)


def test_curved_instance_rho_j_round_trip(germ_quad32):
    rng = SplitMix64(8)
    for _ in range(20):
        x = random_series(rng, TAYLOR, 32, min_index=1)
        back = rho(germ_quad32, germ_quad32.j(x))
        assert norm(series_sub(back, x), 0.7) <= 1e-12 * max(1.0, norm(x, 0.7))


def test_instance_reports_attached(germ_id32):
    assert germ_id32.nj_estimate is not None
    assert germ_id32.group_report is not None
    assert germ_id32.ac_report is not None
    assert germ_id32.group_report.margin_first >= -1e-10
    assert germ_id32.ac_report.c_estimate >= 1.0


# ---------------------------------------------------------------------------
# reversion oracle
# ---------------------------------------------------------------------------

def test_reversion_oracle_zero():
    g = reversion_oracle(zeros(TAYLOR, 6))
    assert not np.any(g.displacement.coeffs)


def test_reversion_oracle_linear():
    c = 0.01
    g = reversion_oracle(series_scale(c, monomial(TAYLOR, 5, 1)))
    want = np.zeros(6, dtype=complex)
    want[1] = 1.0 / (1.0 + c) - 1.0
    assert np.allclose(g.displacement.coeffs, want, rtol=1e-14)


def test_reversion_oracle_quadratic_against_lagrange():
    from fractions import Fraction
    c = Fraction(1, 100)
    inverse = lagrange_inversion({1: Fraction(1), 2: c}, 4)
    want = [complex(Fraction(v)) for v in p_coeffs(inverse, 4)]
    g = reversion_oracle(series_scale(0.01, monomial(TAYLOR, 4, 2)))
    assert np.allclose(g.as_map().coeffs, want, atol=1e-15)
    # the classical signed pattern 1, -c, 2c^2, -5c^3
    assert np.allclose(g.as_map().coeffs,
                       [0, 1, -1e-2, 2e-4, -5e-6], atol=1e-15)


def test_reversion_oracle_rejects_bad_state():
    with pytest.raises(ValueError):
        reversion_oracle(taylor([0.5, 1], order=4))


# ---------------------------------------------------------------------------
# Diophantine margins and the cohomological operator
# ---------------------------------------------------------------------------

def test_margin_rational_alpha_vanishes():
    assert diophantine_margin(0.5, 1.0, 4) == pytest.approx(0.0, abs=1e-12)


def test_margin_golden_positive():
    margin = diophantine_margin(GOLDEN_MEAN, 1.0, 256)
    assert margin == pytest.approx(1.8640648476264552, rel=1e-12)
    assert margin > 0.0


def test_margin_non_increasing_in_modes():
    vals = [diophantine_margin(GOLDEN_MEAN, 1.0, m) for m in (4, 16, 64, 256)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_diophantine_spec_validation():
    spec = DiophantineSpec(alpha=GOLDEN_MEAN, tau=1.0, C=1.0, modes=64)
    assert spec.margin() >= spec.C
    with pytest.raises(ValueError):
        DiophantineSpec(alpha=0.5, tau=1.0, C=0.5, modes=8)  # exact zero divisor
    with pytest.raises(ValueError):
        DiophantineSpec(alpha=GOLDEN_MEAN, tau=1.0, C=10.0, modes=64)


def test_cohomological_single_mode():
    spec = DiophantineSpec(alpha=GOLDEN_MEAN, tau=1.0, C=1.0, modes=8)
    op = build_cohomological_j(spec)
    out = op(monomial(FOURIER, 8, 1, 1.0, spec.width))
    got = abs(out.coeff(1))
    # direct small-divisor size: 1 / (2 sin(pi alpha))
    assert got == pytest.approx(1.0 / (2.0 * math.sin(math.pi * GOLDEN_MEAN)),
                                rel=1e-13)
    assert round(got, 4) == 0.5365


def test_cohomological_zero_input():
    spec = DiophantineSpec(alpha=GOLDEN_MEAN, tau=1.0, C=1.0, modes=8)
    op = build_cohomological_j(spec)
    assert not np.any(op(zeros(FOURIER, 8, spec.width)).coeffs)


def test_cohomological_rejects_nonzero_mean():
    spec = DiophantineSpec(alpha=GOLDEN_MEAN, tau=1.0, C=1.0, modes=8)
    op = build_cohomological_j(spec)
    with pytest.raises(ValueError, match="zero-mean"):
        op(monomial(FOURIER, 8, 0, 1.0, spec.width))


def test_cohomological_forward_difference():
    """shift(out) - out reproduces the input exactly, mode by mode."""
    spec = DiophantineSpec(alpha=GOLDEN_MEAN, tau=1.0, C=1.0, modes=16)
    op = build_cohomological_j(spec)
    rng = SplitMix64(12)
    for _ in range(10):
        x = random_series(rng, FOURIER, 16, min_index=1, width=spec.width)
        out = op(x)
        back = series_sub(shift_series(out, spec.alpha), out)
        assert max_coeff_diff(back, x) <= 1e-13 * max(1.0, float(np.max(np.abs(x.coeffs))))


def test_kboundedness_study():
    study = measure_kboundedness(GOLDEN_MEAN, 1.0, 1.0,
                                 mode_list=(32, 64, 128, 256))
    assert study.growth(0) >= 2.0            # no-loss estimate keeps growing
    assert study.stabilizing_k == 1          # golden mean: loss exponent 1
    assert study.variation(1) <= 0.10
    assert all(b >= a for a, b in zip(study.estimates[0], study.estimates[0][1:]))
