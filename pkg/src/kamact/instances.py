"""Concrete action instances and independent oracles.

Germ action (Taylor scales, loss exponent 0): with a fixed base series a
whose derivative is a unit, the germ g = id + xi acts on states x by

    act(g, x) = (a + x) o g^{-1} - a.

States form the subspace of series vanishing at the origin: the action
preserves the constant term, so the orbit of 0 stays in that slice, and
on it the generator rho(xi) = -a' xi has the exact right inverse
j(x) = -x / a'.  For a = id the orbit equation act(g, 0) = x collapses
to g = reversion(id + x), which reversion_oracle exposes as a brute
check for the solver.

Cohomological operator (Fourier scales, positive loss): for a rotation
number alpha the difference equation xi(t + alpha) - xi(t) = x(t) is
solved mode by mode, dividing by e^{2 pi i m alpha} - 1.  Diophantine
alpha keeps the divisors polynomially bounded below, which makes the
operator k-bounded for k near the Diophantine exponent but unbounded
with k = 0; measure_kboundedness exhibits exactly that on mode-doubling
sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .action import AcReport, ActionInstance, verify_ac
from .group import GroupElement, ginv, measure_group_constants
from .series import (
    DEFAULT_FOURIER_WIDTH,
    FOURIER,
    TAYLOR,
    BoundedOperatorEstimate,
    ScaledSeries,
    identity_series,
    measure_operator_norm,
    monomial,
    norm,
    series_add,
    series_compose,
    series_differentiate,
    series_multiply,
    series_reciprocal,
    series_reversion,
    series_scale,
    series_sub,
    zeros,
)

# Scale grid for measuring germ constants: covers the scales a solver run
# visits for s up to 0.9 and losses up to 0.2; the tiny sigma probes the
# no-loss (k = 0) limit of operator norms.
GERM_SCALE_GRID = tuple(
    (s, sig)
    for s in (0.2, 0.35, 0.5, 0.65, 0.8, 0.9)
    for sig in (1e-6, 0.005, 0.02, 0.05, 0.1, 0.2)
    if s + 2.0 * sig < 0.999
)

# For the small-divisor operator the basis ratios depend on sigma only, so
# the sigma ladder matters: octave-spaced down to 2^-11 keeps the k = 0
# estimate growing through 2048 modes while k = 1 saturates early.
FOURIER_SCALE_GRID = tuple(
    (s, frac * 2.0 ** -j)
    for s in (0.3, 0.6)
    for j in range(2, 12)
    for frac in (1.0, 0.75)
)

DIVISOR_UNDERFLOW = 1e-15


@dataclass(frozen=True, eq=False)
class GermActionSpec:
    """Base point a (Taylor) and truncation order for the germ action.

    a' must be a unit: nonzero leading coefficient and minimum modulus on
    the unit circle (sampled) at least ``min_aprime_modulus``.
    """

    a: ScaledSeries
    order: int
    min_aprime_modulus: float = 1e-6

    def __post_init__(self) -> None:
        if self.a.kind != TAYLOR:
            raise ValueError("base point must be a taylor series")
        if self.a.order != self.order:
            raise ValueError("base point order must match the spec order")
        aprime = series_differentiate(self.a)
        if abs(aprime.coeffs[0]) < 1e-8:
            raise ValueError("a' has (near) vanishing leading coefficient")
        angles = np.exp(2j * math.pi * np.arange(256) / 256.0)
        values = np.polyval(aprime.coeffs[::-1], angles)
        if float(np.min(np.abs(values))) < self.min_aprime_modulus:
            raise ValueError("a' is not bounded away from 0 on the unit disc")


def germ_spec(coeffs, order: int, **kwargs) -> GermActionSpec:
    """Spec from low-degree coefficients of a, zero-padded to the order."""
    arr = np.zeros(order + 1, dtype=np.complex128)
    vals = np.asarray(list(coeffs), dtype=np.complex128)
    if vals.size > order + 1:
        raise ValueError("more base-point coefficients than the truncation order")
    arr[: vals.size] = vals
    return GermActionSpec(a=ScaledSeries(TAYLOR, arr), order=order, **kwargs)


def identity_germ_spec(order: int) -> GermActionSpec:
    return GermActionSpec(a=identity_series(order), order=order)


def build_germ_instance(spec: GermActionSpec, *, seed: int = 2025,
                        grid=GERM_SCALE_GRID, n_group: int = 400,
                        n_ac: int = 200) -> ActionInstance:
    """Assemble the germ action and measure its constants on the grid.

    act(g, x) = (a + x) o g^{-1} - a,  inf_act(xi, x) = -(a + x)' xi,
    j(x) = -x / a' (reciprocal series), loss exponent k = 0.  States must
    vanish at the origin.
    """
    a = spec.a
    order = spec.order
    recip_aprime = series_reciprocal(series_differentiate(a))

    def act(g: GroupElement, x: ScaledSeries) -> ScaledSeries:
        inner = ginv(g).as_map()
        return series_sub(series_compose(series_add(a, x), inner), a)

    def inf_act(xi: ScaledSeries, x: ScaledSeries) -> ScaledSeries:
        slope = series_differentiate(series_add(a, x))
        return series_scale(-1.0, series_multiply(slope, xi))

    def j(x: ScaledSeries) -> ScaledSeries:
        if x.coeffs[0] != 0:
            raise ValueError("germ states must vanish at the origin")
        return series_scale(-1.0, series_multiply(recip_aprime, x))

    template = zeros(TAYLOR, order)
    nj_est = measure_operator_norm(j, 0, grid, template,
                                   indices=range(1, order + 1), seed=seed)
    group_rep = measure_group_constants(order, grid, n_group, seed)

    label = "germ(a=id)" if not np.any(spec.a.coeffs[2:]) and spec.a.coeffs[1] == 1 \
        else "germ"
    prelim = ActionInstance(
        label=label, kind=TAYLOR, order=order,
        act=act, inf_act=inf_act, j=j, k=0,
        measured_c=1.0, measured_Nj=nj_est.N,
        measured_kappa=group_rep.kappa_estimate,
        state_min_degree=1, nj_estimate=nj_est, group_report=group_rep)
    ac_rep = verify_ac(prelim, n_ac, grid, seed)

    return ActionInstance(
        label=label, kind=TAYLOR, order=order,
        act=act, inf_act=inf_act, j=j, k=0,
        measured_c=ac_rep.c_estimate, measured_Nj=nj_est.N,
        measured_kappa=group_rep.kappa_estimate,
        state_min_degree=1, nj_estimate=nj_est,
        group_report=group_rep, ac_report=ac_rep)


def reversion_oracle(x: ScaledSeries) -> GroupElement:
    """Exact solution of act(g, 0) = x for the a = id germ action.

    act(g, 0) = g^{-1} - id forces g^{-1} = id + x, so g is the
    compositional inverse of id + x.  Used as an independent check of the
    iterative solver.
    """
    if x.kind != TAYLOR:
        raise ValueError("oracle needs a taylor state")
    if x.coeffs[0] != 0:
        raise ValueError("germ states must vanish at the origin")
    inverse_map = series_reversion(series_add(identity_series(x.order), x))
    return GroupElement(series_sub(inverse_map, identity_series(x.order)))


# ---------------------------------------------------------------------------
# small-divisor right inverse on Fourier scales
# ---------------------------------------------------------------------------

def diophantine_margin(alpha: float, tau: float, modes: int) -> float:
    """min over 1 <= |m| <= modes of |m|^tau |e^{2 pi i m alpha} - 1|.

    Zero for rational alpha with denominator <= modes; bounded away from
    zero for Diophantine alpha.  Non-increasing in modes.
    """
    if modes < 1:
        raise ValueError("need at least one mode")
    m = np.arange(1, modes + 1, dtype=np.float64)
    divisors = 2.0 * np.abs(np.sin(math.pi * m * alpha))
    return float(np.min(m ** tau * divisors))


@dataclass(frozen=True)
class DiophantineSpec:
    """Rotation number with a certified lower bound on small divisors.

    Construction checks min |m|^tau |e^{2 pi i m alpha} - 1| >= C over
    1 <= |m| <= modes and rejects divisors below the double-precision
    underflow threshold.
    """

    alpha: float
    tau: float
    C: float
    modes: int
    width: float = DEFAULT_FOURIER_WIDTH

    def __post_init__(self) -> None:
        if self.tau < 1.0:
            raise ValueError("tau must be >= 1")
        if not self.C > 0.0:
            raise ValueError("C must be positive")
        m = np.arange(1, self.modes + 1, dtype=np.float64)
        divisors = 2.0 * np.abs(np.sin(math.pi * m * self.alpha))
        if float(np.min(divisors)) < DIVISOR_UNDERFLOW:
            raise ValueError("a small divisor underflows double precision "
                             "(alpha too close to rational)")
        margin = float(np.min(m ** self.tau * divisors))
        if margin < self.C:
            raise ValueError(
                f"Diophantine margin {margin:.6g} below the declared C = {self.C}")

    def margin(self) -> float:
        return diophantine_margin(self.alpha, self.tau, self.modes)


def build_cohomological_j(spec: DiophantineSpec):
    """Mode-wise solver of xi(t + alpha) - xi(t) = x(t) on zero-mean series.

    Divides Fourier mode m != 0 by e^{2 pi i m alpha} - 1; rejects input
    with a nonzero mean (the constant mode is not in the range of the
    difference operator).
    """
    m = np.arange(-spec.modes, spec.modes + 1)
    divisors = np.exp(2j * math.pi * m * spec.alpha) - 1.0
    divisors[spec.modes] = 1.0  # placeholder; the mean must vanish anyway
    inv = 1.0 / divisors
    inv[spec.modes] = 0.0

    def solve_cohomological(x: ScaledSeries) -> ScaledSeries:
        if x.kind != FOURIER or x.order != spec.modes or x.width != spec.width:
            raise ValueError("input does not live on the operator's mode space")
        if abs(x.coeffs[spec.modes]) > 1e-13:
            raise ValueError("cohomological equation needs zero-mean input")
        return ScaledSeries(FOURIER, x.coeffs * inv, spec.width)

    return solve_cohomological


def shift_series(x: ScaledSeries, alpha: float) -> ScaledSeries:
    """Rotation t -> t + alpha: multiplies mode m by e^{2 pi i m alpha}."""
    if x.kind != FOURIER:
        raise ValueError("shift is defined on fourier series")
    m = np.arange(-x.order, x.order + 1)
    return ScaledSeries(FOURIER, x.coeffs * np.exp(2j * math.pi * m * alpha), x.width)


@dataclass(frozen=True)
class KBoundednessStudy:
    """Loss-exponent scan of the small-divisor operator across mode counts.

    estimates[k][i] is the measured norm at mode count mode_list[i]; the
    stabilizing exponent is the smallest k whose estimates vary by at
    most ``ratio_tol`` across the doublings (None if none stabilizes).
    """

    alpha: float
    tau: float
    mode_list: tuple[int, ...]
    k_values: tuple[int, ...]
    estimates: dict[int, tuple[float, ...]]
    stabilizing_k: int | None
    ratio_tol: float

    def growth(self, k: int) -> float:
        vals = self.estimates[k]
        return vals[-1] / vals[0]

    def variation(self, k: int) -> float:
        vals = self.estimates[k]
        return max(vals) / min(vals) - 1.0

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "tau": self.tau,
            "mode_list": list(self.mode_list),
            "k_values": list(self.k_values),
            "estimates": {str(k): list(v) for k, v in self.estimates.items()},
            "stabilizing_k": self.stabilizing_k,
            "ratio_tol": self.ratio_tol,
        }


def measure_kboundedness(alpha: float, tau: float, C: float, *,
                         mode_list=(32, 64, 128, 256), k_values=(0, 1, 2, 3),
                         grid=FOURIER_SCALE_GRID, ratio_tol: float = 0.10,
                         seed: int = 0) -> KBoundednessStudy:
    """Measure the operator norm of the small-divisor solver per (k, M).

    A k stabilizes when the estimate changes by at most ratio_tol across
    every mode doubling; with k = 0 the estimate keeps growing, which is
    the signature of genuine loss of regularity.
    """
    estimates: dict[int, list[float]] = {k: [] for k in k_values}
    for modes in mode_list:
        spec = DiophantineSpec(alpha=alpha, tau=tau, C=C, modes=modes)
        op = build_cohomological_j(spec)
        template = zeros(FOURIER, modes, spec.width)
        idx = [m for m in range(-modes, modes + 1) if m != 0]
        for pos, k in enumerate(k_values):
            est = measure_operator_norm(op, k, grid, template, indices=idx,
                                        seed=seed, check_linearity=(pos == 0))
            estimates[k].append(est.N)
    stabilizing = None
    for k in sorted(k_values):
        vals = estimates[k]
        if max(vals) / min(vals) <= 1.0 + ratio_tol:
            stabilizing = k
            break
    return KBoundednessStudy(alpha=alpha, tau=tau, mode_list=tuple(mode_list),
                             k_values=tuple(k_values),
                             estimates={k: tuple(v) for k, v in estimates.items()},
                             stabilizing_k=stabilizing, ratio_tol=ratio_tol)


GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0
