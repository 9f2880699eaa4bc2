"""Group actions on scaled series: interface, generator at the origin, phi.

An ActionInstance bundles a left action act(g, x), its infinitesimal
action inf_act(xi, x) = d/dt|_0 act(gexp(t xi), x), a linear right
inverse j of rho: xi -> inf_act(xi, 0), and the measured constants that
drive the solver:

  * measured_c    - quadratic smallness constant: the action of the
                    inverse germ on rho(xi) is bounded by
                    c sigma^{-1} |xi|_{s+2sigma}^2 (clamped below at 1);
  * measured_Nj   - loss-k operator norm of j;
  * measured_kappa- group-law constant of the underlying germ group.

phi(xi) = j(act(ginv(gexp(xi)), rho(xi))) is the iteration map; each call
certifies |phi(xi)|_s <= c N(j) sigma^{-k-1} |xi|_{s+2sigma}^2 with the
measured constants and raises CertificateError past the noise allowance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .group import GroupElement, GroupLawReport, gexp, ginv, require_displacement
from .rng import SplitMix64, random_series
from .series import (
    TAYLOR,
    BoundedOperatorEstimate,
    ScaledSeries,
    check_scale,
    monomial,
    norm,
    series_scale,
    series_sub,
    zeros,
)

EPS = float(np.finfo(np.float64).eps)
CERT_BASE_TOL = 1e-10


class CertificateError(RuntimeError):
    """A bound certified from measured constants failed beyond the allowance."""


class DomainGuardError(ValueError):
    """An argument left the certified domain of an operation."""


def noise_allowance(order: int, running: float) -> float:
    """Certificate slack: base tolerance plus truncation rounding budget."""
    return CERT_BASE_TOL + order * EPS * max(1.0, running)


@dataclass(frozen=True, eq=False)
class AcReport:
    """Quadratic-smallness sweep: c_estimate = max ratio, clamped at 1."""

    c_estimate: float
    max_ratio: float
    samples: int
    skipped: int
    worst: tuple[float, float, int]  # (s, sigma, sample id)

    def to_dict(self) -> dict:
        return {
            "c_estimate": self.c_estimate,
            "max_ratio": self.max_ratio,
            "samples": self.samples,
            "skipped": self.skipped,
            "worst_s": self.worst[0],
            "worst_sigma": self.worst[1],
            "worst_sample": self.worst[2],
        }


@dataclass(frozen=True, eq=False)
class ActionInstance:
    """Immutable bundle of action operations and measured constants."""

    label: str
    kind: str
    order: int
    act: Callable[[GroupElement, ScaledSeries], ScaledSeries]
    inf_act: Callable[[ScaledSeries, ScaledSeries], ScaledSeries]
    j: Callable[[ScaledSeries], ScaledSeries]
    k: int
    measured_c: float
    measured_Nj: float
    measured_kappa: float
    state_min_degree: int = 0
    nj_estimate: BoundedOperatorEstimate | None = None
    group_report: GroupLawReport | None = None
    ac_report: AcReport | None = None

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("loss exponent k must be nonnegative")
        if self.measured_c < 1.0:
            raise ValueError("measured_c must be >= 1 (clamped at measurement)")
        if not (self.measured_Nj > 0.0 and self.measured_kappa >= 0.0):
            raise ValueError("measured constants must be positive")

    def zero_state(self) -> ScaledSeries:
        return zeros(self.kind, self.order)

    def inflated(self, safety: float) -> tuple[float, float, float]:
        """(c, N(j), kappa) inflated by the safety factor, for the solver."""
        return (self.measured_c * safety, self.measured_Nj * safety,
                self.measured_kappa * safety)


def rho(instance: ActionInstance, xi: ScaledSeries) -> ScaledSeries:
    """Infinitesimal action at the origin: xi -> inf_act(xi, 0)."""
    require_displacement(xi)
    return instance.inf_act(xi, instance.zero_state())


def check_infinitesimal(instance: ActionInstance, xi: ScaledSeries,
                        x: ScaledSeries, t_values=(1e-2, 1e-3, 1e-4),
                        scales=(0.3, 0.5, 0.7)) -> tuple[float, ...]:
    """Finite-difference consistency of inf_act against the action.

    For each t returns max over the scale grid of
    |(act(gexp(t xi), x) - x)/t - inf_act(xi, x)|_s; the sequence must
    decay linearly in t for a C^1 action.
    """
    require_displacement(xi)
    ts = tuple(float(t) for t in t_values)
    if any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts[1:], ts)):
        raise ValueError("t_values must be positive and decreasing")
    reference = instance.inf_act(xi, x)
    errors = []
    for t in ts:
        g = gexp(series_scale(t, xi))
        quotient = series_scale(1.0 / t, series_sub(instance.act(g, x), x))
        diff = series_sub(quotient, reference)
        errors.append(max(norm(diff, s) for s in scales))
    return tuple(errors)


def ac_ratio(instance: ActionInstance, xi: ScaledSeries, s: float,
             sigma: float) -> tuple[float, float]:
    """(left side, scaled ratio) of the quadratic smallness condition.

    Left side: |act(ginv(gexp(xi)), rho(xi))|_s.  Ratio: left side times
    sigma / |xi|_{s+2sigma}^2 (0 when xi = 0).
    """
    check_scale(s)
    if not (sigma > 0.0 and s + 2.0 * sigma < 1.0):
        raise ValueError("need sigma > 0 and s + 2 sigma < 1")
    y = rho(instance, xi)
    lhs = norm(instance.act(ginv(gexp(xi)), y), s)
    sq = norm(xi, s + 2.0 * sigma) ** 2
    return lhs, (lhs * sigma / sq if sq > 0.0 else 0.0)


def verify_ac(instance: ActionInstance, n_samples: int, grid, seed: int, *,
              decay: float = 0.5) -> AcReport:
    """Sweep the quadratic smallness ratio; c_estimate clamps the max at 1.

    Samples are guarded by the iteration map's domain
    |xi|_{s+2sigma} <= sigma (the stricter of the two balls the condition
    could quantify over, and the only one phi ever visits; on the full
    unit ball the truncated chart degenerates near non-invertible germs).
    Random draws are rescaled to that ball; deterministic monomial probes
    at three amplitudes anchor the maximum.  Out-of-domain or
    non-invertible draws are skipped and counted.
    """
    pairs = tuple((float(s), float(sig)) for s, sig in grid)
    for s, sig in pairs:
        check_scale(s)
        if not (sig > 0.0 and s + 2.0 * sig < 1.0):
            raise ValueError(f"grid pair ({s}, {sig}) violates s + 2 sigma < 1")
    rng = SplitMix64(seed)
    best = 0.0
    worst = (0.0, 0.0, -1)
    evaluated = 0
    skipped = 0
    sample_id = 0

    def _probe(xi, s, sig):
        nonlocal best, worst, evaluated, skipped, sample_id
        sample_id += 1
        if norm(xi, s + 2.0 * sig) > sig * (1.0 + 1e-12):
            skipped += 1
            return
        try:
            _, ratio = ac_ratio(instance, xi, s, sig)
        except ValueError:
            skipped += 1
            return
        if ratio > best:
            best = ratio
            worst = (s, sig, sample_id - 1)
        evaluated += 1

    degrees = [m for m in range(1, 9) if m <= instance.order]
    degrees += [m for m in (12, 16, 24, 32) if m <= instance.order]
    for s, sig in pairs:
        for m in degrees:
            for amp in (1e-3, 0.3, 1.0):
                coeff = amp * sig / (s + 2.0 * sig) ** m
                _probe(monomial(TAYLOR, instance.order, m, coeff), s, sig)

    for _ in range(n_samples):
        s, sig = pairs[rng.choice(len(pairs))]
        u = rng.uniform_open()
        xi = random_series(rng, TAYLOR, instance.order, decay=decay, min_index=1,
                           target_norm=u * sig, at_scale=s + 2.0 * sig)
        _probe(xi, s, sig)
    return AcReport(c_estimate=max(1.0, best), max_ratio=best,
                    samples=evaluated, skipped=skipped, worst=worst)


def ac_scaling_slope(instance: ActionInstance, xi: ScaledSeries, s: float,
                     sigma: float, t_values=None) -> float:
    """Log-log slope of the quadratic-smallness left side under xi -> t xi.

    Least-squares fit over the given t grid; 2 for a genuinely quadratic
    remainder.
    """
    if t_values is None:
        t_values = np.logspace(-3, -1, 5)
    ts = np.asarray(t_values, dtype=np.float64)
    vals = []
    for t in ts:
        lhs, _ = ac_ratio(instance, series_scale(float(t), xi), s, sigma)
        if lhs <= 0.0:
            raise ValueError("degenerate sample: zero quadratic remainder")
        vals.append(lhs)
    slope = np.polyfit(np.log(ts), np.log(np.asarray(vals)), 1)[0]
    return float(slope)


def phi(instance: ActionInstance, xi: ScaledSeries, s: float, sigma: float, *,
        certify: bool = True) -> ScaledSeries:
    """One iteration step: j applied to the inverse germ acting on rho(xi).

    Domain: |xi|_{s+2sigma} <= sigma.  When certifying, the output must
    satisfy |phi(xi)|_s <= c N(j) sigma^{-k-1} |xi|_{s+2sigma}^2 with the
    instance's measured constants, up to the truncation-noise allowance.
    """
    check_scale(s)
    if not (sigma > 0.0 and s + 2.0 * sigma < 1.0):
        raise ValueError("need sigma > 0 and s + 2 sigma < 1")
    size = norm(xi, s + 2.0 * sigma)
    if size > sigma * (1.0 + 1e-12):
        raise DomainGuardError(
            f"|xi|_{{s+2sigma}} = {size:.3e} exceeds sigma = {sigma:.3e}")
    y = rho(instance, xi)
    eta = instance.j(instance.act(ginv(gexp(xi)), y))
    if certify:
        bound = (instance.measured_c * instance.measured_Nj
                 * sigma ** (-(instance.k + 1)) * size * size)
        got = norm(eta, s)
        if got > bound + noise_allowance(instance.order, max(got, bound)):
            raise CertificateError(
                f"phi bound violated: |phi(xi)|_s = {got:.6e} > "
                f"c N(j) sigma^-(k+1) |xi|^2 = {bound:.6e}; "
                "measured constants look under-estimated")
    return eta


def phi_bound_margin(instance: ActionInstance, xi_size: float, eta_size: float,
                     sigma: float) -> float:
    """Slack of the phi bound for recorded norms (positive = satisfied)."""
    bound = (instance.measured_c * instance.measured_Nj
             * sigma ** (-(instance.k + 1)) * xi_size * xi_size)
    return bound - eta_size
