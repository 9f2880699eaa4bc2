"""The group of near-identity analytic germs under composition.

A group element is the map id + xi with xi(0) = 0 and an invertible
linear part; the chart is literally gexp(xi) = id + xi, and glog is its
left inverse.  With the product oriented as map composition,

    gmul(gexp(xi), gexp(eta)) = (id + xi) o (id + eta),

the displacement of a product is eta + xi o (id + eta).  Two norm
inequalities are certified empirically on truncations:

    |glog(e^xi e^eta)|_s        <= |xi|_{s+sigma} + |eta|_s
    |glog(e^xi e^eta)-xi-eta|_s <= kappa sigma^{-1} |xi|_{s+2sigma} |eta|_s

for xi in the unit ball at scale s+2sigma and |eta|_s <= sigma.  The
best constant kappa is not derived analytically; measure_group_constants
estimates it by sweeping random and extremal samples over a scale grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import SplitMix64, random_series
from .series import (
    INVERTIBILITY_THRESHOLD,
    TAYLOR,
    ScaledSeries,
    check_scale,
    dump_series,
    identity_series,
    monomial,
    norm,
    parse_series,
    series_add,
    series_compose,
    series_reversion,
    series_scale,
    series_sub,
    zeros,
)

CHART_RADIUS = 2.0


def require_displacement(xi: ScaledSeries) -> ScaledSeries:
    """Validate an algebra element: Taylor series with xi(0) = 0 exactly."""
    if xi.kind != TAYLOR:
        raise ValueError("algebra elements are taylor series")
    if xi.coeffs[0] != 0:
        raise ValueError("algebra elements must vanish at the origin")
    return xi


@dataclass(frozen=True, eq=False)
class GroupElement:
    """The analytic germ id + displacement, displacement(0) = 0."""

    displacement: ScaledSeries

    def __post_init__(self) -> None:
        require_displacement(self.displacement)
        if self.displacement.order < 1:
            raise ValueError("group elements need truncation order >= 1")
        if abs(1.0 + self.displacement.coeffs[1]) < INVERTIBILITY_THRESHOLD:
            raise ValueError("linear part too close to 0: germ not invertible")

    @property
    def order(self) -> int:
        return self.displacement.order

    def as_map(self) -> ScaledSeries:
        return series_add(identity_series(self.order), self.displacement)

    def __repr__(self) -> str:
        return f"GroupElement(order={self.order})"


def identity_group(order: int) -> GroupElement:
    return GroupElement(zeros(TAYLOR, order))


def gexp(xi: ScaledSeries, s: float | None = None) -> GroupElement:
    """Chart map xi -> id + xi; with s given, enforces |xi|_s < 2."""
    require_displacement(xi)
    if s is not None:
        check_scale(s)
        if not (norm(xi, s) < CHART_RADIUS):
            raise ValueError(f"|xi|_{s} = {norm(xi, s)} outside the chart domain 2B")
    return GroupElement(xi)


def glog(g: GroupElement) -> ScaledSeries:
    """Left inverse of gexp: the displacement of the germ."""
    return g.displacement


def gmul(g: GroupElement, h: GroupElement) -> GroupElement:
    """Composition of germs: (g h)(z) = g(h(z))."""
    xi = g.displacement
    eta = h.displacement
    disp = series_add(eta, series_compose(xi, h.as_map()))
    return GroupElement(disp)


def ginv(g: GroupElement) -> GroupElement:
    """Functional inverse via series reversion."""
    r = series_reversion(g.as_map())
    return GroupElement(series_sub(r, identity_series(g.order)))


def dump_group(g: GroupElement) -> str:
    return dump_series(g.displacement, group_flag=True)


def load_group(text: str) -> GroupElement:
    series, fields = parse_series(text)
    if fields.get("group") != "1":
        raise ValueError("series text does not carry the group=1 flag")
    return GroupElement(series)


# ---------------------------------------------------------------------------
# the two group-law inequalities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupLawReport:
    """Margins for the two product inequalities over a sample sweep.

    margin_first  = min over samples of |xi|_{s+sigma} + |eta|_s - |log(e^xi e^eta)|_s
    kappa_estimate = max over samples of |log(e^xi e^eta)-xi-eta|_s sigma / (|xi|_{s+2sigma} |eta|_s)
    margin_second = min over samples of the second inequality's slack at kappa_estimate
    """

    kappa_estimate: float
    margin_first: float
    margin_second: float
    samples: int
    skipped: int = 0
    order: int | None = None
    grid: tuple[tuple[float, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "kappa_estimate": self.kappa_estimate,
            "margin_first": self.margin_first,
            "margin_second": self.margin_second,
            "samples": self.samples,
            "skipped": self.skipped,
            "order": self.order,
            "grid": [list(p) for p in self.grid],
        }


def _law_sample(xi: ScaledSeries, eta: ScaledSeries, s: float, sigma: float):
    """(margin_first, kappa_ratio, lhs2, scale product) for one pair."""
    w = glog(gmul(gexp(xi), gexp(eta)))
    lhs1 = norm(w, s)
    rhs1 = norm(xi, s + sigma) + norm(eta, s)
    lhs2 = norm(series_sub(series_sub(w, xi), eta), s)
    denom = norm(xi, s + 2.0 * sigma) * norm(eta, s)
    ratio = lhs2 * sigma / denom if denom > 0.0 else 0.0
    return rhs1 - lhs1, ratio, lhs2, denom


def verify_group_law(xi: ScaledSeries, eta: ScaledSeries, s: float, sigma: float,
                     kappa: float | None = None) -> GroupLawReport:
    """Evaluate both inequalities on one pair; out-of-domain pairs are skipped.

    Domain: |xi|_{s+2sigma} <= 1, |eta|_s <= sigma, s + 2sigma < 1.  The
    per-sample kappa ratio is returned in kappa_estimate; a caller doing a
    sweep aggregates the max.  margin_second is computed against ``kappa``
    when given (otherwise against the per-sample ratio, so it is 0).
    """
    require_displacement(xi)
    require_displacement(eta)
    check_scale(s)
    if not (sigma > 0.0 and s + 2.0 * sigma < 1.0):
        raise ValueError("need sigma > 0 and s + 2 sigma < 1")
    if norm(xi, s + 2.0 * sigma) > 1.0 + 1e-12 or norm(eta, s) > sigma * (1.0 + 1e-12):
        return GroupLawReport(0.0, math.inf, math.inf, samples=0, skipped=1,
                              order=xi.order, grid=((s, sigma),))
    m1, ratio, lhs2, denom = _law_sample(xi, eta, s, sigma)
    kap = ratio if kappa is None else kappa
    m2 = kap * denom / sigma - lhs2
    return GroupLawReport(kappa_estimate=ratio, margin_first=m1, margin_second=m2,
                          samples=1, skipped=0, order=xi.order, grid=((s, sigma),))


def _anchor_pairs(order: int):
    """Deterministic extremal probes: monomial xi against a linear eta."""
    degrees = [m for m in range(1, 9)] + [12, 16, 24, 32, 48, 64]
    degrees = [m for m in degrees if m <= order]
    amplitudes = (1e-3, 0.3, 1.0)
    for m in degrees:
        for axi in amplitudes:
            for aeta in amplitudes:
                yield m, axi, aeta


def measure_group_constants(order: int, grid, n_samples: int, seed: int, *,
                            decay: float = 0.5) -> GroupLawReport:
    """Sweep random pairs plus extremal probes; aggregate margins and kappa.

    Random xi is rescaled to |xi|_{s+2sigma} = u <= 1, eta to
    |eta|_s = v sigma, keeping every sample in the certified domain.
    """
    pairs = tuple((float(s), float(sig)) for s, sig in grid)
    for s, sig in pairs:
        check_scale(s)
        if not (sig > 0.0 and s + 2.0 * sig < 1.0):
            raise ValueError(f"grid pair ({s}, {sig}) violates s + 2 sigma < 1")
    rng = SplitMix64(seed)
    records: list[tuple[float, float, float, float]] = []  # margin1, ratio, lhs2, denom/sigma
    margin1_min = math.inf
    evaluated = 0

    skipped = 0

    def _record(xi, eta, s, sig):
        nonlocal margin1_min, evaluated, skipped
        try:
            m1, ratio, lhs2, denom = _law_sample(xi, eta, s, sig)
        except ValueError:
            # A unit-ball draw can land on a non-invertible germ; that is
            # outside the chart and does not witness the group law.
            skipped += 1
            return
        margin1_min = min(margin1_min, m1)
        records.append((m1, ratio, lhs2, denom / sig))
        evaluated += 1

    for s, sig in pairs:
        for m, axi, aeta in _anchor_pairs(order):
            xi = monomial(TAYLOR, order, m, axi / (s + 2.0 * sig) ** m)
            eta = monomial(TAYLOR, order, 1, aeta * sig / s)
            _record(xi, eta, s, sig)

    for i in range(n_samples):
        s, sig = pairs[rng.choice(len(pairs))]
        u = rng.uniform_open()
        v = rng.uniform_open()
        xi = random_series(rng, TAYLOR, order, decay=decay, min_index=1,
                           target_norm=u, at_scale=s + 2.0 * sig)
        eta = random_series(rng, TAYLOR, order, decay=decay, min_index=1,
                            target_norm=v * sig, at_scale=s)
        _record(xi, eta, s, sig)

    kappa_hat = max(r[1] for r in records)
    margin2_min = min(kappa_hat * r[3] - r[2] for r in records)
    return GroupLawReport(kappa_estimate=kappa_hat, margin_first=margin1_min,
                          margin_second=margin2_min, samples=evaluated,
                          skipped=skipped, order=order, grid=pairs)
