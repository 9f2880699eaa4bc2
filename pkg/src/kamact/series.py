"""Truncated analytic series carrying a family of scale-indexed norms.

A Taylor series x = sum_m c_m z^m truncated at degree D is measured, for
every scale 0 < s < 1, by the weighted l1 norm

    |x|_s = sum_m |c_m| s^m,

the analytic norm on the disc of radius s (radius schedule rho(s) = s).
A Fourier series x = sum_{|m|<=M} c_m e^{2 pi i m t} is measured by

    |x|_s = sum_m |c_m| exp(2 pi W |m| s)

with a fixed width factor W > 0.  In both cases the weights grow with s,
so the inclusion from scale s+sigma into scale s has norm at most one:
|x|_s <= |x|_{s+sigma}.

The weighted l1 choice makes operator norms of linear maps computable
exactly: the unit ball is the closed convex hull of unimodular multiples
of the basis monomials, so a supremum over the ball is a maximum over
basis vectors.  measure_operator_norm exploits this.

Everything here is an immutable value; operations return fresh series
and never mutate their arguments, so concurrent use is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TAYLOR = "taylor"
FOURIER = "fourier"

# Default Fourier width: weight exp(|m| s).  Keeps norms representable in
# doubles for mode counts up to ~700.
DEFAULT_FOURIER_WIDTH = 1.0 / (2.0 * math.pi)

# Germs with |linear coefficient| below this are treated as non-invertible:
# reversion coefficients overflow doubles well before this at order 32.
INVERTIBILITY_THRESHOLD = 1e-8

LINEARITY_TOL = 1e-12

ScaleIndex = float


def check_scale(s: float) -> float:
    """Validate a scale index, 0 < s < 1."""
    if not (0.0 < s < 1.0):
        raise ValueError(f"scale index must lie in (0, 1), got {s}")
    return float(s)


@dataclass(frozen=True, eq=False)
class ScaledSeries:
    """Immutable truncated series (Taylor degree 0..D or Fourier -M..M)."""

    kind: str
    coeffs: np.ndarray
    width: float = DEFAULT_FOURIER_WIDTH

    def __post_init__(self) -> None:
        if self.kind not in (TAYLOR, FOURIER):
            raise ValueError(f"unknown series kind {self.kind!r}")
        arr = np.array(self.coeffs, dtype=np.complex128)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("coefficients must form a nonempty 1-d array")
        if self.kind == FOURIER and arr.size % 2 == 0:
            raise ValueError("fourier coefficients must cover -M..M (odd count)")
        if not (self.width > 0.0):
            raise ValueError("width factor must be positive")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)
        object.__setattr__(self, "width", float(self.width))

    @property
    def order(self) -> int:
        n = self.coeffs.size
        return n - 1 if self.kind == TAYLOR else (n - 1) // 2

    @property
    def indices(self) -> np.ndarray:
        if self.kind == TAYLOR:
            return np.arange(self.coeffs.size)
        m = self.order
        return np.arange(-m, m + 1)

    def coeff(self, index: int) -> complex:
        """Coefficient at a degree (Taylor) or signed mode (Fourier)."""
        pos = index if self.kind == TAYLOR else index + self.order
        if not (0 <= pos < self.coeffs.size):
            raise IndexError(f"index {index} outside truncation")
        return complex(self.coeffs[pos])

    def __repr__(self) -> str:
        return f"ScaledSeries({self.kind}, order={self.order})"


def zeros(kind: str, order: int, width: float = DEFAULT_FOURIER_WIDTH) -> ScaledSeries:
    if order < 0:
        raise ValueError("order must be nonnegative")
    n = order + 1 if kind == TAYLOR else 2 * order + 1
    return ScaledSeries(kind, np.zeros(n, dtype=np.complex128), width)


def monomial(kind: str, order: int, index: int, coeff: complex = 1.0,
             width: float = DEFAULT_FOURIER_WIDTH) -> ScaledSeries:
    base = zeros(kind, order, width)
    arr = base.coeffs.copy()
    pos = index if kind == TAYLOR else index + order
    if not (0 <= pos < arr.size):
        raise IndexError(f"index {index} outside truncation of order {order}")
    arr[pos] = coeff
    return ScaledSeries(kind, arr, width)


def identity_series(order: int) -> ScaledSeries:
    """The Taylor series of z itself."""
    return monomial(TAYLOR, order, 1)


def from_coeffs(kind: str, coeffs, width: float = DEFAULT_FOURIER_WIDTH) -> ScaledSeries:
    return ScaledSeries(kind, np.asarray(coeffs, dtype=np.complex128), width)


def _same_space(x: ScaledSeries, y: ScaledSeries) -> None:
    if x.kind != y.kind:
        raise ValueError(f"mixed series kinds {x.kind}/{y.kind}")
    if x.coeffs.size != y.coeffs.size:
        raise ValueError(f"mixed truncation orders {x.order}/{y.order}")
    if x.kind == FOURIER and x.width != y.width:
        raise ValueError("mixed fourier widths")


def _require_taylor(x: ScaledSeries, what: str) -> None:
    if x.kind != TAYLOR:
        raise ValueError(f"{what} is defined for taylor series only")


def weights(kind: str, order: int, s: float,
            width: float = DEFAULT_FOURIER_WIDTH) -> np.ndarray:
    """Norm weights at scale s, aligned with the coefficient layout."""
    check_scale(s)
    if kind == TAYLOR:
        return np.power(s, np.arange(order + 1, dtype=np.float64))
    m = np.abs(np.arange(-order, order + 1, dtype=np.float64))
    return np.exp(2.0 * math.pi * width * m * s)


def norm(x: ScaledSeries, s: float) -> float:
    """Weighted l1 norm |x|_s; monotone nondecreasing in s."""
    w = weights(x.kind, x.order, s, x.width)
    return float(np.abs(x.coeffs) @ w)


def series_add(x: ScaledSeries, y: ScaledSeries) -> ScaledSeries:
    _same_space(x, y)
    return ScaledSeries(x.kind, x.coeffs + y.coeffs, x.width)


def series_sub(x: ScaledSeries, y: ScaledSeries) -> ScaledSeries:
    _same_space(x, y)
    return ScaledSeries(x.kind, x.coeffs - y.coeffs, x.width)


def series_scale(alpha: complex, x: ScaledSeries) -> ScaledSeries:
    return ScaledSeries(x.kind, alpha * x.coeffs, x.width)


def series_multiply(x: ScaledSeries, y: ScaledSeries) -> ScaledSeries:
    """Truncated Cauchy product; submultiplicative for the scale norms."""
    _same_space(x, y)
    full = np.convolve(x.coeffs, y.coeffs)
    if x.kind == TAYLOR:
        return ScaledSeries(TAYLOR, full[: x.order + 1], x.width)
    m = x.order
    return ScaledSeries(FOURIER, full[m : 3 * m + 1] if m else full, x.width)


def series_compose(x: ScaledSeries, h: ScaledSeries) -> ScaledSeries:
    """Truncated x o h by Horner evaluation; requires h(0) = 0.

    Truncating every intermediate product at the common order keeps all
    coefficients up to that order exact, so the result agrees with the
    untruncated composition through degree D.
    """
    _require_taylor(x, "composition")
    _require_taylor(h, "composition")
    _same_space(x, h)
    if h.coeffs[0] != 0:
        raise ValueError("inner map must fix the origin (h(0) = 0)")
    d = x.order
    acc = np.zeros(d + 1, dtype=np.complex128)
    acc[0] = x.coeffs[d]
    for m in range(d - 1, -1, -1):
        acc = np.convolve(acc, h.coeffs)[: d + 1]
        acc[0] += x.coeffs[m]
    return ScaledSeries(TAYLOR, acc, x.width)


def series_reciprocal(u: ScaledSeries,
                      threshold: float = INVERTIBILITY_THRESHOLD) -> ScaledSeries:
    """Multiplicative inverse 1/u to the truncation order (Newton)."""
    _require_taylor(u, "reciprocal")
    c0 = u.coeffs[0]
    if abs(c0) < threshold:
        raise ValueError("reciprocal needs a constant term bounded away from 0")
    d = u.order
    v = np.zeros(d + 1, dtype=np.complex128)
    v[0] = 1.0 / c0
    correct = 1
    while correct <= d:
        t = np.convolve(u.coeffs, v)[: d + 1]
        t = -t
        t[0] += 2.0
        v = np.convolve(v, t)[: d + 1]
        correct *= 2
    return ScaledSeries(TAYLOR, v, u.width)


def series_reversion(h: ScaledSeries,
                     threshold: float = INVERTIBILITY_THRESHOLD) -> ScaledSeries:
    """Compositional inverse r with h o r = r o h = id up to the order.

    Newton iteration on coefficients, doubling the number of correct
    coefficients per step.
    """
    _require_taylor(h, "reversion")
    if h.coeffs[0] != 0:
        raise ValueError("reversion needs a germ fixing the origin")
    if h.order < 1:
        raise ValueError("reversion needs order >= 1")
    c1 = h.coeffs[1]
    if abs(c1) < threshold:
        raise ValueError("vanishing linear coefficient: germ not invertible")
    d = h.order
    ident = identity_series(d)
    hp = series_differentiate(h)
    r = series_scale(1.0 / c1, ident)
    for _ in range(d.bit_length() + 2):
        err = series_sub(series_compose(h, r), ident)
        resid = float(np.max(np.abs(err.coeffs)))
        if resid <= 1e-17 * (1.0 + float(np.max(np.abs(r.coeffs)))):
            break
        slope = series_compose(hp, r)
        r = series_sub(r, series_multiply(err, series_reciprocal(slope, threshold)))
    return r


def series_differentiate(x: ScaledSeries) -> ScaledSeries:
    """Termwise derivative; degree drops by one (top coefficient zeroed)."""
    _require_taylor(x, "differentiation")
    d = x.order
    out = np.zeros(d + 1, dtype=np.complex128)
    if d >= 1:
        out[:d] = x.coeffs[1:] * np.arange(1, d + 1)
    return ScaledSeries(TAYLOR, out, x.width)


def max_coeff_diff(x: ScaledSeries, y: ScaledSeries) -> float:
    _same_space(x, y)
    return float(np.max(np.abs(x.coeffs - y.coeffs)))


# ---------------------------------------------------------------------------
# operator norms with scale loss
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundedOperatorEstimate:
    """Measured loss-k operator norm N = sup sigma^k |u(x)|_s / |x|_{s+sigma}.

    Exact over each sampled (s, sigma): for weighted-l1 norms the supremum
    over the unit ball is attained on basis monomials.  Refining the grid
    can only increase N.
    """

    k: int
    N: float
    grid: tuple[tuple[float, float], ...]
    argmax: tuple[float, float, int]


def _check_grid(grid) -> tuple[tuple[float, float], ...]:
    pairs = tuple((float(s), float(sig)) for s, sig in grid)
    if not pairs:
        raise ValueError("scale grid must be nonempty")
    for s, sig in pairs:
        if not (0.0 < s and 0.0 < sig and s + sig < 1.0):
            raise ValueError(f"grid pair ({s}, {sig}) violates 0 < s, 0 < sigma, s + sigma < 1")
    return pairs


def _verify_linear(u, template: ScaledSeries, positions: np.ndarray, seed: int) -> None:
    gen = np.random.default_rng(seed)
    size = template.coeffs.size
    for _ in range(2):
        xa = np.zeros(size, dtype=np.complex128)
        ya = np.zeros(size, dtype=np.complex128)
        xa[positions] = gen.standard_normal(positions.size) + 1j * gen.standard_normal(positions.size)
        ya[positions] = gen.standard_normal(positions.size) + 1j * gen.standard_normal(positions.size)
        a = complex(gen.standard_normal(), gen.standard_normal())
        b = complex(gen.standard_normal(), gen.standard_normal())
        x = ScaledSeries(template.kind, xa, template.width)
        y = ScaledSeries(template.kind, ya, template.width)
        lhs = u(ScaledSeries(template.kind, a * xa + b * ya, template.width))
        rhs = a * u(x).coeffs + b * u(y).coeffs
        scale = max(1.0, float(np.max(np.abs(rhs))))
        if float(np.max(np.abs(lhs.coeffs - rhs))) > LINEARITY_TOL * scale:
            raise ValueError("operator failed the linearity check")


def measure_operator_norm(u, k: int, grid, template: ScaledSeries, *,
                          indices=None, seed: int = 0,
                          check_linearity: bool = True) -> BoundedOperatorEstimate:
    """Measure the loss-k norm of a linear map on the template's space.

    ``indices`` restricts the basis sweep (and the linearity probes) to a
    sub-family of monomials, for operators defined on a subspace such as
    zero-mean series.
    """
    if k < 0:
        raise ValueError("loss exponent k must be nonnegative")
    pairs = _check_grid(grid)
    all_idx = template.indices
    if indices is None:
        idx = np.asarray(all_idx)
    else:
        idx = np.asarray(sorted(indices))
    offset = 0 if template.kind == TAYLOR else template.order
    positions = idx + offset
    if check_linearity:
        _verify_linear(u, template, positions, seed)

    images = np.empty((idx.size, template.coeffs.size), dtype=np.float64)
    for row, index in enumerate(idx):
        em = monomial(template.kind, template.order, int(index), 1.0, template.width)
        images[row] = np.abs(u(em).coeffs)

    best = -math.inf
    arg = (0.0, 0.0, 0)
    for s, sig in pairs:
        w_s = weights(template.kind, template.order, s, template.width)
        w_up = weights(template.kind, template.order, s + sig, template.width)
        numer = images @ w_s
        denom = w_up[positions]
        ratios = (sig ** k) * numer / denom
        pos = int(np.argmax(ratios))
        if ratios[pos] > best:
            best = float(ratios[pos])
            arg = (s, sig, int(idx[pos]))
    return BoundedOperatorEstimate(k=k, N=best, grid=pairs, argmax=arg)


# ---------------------------------------------------------------------------
# plain-text serialization (bit-faithful round trip)
# ---------------------------------------------------------------------------

def dump_series(x: ScaledSeries, *, group_flag: bool = False) -> str:
    """One header line, then `index re im` with 17 significant digits."""
    head = f"kind={x.kind} order={x.order}"
    if x.kind == FOURIER:
        head += f" width={x.width:.16e}"
    if group_flag:
        head += " group=1"
    lines = [head]
    for m, c in zip(x.indices, x.coeffs):
        lines.append(f"{int(m)} {c.real:.16e} {c.imag:.16e}")
    return "\n".join(lines) + "\n"


def _parse_header(line: str) -> dict:
    fields = {}
    for tok in line.split():
        key, _, val = tok.partition("=")
        if not val:
            raise ValueError(f"malformed series header token {tok!r}")
        fields[key] = val
    if "kind" not in fields or "order" not in fields:
        raise ValueError("series header must carry kind= and order=")
    return fields


def parse_series(text: str) -> tuple[ScaledSeries, dict]:
    """Parse the text format; returns the series and the header fields."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty series text")
    fields = _parse_header(lines[0])
    kind = fields["kind"]
    order = int(fields["order"])
    width = float(fields.get("width", DEFAULT_FOURIER_WIDTH))
    base = zeros(kind, order, width)
    arr = base.coeffs.copy()
    expect = arr.size
    if len(lines) - 1 != expect:
        raise ValueError(f"expected {expect} coefficient lines, got {len(lines) - 1}")
    offset = 0 if kind == TAYLOR else order
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"malformed coefficient line {ln!r}")
        index = int(parts[0])
        arr[index + offset] = complex(float(parts[1]), float(parts[2]))
    return ScaledSeries(kind, arr, width), fields


def load_series(text: str) -> ScaledSeries:
    return parse_series(text)[0]
