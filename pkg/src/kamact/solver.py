"""Quadratically convergent orbit solver with runtime bound certification.

Given an action instance with measured constants (c, N(j), kappa) and a
target state x, the solver runs the iteration

    xi_0 = j(x),            xi_{n+1} = phi(xi_n),
    gamma_0 = xi_0,         gamma_{n+1} = glog(gexp(gamma_n) gexp(xi_{n+1})),
    x_0 = x,                x_{n+1} = act(ginv(gexp(xi_n)), x_n),

on the shrinking scale schedule s_0 = s, s_{n+1} = s_n - 2 sigma_n with
sigma_n = 2^{-(n+2)} delta, and assembles g = gexp(lim gamma_n) solving
act(g, 0) = x.  Convergence is guaranteed inside the ball |x|_s <= eps,

    eps = delta^{2k+2} / (4^{3k+4} c N(j)^2),    delta <= 4 N(j)^{1/(k+1)},

and every run records, per step, the certified bounds:

  * step size:        |xi_n|_{s_{n+1}} <= (2^{-4} delta)^{2^n}, and the
                      sharper (2^{-4} delta mu_n)^{2^n} with
                      mu_n = prod_{m>n} (c N(j) sigma_m^{-k-1})^{-2^{-m}};
  * accumulated log:  |gamma_n|_{s_{n+1}} <= g_n <= 1 with
                      g_0 = 2^{-4}, g_n = (1 + 2^{-2^{n+1}}) g_{n-1} + 2^{-2^{n+1}};
  * Cauchy increments: |gamma_n - gamma_{n-1}|_{s-delta} <= (1+kappa) 2^{-2^{n+1}}.

Constants fed to eps and the bounds are the measured ones inflated by a
safety factor (grid maxima under-estimate suprema); the per-call phi
certificate uses the raw measured constants.  Runs outside the certified
ball are permitted but flagged uncertified.
"""

from __future__ import annotations

import enum
import json
import math
import statistics
from dataclasses import dataclass, field

from .action import (
    ActionInstance,
    CertificateError,
    DomainGuardError,
    noise_allowance,
    phi,
    rho,
)
from .group import gexp, ginv, glog, gmul, GroupElement
from .series import ScaledSeries, check_scale, norm, series_sub

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# schedule and closed-form constants
# ---------------------------------------------------------------------------

def sigma_term(delta: float, n: int) -> float:
    """sigma_n = 2^{-(n+2)} delta, exact in floating point."""
    return math.ldexp(delta, -(n + 2))


@dataclass(frozen=True)
class Schedule:
    """Shrinking scales s_n = (s - delta) + delta 2^{-n}, losses sigma_n.

    Entries are built from the closed form so that the telescoping
    identity s - s_n = delta (1 - 2^{-n}) holds to rounding; the
    recurrence s_{n+1} = s_n - 2 sigma_n is verified as a property.
    """

    s: float
    delta: float
    entries: tuple[tuple[int, float, float], ...]

    @staticmethod
    def build(s: float, delta: float, n_max: int, *, nj: float | None = None,
              k: int | None = None) -> "Schedule":
        check_scale(s)
        if not (0.0 < delta < s):
            raise ValueError(f"need 0 < delta < s, got delta={delta}, s={s}")
        if nj is not None:
            if k is None:
                raise ValueError("loss exponent k required together with nj")
            cap = 4.0 * nj ** (1.0 / (k + 1))
            if delta > cap * (1.0 + 1e-12):
                raise ValueError(
                    f"delta = {delta} violates delta <= 4 N(j)^(1/(k+1)) = {cap:.6g}")
        entries = tuple(
            (n, (s - delta) + math.ldexp(delta, -n), sigma_term(delta, n))
            for n in range(n_max + 1)
        )
        return Schedule(s=s, delta=delta, entries=entries)

    def scale(self, n: int) -> float:
        return self.entries[n][1]

    def sigma(self, n: int) -> float:
        return self.entries[n][2]


def epsilon_closed_form(k: int, c: float, nj: float, delta: float) -> float:
    """Radius of the certified ball: delta^(2k+2) / (4^(3k+4) c N(j)^2)."""
    if k < 0:
        raise ValueError("loss exponent k must be nonnegative")
    if c < 1.0:
        raise ValueError("constant c must be >= 1")
    if not nj > 0.0:
        raise ValueError("N(j) must be positive")
    if not 0.0 < delta:
        raise ValueError("delta must be positive")
    cap = 4.0 * nj ** (1.0 / (k + 1))
    if delta > cap * (1.0 + 1e-12):
        raise ValueError(f"delta = {delta} violates delta <= 4 N(j)^(1/(k+1)) = {cap:.6g}")
    return delta ** (2 * k + 2) / (4.0 ** (3 * k + 4) * c * nj * nj)


def epsilon_product(k: int, c: float, nj: float, delta: float, terms: int) -> float:
    """Partial product form of the ball radius, evaluated in log space:

        (c delta / (16 sigma_0)) * prod_{m<terms} (c N(j) sigma_m^{-k-1})^{-2^{-m}}.

    Converges geometrically to the closed form as terms grows.
    """
    if terms < 1:
        raise ValueError("need at least one product term")
    sigma0 = sigma_term(delta, 0)
    total = math.log(c) + math.log(delta) - math.log(16.0 * sigma0)
    for m in range(terms):
        factor_log = math.log(c) + math.log(nj) - (k + 1) * math.log(sigma_term(delta, m))
        total -= math.ldexp(1.0, -m) * factor_log
    return math.exp(total)


def mu(n: int, k: int, c: float, nj: float, delta: float, terms: int = 80) -> float:
    """Tail product mu_n = prod_{m >= n+1} (c N(j) sigma_m^{-k-1})^{-2^{-m}} <= 1.

    Requires every factor >= 1, which holds exactly when
    delta <= 4 (c N(j))^{1/(k+1)}.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if terms < 1:
        raise ValueError("need at least one product term")
    head_log = math.log(c) + math.log(nj) - (k + 1) * math.log(sigma_term(delta, 0))
    if head_log < -1e-12:
        raise ValueError(
            "hypothesis c N(j) sigma_m^(-k-1) >= 1 fails: delta too large "
            "for these constants")
    total = 0.0
    for m in range(n + 1, n + 1 + terms):
        factor_log = math.log(c) + math.log(nj) - (k + 1) * math.log(sigma_term(delta, m))
        total -= math.ldexp(1.0, -m) * factor_log
    return math.exp(total)


def g_sequence(n: int) -> float:
    """Accumulated-log bound: g_0 = 2^{-4}, g_n = (1+2^{-2^{n+1}}) g_{n-1} + 2^{-2^{n+1}}.

    Increasing with limit 2/15 < 1 (the terms 2^{-2^{m+1}} underflow to 0
    once 2^{m+1} exceeds the exponent range, which only sharpens it).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    g = 0.0625
    for m in range(1, n + 1):
        exponent = 2 ** (m + 1)
        t = math.ldexp(1.0, -exponent) if exponent <= 1074 else 0.0
        g = (1.0 + t) * g + t
    return g


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckRecord:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "margin": self.margin, "detail": self.detail}


@dataclass(frozen=True)
class CertificateReport:
    checks: tuple[CheckRecord, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed_names(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def get(self, name: str) -> CheckRecord:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def verify_preliminary_remark(delta: float, n_max: int) -> CertificateReport:
    """Check (2^{-4} delta)^{2^n} <= sigma_{n+1} for n = 0..n_max.

    Compared in log space (exact up to rounding, no underflow); margins
    are the log-scale slack 2^n log(2^{-4} delta) <= log sigma_{n+1}.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    log_b = math.log(delta) - 4.0 * LN2
    checks = []
    for n in range(n_max + 1):
        lhs_log = math.ldexp(1.0, n) * log_b
        rhs_log = math.log(sigma_term(delta, n + 1))
        margin = rhs_log - lhs_log
        checks.append(CheckRecord(
            name=f"step_dominates_next_loss_n{n}",
            passed=margin >= -1e-12,
            margin=margin,
            detail="log-scale margin"))
    return CertificateReport(tuple(checks))


def verify_step_arithmetic(delta: float, n_max: int) -> CertificateReport:
    """Check sigma_n^{-1} (2^{-4} delta)^{2^n} <= 2^{-2^{n+1}} for n = 0..n_max.

    Pure arithmetic (equality at n = 0); compared in log space.
    """
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must lie in (0, 1]")
    log_b = math.log(delta) - 4.0 * LN2
    checks = []
    for n in range(n_max + 1):
        lhs_log = math.ldexp(1.0, n) * log_b - math.log(sigma_term(delta, n))
        rhs_log = -math.ldexp(1.0, n + 1) * LN2
        margin = rhs_log - lhs_log
        checks.append(CheckRecord(
            name=f"weighted_step_bound_n{n}",
            passed=margin >= -1e-12,
            margin=margin,
            detail="log-scale margin"))
    return CertificateReport(tuple(checks))


# ---------------------------------------------------------------------------
# iteration trace and results
# ---------------------------------------------------------------------------

TRACE_COLUMNS = ("n", "s_n", "sigma_n", "xi_norm", "lemma1_bound", "mu_n",
                 "gamma_norm", "g_n", "x_norm", "cauchy_inc", "lemma3_bound")


@dataclass(frozen=True)
class TraceRow:
    n: int
    s_n: float
    sigma_n: float
    xi_norm: float          # |xi_n| at scale s_{n+1}
    lemma1_bound: float     # (2^{-4} delta)^{2^n}
    mu_n: float
    gamma_norm: float       # |gamma_n| at scale s_{n+1}
    g_n: float
    x_norm: float           # |x_n| at scale s_{n+1}
    cauchy_inc: float       # |gamma_n - gamma_{n-1}| at scale s - delta (0 at n=0)
    lemma3_bound: float     # (1 + kappa) 2^{-2^{n+1}}


@dataclass(frozen=True)
class IterationTrace:
    rows: tuple[TraceRow, ...]

    def to_csv(self) -> str:
        lines = [",".join(TRACE_COLUMNS)]
        for r in self.rows:
            vals = [str(r.n)] + [f"{getattr(r, c):.17g}" for c in TRACE_COLUMNS[1:]]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"


class SolveStatus(enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    DOMAIN_GUARD_TRIPPED = "DomainGuardTripped"
    CERTIFICATE_FAILED = "CertificateFailed"


@dataclass(frozen=True)
class SolveConfig:
    s: float
    delta: float
    tol: float = 1e-13
    max_iter: int = 12
    safety_factor: float = 1.5

    def __post_init__(self) -> None:
        check_scale(self.s)
        if not (0.0 < self.delta < self.s):
            raise ValueError("need 0 < delta < s")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if not self.safety_factor > 0.0:
            raise ValueError("safety factor must be positive")


@dataclass(frozen=True, eq=False)
class SolveResult:
    g: GroupElement
    residual: float
    trace: IterationTrace
    certificates: CertificateReport
    status: SolveStatus
    certified: bool
    epsilon: float
    iterations: int
    constants: dict

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "certified": self.certified,
            "residual": self.residual,
            "epsilon": self.epsilon,
            "iterations": self.iterations,
            "constants": self.constants,
            "certificates": self.certificates.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class _Margins:
    """Aggregates worst-case certificate margins across iteration steps."""

    def __init__(self) -> None:
        self.records: dict[str, tuple[float, bool, str]] = {}

    def add(self, name: str, margin: float, passed: bool, detail: str = "") -> None:
        if name in self.records:
            old_margin, old_passed, old_detail = self.records[name]
            if margin < old_margin:
                self.records[name] = (margin, passed and old_passed, detail)
            else:
                self.records[name] = (old_margin, passed and old_passed, old_detail)
        else:
            self.records[name] = (margin, passed, detail)

    def checks(self) -> list[CheckRecord]:
        return [CheckRecord(name=k, passed=v[1], margin=v[0], detail=v[2])
                for k, v in self.records.items()]


def solve(instance: ActionInstance, x: ScaledSeries,
          config: SolveConfig) -> SolveResult:
    """Solve act(g, 0) = x with per-step certification; see module docstring.

    The returned status is Converged only when the step norms dropped
    below tol, the orbit residual at scale (s - delta)/2 is within tol,
    the chart bound |glog(g)|_{s-delta} <= 1 holds, and (for runs inside
    the certified ball) every recorded bound held.
    """
    if x.kind != instance.kind or x.order != instance.order:
        raise ValueError("state does not live in the instance's space")
    s, delta = config.s, config.delta
    k = instance.k
    c_used, nj_used, kappa_used = instance.inflated(config.safety_factor)
    c_used = max(1.0, c_used)

    # Theorem constraint checked against the raw measured norm (binding
    # side when safety >= 1); epsilon evaluated with the inflated ones.
    cap = 4.0 * instance.measured_Nj ** (1.0 / (k + 1))
    if delta > cap * (1.0 + 1e-12):
        raise ValueError(f"delta = {delta} violates delta <= 4 N(j)^(1/(k+1)) = {cap:.6g}")
    eps_used = epsilon_closed_form(k, c_used, nj_used, delta)

    x_norm_start = norm(x, s)
    certified = x_norm_start <= eps_used * (1.0 + 1e-12)

    sched = Schedule.build(s, delta, config.max_iter + 2)
    mu_vals = [mu(n, k, c_used, nj_used, delta) for n in range(config.max_iter + 1)]
    log_b = math.log(delta) - 4.0 * LN2
    zero = instance.zero_state()
    order = instance.order

    margins = _Margins()
    rows: list[TraceRow] = []
    xi = instance.j(x)
    gamma = xi
    gamma_prev = None
    xn = x
    stopped = False
    guard_tripped = False
    guard_detail = ""

    for n in range(config.max_iter + 1):
        s_next = sched.scale(n + 1)
        xi_size = norm(xi, s_next)
        pow2n = 2 ** n
        l1_crude = math.exp(pow2n * log_b)
        l1_sharp = math.exp(pow2n * (log_b + math.log(mu_vals[n])))
        gamma_size = norm(gamma, s_next)
        g_n = g_sequence(n)
        x_size = norm(xn, s_next)
        if n == 0:
            cauchy = 0.0
        else:
            cauchy = norm(series_sub(gamma, gamma_prev), s - delta)
        exponent = 2 ** (n + 1)
        tail = math.ldexp(1.0, -exponent) if exponent <= 1074 else 0.0
        l3_bound = (1.0 + kappa_used) * tail
        rows.append(TraceRow(n=n, s_n=sched.scale(n), sigma_n=sched.sigma(n),
                             xi_norm=xi_size, lemma1_bound=l1_crude,
                             mu_n=mu_vals[n], gamma_norm=gamma_size, g_n=g_n,
                             x_norm=x_size, cauchy_inc=cauchy,
                             lemma3_bound=l3_bound))

        allow = noise_allowance(order, max(xi_size, gamma_size, 1.0))
        margins.add("step_bound_crude", l1_crude - xi_size,
                    xi_size <= l1_crude + allow, f"n={n}")
        margins.add("step_bound_sharp", l1_sharp - xi_size,
                    xi_size <= l1_sharp + allow, f"n={n}")
        margins.add("log_accumulation_bound", g_n - gamma_size,
                    gamma_size <= g_n + allow, f"n={n}")
        margins.add("log_accumulation_below_one", 1.0 - g_n, g_n <= 1.0, f"n={n}")
        if n >= 1:
            margins.add("cauchy_increment_bound", l3_bound - cauchy,
                        cauchy <= l3_bound + allow, f"n={n}")

        if xi_size < config.tol:
            stopped = True
            break
        if n == config.max_iter:
            break

        sig_next = sched.sigma(n + 1)
        if xi_size > sig_next * (1.0 + 1e-12):
            guard_tripped = True
            guard_detail = (f"|xi_{n}| = {xi_size:.3e} exceeds sigma_{n + 1} "
                            f"= {sig_next:.3e}")
            break
        try:
            xi_next = phi(instance, xi, sched.scale(n + 2), sig_next, certify=False)
        except DomainGuardError as exc:
            guard_tripped = True
            guard_detail = str(exc)
            break
        eta_size = norm(xi_next, sched.scale(n + 2))
        phi_bound = (instance.measured_c * instance.measured_Nj
                     * sig_next ** (-(k + 1)) * xi_size * xi_size)
        margins.add("phi_bound_measured", phi_bound - eta_size,
                    eta_size <= phi_bound + noise_allowance(order, phi_bound),
                    f"n={n}")

        gamma_prev = gamma
        gamma = glog(gmul(gexp(gamma), gexp(xi_next)))
        xn = instance.act(ginv(gexp(xi)), xn)
        xi = xi_next

        # Iteration invariants: x_{n+1} = rho(xi_{n+1}) and xi_{n+1} = j(x_{n+1}).
        probe_scale = sched.scale(n + 2)
        dev = max(norm(series_sub(rho(instance, xi), xn), probe_scale),
                  norm(series_sub(instance.j(xn), xi), probe_scale))
        margins.add("state_generator_invariant", config.tol - dev,
                    dev <= config.tol, f"n={n + 1}")

    g = gexp(gamma)
    glog_size = norm(gamma, s - delta)
    residual = norm(series_sub(instance.act(g, zero), x), (s - delta) / 2.0)

    margins.add("chart_ball", 1.0 - glog_size,
                glog_size <= 1.0 + noise_allowance(order, 1.0), "final")
    margins.add("orbit_residual", config.tol - residual,
                residual <= config.tol, "final")
    rel = abs(epsilon_product(k, c_used, nj_used, delta, 60) / eps_used - 1.0)
    margins.add("epsilon_product_identity", 1e-10 - rel, rel <= 1e-10, "60 terms")
    prelim = verify_preliminary_remark(delta, config.max_iter + 1)
    margins.add("preliminary_remark",
                min(ch.margin for ch in prelim.checks), prelim.passed, "log-scale")
    arith = verify_step_arithmetic(delta, config.max_iter + 1)
    margins.add("step_arithmetic",
                min(ch.margin for ch in arith.checks), arith.passed, "log-scale")

    report = CertificateReport(tuple(margins.checks()))

    lemma_names = ("step_bound_crude", "step_bound_sharp", "log_accumulation_bound",
                   "log_accumulation_below_one", "cauchy_increment_bound",
                   "phi_bound_measured")
    lemma_violated = any(not margins.records[nm][1] for nm in lemma_names
                         if nm in margins.records)
    invariant_ok = margins.records.get("state_generator_invariant",
                                       (0.0, True, ""))[1]
    if guard_tripped:
        status = SolveStatus.DOMAIN_GUARD_TRIPPED
    elif not stopped:
        status = SolveStatus.MAX_ITERATIONS
    elif certified and lemma_violated:
        status = SolveStatus.CERTIFICATE_FAILED
    elif (residual > config.tol or not invariant_ok
          or glog_size > 1.0 + noise_allowance(order, 1.0)):
        status = SolveStatus.CERTIFICATE_FAILED
    else:
        status = SolveStatus.CONVERGED

    constants = {
        "k": k,
        "c_measured": instance.measured_c,
        "nj_measured": instance.measured_Nj,
        "kappa_measured": instance.measured_kappa,
        "safety_factor": config.safety_factor,
        "c_used": c_used,
        "nj_used": nj_used,
        "kappa_used": kappa_used,
        "s": s,
        "delta": delta,
        "tol": config.tol,
        "x_norm": x_norm_start,
        "guard_detail": guard_detail,
    }
    return SolveResult(g=g, residual=residual, trace=IterationTrace(tuple(rows)),
                       certificates=report, status=status, certified=certified,
                       epsilon=eps_used, iterations=len(rows) - 1,
                       constants=constants)


# ---------------------------------------------------------------------------
# convergence-rate diagnostics
# ---------------------------------------------------------------------------

RATE_WINDOW = (1e-14, 1e-1)


def rate_ratios(trace: IterationTrace, window=RATE_WINDOW) -> list[float]:
    """log|xi_{n+1}| / log|xi_n| for steps with |xi_n| inside the window."""
    lo, hi = window
    out = []
    for a, b in zip(trace.rows, trace.rows[1:]):
        if lo < a.xi_norm < hi and 0.0 < b.xi_norm < hi:
            out.append(math.log(b.xi_norm) / math.log(a.xi_norm))
    return out


def quadratic_rate(trace: IterationTrace, window=RATE_WINDOW) -> float:
    """Median log-ratio over eligible steps; near 2 for a healthy run."""
    lo, hi = window
    eligible = [r for r in trace.rows if lo < r.xi_norm < hi]
    if len(eligible) < 3:
        raise ValueError("insufficient eligible steps for a rate estimate")
    ratios = rate_ratios(trace, window)
    if not ratios:
        raise ValueError("no eligible consecutive step pairs")
    return statistics.median(ratios)
