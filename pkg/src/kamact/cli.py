"""Batch front-end: build instances, run solves and verifications, emit files.

Invocation:  kamact --command NAME --config PATH --out DIR --seed N
(or python -m kamact ...).  Flags override the config file.  Commands:

  run            solve act(g, 0) = x; writes trace.csv and result.json;
                 exit 0 iff the run converged with all certificates green
  verify-group   group-law sweep; writes group_report.json
  verify-ac      quadratic-smallness sweep; writes ac_report.json
  measure-j      operator-norm measurement; germ j by default, the
                 small-divisor operator when alpha is configured
  oracle-compare solver vs series-reversion oracle on the a = id germ
  sweep          (delta, f) grid of solves; writes sweep.csv; statuses
                 are data, so it exits 0
  epsilon-table  product form vs closed form of the ball radius

The config is line-based ``key = value`` with # comments.  A fixed seed
yields byte-identical CSV/JSON on any platform (splitmix64 sampling).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .action import ac_scaling_slope, verify_ac
from .group import measure_group_constants
from .instances import (
    FOURIER_SCALE_GRID,
    GERM_SCALE_GRID,
    build_germ_instance,
    germ_spec,
    measure_kboundedness,
    reversion_oracle,
)
from .rng import SplitMix64, random_series
from .series import TAYLOR, load_series, max_coeff_diff, norm
from .solver import (
    SolveConfig,
    SolveStatus,
    epsilon_closed_form,
    epsilon_product,
    quadratic_rate,
    solve,
)


@dataclass
class RunConfig:
    """Parsed key = value configuration; see DESCRIPTIONS for the keys."""

    command: str = "run"
    # instance
    a_coeffs: tuple[complex, ...] = (0.0, 1.0)
    trunc: int = 32
    alpha: float | None = None
    tau: float = 1.0
    C: float = 1.0
    modes: int = 256
    # solver
    s: float = 0.9
    delta: float = 0.5
    tol: float = 1e-13
    max_iter: int = 12
    safety_factor: float = 1.5
    # input state
    f: float = 0.5
    x_file: str | None = None
    decay: float = 0.5
    seed: int = 42
    # sweeps and tables
    delta_grid: tuple[float, ...] = (0.2, 0.4, 0.6)
    f_grid: tuple[float, ...] = (0.25, 0.5, 1.0)
    k_grid: tuple[int, ...] = (0, 1, 2)
    c_grid: tuple[float, ...] = (1.0, 2.0)
    nj_grid: tuple[float, ...] = (1.0, 3.0)
    eps_delta_grid: tuple[float, ...] = (0.1, 0.5, 0.9)
    samples: int = 1000
    m_grid: tuple[int, ...] = (32, 64, 128, 256)
    k_max: int = 3
    oracle_runs: int = 20

    def __post_init__(self) -> None:
        if not (0.0 < self.delta < self.s < 1.0):
            raise ValueError("config needs 0 < delta < s < 1")
        if not self.tol > 0.0:
            raise ValueError("config needs tol > 0")


_KEY_TO_FIELD = {
    "command": "command",
    "a.coeffs": "a_coeffs",
    "trunc": "trunc",
    "alpha": "alpha",
    "tau": "tau",
    "C": "C",
    "modes": "modes",
    "s": "s",
    "delta": "delta",
    "tol": "tol",
    "max_iter": "max_iter",
    "safety_factor": "safety_factor",
    "f": "f",
    "x.file": "x_file",
    "decay": "decay",
    "seed": "seed",
    "delta.grid": "delta_grid",
    "f.grid": "f_grid",
    "k.grid": "k_grid",
    "c.grid": "c_grid",
    "nj.grid": "nj_grid",
    "eps.delta.grid": "eps_delta_grid",
    "samples": "samples",
    "m.grid": "m_grid",
    "k.max": "k_max",
    "oracle.runs": "oracle_runs",
}

_PARSERS = {
    "command": str,
    "a_coeffs": lambda v: tuple(complex(tok.strip()) for tok in v.split(",")),
    "trunc": int,
    "alpha": float,
    "tau": float,
    "C": float,
    "modes": int,
    "s": float,
    "delta": float,
    "tol": float,
    "max_iter": int,
    "safety_factor": float,
    "f": float,
    "x_file": str,
    "decay": float,
    "seed": int,
    "delta_grid": lambda v: tuple(float(tok) for tok in v.split(",")),
    "f_grid": lambda v: tuple(float(tok) for tok in v.split(",")),
    "k_grid": lambda v: tuple(int(tok) for tok in v.split(",")),
    "c_grid": lambda v: tuple(float(tok) for tok in v.split(",")),
    "nj_grid": lambda v: tuple(float(tok) for tok in v.split(",")),
    "eps_delta_grid": lambda v: tuple(float(tok) for tok in v.split(",")),
    "samples": int,
    "m_grid": lambda v: tuple(int(tok) for tok in v.split(",")),
    "k_max": int,
    "oracle_runs": int,
}

COMMANDS = ("run", "verify-group", "verify-ac", "measure-j", "oracle-compare",
            "sweep", "epsilon-table")


def parse_config(text: str) -> RunConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _KEY_TO_FIELD:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        attr = _KEY_TO_FIELD[key]
        try:
            values[attr] = _PARSERS[attr](val)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return RunConfig(**values)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _fail(out: Path, reason: str, payload: dict | None = None) -> int:
    doc = {"exit": 1, "reason": reason}
    if payload:
        doc.update(payload)
    print(json.dumps(doc, sort_keys=True))
    return 1


def _build_instance(cfg: RunConfig):
    spec = germ_spec(cfg.a_coeffs, cfg.trunc)
    return build_germ_instance(spec, seed=cfg.seed)


def _state_for_run(cfg: RunConfig, instance, eps: float):
    if cfg.x_file:
        x = load_series(Path(cfg.x_file).read_text())
        if x.coeffs[0] != 0:
            raise ValueError("state file must carry a series vanishing at 0")
        return x
    if cfg.f == 0.0:
        return instance.zero_state()
    rng = SplitMix64(cfg.seed).spawn(1)
    return random_series(rng, TAYLOR, cfg.trunc, decay=cfg.decay,
                         min_index=instance.state_min_degree,
                         target_norm=cfg.f * eps, at_scale=cfg.s)


def cmd_run(cfg: RunConfig, out: Path) -> int:
    instance = _build_instance(cfg)
    sc = SolveConfig(s=cfg.s, delta=cfg.delta, tol=cfg.tol,
                     max_iter=cfg.max_iter, safety_factor=cfg.safety_factor)
    c_used, nj_used, _ = instance.inflated(cfg.safety_factor)
    eps = epsilon_closed_form(instance.k, max(1.0, c_used), nj_used, cfg.delta)
    x = _state_for_run(cfg, instance, eps)
    result = solve(instance, x, sc)
    _write(out / "trace.csv", result.trace.to_csv())
    _write(out / "result.json", result.to_json() + "\n")
    ok = result.status is SolveStatus.CONVERGED and result.certificates.passed \
        and result.certified
    if not ok:
        return _fail(out, "run not fully certified", {
            "status": result.status.value,
            "certified": result.certified,
            "failed_checks": result.certificates.failed_names(),
        })
    print(json.dumps({"exit": 0, "status": result.status.value,
                      "residual": result.residual}, sort_keys=True))
    return 0


def cmd_verify_group(cfg: RunConfig, out: Path) -> int:
    report = measure_group_constants(cfg.trunc, GERM_SCALE_GRID, cfg.samples,
                                     cfg.seed, decay=cfg.decay)
    _write(out / "group_report.json", json.dumps(report.to_dict(), indent=2,
                                                 sort_keys=True) + "\n")
    if report.margin_first < -1e-10:
        return _fail(out, "first group inequality violated",
                     {"margin_first": report.margin_first})
    print(json.dumps({"exit": 0, "kappa": report.kappa_estimate,
                      "samples": report.samples}, sort_keys=True))
    return 0


def cmd_verify_ac(cfg: RunConfig, out: Path) -> int:
    instance = _build_instance(cfg)
    report = verify_ac(instance, cfg.samples, GERM_SCALE_GRID, cfg.seed,
                       decay=cfg.decay)
    doc = report.to_dict()
    rng = SplitMix64(cfg.seed).spawn(2)
    slopes = []
    for _ in range(10):
        xi = random_series(rng, TAYLOR, cfg.trunc, decay=cfg.decay, min_index=1,
                           target_norm=0.05, at_scale=0.7)
        slopes.append(ac_scaling_slope(instance, xi, 0.5, 0.1))
    doc["scaling_slopes"] = slopes
    _write(out / "ac_report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if report.samples == 0 or not math.isfinite(report.c_estimate):
        return _fail(out, "quadratic-smallness sweep degenerate", doc)
    print(json.dumps({"exit": 0, "c_estimate": report.c_estimate,
                      "samples": report.samples}, sort_keys=True))
    return 0


def cmd_measure_j(cfg: RunConfig, out: Path) -> int:
    if cfg.alpha is None:
        instance = _build_instance(cfg)
        est = instance.nj_estimate
        doc = {"operator": "germ_j", "k": est.k, "N": est.N,
               "argmax": list(est.argmax), "grid_size": len(est.grid)}
        _write(out / "jmeasure.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
        print(json.dumps({"exit": 0, "N": est.N}, sort_keys=True))
        return 0
    study = measure_kboundedness(cfg.alpha, cfg.tau, cfg.C,
                                 mode_list=cfg.m_grid,
                                 k_values=tuple(range(cfg.k_max + 1)),
                                 grid=FOURIER_SCALE_GRID, seed=cfg.seed)
    _write(out / "jmeasure.json", json.dumps(study.to_dict(), indent=2,
                                             sort_keys=True) + "\n")
    lines = ["k," + ",".join(f"M{m}" for m in study.mode_list)]
    for k in study.k_values:
        lines.append(f"{k}," + ",".join(_fmt(v) for v in study.estimates[k]))
    _write(out / "jmeasure.csv", "\n".join(lines) + "\n")
    if study.stabilizing_k is None:
        return _fail(out, "no stabilizing loss exponent found", study.to_dict())
    print(json.dumps({"exit": 0, "stabilizing_k": study.stabilizing_k},
                     sort_keys=True))
    return 0


def cmd_oracle_compare(cfg: RunConfig, out: Path) -> int:
    if tuple(cfg.a_coeffs) != (0.0, 1.0):
        return _fail(out, "oracle-compare needs the a = id instance "
                          "(a.coeffs = 0,1)")
    instance = _build_instance(cfg)
    sc = SolveConfig(s=cfg.s, delta=cfg.delta, tol=cfg.tol,
                     max_iter=cfg.max_iter, safety_factor=cfg.safety_factor)
    c_used, nj_used, _ = instance.inflated(cfg.safety_factor)
    eps = epsilon_closed_form(instance.k, max(1.0, c_used), nj_used, cfg.delta)
    rng = SplitMix64(cfg.seed).spawn(3)
    worst = 0.0
    rows = []
    for i in range(cfg.oracle_runs):
        x = random_series(rng, TAYLOR, cfg.trunc, decay=cfg.decay, min_index=1,
                          target_norm=cfg.f * eps, at_scale=cfg.s)
        result = solve(instance, x, sc)
        expected = reversion_oracle(x)
        err = max_coeff_diff(result.g.displacement, expected.displacement)
        worst = max(worst, err)
        rows.append({"run": i, "status": result.status.value,
                     "coeff_error": err, "residual": result.residual})
    doc = {"runs": rows, "worst_coeff_error": worst, "tolerance": 1e-10}
    _write(out / "oracle_compare.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if worst > 1e-10 or any(r["status"] != "Converged" for r in rows):
        return _fail(out, "solver disagrees with the reversion oracle",
                     {"worst_coeff_error": worst})
    print(json.dumps({"exit": 0, "worst_coeff_error": worst}, sort_keys=True))
    return 0


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    instance = _build_instance(cfg)
    lines = ["delta,f,status,iterations,residual,rate"]
    for delta in cfg.delta_grid:
        for f in cfg.f_grid:
            sc = SolveConfig(s=cfg.s, delta=delta, tol=cfg.tol,
                             max_iter=cfg.max_iter,
                             safety_factor=cfg.safety_factor)
            c_used, nj_used, _ = instance.inflated(cfg.safety_factor)
            eps = epsilon_closed_form(instance.k, max(1.0, c_used), nj_used, delta)
            rng = SplitMix64(cfg.seed).spawn(hash((round(delta, 12), round(f, 12))) & 0xFFFF)
            if f == 0.0:
                x = instance.zero_state()
            else:
                x = random_series(rng, TAYLOR, cfg.trunc, decay=cfg.decay,
                                  min_index=instance.state_min_degree,
                                  target_norm=f * eps, at_scale=cfg.s)
            result = solve(instance, x, sc)
            try:
                rate = _fmt(quadratic_rate(result.trace))
            except ValueError:
                rate = "nan"
            lines.append(",".join([
                _fmt(delta), _fmt(f), result.status.value,
                str(result.iterations), _fmt(result.residual), rate]))
    _write(out / "sweep.csv", "\n".join(lines) + "\n")
    print(json.dumps({"exit": 0, "rows": (len(lines) - 1)}, sort_keys=True))
    return 0


def cmd_epsilon_table(cfg: RunConfig, out: Path) -> int:
    lines = ["k,c,nj,delta,eps_closed,eps_product,rel_err"]
    worst = 0.0
    for k in cfg.k_grid:
        for c in cfg.c_grid:
            for nj in cfg.nj_grid:
                for delta in cfg.eps_delta_grid:
                    closed = epsilon_closed_form(k, c, nj, delta)
                    product = epsilon_product(k, c, nj, delta, 60)
                    rel = abs(product / closed - 1.0)
                    worst = max(worst, rel)
                    lines.append(",".join([
                        str(k), _fmt(c), _fmt(nj), _fmt(delta),
                        _fmt(closed), _fmt(product), _fmt(rel)]))
    _write(out / "epsilon_table.csv", "\n".join(lines) + "\n")
    if worst > 1e-10:
        return _fail(out, "product form disagrees with closed form",
                     {"worst_rel_err": worst})
    print(json.dumps({"exit": 0, "worst_rel_err": worst}, sort_keys=True))
    return 0


_DISPATCH = {
    "run": cmd_run,
    "verify-group": cmd_verify_group,
    "verify-ac": cmd_verify_ac,
    "measure-j": cmd_measure_j,
    "oracle-compare": cmd_oracle_compare,
    "sweep": cmd_sweep,
    "epsilon-table": cmd_epsilon_table,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kamact",
        description="Certified quadratic iteration for scaled group actions")
    parser.add_argument("--command", choices=COMMANDS, default=None)
    parser.add_argument("--config", type=Path, default=None)
    parser.add_argument("--out", type=Path, default=Path("."))
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config.read_text()) if args.config else RunConfig()
        if args.command is not None:
            cfg = replace(cfg, command=args.command)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if cfg.command not in _DISPATCH:
            raise ValueError(f"unknown command {cfg.command!r}")
    except (ValueError, OSError) as exc:
        print(json.dumps({"exit": 2, "reason": str(exc)}, sort_keys=True))
        return 2

    try:
        return _DISPATCH[cfg.command](cfg, args.out)
    except (ValueError, RuntimeError) as exc:
        print(json.dumps({"exit": 1, "reason": str(exc)}, sort_keys=True))
        return 1


if __name__ == "__main__":
    sys.exit(main())
