"""Configuration-driven command line front end.

Subcommands run named experiment suites from a plain key=value config file
and write JSON reports plus CSV data files.  Exit code 0 means every checked
verdict passed, 1 means some criterion failed, 2 means the configuration was
rejected.  Outputs are byte-identical across reruns of the same config and
seed; wall-clock timing goes to a sidecar log only.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

from . import analytics, decoupling, experiments, renewal, simulator, stats
from .configuration import (
    ConstantTail,
    EtaProfile,
    ExponentialTail,
    PolynomialTail,
    from_profile,
    standard_config,
)
from .randomness import RandomField

_KEYS = {
    "seed": int,
    "mode": str,
    "a": int,
    "eps": float,
    "eps_list": "floats",
    "eps_small": float,
    "t_max": float,
    "t_grid": "floats",
    "replicas": int,
    "replicas_grid": "ints",
    "tol": float,
    "profile": str,
    "theta": float,
    "alpha1": float,
    "alpha2": float,
    "eps0": float,
    "p": float,
    "L": int,
    "M": int,
    "censor": float,
    "horizon": float,
    "records": int,
    "b_grid": "floats",
    "n": int,
    "m": int,
    "ell": int,
    "alpha": float,
    "m_grid": "ints",
    "n_grid": "ints",
    "n_jobs": int,
    "amplitude": float,
    "decay": float,
    "level": float,
}

_DEFAULTS = {
    "mode": "diagnostic",
    "a": 1,
    "eps": 0.1,
    "eps_list": [0.0, 0.05, 0.1, 0.25],
    "eps_small": 0.01,
    "t_max": 50.0,
    "t_grid": [100.0, 200.0, 400.0],
    "replicas": 200,
    "tol": 1e-9,
    "profile": "constant",
    "theta": 0.4,
    "alpha1": 0.9,
    "alpha2": 1.0,
    "eps0": 0.1,
    "p": 0.6,
    "L": 8,
    "M": 16,
    "censor": 15.0,
    "horizon": 800.0,
    "records": 100,
    "b_grid": [1.5, 1.7, 1.9],
    "n": 12,
    "m": 4,
    "ell": 4,
    "alpha": 0.5,
    "m_grid": [2, 4, 8],
    "n_grid": [1, 2, 5, 10, 20, 50, 100, 200],
    "n_jobs": 1,
    "amplitude": 1.0,
    "decay": 1.0,
    "level": 4.0,
}


class ConfigError(Exception):
    pass


def parse_config(path: str) -> dict:
    cfg = dict(_DEFAULTS)
    errors = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                errors.append(f"line {lineno}: expected key=value, got {line!r}")
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _KEYS:
                errors.append(f"line {lineno}: unknown key {key!r}")
                continue
            kind = _KEYS[key]
            try:
                if kind == "floats":
                    cfg[key] = [float(v) for v in value.split(",") if v.strip()]
                elif kind == "ints":
                    cfg[key] = [int(v) for v in value.split(",") if v.strip()]
                else:
                    cfg[key] = kind(value)
            except ValueError:
                errors.append(f"line {lineno}: bad value for {key}: {value!r}")
    if "seed" not in cfg:
        errors.append("seed is required (wall-clock seeding is not supported)")
    if errors:
        raise ConfigError("; ".join(errors))
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def named_profile(name: str, a: int) -> EtaProfile:
    if name == "constant":
        return EtaProfile((a,), ConstantTail(a))
    if name == "quadratic":
        return EtaProfile((0,), PolynomialTail(1.0))
    if name == "exponential":
        return EtaProfile((1,), ExponentialTail(0.5))
    if name == "finite":
        return EtaProfile((a, a, a))
    raise ConfigError(f"unknown profile {name!r}")


def prob_cell(p: float) -> str:
    """Probability cell: plain value, or its log10 past six orders."""
    if p <= 0.0:
        return "0"
    l10 = math.log10(p)
    if abs(l10) > 6.0:
        return f"log10:{l10!r}"
    return repr(p)


def _write(out_dir: str, name: str, text: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
        fh.write(text)


def _report_out(out_dir: str, name: str, report) -> None:
    _write(out_dir, name, report.to_json() + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(cfg, out_dir):
    candidate = {k: cfg[k] for k in ("a", "theta", "alpha1", "alpha2", "eps0",
                                     "p", "L", "M", "mode")}
    alpha_ref = cfg.get("alpha_hat", 0.0) or 2.0
    params, errors = renewal.validate_params(candidate, alpha_ref)
    a = cfg["a"]
    lines = {
        "mode": cfg["mode"],
        "window_M": renewal.derived_window(a) if cfg["mode"] == "strict" else cfg["M"],
        "M_quarter": (renewal.derived_window(a) / 4 - 1) if cfg["mode"] == "strict"
                     else cfg["M"] / 4 - 1,
        "required_L_strict": renewal.required_block(a),
        "violations": errors,
        "valid": params is not None,
        "config_hash": config_hash(cfg),
    }
    if cfg["mode"] == "strict":
        lines["note"] = ("strict block length makes desk-scale runs infeasible; "
                         "use diagnostic mode for simulation studies")
    _write(out_dir, "validate.json", json.dumps(lines, sort_keys=True, indent=1) + "\n")
    print(f"window M = {lines['window_M']}, M/4-1 = {lines['M_quarter']}, "
          f"strict block length >= {lines['required_L_strict']}")
    for v in errors:
        print(f"violation: {v}")
    return 0 if params is not None else 1


def cmd_simulate(cfg, out_dir):
    prof = named_profile(cfg["profile"], cfg["a"])
    w = from_profile(prof, cfg["a"])
    tol = cfg["tol"] if not w.is_finite else None
    tr = simulator.run(w, cfg["eps"], RandomField(cfg["seed"]),
                       t_max=cfg["t_max"], tol=tol)
    import io

    buf = io.StringIO()
    simulator.dump_front_csv(tr, buf)
    _write(out_dir, "front.csv", buf.getvalue())
    buf = io.StringIO()
    simulator.dump_trace_csv(tr, buf)
    _write(out_dir, "trace.csv", buf.getvalue())
    payload = {"front": tr.front, "events": tr.events,
               "config_hash": config_hash(cfg),
               "truncation": None if tr.truncation is None else {
                   "cutoff": tr.truncation.cutoff, "bound": tr.truncation.bound}}
    _write(out_dir, "simulate.json", json.dumps(payload, sort_keys=True, indent=1) + "\n")
    print(f"front at t={cfg['t_max']}: {tr.front} ({tr.events} events)")
    return 0


def cmd_speed(cfg, out_dir):
    grid = cfg["t_grid"]
    reps = cfg.get("replicas_grid") or [cfg["replicas"]] * len(grid)
    rep = experiments.speed_suite(grid, reps, cfg["seed"], eps=0.0, a=cfg["a"],
                                  tol=cfg["tol"], n_jobs=cfg["n_jobs"])
    cont = experiments.speed_continuity(cfg["eps_small"], grid[min(1, len(grid) - 1)],
                                        max(cfg["replicas"] // 2, 20), cfg["seed"] ^ 0xC,
                                        a=cfg["a"], tol=cfg["tol"], n_jobs=cfg["n_jobs"])
    gap = cont.estimates["speed_gap"]
    width = max(0.02, gap["hi"] - gap["lo"])
    rep.verdicts["small-bias speed gap within tolerance"] = abs(gap["value"]) < width
    _report_out(out_dir, "speed.json", rep)
    _report_out(out_dir, "speed_continuity.json", cont)
    rows = ["t,v,lo,hi"]
    for t in grid:
        e = rep.estimates[f"v_t{int(t)}"]
        rows.append(f"{t!r},{e['value']!r},{e['lo']!r},{e['hi']!r}")
    _write(out_dir, "speed.csv", "\n".join(rows) + "\n")
    print("; ".join(f"{k}={'PASS' if v else 'FAIL'}" for k, v in rep.verdicts.items()))
    return 0 if rep.passed() and cont.passed() else 1


def cmd_ldp(cfg, out_dir):
    v, ci, _ = experiments.estimate_speed(0.0, 150.0, max(60, cfg["replicas"] // 4),
                                          cfg["seed"] ^ 0xF00, a=cfg["a"],
                                          tol=cfg["tol"], n_jobs=cfg["n_jobs"])
    rep = experiments.rate_curves(cfg["b_grid"], (cfg["n"], 2 * cfg["n"]),
                                  cfg["replicas"], cfg["seed"], v, a=cfg["a"],
                                  n_jobs=cfg["n_jobs"])
    sup = experiments.superadditivity_gap(4, 4, 1.0, 1.0, cfg["replicas"],
                                          cfg["seed"] ^ 0xAB, n_jobs=cfg["n_jobs"])
    rows = ["b,I,lo,hi"]
    for b, val, lo, hi in rep.samples["curve"]:
        rows.append(f"{b!r},{val!r},{lo!r},{hi!r}")
    _write(out_dir, "rate_curve.csv", "\n".join(rows) + "\n")
    _report_out(out_dir, "ldp.json", rep)
    _report_out(out_dir, "superadd.json", sup)
    ok = rep.passed() and sup.passed()
    print("ldp:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_slowdown(cfg, out_dir):
    grid = cfg["t_grid"] if cfg["t_grid"] != _DEFAULTS["t_grid"] else [
        100.0, 316.23, 1000.0, 3162.3, 10000.0]
    out = {}
    code = 0
    for name, lo, hi in (("constant", 0.40, 0.60), ("quadratic", 0.85, 1.15)):
        prof = named_profile(name, cfg["a"])
        rep = experiments.slowdown_scaling(prof, grid, cfg["seed"])
        slope = rep.fits["exponent"]["slope"]
        ok = lo <= slope <= hi
        rep.verdicts[f"slope in [{lo}, {hi}]"] = ok
        out[name] = rep
        rows = ["t,log10_p,log_neg_log_p"]
        for t in grid:
            lp = rep.estimates[f"log_p_t{int(t)}"]["value"]
            rows.append(f"{t!r},{lp / math.log(10)!r},{math.log(-lp)!r}")
        _write(out_dir, f"slowdown_{name}.csv", "\n".join(rows) + "\n")
        _report_out(out_dir, f"slowdown_{name}.json", rep)
        print(f"{name}: slope={slope:.3f} {'PASS' if ok else 'FAIL'}")
        code = code or (0 if ok else 1)
    return code


def cmd_renewal(cfg, out_dir):
    candidate = {k: cfg[k] for k in ("a", "theta", "alpha1", "alpha2", "eps0",
                                     "p", "L", "M", "mode")}
    ref = renewal.alpha_hat(cfg["eps"], cfg["a"], cfg["M"],
                            RandomField(cfg["seed"] ^ 0xA17A), 250.0)
    params, errors = renewal.validate_params(candidate, ref)
    if params is None:
        print("parameter violations:", "; ".join(errors))
        return 2
    w = standard_config("a_delta", 0, cfg["a"])
    records = []
    s = 0
    while len([r for r in records if r.uncensored]) < cfg["records"]:
        tr = simulator.run(w, cfg["eps"], RandomField(cfg["seed"] ^ s),
                           t_max=cfg["horizon"])
        records.extend(renewal.find_regenerations(tr, params, cfg["censor"], 4))
        s += 1
        if s > 40 * cfg["records"]:
            break
    import io

    buf = io.StringIO()
    renewal.records_to_csv(records, buf)
    _write(out_dir, "renewal_records.csv", buf.getvalue())
    _write(out_dir, "renewal_summary.json", renewal.summary_json(records) + "\n")
    try:
        v_ren, ci, frac = renewal.renewal_speed(records, min_records=min(
            cfg["records"], 50))
    except ValueError as exc:
        print("renewal:", exc)
        return 1
    v_lln, lln_ci, _ = experiments.estimate_speed(
        cfg["eps"], 150.0, 60, cfg["seed"] ^ 0xBEE, a=cfg["a"],
        tol=cfg["tol"], n_jobs=cfg["n_jobs"])
    agree = stats.intervals_overlap(ci, lln_ci)
    payload = {"v_renewal": v_ren, "ci": list(ci), "censored_fraction": frac,
               "v_lln": v_lln, "lln_ci": list(lln_ci), "consistent": agree,
               "alpha_hat": ref, "config_hash": config_hash(cfg)}
    _write(out_dir, "renewal_speed.json", json.dumps(payload, sort_keys=True,
                                                     indent=1) + "\n")
    print(f"v_ren={v_ren:.3f} {ci} vs v_lln={v_lln:.3f} {lln_ci} "
          f"{'PASS' if agree else 'FAIL'}")
    return 0 if agree else 1


def cmd_decouple(cfg, out_dir):
    spec = decoupling.DecoupleSpec(cfg["m"], cfg["ell"], 1, cfg["alpha"])
    n = max(cfg["replicas"], 50)
    ok = 0
    hybrid, plain = [], []
    for r in range(n):
        repi = decoupling.identity_check(spec, RandomField(cfg["seed"] ^ r), cfg["a"])
        ok += repi.hybrid_is_min and repi.plain_is_min and repi.inclusion_ok
        hybrid.append(repi.values.hybrid)
        plain.append(repi.values.plain)
    base = [decoupling.plain_T(decoupling.DecoupleSpec(cfg["m"], cfg["ell"], 0,
                                                       cfg["alpha"]),
                               RandomField((cfg["seed"] ^ 0xD) ^ r), cfg["a"])
            for r in range(n)]
    _, pval = stats.ks_two_sample(hybrid, base)
    payload = {"identities_ok": ok, "samples": n, "ks_p": pval,
               "config_hash": config_hash(cfg)}
    _write(out_dir, "decouple.json", json.dumps(payload, sort_keys=True, indent=1) + "\n")
    good = ok == n and pval > 0.01
    print(f"identities {ok}/{n}, KS p={pval:.3f} {'PASS' if good else 'FAIL'}")
    return 0 if good else 1


def cmd_appendix_a(cfg, out_dir):
    grid_ok = True
    for nu in (0.5, 1.0, 2.0):
        for x in (0.0, 1.0, 10.0, 100.0):
            exact, bound = analytics.sqrt_tail_integral(nu, x)
            grid_ok = grid_ok and exact <= bound + 1e-12
    rep = experiments.sqrt_tail_ld(cfg["amplitude"], cfg["decay"], cfg["level"],
                                   cfg["n_grid"], cfg["replicas"], cfg["seed"])
    rep.verdicts["integral bound dominates exact"] = grid_ok
    _report_out(out_dir, "appendix_a.json", rep)
    rows = ["sqrt_n,p_or_log10"]
    for n in cfg["n_grid"]:
        e = rep.estimates.get(f"p_n{n}")
        if e:
            rows.append(f"{math.sqrt(n)!r},{prob_cell(e['value'])}")
    _write(out_dir, "appendix_a.csv", "\n".join(rows) + "\n")
    print("appendixA:", "PASS" if rep.passed() else "FAIL")
    return 0 if rep.passed() else 1


_COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "speed": cmd_speed,
    "ldp": cmd_ldp,
    "slowdown": cmd_slowdown,
    "renewal": cmd_renewal,
    "decouple": cmd_decouple,
    "appendixA": cmd_appendix_a,
}


def cmd_all(cfg, out_dir):
    code = 0
    for name in ("validate", "slowdown", "decouple", "appendixA", "speed",
                 "ldp", "renewal"):
        sub = os.path.join(out_dir, name)
        rc = _COMMANDS[name](cfg, sub)
        code = max(code, rc)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="frontprop",
        description="Front-propagation simulator and experiment runner")
    parser.add_argument("command", choices=list(_COMMANDS) + ["all"])
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--replicas", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.replicas is not None:
        cfg["replicas"] = args.replicas
    if args.seed is not None:
        cfg["seed"] = args.seed

    started = time.time()
    if args.command == "all":
        code = cmd_all(cfg, args.out)
    else:
        code = _COMMANDS[args.command](cfg, args.out)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "run.log"), "a", encoding="utf-8") as fh:
        fh.write(f"{args.command} seed={cfg.get('seed')} elapsed="
                 f"{time.time() - started:.1f}s exit={code}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
