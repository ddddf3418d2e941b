"""Command-line front end.

Each run reads a JSON configuration, writes its artifacts to an output
directory and finishes with ``report.json``, which embeds a hash of the
validated configuration and a summary of the invariant checks.  Exit codes:
0 on success, 1 on solver failure or a failed invariant, 2 on a bad
configuration.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SchemaError, SolitonError

OUT_ENV = "MINKSOLITON_OUT"
COMMANDS = ("radial", "dirichlet", "entire", "oracle", "verify")

DEFAULTS = {
    "radial": {"n": 3, "C": 2.0, "sigma": 1.0, "H": {"kind": "constant"}, "r_max": 1000.0,
               "tol": 1e-10},
    "dirichlet": {"n": 3, "C": 2.0, "domain": {"kind": "ball", "radius": 1.0},
                  "boundary": 0.0, "h": 1 / 16, "order": 2, "newton_tol": 1e-10},
    "entire": {"n": 3, "C": 2.0, "f": {"kind": "constant", "value": 0.0},
               "radii": [4.0, 8.0, 16.0], "K_radius": 2.0, "h": 0.5, "order": 4},
    "oracle": {"cases": 20, "span": 10.0, "rtol": 1e-12, "atol": 1e-12},
    "verify": {"n": 3, "C": 2.0},
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict
    seed: int = 0
    out: str | None = None

    def canonical(self) -> str:
        body = {"command": self.command, "seed": self.seed, **self.params}
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def _validate(command, p):
    bad = []
    if "n" in p:
        if not isinstance(p["n"], int) or isinstance(p["n"], bool):
            bad.append(("n", "must be an integer"))
        elif p["n"] < 3:
            bad.append(("n", "n must be ≥ 3"))
    if "C" in p:
        if not _number(p["C"]):
            bad.append(("C", "must be a number"))
        elif not p["C"] > 1:
            bad.append(("C", "C must exceed 1"))
    if "h" in p and not (_number(p["h"]) and p["h"] > 0):
        bad.append(("h", "h must be positive"))
    if "sigma" in p and not (_number(p["sigma"]) and 0 <= p["sigma"] <= 1):
        bad.append(("sigma", "sigma must lie in [0, 1]"))
    if "order" in p and p["order"] not in (2, 4):
        bad.append(("order", "order must be 2 or 4"))
    for key in ("r_max", "tol", "newton_tol", "K_radius", "span", "rtol", "atol"):
        if key in p and not (_number(p[key]) and p[key] > 0):
            bad.append((key, f"{key} must be positive"))
    if command == "radial":
        H = p.get("H")
        if not isinstance(H, dict) or H.get("kind") not in ("constant", "quadratic"):
            bad.append(("H.kind", "must be 'constant' or 'quadratic'"))
        elif H["kind"] == "quadratic":
            if not (_number(H.get("k")) and H["k"] > 0):
                bad.append(("H.k", "quadratic model needs k > 0"))
            if p.get("sigma", 1.0) != 1.0:
                bad.append(("H.kind", "the quadratic model is solved at sigma = 1 only"))
    if command == "dirichlet":
        d = p.get("domain")
        if not isinstance(d, dict) or d.get("kind") != "ball":
            bad.append(("domain.kind", "only 'ball' domains are configurable"))
        else:
            if not (_number(d.get("radius", 1.0)) and d.get("radius", 1.0) > 0):
                bad.append(("domain.radius", "radius must be positive"))
            c = d.get("center")
            if c is not None and (not isinstance(c, list) or len(c) != p.get("n", 3)
                                  or not all(_number(x) for x in c)):
                bad.append(("domain.center", "center must be a list of n numbers"))
        if not _number(p.get("boundary")):
            bad.append(("boundary", "constant boundary value required"))
        steps = p.get("sigma_steps")
        if steps is not None:
            if (not isinstance(steps, list) or not steps or steps[0] != 0 or steps[-1] != 1
                    or any(b <= a for a, b in zip(steps, steps[1:]))):
                bad.append(("sigma_steps", "must increase strictly from 0 to 1"))
    if command == "entire":
        f = p.get("f")
        kind = f.get("kind") if isinstance(f, dict) else None
        if kind == "constant":
            if not _number(f.get("value", 0.0)):
                bad.append(("f.value", "must be a number"))
        elif kind == "cosine-mode":
            if not _number(f.get("amplitude")):
                bad.append(("f.amplitude", "must be a number"))
        elif kind == "table":
            if not isinstance(f.get("path"), str):
                bad.append(("f.path", "path to a theta,phi,value CSV required"))
            elif p.get("n", 3) != 3:
                bad.append(("f", "tabulated data requires n = 3"))
        else:
            bad.append(("f.kind", "must be 'constant', 'cosine-mode' or 'table'"))
        radii = p.get("radii")
        if (not isinstance(radii, list) or not radii or not all(_number(r) and r > 0 for r in radii)
                or any(b <= a for a, b in zip(radii, radii[1:]))):
            bad.append(("radii", "must be a strictly increasing list of positive radii"))
        elif _number(p.get("K_radius")) and not p["K_radius"] < radii[0]:
            bad.append(("K_radius", "K must lie inside the smallest ball"))
    if command == "oracle":
        if not isinstance(p.get("cases"), int) or p["cases"] < 1:
            bad.append(("cases", "must be a positive integer"))
    return bad


def parse_config(text: str, seed: int | None = None) -> RunConfig:
    """Validate a JSON configuration; every violation is collected before raising."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError([("$", f"malformed JSON: {exc.msg}")]) from exc
    if not isinstance(raw, dict):
        raise SchemaError([("$", "configuration must be a JSON object")])
    command = raw.get("command")
    if command not in COMMANDS:
        raise SchemaError([("command", f"must be one of {', '.join(COMMANDS)}")])
    params = {**DEFAULTS[command], **{k: v for k, v in raw.items()
                                      if k not in ("command", "seed", "out")}}
    bad = _validate(command, params)
    cfg_seed = raw.get("seed", 0) if seed is None else seed
    if not isinstance(cfg_seed, int) or isinstance(cfg_seed, bool):
        bad.append(("seed", "must be an integer"))
    if bad:
        raise SchemaError(bad)
    return RunConfig(command, params, cfg_seed, raw.get("out"))


# -- commands -----------------------------------------------------------------

def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_plain)
        fh.write("\n")


def _radial(cfg, out):
    from .radial import (HModel, RadialParams, asymptotic_fit, initial_slope, ode_residual_check,
                         radial_profile, sigma_profile)

    p = cfg.params
    params = RadialParams(p["n"], float(p["C"]), float(p["sigma"]))
    H = p["H"]
    if H["kind"] == "quadratic":
        model = HModel.quadratic(params.C, float(H["k"]))
        sol = radial_profile(params, model, r_max=float(p["r_max"]), tol=float(p["tol"]))
    else:
        model = HModel.constant(params.C)
        sol = sigma_profile(params, r_max=float(p["r_max"]), tol=float(p["tol"]))
    sol.to_csv(out / "profile.csv")
    checks = {"y_monotone": bool(np.all(np.diff(sol.y) >= -10 * float(p["tol"]))),
              "y_below_limit": bool(np.all(sol.y < params.slope_limit + 1e-12)),
              "ode_residual": ode_residual_check(sol) < 1e-6}
    summary = {"ode_residual": ode_residual_check(sol)}
    if params.sigma == 1.0:
        slope0 = initial_slope(sol)
        checks["initial_slope"] = abs(slope0 - (model.at_zero - 1.0)) < 1e-3
        summary["initial_slope"] = slope0
    if sol.r_max >= 40:
        fit = asymptotic_fit(sol)
        (out / "fit.json").write_text(fit.to_json() + "\n")
        if params.sigma == 1.0:
            checks["log_coeff"] = abs(fit.log_coeff / params.log_coefficient - 1.0) < 1e-2
        summary["fit"] = json.loads(fit.to_json())
    return checks, summary


def _dirichlet(cfg, out):
    from .elliptic import Ball, ContinuationSchedule, boundary_barrier_check, continuity_solve

    p = cfg.params
    n, C = p["n"], float(p["C"])
    d = p["domain"]
    dom = Ball(np.asarray(d.get("center", [0.0] * n), dtype=float), float(d.get("radius", 1.0)))
    steps = p.get("sigma_steps")
    sched = ContinuationSchedule(newton_tol=float(p["newton_tol"]),
                                 **({"sigma_steps": tuple(steps)} if steps else {}))
    field = continuity_solve(dom, n, C, float(p["boundary"]), sched, h=float(p["h"]),
                             order=int(p["order"]))
    field.save(out / "field.txt")
    reports = [r.to_dict() for r in field.history]
    _write_json(out / "monitors.json", {"steps": reports, "final": reports[-1]})
    barrier = boundary_barrier_check(field, raise_on_violation=False)
    checks = {"max_principle": all(r.max_principle_ok for r in field.history),
              "gradient_bound": all(r.gradient_bound_ok for r in field.history),
              "boundary_barrier": barrier.ok,
              "admissible": all(r.min_H2 > 0 for r in field.history)}
    summary = {"unknowns": field.disc.size, "final": reports[-1],
               "barrier": json.loads(barrier.to_json())}
    return checks, summary


def _boundary_f(spec, n, C):
    from .entire import BoundaryValueF

    if spec["kind"] == "constant":
        return BoundaryValueF.constant(float(spec.get("value", 0.0)), n, C)
    if spec["kind"] == "cosine-mode":
        return BoundaryValueF.cosine_mode(float(spec["amplitude"]), n, C, spec.get("axis"))
    return BoundaryValueF.from_csv(spec["path"], C)


def _entire(cfg, out):
    from .entire import barrier_functions, exhaustion_solve

    p = cfg.params
    n, C = p["n"], float(p["C"])
    f = _boundary_f(p["f"], n, C)
    pair = barrier_functions(f)
    res = exhaustion_solve(f, radii=tuple(p["radii"]), K_radius=float(p["K_radius"]),
                           h=float(p["h"]), order=int(p["order"]), pair=pair)
    for R, fl in zip(res.radii, res.fields):
        fl.save(out / f"field_R{R:g}.txt")
    rays = pair.asymptotic_defect(np.eye(n)[-1], [10.0, 100.0, 1000.0])
    report = res.report()
    report["ray_defect"] = rays.tolist()
    _write_json(out / "exhaustion.json", report)
    gaps = res.cauchy_gaps
    checks = {"sandwich": all(s["violations"] == 0 for s in res.sandwich),
              "cauchy_gaps_decreasing": all(b < a for a, b in zip(gaps, gaps[1:])),
              "ray_defect_decreasing": bool(np.all(np.diff(rays) < 0))}
    return checks, {"cauchy_gaps": gaps, "ray_defect": rays.tolist(), "M": res.barrier_M}


def _oracle(cfg, out):
    from .ode_oracles import RiccatiParams, riccati_closed_form, variable_riccati_limit_probe

    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    rows, worst = [], 0.0
    for _ in range(p["cases"]):
        A0, B0 = -rng.uniform(0.1, 10.0), rng.uniform(0.1, 10.0)
        z0, r0 = rng.uniform(0.01, 5.0), rng.uniform(0.0, 5.0)
        rp = RiccatiParams(A0, B0, r0, z0)
        r = np.linspace(r0, r0 + p["span"], 201)
        probe = variable_riccati_limit_probe(lambda s: A0, lambda s: B0, r0, z0, r0 + p["span"],
                                             rtol=p["rtol"], atol=p["atol"], dense=True)
        diff = float(np.max(np.abs(probe.sol(r)[0] - riccati_closed_form(rp, r))))
        worst = max(worst, diff)
        rows.append((A0, B0, r0, z0, rp.limit, diff))
    with open(out / "riccati.csv", "w") as fh:
        fh.write("A0,B0,r0,z0,limit,max_abs_diff\n")
        for row in rows:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
    return {"closed_form_agreement": worst < 1e-8}, {"max_abs_diff": worst, "cases": len(rows)}


def _verify(cfg, out):
    """A quick pass over the cheap invariants of every module."""
    from .elliptic import Ball, continuity_solve
    from .entire import BoundaryValueF, barrier_functions
    from .geometry import SpacelikeJet, maclaurin_gap, shape_operator
    from .ode_oracles import riccati_limit
    from .radial import (RadialParams, asymptotic_fit, initial_slope, limit_constants,
                         radial_profile)

    n, C = cfg.params["n"], float(cfg.params["C"])
    rng = np.random.default_rng(cfg.seed)
    checks, summary = {}, {}
    params = RadialParams(n, C, 1.0)
    sol = radial_profile(params, r_max=200.0)
    checks["radial_initial_slope"] = abs(initial_slope(sol) - (C - 1.0)) < 1e-3
    fit = asymptotic_fit(sol)
    checks["radial_log_coeff"] = abs(fit.log_coeff / params.log_coefficient - 1) < 1e-2
    A0, B0 = limit_constants(n, C)
    checks["riccati_limit_identity"] = abs(riccati_limit(A0, B0) - params.log_coefficient) < 1e-14
    gaps = []
    for _ in range(50):
        g = rng.uniform(-0.5, 0.5, n) / np.sqrt(n)
        M = rng.normal(size=(n, n))
        jet = SpacelikeJet(g, M @ M.T + 0.1 * np.eye(n))
        gaps.append(maclaurin_gap(shape_operator(jet)))
    checks["maclaurin"] = min(gaps) >= -1e-12
    field = continuity_solve(Ball(np.zeros(n), 1.0), n, C, 0.0, h=0.25)
    checks["dirichlet_monitors"] = all(r.max_principle_ok and r.gradient_bound_ok
                                       for r in field.history)
    pair = barrier_functions(BoundaryValueF.constant(0.0, n, C))
    X = rng.normal(size=(64, n)) * 5
    checks["barrier_collapse"] = bool(np.all(pair.upper(X) == pair.lower(X)))
    summary["log_coeff"] = fit.log_coeff
    return checks, summary


RUNNERS = {"radial": _radial, "dirichlet": _dirichlet, "entire": _entire, "oracle": _oracle,
           "verify": _verify}


def output_dir(cli_out: str | None, cfg: RunConfig | None) -> Path:
    """``--out`` first, then the environment variable, then the config, then ``./out``."""
    for cand in (cli_out, os.environ.get(OUT_ENV), cfg.out if cfg else None):
        if cand:
            return Path(cand)
    return Path("out")


def run(cfg: RunConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    base = {"command": cfg.command, "config": json.loads(cfg.canonical()),
            "config_hash": cfg.config_hash, "seed": cfg.seed}
    try:
        checks, summary = RUNNERS[cfg.command](cfg, out)
    except SchemaError as exc:
        _write_json(out / "error.json", {**base, "error": "SchemaError",
                                         "violations": exc.violations})
        return 2
    except SolitonError as exc:
        diag = {**base, "error": type(exc).__name__, "message": str(exc)}
        if getattr(exc, "sigma", None) is not None:
            diag["sigma"] = exc.sigma
        _write_json(out / "error.json", diag)
        return 1
    checks = {k: bool(v) for k, v in checks.items()}
    ok = all(checks.values())
    _write_json(out / "report.json", {**base, "invariants": {"checks": checks, "all_passed": ok},
                                      "summary": summary})
    return 0 if ok or cfg.command != "verify" else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="minksoliton", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON configuration file (defaults apply when omitted)")
    ap.add_argument("--out", help=f"output directory (overrides ${OUT_ENV})")
    ap.add_argument("--seed", type=int, help="seed for randomised sampling")
    args = ap.parse_args(argv)
    try:
        text = Path(args.config).read_text() if args.config else "{}"
        raw = json.loads(text) if text.strip() else {}
        if isinstance(raw, dict):
            if raw.get("command", args.command) != args.command:
                raise SchemaError([("command", f"config is for '{raw['command']}'")])
            raw["command"] = args.command
        cfg = parse_config(json.dumps(raw), seed=args.seed)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SchemaError as exc:
        for path, msg in exc.violations:
            print(f"error: {path}: {msg}", file=sys.stderr)
        return 2
    out = output_dir(args.out, cfg)
    code = run(cfg, out)
    print(f"{cfg.command}: exit {code}, outputs in {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
