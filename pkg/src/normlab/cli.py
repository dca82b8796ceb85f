"""Command-line entry point: ``normlab <subcommand> ...``.

Exit codes: 0 when every verdict holds, 1 when any inequality is violated,
2 for usage, configuration or input errors.  Reports are JSON with sorted
keys (or CSV), so identical configurations give identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

import numpy as np

from . import bessel_example as bx
from . import inequality_catalog as catalog, operator_lab, special_functions as special
from . import sturm_liouville as sl
from .errors import HypothesisViolated, NormLabError
from .function_space import Grid, read_csv
from .report import InequalityReport

EXIT_OK, EXIT_VIOLATED, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    quad_tol: float = 1e-8
    num_tol: float = 1e-6
    angle_tol: float = 5e-3
    x_min: float = 1e-7
    x_max: float = 60.0
    X: float = 1e4
    seed: int = 0
    budget: int = 500
    count: int = 1000
    threads: Optional[int] = None
    constant_override: Optional[float] = None
    output: Optional[str] = None
    format: str = "json"

    def validate(self) -> "RunConfig":
        for name in ("quad_tol", "num_tol", "angle_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.x_min < self.x_max:
            raise ConfigError("need 0 < x_min < x_max")
        if not self.X > 0:
            raise ConfigError("X must be positive")
        if self.format not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        if self.count < 1 or self.budget < 1:
            raise ConfigError("count and budget must be positive")
        return self

    @classmethod
    def load(cls, path: Optional[str], overrides) -> "RunConfig":
        data = {}
        if path:
            try:
                with open(path, encoding="utf-8") as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config file must hold a JSON object")
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs = {}
        for name, value in data.items():
            kwargs[name] = _coerce(name, value, known[name].type)
        return cls(**kwargs).validate()


def _coerce(name, value, typ):
    if value is None:
        return None
    try:
        if "int" in str(typ):
            return int(value)
        if "float" in str(typ):
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {value!r}") from exc


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# ---------------------------------------------------------------------------
# serialization


def _jsonable(obj):
    if isinstance(obj, InequalityReport):
        return obj.to_dict()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _jsonable(float(obj.real)), "im": _jsonable(float(obj.imag))}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], obj


def render(report: dict, fmt: str) -> str:
    data = _jsonable(report)
    if fmt == "json":
        return json.dumps(data, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in _flatten(data):
        w.writerow([k, "" if v is None else v])
    return buf.getvalue()


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _exit_for(verdicts) -> int:
    return EXIT_VIOLATED if any(v == "violated" for v in verdicts) else EXIT_OK


# ---------------------------------------------------------------------------
# subcommands


def cmd_constants(args, cfg: RunConfig) -> int:
    rows = catalog.constants_table()
    if cfg.format == "json" and args.format_given:
        data = [dict(zip(("domain", "p", "n", "k", "constant"), r)) for r in rows]
        _emit(render({"constants": data}, "json"), cfg)
        return EXIT_OK
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["domain", "p", "n", "k", "constant"])
    for domain, p, n, k, c in rows:
        w.writerow([domain, p, n, k, f"{c:g}"])
    _emit(buf.getvalue(), cfg)
    return EXIT_OK


def cmd_verify(args, cfg: RunConfig) -> int:
    case = catalog.InequalityCase.parse(args.case)
    f = read_csv(args.csv)
    rep = catalog.verify(f, case, constant=cfg.constant_override)
    _emit(render({"case": case.label(), "report": rep}, cfg.format), cfg)
    return _exit_for([rep.verdict.value])


def cmd_estimate(args, cfg: RunConfig) -> int:
    case = catalog.InequalityCase.parse(args.case)
    res = catalog.estimate_constant_detail(case, budget=cfg.budget, seed=cfg.seed, threads=cfg.threads)
    known = catalog.known_constant(case) if cfg.constant_override is None else cfg.constant_override
    verdict = "holds"
    if known is not None and res.value > known * (1 + 1e-3):
        verdict = "violated"
    out = {"case": case.label(), "estimate": res.value, "family": res.family, "evaluations": res.evaluations,
           "known_constant": known, "verdict": verdict}
    _emit(render(out, cfg.format), cfg)
    return _exit_for([verdict])


def _parse_z(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex number {text!r}") from exc


def cmd_mfun(args, cfg: RunConfig) -> int:
    coef = sl.SLCoefficients.parse(args.coeffs)
    z = _parse_z(args.z)
    res = sl.m_function_batch(coef, [z], cfg.X, bc=args.bc)
    out = {"coefficients": coef.describe(), "z": z, "bc": args.bc, "m": complex(res.m[0]),
           "disk_radius": float(res.radius[0]), "X": float(res.X[0])}
    _emit(render(out, cfg.format), cfg)
    return EXIT_OK


def cmd_theta0(args, cfg: RunConfig) -> int:
    coef = sl.SLCoefficients.parse(args.coeffs)
    res = sl.theta0_search(coef, angle_tol=cfg.angle_tol, num_tol=cfg.num_tol, X=cfg.X, threads=cfg.threads)
    out = res.to_dict()
    out["coefficients"] = coef.describe()
    parts = args.coeffs.split(":")
    if parts[0] == "power":
        out["theta0_formula"] = sl.power_weight_theta0(float(parts[1]), float(parts[2]))
    elif parts[0] == "classical":
        out["theta0_formula"] = sl.power_weight_theta0(0.0, 0.0)
    _emit(render(out, cfg.format), cfg)
    return EXIT_OK


def bessel_report(params: bx.BesselParams, cfg: RunConfig, theta0: bool = True) -> dict:
    """The bundled Bessel-example report used by the ``bessel-example`` subcommand."""
    out: dict = {"params": asdict(params)}
    zs = [1j, 2j, -1 + 1j, 1 - 1j]
    num = bx.m_numeric(params, zs)
    errs = []
    for z, m_num in zip(zs, num.m):
        m_cf = bx.m_closed_form(params, z)
        errs.append({"z": z, "m_closed_form": m_cf, "m_numeric": complex(m_num),
                     "rel_err": abs(m_num - m_cf) / abs(m_cf)})
    out["m_cross_check"] = errs
    verdicts = []
    if theta0:
        coef = sl.SLCoefficients.power(params.alpha, params.beta)
        res = sl.theta0_search(coef, angle_tol=cfg.angle_tol, num_tol=cfg.num_tol, X=cfg.X, threads=cfg.threads)
        formula = sl.power_weight_theta0(params.alpha, params.beta)
        out["theta0_power_weight"] = {"theta0": res.theta0, "K": res.K, "theta0_formula": formula,
                                      "K_formula": 1.0 / math.cos(formula)}
    grid = bx.default_grid()
    if 0.0 < params.gamma < 1.0:
        fam = bx.friedrichs_family(params.with_delta(0.0), 50, seed=cfg.seed, grid=grid)
        reps = [bx.verify_friedrichs_form(f, params.with_delta(0.0)) for f in fam]
        v = [r.verdict.value for r in reps]
        verdicts += v
        bad = bx.friedrichs_family(params.with_delta(0.0), 10, seed=cfg.seed + 1, grid=grid, with_u0_hat=True)
        out["friedrichs_form"] = {"members": len(reps), "violations": v.count("violated"),
                                  "max_ratio": max(r.ratio for r in reps),
                                  "u0_hat_rejected": sum(not bx.friedrichs_member(f, params) for f in bad),
                                  "u0_hat_tested": len(bad)}
    hgrid = Grid.log_refined(1e-12, 3.0, 100)
    hardy = []
    for decades in (4.0, 8.0):
        rep = bx.weighted_hardy_check(bx.hardy_log_bump(params.beta, decades, hgrid), params.beta)
        hardy.append({"decades": decades, "report": rep})
        verdicts.append(rep.verdict.value)
    out["hardy"] = hardy
    delta = params.delta if params.delta != 0.0 else math.pi / 4
    eps = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7]
    try:
        pd = params.with_delta(delta)
        rows = bx.divergence_demo(pd, 1j, eps)
        rows0 = bx.divergence_demo(params.with_delta(0.0), 1j, eps)
        sg, sh = bx.fitted_slopes(rows)
        out["divergence"] = {"delta": delta, "slope_grad": sg, "slope_hardy": sh,
                             "exponent": bx.divergence_exponent(pd),
                             "control_variation": (max(r[2] for r in rows0) - min(r[2] for r in rows0))
                             / max(r[2] for r in rows0)}
    except NormLabError as exc:
        out["divergence"] = {"skipped": type(exc).__name__}
    out["verdict"] = "violated" if "violated" in verdicts else "holds"
    return out


def cmd_bessel(args, cfg: RunConfig) -> int:
    params = bx.BesselParams(args.alpha, args.beta, args.gamma, args.delta)
    out = bessel_report(params, cfg, theta0=not args.no_theta0)
    _emit(render(out, cfg.format), cfg)
    return _exit_for([out["verdict"]])


def cmd_hardy(args, cfg: RunConfig) -> int:
    f = read_csv(args.csv)
    R = math.inf if args.R is None else args.R
    rep = bx.weighted_hardy_check(f, args.beta, R)
    if cfg.constant_override is not None:
        rep = InequalityReport.build(rep.lhs, rep.rhs, cfg.constant_override, rep.quad_error)
    _emit(render({"beta": args.beta, "R": None if math.isinf(R) else R, "report": rep}, cfg.format), cfg)
    return _exit_for([rep.verdict.value])


def cmd_matrix_suite(args, cfg: RunConfig) -> int:
    out = {"seed": cfg.seed, "count": cfg.count, "checks": {}}
    verdicts = []
    for check in operator_lab.SWEEP_CHECKS:
        recs = operator_lab.sweep(check, cfg.count, seed=cfg.seed, threads=cfg.threads)
        ratios = [r["ratio"] for r in recs if r["ratio"] is not None and math.isfinite(r["ratio"])]
        out["checks"][check] = {"records": len(recs), "violations": operator_lab.violations(recs),
                                "max_ratio": max(ratios) if ratios else None}
        verdicts += [r["verdict"] for r in recs]
    A, f = operator_lab.kato_equality_example(seed=cfg.seed)
    rep = operator_lab.kato_check(A, f)
    out["kato_equality"] = rep
    verdicts.append(rep.verdict.value)
    _emit(render(out, cfg.format), cfg)
    return _exit_for(verdicts)


_SPECIAL = {
    "j": special.bessel_j,
    "jp": special.bessel_j_deriv,
    "y": special.bessel_y,
    "yp": special.bessel_y_deriv,
    "h1": special.hankel1,
    "h1p": special.hankel1_deriv,
}


def cmd_special(args, cfg: RunConfig) -> int:
    z = _parse_z(args.z)
    if args.function == "gamma":
        value = complex(np.asarray(special.gamma_fn(z)).item())
    else:
        if args.order is None:
            raise ConfigError(f"{args.function} needs --order")
        value = complex(np.asarray(_SPECIAL[args.function](args.order, z)).item())
    out = {"function": args.function, "order": args.order, "z": z, "value": value}
    _emit(render(out, cfg.format), cfg)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="normlab", description="Sharp norm inequality laboratory.")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), help="report format")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--constant-override", type=float, dest="constant_override",
                   help="replace the cataloged constant (for exercising failure paths)")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("constants", help="dump the catalog of sharp constants")

    s = sub.add_parser("verify", help="check a cataloged inequality on a sampled function")
    s.add_argument("case", help="domain:p:n:k[:mu], e.g. half_line:2:2:1")
    s.add_argument("csv", help="x,re,im[,dre,dim,ddre,ddim] samples")

    s = sub.add_parser("estimate", help="estimate a best constant by optimization")
    s.add_argument("case")
    s.add_argument("--budget", type=int)

    s = sub.add_parser("mfun", help="Weyl-Titchmarsh m-function at one point")
    s.add_argument("coeffs", help="classical | power:alpha:beta | bessel:alpha:beta:gamma")
    s.add_argument("z")
    s.add_argument("--bc", default="neumann_type", choices=("neumann_type", "dirichlet_type"))

    s = sub.add_parser("theta0", help="run the best-constant angle search")
    s.add_argument("coeffs")

    s = sub.add_parser("bessel-example", help="end-to-end report for the generalized Bessel example")
    s.add_argument("alpha", type=float)
    s.add_argument("beta", type=float)
    s.add_argument("gamma", type=float)
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--no-theta0", action="store_true", help="skip the power-weight angle search")

    s = sub.add_parser("hardy", help="weighted Hardy inequality on a sampled function")
    s.add_argument("beta", type=float)
    s.add_argument("csv")
    s.add_argument("--R", type=float)

    s = sub.add_parser("matrix-suite", help="seeded random sweeps of the operator inequalities")
    s.add_argument("--count", type=int)

    s = sub.add_parser("special", help="special function evaluation")
    s2 = s.add_subparsers(dest="special_command", required=True)
    e = s2.add_parser("eval")
    e.add_argument("function", choices=sorted(_SPECIAL) + ["gamma"])
    e.add_argument("z")
    e.add_argument("--order", type=float)
    return p


_HANDLERS = {
    "constants": cmd_constants,
    "verify": cmd_verify,
    "estimate": cmd_estimate,
    "mfun": cmd_mfun,
    "theta0": cmd_theta0,
    "bessel-example": cmd_bessel,
    "hardy": cmd_hardy,
    "matrix-suite": cmd_matrix_suite,
    "special": cmd_special,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    args.format_given = args.format is not None
    try:
        overrides = _parse_set(args.set)
        for key in ("output", "format", "seed", "threads", "constant_override"):
            overrides[key] = getattr(args, key)
        for key in ("budget", "count"):
            if getattr(args, key, None) is not None:
                overrides[key] = getattr(args, key)
        cfg = RunConfig.load(args.config, overrides)
        if cfg.threads is not None:
            os.environ["NORMLAB_THREADS"] = str(cfg.threads)
        return _HANDLERS[args.command](args, cfg)
    except HypothesisViolated as exc:
        print(f"normlab: hypothesis not satisfied: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValueError, OSError, NormLabError) as exc:
        print(f"normlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
