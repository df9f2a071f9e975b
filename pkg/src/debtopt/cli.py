"""Command-line front end.

Each subcommand reads one JSON document with ``model``, ``command`` and
``output`` blocks (all optional; the model defaults to the reference
scenario), applies ``--set dotted.path=value`` overrides, computes everything,
and only then writes its artifacts.  Exit codes: 0 ok, 2 config, 3 model,
4 solver, 5 I/O.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import hjb, reduction, sde, smoothing
from .errors import ConfigError, DebtOptError, DegenerateError, ModelError, SolverError
from .model import (
    LinearGrowth,
    Model,
    PowerCost,
    QuadraticDistanceCost,
    constant_model,
    lambda_m,
    model_from_dict,
    model_to_dict,
    validate,
)
from .policy import ConstantPolicy, policy_from_dict

EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4, 5

DEFAULT_MODEL = {
    "rate": {"family": "constant", "r": 0.01},
    "growth": {"family": "linear_u", "g0": 0.03, "alpha": 0.9},
    "sigma": 0.2,
    "rho": 0.0,
    "lambda": 5.0,
    "bounds": {"u1": 1.0, "u2": 1.0},
    "cost": {"family": "quadratic_distance", "xbar": 0.6},
    "factor": {"family": "none"},
    "x0": 0.7,
    "z0": 0.0,
}

# published thresholds, keyed by (economy, case)
TABLE2_CASES = (("alpha=0.9", 0.9, 1.0), ("alpha=0.95", 0.95, 1.0), ("U=0.8", 0.9, 0.8), ("U=0.5", 0.9, 0.5))
TABLE2_ECONOMIES = {
    "strong": dict(r=0.01, g0=0.03, sigma=0.2),
    "weak": dict(r=0.07, g0=0.015, sigma=0.3),
}
TABLE2_PUBLISHED = {
    "strong": (0.6194, 0.6052, 0.6125, 0.6052),
    "weak": (0.6241, 0.5941, 0.6068, 0.5941),
}

COMMAND_KEYS = {
    "simulate": {"policy", "paths", "eps", "max_horizon", "export_paths", "format", "sustainability_horizons", "workers"},
    "smooth-solve": {"variant", "root", "table"},
    "table2": set(),
    "reduce-solve": set(),
    "hjb": {"grid", "tol", "max_iter", "boundary"},
    "validate": {"paths", "eps"},
}


# ------------------------------------------------------------ config plumbing


def _parse_leaf(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(doc: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects dotted.path=value, got {assignment!r}")
    path, raw = assignment.split("=", 1)
    keys = path.strip().split(".")
    if not all(keys):
        raise ConfigError(f"bad override path {path!r}")
    node = doc
    for k in keys[:-1]:
        child = node.get(k)
        if child is None:
            child = node[k] = {}
        if not isinstance(child, dict):
            raise ConfigError(f"override path {path!r} crosses a non-object at {k!r}")
        node = child
    node[keys[-1]] = _parse_leaf(raw)


def load_config(path: str | None, overrides=()) -> dict:
    doc: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    doc = copy.deepcopy(doc)
    doc.setdefault("model", copy.deepcopy(DEFAULT_MODEL))
    for ov in overrides:
        apply_override(doc, ov)
    unknown = set(doc) - {"model", "command", "output"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    return doc


def _command_block(doc: dict, name: str) -> dict:
    block = doc.get("command") or {}
    if not isinstance(block, dict):
        raise ConfigError("command must be an object")
    block = dict(block)
    declared = block.pop("name", name)
    if declared != name:
        raise ConfigError(f"config is for command {declared!r}, not {name!r}")
    unknown = set(block) - COMMAND_KEYS[name]
    if unknown:
        raise ConfigError(f"command.{sorted(unknown)[0]}: unknown key for {name}")
    return block


def _output_dir(doc: dict, cli_out: str | None) -> Path:
    out = doc.get("output") or {}
    if not isinstance(out, dict) or set(out) - {"dir"}:
        raise ConfigError("output accepts only {'dir': ...}")
    return Path(cli_out or out.get("dir", "out"))


def _path_config(block, defaults: dict | None = None) -> sde.PathConfig:
    cfg = dict(defaults or {})
    if block is not None:
        if not isinstance(block, dict):
            raise ConfigError("command.paths must be an object")
        unknown = set(block) - {"dt", "horizon", "n_paths", "seed", "antithetic"}
        if unknown:
            raise ConfigError(f"command.paths: unknown keys {sorted(unknown)}")
        cfg.update(block)
    try:
        return sde.PathConfig(**cfg)
    except (TypeError, ModelError) as exc:
        raise ConfigError(f"command.paths: {exc}") from exc


def _model(doc: dict) -> Model:
    model = model_from_dict(doc["model"])
    validate(model)
    return model


def _number(value, what):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what}: expected a number, got {value!r}")
    return value


# ---------------------------------------------------------------- rendering


def _json_bytes(obj) -> bytes:
    return (json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=True) + "\n").encode()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else format(v, ".17g") for v in row])
    return buf.getvalue().encode()


def _write_all(out_dir: Path, files: dict[str, bytes]) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, data in files.items():
        p = out_dir / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(data)
        written.append(p)
    return written


# ----------------------------------------------------------------- commands


def _optimal_policy(model: Model):
    if isinstance(model.cost, QuadraticDistanceCost):
        sol = smoothing.solve_smoothing(model)
        return smoothing.smoothing_policy(sol, model), sol
    if isinstance(model.cost, PowerCost):
        if model.is_constant_coefficient:
            red = reduction.solve_reduction(model)
            return ConstantPolicy(red.u_star), red
        from .policy import reduction_policy_z

        return reduction_policy_z(model), None
    raise ModelError("no optimal policy available for this cost family")


def _resolve_policy(model: Model, rule):
    if rule is None or rule == "optimal":
        return _optimal_policy(model)
    if isinstance(rule, dict):
        try:
            pol = policy_from_dict(rule)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"command.policy: {exc}") from exc
        pol.check(model.bounds)
        if rule.get("kind") == "threshold" and isinstance(model.growth, LinearGrowth):
            if model.growth.alpha.is_constant and float(model.growth.alpha(model.z0)) == 1.0:
                raise DegenerateError("alpha = 1: the control does not move the drift, no switching rule")
        return pol, None
    raise ConfigError(f"command.policy must be 'optimal' or a policy object, got {rule!r}")


def cmd_simulate(doc: dict) -> dict[str, bytes]:
    model = _model(doc)
    block = _command_block(doc, "simulate")
    cfg = _path_config(block.get("paths"))
    eps = _number(block.get("eps", 1e-6), "command.eps")
    max_h = _number(block.get("max_horizon", 200.0), "command.max_horizon")
    n_export = int(_number(block.get("export_paths", min(cfg.n_paths, 10)), "command.export_paths"))
    fmt = block.get("format", "long")
    if fmt not in ("long", "per_path"):
        raise ConfigError("command.format must be 'long' or 'per_path'")
    horizons = block.get("sustainability_horizons", [1.0, 2.0, 5.0, 10.0])
    workers = int(_number(block.get("workers", 1), "command.workers"))

    policy, closed = _resolve_policy(model, block.get("policy"))
    est = sde.estimate_cost(model, policy, cfg, eps=eps, max_horizon=max_h, workers=workers)
    export_cfg = sde.PathConfig(cfg.dt, cfg.horizon, max(1, min(n_export, cfg.n_paths)), cfg.seed, cfg.antithetic)
    trajs = sde.simulate_paths(model, policy, export_cfg, workers=workers)
    sus = sde.sustainability_check(model, policy, cfg, horizons, workers=workers)
    terminal = sde.moment_bound_check(model, policy, cfg, 1.0, cfg.n_steps * cfg.dt, workers=workers)

    summary = {
        "model": model_to_dict(model),
        "policy": policy.to_dict(),
        "paths": {"dt": cfg.dt, "horizon": cfg.horizon, "n_paths": cfg.n_paths, "seed": cfg.seed, "antithetic": cfg.antithetic},
        "mean_terminal_x": terminal.empirical,
        "cost": est.to_dict(),
        "sustainability": {
            "horizons": list(sus.horizons),
            "mean_discounted_ratio": list(sus.means),
            "slope": sus.slope,
            "monotone": sus.monotone,
            "sustainable": sus.sustainable,
        },
    }
    if isinstance(closed, smoothing.SmoothingSolution):
        summary["closed_form_value"] = float(smoothing.value(closed, model.x0)[0])
    elif isinstance(closed, reduction.ReductionSolution):
        summary["closed_form_value"] = float(reduction.reduction_value(closed, model.x0)[0])

    files = {"summary.json": _json_bytes(summary)}
    if fmt == "long":
        rows = ([str(i)] + list(r) for i, tr in enumerate(trajs) for r in tr.rows())
        files["trajectories.csv"] = _csv_bytes(("path",) + sde.TRAJECTORY_COLUMNS, rows)
    else:
        width = max(1, len(str(len(trajs) - 1)))
        for i, tr in enumerate(trajs):
            files[f"paths/path_{i:0{width}d}.csv"] = _csv_bytes(sde.TRAJECTORY_COLUMNS, tr.rows())
    return files


def cmd_smooth_solve(doc: dict) -> dict[str, bytes]:
    model = _model(doc)
    block = _command_block(doc, "smooth-solve")
    variant = block.get("variant", "pasting")
    root = block.get("root", "unique")
    if variant not in smoothing.VARIANTS:
        raise ConfigError(f"command.variant must be one of {smoothing.VARIANTS}")
    if root not in ("unique", "nearest_target"):
        raise ConfigError("command.root must be 'unique' or 'nearest_target'")
    tb = block.get("table") or {}
    unknown = set(tb) - {"x_min", "x_max", "n"}
    if unknown:
        raise ConfigError(f"command.table: unknown keys {sorted(unknown)}")
    sol = smoothing.solve_smoothing(model, variant=variant, root=root)
    xs = np.geomspace(tb.get("x_min", 0.05), tb.get("x_max", 5.0), int(tb.get("n", 200)))
    payload = sol.to_dict()
    payload["economy"] = _economy_name(model)
    payload["degenerate"] = model.cost.xbar == 0
    if variant == "pasting" and sol.threshold > 0:
        try:
            alt = smoothing.solve_smoothing(model, variant="printed", root="nearest_target", check_convexity=False)
            payload["threshold_printed_formula"] = alt.threshold
        except DebtOptError:
            payload["threshold_printed_formula"] = None
    if sol.threshold > 0:
        fit = smoothing.verify_smooth_fit(sol)
        payload["smooth_fit"] = {
            "value": fit.value,
            "slope": fit.slope,
            "curvature": fit.curvature,
            "slope_at_threshold": fit.slope_at_threshold,
        }
    return {
        "solution.json": _json_bytes(payload),
        "value_table.csv": _csv_bytes(("x", "w", "w1", "w2"), smoothing.value_table(sol, xs)),
    }


def _economy_name(model: Model) -> str:
    from .model import classify_economy

    try:
        return classify_economy(model).name.lower()
    except DebtOptError:
        return "n/a"


def table2_rows() -> list[dict]:
    rows = []
    for eco, params in TABLE2_ECONOMIES.items():
        for (case, alpha, U), published in zip(TABLE2_CASES, TABLE2_PUBLISHED[eco]):
            model = constant_model(alpha=alpha, u1=U, **params)
            printed = smoothing.solve_smoothing(model, variant="printed", root="nearest_target")
            pasting = smoothing.solve_smoothing(model)
            rows.append(
                {
                    "economy": eco,
                    "case": case,
                    "alpha": alpha,
                    "U": U,
                    "published": published,
                    "threshold": printed.threshold,
                    "gap": abs(printed.threshold - published),
                    "threshold_pasting": pasting.threshold,
                }
            )
    return rows


def render_table2_markdown(rows) -> str:
    lines = [
        "| economy | case | published | computed | gap | C2-pasting |",
        "|---|---|---|---|---|---|",
    ]
    for r in rows:
        lines.append(
            f"| {r['economy']} | {r['case']} | {r['published']:.4f} | {r['threshold']:.6f} "
            f"| {r['gap']:.2e} | {r['threshold_pasting']:.6f} |"
        )
    return "\n".join(lines) + "\n"


def cmd_table2(doc: dict) -> dict[str, bytes]:
    _command_block(doc, "table2")
    rows = table2_rows()
    cols = ("economy", "case", "alpha", "U", "published", "threshold", "gap", "threshold_pasting")
    return {
        "table2.md": render_table2_markdown(rows).encode(),
        "table2.csv": _csv_bytes(cols, ([r[c] for c in cols] for r in rows)),
    }


def cmd_reduce_solve(doc: dict) -> dict[str, bytes]:
    model = _model(doc)
    _command_block(doc, "reduce-solve")
    sol = reduction.solve_reduction(model)
    payload = sol.to_dict()
    payload["lambda_m"] = lambda_m(model, sol.m)
    return {"reduction.json": _json_bytes(payload)}


def cmd_hjb(doc: dict) -> dict[str, bytes]:
    model = _model(doc)
    block = _command_block(doc, "hjb")
    gd = block.get("grid") or {}
    unknown = set(gd) - {"x_min", "x_max", "n", "spacing"}
    if unknown:
        raise ConfigError(f"command.grid: unknown keys {sorted(unknown)}")
    try:
        grid = hjb.Grid(**gd)
    except (TypeError, ModelError) as exc:
        raise ConfigError(f"command.grid: {exc}") from exc
    boundary = block.get("boundary", hjb.HJBConfig.boundary)
    if boundary not in hjb.BOUNDARIES:
        raise ConfigError(f"command.boundary must be one of {hjb.BOUNDARIES}")
    cfg = hjb.HJBConfig(
        tol=_number(block.get("tol", hjb.HJBConfig.tol), "command.tol"),
        max_iter=int(_number(block.get("max_iter", hjb.HJBConfig.max_iter), "command.max_iter")),
        boundary=boundary,
    )
    gv = hjb.policy_iteration(model, grid, cfg)
    payload = {"iterations": gv.iterations, "residual": gv.residual, "monotone": gv.monotone, "n": grid.n}
    try:
        thr = hjb.extract_threshold(gv)
        payload["threshold"] = thr
        payload["grid_spacing_at_threshold"] = hjb.local_spacing(gv, thr)
    except SolverError:
        payload["threshold"] = None
    exact = _closed_form_values(model, gv.x)
    if exact is not None:
        sel = (gv.x >= 0.1) & (gv.x <= 3.0)
        payload["sup_error_vs_closed_form"] = float(np.max(np.abs(gv.v - exact)[sel])) if sel.any() else None
    return {"hjb.json": _json_bytes(payload), "hjb.csv": _csv_bytes(("x", "v", "u"), gv.rows())}


def _closed_form_values(model: Model, x):
    try:
        if isinstance(model.cost, QuadraticDistanceCost):
            return smoothing.value(smoothing.solve_smoothing(model), x)[0]
        return reduction.reduction_value(reduction.solve_reduction(model), x)[0]
    except DebtOptError:
        return None


def validation_report(model: Model, cfg: sde.PathConfig, eps: float = 1e-6) -> dict:
    """Runs the invariant suite; each entry has ``passed`` plus the numbers behind it."""
    checks: dict[str, dict] = {}
    policy, closed = _optimal_policy(model)
    u_top = ConstantPolicy(model.bounds.u2)

    for m in (1.0, 2.0):
        rep = sde.moment_bound_check(model, u_top, cfg, m, min(cfg.horizon, 5.0))
        checks[f"moment_bound_m{int(m)}"] = {
            "passed": rep.passed, "empirical": rep.empirical, "bound": rep.bound, "stderr": rep.stderr,
        }

    x0 = model.x0
    # the quadratic distance cost is increasing only above its target
    base = max(x0, model.cost.xbar) if isinstance(model.cost, QuadraticDistanceCost) else x0
    lo = sde.estimate_cost(model, policy, cfg, eps=eps, x0=base)
    hi = sde.estimate_cost(model, policy, cfg, eps=eps, x0=1.25 * base)
    mid = lo if base == x0 else sde.estimate_cost(model, policy, cfg, eps=eps, x0=x0)
    checks["monotone_in_x"] = {"passed": bool(hi.mean >= lo.mean), "low": lo.mean, "high": hi.mean}

    if isinstance(closed, smoothing.SmoothingSolution):
        xs = np.geomspace(*smoothing.CONVEXITY_RANGE, 2001)
        w2 = smoothing.value(closed, xs)[2]
        checks["convexity"] = {"passed": bool(np.all(w2 >= 0)), "min_curvature": float(np.min(w2))}
        if closed.threshold > 0:
            fit = smoothing.verify_smooth_fit(closed)
            worst = max(abs(fit.value), abs(fit.slope), abs(fit.curvature), abs(fit.slope_at_threshold))
            checks["smooth_fit"] = {"passed": worst < 1e-8, "max_residual": worst}
        w_x0, w1_x0, _ = (float(a) for a in smoothing.value(closed, x0))
    elif isinstance(closed, reduction.ReductionSolution):
        checks["convexity"] = {"passed": closed.k >= 0, "k": closed.k}
        w_x0, w1_x0, _ = (float(a) for a in reduction.reduction_value(closed, x0))
    else:
        w_x0 = None

    if w_x0 is not None:
        slack = 3.0 * mid.stderr + 2.0 * cfg.dt * abs(w1_x0)
        checks["mc_vs_closed_form"] = {
            "passed": abs(mid.mean - w_x0) <= slack,
            "mc": mid.mean,
            "stderr": mid.stderr,
            "closed_form": w_x0,
            "slack": slack,
        }
    return {"checks": checks, "passed": all(c["passed"] for c in checks.values())}


def cmd_validate(doc: dict) -> tuple[dict[str, bytes], bool]:
    model = _model(doc)
    block = _command_block(doc, "validate")
    cfg = _path_config(block.get("paths"), {"n_paths": 2000})
    report = validation_report(model, cfg, eps=_number(block.get("eps", 1e-6), "command.eps"))
    return {"validate.json": _json_bytes(report)}, report["passed"]


COMMANDS = {
    "simulate": cmd_simulate,
    "smooth-solve": cmd_smooth_solve,
    "table2": cmd_table2,
    "reduce-solve": cmd_reduce_solve,
    "hjb": cmd_hjb,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="debtopt", description="Debt-to-GDP stochastic control toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", help="JSON run configuration")
        p.add_argument("--set", action="append", default=[], metavar="PATH=VALUE", help="override a config leaf")
        p.add_argument("-o", "--out", help="output directory (overrides output.dir)")
    return ap


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        doc = load_config(args.config, args.set)
        out_dir = _output_dir(doc, args.out)
        result = COMMANDS[args.command](doc)
        ok = True
        if isinstance(result, tuple):
            result, ok = result
        written = _write_all(out_dir, result)
    except OSError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_IO
    except DebtOptError as exc:
        print(f"error: {exc}", file=stderr)
        return exc.exit_code
    except (TypeError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_CONFIG
    if args.command == "table2":
        stdout.write(result["table2.md"].decode())
    for p in written:
        print(p, file=stdout)
    if not ok:
        print("error: validation checks failed", file=stderr)
        return EXIT_MODEL
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
