"""Command-line entry point: runs, convergence tables, comparisons, checks.

Subcommands
-----------
run                  integrate a scenario and dump snapshot statistics
convergence          error/order table against a fine reference grid
compare-collocation  stochastic Galerkin vs collocation moments
wellbalance          lake-at-rest preservation check (pass/fail)
discrepancy          mixed-term closure gap across basis sizes

Exit codes: 0 success, 1 failed check, 2 configuration error, 3 solver abort.
Configuration may come from a key = value file (see --config) with CLI flags
taking precedence.  All floating-point output is full round-trip precision.
"""

import argparse
import configparser
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .basis import build_basis, p3_exact_rule, p3_rule_sizes
from .galerkin import triple_product_tensor
from .scenarios import (
    builtin_scenario,
    closure_discrepancy,
    collocation_solve,
    convergence_table,
    make_config,
    moments,
    run_scenario,
)
from .solver import NG, CentralUpwindSolver, Grid, StateField, build_bottom
from .system import NonHyperbolicStateError


def _fmt(x):
    return f"{float(x):.17g}"


class ConfigError(Exception):
    pass


def _parse_grid(text):
    try:
        if "x" in text:
            nx, ny = text.lower().split("x")
            return int(nx), int(ny)
        n = int(text)
        return n, n
    except ValueError as exc:
        raise ConfigError(f"bad grid spec {text!r}, expected e.g. 100x100") from exc


def _resolve(args):
    """Merge config file values and CLI flags into one namespace.

    Precedence: defaults < [run] section < [scenarioN] section < CLI flags.
    The scenario id may itself come from the file's [run] section.
    """
    merged = {}
    parser = None
    if getattr(args, "config", None):
        parser = configparser.ConfigParser()
        if not parser.read(args.config):
            raise ConfigError(f"config file {args.config!r} not found")
        if parser.has_section("run"):
            for key, val in parser.items("run"):
                merged[key.replace("-", "_")] = val
    scenario = getattr(args, "scenario", None)
    if scenario is None:
        scenario = merged.get("scenario")
    if parser is not None and scenario is not None:
        section = f"scenario{scenario}"
        if parser.has_section(section):
            for key, val in parser.items(section):
                merged[key.replace("-", "_")] = val
    for key, val in vars(args).items():
        if val is not None:
            merged[key] = val
    # strings from the file get coerced lazily by the consumers below
    return merged


def _get(merged, key, cast, default=None):
    val = merged.get(key, default)
    if val is None:
        return None
    try:
        return cast(val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {val!r}") from exc


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(tok) for tok in str(text).split(",") if tok.strip()]


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(tok) for tok in str(text).split(",") if tok.strip()]


def _scenario_from(merged):
    sid = _get(merged, "scenario", int)
    if sid is None:
        raise ConfigError("a scenario id (--scenario 1..5) is required")
    k = _get(merged, "k", int)
    degrees = merged.get("degrees")
    degrees = _int_list(degrees) if degrees is not None else None
    spec = builtin_scenario(sid, k=k, degrees=degrees)
    t_end = _get(merged, "end_time", float)
    if t_end is not None:
        spec = replace(spec, t_end=t_end, snapshot_times=(t_end,))
    snaps = merged.get("snapshots")
    if snaps is not None:
        spec = replace(spec, snapshot_times=tuple(_float_list(snaps)))
    return spec


def _config_overrides(merged):
    out = {}
    for key, cast in (("theta", float), ("delta", float), ("eps", float),
                      ("cfl", float), ("g", float)):
        val = _get(merged, key, cast)
        if val is not None:
            out[key] = val
    integ = merged.get("integrator")
    if integ is not None:
        out["integrator"] = str(integ)
    return out


def _outdir(merged):
    out = Path(merged.get("out") or "sgswe-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_snapshot(outdir, tag, result, state):
    """CSV of per-cell moment statistics plus the full coefficient dump."""
    grid = result.grid
    xc, yc = grid.cell_centers()
    sl = (slice(NG, -NG), slice(NG, -NG))
    b_cen = result.bottom.center[sl]
    h, qx, qy = state.interior()
    w = h + b_cen
    cols = {}
    for name, arr in (("w", w), ("h", h), ("qx", qx), ("qy", qy), ("B", b_cen)):
        mom = moments(arr)
        cols[f"mean_{name}"] = mom.mean
        cols[f"std_{name}"] = mom.std
    path = outdir / f"snapshot_{tag}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"] + list(cols.keys()))
        for j in range(grid.ny):
            for i in range(grid.nx):
                writer.writerow(
                    [_fmt(xc[i]), _fmt(yc[j])]
                    + [_fmt(cols[name][i, j]) for name in cols]
                )
    cpath = outdir / f"coeffs_{tag}.csv"
    with open(cpath, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "var", "k", "value"])
        for j in range(grid.ny):
            for i in range(grid.nx):
                for name, arr in (("h", h), ("qx", qx), ("qy", qy)):
                    for kk in range(arr.shape[-1]):
                        writer.writerow(
                            [_fmt(xc[i]), _fmt(yc[j]), name, kk + 1,
                             _fmt(arr[i, j, kk])]
                        )
    return path, cpath


def _manifest(outdir, merged, result, extra=None):
    stats = result.stats
    payload = {
        "parameters": {k: str(v) for k, v in sorted(merged.items())},
        "grid": {"nx": result.grid.nx, "ny": result.grid.ny},
        "basis_size": result.basis.size,
        "threads": os.environ.get("SGSWE_THREADS", "1"),
        "n_steps": stats.n_steps,
        "dt_history": [r.dt for r in stats.steps],
        "min_node_h_per_step": [r.min_node_h for r in stats.steps],
        "mu_max_per_step": [r.mu_max for r in stats.steps],
        "min_node_h": stats.min_node_h,
        "filter_activations": stats.total_filter_activations,
        "mu_max": stats.mu_max,
        "dt_halvings": stats.total_halvings,
    }
    if extra:
        payload.update(extra)
    path = outdir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
    return path


def cmd_run(merged):
    spec = _scenario_from(merged)
    nx, ny = _parse_grid(merged.get("grid") or "100x100")
    outdir = _outdir(merged)
    result = run_scenario(spec, nx, ny, collect_snapshots=True,
                          **_config_overrides(merged))
    for t, state in sorted(result.snapshots.items()):
        _write_snapshot(outdir, f"t{t:g}", result, state)
    _manifest(outdir, merged, result)
    print(f"run complete: {result.stats.n_steps} steps, "
          f"min node height {_fmt(result.stats.min_node_h)}, output in {outdir}")
    return 0


def cmd_convergence(merged):
    spec = _scenario_from(merged)
    grids = _int_list(merged.get("grids") or "100,200,400")
    ref = _get(merged, "ref", int, 800)
    outdir = _outdir(merged)
    rows, ref_res = convergence_table(spec, grids, ref,
                                      **_config_overrides(merged))
    txt = outdir / "convergence.txt"
    with open(txt, "w") as fh:
        header = f"{'grid':>8} {'error':>24} {'order':>10}"
        print(header)
        fh.write(header + "\n")
        for r in rows:
            order = "-" if r["order"] is None else f"{r['order']:.6f}"
            line = f"{r['nx']:>8} {_fmt(r['error']):>24} {order:>10}"
            print(line)
            fh.write(line + "\n")
    with open(outdir / "convergence.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["nx", "error", "order"])
        for r in rows:
            writer.writerow([r["nx"], _fmt(r["error"]),
                             "" if r["order"] is None else _fmt(r["order"])])
    _manifest(outdir, merged, ref_res)
    return 0


def cmd_compare_collocation(merged):
    spec = _scenario_from(merged)
    nx, ny = _parse_grid(merged.get("grid") or "100x100")
    m = _get(merged, "m", int, 100)
    outdir = _outdir(merged)
    overrides = _config_overrides(merged)
    sg = run_scenario(spec, nx, ny, **overrides)
    h_sg, qx_sg, qy_sg = sg.state.interior()
    h_sc, qx_sc, qy_sc = collocation_solve(spec, m, nx, ny, **overrides)

    warning = None
    min_sizes = p3_rule_sizes(spec.index_set)
    if spec.dist.dim == 1 and m < min_sizes[0]:
        warning = (f"collocation rule size {m} is below the "
                   f"triple-product-exact size {min_sizes[0]}")

    cell = sg.grid.dx * sg.grid.dy
    diff = 0.0
    for a, b in ((h_sg, h_sc), (qx_sg, qx_sc), (qy_sg, qy_sc)):
        diff += cell * float(np.sqrt(np.sum((a - b) ** 2, axis=-1)).sum())

    xc, yc = sg.grid.cell_centers()
    for tag, fields in (("sg", (h_sg, qx_sg, qy_sg)), ("sc", (h_sc, qx_sc, qy_sc))):
        with open(outdir / f"moments_{tag}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "mean_h", "std_h", "mean_qx", "std_qx",
                             "mean_qy", "std_qy"])
            ms = [moments(f) for f in fields]
            for j in range(sg.grid.ny):
                for i in range(sg.grid.nx):
                    row = [_fmt(xc[i]), _fmt(yc[j])]
                    for mfield in ms:
                        row += [_fmt(mfield.mean[i, j]), _fmt(mfield.std[i, j])]
                    writer.writerow(row)
    extra = {"collocation_points": m, "l1l2_difference": diff}
    if warning:
        extra["warning"] = warning
        print(f"warning: {warning}")
    _manifest(outdir, merged, sg, extra=extra)
    print(f"SG vs collocation L1(L2) difference: {_fmt(diff)}")
    return 0


def cmd_wellbalance(merged):
    spec = _scenario_from(merged) if merged.get("scenario") else builtin_scenario(2, k=4)
    nx, ny = _parse_grid(merged.get("grid") or "100x100")
    t_end = _get(merged, "end_time", float, 1.0)
    surface = _float_list(merged.get("surface") or "1,0.01,0.005")
    tol = _get(merged, "tol", float, 1e-12)
    unbalance = _get(merged, "unbalance_source", float, 0.0) or 0.0
    outdir = _outdir(merged)

    overrides = _config_overrides(merged)
    if unbalance:
        overrides["source_scale"] = 1.0 + unbalance
    grid = Grid(nx, ny, *spec.domain)
    basis = build_basis(spec.dist, spec.index_set)
    rule = p3_exact_rule(basis)
    tensor = triple_product_tensor(basis, rule)
    config = make_config(spec, bc=None, **overrides)
    bottom = build_bottom(spec.bottom, grid, basis, rule, config.bc)
    eta = np.zeros(basis.size)
    eta[: len(surface)] = surface
    h0 = eta[None, None, :] - bottom.center[NG:-NG, NG:-NG]
    zeros = np.zeros_like(h0)
    state = StateField.from_interior(h0, zeros.copy(), zeros.copy())
    solver = CentralUpwindSolver(grid, bottom, basis, config, rule, tensor)
    final, stats = solver.run(state, t_end)
    h, qx, qy = final.interior()
    dev_state = max(float(np.abs(h - h0).max()),
                    float(np.abs(qx).max()), float(np.abs(qy).max()))
    dev_q = max(float(np.abs(qx).max()), float(np.abs(qy).max()))
    passed = dev_state <= tol and dev_q <= tol
    verdict = "PASS" if passed else "FAIL"
    report = (f"wellbalance {verdict}: max|state - initial| = {_fmt(dev_state)}, "
              f"max|q| = {_fmt(dev_q)}, tolerance {_fmt(tol)}, "
              f"t_end {_fmt(t_end)}, steps {stats.n_steps}")
    print(report)
    with open(outdir / "wellbalance.txt", "w") as fh:
        fh.write(report + "\n")
    return 0 if passed else 1


def cmd_discrepancy(merged):
    sid = _get(merged, "scenario", int, 1)
    nx, ny = _parse_grid(merged.get("grid") or "100x100")
    k_list = _int_list(merged.get("k_list") or "2,3,4,6,8")
    outdir = _outdir(merged)
    overrides = _config_overrides(merged)
    values = []
    for k in k_list:
        spec = builtin_scenario(sid, k=k)
        res = run_scenario(spec, nx, ny, **overrides)
        h, qx, qy = res.state.interior()
        gap = closure_discrepancy(res.tensor, h, qx, qy)
        values.append((k, gap))
        print(f"K={k:3d}  closure discrepancy = {_fmt(gap)}")
    with open(outdir / "discrepancy.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["K", "discrepancy"])
        for k, gap in values:
            writer.writerow([k, _fmt(gap)])
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sgswe",
        description="Stochastic Galerkin shallow-water solver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--scenario", type=int, help="built-in scenario id (1..5)")
        p.add_argument("--grid", help="grid size, e.g. 100x100")
        p.add_argument("--k", type=int, help="basis size (1-d parameter)")
        p.add_argument("--degrees", help="per-dimension degrees, e.g. 3,3")
        p.add_argument("--theta", type=float, help="minmod parameter in [1,2]")
        p.add_argument("--delta", type=float, help="filter offset")
        p.add_argument("--eps", type=float, help="desingularization scale")
        p.add_argument("--cfl", type=float, help="CFL safety factor")
        p.add_argument("--g", type=float, help="gravitational constant")
        p.add_argument("--integrator", choices=["ssprk2", "ssprk3"])
        p.add_argument("--end-time", dest="end_time", type=float)
        p.add_argument("--snapshots", help="comma-separated snapshot times")
        p.add_argument("--out", help="output directory")

    p_run = sub.add_parser("run", help="integrate a scenario")
    common(p_run)

    p_conv = sub.add_parser("convergence", help="error/order table")
    common(p_conv)
    p_conv.add_argument("--grids", help="comma-separated grid sizes")
    p_conv.add_argument("--ref", type=int, help="reference grid size")

    p_cc = sub.add_parser("compare-collocation", help="SG vs collocation")
    common(p_cc)
    p_cc.add_argument("--m", type=int, help="collocation points per dimension")

    p_wb = sub.add_parser("wellbalance", help="lake-at-rest check")
    common(p_wb)
    p_wb.add_argument("--surface", help="surface PCE coefficients, e.g. 1,0.01")
    p_wb.add_argument("--tol", type=float, help="pass tolerance")
    p_wb.add_argument("--unbalance-source", dest="unbalance_source", type=float,
                      help="test hook: scale the source by 1 + this value")

    p_dc = sub.add_parser("discrepancy", help="closure gap across K")
    common(p_dc)
    p_dc.add_argument("--k-list", dest="k_list", help="comma-separated K values")

    return parser


COMMANDS = {
    "run": cmd_run,
    "convergence": cmd_convergence,
    "compare-collocation": cmd_compare_collocation,
    "wellbalance": cmd_wellbalance,
    "discrepancy": cmd_discrepancy,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        merged = _resolve(args)
        return COMMANDS[args.command](merged)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NonHyperbolicStateError as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
