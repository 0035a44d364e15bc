"""Command-line front end: ``natap <verb> [flags]``.

Errors end the process with a nonzero status and one line on stderr of
the form ``error <CODE>: <text>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from .circuit import Circuit, CircuitError, validate_routed
from .coloring import (Coloring, ColoringError, ExperimentSchedule, Status, build_interference_graph,
                       dsatur, exact_coloring, greedy_randomized_coloring, heavy_hex_analytic_coloring,
                       is_proper, schedule_experiments, verify_schedule)
from .hwgraph import Family, GraphError, HardwareGraph, generate_hardware
from .rbfit import (CalibrationData, CalibrationError, DecayCurve, ErrEstimate, FitError,
                    assemble_noise_model, error_rate_ratio, fit_decay)
from .fixtures import falcon27_noise
from .qaoa import (QaoaError, build_qaoa_circuit, generate_maxcut_instance, optimize_parameters,
                   predict_noisy_ratio, qaoa_expectation, uniform_ratio)
from .router import RouterConfig, RoutingError, mirrored_result, route, route_best_line
from .tap import LinearizationMode, TapError

EXIT = {"E_USAGE": 2, "E_IO": 3, "E_SCHEMA": 4, "E_GUARD": 5, "E_SOLVER": 6, "E_VERIFY": 7}

BENCH_COLUMNS = ("instance", "method", "p", "swap_count", "cx_count", "depth", "c_swap", "c_noise",
                 "c_noise_total", "ideal_ratio", "uniform_ratio", "predicted_ratio", "status")


class CliError(Exception):
    def __init__(self, code: str, text: str):
        super().__init__(text)
        self.code = code


# -- reports --------------------------------------------------------------

def _round(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None if math.isnan(obj) else obj
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):  # numpy scalars
        return _round(obj.item())
    return obj


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.9g}"
    if hasattr(v, "item"):
        return _cell(v.item())
    return str(v)


def emit_report(results, fmt: str, path: str | Path | None = None, columns=None) -> str:
    """Serialize ``results`` with sorted keys (JSON) or fixed columns (CSV), floats at 9 digits.

    CSV takes a list of row dicts; an empty list gives the header alone.
    Writes to ``path`` when given and returns the text either way.
    """
    if fmt == "json":
        text = json.dumps(_round(results), sort_keys=True, indent=2) + "\n"
    elif fmt == "csv":
        rows = list(results)
        cols = list(columns) if columns else (sorted({k for r in rows for k in r}) if rows else [])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in cols])
        text = buf.getvalue()
    else:
        raise CliError("E_USAGE", f"unknown report format {fmt!r}")
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise CliError("E_IO", f"cannot write {path}: {exc.strerror}") from exc
    return text


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise CliError("E_IO", f"no such file: {path}") from exc
    except OSError as exc:
        raise CliError("E_IO", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CliError("E_SCHEMA", f"{path} is not valid JSON: {exc.msg} at line {exc.lineno}") from exc


def _schema(fn, data, what):
    try:
        return fn(data)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CliError("E_SCHEMA", f"malformed {what}: {exc}") from exc


def _dims(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise CliError("E_USAGE", f"--dims expects RxC, got {text!r}")


def _hardware(args) -> HardwareGraph:
    if getattr(args, "hw", None):
        return _schema(HardwareGraph.from_json, _read_json(args.hw), "hardware graph")
    if getattr(args, "family", None):
        if not args.dims:
            raise CliError("E_USAGE", "--family needs --dims")
        return generate_hardware(args.family, _dims(args.dims))
    raise CliError("E_USAGE", "give --hw FILE or --family/--dims")


def _noise(args, H):
    if not args.calibration:
        return None
    calib = _schema(CalibrationData.from_json, _read_json(args.calibration), "calibration")
    errs = []
    if args.err_table:
        errs = _schema(lambda d: [ErrEstimate.from_json(e) for e in d], _read_json(args.err_table), "err table")
    return assemble_noise_model(calib, errs, args.keep_top, H)


# -- verbs ------------------------------------------------------------------

def cmd_gen_hw(args):
    H = generate_hardware(args.family, _dims(args.dims))
    emit_report(H.to_json(), "json", args.out)


def _color(args, H):
    G = build_interference_graph(H)
    if args.method == "exact":
        col, cert = exact_coloring(G, args.time_limit)
        return G, col, cert.status.value, list(cert.clique)
    if args.method == "analytic":
        return G, heavy_hex_analytic_coloring(H), Status.FEASIBLE_ONLY.value, []
    if args.method == "dsatur":
        return G, dsatur(G), Status.FEASIBLE_ONLY.value, []
    return G, greedy_randomized_coloring(G, args.runs, args.seed), Status.FEASIBLE_ONLY.value, []


def cmd_color(args):
    H = _hardware(args)
    G, col, status, clique = _color(args, H)
    doc = col.to_json(G)
    doc.update(num_colors=col.num_colors, status=status, clique=[list(G.nodes[k]) for k in clique],
               method=args.method)
    emit_report(doc, "json", args.out)


def cmd_schedule(args):
    H = _hardware(args)
    if args.coloring:
        G = build_interference_graph(H)
        col = _schema(lambda d: Coloring.from_json(d, G), _read_json(args.coloring), "coloring")
        status = "given"
    else:
        G, col, status, _ = _color(args, H)
    sched = schedule_experiments(H, col)
    doc = sched.to_json()
    doc.update(num_batches=len(sched.batches), status=status)
    emit_report(doc, "json", args.out)


def cmd_fit_rb(args):
    data = _read_json(args.curves)

    def parse(d):
        n = int(d.get("n_qubits", 1))
        return n, [(tuple(e["cr_edge"]), int(e["spectator"]), DecayCurve.from_json(e["parallel"]),
                    DecayCurve.from_json(e["isolated"])) for e in d["experiments"]]
    n, exps = _schema(parse, data, "decay-curve bundle")
    errs = []
    for edge, k, par, iso in exps:
        try:
            est = error_rate_ratio(fit_decay(par, n), fit_decay(iso, n), edge, k)
        except (FitError, ValueError) as exc:
            raise CliError("E_SOLVER", f"fit failed for edge {list(edge)} spectator {k}: {exc}") from exc
        errs.append(est.to_json())
    errs.sort(key=lambda e: (e["cr_edge"], e["spectator"]))
    emit_report(errs, "json", args.out)


def _router_cfg(args, **extra):
    return RouterConfig(lam=args.lam, mode=args.mode, time_limit=args.time_limit, dd_pulses=args.dd_pulses,
                        seed=args.seed, **extra)


def cmd_route(args):
    H = _hardware(args)
    circ = _schema(Circuit.from_json, _read_json(args.circuit), "circuit")
    noise = _noise(args, H)
    if args.lam > 0 and noise is None:
        raise CliError("E_USAGE", "--lambda > 0 needs --calibration")
    cfg = _router_cfg(args)
    if args.method == "bestline":
        if noise is None:
            raise CliError("E_USAGE", "the best-line layout needs --calibration")
        res = route_best_line(circ, H, noise, cfg)
    else:
        res = route(circ, H, noise, cfg)
    emit_report(res.routed.to_json(), "json", args.out)
    report = res.to_json()
    report["measurement_map"] = {str(q): v for q, v in sorted(res.final_layout.items())}
    emit_report(report, "json", args.report)


def _p_range(text: str) -> list[int]:
    try:
        if ".." in text:
            a, b = text.split("..")
            ps = list(range(int(a), int(b) + 1))
        else:
            ps = [int(v) for v in text.split(",")]
    except ValueError:
        raise CliError("E_USAGE", f"--p expects A..B or a comma list, got {text!r}")
    if not ps or min(ps) < 1:
        raise CliError("E_USAGE", "--p values must be >= 1")
    return ps


def _parse_instance(name: str):
    for prefix, kind in (("line", "line"), ("3reg", "three_regular"), ("complete", "complete")):
        if name.startswith(prefix) and name[len(prefix):].isdigit():
            return kind, int(name[len(prefix):])
    raise CliError("E_USAGE", f"unknown instance {name!r} (use lineN, 3regN or completeN)")


def bench(instances, methods, ps, H, noise, cfg_factory, seed=0):
    """Rows of the instance x method x p sweep, in input order."""
    rows = []
    for name in instances:
        kind, n = _parse_instance(name)
        inst = generate_maxcut_instance(kind, n, seed)
        params, prev = {}, None
        for p in range(1, max(ps) + 1):
            prev = optimize_parameters(inst, p, seed=seed, warm_start=prev)
            params[p] = prev
        ideal = {p: qaoa_expectation(inst, params[p])["ratio"] for p in ps}
        uni = uniform_ratio(inst)
        circ = build_qaoa_circuit(inst, params[1])
        for method in methods:
            if method == "tap":
                res1 = route(circ, H, noise, cfg_factory(lam=0.0), method="tap")
            elif method == "natap":
                res1 = route(circ, H, noise, cfg_factory(), method="natap")
            elif method == "bestline":
                res1 = route_best_line(circ, H, noise, cfg_factory())
            else:
                raise CliError("E_USAGE", f"unknown method {method!r}")
            for p in ps:
                res = mirrored_result(res1, p, params[p])
                rows.append({
                    "instance": inst.name, "method": method, "p": p,
                    "swap_count": res.swap_count, "cx_count": res.cx_count, "depth": res.depth,
                    "c_swap": res.c_swap, "c_noise": res.c_noise, "c_noise_total": res.c_noise_total,
                    "ideal_ratio": ideal[p], "uniform_ratio": uni,
                    "predicted_ratio": predict_noisy_ratio(res, noise, min(ideal[p], 1.0), uni),
                    "status": res.solver_stats.get("status", ""),
                })
    return rows


def cmd_qaoa_bench(args):
    if args.hw:
        H = _hardware(args)
        noise = _noise(args, H)
        if noise is None:
            raise CliError("E_USAGE", "--hw needs --calibration for the noise-aware methods")
    else:
        H, noise = falcon27_noise(args.keep_top)
    instances = [s for s in args.instance.split(",") if s]
    methods = [s for s in args.methods.split(",") if s]
    ps = _p_range(args.p)

    def factory(**kw):
        cfg = _router_cfg(args)
        for k, v in kw.items():
            setattr(cfg, k, v)
        return cfg
    rows = bench(instances, methods, ps, H, noise, factory, args.seed)
    emit_report(rows, args.format, args.out, BENCH_COLUMNS if args.format == "csv" else None)


def _verify_doc(doc, args) -> list[str]:
    if isinstance(doc, list):
        errs = _schema(lambda d: [ErrEstimate.from_json(e) for e in d], doc, "err table")
        problems = [f"entry {n}: negative ratio" for n, e in enumerate(errs) if e.ratio < 0]
        seen = set()
        for e in errs:
            key = (tuple(sorted(e.cr_edge)), e.spectator)
            if key in seen:
                problems.append(f"duplicate entry for edge {list(key[0])} spectator {e.spectator}")
            seen.add(key)
        return problems
    if "batches" in doc:
        sched = _schema(ExperimentSchedule.from_json, doc, "schedule")
        return verify_schedule(_hardware(args), sched)
    if "colors" in doc:
        H = _hardware(args)
        G = build_interference_graph(H)
        col = _schema(lambda d: Coloring.from_json(d, G), doc, "coloring")
        problems = [] if is_proper(G, col) else ["coloring is not proper"]
        if "num_colors" in doc and doc["num_colors"] != col.num_colors:
            problems.append("num_colors does not match the coloring")
        return problems
    if "gates" in doc:
        circ = _schema(Circuit.from_json, doc, "circuit")
        if getattr(args, "hw", None) or getattr(args, "family", None):
            return list(validate_routed(circ, _hardware(args)).violations)
        return []
    if "num_vertices" in doc and "edges" in doc:
        H = _schema(HardwareGraph.from_json, doc, "hardware graph")
        return [] if H.is_connected() else ["hardware graph is not connected"]
    if "qubits" in doc and "edges" in doc:
        _schema(CalibrationData.from_json, doc, "calibration")
        return []
    if "allocations" in doc:
        problems = []
        allocs = doc["allocations"]
        if allocs and any(sorted(a) != sorted(allocs[0]) for a in allocs):
            problems.append("occupied set changes between layers")
        if any(len(set(a)) != len(a) for a in allocs):
            problems.append("two circuit qubits share a hardware qubit")
        if doc.get("swap_count") != sum(len(s) for s in doc.get("swaps", [])):
            problems.append("swap_count does not match the swap lists")
        return problems
    raise CliError("E_SCHEMA", "unrecognised artifact")


def cmd_verify(args):
    problems = _verify_doc(_read_json(args.artifact), args)
    if problems:
        raise CliError("E_VERIFY", f"{len(problems)} problem(s): {problems[0]}")
    print(f"ok {args.artifact}")


# -- parser -----------------------------------------------------------------

def _add_hw(p, required=False):
    p.add_argument("--hw", help="hardware graph JSON")
    p.add_argument("--family", choices=[f.value for f in Family if f is not Family.CUSTOM])
    p.add_argument("--dims", help="RxC")


def _add_routing(p):
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--mode", choices=[m.value for m in LinearizationMode], default="strengthened")
    p.add_argument("--time-limit", type=float, default=900.0)
    p.add_argument("--dd-pulses", type=int, default=0)
    p.add_argument("--calibration")
    p.add_argument("--err-table")
    p.add_argument("--keep-top", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="natap", description="Noise-aware qubit routing toolkit.")
    sub = ap.add_subparsers(dest="verb", required=True)

    def verb(name, fn, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(fn=fn)
        p.add_argument("--config", help="JSON object of flag values (flag names with underscores)")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = verb("gen-hw", cmd_gen_hw, "write a generated hardware graph")
    p.add_argument("--family", required=True, choices=[f.value for f in Family if f is not Family.CUSTOM])
    p.add_argument("--dims", required=True)
    p.add_argument("--out", required=True)

    for name, fn in (("color", cmd_color), ("schedule", cmd_schedule)):
        p = verb(name, fn, f"{name} the crosstalk-experiment interference graph")
        _add_hw(p)
        p.add_argument("--method", choices=["exact", "analytic", "dsatur", "greedy"], default="exact")
        p.add_argument("--runs", type=int, default=1000)
        p.add_argument("--time-limit", type=float, default=60.0)
        p.add_argument("--out", required=True)
        if name == "schedule":
            p.add_argument("--coloring", help="use this coloring JSON instead of computing one")

    p = verb("fit-rb", cmd_fit_rb, "fit decay curves and write an ERR table")
    p.add_argument("--curves", required=True)
    p.add_argument("--out", required=True)

    p = verb("route", cmd_route, "route a circuit onto hardware")
    _add_hw(p)
    _add_routing(p)
    p.add_argument("--circuit", required=True)
    p.add_argument("--method", choices=["tap", "bestline"], default="tap",
                   help="tap uses --lambda; bestline fixes the layout to the best line")
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)

    p = verb("qaoa-bench", cmd_qaoa_bench, "QAOA MaxCut sweep over instances, methods and depths")
    _add_hw(p)
    _add_routing(p)
    p.add_argument("--instance", required=True, help="comma list, e.g. line14,3reg10,complete5")
    p.add_argument("--p", default="1")
    p.add_argument("--methods", default="tap,natap,bestline")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", required=True)

    p = verb("verify", cmd_verify, "re-check an artifact's invariants")
    _add_hw(p)
    p.add_argument("artifact")
    return ap


def _config_path(argv):
    for k, a in enumerate(argv):
        if a == "--config" and k + 1 < len(argv):
            return argv[k + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def _apply_config(ap, argv):
    """Parse ``argv`` with defaults taken from the ``--config`` JSON; explicit flags still win."""
    path = _config_path(argv)
    verbs = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction)).choices
    if path is not None and argv and argv[0] in verbs:
        cfg = _read_json(path)
        if not isinstance(cfg, dict):
            raise CliError("E_SCHEMA", "--config must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        if "lambda" in cfg:
            cfg["lam"] = cfg.pop("lambda")
        sub = verbs[argv[0]]
        known = {a.dest for a in sub._actions} - {"help", "config"}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise CliError("E_USAGE", f"--config has unknown keys: {', '.join(unknown)}")
        for action in sub._actions:
            if action.dest in cfg:
                action.required = False
        sub.set_defaults(**cfg)
    return ap.parse_args(argv)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("E_USAGE", message)


def main(argv=None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(ap, argv)
        args.fn(args)
    except CliError as exc:
        print(f"error {exc.code}: {exc}", file=sys.stderr)
        return EXIT[exc.code]
    except (GraphError, ColoringError, CircuitError, CalibrationError, TapError) as exc:
        code = "E_GUARD" if "limited to" in str(exc) else "E_SCHEMA"
        print(f"error {code}: {exc}", file=sys.stderr)
        return EXIT[code]
    except (RoutingError, QaoaError, FitError) as exc:
        code = "E_GUARD" if "limited to" in str(exc) else "E_SOLVER"
        print(f"error {code}: {exc}", file=sys.stderr)
        return EXIT[code]
    return 0


if __name__ == "__main__":
    sys.exit(main())
