"""
``closedorbits`` command line tool.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on bad
usage or configuration.  Values are taken from command line flags first,
then from a ``key = value`` config file (``--config``), then from built-in
defaults.  Floats in CSV and JSON output carry 17 significant digits.
"""
from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import operator
import sys
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import checks
from .errors import ContractError, DomainError, IntegrationError, PeriodNotFoundError, UnsupportedOperation
from .flow import IntegratorConfig

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = ""
    tol: Optional[float] = None
    samples: Optional[int] = None
    seed: int = 0
    out: Optional[str] = None
    format: Optional[str] = None
    grid: str = "200x400"
    u_values: str = "0.5,0.25,0.1,0.05"
    s_interval: str = "0.5:0.05"
    quad_nodes: int = 64
    gamma_range: str = "-2:2"
    broken_field: bool = False
    allow_bad_set: bool = False
    refine: bool = False
    as_gate: bool = False
    metric: str = "perturbed"
    mesh_out: Optional[str] = None
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    close_tol: float = 1e-6
    max_time: float = 1e4
    method: str = "rk45"

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(method=self.method, abs_tol=self.abs_tol, rel_tol=self.rel_tol,
                                close_tol=self.close_tol, max_time=self.max_time)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_BOOL_KEYS = {"broken_field", "allow_bad_set", "refine", "as_gate"}

# ---------------------------------------------------------------------------
# parsing helpers

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_number(text: str) -> float:
    """Evaluate a real constant such as ``0.5``, ``pi/2`` or ``2*pi/3``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        raise UsageError(f"not a number: {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise UsageError(f"not a number: {text!r}") from exc


def parse_list(text: str):
    text = text.strip()
    if not text:
        return []
    return [parse_number(t) for t in text.split(",")]


def parse_pair(text: str, sep: str = ":"):
    parts = text.split(sep)
    if len(parts) != 2:
        raise UsageError(f"expected two values separated by {sep!r}, got {text!r}")
    return parse_number(parts[0]), parse_number(parts[1])


def parse_grid(text: str):
    try:
        ns, nt = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise UsageError(f"grid must look like 200x400, got {text!r}") from exc
    if ns < 3 or nt < 4:
        raise UsageError("grid needs at least 3 s-lines and 4 theta points")
    return ns, nt


def parse_int_range(text: str):
    lo, hi = parse_pair(text)
    if lo != int(lo) or hi != int(hi):
        raise UsageError(f"lattice range must be integers, got {text!r}")
    return int(lo), int(hi)


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; keys may use ``-`` or ``_``."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES or key == "command":
            raise UsageError(f"{path}:{num}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(key, value):
    if key in _BOOL_KEYS:
        low = str(value).lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{key} must be a boolean, got {value!r}")
    default = getattr(RunConfig(), key)
    try:
        if key in ("samples", "seed", "quad_nodes"):
            return int(value)
        if key in ("tol", "abs_tol", "rel_tol", "close_tol", "max_time") or isinstance(default, float):
            return parse_number(str(value))
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {value!r}") from exc
    return str(value)


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    """Merge flags over the config file over the defaults."""
    cfg = RunConfig(command=ns.command)
    file_values = read_config(ns.config) if getattr(ns, "config", None) else {}
    for key, value in file_values.items():
        setattr(cfg, key, _coerce(key, value))
    for key in _FIELD_TYPES:
        if key == "command":
            continue
        value = getattr(ns, key, None)
        if value is None or (key in _BOOL_KEYS and value is False):
            continue
        setattr(cfg, key, _coerce(key, value))
    if cfg.format not in (None, "csv", "json"):
        raise UsageError(f"--format must be csv or json, got {cfg.format!r}")
    return cfg


# ---------------------------------------------------------------------------
# output

def fmt_float(x) -> str:
    return format(float(x), ".17g")


def to_json(obj, indent: int = 0, step: int = 2) -> str:
    """JSON with floats written at 17 significant digits; non-finite floats become null."""
    pad, inner = " " * indent, " " * (indent + step)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent + step)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{inner}{to_json(v, indent + step)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return "" if v is None else str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


CHECK_COLUMNS = ("id", "description", "measured", "relation", "tolerance", "passed", "anchor")


def suite_document(suites, cfg: RunConfig) -> dict:
    doc = {"command": cfg.command, "seed": cfg.seed, "passed": all(s.passed for s in suites), "checks": {}}
    for s in suites:
        for c in s.checks:
            doc["checks"][c.id] = {"suite": s.name, "description": c.description, "measured": c.measured,
                                   "relation": c.relation, "tolerance": c.tolerance, "passed": c.passed,
                                   "anchor": c.anchor}
    data = {s.name: {k: v for k, v in s.data.items() if k != "mesh"} for s in suites if s.data}
    notes = {s.name: s.notes for s in suites if s.notes}
    if data:
        doc["data"] = data
    if notes:
        doc["notes"] = notes
    return doc


def render(suites, cfg: RunConfig, fmt: str) -> str:
    if fmt == "json":
        return to_json(suite_document(suites, cfg)) + "\n"
    if cfg.command == "orbit-scan":
        rows = suites[0].data.get("rows", [])
        return to_csv(checks.SCAN_COLUMNS, [[r[k] for k in checks.SCAN_COLUMNS] for r in rows])
    return to_csv(CHECK_COLUMNS, [[getattr(c, k) for k in CHECK_COLUMNS] for s in suites for c in s.checks])


def emit(suites, cfg: RunConfig, stdout) -> None:
    fmt = cfg.format
    if cfg.out:
        fmt = fmt or ("json" if cfg.out.endswith(".json") else "csv")
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(render(suites, cfg, fmt))
    elif fmt:
        stdout.write(render(suites, cfg, fmt))
        return
    for s in suites:
        for c in s.checks:
            print(c.line(), file=stdout)
        for n in s.notes:
            print(f"  note: {n}", file=stdout)
    verdict = "all checks passed" if all(s.passed for s in suites) else "some checks FAILED"
    print(f"{cfg.command}: {verdict}", file=stdout)


# ---------------------------------------------------------------------------
# commands

def cmd_forms_verify(cfg: RunConfig):
    return [checks.forms_suite(samples=cfg.samples or 10_000, seed=cfg.seed, tol=cfg.tol)]


def cmd_descent_verify(cfg: RunConfig):
    lo, hi = parse_int_range(cfg.gamma_range)
    if lo > hi:
        raise UsageError(f"empty lattice range {cfg.gamma_range}")
    return [checks.descent_suite(lo, hi, samples=cfg.samples or 100, seed=cfg.seed, tol=cfg.tol,
                                 broken=cfg.broken_field)]


def cmd_orbit_scan(cfg: RunConfig):
    return [checks.orbit_scan_suite(parse_list(cfg.u_values), cfg.integrator(), cfg.allow_bad_set, cfg.tol)]


def cmd_flux_scan(cfg: RunConfig):
    s0, s1 = parse_pair(cfg.s_interval)
    suite = checks.flux_suite(s0, s1, parse_grid(cfg.grid), cfg.refine, cfg.integrator(), cfg.tol)
    if cfg.mesh_out:
        rows = checks.mesh_rows(suite.data["mesh"])
        with open(cfg.mesh_out, "w", encoding="utf-8", newline="") as fh:
            fh.write(to_csv(("s", "theta", "x", "y", "z", "t", "u"), rows.tolist()))
    return [suite]


def cmd_adapted_check(cfg: RunConfig):
    return [checks.adapted_suite(samples=cfg.samples or 200, seed=cfg.seed, tol=cfg.tol or 1e-8,
                                 as_gate=cfg.as_gate)]


def cmd_wadsley_demo(cfg: RunConfig):
    if cfg.quad_nodes < 1:
        raise UsageError("--quad-nodes must be positive")
    return [checks.wadsley_suite(N=cfg.quad_nodes, metric=cfg.metric, samples=cfg.samples or 100,
                                 seed=cfg.seed, tol=cfg.tol)]


def cmd_report(cfg: RunConfig):
    s0, s1 = parse_pair(cfg.s_interval)
    u_values = parse_list(cfg.u_values)
    return [
        checks.forms_suite(samples=cfg.samples or 10_000, seed=cfg.seed, tol=cfg.tol),
        checks.descent_suite(*parse_int_range(cfg.gamma_range), seed=cfg.seed, tol=cfg.tol),
        checks.orbit_scan_suite(u_values, cfg.integrator(), cfg.allow_bad_set, cfg.tol),
        checks.flux_suite(s0, s1, parse_grid(cfg.grid), cfg.refine, cfg.integrator(), cfg.tol),
        checks.adapted_suite(seed=cfg.seed),
        checks.wadsley_suite(N=cfg.quad_nodes, metric=cfg.metric, seed=cfg.seed, tol=cfg.tol),
    ]


COMMANDS = {
    "forms-verify": (cmd_forms_verify, "beta(X) = 1, (d beta)^2 = 0, d i_X mu = 0 and calculus identities"),
    "descent-verify": (cmd_descent_verify, "lattice invariance of X, beta and mu"),
    "orbit-scan": (cmd_orbit_scan, "periods and lengths of closed orbits over a list of u"),
    "flux-scan": (cmd_flux_scan, "flux of d beta through a cylinder of closed leaves"),
    "adapted-check": (cmd_adapted_check, "necessary-condition test for strongly adapted one-forms"),
    "wadsley-demo": (cmd_wadsley_demo, "metric averaging and Euler metric pipeline on S^3"),
    "report": (cmd_report, "every suite, aggregated into one document"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", help="replace the tolerance of every upper-bound check")
    common.add_argument("--samples", help="number of random sample points")
    common.add_argument("--seed", help="seed of the SplitMix64 sample stream (default 0)")
    common.add_argument("--out", help="write CSV/JSON output to this path")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--grid", help="cylinder grid NsxNtheta (default 200x400)")
    common.add_argument("--u-values", dest="u_values", help="comma-separated u list, e.g. 0.5,pi/2")
    common.add_argument("--s-interval", dest="s_interval", help="leaf parameter interval s0:s1 (default 0.5:0.05)")
    common.add_argument("--quad-nodes", dest="quad_nodes", help="nodes of the circle average (default 64)")
    common.add_argument("--abs-tol", dest="abs_tol")
    common.add_argument("--rel-tol", dest="rel_tol")
    common.add_argument("--close-tol", dest="close_tol")
    common.add_argument("--max-time", dest="max_time")
    common.add_argument("--method", choices=("rk45", "dop853"))

    parser = argparse.ArgumentParser(prog="closedorbits", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=helptext)
        if name in ("descent-verify", "report"):
            p.add_argument("--gamma-range", dest="gamma_range", help="integer range LO:HI for a, b, c (default -2:2; write --gamma-range=-1:1 for negative LO)")
        if name == "descent-verify":
            p.add_argument("--broken-field", dest="broken_field", action="store_true",
                           help="use x d/dz instead of X (negative control)")
        if name in ("orbit-scan", "report"):
            p.add_argument("--allow-bad-set", dest="allow_bad_set", action="store_true",
                           help="allow u = 0 mod pi in the u list")
        if name in ("flux-scan", "report"):
            p.add_argument("--refine", action="store_true", help="also measure on a grid with halved steps")
        if name == "flux-scan":
            p.add_argument("--mesh-out", dest="mesh_out", help="dump the mesh as CSV (s, theta, x, y, z, t, u)")
        if name == "adapted-check":
            p.add_argument("--as-gate", dest="as_gate", action="store_true",
                           help="exit 1 when a probed form fails the necessary condition")
        if name in ("wadsley-demo", "report"):
            p.add_argument("--metric", choices=("round", "perturbed"), help="starting metric on S^3")
    return parser


def main(argv=None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = resolve_config(ns)
        suites = COMMANDS[cfg.command][0](cfg)
        emit(suites, cfg, stdout)
    except (UsageError, DomainError, ContractError, UnsupportedOperation) as exc:
        print(f"closedorbits {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, PeriodNotFoundError) as exc:
        print(f"closedorbits {ns.command}: integration failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"closedorbits {ns.command}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if all(s.passed for s in suites) else EXIT_FAIL


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
