"""Command-line experiment runner.

Every subcommand writes a CSV series and a JSON summary. With ``--out
PREFIX`` they go to ``PREFIX.csv`` and ``PREFIX.json``; otherwise the CSV
goes to stdout followed by a ``# summary:`` line. Each output starts with
a header block (tool version, config echo, master seed), and floats are
written with 17 significant digits, so a re-run with the same header
reproduces the file byte for byte.

Exit codes: 0 success, 1 validation error, 2 enumeration budget exceeded.
``check`` exits 1 when any property fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import __version__, analysis, lattice, numfield, sim
from .exceptions import EnumerationBudgetExceeded, StcDmtError, ValidationError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def parse_grid(text: str) -> list[float]:
    """``lo:hi:step`` (inclusive of ``hi`` up to rounding) or a comma list."""
    try:
        if ":" in text:
            lo, hi, step = (float(v) for v in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            count = int(math.floor((hi - lo) / step + 1e-9)) + 1
            return [round(lo + i * step, 12) for i in range(count)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"malformed grid {text!r}; expected lo:hi:step or a comma list") from None


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


class Output:
    def __init__(self, command: str, config: dict, seed):
        self.header = {"tool": "stc-dmt", "version": __version__, "command": command,
                       "config": config, "master_seed": seed}
        self.columns: list[str] = []
        self.rows: list[list] = []
        self.summary: dict = {}

    def header_lines(self) -> str:
        return "".join(f"# {k}: {json.dumps(v)}\n" for k, v in self.header.items())

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(self.header_lines())
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows([_fmt(v) for v in row] for row in self.rows)
        return buf.getvalue()

    def json_text(self) -> str:
        return json.dumps({"header": self.header, "summary": self.summary}, indent=2, default=_json_default) + "\n"

    def emit(self, prefix: str | None, stream):
        if prefix:
            with open(prefix + ".csv", "w", newline="\n", encoding="utf-8") as fh:
                fh.write(self.csv_text())
            with open(prefix + ".json", "w", newline="\n", encoding="utf-8") as fh:
                fh.write(self.json_text())
        else:
            stream.write(self.csv_text())
            stream.write("# summary: " + json.dumps(self.summary, default=_json_default) + "\n")


def _json_default(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v)!r}")


def _field_arg(p):
    p.add_argument("--field", default="Q(zeta8)", help="catalog id or path to a JSON field spec")


def _sim_args(p, default_grid="10:22:2"):
    p.add_argument("--snr", default=default_grid, help="SNR grid in dB, lo:hi:step")
    p.add_argument("--nr", type=int, default=2)
    p.add_argument("--r", type=float, default=0.0)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target-errors", type=int, default=None)
    p.add_argument("--max-trials", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--window", default=None, help="slope window lo:hi in dB (default: whole grid)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stc-dmt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--out", default=None, help="output prefix for .csv and .json files")
    parser.add_argument("--budget", type=int, default=None, help="enumeration cap (else STC_DMT_BUDGET or 1e7)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", help="lattice point counts and the k_hat fit")
    _field_arg(p)
    p.add_argument("--lattice", choices=["field", "alamouti"], default="field")
    p.add_argument("--radii", default="4:24:4")

    p = sub.add_parser("units", help="unit counts in balls and their log-growth fit")
    _field_arg(p)
    p.add_argument("--radii", default="4,8,16,32,64,128,256")

    p = sub.add_parser("zeta", help="restricted zeta sums against their comparator")
    _field_arg(p)
    p.add_argument("--radii", default="5,10,20,30")
    p.add_argument("--s", type=float, default=2.0)

    p = sub.add_parser("elemsum", help="full element sums with class decomposition")
    _field_arg(p)
    p.add_argument("--radii", default="2,4,8,16,32")
    p.add_argument("--nr", type=int, default=1)

    p = sub.add_parser("bound", help="Alamouti box-code union bound over an SNR grid")
    p.add_argument("--snr", default="10:22:2")
    p.add_argument("--nr", type=int, default=2)
    p.add_argument("--r", type=float, default=0.0)

    p = sub.add_parser("curves", help="closed-form DMT curves")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--nr", type=int, default=2)
    p.add_argument("--K", type=int, default=1)

    p = sub.add_parser("pep", help="pairwise error probability for X = I, X' = 0")
    p.add_argument("--n", type=int, default=2)
    _sim_args(p, "12:24:2")

    p = sub.add_parser("simulate", help="single-user block error rate")
    p.add_argument("--scheme", choices=["alamouti-box", "alamouti-spherical", "field"], default="alamouti-box")
    _field_arg(p)
    p.add_argument("--base-radius", type=float, default=2.0)
    p.add_argument("--no-drop-nt", action="store_true", help="keep the 1/n_t SNR normalization")
    _sim_args(p)

    p = sub.add_parser("mac", help="multiple-access joint ML error rates")
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--base-radius", type=float, default=math.sqrt(2.0))
    _sim_args(p)

    p = sub.add_parser("check", help="run the invariant suite")
    p.add_argument("--field-spec", action="append", default=[], help="extra JSON field spec to validate")
    p.add_argument("--fuzz", type=int, default=10_000)
    p.add_argument("--radius", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}


def _window(args, grid):
    if args.window is None:
        return grid[0], grid[-1]
    parts = args.window.split(":")
    if len(parts) != 2:
        raise ValidationError("--window expects lo:hi")
    return float(parts[0]), float(parts[1])


def _slope_summary(curve, window) -> dict:
    try:
        est = sim.dmt_slope(curve, window)
    except ValidationError as exc:
        return {"d_hat": None, "error": str(exc)}
    return {"d_hat": est.d_hat, "stderr": est.stderr, "window": list(est.window), "points": est.points}


def _curve_rows(out: Output, curve, tag=None):
    for e in curve.entries:
        row = [e.rho_db, e.code_size, e.errors, e.trials, e.p_e]
        out.rows.append(([tag] if tag is not None else []) + row)


def cmd_count(args, out: Output):
    radii = parse_grid(args.radii)
    if args.lattice == "alamouti":
        lat = lattice.alamouti_lattice()
    else:
        lat = numfield.resolve_field(args.field).lattice
    fit = lattice.count_scaling_fit(lat, radii, args.budget)
    out.columns = ["R", "count"]
    out.rows = [[r, int(c)] for r, c in zip(fit.radii, fit.counts)]
    out.summary = {"k_hat": fit.k_hat, "c_hat": fit.c_hat, "rank": lat.rank}


def cmd_units(args, out: Output):
    field = numfield.resolve_field(args.field)
    radii = parse_grid(args.radii)
    counts = [len(numfield.enumerate_units_ball(field, r, args.budget)) for r in radii]
    out.columns = ["R", "units"]
    out.rows = [[r, c] for r, c in zip(radii, counts)]
    fit = analysis.polylog_fit(counts, radii, field.n - 1)
    out.summary = {"M_hat": fit.M_hat, "residual": fit.residual, "power": fit.power,
                   "power_law_exponent": analysis.power_law_exponent(counts, radii)}


def cmd_zeta(args, out: Output):
    field = numfield.resolve_field(args.field)
    out.columns = ["R", "value", "bound", "classes"]
    violations = 0
    for r in parse_grid(args.radii):
        rep = analysis.restricted_zeta_sum(field, r, args.s, args.budget)
        out.rows.append([r, rep.value, rep.bound_value, rep.term_count])
        violations += not rep.within_bound
    out.summary = {"violations": violations, "bound_kind": rep.bound_kind}


def cmd_elemsum(args, out: Output):
    field = numfield.resolve_field(args.field)
    radii = parse_grid(args.radii)
    reps = [analysis.full_element_sum(field, r, args.nr, budget=args.budget) for r in radii]
    out.columns = ["R", "value", "decomposition", "max_class_size", "class_count", "elements"]
    for rep in reps:
        d = rep.details
        out.rows.append([rep.radius, rep.value, d["decomposition"], d["max_class_size"], d["class_count"], rep.term_count])
    power = 3 * field.n - 1
    summary = {"power": power}
    if len(radii) >= 3 and min(radii) > 1:
        fit = analysis.polylog_fit([r.value for r in reps], radii, power)
        afit = analysis.polylog_fit([r.details["max_class_size"] for r in reps], radii, max(field.n - 1, 1e-12))
        summary.update({"M_hat": fit.M_hat, "residual": fit.residual,
                        "class_size_M_hat": afit.M_hat, "class_size_residual": afit.residual})
    out.summary = summary


def cmd_bound(args, out: Output):
    out.columns = ["rho_db", "union_bound"]
    for db in parse_grid(args.snr):
        out.rows.append([db, analysis.alamouti_union_bound(10 ** (db / 10), args.r, args.nr)])
    out.summary = {"constant": 4.0 ** (2 * args.nr), "n_r": args.nr, "r": args.r}


def cmd_curves(args, out: Output):
    out.columns = ["curve", "r", "d"]
    curves = [("upper_bound", analysis.dmt_upper_bound_curve(args.n, args.nr))]
    if args.n == 2:
        curves.append(("alamouti", analysis.alamouti_dmt_curve(args.nr)))
    joint, per_user = analysis.mac_dmt_curves(args.n, args.nr, args.K)
    curves += [("mac_joint", joint), ("mac_per_user", per_user)]
    for name, c in curves:
        for r, d in c.points:
            out.rows.append([name, r, d])
    out.summary = {name: [list(p) for p in c.points] for name, c in curves}


def cmd_pep(args, out: Output):
    grid = parse_grid(args.snr)
    X = np.eye(args.n, dtype=complex)
    curve = sim.estimate_pairwise_error(X, np.zeros_like(X), args.nr, grid, args.trials, args.seed,
                                        target_errors=args.target_errors, max_trials=args.max_trials,
                                        workers=args.workers)
    out.columns = ["rho_db", "code_size", "errors", "trials", "p_e"]
    _curve_rows(out, curve)
    out.summary = {"slope": _slope_summary(curve, _window(args, grid)), "target_d": args.n * args.nr}


def _config_from(args, grid, n_t=2, T=2):
    return sim.ChannelConfig(n_t, args.nr, T, tuple(grid), r=args.r, trials_per_snr=args.trials,
                             master_seed=args.seed, target_errors=args.target_errors,
                             max_trials=args.max_trials, workers=args.workers,
                             drop_nt_normalization=not getattr(args, "no_drop_nt", False))


def cmd_simulate(args, out: Output):
    grid = parse_grid(args.snr)
    if args.scheme == "alamouti-box":
        scheme = sim.AlamoutiBoxScheme(args.budget)
        n_t = T = 2
    elif args.scheme == "alamouti-spherical":
        scheme = sim.SphericalScheme(lattice.alamouti_lattice(), args.base_radius, args.budget, "alamouti-spherical")
        n_t = T = 2
    else:
        field = numfield.resolve_field(args.field)
        scheme = sim.SphericalScheme(field.lattice, args.base_radius, args.budget, field.id)
        n_t = T = field.n
    curve = sim.estimate_error_rate(scheme, _config_from(args, grid, n_t, T))
    out.columns = ["rho_db", "code_size", "errors", "trials", "p_e"]
    _curve_rows(out, curve)
    out.summary = {"slope": _slope_summary(curve, _window(args, grid))}


def cmd_mac(args, out: Output):
    grid = parse_grid(args.snr)
    scheme = sim.SphericalScheme(lattice.alamouti_lattice(), args.base_radius, args.budget, "alamouti-spherical")
    res = sim.mac_simulate([scheme] * args.K, _config_from(args, grid))
    out.columns = ["curve", "rho_db", "code_size", "errors", "trials", "p_e"]
    _curve_rows(out, res.joint, "joint")
    for k, c in enumerate(res.per_user):
        _curve_rows(out, c, f"user{k + 1}")
    window = _window(args, grid)
    out.summary = {"joint_slope": _slope_summary(res.joint, window),
                   "per_user_slopes": [_slope_summary(c, window) for c in res.per_user]}


def run_checks(fuzz: int = 10_000, radius: float = 10.0, seed: int = 0, extra_specs: Sequence[str] = ()) -> list[tuple[str, bool, str]]:
    """Run the invariant suite; returns (property, passed, detail) triples."""
    results = []

    def record(name, fn):
        try:
            ok, detail = fn()
        except StcDmtError as exc:
            ok, detail = False, str(exc)
        results.append((name, bool(ok), detail))

    for spec in list(numfield.CATALOG_IDS) + list(extra_specs):
        record(f"field spec {spec}", lambda spec=spec: (numfield.resolve_field(spec) is not None, "valid"))

    rng = np.random.default_rng(seed)

    def det_sum():
        bad = 0
        for _ in range(fuzz):
            blocks = rng.normal(size=(2, 2, 2)) + 1j * rng.normal(size=(2, 2, 2))
            bad += not analysis.det_sum_inequality_check(blocks)[2]
        return bad == 0, f"{bad} violations in {fuzz}"

    def spectra():
        bad = 0
        for _ in range(fuzz):
            a = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
            bad += not analysis.singular_value_match(a)
        return bad == 0, f"{bad} violations in {fuzz}"

    def alamouti_det():
        xs = rng.integers(-10**6, 10**6, size=(1000, 4))
        bad = sum(analysis.alamouti_determinant_exact(x) != (int(np.sum(x.astype(object) ** 2)), 0) for x in xs)
        return bad == 0, f"{bad} violations in 1000"

    record("determinant-sum inequality", det_sum)
    record("singular-value spectrum match", spectra)
    record("Alamouti determinant identity", alamouti_det)
    for fid in numfield.CATALOG_IDS:
        def chain(fid=fid):
            rep = analysis.am_gm_chain_check(numfield.catalog_field(fid), radius)
            bad = rep["identity_violations"] + rep["inequality_violations"] + rep["min_det_violations"]
            return bad == 0, f"{bad} violations in {rep['elements']} elements"
        record(f"AM-GM chain {fid} R={radius:g}", chain)

    def coincide():
        rs = np.linspace(0, 1, 101)
        ok = all(np.array_equal(analysis.alamouti_dmt_curve(nr).d(rs), analysis.dmt_upper_bound_curve(2, nr).d(rs))
                 for nr in (1, 2, 3, 4))
        return ok, "n_r = 1..4"
    record("Alamouti curve meets the upper bound", coincide)
    return results


def cmd_check(args, out: Output):
    results = run_checks(args.fuzz, args.radius, args.seed, args.field_spec)
    out.columns = ["property", "passed", "detail"]
    out.rows = [[name, ok, detail] for name, ok, detail in results]
    out.summary = {"passed": sum(ok for _, ok, _ in results), "failed": sum(not ok for _, ok, _ in results)}
    return 0 if out.summary["failed"] == 0 else 1


COMMANDS = {
    "count": cmd_count, "units": cmd_units, "zeta": cmd_zeta, "elemsum": cmd_elemsum,
    "bound": cmd_bound, "curves": cmd_curves, "pep": cmd_pep, "simulate": cmd_simulate,
    "mac": cmd_mac, "check": cmd_check,
}


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        out = Output(args.command, _config(args), getattr(args, "seed", None))
        status = COMMANDS[args.command](args, out) or 0
        out.emit(args.out, stdout)
        return status
    except EnumerationBudgetExceeded as exc:
        stderr.write(f"error: {exc}\n")
        return 2
    except (ValidationError, OSError, ValueError) as exc:
        stderr.write(f"error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())
