"""Command-line front end: solve, classify, scan, find, verify, experiment.

Exit codes: 0 success, 2 configuration error, 3 integration failure,
4 bisection did not converge, 5 suite failure or internal error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields

from . import classify as cl
from . import experiments as ex
from . import functionals as fn
from .nonlinearity import NonlinearityError, make_nonlinearity, model_from_dict, validate_model_dict
from .shooting import STEP_FAILURE, IntegrationError, InitialCondition, ProblemParams, integrate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_NONCONVERGENCE = 4
EXIT_INTERNAL = 5

SUITES = ("functionals", "comparison", "lemma-epsilon", "scaling", "shape")
MODEL_CHOICES = ("power-diff", "pure-power", "shifted-power")
DEFAULT_MODEL = {"model": "power-diff", "p": 3.0}


class CliConfigError(ValueError):
    pass


class SuiteFailure(RuntimeError):
    def __init__(self, report):
        super().__init__(f"suite {report['suite']} failed")
        self.report = report


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_PARAM_FIELDS = {f.name for f in fields(ProblemParams)}


@dataclass
class RunConfig:
    """Everything a command needs, validated before any computation.

    Loaded from a JSON file with ``--config`` and then overridden by
    explicit command-line flags.
    """

    model: dict = field(default_factory=lambda: dict(DEFAULT_MODEL))
    params: dict = field(default_factory=dict)
    alpha: float | None = None
    scan: dict | None = None
    bracket: list | None = None
    k: int = 1
    tol: float = 1e-10
    output: dict = field(default_factory=dict)
    format: str = "csv"

    def __post_init__(self):
        try:
            validate_model_dict(self.model)
        except NonlinearityError as exc:
            raise CliConfigError(str(exc)) from None
        extra = set(self.params) - _PARAM_FIELDS
        if extra:
            raise CliConfigError(f"unknown params fields: {sorted(extra)}")
        if self.scan is not None:
            if set(self.scan) != {"lo", "hi", "n"}:
                raise CliConfigError("scan needs exactly lo, hi, n")
            if not self.scan["lo"] < self.scan["hi"] or int(self.scan["n"]) < 1:
                raise CliConfigError("scan needs lo < hi and n >= 1")
        if self.bracket is not None and (len(self.bracket) != 2 or self.bracket[0] == self.bracket[1]):
            raise CliConfigError("bracket needs two distinct values")
        if int(self.k) < 1:
            raise CliConfigError("k must be >= 1")
        if not self.tol > 0:
            raise CliConfigError("tol must be positive")
        extra = set(self.output) - {"out", "phase", "events"}
        if extra:
            raise CliConfigError(f"unknown output fields: {sorted(extra)}")
        if self.format not in ("csv", "json"):
            raise CliConfigError("format must be csv or json")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise CliConfigError("config must be a JSON object")
        extra = set(d) - {f.name for f in fields(cls)}
        if extra:
            raise CliConfigError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)

    def problem_params(self, **defaults):
        data = dict(defaults)
        data.update(self.params)
        try:
            return ProblemParams(**data)
        except (TypeError, ValueError) as exc:
            raise CliConfigError(str(exc)) from None

    def nonlinearity(self):
        try:
            return make_nonlinearity(model_from_dict(self.model))
        except NonlinearityError as exc:
            raise CliConfigError(str(exc)) from None

    def to_dict(self):
        return asdict(self)


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliConfigError(f"{path} is not valid JSON: {exc}") from None


def build_run_config(args):
    """Merge ``--config`` with the command-line flags."""
    data = _read_json(args.config) if getattr(args, "config", None) else {}
    if not isinstance(data, dict):
        raise CliConfigError("config must be a JSON object")
    data = dict(data)
    if args.model is not None or args.p is not None or args.a is not None:
        kind = args.model or data.get("model", DEFAULT_MODEL).get("model", "power-diff")
        if kind not in MODEL_CHOICES:
            raise CliConfigError("--p/--a only apply to the power models")
        spec = {"model": kind, "p": args.p if args.p is not None else 3.0}
        if kind == "shifted-power":
            spec["a"] = args.a if args.a is not None else 0.0
        elif args.a is not None:
            raise CliConfigError("--a only applies to shifted-power")
        data["model"] = spec
    params = dict(data.get("params", {}))
    for flag, name in (("N", "N"), ("r_max", "r_max"), ("rel_tol", "rel_tol"), ("abs_tol", "abs_tol")):
        value = getattr(args, flag, None)
        if value is not None:
            params[name] = value
    data["params"] = params
    for name in ("alpha", "k", "tol"):
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if getattr(args, "lo", None) is not None or getattr(args, "hi", None) is not None:
        scan = dict(data.get("scan") or {})
        scan.update({"lo": args.lo, "hi": args.hi, "n": args.n if args.n is not None else scan.get("n", 50)})
        data["scan"] = scan
    if getattr(args, "bracket", None) is not None:
        data["bracket"] = list(args.bracket)
    output = dict(data.get("output", {}))
    for name in ("out", "phase", "events"):
        value = getattr(args, name, None)
        if value is not None:
            output[name] = value
    data["output"] = output
    if getattr(args, "format", None) is not None:
        data["format"] = args.format
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _emit_json(payload, path=None):
    text = json.dumps(ex._jsonable(payload), indent=1, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_solve(args):
    cfg = build_run_config(args)
    if cfg.alpha is None:
        raise CliConfigError("solve needs --alpha")
    nl = cfg.nonlinearity()
    params = cfg.problem_params()
    traj = integrate(nl, params, InitialCondition(0.0, float(cfg.alpha)))
    if traj.termination == STEP_FAILURE:
        print(f"step failure: {traj.message}", file=sys.stderr)
        return EXIT_INTEGRATION
    if cfg.output.get("out"):
        traj.to_csv(cfg.output["out"])
    if cfg.output.get("phase"):
        fn.phase_curve(traj).to_csv(cfg.output["phase"])
    if cfg.output.get("events"):
        with open(cfg.output["events"], "w", encoding="utf-8") as fh:
            fh.write(traj.events_json() + "\n")
    else:
        print(traj.events_json())
    if math.isclose(float(cfg.alpha), nl.b, rel_tol=0.0, abs_tol=1e-14):
        summary = f"constant solution u = b = {nl.b:.17g}; termination {traj.termination}"
    else:
        u, du = traj.final
        summary = (f"termination {traj.termination} at r = {traj.r_end:.17g}, "
                   f"u = {u:.17g}, u' = {du:.17g}, events {len(traj.events)}")
    print(summary, file=sys.stderr)
    return EXIT_OK


def cmd_classify(args):
    cfg = build_run_config(args)
    if cfg.alpha is None:
        raise CliConfigError("classify needs --alpha")
    nl = cfg.nonlinearity()
    c = cl.classify_alpha(nl, cfg.problem_params(r_max=1e3), float(cfg.alpha))
    if c.termination == STEP_FAILURE:
        print(f"step failure at alpha = {cfg.alpha}", file=sys.stderr)
        return EXIT_INTEGRATION
    if cfg.format == "json":
        _emit_json({"alpha": c.alpha, "verdict": c.label, "n_zeros": c.n_zeros, "zeros": c.zeros,
                    "m1": c.m1, "termination": c.termination})
    else:
        print(c.label)
    return EXIT_OK


def cmd_scan(args):
    cfg = build_run_config(args)
    if cfg.scan is None:
        raise CliConfigError("scan needs --from and --to")
    nl = cfg.nonlinearity()
    lo, hi, n = float(cfg.scan["lo"]), float(cfg.scan["hi"]), int(cfg.scan["n"])
    rows = cl.scan_range(nl, cfg.problem_params(r_max=1e3), lo, hi, n, jobs=args.jobs)
    out = cfg.output.get("out")
    if cfg.format == "json":
        _emit_json([{"alpha": r.alpha, "verdict": r.verdict, "k": r.k, "m1": r.m1} for r in rows], out)
    elif out:
        cl.write_scan_csv(rows, out)
    else:
        cl.write_scan_csv(rows, sys.stdout)
    return EXIT_OK


def _find(nl, params, cfg, jobs):
    if cfg.bracket is not None:
        a, b = map(float, cfg.bracket)
        try:
            return cl.find_boundary(nl, params, a, b, int(cfg.k), cfg.tol)
        except cl.BracketInvalid:
            return cl.find_boundary(nl, params, b, a, int(cfg.k), cfg.tol)
    if cfg.scan is not None:
        return cl.locate_bound_state(nl, params, int(cfg.k), float(cfg.scan["lo"]), float(cfg.scan["hi"]),
                                     int(cfg.scan["n"]), cfg.tol, jobs)
    raise CliConfigError("find needs --bracket or --from/--to")


def cmd_find(args):
    cfg = build_run_config(args)
    nl = cfg.nonlinearity()
    rec = _find(nl, cfg.problem_params(r_max=1e3), cfg, args.jobs)
    _emit_json(rec.to_dict(), cfg.output.get("out"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# property suites
# ---------------------------------------------------------------------------

def _suite_functionals(nl, alphas=(1.6, 2.0, 3.0, 5.0)):
    params = fn.functional_params()
    failures, details = [], []
    for alpha in alphas:
        traj = integrate(nl, params, InitialCondition(0.0, alpha))
        arcs = fn.extract_arcs(traj)
        arc = arcs[0]
        fd, exact = fn.J_prime_at_start(arc)
        reports = [fn.check_J_ode(a) for a in arcs[:2]]
        reports += [fn.check_jr2_ode(a) for a in arcs[:2]]
        reports += [fn.check_I_ode(a) for a in arcs[:2]]
        reports += list(fn.check_W(arc))
        signs = [fn.check_H_increasing(arc), fn.check_J_basics(arc), fn.P_prime_sign(arc)]
        entry = {"alpha": alpha, "J_prime_start": {"fd": fd, "expected": exact},
                 "residuals": [r.to_dict() for r in reports], "signs": [r.to_dict() for r in signs]}
        details.append(entry)
        if not abs(fd - exact) <= 1e-3 * abs(exact):
            failures.append(f"alpha = {alpha}: J'(alpha) = {fd!r}, expected {exact!r}")
        failures += [f"alpha = {alpha}: {r.name} max_rel {r.max_rel:.3g}" for r in reports if not r.passed]
        failures += [f"alpha = {alpha}: {r.name} violated" for r in signs if not r.passed]
    return failures, details


def _n1_alphas(nl, params, lo, hi, n):
    rows = cl.scan_range(nl, params, lo, hi, n)
    return [r.alpha for r in rows if r.verdict == "N" and r.k == 1]


def _suite_comparison(nl, n_pairs=6):
    params = fn.functional_params()
    alphas = _n1_alphas(nl, cl.classification_params(), 4.5, 12.0, 40)
    failures, details = [], []
    trajs = {a: integrate(nl, params, InitialCondition(0.0, a), max_zeros=1) for a in alphas}
    pairs = list(zip(alphas[1:], alphas[:-1]))[:: max(1, len(alphas) // n_pairs)]
    for au, av in pairs:
        rep = fn.compare_solutions(trajs[au], trajs[av])
        details.append({"alpha_u": au, "alpha_v": av, **rep.to_dict()})
        if not rep.ordered:
            failures.append(f"J_{au} <= J_{av} first at s = {rep.first_violation}")
    if not pairs:
        failures.append("no N 1 pairs found")
    return failures, details


def _suite_lemma_epsilon(nl):
    rep = ex.lemma_epsilon_check(nl, ProblemParams(r_max=50.0), ex.default_fixtures())
    failures = []
    for row in rep["rows"]:
        for key in ("radius_ok", "lower_ok", "upper_ok"):
            if not row[key]:
                failures.append(f"fixture {row['fixture']}: {key} fails")
        if abs(row["B"] - row["B_root"]) > 1e-12 * row["B"]:
            failures.append(f"fixture {row['fixture']}: B closed form {row['B']!r} vs root {row['B_root']!r}")
    return failures, rep


def _suite_scaling(nl):
    rep = ex.scaling_checks(5, 3)
    failures = []
    for row in rep["identity"]:
        if not row["passed"]:
            failures.append(f"scaling identity at alpha = {row['alpha']}: {row['max_rel']:.3g}")
    if abs(rep["C"] - 0.25 ** 0.25) > 1e-12:
        failures.append(f"C(3, 5) = {rep['C']!r}")
    return failures, rep


def _ground_state(nl, params):
    golden = ex.load_golden("golden_bound_states.json")
    if nl.hash == make_nonlinearity(model_from_dict(golden["model"])).hash and params.N == golden["params"]["N"]:
        return golden["states"]["1"]["alpha_star"]
    return cl.locate_bound_state(nl, params, 1, 1.5, 12.0, 60).alpha_star


def _suite_shape(nl):
    params = cl.classification_params(r_max=60.0)
    alpha_star = _ground_state(nl, params)
    cases = {"near_ground_state": alpha_star + 1e-3, "deep_P1": 0.5 * (nl.beta + alpha_star)}
    failures, details = [], []
    for name, alpha in cases.items():
        traj = integrate(nl, params, InitialCondition(0.0, alpha), max_zeros=3)
        inter = fn.self_intersection_check(fn.phase_curve(traj))
        turns = fn.winding_increments(traj)
        bad = [t for t in turns if not t[3] > 0]
        details.append({"case": name, "alpha": alpha, "crossings": inter.crossings,
                        "increments": [t[3] for t in turns]})
        if inter.crossings:
            failures.append(f"{name}: {inter.crossings} self-intersections")
        if bad:
            failures.append(f"{name}: nonpositive winding increments {bad}")
    return failures, details


_SUITE_FUNCS = {
    "functionals": _suite_functionals,
    "comparison": _suite_comparison,
    "lemma-epsilon": _suite_lemma_epsilon,
    "scaling": _suite_scaling,
    "shape": _suite_shape,
}


def run_suite(name, nl=None):
    """Run a named property suite; returns a dict with ``passed`` and ``failures``."""
    if name not in _SUITE_FUNCS:
        raise CliConfigError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    nl = nl or make_nonlinearity(ex.DEFAULT_MODEL)
    failures, details = _SUITE_FUNCS[name](nl)
    return {"suite": name, "passed": not failures, "failures": failures, "details": details}


def cmd_verify(args):
    if args.suite not in SUITES:
        raise CliConfigError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    cfg = build_run_config(args)
    report = run_suite(args.suite, cfg.nonlinearity())
    _emit_json({"suite": report["suite"], "passed": report["passed"], "failures": report["failures"]},
               cfg.output.get("out"))
    return EXIT_OK if report["passed"] else EXIT_INTERNAL


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def cmd_experiment(args):
    raw = _read_json(args.config)
    config, expected = ex.split_experiment_file(raw)
    runner = ex.run_theorem_a if args.which == "a" else ex.run_theorem_b
    try:
        report = runner(config, jobs=args.jobs)
    except ex.ConfigError as exc:
        raise CliConfigError(str(exc)) from None
    payload = report.to_dict()
    if expected is not None:
        payload["golden"] = ex.compare_to_golden(report, expected)
    _emit_json(payload, args.out)
    if args.csv_dir:
        report.write_cell_csvs(args.csv_dir)
    if args.freeze_golden:
        _emit_json(ex.freeze_golden(report), args.freeze_golden)
    if expected is not None and not payload["golden"]["match"]:
        print("golden mismatch: " + "; ".join(payload["golden"]["problems"][:5]), file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _model_parent():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("model and integration")
    g.add_argument("--config", help="RunConfig JSON file; flags override its fields")
    g.add_argument("--model", choices=MODEL_CHOICES, help="nonlinearity family (default power-diff)")
    g.add_argument("--p", type=float, help="exponent of the model")
    g.add_argument("--a", type=float, help="shift of shifted-power")
    g.add_argument("--N", type=float, help="space dimension (> 2)")
    g.add_argument("--r-max", dest="r_max", type=float, help="integration horizon")
    g.add_argument("--rel-tol", dest="rel_tol", type=float)
    g.add_argument("--abs-tol", dest="abs_tol", type=float)
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--jobs", type=int, help="worker processes (env RADIAL_SHOOTER_JOBS)")
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="radial-shooter",
                                     description="Shooting laboratory for radial bound states.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _model_parent()

    p = sub.add_parser("solve", parents=[common], help="integrate one initial value")
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", help="trajectory CSV (r,u,du,I)")
    p.add_argument("--phase", help="phase-curve CSV (u,J,r)")
    p.add_argument("--events", help="event JSON file (default: standard output)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("classify", parents=[common], help="verdict for one initial value")
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("scan", parents=[common], help="classify an equispaced alpha grid")
    p.add_argument("--from", dest="lo", type=float)
    p.add_argument("--to", dest="hi", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--out", help="CSV file (default: standard output)")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("find", parents=[common], help="bisect to a k-th bound state")
    p.add_argument("--k", type=int)
    p.add_argument("--bracket", type=float, nargs=2, metavar=("A", "B"))
    p.add_argument("--from", dest="lo", type=float)
    p.add_argument("--to", dest="hi", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--out", help="JSON file (default: standard output)")
    p.set_defaults(func=cmd_find)

    p = sub.add_parser("verify", parents=[common], help="run a property suite")
    p.add_argument("--suite", required=True, help=", ".join(SUITES))
    p.add_argument("--out", help="JSON file (default: standard output)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", help="bound-state counting experiments")
    p.add_argument("which", choices=("a", "b"))
    p.add_argument("--config", required=True, help="experiment config or frozen golden JSON")
    p.add_argument("--out", help="report JSON (default: standard output)")
    p.add_argument("--csv-dir", help="directory for per-cell inventory CSVs")
    p.add_argument("--freeze-golden", metavar="PATH", help="write the witness golden to PATH")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliConfigError, ex.ConfigError, NonlinearityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"integration error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except cl.ClassificationError as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except Exception as exc:  # noqa: BLE001 - every other failure maps to one exit code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
