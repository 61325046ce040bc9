"""Command-line front end.

Exit codes: 0 success, 2 invalid input (spec, files, domains), 3 numerical
failure (quadrature, overflow, or a tolerance breach in the oracle cross-check).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import platform
import sys
import tempfile
from importlib import metadata

import numpy as np
import scipy

from .discrepancy import tv_bound, w_bound
from .equation import domain_grid, residual, solve
from .errors import (
    CondSteinError,
    GridMismatchError,
    SizeError,
    SpecParseError,
    ValidationError,
)
from .measures import (
    FAMILIES,
    ConditionalModel,
    FiniteLaw,
    JointTable,
    SampleSet,
    bin_samples,
    family_from_dict,
    joint_table,
)
from .operators import apply, check_domain
from .oracle import characterize_finite, tv_exact, wasserstein_exact
from .sim import GENERATOR, perturb, sample_model
from .sources import Source
from .suites import SUITES

log = logging.getLogger("condstein")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
TOLERANCES = {"stein": 1e-8, "table": 1e-10, "lp": 1e-8, "probability": 1e-12}
_REQUIRED_PARAMS = {
    "Gaussian": ("mean", "variance"),
    "Poisson": ("lambda",),
    "Gamma": ("shape", "rate"),
    "FiniteDiscrete": ("support", "weights"),
}


class NumericalBreach(CondSteinError):
    """A cross-check exceeded its tolerance."""


# ---------------------------------------------------------------------------
# Input parsing
# ---------------------------------------------------------------------------


def _key_line(text: str, key: str, occurrence: int = 0) -> int | None:
    token = f'"{key}"'
    pos = -1
    for _ in range(occurrence + 1):
        pos = text.find(token, pos + 1)
        if pos < 0:
            return None
    return text.count("\n", 0, pos) + 1


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SpecParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"{path}: invalid JSON ({exc.msg})", line=exc.lineno) from None


def parse_model(path: str) -> ConditionalModel:
    """Read a model spec ``{y_values, y_weights, families: [{tag, params}]}``."""
    spec, text = _load_json(path)
    if not isinstance(spec, dict):
        raise SpecParseError("model spec must be a JSON object")
    for key in ("y_values", "y_weights", "families"):
        if key not in spec:
            raise SpecParseError(f"missing field {key!r}", field=key)
        if not isinstance(spec[key], list):
            raise SpecParseError(f"{key} must be a list", field=key, line=_key_line(text, key))
    seen: dict[str, int] = {}
    families = []
    for i, fam in enumerate(spec["families"]):
        where = f"families[{i}]"
        if not isinstance(fam, dict) or "tag" not in fam:
            raise SpecParseError("family needs a 'tag'", field=where)
        tag = fam["tag"]
        if tag not in FAMILIES:
            raise SpecParseError(f"unknown tag {tag!r}; expected one of {sorted(FAMILIES)}",
                                 field=f"{where}.tag")
        params = fam.get("params", {})
        for name in _REQUIRED_PARAMS[tag]:
            if name not in params:
                raise SpecParseError(f"{tag} needs parameter {name!r}",
                                     field=f"{where}.params.{name}")
        try:
            families.append(family_from_dict(fam))
        except (ValidationError, TypeError, ValueError) as exc:
            bad = next((n for n in _REQUIRED_PARAMS[tag] if n in str(exc)), _REQUIRED_PARAMS[tag][0])
            raise SpecParseError(str(exc), field=f"{where}.params.{bad}",
                                 line=_key_line(text, bad, seen.get(bad, 0))) from None
        finally:
            for name in params:
                seen[name] = seen.get(name, 0) + 1
    try:
        return ConditionalModel.build(spec["y_values"], spec["y_weights"], families)
    except (ValidationError, ValueError) as exc:
        raise SpecParseError(str(exc), field="y_weights", line=_key_line(text, "y_weights")) from None


def parse_joint(path: str) -> JointTable:
    spec, _ = _load_json(path)
    try:
        return JointTable.from_dict(spec)
    except KeyError as exc:
        raise SpecParseError(f"joint table missing field {exc.args[0]!r}", field=exc.args[0]) from None


def read_samples(path: str) -> SampleSet:
    """Read a CSV with header ``x,y``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header] != ["x", "y"]:
                raise SpecParseError("samples CSV must start with the header 'x,y'", line=1)
            pairs = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 2:
                    raise SpecParseError(f"expected 2 columns, got {len(row)}", line=lineno)
                try:
                    pairs.append((float(row[0]), float(row[1])))
                except ValueError:
                    raise SpecParseError(f"not a number: {row}", line=lineno) from None
    except OSError as exc:
        raise SpecParseError(f"cannot read {path}: {exc.strerror}") from None
    if not pairs:
        raise SpecParseError("samples CSV has no data rows")
    return SampleSet.from_pairs(pairs, provenance=os.path.basename(path))


def write_atomic(path: str, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".condstein-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def samples_csv(samples: SampleSet) -> str:
    buf = io.StringIO()
    buf.write("x,y\n")
    for x, y in zip(samples.x.tolist(), samples.y.tolist()):
        buf.write(f"{x!r},{y!r}\n")
    return buf.getvalue()


def parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise SpecParseError(f"expected comma-separated numbers, got {text!r}") from None


def parse_source(text: str) -> Source:
    """h spec: ``step:a``, ``const:c``, ``linear:slope[,intercept]`` or ``indicator:p1,p2,...``."""
    kind, _, arg = text.partition(":")
    vals = parse_floats(arg)
    if kind == "step" and len(vals) == 1:
        return Source.halfline(vals[0])
    if kind == "const" and len(vals) == 1:
        return Source.constant(vals[0])
    if kind == "linear" and len(vals) in (1, 2):
        return Source.linear(*vals)
    if kind == "indicator" and vals:
        return Source.indicator(vals)
    raise SpecParseError(f"bad h spec {text!r}", field="h")


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:n`` or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise SpecParseError(f"grid must be lo:hi:n, got {text!r}", field="grid")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise SpecParseError(f"bad grid {text!r}", field="grid") from None
        if n < 1:
            raise SpecParseError("grid needs at least one point", field="grid")
        return np.linspace(lo, hi, n)
    return np.asarray(parse_floats(text))


def threads_from_env() -> int:
    raw = os.environ.get("CONDSTEIN_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise SpecParseError(f"CONDSTEIN_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def model_digest(model: ConditionalModel) -> str:
    canon = json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canon.encode()).hexdigest()


def versions() -> dict:
    try:
        own = metadata.version("condstein")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"condstein": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "generator": GENERATOR}


def _bound_dict(rep) -> dict:
    return {
        "sup": rep.sup_value,
        "sup_label": rep.sup_label,
        "sup_std_error": rep.sup_std_error,
        "lower_estimate": rep.lower_estimate,
        "y_marginal_tv": rep.y_marginal_tv,
        "notes": rep.notes,
        "per_function": [
            {"label": v.label, "value": v.value, "std_error": v.std_error}
            for v in rep.per_function
        ],
    }


def build_report(model, observed, seed: int, threads: int = 1) -> dict:
    exact = isinstance(observed, JointTable)
    tv = tv_bound(observed, model, seed, threads)
    w = w_bound(observed, model, seed, threads)
    report = {
        "mode": "exact" if exact else "empirical",
        "model_digest": model_digest(model),
        "n": "exact" if exact else len(observed),
        "seed": seed,
        "tv": _bound_dict(tv),
        "w": _bound_dict(w),
        "characterization": None,
        "oracle": None,
        "tolerances": dict(TOLERANCES),
        "versions": versions(),
    }
    if exact and model.all_finite:
        try:
            report["characterization"] = characterize_finite(observed, model)
        except GridMismatchError as exc:
            log.info("characterization: %s", exc)
            report["characterization"] = False
        target = joint_table(model)
        oracle = {"tv": tv_exact(observed, target), "w": None}
        try:
            oracle["w"] = wasserstein_exact(observed, target)
        except SizeError as exc:
            log.info("oracle W skipped: %s", exc)
        report["oracle"] = oracle
    return report


def check_tolerances(report: dict) -> list[str]:
    """Oracle cross-check failures (only meaningful with matching y-marginals)."""
    oracle = report["oracle"]
    if oracle is None or report["tv"]["y_marginal_tv"] > TOLERANCES["probability"]:
        return []
    out = []
    if abs(report["tv"]["sup"] - oracle["tv"]) > TOLERANCES["stein"]:
        out.append(f"tv sup {report['tv']['sup']!r} differs from oracle {oracle['tv']!r}")
    if oracle["w"] is not None and report["w"]["sup"] > oracle["w"] + TOLERANCES["lp"]:
        out.append(f"w sup {report['w']['sup']!r} exceeds oracle {oracle['w']!r}")
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    model = parse_model(args.model)
    if args.exact:
        observed = parse_joint(args.exact)
    else:
        observed = read_samples(args.samples)
        if args.y_edges:
            observed = bin_samples(observed, parse_floats(args.y_edges))
    report = build_report(model, observed, args.seed, threads_from_env())
    text = json.dumps(report, indent=2, allow_nan=False) + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    breaches = check_tolerances(report)
    if breaches:
        raise NumericalBreach("; ".join(breaches))
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = parse_model(args.model)
    if args.mean_shift is not None:
        model = perturb(model, "mean_shift", args.mean_shift)
    if args.contaminate is not None:
        noise = FiniteLaw.uniform(np.unique(parse_floats(args.noise or "")))
        model = perturb(model, "contaminate", args.contaminate, noise=noise)
    if args.swap:
        ya, yb = parse_floats(args.swap)
        model = perturb(model, "swap_conditionals", y_a=ya, y_b=yb)
    samples = sample_model(model, args.n, args.seed)
    text = samples_csv(samples)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    names = args.suite or list(SUITES)
    rows = []
    for name in names:
        for res in SUITES[name](seed=args.seed):
            rows.append((name, res))
    width = max(len(r.name) for _, r in rows)
    for suite, res in rows:
        print(f"{'PASS' if res.passed else 'FAIL'}  {suite:<16} {res.name:<{width}}  {res.detail}")
    return EXIT_OK if all(r.passed for _, r in rows) else EXIT_NUMERIC


def cmd_solve(args) -> int:
    model = parse_model(args.model)
    h = parse_source(args.h)
    ys = model.y_values if args.y is None else [args.y]
    buf = io.StringIO()
    buf.write("y,x,f,residual\n")
    worst = 0.0
    for y in ys:
        fam = model.family_at(y)
        sol = solve(fam, h)
        grid = domain_grid(fam) if args.grid is None else parse_grid(args.grid)
        grid = check_domain(fam, grid)
        res = np.abs(apply(fam, sol.f, grid) - sol.centered(grid))
        worst = max(worst, residual(fam, sol, grid))
        for x, fx, r in zip(grid.tolist(), sol.f(grid).tolist(), res.tolist()):
            buf.write(f"{float(y)!r},{x!r},{fx!r},{r!r}\n")
    if args.out:
        write_atomic(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if worst > TOLERANCES["stein"]:
        raise NumericalBreach(f"max residual {worst:.3g} exceeds {TOLERANCES['stein']:g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="condstein",
                                     description="Conditional Stein discrepancies and distance bounds.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="TV/W report for samples or an exact joint table")
    p.add_argument("model", help="model spec JSON")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--samples", help="CSV with header x,y")
    src.add_argument("--exact", help="joint table JSON {x_grid, y_grid, mass}")
    p.add_argument("--y-edges", help="bin edges for continuous y, comma-separated")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="draw samples from a (perturbed) model")
    p.add_argument("model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean-shift", type=float)
    p.add_argument("--contaminate", type=float, metavar="EPS")
    p.add_argument("--noise", help="support of the uniform noise law for --contaminate")
    p.add_argument("--swap", metavar="YA,YB")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="run the self-validation suites")
    p.add_argument("--suite", action="append", choices=sorted(SUITES))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="tabulate the Stein solution f_h and its residual")
    p.add_argument("model")
    p.add_argument("--h", required=True, help="step:a | const:c | linear:s[,c] | indicator:p1,...")
    p.add_argument("--grid", help="lo:hi:n or comma-separated points (default: standard grid)")
    p.add_argument("--y", type=float, help="single y value (default: every y)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"condstein: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ArithmeticError, NumericalBreach) as exc:
        print(f"condstein: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
