"""Command-line front end.

Every subcommand reads a channel spec (JSON), writes a CSV table with a
versioned header comment and, when ``--out`` is given, a JSON summary next to
it.  Failures print one JSON object to stderr and exit nonzero:
2 for invalid input, 3 for a hypothesis violation, 4 for non-convergence.
"""

import argparse
import csv
import io
import itertools
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channels import apply, channel_from_dict, channel_to_dict, is_pure_channel, validate
from .exceptions import GaussMultError, HypothesisError, InvalidChannel
from .fock import oracle_trace_power
from .optimizer import OptimizerConfig, majorization_audit, multiplicativity_check, optimize
from .states import purity_from_spectrum, von_neumann_entropy
from .symplectic import check_covariance_matrix, symplectic_eigenvalues

FORMAT_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_HYPOTHESIS, EXIT_NOT_CONVERGED = 0, 2, 3, 4

log = logging.getLogger("gaussmult")


class CommandError(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, (tuple, list)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


def _parse_p_list(text):
    try:
        ps = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not ps or not all(p > 1 and np.isfinite(p) for p in ps):
        raise argparse.ArgumentTypeError(f"every p must be a finite number > 1, got {text!r}")
    return ps


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CommandError(EXIT_INPUT, "io_error", f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CommandError(EXIT_INPUT, "invalid_json", f"{path}: {exc}") from None


def _round_trip(spec):
    """Parse a spec and check that serializing and re-parsing gives the same channel."""
    ch = channel_from_dict(spec)
    again = channel_from_dict(json.loads(json.dumps(channel_to_dict(ch))))
    if again != ch:
        raise InvalidChannel("channel spec does not survive a serialize/parse round trip")
    return ch


def _config(args, p):
    return OptimizerConfig(p=p, starts=args.starts, seed=args.seed)


# --- commands: each returns (columns, rows, summary, exit code) -----------------


def cmd_validate(ch, args):
    report = validate(ch)
    rows = [("channel", ch.n, report.lmi_margin, "", "", "", report.valid, is_pure_channel(ch))]
    single = [f for f in ch.factors() if f.n == 1]
    for i, (f, dm, nm) in enumerate(zip(single, report.det_margins, report.noise_margins)):
        rows.append(
            (f"factor{i}", 1, "", float(np.linalg.det(f.X)), dm, nm, dm >= 0 and nm >= 0, is_pure_channel(f))
        )
    columns = ("scope", "modes", "lmi_margin", "det_x", "det_margin", "noise_margin", "valid", "pure")
    summary = {
        "valid": report.valid,
        "lmi_margin": report.lmi_margin,
        "det_margins": report.det_margins,
        "consistent": report.consistent,
    }
    return columns, rows, summary, EXIT_OK if report.valid else EXIT_INPUT


def cmd_purity(ch, args):
    if args.cm is None:
        gamma = np.eye(2 * ch.n)
    else:
        data = _read_json(args.cm)
        gamma = check_covariance_matrix(np.array(data["cm"] if isinstance(data, dict) else data, dtype=float))
    out = apply(ch, gamma)
    nus = symplectic_eigenvalues(out)
    s_vn = von_neumann_entropy(out)
    rows = []
    for p in args.p:
        v = purity_from_spectrum(nus, p)
        oracle = oracle_trace_power(nus, p, tail_tol=args.tail_tol)
        rows.append((p, v.trace_power, v.p_norm, v.renyi, s_vn, oracle.value, oracle.error_bound))
    columns = ("p", "trace_power", "p_norm", "renyi", "von_neumann", "oracle_trace_power", "oracle_bound")
    return columns, rows, {"output_spectrum": nus}, EXIT_OK


def cmd_optimize(ch, args):
    rows, code = [], EXIT_OK
    for p in args.p:
        r = optimize(ch, _config(args, p))
        rows.append(
            (
                p,
                r.inf_F_p,
                r.xi_p,
                r.max_trace_power,
                r.multiplicativity_ratio,
                r.verdict,
                r.gradient_norm_at_argmin,
                r.status,
                r.reduction_used,
                r.bound_active,
                r.attained_asymptotically,
            )
        )
        if r.status != "converged":
            code = EXIT_NOT_CONVERGED
    columns = (
        "p",
        "inf_F_p",
        "xi_p",
        "max_trace_power",
        "multiplicativity_ratio",
        "verdict",
        "gradient_norm",
        "status",
        "reduction_used",
        "bound_active",
        "asymptotic",
    )
    return columns, rows, {}, code


def cmd_multiplicativity(ch, args):
    rows, code = [], EXIT_OK
    for p in args.p:
        rec = multiplicativity_check(ch.factors(), cfg=_config(args, p))
        rows.append(
            (
                p,
                rec.ratio,
                rec.joint_inf_F_p,
                rec.factor_inf_F_p,
                rec.off_block_norm,
                rec.verdict,
                rec.hypotheses,
                rec.flags,
                rec.report.status,
            )
        )
        if rec.report.status != "converged":
            code = max(code, EXIT_NOT_CONVERGED)
        elif rec.flags and not rec.hypotheses:
            code = max(code, EXIT_HYPOTHESIS)
    columns = (
        "p",
        "ratio",
        "joint_inf_F_p",
        "factor_inf_F_p",
        "off_block_norm",
        "verdict",
        "hypotheses",
        "flags",
        "status",
    )
    return columns, rows, {}, code


def cmd_majorization(ch, args):
    rows, summary = [], {}
    for p in args.p:
        audit = majorization_audit(ch, args.samples, _config(args, p), eps=args.tail_tol)
        for i, v in enumerate(audit.verdicts):
            rows.append((p, i, v.verdict, v.margin, v.tail_a, v.tail_b, v.truncation))
        summary[_fmt(p)] = {
            "samples": audit.samples,
            "passes": audit.passes,
            "worst_margin": audit.worst_margin,
            "optimal_spectrum": audit.optimal_spectrum,
        }
    columns = ("p", "sample", "verdict", "margin", "tail_optimal", "tail_sample", "truncation")
    return columns, rows, summary, EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "purity": cmd_purity,
    "optimize": cmd_optimize,
    "multiplicativity": cmd_multiplicativity,
    "majorization": cmd_majorization,
}


def _substitute(obj, values):
    if isinstance(obj, str) and obj.startswith("$"):
        name = obj[1:]
        if name not in values:
            raise CommandError(EXIT_INPUT, "invalid_sweep", f"placeholder {obj!r} has no grid values")
        return values[name]
    if isinstance(obj, dict):
        return {k: _substitute(v, values) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_substitute(v, values) for v in obj]
    return obj


def cmd_sweep(spec, args):
    """Run a command over every point of a parameter grid.

    The sweep file holds ``"command"``, a channel ``"template"`` whose string values
    ``"$name"`` are placeholders, and ``"grid": {name: [values]}``.
    Points are visited in row-major order of the grid as written.
    """
    if not isinstance(spec, dict) or not {"template", "grid"} <= spec.keys():
        raise CommandError(EXIT_INPUT, "invalid_sweep", "sweep spec needs 'template' and 'grid'")
    command = spec.get("command", "optimize")
    if command not in COMMANDS or command == "purity":
        raise CommandError(EXIT_INPUT, "invalid_sweep", f"command {command!r} cannot be swept")
    names = list(spec["grid"])
    columns, rows, code = None, [], EXIT_OK
    for index, point in enumerate(itertools.product(*(spec["grid"][k] for k in names))):
        values = dict(zip(names, point))
        ch = _round_trip(_substitute(spec["template"], values))
        cols, sub_rows, _, sub_code = COMMANDS[command](ch, args)
        columns = ("point", *names, *cols)
        rows.extend((index, *point, *r) for r in sub_rows)
        code = max(code, sub_code)
    return columns, rows, {"command": command, "points": index + 1 if rows else 0}, code


# --- output --------------------------------------------------------------------


def _render_csv(command, columns, rows):
    buf = io.StringIO()
    buf.write(f"# gaussmult-csv v{FORMAT_VERSION} command={command}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(v) for v in r])
    return buf.getvalue()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.exit(_error("usage_error", message, EXIT_INPUT))


def build_parser():
    parser = _Parser(prog="gaussmult", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in (*COMMANDS, "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--spec", required=True, type=Path, help="channel spec (or sweep spec) JSON")
        p.add_argument("--p", type=_parse_p_list, default=[2.0], help="comma-separated Renyi orders > 1")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--starts", type=int, default=16, help="optimizer starts")
        p.add_argument("--out", type=Path, help="CSV path; a JSON summary is written beside it")
        p.add_argument("--tail-tol", type=float, default=1e-10, help="truncation tail tolerance")
        if name == "purity":
            p.add_argument("--cm", type=Path, help="input covariance matrix JSON (default: vacuum)")
        if name in ("majorization", "sweep"):
            p.add_argument("--samples", type=int, default=100)
    return parser


def _error(kind, message, code):
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def run(argv=None):
    args = build_parser().parse_args(argv)
    if args.starts < 1 or not args.tail_tol > 0 or getattr(args, "samples", 1) < 0:
        return _error("invalid_argument", "--starts must be >= 1, --tail-tol > 0, --samples >= 0", EXIT_INPUT)
    try:
        spec = _read_json(args.spec)
        if args.command == "sweep":
            columns, rows, summary, code = cmd_sweep(spec, args)
            channel = None
        else:
            ch = _round_trip(spec)
            columns, rows, summary, code = COMMANDS[args.command](ch, args)
            channel = channel_to_dict(ch)
    except CommandError as exc:
        return _error(exc.kind, str(exc), exc.code)
    except HypothesisError as exc:
        return _error(type(exc).__name__, str(exc), EXIT_HYPOTHESIS)
    except (GaussMultError, KeyError, TypeError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_INPUT)

    text = _render_csv(args.command, columns, rows)
    if args.out is None:
        sys.stdout.write(text)
    else:
        try:
            args.out.write_text(text)
            doc = {
                "format_version": FORMAT_VERSION,
                "command": args.command,
                "p": args.p,
                "seed": args.seed,
                "starts": args.starts,
                "exit_code": code,
                "channel": channel,
                "summary": summary,
            }
            args.out.with_suffix(".json").write_text(json.dumps(_jsonable(doc), indent=2) + "\n")
        except OSError as exc:
            return _error("io_error", f"{args.out}: {exc.strerror}", EXIT_INPUT)
    if code == EXIT_NOT_CONVERGED:
        _error("not_converged", "at least one optimization did not converge", code)
    elif code == EXIT_HYPOTHESIS:
        _error("hypothesis_violation", "instance is outside the covered hypotheses", code)
    elif code == EXIT_INPUT:
        _error("invalid_channel", "channel is not completely positive", code)
    return code


def main():
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
