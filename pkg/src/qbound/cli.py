"""Command-line entry point: ``qbound {gibbs,fhat,bound,verify,tightness}``.

JSON goes to stdout with numbers rounded to 9 significant digits (never fewer
than 9 decimal places); CSV goes to
``--out`` (or stdout when ``--out`` is omitted).  Exit status: 0 on success,
1 when a verification produced a negative slack, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import bounds as B
from . import spectra as S
from . import witness as W
from .errors import QboundError
from .tensor import SystemLayout

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _round(value):
    if isinstance(value, dict):
        return {k: _round(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_round(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            return str(v)
        if v == 0.0:
            return 0.0
        # 9 significant digits, and never fewer than 9 decimal places
        digits = 9 + max(0, int(math.floor(math.log10(abs(v)))) + 1)
        return float(f"{v:.{digits}g}")
    return value


def _emit(payload: dict, stream) -> None:
    stream.write(json.dumps(_round(payload), separators=(",", ":")) + "\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _t_value(args):
    if getattr(args, "opt_t", False):
        return "optimize"
    return args.t


def _load_model(path, required=True):
    if path is None:
        if required:
            raise UsageError("--spectrum is required for this command")
        return None
    try:
        return S.load_spectrum(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read spectrum file {path}: {exc}") from None


def _as_spectrum(model, levels: int) -> S.SpectrumModel:
    return model.spectrum(levels) if isinstance(model, S.OscillatorModel) else model


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_gibbs(args, out) -> int:
    spec = _as_spectrum(_load_model(args.spectrum), args.levels)
    point = S.solve_gibbs(spec, args.energy)
    _emit({"lambda": point.lam, "entropy": point.entropy}, out)
    return EXIT_OK


def cmd_fhat(args, out) -> int:
    model = _load_model(args.spectrum)
    spec = _as_spectrum(model, args.levels)
    energies = np.asarray(args.energy, dtype=float)
    payload = {
        "energy": energies,
        "f_bar": np.atleast_1d(S.f_bar(spec, energies)),
        "f_hat_star": np.atleast_1d(S.f_hat_star(spec, energies)),
    }
    if isinstance(model, S.OscillatorModel):
        payload["f_bar_osc"] = np.atleast_1d(S.oscillator_f(model, energies, barred=True))
    if len(energies) == 1:
        payload = {k: v[0] for k, v in payload.items()}
    _emit(payload, out)
    return EXIT_OK


def cmd_bound(args, out) -> int:
    model = _load_model(args.spectrum, required=args.variant != "finite")
    if args.variant == "two-step" and isinstance(model, S.OscillatorModel) and args.numeric:
        model = model.spectrum(args.levels)
    t = _t_value(args)
    value = B.bound_for(args.char, args.variant, n=args.n, m=args.m, eps=args.eps, dims=args.dims,
                        energy=args.energy, model=model, t=t)
    desc = B.lookup(args.char, args.n, args.m)
    _emit({"rhs": value.total, "terms": value.terms, "eps_used": value.eps_used, "t": value.t,
           "class": {"tag": desc.tag, "C": desc.C, "D": desc.D, "m": desc.m, "n": desc.n}}, out)
    return EXIT_OK


def _layout_for(char: str, n: int, m: int | None, dims: list[int]) -> SystemLayout:
    expected = {"qcmi": n + 1, "delta": 2 * n, "cmi_ub": None}.get(char, n)
    if char in W.INEQUALITIES:
        expected = None
    if expected is not None and len(dims) != expected:
        raise UsageError(f"--dims for {char} with n={n} needs {expected} entries, got {len(dims)}")
    constrained = m if m is not None else n
    if char == "delta":
        constrained = n
    if constrained > len(dims):
        raise UsageError(f"m={constrained} exceeds the number of factors")
    return SystemLayout.from_dims(dims, constrained=constrained)


def cmd_verify(args, out) -> int:
    layout = _layout_for(args.char, args.n, args.m, args.dims)
    cfg = W.SampleConfig(args.seed, layout, args.eps, args.energy, args.samples, args.rank)
    audit = []
    if args.char in W.INEQUALITIES:
        records = W.inequality_suite(args.char, cfg, threads=args.threads)
    else:
        model = _load_model(args.spectrum, required=args.variant != "finite")
        records = W.verify_suite(args.char, args.variant, cfg, spectrum=model, t=_t_value(args),
                                 channel=args.channel, threads=args.threads, audit=audit)
    text = W.write_csv(records)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    failures = sum(1 for r in records if not r.ok)
    audit_failures = sum(1 for e in audit if e["lhs"] > e["rhs"] + W.SLACK_TOL)
    summary = {"records": len(records), "failures": failures,
               "min_slack": min((r.slack for r in records), default=0.0),
               "truncation_events": len(audit), "truncation_failures": audit_failures}
    if args.out:
        _emit(summary, out)
    else:
        sys.stderr.write(json.dumps(_round(summary), separators=(",", ":")) + "\n")
    return EXIT_FAIL if failures or audit_failures else EXIT_OK


def cmd_tightness(args, out) -> int:
    model = _load_model(args.spectrum, required=False)
    rows = W.tightness_sweep(args.char, args.axis, args.grid, args.eps, n=args.n, spectrum=model,
                             levels=args.levels, t=_t_value(args) or "optimize")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["axis", "value", "eps", "lhs", "rhs", "ratio", "t"])
    for r in rows:
        writer.writerow([r.axis, repr(r.value), repr(r.eps), repr(float(r.lhs)), repr(float(r.rhs)),
                         repr(float(r.ratio)), "" if r.t is None else repr(float(r.t))])
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
        _emit({"axis": args.axis, "grid": [r.value for r in rows], "ratio": [r.ratio for r in rows]}, out)
    else:
        out.write(buf.getvalue())
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbound", description="Entropic continuity bounds for multipartite states.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gibbs", help="solve the Gibbs state at a mean energy")
    p.add_argument("--spectrum", required=True, help="spectrum JSON file")
    p.add_argument("--energy", type=float, required=True, help="mean energy (absolute)")
    p.add_argument("--levels", type=int, default=S.DEFAULT_LEVELS, help="levels kept for oscillator spectra")
    p.set_defaults(func=cmd_gibbs)

    p = sub.add_parser("fhat", help="evaluate F-bar and F-hat* (shifted energies)")
    p.add_argument("--spectrum", required=True, help="spectrum JSON file")
    p.add_argument("--energy", type=_floats, required=True, help="shifted energy or comma-separated list")
    p.add_argument("--levels", type=int, default=S.DEFAULT_LEVELS, help="levels kept for oscillator spectra")
    p.set_defaults(func=cmd_fhat)

    def bound_args(p, need_char=True):
        p.add_argument("--char", required=True, help="characteristic (mi, qcmi, sq, csq, ei, delta)")
        p.add_argument("--variant", default="finite", help="finite, sqrt, sqrt-osc, two-step or oscillator")
        p.add_argument("--n", type=int, required=True, help="number of parties")
        p.add_argument("--m", type=int, default=None, help="number of constrained parties")
        p.add_argument("--dims", type=_ints, default=None, help="comma-separated factor dimensions")
        p.add_argument("--eps", type=float, required=True, help="trace-distance radius")
        p.add_argument("--energy", type=float, default=None, help="per-party energy budget (absolute)")
        p.add_argument("--spectrum", default=None, help="spectrum JSON file")
        p.add_argument("--t", type=float, default=None, help="free parameter of the two-step bound")
        p.add_argument("--opt-t", action="store_true", help="optimise t instead of fixing it")
        p.add_argument("--levels", type=int, default=S.DEFAULT_LEVELS, help="levels kept for oscillator spectra")

    p = sub.add_parser("bound", help="evaluate a continuity-bound RHS")
    bound_args(p)
    p.add_argument("--numeric", action="store_true",
                   help="two-step with an oscillator file: use the numeric F-hat* instead of the closed form")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("verify", help="check a bound (or an entropy inequality) on seeded random pairs")
    bound_args(p)
    p.add_argument("--samples", type=int, default=1000, help="number of seeded pairs")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--rank", type=int, default=None, help="rank of sampled states (default: full)")
    p.add_argument("--channel", action="store_true", help="push pairs through random local channels")
    p.add_argument("--threads", type=int, default=1, help="worker threads (output does not depend on it)")
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("tightness", help="ratio LHS/RHS along a dimension or energy grid")
    p.add_argument("--char", default="mi", help="characteristic (only mi)")
    p.add_argument("--axis", choices=("dimension", "energy"), required=True)
    p.add_argument("--grid", type=_floats, required=True, help="comma-separated dimensions or energies")
    p.add_argument("--eps", type=float, required=True, help="trace-distance radius")
    p.add_argument("--n", type=int, default=2, help="number of parties")
    p.add_argument("--spectrum", default=None, help="oscillator JSON for the energy axis (default: one mode, omega=1)")
    p.add_argument("--levels", type=int, default=256, help="levels kept for the witness states")
    p.add_argument("--t", type=float, default=None, help="fixed t for the energy axis")
    p.add_argument("--opt-t", action="store_true", help="optimise t (the default when --t is absent)")
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_tightness)
    return parser


def run(argv=None, stdout=None) -> int:
    out = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except (UsageError, QboundError, ValueError, TypeError, OSError) as exc:
        sys.stderr.write(f"qbound {args.command}: error: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
