"""Command line front end: ``privcpd <subcommand> ...``.

Exit codes: 0 on success, 1 on a usage error (bad or unknown flags),
2 on a data or domain error (invalid pmf, budget, config, unreadable file).
Errors print a single ``error: <kind>: <message>`` line on stderr.

The default thread count of ``simulate --threads 0`` can be set with the
``PRIVCPD_THREADS`` environment variable; otherwise all CPUs are used.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .bounds import inputs_for, theorem_bmcpd, theorem_npcpd, theorem_rrcpd
from .detector import Dataset, detect, detect_privatized
from .divergence import (
    Distribution,
    chernoff_information,
    f_lambda_divergence,
    jeffreys_renyi,
    kl_divergence,
    renyi_divergence,
    tv_distance,
)
from .experiments import (
    STAGE_PRIVATIZE,
    ExperimentConfig,
    dumps_csv,
    dumps_json,
    run_experiment,
    trial_stream,
    write_results,
)
from .mechanisms import (
    Channel,
    SymmetricChannelParams,
    binary_mechanism,
    quantized_rr,
    rr_channel,
    select_tau_star,
)
from .sdpi import (
    SdpiEstimate,
    eta_jeffreys_inf_symmetric,
    eta_numeric,
    eta_renyi_inf_symmetric,
    eta_tv_symmetric,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"error: usage: {message}\n")


# -- formatting --------------------------------------------------------------


def _formatter(full: bool) -> Callable[[float], str]:
    def fmt(x) -> str:
        if isinstance(x, (bool, np.bool_)):
            return str(bool(x)).lower()
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return repr(x) if full else f"{x:.6f}"

    return fmt


def _json_number(x: float, full: bool):
    if x is None or isinstance(x, bool):
        return x
    x = float(x)
    if not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x if full else round(x, 6)


def _json_tree(obj, full: bool):
    if isinstance(obj, dict):
        return {k: _json_tree(v, full) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_tree(v, full) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _json_number(obj, full)
    return obj


# -- argument helpers --------------------------------------------------------


def parse_pmf(text: str) -> Distribution:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValueError(f"cannot parse pmf {text!r}: expected comma-separated reals") from None
    return Distribution(vals)


def parse_alpha_range(text: str) -> list[int]:
    """``"5"``, ``"1,5,10"`` or ``"a:b[:step]"`` (inclusive)."""
    try:
        if ":" in text:
            parts = [int(t) for t in text.split(":")]
            if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] < 1):
                raise ValueError
            step = parts[2] if len(parts) == 3 else 1
            return list(range(parts[0], parts[1] + 1, step))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValueError(f"cannot parse alpha range {text!r}") from None


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from None


def read_symbols(text: str) -> np.ndarray:
    """JSON list, JSON object with ``symbols``, or one integer per line."""
    stripped = text.strip()
    if stripped.startswith("[") or stripped.startswith("{"):
        obj = json.loads(stripped)
        if isinstance(obj, dict):
            obj = obj.get("symbols")
        if not isinstance(obj, list):
            raise ValueError("JSON dataset must be a list or an object with 'symbols'")
        vals = obj
    else:
        vals = [line.strip() for line in stripped.splitlines() if line.strip()]
    try:
        out = [int(v) for v in vals]
    except (TypeError, ValueError):
        raise ValueError("dataset symbols must be integers") from None
    return np.array(out, dtype=np.int64)


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {out}: {exc.strerror or exc}") from None


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- subcommands -------------------------------------------------------------


DIVERGENCES = ("tv", "kl", "renyi", "jeffreys-renyi", "f-lambda", "chernoff")


def cmd_divergence(args) -> int:
    p, q = parse_pmf(args.p), parse_pmf(args.q)
    kind = args.kind
    if kind == "tv":
        val = tv_distance(p, q)
    elif kind == "kl":
        val = kl_divergence(p, q)
    elif kind == "renyi":
        val = renyi_divergence(args.order, p, q)
    elif kind == "jeffreys-renyi":
        val = jeffreys_renyi(args.order, p, q)
    elif kind == "f-lambda":
        val = f_lambda_divergence(args.lam, p, q)
    else:
        val = chernoff_information(p, q).value
    print(args.fmt(val))
    return 0


def cmd_mechanism(args) -> int:
    if args.kind == "rr":
        if args.q is None:
            raise UsageError("rr needs --q")
        w = rr_channel(args.q, args.eps)
        extra = {}
    else:
        if args.p0 is None or args.p1 is None:
            raise UsageError("bm needs --p0 and --p1")
        p0, p1 = parse_pmf(args.p0), parse_pmf(args.p1)
        if args.tau is None:
            sel = select_tau_star(p0, p1, args.eps)
            w = quantized_rr(sel.quantizer, args.eps)
            extra = {"tau": sel.tau_star, "in_s": list(sel.quantizer.in_s), "ich": sel.ich}
        else:
            w = binary_mechanism(p0, p1, args.tau, args.eps)
            extra = {"tau": args.tau}
    doc = json.loads(w.to_json(args.eps))
    doc.update(extra)
    print(json.dumps(_json_tree(doc, args.full_precision)))
    return 0


SDPI_KINDS = ("tv", "renyi-inf", "jeffreys-inf", "renyi")


def cmd_sdpi(args) -> int:
    if args.channel == "rr":
        if args.q is None or args.eps is None:
            raise UsageError("--channel rr needs --q and --eps")
        params = SymmetricChannelParams.randomized_response(args.q, args.eps)
        closed = {
            "tv": eta_tv_symmetric,
            "renyi-inf": eta_renyi_inf_symmetric,
            "jeffreys-inf": eta_jeffreys_inf_symmetric,
        }
        if args.kind in closed:
            est = closed[args.kind](params)
        else:
            est = eta_numeric(params.channel(), args.order)
    else:
        if args.channel_file is None:
            raise UsageError("--channel file needs --channel-file")
        w, _ = Channel.from_json(_read_text(args.channel_file))
        if args.kind == "tv":
            raise ValueError("numeric search supports renyi, renyi-inf and jeffreys-inf")
        est: SdpiEstimate = eta_numeric(
            w,
            math.inf if args.kind != "renyi" else args.order,
            jeffreys=args.kind == "jeffreys-inf",
        )
    print(json.dumps(_json_tree(est.to_dict(), args.full_precision)))
    return 0


def cmd_detect(args) -> int:
    p0, p1 = parse_pmf(args.p0), parse_pmf(args.p1)
    symbols = read_symbols(_read_text(args.data))
    d = Dataset(symbols, p0.alphabet_size)
    if args.mechanism == "none":
        res = detect(d, p0, p1)
    else:
        if args.eps is None:
            raise UsageError(f"mechanism {args.mechanism} needs --eps")
        if args.mechanism == "rr":
            w = rr_channel(p0.alphabet_size, args.eps)
        else:
            w = quantized_rr(select_tau_star(p0, p1, args.eps).quantizer, args.eps)
        rng = trial_stream(args.seed, 0, STAGE_PRIVATIZE)
        res = detect_privatized(d, p0, p1, w, rng)
    print(f"k_hat\n{res.k_hat}")
    if args.scores:
        rows = [(k + 1, args.fmt(s)) for k, s in enumerate(res.scores)]
        _emit(_csv_text(["k", "score"], rows), args.scores)
    return 0


def cmd_bound(args) -> int:
    p0, p1 = parse_pmf(args.p0), parse_pmf(args.p1)
    alphas = parse_alpha_range(args.alpha)
    if not alphas:
        raise ValueError("empty alpha range")
    if args.mechanism != "none" and args.eps is None:
        raise UsageError(f"mechanism {args.mechanism} needs --eps")
    in_s = None
    if args.mechanism == "bm":
        in_s = select_tau_star(p0, p1, args.eps).quantizer.in_s
    header, rows = None, []
    for a in alphas:
        inp = inputs_for(p0, p1, args.n, a, epsilon=args.eps, in_s=in_s)
        if args.mechanism == "none":
            rep = theorem_npcpd(inp)
        elif args.mechanism == "rr":
            rep = theorem_rrcpd(inp)
        else:
            rep = theorem_bmcpd(inp, squared_gap=args.squared_gap)
        consts = {"s": inp.s, "C": inp.C, "I_ch": inp.ich}
        consts.update({k: v for k, v in rep.constants.items() if k not in ("s", "C", "ich")})
        if header is None:
            header = ["alpha", "bound_a", "bound_b", "beta", *consts]
        rows.append([a, *(args.fmt(v) for v in (rep.bound_a, rep.bound_b, rep.beta)),
                     *(args.fmt(v) for v in consts.values())])
    _emit(_csv_text(header, rows), args.out)
    return 0


def cmd_simulate(args) -> int:
    try:
        cfg_obj = json.loads(_read_text(args.config))
    except json.JSONDecodeError as exc:
        raise ValueError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg_obj, dict):
        raise ValueError("config must be a JSON object")
    if args.seed is not None:
        cfg_obj["master_seed"] = args.seed
    cfg = ExperimentConfig.from_dict(cfg_obj)
    table = run_experiment(cfg, threads=args.threads)
    if args.out is None:
        sys.stdout.write(dumps_json(table) + "\n" if args.format == "json" else dumps_csv(table))
    else:
        write_results(table, args.out, args.format)
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--full-precision", action="store_true",
                        help="print 17 significant digits instead of 6 decimals")

    ap = _Parser(prog="privcpd", description="Locally private offline change-point detection.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("divergence", parents=[common],
                        help="divergence between two pmfs",
                        description="Print one divergence value (nats) on stdout.")
    sp.add_argument("--kind", choices=DIVERGENCES, required=True)
    sp.add_argument("--p", required=True, help="comma-separated pmf")
    sp.add_argument("--q", required=True, help="comma-separated pmf")
    sp.add_argument("--order", type=float, default=2.0, help="Renyi order (>= 1, or inf)")
    sp.add_argument("--lam", type=float, default=0.5, help="lambda for f-lambda")
    sp.set_defaults(func=cmd_divergence)

    sp = sub.add_parser("mechanism", parents=[common], help="build an LDP channel",
                        description='Print the channel as JSON {"rows": [[...]], "epsilon": e}; '
                        "bm also reports tau (and in_s, ich when tau* is selected).")
    sp.add_argument("--kind", choices=("rr", "bm"), required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--q", type=int, help="alphabet size (rr)")
    sp.add_argument("--p0", help="pre-change pmf (bm)")
    sp.add_argument("--p1", help="post-change pmf (bm)")
    sp.add_argument("--tau", type=float, help="threshold (bm); default tau*")
    sp.set_defaults(func=cmd_mechanism)

    sp = sub.add_parser("sdpi", parents=[common], help="contraction coefficient of a channel",
                        description="Print the estimate as JSON with keys eta, achieved_ratio, "
                        "is_closed_form, witness_p0, witness_p1, degenerate.")
    sp.add_argument("--channel", choices=("rr", "file"), default="rr")
    sp.add_argument("--q", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--channel-file", help='channel JSON {"rows": ...}')
    sp.add_argument("--kind", choices=SDPI_KINDS, required=True)
    sp.add_argument("--order", type=float, default=2.0, help="Renyi order for --kind renyi")
    sp.set_defaults(func=cmd_sdpi)

    sp = sub.add_parser("detect", parents=[common], help="estimate the change point",
                        description="Print CSV 'k_hat' with one row. With --scores PATH, write "
                        "CSV columns k, score (k is 1-based) to PATH ('-' for stdout).")
    sp.add_argument("--data", required=True,
                    help="JSON list / {'symbols': [...]} or one integer per line; '-' for stdin")
    sp.add_argument("--p0", required=True)
    sp.add_argument("--p1", required=True)
    sp.add_argument("--mechanism", choices=("none", "rr", "bm"), default="none")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--seed", type=int, default=0, help="privatization seed")
    sp.add_argument("--scores", metavar="PATH")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("bound", parents=[common], help="theoretical accuracy bounds",
                        description="CSV columns: alpha, bound_a (series term), bound_b "
                        "(Chernoff term), beta = min(1, 2 min(bound_a, bound_b)), then s, C, "
                        "I_ch and s_r, C_r (rr) or s_b, C_b, C_tilde_b (bm).")
    sp.add_argument("--p0", required=True)
    sp.add_argument("--p1", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--alpha", required=True, help="'a:b[:step]' or comma list")
    sp.add_argument("--mechanism", choices=("none", "rr", "bm"), default="none")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--squared-gap", action="store_true",
                    help="square the S_tau gap in the bm series constant (sensitivity study)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo experiment",
                        description="Run the experiment described by a JSON config with the "
                        "ExperimentConfig fields. Numeric cells are written losslessly.")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--threads", type=int, default=0, help="0 = auto")
    sp.add_argument("--seed", type=int, help="override master_seed")
    sp.set_defaults(func=cmd_simulate)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.fmt = _formatter(args.full_precision)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
