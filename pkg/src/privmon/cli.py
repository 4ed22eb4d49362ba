"""privmon command line.

Exit codes: 0 success, 2 validation error, 3 protocol error, 4 I/O error.
Set PRIVMON_LOG=DEBUG (or INFO, WARNING) for logs on stderr.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__

EXIT_OK, EXIT_VALIDATION, EXIT_PROTOCOL, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("privmon")


class CLIError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


def _read_formula(text: str):
    from .stl import parse_formula

    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    return parse_formula(text.strip())


def _read_trace(path: str, width: int):
    from .robustness import Trace

    trace = Trace.from_csv(path)
    trace.check_width(width)
    return trace


def _write(out: Optional[str], text: str) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _rob(v: int, width: int) -> str:
    from .robustness import rob_str, verdict

    return f"{rob_str(v, width)} {verdict(v)}"


# -- commands ------------------------------------------------------------------

def cmd_monitor(args) -> int:
    from .robustness import dp_taliro
    from .stl import encode

    f = _read_formula(args.formula)
    trace = _read_trace(args.trace, args.width)
    print(_rob(dp_taliro(trace, encode(f), args.width), args.width))
    return EXIT_OK


def cmd_synth(args) -> int:
    from .circuit.monitor import build_monitor_netlist

    net = build_monitor_netlist(args.n, args.m, args.width)
    _write(args.out, net.serialize())
    stats = net.stats()
    stats["cycles"] = net.params["cycles"]
    summary = " ".join(f"{k}={v}" for k, v in stats.items())
    print(summary, file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_sim(args) -> int:
    from .circuit.monitor import decode_output, evaluator_bits, garbler_bits
    from .circuit.netlist import Netlist
    from .circuit.sim import simulate
    from .stl import encode

    net = Netlist.deserialize(Path(args.netlist).read_text())
    try:
        n, m, width = (int(net.params[k]) for k in ("N", "M", "W"))
    except KeyError:
        raise CLIError("netlist has no PARAMS line with N, M and W") from None
    f = _read_formula(args.formula)
    trace = _read_trace(args.trace, width)
    if len(trace) > n:
        raise CLIError(f"trace has {len(trace)} samples, netlist holds {n}")
    enc = encode(f, m)
    cycles = args.cycles or int(net.params.get("cycles", 0)) or None
    if cycles is None:
        raise CLIError("cycle budget unknown; pass --cycles")
    res = simulate(net, garbler_bits(enc, m, width), evaluator_bits(trace, n, width), cycles,
                   fixed=args.fixed)
    value, _ = decode_output(res.outputs, width)
    log.info("simulation used %d cycles", res.cycles_used)
    print(_rob(value, width))
    return EXIT_OK


def _session_params(args):
    from .protocol import SessionParams

    return SessionParams(args.n, args.m, args.width, args.kappa, args.cycles)


def cmd_garble(args) -> int:
    from .protocol import Channel, listen_once, run_garbler
    from .stl import encode

    params = _session_params(args)
    enc = encode(_read_formula(args.formula), params.m)
    print(f"listening on {args.listen}", file=sys.stderr)
    sock = listen_once(args.listen)
    with sock:
        chan = Channel(sock)
        value = run_garbler(chan, params, enc)
    log.info("sent %d bytes, received %d", chan.stats.bytes_sent, chan.stats.bytes_received)
    print(_rob(value, params.width))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .protocol import Channel, connect, run_evaluator

    params = _session_params(args)
    trace = _read_trace(args.trace, params.width)
    if len(trace) > params.n:
        raise CLIError(f"trace has {len(trace)} samples, session holds {params.n}")
    with connect(args.connect) as sock:
        chan = Channel(sock)
        value = run_evaluator(chan, params, trace)
    log.info("peak table buffer %d bytes", chan.stats.peak_buffer)
    print(_rob(value, params.width))
    return EXIT_OK


def cmd_gen(args) -> int:
    from .gen import random_formula, random_trace
    from .stl import format_formula

    if args.kind == "trace":
        text = random_trace(args.n, args.seed).to_csv()
    else:
        text = format_formula(random_formula(args.depth, args.seed)) + "\n"
    _write(args.out, text)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import sweep, write_csv

    records = sweep(args.n, args.depth, args.reps, seed=args.seed or 0, kappa=args.kappa,
                    cycles=args.cycles)
    if args.out in (None, "-"):
        count = write_csv(records, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            count = write_csv(records, fh)
    log.info("wrote %d rows", count)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privmon", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"privmon {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def width(sp):
        sp.add_argument("--width", type=int, default=32, help="word size in bits (default 32)")

    def session(sp):
        sp.add_argument("--n", type=int, required=True, help="trace capacity")
        sp.add_argument("--m", type=int, required=True, help="formula node capacity")
        width(sp)
        sp.add_argument("--kappa", type=int, default=128, choices=(128, 256))
        sp.add_argument("--cycles", type=int, default=None,
                        help="fixed cycle count (default: worst case for n, m)")

    formula_help = "formula text, or @path to read it from a file"

    sp = sub.add_parser("monitor", help="cleartext robustness of a trace")
    sp.add_argument("--trace", required=True, help="CSV with header t,x")
    sp.add_argument("--formula", required=True, help=formula_help)
    width(sp)
    sp.set_defaults(func=cmd_monitor)

    sp = sub.add_parser("synth", help="write the monitor netlist")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    width(sp)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("sim", help="run a netlist in cleartext")
    sp.add_argument("--netlist", required=True)
    sp.add_argument("--trace", required=True)
    sp.add_argument("--formula", required=True, help=formula_help)
    sp.add_argument("--cycles", type=int, default=None)
    sp.add_argument("--fixed", action="store_true", help="run every cycle, ignore early done")
    sp.set_defaults(func=cmd_sim)

    sp = sub.add_parser("garble", help="formula owner's side of a session")
    sp.add_argument("--listen", required=True, metavar="HOST:PORT")
    sp.add_argument("--formula", required=True, help=formula_help)
    session(sp)
    sp.set_defaults(func=cmd_garble)

    sp = sub.add_parser("evaluate", help="trace owner's side of a session")
    sp.add_argument("--connect", required=True, metavar="HOST:PORT")
    sp.add_argument("--trace", required=True)
    session(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("gen", help="random trace or template formula")
    sp.add_argument("kind", choices=("trace", "formula"))
    sp.add_argument("--n", type=int, default=10, help="trace length")
    sp.add_argument("--depth", type=int, default=3, choices=(3, 4))
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("bench", help="protocol sweep to CSV")
    sp.add_argument("--n", type=_int_list, default=[4, 8, 16], help="comma-separated lengths")
    sp.add_argument("--depth", type=_int_list, default=[3])
    sp.add_argument("--reps", type=int, default=3)
    sp.add_argument("--kappa", type=int, default=128, choices=(128, 256))
    sp.add_argument("--cycles", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_bench)
    return p


def _setup_logging() -> None:
    level = os.environ.get("PRIVMON_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .circuit.netlist import NetlistError
    from .circuit.sim import SimulationError
    from .protocol import NegotiationError, ProtocolError
    from .robustness import TraceError
    from .stl import FormulaError

    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except NegotiationError as exc:
        msg = str(exc)
        if not msg.startswith("NEGOTIATE-FAIL"):
            msg = f"NEGOTIATE-FAIL: {msg}"
        print(f"{msg} (reason {int(exc.reason)})", file=sys.stderr)
        return EXIT_PROTOCOL
    except ProtocolError as exc:
        print(f"protocol error: {exc} (reason {exc.reason.name})", file=sys.stderr)
        return EXIT_PROTOCOL
    except (FormulaError, TraceError, NetlistError, SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
