"""Command-line entry point: ``tpir {params,gendb,retrieve,serve,audit}``."""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import audit as audits
from .field import PrimeField
from .mds import make_mds
from .params import ParameterError, capacity, derive_params, per_server_counts
from .protocol import ProtocolError, RecordSet, client_query, reconstruct, server_answer
from .transport import TransportError, fetch_answers, parse_endpoint, serve
from .wire import WireError, decode_message, encode_message

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _scheme_args(ap: argparse.ArgumentParser, records: bool = True) -> None:
    if records:
        ap.add_argument("-M", type=int, required=True, help="number of records")
    ap.add_argument("-N", type=int, required=True, help="number of servers")
    ap.add_argument("-T", type=int, required=True, help="collusion threshold")
    ap.add_argument("-q", type=int, default=None, help="prime field size >= N (default: smallest prime >= N)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tpir", description="Capacity-achieving T-private information retrieval")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="print the derived scheme parameters")
    _scheme_args(p)

    p = sub.add_parser("gendb", help="write a random database file")
    _scheme_args(p)
    p.add_argument("--seed", type=int, default=0, help="RNG seed for the record contents")
    p.add_argument("-o", "--out", required=True, type=Path, help="output database file")

    p = sub.add_parser("retrieve", help="run one retrieval round")
    p.add_argument("--db", required=True, type=Path, help="database file written by gendb")
    _scheme_args(p, records=False)
    p.add_argument("--theta", type=int, required=True, help="1-based record index")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for the query secrets")
    p.add_argument("--servers", default=None, help="comma-separated host:port list, one per server")
    p.add_argument("--report", type=Path, default=None, help="also write a key=value report here")

    p = sub.add_parser("serve", help="answer framed queries against a database file")
    p.add_argument("--db", required=True, type=Path, help="database file written by gendb")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, required=True, help="TCP port, 0 picks a free one")

    p = sub.add_parser("audit", help="run one audit and print its report")
    p.add_argument("--mode", required=True, choices=["structure", "correctness", "privacy-exact", "privacy-sampled"])
    _scheme_args(p)
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--trials", type=int, default=100, help="rounds for correctness mode")
    p.add_argument("--samples", type=int, default=10**5, help="samples per record index for privacy-sampled mode")
    p.add_argument("--report", type=Path, default=None, help="also write the report here")
    return ap


def _params(args, M: Optional[int] = None):
    try:
        return derive_params(args.M if M is None else M, args.N, args.T, args.q)
    except ParameterError as exc:
        raise UsageError(str(exc)) from exc


def _seq(xs) -> str:
    return " ".join(str(x) for x in xs)


def cmd_params(args) -> int:
    p = _params(args)
    first, rest = per_server_counts(p)
    print(f"M {p.M}  N {p.N}  T {p.T}  q {p.q}")
    print(f"d {p.d}  n {p.n}  t {p.t}")
    print(f"L {p.L}")
    print(f"L~ {p.Ltilde}")
    print(f"alpha {_seq(p.alpha)}")
    print(f"beta {_seq(p.beta)}")
    print(f"d_i {_seq(p.d_arr)}")
    print(f"answers per server {_seq([first] * p.T + [rest] * (p.N - p.T))}")
    print(f"D {p.D}")
    print(f"rate {p.rate}")
    print(f"capacity {capacity(p.M, p.N, p.T)}")
    return EXIT_OK


def cmd_gendb(args) -> int:
    p = _params(args)
    db = RecordSet.random(p.M, p.L, p.q, np.random.default_rng(args.seed))
    args.out.write_bytes(encode_message(db))
    print(f"wrote {p.M} records of {p.L} symbols over F_{p.q} to {args.out}")
    return EXIT_OK


def _load_db(path: Path) -> RecordSet:
    db = decode_message(path.read_bytes())
    if not isinstance(db, RecordSet):
        raise WireError(f"{path} is not a database file")
    return db


def cmd_retrieve(args) -> int:
    db = _load_db(args.db)
    if args.q is not None and args.q != db.q:
        raise UsageError(f"-q {args.q} does not match the database field size {db.q}")
    args.q = db.q
    p = _params(args, M=db.M)
    if db.L != p.L:
        raise UsageError(f"database records have {db.L} symbols, scheme needs L={p.L}")
    if not 1 <= args.theta <= p.M:
        raise UsageError(f"theta={args.theta} outside [1, {p.M}]")
    code = make_mds(p.N, p.T, PrimeField(p.q))
    state, queries = client_query(p, args.theta, code, np.random.default_rng(args.seed))
    if args.servers:
        endpoints = [parse_endpoint(e) for e in args.servers.split(",")]
        if len(endpoints) != p.N:
            raise UsageError(f"{len(endpoints)} endpoints given for N={p.N} servers")
        answers = fetch_answers(endpoints, queries)
    else:
        answers = [server_answer(qj, db) for qj in queries]
    w = reconstruct(state, answers, code)
    downloaded = sum(len(a.values) for a in answers)
    ok = np.array_equal(w, db.record(args.theta))
    rate = Fraction(p.L, downloaded)
    print(f"downloaded {downloaded} symbols, rate {rate}, {'SUCCESS' if ok else 'FAILURE'}")
    if args.report:
        args.report.write_text(
            f"check=retrieve\nparams=M={p.M},N={p.N},T={p.T},q={p.q}\ntheta={args.theta}\n"
            f"downloaded={downloaded}\nrate={rate}\nverdict={'pass' if ok else 'fail'}\nseed={args.seed}\n"
        )
    return EXIT_OK if ok else EXIT_FAIL


def cmd_serve(args) -> int:
    srv = serve(_load_db(args.db), args.host, args.port)
    host, port = srv.server_address[:2]
    print(f"serving {args.db} on {host}:{port}", flush=True)
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.server_close()
    return EXIT_OK


def cmd_audit(args) -> int:
    p = _params(args)
    try:
        if args.mode == "structure":
            rep = audits.audit_structure(p)
        elif args.mode == "correctness":
            rep = audits.audit_correctness(p, args.trials, args.seed)
        elif args.mode == "privacy-exact":
            rep = audits.audit_privacy_exact(p)
        else:
            rep = audits.audit_privacy_sampled(p, args.samples, args.seed)
    except (audits.InfeasibleEnumerationError, ParameterError) as exc:
        raise UsageError(str(exc)) from exc
    text = rep.to_text()
    print(text, end="")
    if args.report:
        args.report.write_text(text)
    return EXIT_OK if rep.passed else EXIT_FAIL


_COMMANDS = {"params": cmd_params, "gendb": cmd_gendb, "retrieve": cmd_retrieve, "serve": cmd_serve, "audit": cmd_audit}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (WireError, ProtocolError, TransportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
