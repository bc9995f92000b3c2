"""Command-line front end.

Exit status: 0 success, 1 usage error, 2 crypto/parameter/format error,
3 I/O error. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from pathlib import Path

from . import analysis, cipher, codec
from .errors import EqSatError
from .keygen import generate_keypair, generate_keypair_divided, verify_keypair
from .model import Mode, Params
from .rng import deterministic, secure

EXIT_OK, EXIT_USAGE, EXIT_CRYPTO, EXIT_IO = 0, 1, 2, 3
PARAM_KEYS = ("mode", "k", "n", "m", "b", "e", "q")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def read_params_file(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for number, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep or key not in PARAM_KEYS:
            raise UsageError(f"{path}:{number}: expected one of {', '.join(PARAM_KEYS)} = value")
        values[key] = value.strip()
    return values


def _overrides(args) -> dict:
    given = {key: getattr(args, key, None) for key in PARAM_KEYS}
    if getattr(args, "params", None):
        given.update(read_params_file(args.params))
    out = {}
    for key, value in given.items():
        if value is None:
            continue
        try:
            out[key] = Mode.parse(value) if key == "mode" else int(value)
        except ValueError:
            raise UsageError(f"{key} must be an integer, got {value!r}") from None
    return out


def default_params(values: dict) -> Params:
    """Fill unspecified fields: b from the mode, e = 0.3 of the clause count
    (2^b for m4), q = 4."""
    missing = [key for key in ("n", "m", "k") if key not in values]
    if missing:
        raise UsageError(f"missing required parameter(s): {', '.join('--' + k for k in missing)}")
    mode = values.get("mode", Mode.M2)
    k, n, m = values["k"], values["n"], values["m"]
    if "b" in values:
        b = values["b"]
    elif mode is Mode.M2:
        b = 1
    elif mode is Mode.M3:
        b = max(1, min(4, int(math.log2(m))))
    else:
        b = 4
    if "e" in values:
        e = values["e"]
    elif mode is Mode.M4:
        e = 1 << b
    else:
        e = max(1, round(0.3 * m * n / k))
    return Params(k=k, n=n, m=m, e=e, b=b, q=values.get("q", 4), mode=mode)


def _rng(args):
    if getattr(args, "seed", None) is None:
        return secure()
    print("eqsat: warning: --seed selects a deterministic generator; output is not secure",
          file=sys.stderr)
    return deterministic(args.seed)


def _write_atomic(outputs: dict[str, bytes]) -> None:
    """Write every file to a temporary sibling, then rename them all into place."""
    staged = []
    try:
        for path, data in outputs.items():
            directory = os.path.dirname(os.path.abspath(path))
            fd, tmp = tempfile.mkstemp(dir=directory, prefix=".eqsat-")
            staged.append(tmp)
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
        for tmp, path in zip(staged, outputs):
            os.replace(tmp, path)
    finally:
        for tmp in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _emit(path: str | None, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        _write_atomic({path: data})


def cmd_keygen(args) -> int:
    params = default_params(_overrides(args))
    rng = _rng(args)
    generate = generate_keypair_divided if params.mode is Mode.M4 else generate_keypair
    pk, sk = generate(params, rng)
    _write_atomic({args.out_pk: codec.serialize_public_key(pk),
                   args.out_sk: codec.serialize_private_key(sk)})
    print(f"eqsat: {len(pk)} clauses of width {params.clause_width}, n={params.n}", file=sys.stderr)
    return EXIT_OK


def cmd_encrypt(args) -> int:
    pk = codec.deserialize_public_key(Path(args.pk).read_bytes())
    values = _overrides(args)
    params = cipher.resolve_params(pk, values.pop("mode", None), **values)
    plaintext = Path(args.input).read_bytes() if args.input != "-" else sys.stdin.buffer.read()
    ct = cipher.encrypt_message(pk, plaintext, rng=_rng(args), params=params, threads=args.threads)
    _emit(args.out, codec.serialize_ciphertext(ct))
    return EXIT_OK


def cmd_decrypt(args) -> int:
    sk = codec.deserialize_private_key(Path(args.sk).read_bytes())
    ct = codec.deserialize_ciphertext(Path(args.input).read_bytes())
    _emit(args.out, cipher.decrypt_message(ct, sk))
    return EXIT_OK


def cmd_export(args) -> int:
    pk = codec.deserialize_public_key(Path(args.pk).read_bytes())
    _emit(args.out, codec.export_dimacs(pk).encode("ascii"))
    return EXIT_OK


def cmd_analyze(args) -> int:
    out = sys.stdout
    if args.what == "space":
        if args.pk:
            params = codec.deserialize_public_key(Path(args.pk).read_bytes()).params
            values = _overrides(args)
            if "e" in values:
                params = params.replace(e=values["e"])
        else:
            params = default_params(_overrides(args))
        bits = analysis.search_space_bits(params)
        print(f"clauses={params.clause_count} e={params.e} log2_extractions={bits:.3f}", file=out)
        return EXIT_OK
    if not args.pk:
        raise UsageError(f"analyze {args.what} needs --pk")
    pk = codec.deserialize_public_key(Path(args.pk).read_bytes())
    sk = codec.deserialize_private_key(Path(args.sk).read_bytes()) if args.sk else None
    if args.what == "ber":
        if sk is None and args.strategy != "random":
            raise UsageError(f"strategy {args.strategy} needs --sk")
        ber = analysis.random_key_ber(pk, sk, args.trials, _rng(args), strategy=args.strategy)
        print(f"strategy={args.strategy} trials={args.trials} ber={ber:.4f}", file=out)
    elif args.what == "spectrum":
        values = _overrides(args)
        e = values.get("e", pk.params.e)
        stats = analysis.spectrum_stats(pk, e, args.trials, _rng(args), q=values.get("q"))
        print(f"trials={stats.trials} e={e} max_count={stats.max_count} "
              f"overflow_fraction={stats.overflow_fraction:.6f} "
              f"mean_abs_difference={stats.mean_abs_difference:.4f}", file=out)
        print("difference_histogram=" + ",".join(map(str, stats.difference_histogram.tolist())),
              file=out)
    elif args.what == "oracle":
        keys = analysis.brute_force_keys(pk)
        print(f"equilibrium_solutions={len(keys)}", file=out)
        if sk is not None:
            print(f"planted_key_found={sk in keys} complement_found={sk.complement() in keys} "
                  f"planted_verifies={verify_keypair(pk, sk).passed}", file=out)
    return EXIT_OK


DEFAULT_BENCH = (
    Params(k=4, n=512, m=20, e=768, b=1, q=4, mode=Mode.M2),
    Params(k=4, n=1024, m=20, e=1536, b=1, q=4, mode=Mode.M2),
    Params(k=4, n=512, m=20, e=768, b=4, q=4, mode=Mode.M3),
    Params(k=4, n=1024, m=20, e=1536, b=4, q=4, mode=Mode.M3),
    Params(k=2, n=512, m=20, e=1024, b=10, q=4, mode=Mode.M4),
)


def cmd_bench(args) -> int:
    params_set = [default_params(_overrides(args))] if args.n else list(DEFAULT_BENCH)
    report = analysis.run_bench(params_set, args.repetitions, _rng(args))
    _emit(args.out, report.to_csv().encode())
    return EXIT_OK


def _param_flags(parser) -> None:
    parser.add_argument("--mode", help="m2, m3 or m4")
    for name, text in (("n", "variables"), ("m", "literal multiplicity"),
                       ("k", "TRUE literals per clause"), ("b", "plaintext bits per block"),
                       ("e", "clauses extracted per block"), ("q", "bits per count")):
        parser.add_argument(f"--{name}", help=text)
    parser.add_argument("--params", metavar="FILE", help="key = value file overriding the flags")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eqsat", description="Equilibrium-SAT public-key encryption")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("keygen", help="generate a key pair")
    _param_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-pk", required=True)
    p.add_argument("--out-sk", required=True)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encrypt", help="encrypt a file")
    _param_flags(p)
    p.add_argument("--pk", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt a file")
    p.add_argument("--sk", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("export-dimacs", help="write the public key as DIMACS CNF")
    p.add_argument("--pk", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("analyze", help="run an analysis experiment")
    p.add_argument("what", choices=("ber", "spectrum", "space", "oracle"))
    _param_flags(p)
    p.add_argument("--pk")
    p.add_argument("--sk")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--strategy", choices=("random", "true", "flip"), default="random")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bench", help="time keygen/encrypt/decrypt and report sizes as CSV")
    _param_flags(p)
    p.add_argument("--repetitions", type=int, default=30)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_bench)
    return parser


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"eqsat: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EqSatError, ValueError) as exc:
        print(f"eqsat: error: {exc}", file=sys.stderr)
        return EXIT_CRYPTO
    except OSError as exc:
        print(f"eqsat: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE


def main() -> None:
    sys.exit(run())
