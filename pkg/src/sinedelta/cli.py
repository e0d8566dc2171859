"""Command-line entry point.

Subcommands: quantize, reconstruct, sweep, verify-theorem, bd, fit, info.
All randomness is seeded through flags, numeric output is printed at six
significant digits, and structured output is available behind
``--format json``. Exit codes: 0 success, 2 usage or input problems
(including unreadable paths), 3 numeric failures, 4 corrupt containers.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import codec
from .adapter import DEFAULT_OMEGA, Flavor, reconstruct_quantized_delta
from .bd import Interpolator, compare, read_curve_csv
from .errors import CorruptDataError, InputError, NumericError
from .fitting import (DEFAULT_ITERATIONS, DEFAULT_LEARNING_RATE, expressivity_report,
                      expressivity_to_csv)
from .quantize import quantization_error, quantize_matrix
from .theory import check_theorem, sweep_stable_rank, sweep_to_csv

DEFAULT_VERIFY_SIZES = (16, 32, 48, 64, 96, 128)
DEFAULT_VERIFY_BITS = (2, 3, 4, 5, 6, 7, 8)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _round6(x: float) -> float:
    return float(f"{x:.6g}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _bits_list(text: str) -> list[int | None]:
    out: list[int | None] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if part.lower() == "full":
            out.append(None)
        else:
            try:
                out.append(int(part))
            except ValueError:
                raise argparse.ArgumentTypeError(
                    f"bits entries must be integers or 'full', got {part!r}")
    return out


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _print_json(payload) -> None:
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_quantize(args) -> int:
    tensors = codec.read_dense(args.input)
    flavor = Flavor.parse(args.flavor)

    def one(item):
        name, values = item
        return name, values, quantize_matrix(values, args.bits)

    items = list(tensors.items())
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(item) for item in items]

    quantized = {name: q for name, _, q in results}
    total = codec.write_compressed(args.output, quantized, args.bits, int(flavor),
                                   args.omega, args.gamma_multiplier)
    stats = []
    for name, values, q in results:
        residual = quantization_error(values, q)
        mse = float(np.mean(residual * residual))
        width = codec.index_width(len(q.codebook))
        entropy = codec.index_entropy(q.indices)
        stats.append({"name": name, "mse": _round6(mse),
                      "packed_bits_per_index": width,
                      "entropy_bits_per_index": _round6(entropy),
                      "entropy_headroom_bits": _round6(width - entropy)})
    if args.format == "json":
        _print_json({"output": args.output, "bits": args.bits, "flavor": flavor.name.lower(),
                     "omega": _round6(args.omega),
                     "gamma_multiplier": _round6(args.gamma_multiplier),
                     "total_bytes": total, "tensors": stats})
    else:
        for s in stats:
            print(f"{s['name']}: mse {_fmt(s['mse'])}, "
                  f"{s['packed_bits_per_index']} bits/index packed, "
                  f"entropy {_fmt(s['entropy_bits_per_index'])} "
                  f"(headroom {_fmt(s['entropy_headroom_bits'])})")
        print(f"wrote {len(stats)} tensors, {total} bytes to {args.output}")
    return 0


def _paired_names(names) -> list[str]:
    bases = {}
    for name in names:
        if name.endswith(".A"):
            bases.setdefault(name[:-2], set()).add("A")
        elif name.endswith(".B"):
            bases.setdefault(name[:-2], set()).add("B")
        else:
            raise InputError(f"tensor {name!r} has no .A/.B suffix, cannot pair")
    orphans = [f"{base}.{next(iter({'A', 'B'} - sides))}"
               for base, sides in bases.items() if sides != {"A", "B"}]
    if orphans:
        raise InputError("unpaired tensors, missing " + ", ".join(sorted(orphans)))
    return sorted(bases)


def cmd_reconstruct(args) -> int:
    cf = codec.read_compressed(args.input)
    flavor = Flavor.parse(args.flavor) if args.flavor else Flavor(cf.flavor)
    omega = args.omega if args.omega is not None else cf.omega
    multiplier = (args.gamma_multiplier if args.gamma_multiplier is not None
                  else cf.gamma_multiplier)
    deltas = {}
    for base in _paired_names(cf.tensors):
        deltas[base] = reconstruct_quantized_delta(
            cf.tensors[base + ".A"], cf.tensors[base + ".B"],
            flavor, omega=omega, gamma_multiplier=multiplier)
    total = codec.write_dense(args.output, deltas)
    if args.format == "json":
        _print_json({"output": args.output, "flavor": flavor.name.lower(),
                     "omega": _round6(omega), "gamma_multiplier": _round6(multiplier),
                     "deltas": sorted(deltas), "total_bytes": total})
    else:
        print(f"reconstructed {len(deltas)} deltas ({flavor.name.lower()}, "
              f"omega {_fmt(omega)}), {total} bytes to {args.output}")
    return 0


def cmd_sweep(args) -> int:
    seeds = list(range(args.seeds))
    if args.threads > 1:
        cells = [(k, seed) for k in args.ranks for seed in seeds]

        def one(cell):
            k, seed = cell
            return sweep_stable_rank(args.m, args.n, [k], args.omegas, args.bits,
                                     [seed], args.gamma_multiplier)

        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            chunks = list(pool.map(one, cells))
        points = [p for chunk in chunks for p in chunk]
    else:
        points = sweep_stable_rank(args.m, args.n, args.ranks, args.omegas,
                                   args.bits, seeds, args.gamma_multiplier)
    if args.format == "json":
        payload = [{"rank": p.rank, "omega": _round6(p.omega),
                    "bits": "full" if p.bits is None else p.bits,
                    "sr_plain": _round6(p.sr_plain), "sr_quantized": _round6(p.sr_quantized),
                    "sr_sine": _round6(p.sr_sine),
                    "sr_sine_quantized": _round6(p.sr_sine_quantized),
                    "seed": p.seed} for p in points]
        _print_json(payload)
    else:
        _emit(sweep_to_csv(points), args.output)
        if args.output is not None:
            print(f"wrote {len(points)} sweep points to {args.output}")
    return 0


def cmd_verify_theorem(args) -> int:
    total = args.seeds
    held = 0
    preconditioned = 0
    held_preconditioned = 0
    for i in range(total):
        size = args.sizes[i % len(args.sizes)]
        bits = args.bits[i % len(args.bits)]
        rng = np.random.default_rng(i)
        g = rng.normal(size=(size, size))
        target_top = rng.uniform(50.0, 150.0)
        a = g * (target_top / (2.0 * math.sqrt(size)))
        result = check_theorem(a, bits)
        held += result.holds
        preconditioned += result.preconditions_met
        held_preconditioned += result.holds and result.preconditions_met
    if args.format == "json":
        _print_json({"checks": total, "holds": held, "preconditions_met": preconditioned,
                     "holds_when_preconditioned": held_preconditioned})
    else:
        print(f"holds: {held}/{total} (preconditions met: {preconditioned}, "
              f"of which held: {held_preconditioned})")
    return 0


def cmd_bd(args) -> int:
    anchor = read_curve_csv(args.anchor)
    test = read_curve_csv(args.test)
    result = compare(anchor, test, Interpolator.parse(args.interpolator))
    if args.format == "json":
        _print_json({"bd_rate_percent": _round6(result.bd_rate),
                     "bd_quality": _round6(result.bd_quality),
                     "overlap_rate": [_round6(result.overlap[0]), _round6(result.overlap[1])],
                     "interpolator": result.interpolator.value,
                     "anchor": anchor.label, "test": test.label})
    else:
        print(f"bd_rate: {result.bd_rate:+.6g}%")
        print(f"bd_quality: {result.bd_quality:+.6g}")
        print(f"overlap: rate {_fmt(result.overlap[0])} to {_fmt(result.overlap[1])}")
        print(f"interpolator: {result.interpolator.value}")
    return 0


def cmd_fit(args) -> int:
    rows = expressivity_report(args.m, args.n, args.ranks, list(range(args.seeds)),
                               omega=args.omega, learning_rate=args.learning_rate,
                               iterations=args.iterations)
    if args.format == "json":
        payload = [{"rank": r.rank, "seed": r.seed, "flavor": r.flavor.name.lower(),
                    "final_loss": _round6(r.final_loss),
                    "stable_rank": None if r.delta_stable_rank is None
                    else _round6(r.delta_stable_rank),
                    "iters": r.iterations_run} for r in rows]
        _print_json(payload)
    else:
        _emit(expressivity_to_csv(rows), args.output)
        if args.output is not None:
            print(f"wrote {len(rows)} fit rows to {args.output}")
    return 0


def cmd_info(args) -> int:
    with open(args.input, "rb") as fh:
        blob = fh.read()
    magic = blob[:4]
    if magic == codec.COMPRESSED_MAGIC:
        cf = codec.compressed_from_bytes(blob)
        rows = []
        for name, q in cf.tensors.items():
            rows.append({"name": name, "shape": list(q.shape),
                         "codebook_size": len(q.codebook),
                         "packed_bits_per_index": codec.index_width(len(q.codebook)),
                         "entropy_bits_per_index": _round6(codec.index_entropy(q.indices))})
        if args.format == "json":
            _print_json({"format": "compressed", "bits": cf.bits,
                         "flavor": Flavor(cf.flavor).name.lower(),
                         "omega": _round6(cf.omega),
                         "gamma_multiplier": _round6(cf.gamma_multiplier),
                         "total_bytes": len(blob), "tensors": rows})
        else:
            print(f"compressed container, {len(blob)} bytes, {len(rows)} tensors")
            print(f"bits {cf.bits}, flavor {Flavor(cf.flavor).name.lower()}, "
                  f"omega {_fmt(cf.omega)}, gamma multiplier {_fmt(cf.gamma_multiplier)}")
            for r in rows:
                shape = "x".join(str(d) for d in r["shape"])
                print(f"  {r['name']}: {shape}, {r['codebook_size']} centers, "
                      f"{r['packed_bits_per_index']} bits/index, "
                      f"entropy {_fmt(r['entropy_bits_per_index'])}")
    elif magic == codec.DENSE_MAGIC:
        tensors = codec.dense_from_bytes(blob)
        rows = [{"name": name, "shape": list(t.shape)} for name, t in tensors.items()]
        if args.format == "json":
            _print_json({"format": "dense", "total_bytes": len(blob), "tensors": rows})
        else:
            print(f"dense container, {len(blob)} bytes, {len(rows)} tensors")
            for r in rows:
                print(f"  {r['name']}: " + "x".join(str(d) for d in r["shape"]))
    else:
        raise CorruptDataError(f"unrecognized magic {magic!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sinedelta",
        description="Quantized low-rank adapter compression with sine reconstruction.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_format(p):
        p.add_argument("--format", choices=("text", "json"), default="text",
                       help="output style (default text)")

    p = sub.add_parser("quantize", help="quantize a dense tensor container")
    p.add_argument("--input", required=True, help="dense container path")
    p.add_argument("--output", required=True, help="compressed container path")
    p.add_argument("--bits", type=int, required=True, help="codebook bits per tensor, 1..16")
    p.add_argument("--flavor", choices=("plain", "sine"), default="sine",
                   help="reconstruction recorded in the header (default sine)")
    p.add_argument("--omega", type=float, default=DEFAULT_OMEGA,
                   help=f"sine frequency recorded in the header (default {DEFAULT_OMEGA:g})")
    p.add_argument("--gamma-multiplier", type=float, default=1.0,
                   help="scale multiplier recorded in the header (default 1)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for per-tensor quantization (default 1)")
    add_format(p)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("reconstruct", help="decode weight deltas from a compressed container")
    p.add_argument("--input", required=True, help="compressed container path")
    p.add_argument("--output", required=True, help="dense container path for the deltas")
    p.add_argument("--flavor", choices=("plain", "sine"), default=None,
                   help="override the flavor stored in the file")
    p.add_argument("--omega", type=float, default=None,
                   help="override the frequency stored in the file")
    p.add_argument("--gamma-multiplier", type=float, default=None,
                   help="override the scale multiplier stored in the file")
    add_format(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", help="stable-rank sweep over a parameter grid")
    p.add_argument("--m", type=int, required=True, help="delta row count")
    p.add_argument("--n", type=int, required=True, help="delta column count")
    p.add_argument("--ranks", type=_int_list, required=True, help="comma-separated ranks")
    p.add_argument("--omegas", type=_float_list, required=True,
                   help="comma-separated frequencies")
    p.add_argument("--bits", type=_bits_list, required=True,
                   help="comma-separated bit widths; 'full' for no quantization")
    p.add_argument("--seeds", type=int, default=1, help="number of seeds, 0..N-1 (default 1)")
    p.add_argument("--gamma-multiplier", type=float, default=1.0,
                   help="scale multiplier (default 1)")
    p.add_argument("--output", default=None, help="CSV path (default stdout)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads over grid cells (default 1)")
    add_format(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-theorem",
                       help="sample random matrices and check the stable-rank bound")
    p.add_argument("--seeds", type=int, default=100,
                   help="number of sampled matrices (default 100)")
    p.add_argument("--sizes", type=_int_list, default=list(DEFAULT_VERIFY_SIZES),
                   help="square sizes cycled over samples")
    p.add_argument("--bits", type=_int_list, default=list(DEFAULT_VERIFY_BITS),
                   help="bit widths cycled over samples")
    add_format(p)
    p.set_defaults(func=cmd_verify_theorem)

    p = sub.add_parser("bd", help="Bjontegaard delta between two rate-quality CSV curves")
    p.add_argument("--anchor", required=True, help="anchor curve CSV (rate,quality)")
    p.add_argument("--test", required=True, help="test curve CSV (rate,quality)")
    p.add_argument("--interpolator", choices=("akima", "cubic"), default="akima",
                   help="curve interpolant (default akima)")
    add_format(p)
    p.set_defaults(func=cmd_bd)

    p = sub.add_parser("fit", help="expressivity comparison on synthetic targets")
    p.add_argument("--m", type=int, default=64, help="target rows (default 64)")
    p.add_argument("--n", type=int, default=64, help="target columns (default 64)")
    p.add_argument("--ranks", type=_int_list, default=[4], help="comma-separated ranks")
    p.add_argument("--seeds", type=int, default=20, help="number of seeds, 0..N-1 (default 20)")
    p.add_argument("--omega", type=float, default=DEFAULT_OMEGA,
                   help=f"sine frequency (default {DEFAULT_OMEGA:g})")
    p.add_argument("--learning-rate", type=float, default=DEFAULT_LEARNING_RATE,
                   help=f"base step size (default {DEFAULT_LEARNING_RATE:g})")
    p.add_argument("--iterations", type=int, default=DEFAULT_ITERATIONS,
                   help=f"iteration budget (default {DEFAULT_ITERATIONS})")
    p.add_argument("--output", default=None, help="CSV path (default stdout)")
    add_format(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("info", help="describe a container file")
    p.add_argument("--input", required=True, help="container path")
    add_format(p)
    p.set_defaults(func=cmd_info)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except CorruptDataError as exc:
        print(f"corrupt data: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
