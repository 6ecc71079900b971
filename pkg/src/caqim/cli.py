"""``caqim`` command line: learn, embed, extract, attack, evaluate.

Exit status is 0 on success, 2 for usage errors and 3 for data errors.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .codebook import KeyFile, KeyFormatError, load_assignment, save_assignment
from .dct import BANDS, BandSelector
from .evaluate import evaluate_corpus, message_indices, ser_sweep, summarise, write_csv
from .lattice import CosetTable, canonical_name, make_lattice
from .messages import format_bits, indices_to_bits, read_bits
from .metrics import NOISE_KINDS, NoiseChannel, apply_noise
from .pgm import PGMError, load_plane, read_pgm, write_pgm
from .pipeline import capacity, embed_plane, extract_plane, learn_from_planes, report
from .qim import Scheme, SchemeKind, default_epsilon

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3
_DEFAULTS = {"lattice": "a2", "alpha": 4, "delta": 1.0, "dim": None}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _common(p: argparse.ArgumentParser, key: bool = True):
    g = p.add_argument_group("lattice")
    g.add_argument("--lattice", choices=["z", "a2", "d4", "e8"],
                   help="fine lattice (default a2)")
    g.add_argument("--dim", type=int, help="dimension for z (default 1)")
    g.add_argument("--alpha", type=int, help="nesting ratio (default 4)")
    g.add_argument("--delta", type=float, help="step size (default 1.0)")
    g.add_argument("--epsilon", type=float, help="MD back-off (default 1e-3 d_min)")
    p.add_argument("--band", choices=sorted(BANDS), default="low")
    p.add_argument("--k", type=int, default=1, help="messages per block")
    p.add_argument("--seed", type=int, default=0)
    if key:
        p.add_argument("--key", type=Path, help="codebook key file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="caqim",
                                 description="Lattice QIM watermarking of 8-bit PGM images.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="learn a codebook permutation from images")
    _common(p, key=False)
    p.add_argument("images", nargs="+", type=Path)
    p.add_argument("--out", "-o", type=Path, required=True, help="key file to write")
    p.add_argument("--bits", type=Path, help="bit file consumed across the images in order")
    p.add_argument("--p0", type=float, default=0.9, help="P(bit = 0) for random messages")

    p = sub.add_parser("embed", help="embed a message into an image")
    _common(p)
    p.add_argument("image", type=Path)
    p.add_argument("--out", "-o", type=Path, required=True)
    p.add_argument("--scheme", choices=[k.value for k in SchemeKind], default="qim")
    p.add_argument("--bits", type=Path, help="bit file (default: random with --p0)")
    p.add_argument("--p0", type=float, default=0.9)
    p.add_argument("--bits-out", type=Path, help="write the embedded bits here")

    p = sub.add_parser("extract", help="blind extraction of the embedded bits")
    _common(p)
    p.add_argument("image", type=Path)
    p.add_argument("--scheme", choices=[k.value for k in SchemeKind], default="qim")
    p.add_argument("--out", "-o", type=Path, help="bit file (default stdout)")

    p = sub.add_parser("attack", help="apply a noise channel to an image")
    p.add_argument("image", type=Path)
    p.add_argument("--out", "-o", type=Path, required=True)
    p.add_argument("--noise", required=True,
                   choices=list(NOISE_KINDS) + ["gaussian"])
    p.add_argument("--level", type=float, required=True,
                   help="sigma for awgn/speckle, probability otherwise")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("evaluate", help="sweep schemes, lattices, bands and k over a corpus")
    p.add_argument("images", nargs="+", type=Path)
    p.add_argument("--out-dir", type=Path, required=True,
                   help="receives metrics.csv, ser_sweep.csv and figures")
    p.add_argument("--lattices", default="a2,d4,e8", help="comma list")
    p.add_argument("--schemes", default="qim,ca,md,camd", help="comma list")
    p.add_argument("--bands", default="low,mid,high", help="comma list")
    p.add_argument("--ks", default="1", help="comma list of messages per block")
    p.add_argument("--dim", type=int, help="dimension for z")
    p.add_argument("--alpha", type=int, default=4)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--p0", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attack", choices=list(NOISE_KINDS) + ["gaussian"],
                   help="attack applied before extraction")
    p.add_argument("--attack-level", type=float, default=0.0)
    p.add_argument("--sweep-noise", choices=list(NOISE_KINDS) + ["gaussian"],
                   help="also write ser_sweep.csv for CA-QIM under this noise")
    p.add_argument("--sweep-levels", default="0,1,2,4,8")
    p.add_argument("--no-figures", action="store_true")
    return ap


# ---------------------------------------------------------------------------
# helpers

def _split(text: str, cast=str) -> list:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError(f"empty list {text!r}")
    try:
        return [cast(t) for t in items]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _resolve(args, need_key: bool):
    """Lattice, table, epsilon and key from flags and/or the key file."""
    key = None
    if getattr(args, "key", None) is not None:
        try:
            key = load_assignment(args.key)
        except (OSError, KeyFormatError) as exc:
            raise DataError(f"{args.key}: {exc}") from None
    if need_key and key is None:
        raise UsageError("--key is required for content-aware schemes")
    if key is not None:
        given = {"lattice": args.lattice and canonical_name(args.lattice),
                 "alpha": args.alpha, "delta": args.delta, "dim": args.dim,
                 "epsilon": args.epsilon}
        stored = {"lattice": key.lattice, "alpha": key.alpha, "delta": key.delta,
                  "dim": key.dim, "epsilon": key.epsilon}
        for name, val in given.items():
            if val is not None and val != stored[name]:
                raise UsageError(f"--{name} {val} conflicts with key ({stored[name]})")
        spec = make_lattice(key.lattice, alpha=key.alpha, delta=key.delta, dim=key.dim)
        eps = key.epsilon
    else:
        try:
            spec = make_lattice(args.lattice or _DEFAULTS["lattice"],
                                alpha=args.alpha or _DEFAULTS["alpha"],
                                delta=args.delta if args.delta is not None else 1.0,
                                dim=args.dim)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        eps = default_epsilon(spec) if args.epsilon is None else args.epsilon
    if not 0 < eps < spec.r_pack:
        raise UsageError(f"epsilon must lie in (0, {spec.r_pack})")
    try:
        sel = BandSelector(args.band, args.k)
        sel.check(spec.dim)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return spec, CosetTable(spec), sel, eps, key


def _load(path: Path) -> np.ndarray:
    try:
        return load_plane(path)
    except (OSError, PGMError) as exc:
        raise DataError(str(exc)) from None


def _messages(args, spec, sel, planes):
    """Per-image message index arrays from --bits or seeded random bits."""
    bits = None
    if args.bits is not None:
        try:
            bits = read_bits(args.bits)
        except (OSError, ValueError) as exc:
            raise DataError(str(exc)) from None
    out, offset = [], 0
    for i, plane in enumerate(planes):
        n = capacity(plane.shape, sel, spec.dim)
        try:
            if bits is None:
                out.append(message_indices(args.seed, i, n, spec.alpha, spec.dim, args.p0))
            else:
                out.append(message_indices(args.seed, i, n, spec.alpha, spec.dim, args.p0,
                                           bits=bits[offset:]))
                offset += n * spec.dim * int(np.log2(spec.alpha))
        except ValueError as exc:
            raise DataError(f"insufficient bits: {exc}") from None
    return out


def _write_text(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_power_of_two(spec):
    if spec.alpha & (spec.alpha - 1):
        raise UsageError("bit messages need alpha to be a power of two")


# ---------------------------------------------------------------------------
# commands

def cmd_learn(args) -> int:
    spec, table, sel, eps, _ = _resolve(args, need_key=False)
    _check_power_of_two(spec)
    planes = [_load(p) for p in args.images]
    msgs = _messages(args, spec, sel, planes)
    assignment = learn_from_planes(planes, msgs, spec, table, sel)
    save_assignment(KeyFile.from_assignment(spec, assignment, eps), args.out)
    if table.size <= 16:
        W = np.asarray(assignment.source_W)
        print("W (rows: nearest coset, cols: message)")
        for row in W:
            print(" ".join(f"{int(v):6d}" for v in row))
    if table.size <= 16:
        print("gamma", " ".join(str(int(g)) for g in assignment.gamma))
    print(f"matched weight {assignment.total_weight} of {sum(m.size for m in msgs)} pairs")
    return EXIT_OK


def _fmt_report(r):
    return (f"{r.domain:<9} mse={r.mse:.6f} psnr={r.psnr:.4f} prd={r.prd:.6f} "
            f"ssim={r.ssim:.6f}")


def cmd_embed(args) -> int:
    kind = SchemeKind(args.scheme)
    spec, table, sel, eps, key = _resolve(args, need_key=kind.content_aware)
    _check_power_of_two(spec)
    plane = _load(args.image)
    (msgs,) = _messages(args, spec, sel, [plane])
    gamma = key.gamma if kind.content_aware else None
    res = embed_plane(plane, spec, table, sel, Scheme(kind, eps), msgs, gamma)
    write_pgm(args.out, res.plane)
    if args.bits_out is not None:
        _write_text(args.bits_out,
                    format_bits(indices_to_bits(msgs, spec.alpha, spec.dim)) + "\n")
    rep = report(res)
    print(f"embedded {msgs.size} messages ({spec.name}, alpha={spec.alpha}, "
          f"{kind.value}, band={sel.band}, k={sel.k})")
    print(_fmt_report(rep.frequency))
    print(_fmt_report(rep.spatial))
    return EXIT_OK


def cmd_extract(args) -> int:
    kind = SchemeKind(args.scheme)
    spec, table, sel, _, key = _resolve(args, need_key=kind.content_aware)
    _check_power_of_two(spec)
    plane = _load(args.image)
    gamma = key.gamma if kind.content_aware else None
    idx = extract_plane(plane, spec, table, sel, gamma)
    text = format_bits(indices_to_bits(idx, spec.alpha, spec.dim)) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write_text(args.out, text)
    return EXIT_OK


def cmd_attack(args) -> int:
    try:
        channel = NoiseChannel(args.noise, args.level, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        plane = read_pgm(args.image)
    except (OSError, PGMError) as exc:
        raise DataError(str(exc)) from None
    write_pgm(args.out, apply_noise(channel, plane))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    lattices = _split(args.lattices)
    try:
        lattices = [canonical_name(n) for n in lattices]
        schemes = [SchemeKind(s) for s in _split(args.schemes)]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    bands = _split(args.bands)
    if any(b not in BANDS for b in bands):
        raise UsageError(f"bands must be among {sorted(BANDS)}")
    ks = _split(args.ks, int)
    attack = None
    try:
        if args.attack is not None:
            attack = NoiseChannel(args.attack, args.attack_level, seed=args.seed)
        levels = _split(args.sweep_levels, float)
        if args.sweep_noise is not None:
            for lv in levels:
                NoiseChannel(args.sweep_noise, lv)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.alpha & (args.alpha - 1) or args.alpha < 2:
        raise UsageError("alpha must be a power of two >= 2")
    planes = [_load(p) for p in args.images]
    args.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        rows = evaluate_corpus(planes, lattices, schemes, bands, ks, alpha=args.alpha,
                               delta=args.delta, epsilon=args.epsilon, p0=args.p0,
                               seed=args.seed, dim=args.dim, attack=attack)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_csv(rows, args.out_dir / "metrics.csv")
    print(summarise(rows))
    print("psnr: mean of per-image PSNR; psnr(m): PSNR of the mean MSE")
    sweep = None
    if args.sweep_noise is not None:
        sweep = ser_sweep(planes, args.sweep_noise, levels, lattices, bands, ks,
                          alpha=args.alpha, delta=args.delta, p0=args.p0, seed=args.seed,
                          dim=args.dim)
        write_csv(sweep, args.out_dir / "ser_sweep.csv")
        for r in sweep:
            print(f"ser {r.noise}={r.level:g} {r.lattice} {r.band} k={r.k}: {r.ser:.4f}")
    if not args.no_figures and rows:
        from .plotting import write_figures
        for path in write_figures(rows, args.out_dir, sweep):
            print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {"learn": cmd_learn, "embed": cmd_embed, "extract": cmd_extract,
             "attack": cmd_attack, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"caqim {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"caqim {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"caqim {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
