"""Corpus sweeps behind ``caqim evaluate``."""

from __future__ import annotations

import csv
import io
import itertools
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .dct import BandSelector
from .lattice import CosetTable, make_lattice
from .messages import bits_to_indices, random_bits
from .metrics import NoiseChannel, apply_noise, psnr, ser
from .pipeline import capacity, embed_plane, extract_plane, learn_from_planes, report
from .qim import Scheme, SchemeKind

__all__ = ["EvalRow", "SerRow", "message_indices", "evaluate_corpus", "ser_sweep",
           "rows_to_csv", "write_csv", "summarise"]

CSV_COLUMNS = ("scheme", "lattice", "band", "k", "mse_freq", "mse_spatial", "psnr",
               "prd", "ssim", "ser")


@dataclass
class EvalRow:
    scheme: str
    lattice: str
    band: str
    k: int
    mse_freq: float
    mse_spatial: float
    psnr: float         # mean of per-image frequency-domain PSNR
    prd: float
    ssim: float         # spatial, global window
    ser: float          # after 8-bit storage (and the optional attack)
    psnr_of_mean: float = math.nan


@dataclass
class SerRow:
    noise: str
    level: float
    lattice: str
    band: str
    k: int
    ser: float


def message_indices(seed: int, image_index: int, count: int, alpha: int, dim: int,
                    p0: float, bits=None) -> np.ndarray:
    """Messages for one image: from ``bits`` if given, else biased random bits."""
    per_msg = dim * int(round(math.log2(alpha)))
    need = count * per_msg
    if bits is None:
        rng = np.random.default_rng([seed, image_index])
        b = random_bits(need, p0, rng)
    else:
        b = np.asarray(bits).ravel()
        if b.size < need:
            raise ValueError(f"need {need} bits, got {b.size}")
        b = b[:need]
    return bits_to_indices(b, alpha, dim)


def _combos(lattices, bands, ks, alpha, delta, dim):
    for name in lattices:
        spec = make_lattice(name, alpha=alpha, delta=delta,
                            dim=dim if name.lower() in ("z", "zn") else None)
        table = CosetTable(spec)
        for band, k in itertools.product(bands, ks):
            sel = BandSelector(band, k)
            if k * spec.dim > sel.capacity:
                print(f"skipping {spec.name} band={band} k={k}: exceeds capacity",
                      file=sys.stderr)
                continue
            yield spec, table, sel


def evaluate_corpus(planes, lattices=("A2", "D4", "E8"), schemes=tuple(SchemeKind),
                    bands=("low", "mid", "high"), ks=(1,), alpha=4, delta=1.0,
                    epsilon=None, p0=0.9, seed=0, dim=None,
                    attack: NoiseChannel | None = None) -> list[EvalRow]:
    """Embed every scheme/lattice/band/k combination into every image.

    Content-aware schemes learn their permutation per image from the same
    carriers and messages that are embedded.
    """
    planes = list(planes)
    if not planes:
        raise ValueError("empty corpus")
    rows = []
    for spec, table, sel in _combos(lattices, bands, ks, alpha, delta, dim):
        msgs = [message_indices(seed, i, capacity(p.shape, sel, spec.dim), alpha,
                                spec.dim, p0) for i, p in enumerate(planes)]
        gammas = [None] * len(planes)
        for kind in schemes:
            kind = SchemeKind(kind)
            if kind.content_aware and gammas[0] is None:
                gammas = [learn_from_planes([p], [m], spec, table, sel).gamma
                          for p, m in zip(planes, msgs)]
            acc = {f: [] for f in ("mf", "ms", "psnr", "prd", "ssim", "ser")}
            for i, (plane, m) in enumerate(zip(planes, msgs)):
                g = gammas[i] if kind.content_aware else None
                res = embed_plane(plane, spec, table, sel, Scheme(kind, epsilon), m, g)
                received = res.plane
                if attack is not None:
                    received = apply_noise(attack, received)
                got = extract_plane(received, spec, table, sel, g)
                rep = report(res, got)
                acc["mf"].append(rep.frequency.mse)
                acc["ms"].append(rep.spatial.mse)
                acc["psnr"].append(rep.frequency.psnr)
                acc["prd"].append(rep.frequency.prd)
                acc["ssim"].append(rep.spatial.ssim)
                acc["ser"].append(rep.spatial.ser)
            mf = float(np.mean(acc["mf"]))
            rows.append(EvalRow(scheme=kind.value, lattice=spec.name, band=sel.band,
                                k=sel.k, mse_freq=mf, mse_spatial=float(np.mean(acc["ms"])),
                                psnr=float(np.mean(acc["psnr"])),
                                prd=float(np.mean(acc["prd"])),
                                ssim=float(np.mean(acc["ssim"])),
                                ser=float(np.mean(acc["ser"])),
                                psnr_of_mean=psnr(mf)))
    return rows


def ser_sweep(planes, noise: str, levels, lattices=("A2", "D4", "E8"),
              bands=("mid",), ks=(1,), alpha=4, delta=1.0, p0=0.9, seed=0,
              dim=None) -> list[SerRow]:
    """CA-QIM symbol error rate after pixel-domain attacks."""
    planes = list(planes)
    rows = []
    for spec, table, sel in _combos(lattices, bands, ks, alpha, delta, dim):
        prepared = []
        for i, plane in enumerate(planes):
            m = message_indices(seed, i, capacity(plane.shape, sel, spec.dim), alpha,
                                spec.dim, p0)
            g = learn_from_planes([plane], [m], spec, table, sel).gamma
            res = embed_plane(plane, spec, table, sel, Scheme(SchemeKind.CA_QIM), m, g)
            prepared.append((res, g))
        for level in levels:
            errs = []
            for i, (res, g) in enumerate(prepared):
                ch = NoiseChannel(noise, float(level), seed=seed * 1000 + i)
                got = extract_plane(apply_noise(ch, res.plane), spec, table, sel, g)
                errs.append(ser(res.indices, got))
            rows.append(SerRow(noise=ch.kind, level=float(level), lattice=spec.name,
                               band=sel.band, k=sel.k, ser=float(np.mean(errs))))
    return rows


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, columns=None) -> str:
    if not rows:
        return ""
    columns = columns or (CSV_COLUMNS if isinstance(rows[0], EvalRow)
                          else tuple(f.name for f in fields(rows[0])))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


def write_csv(rows, path, columns=None) -> None:
    text = rows_to_csv(rows, columns)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def summarise(rows) -> str:
    """Fixed-width text table of an evaluation."""
    head = (f"{'scheme':<6} {'lattice':<7} {'band':<5} {'k':>2} {'mse_freq':>9} "
            f"{'mse_spat':>9} {'psnr':>7} {'psnr(m)':>7} {'prd':>7} {'ssim':>7} {'ser':>6}")
    lines = [head]
    for r in rows:
        lines.append(f"{r.scheme:<6} {r.lattice:<7} {r.band:<5} {r.k:>2} {r.mse_freq:>9.4f} "
                     f"{r.mse_spatial:>9.4f} {r.psnr:>7.2f} {r.psnr_of_mean:>7.2f} "
                     f"{r.prd:>7.4f} {r.ssim:>7.4f} {r.ser:>6.3f}")
    return "\n".join(lines)
