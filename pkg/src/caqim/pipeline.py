"""Image-level embedding, extraction and codebook learning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import CodebookAssignment, adjacency_from_indices, max_weight_matching
from .dct import (BandSelector, carriers_from_coeffs, carriers_into_coeffs, check_plane,
                  coeffs_to_plane, plane_to_coeffs)
from .lattice import CosetTable, LatticeSpec, nearest_coset
from .metrics import MetricsReport, prd, psnr, ser, ssim
from .qim import Scheme, detect_indices, embed_indices

__all__ = ["capacity", "EmbedResult", "embed_plane", "extract_plane",
           "learn_from_planes", "ImageReport", "report"]


def capacity(shape, selector: BandSelector, dim: int) -> int:
    """Number of messages an image of ``shape`` holds."""
    selector.check(dim)
    h, w = shape
    return (h // 8) * (w // 8) * selector.k


@dataclass
class EmbedResult:
    original: np.ndarray        # uint8 cover
    plane: np.ndarray           # uint8 watermarked image
    coeffs: np.ndarray          # cover block DCT
    coeffs_wm: np.ndarray       # watermarked block DCT before pixel rounding
    indices: np.ndarray         # embedded message indices

    @property
    def float_plane(self) -> np.ndarray:
        return coeffs_to_plane(self.coeffs_wm, as_float=True)


def embed_plane(plane, spec: LatticeSpec, table: CosetTable, selector: BandSelector,
                scheme: Scheme, indices, gamma=None) -> EmbedResult:
    plane = check_plane(plane)
    coeffs = plane_to_coeffs(plane)
    s = carriers_from_coeffs(coeffs, selector, spec.dim)
    indices = np.asarray(indices, dtype=np.int64).ravel()
    if indices.size != s.shape[0]:
        raise ValueError(f"need exactly {s.shape[0]} messages, got {indices.size}")
    sw = embed_indices(spec, table, s, indices, scheme, gamma=gamma)
    coeffs_wm = carriers_into_coeffs(coeffs, selector, spec.dim, sw)
    return EmbedResult(original=np.asarray(plane, dtype=np.uint8),
                       plane=coeffs_to_plane(coeffs_wm), coeffs=coeffs,
                       coeffs_wm=coeffs_wm, indices=indices)


def extract_plane(plane, spec: LatticeSpec, table: CosetTable, selector: BandSelector,
                  gamma=None) -> np.ndarray:
    """Blind extraction of message indices from a (possibly attacked) image."""
    coeffs = plane_to_coeffs(plane)
    y = carriers_from_coeffs(coeffs, selector, spec.dim)
    return detect_indices(spec, table, y, gamma)


def learn_from_planes(planes, message_streams, spec: LatticeSpec, table: CosetTable,
                      selector: BandSelector) -> CodebookAssignment:
    """Accumulate adjacency counts over a corpus and solve the matching."""
    neigh, msgs = [], []
    for plane, m in zip(planes, message_streams):
        s = carriers_from_coeffs(plane_to_coeffs(plane), selector, spec.dim)
        m = np.asarray(m, dtype=np.int64).ravel()
        if m.size != s.shape[0]:
            raise ValueError("message stream does not match image capacity")
        neigh.append(np.asarray(nearest_coset(spec, table, s)).ravel())
        msgs.append(m)
    if not neigh:
        raise ValueError("empty corpus")
    W = adjacency_from_indices(np.concatenate(neigh), np.concatenate(msgs), table.size)
    return max_weight_matching(W)


@dataclass
class ImageReport:
    frequency: MetricsReport
    spatial: MetricsReport


def report(result: EmbedResult, received_indices=None) -> ImageReport:
    """Frequency-domain metrics use the coefficients before rounding;
    spatial metrics compare the stored 8-bit images."""
    if received_indices is None:
        err = 0.0
    else:
        err = ser(result.indices, received_indices)
    # all 64 coefficients per block, so the MSE is per pixel like the spatial one
    d = result.coeffs - result.coeffs_wm
    m = float(np.mean(d ** 2))
    ref = result.coeffs
    freq = MetricsReport(mse=m, psnr=psnr(m), prd=prd(ref, result.coeffs_wm),
                         ssim=ssim(result.original.astype(float), result.float_plane),
                         ser=err, domain="frequency")
    spatial = MetricsReport.compare(result.original, result.plane, err, "spatial")
    return ImageReport(frequency=freq, spatial=spatial)
