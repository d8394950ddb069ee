"""Block transform codec for depth maps.

Simulates the lossy path of a JPEG-style coder on 8x8 blocks: orthonormal
2D DCT-II, uniform midtread scalar quantization to bin indices, and the
centroid decode. Only bin indices and the step table are kept, so the
decoder's exact knowledge about a block is the closed interval each
coefficient was quantized into. ``bin_bounds`` materializes those
intervals and ``clip_to_bins`` is the Euclidean projection onto them,
which is the constraint-enforcement step of the refinement loop.

Conventions: blocks are (8, 8) float64 arrays, row index = vertical
frequency after the transform, so the row-major flattened position of
coefficient (u, v) is k = 8*u + v. Step tables share the block shape.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._common import as_map
from .errors import CorruptDescriptionError, InvalidInputError

BLOCK = 8
QDM_MAGIC = b"QDM1"

# Base step sizes in the usual luminance layout, used by jpeg_table().
_JPEG_BASE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)


def _dct_matrix() -> np.ndarray:
    j = np.arange(BLOCK, dtype=np.float64)
    u = j.reshape(-1, 1)
    t = np.cos((2.0 * j + 1.0) * u * np.pi / (2.0 * BLOCK))
    t[0] *= np.sqrt(1.0 / BLOCK)
    t[1:] *= np.sqrt(2.0 / BLOCK)
    return t


_T = _dct_matrix()
_TT = _T.T.copy()


class BinConstraints(NamedTuple):
    """Per-coefficient closed intervals [lo, hi] of width equal to the step."""

    lo: np.ndarray
    hi: np.ndarray


def flat_table(delta: float) -> np.ndarray:
    """Step table with the same step size for all 64 coefficients."""
    if not np.isfinite(delta) or delta <= 0:
        raise InvalidInputError(f"step size must be positive, got {delta}")
    return np.full((BLOCK, BLOCK), float(delta))


def jpeg_table(quality: int) -> np.ndarray:
    """Luminance-style step table scaled by a quality factor in [1, 100]."""
    q = int(quality)
    if not 1 <= q <= 100:
        raise InvalidInputError(f"quality must be in [1, 100], got {quality}")
    scale = 5000.0 / q if q < 50 else 200.0 - 2.0 * q
    steps = np.floor((_JPEG_BASE * scale + 50.0) / 100.0)
    return np.clip(steps, 1.0, 255.0)


def _check_block(a, name: str) -> np.ndarray:
    b = np.asarray(a, dtype=np.float64)
    if b.shape != (BLOCK, BLOCK):
        raise InvalidInputError(f"{name} must be {BLOCK}x{BLOCK}, got {b.shape}")
    if not np.all(np.isfinite(b)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return b


def _check_table(table) -> np.ndarray:
    t = np.asarray(table, dtype=np.float64)
    if t.shape != (BLOCK, BLOCK):
        raise InvalidInputError(f"step table must be {BLOCK}x{BLOCK}, got {t.shape}")
    if not np.all(np.isfinite(t)) or np.any(t <= 0):
        raise InvalidInputError("step table entries must be positive and finite")
    return t


def forward_dct(block) -> np.ndarray:
    """Orthonormal 2D DCT-II of one 8x8 pixel block.

    The transform preserves the Euclidean norm, so clipping done later in
    coefficient space is also a Euclidean projection in pixel space.
    """
    b = _check_block(block, "pixel block")
    return _T @ b @ _TT


def inverse_dct(coeffs) -> np.ndarray:
    """Exact inverse of forward_dct (the transpose). No output clamping."""
    c = _check_block(coeffs, "coefficient block")
    return _TT @ c @ _T


def dct_blocks(blocks: np.ndarray) -> np.ndarray:
    """forward_dct applied to a (n, 8, 8) stack in one call."""
    return _T @ blocks @ _TT


def idct_blocks(coeffs: np.ndarray) -> np.ndarray:
    """inverse_dct applied to a (n, 8, 8) stack in one call."""
    return _TT @ coeffs @ _T


def quantize(coeffs, table) -> np.ndarray:
    """Map coefficients to signed bin indices.

    Midtread uniform quantizer with round-half-away-from-zero, so index 0
    always represents coefficients near zero and the implied centroid is
    index * step. The input is guaranteed to lie inside the closed bin of
    its own index.
    """
    c = np.asarray(coeffs, dtype=np.float64)
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("coefficients contain non-finite values")
    t = _check_table(table)
    mag = np.floor(np.abs(c) / t + 0.5)
    return np.where(c < 0, -mag, mag).astype(np.int32)


def dequantize(indices, table) -> np.ndarray:
    """Centroid decode: coefficient = index * step."""
    idx = np.asarray(indices)
    t = _check_table(table)
    return idx.astype(np.float64) * t


def bin_bounds(indices, table) -> BinConstraints:
    """Closed interval [centroid - step/2, centroid + step/2] per coefficient."""
    idx = np.asarray(indices)
    t = _check_table(table)
    centers = idx.astype(np.float64) * t
    half = t / 2.0
    return BinConstraints(centers - half, centers + half)


def clip_to_bins(coeffs, bounds: BinConstraints) -> np.ndarray:
    """Project coefficients onto their bins (move to the nearest boundary).

    Idempotent and non-expansive; the output always satisfies the bin
    constraints exactly.
    """
    c = np.asarray(coeffs, dtype=np.float64)
    return np.clip(c, bounds.lo, bounds.hi)


def pad_to_blocks(map_: np.ndarray) -> np.ndarray:
    """Edge-replicate a map on the bottom/right to multiples of 8."""
    h, w = map_.shape
    ph = (-h) % BLOCK
    pw = (-w) % BLOCK
    if ph == 0 and pw == 0:
        return np.array(map_, dtype=np.float64)
    return np.pad(map_, ((0, ph), (0, pw)), mode="edge").astype(np.float64)


def split_blocks(padded: np.ndarray) -> np.ndarray:
    """(H, W) map with 8-multiple dims -> (n, 8, 8) stack, blocks row-major."""
    h, w = padded.shape
    return (
        padded.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK)
        .swapaxes(1, 2)
        .reshape(-1, BLOCK, BLOCK)
    )


def merge_blocks(blocks: np.ndarray, height: int, width: int) -> np.ndarray:
    """Inverse of split_blocks."""
    bh = height // BLOCK
    bw = width // BLOCK
    return (
        blocks.reshape(bh, bw, BLOCK, BLOCK).swapaxes(1, 2).reshape(height, width)
    )


@dataclass
class QuantizedDescription:
    """Everything the decoder knows about one coded view.

    width/height are the padded dimensions (multiples of 8); indices holds
    one (8, 8) int32 block of bin indices per block, in row-major block
    order; table is the shared step table.
    """

    width: int
    height: int
    orig_width: int
    orig_height: int
    table: np.ndarray
    indices: np.ndarray

    @property
    def n_blocks(self) -> int:
        return (self.width // BLOCK) * (self.height // BLOCK)

    def validate(self) -> None:
        if self.width % BLOCK or self.height % BLOCK:
            raise CorruptDescriptionError(
                f"padded dims {self.width}x{self.height} not multiples of {BLOCK}"
            )
        if not (0 < self.orig_width <= self.width < self.orig_width + BLOCK):
            raise CorruptDescriptionError(
                f"orig width {self.orig_width} inconsistent with padded {self.width}"
            )
        if not (0 < self.orig_height <= self.height < self.orig_height + BLOCK):
            raise CorruptDescriptionError(
                f"orig height {self.orig_height} inconsistent with padded {self.height}"
            )
        if self.indices.shape != (self.n_blocks, BLOCK, BLOCK):
            raise CorruptDescriptionError(
                f"expected {self.n_blocks} blocks, got indices shape {self.indices.shape}"
            )
        try:
            _check_table(self.table)
        except InvalidInputError as exc:
            raise CorruptDescriptionError(str(exc)) from exc

    def to_bytes(self) -> bytes:
        """Serialize to the QDM1 little-endian container."""
        self.validate()
        head = QDM_MAGIC + struct.pack(
            "<4I", self.width, self.height, self.orig_width, self.orig_height
        )
        steps = np.ascontiguousarray(self.table, dtype="<f8").tobytes()
        idx = np.ascontiguousarray(self.indices, dtype="<i4").tobytes()
        return head + steps + idx

    @classmethod
    def from_bytes(cls, data: bytes) -> "QuantizedDescription":
        if len(data) < 4 + 16 or data[:4] != QDM_MAGIC:
            raise CorruptDescriptionError("not a QDM1 container")
        width, height, ow, oh = struct.unpack_from("<4I", data, 4)
        off = 4 + 16
        n_steps = BLOCK * BLOCK
        if len(data) < off + 8 * n_steps:
            raise CorruptDescriptionError("truncated step table")
        table = (
            np.frombuffer(data, dtype="<f8", count=n_steps, offset=off)
            .reshape(BLOCK, BLOCK)
            .astype(np.float64)
        )
        off += 8 * n_steps
        if width % BLOCK or height % BLOCK:
            raise CorruptDescriptionError("padded dims not multiples of 8")
        n_blocks = (width // BLOCK) * (height // BLOCK)
        need = n_blocks * n_steps
        if len(data) != off + 4 * need:
            raise CorruptDescriptionError(
                f"index payload is {len(data) - off} bytes, expected {4 * need}"
            )
        indices = (
            np.frombuffer(data, dtype="<i4", count=need, offset=off)
            .reshape(n_blocks, BLOCK, BLOCK)
            .astype(np.int32)
        )
        desc = cls(width, height, ow, oh, table, indices)
        desc.validate()
        return desc

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "QuantizedDescription":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def encode_map(map_, table) -> QuantizedDescription:
    """Pad, block, transform and quantize a depth map."""
    m = as_map(map_)
    if m.size == 0:
        raise InvalidInputError("cannot encode an empty map")
    t = _check_table(table)
    padded = pad_to_blocks(m)
    coeffs = dct_blocks(split_blocks(padded))
    indices = quantize(coeffs, t)
    return QuantizedDescription(
        width=padded.shape[1],
        height=padded.shape[0],
        orig_width=m.shape[1],
        orig_height=m.shape[0],
        table=t,
        indices=indices,
    )


def decode_map(desc: QuantizedDescription) -> np.ndarray:
    """Centroid decode: dequantize, inverse transform, crop, clamp to [0, 255]."""
    desc.validate()
    coeffs = dequantize(desc.indices, desc.table)
    padded = merge_blocks(idct_blocks(coeffs), desc.height, desc.width)
    out = padded[: desc.orig_height, : desc.orig_width]
    return np.clip(out, 0.0, 255.0)
