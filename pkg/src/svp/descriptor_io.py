"""Frame token stacks, pooled descriptors, and their binary file formats.

Both formats are little-endian with a fixed header followed by a float32
payload:

    SVGT: magic "SVGT", u32 version, u32 N, u32 P, u32 C, u8 dtype, N*P*C f32
    SVGD: magic "SVGD", u32 version, u32 N, u32 C, u8 dtype, N*C f32

dtype 0 is the only supported value (float32).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataIntegrityError, FormatError

TOKENS_MAGIC = b"SVGT"
DESCRIPTORS_MAGIC = b"SVGD"
VERSION = 1
DTYPE_F32 = 0
MAX_ELEMENTS = 2**40

_TOKENS_HEADER = struct.Struct("<4sIIIIB")
_DESCRIPTORS_HEADER = struct.Struct("<4sIIIB")


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TokenStack:
    """Patch tokens for N frames, shape (N, P, C), stored as float32."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data, np.float32)
        if data.ndim != 3 or min(data.shape) < 1:
            raise DataIntegrityError(f"token stack must be a non-empty (N, P, C) array, got shape {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def num_frames(self):
        return self.data.shape[0]

    @property
    def tokens_per_frame(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]


@dataclass(frozen=True)
class DescriptorSet:
    """One C-dimensional descriptor per frame, shape (N, C)."""

    descriptors: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.descriptors)
        if d.ndim != 2 or min(d.shape) < 1:
            raise DataIntegrityError(f"descriptors must be a non-empty (N, C) array, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            bad = np.flatnonzero(~np.all(np.isfinite(d), axis=1)).tolist()
            raise DataIntegrityError(f"non-finite descriptor values at frame(s) {bad}")
        object.__setattr__(self, "descriptors", _frozen(d, d.dtype if d.dtype == np.float64 else np.float32))

    @property
    def num_frames(self):
        return self.descriptors.shape[0]

    @property
    def channels(self):
        return self.descriptors.shape[1]


def pool_descriptors(stack: TokenStack) -> DescriptorSet:
    """Average each frame's patch tokens into one descriptor (float64 accumulation)."""
    data = stack.data
    finite = np.isfinite(data)
    if not finite.all():
        bad = np.flatnonzero(~finite.reshape(data.shape[0], -1).all(axis=1)).tolist()
        raise DataIntegrityError(f"non-finite token values at frame(s) {bad}")
    pooled = data.astype(np.float64).sum(axis=1) / data.shape[1]
    return DescriptorSet(pooled)


def _check_dims(dims):
    total = 1
    for name, value in dims.items():
        if value < 1:
            raise FormatError(f"header field {name}={value} must be >= 1", field=name)
        total *= value
    if total > MAX_ELEMENTS:
        raise FormatError(f"header dims {dims} give {total} elements, above the 2^40 guard", field="dims")
    return total


def _read_payload(raw, offset, count, path):
    expected = count * 4
    got = len(raw) - offset
    if got < expected:
        raise FormatError(f"{path}: truncated payload, expected {count} floats but found {got / 4:g}", field="payload")
    if got > expected:
        raise FormatError(f"{path}: {got - expected} trailing bytes after payload", field="payload")
    return np.frombuffer(raw, dtype="<f4", count=count, offset=offset)


def _parse_header(raw, header, magic, path):
    if len(raw) < header.size:
        raise FormatError(f"{path}: file shorter than the {header.size}-byte header", field="header")
    fields = header.unpack_from(raw, 0)
    if fields[0] != magic:
        raise FormatError(f"{path}: bad magic {fields[0]!r}, expected {magic!r}", field="magic")
    if fields[1] != VERSION:
        raise FormatError(f"{path}: unsupported version {fields[1]}", field="version")
    if fields[-1] != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype code {fields[-1]}", field="dtype")
    return fields[2:-1]


def load_tokens(path) -> TokenStack:
    raw = Path(path).read_bytes()
    n, p, c = _parse_header(raw, _TOKENS_HEADER, TOKENS_MAGIC, path)
    count = _check_dims({"N": n, "P": p, "C": c})
    payload = _read_payload(raw, _TOKENS_HEADER.size, count, path)
    return TokenStack(payload.reshape(n, p, c))


def save_tokens(stack: TokenStack, path):
    n, p, c = stack.data.shape
    header = _TOKENS_HEADER.pack(TOKENS_MAGIC, VERSION, n, p, c, DTYPE_F32)
    Path(path).write_bytes(header + stack.data.astype("<f4").tobytes(order="C"))


def load_descriptors(path) -> DescriptorSet:
    raw = Path(path).read_bytes()
    n, c = _parse_header(raw, _DESCRIPTORS_HEADER, DESCRIPTORS_MAGIC, path)
    count = _check_dims({"N": n, "C": c})
    payload = _read_payload(raw, _DESCRIPTORS_HEADER.size, count, path)
    return DescriptorSet(payload.reshape(n, c))


def save_descriptors(dset: DescriptorSet, path):
    n, c = dset.descriptors.shape
    header = _DESCRIPTORS_HEADER.pack(DESCRIPTORS_MAGIC, VERSION, n, c, DTYPE_F32)
    Path(path).write_bytes(header + dset.descriptors.astype("<f4").tobytes(order="C"))


def load_any(path):
    """Load an SVGD file, or an SVGT file pooled to descriptors, by magic."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == DESCRIPTORS_MAGIC:
        return load_descriptors(path)
    if magic == TOKENS_MAGIC:
        return pool_descriptors(load_tokens(path))
    raise FormatError(f"{path}: bad magic {magic!r}, expected SVGD or SVGT", field="magic")
