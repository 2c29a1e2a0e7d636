"""Minimal PNG reader/writer for the raster formats the toolkit persists.

Two layouts are supported: 16-bit 4-channel (RGBA, used for coordinate
maps) and 8-bit single channel (grayscale, used for instance masks).
Writing always uses filter type 0 and a fixed zlib level so identical
arrays produce identical bytes. Reading implements all five standard
scanline filters, so files from other encoders load fine as long as they
are non-interlaced and match the expected bit depth / color type.
"""

import struct
import zlib

import numpy as np

from .errors import CorruptStream

_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_ZLIB_LEVEL = 6


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def encode_png(array: np.ndarray) -> bytes:
    """Encode (H, W, 4) uint16 or (H, W) uint8 into PNG bytes."""
    if array.ndim == 3 and array.shape[2] == 4 and array.dtype == np.uint16:
        color_type, bit_depth = 6, 16
        raw = array.astype(">u2").tobytes()
        stride = array.shape[1] * 8
    elif array.ndim == 2 and array.dtype == np.uint8:
        color_type, bit_depth = 0, 8
        raw = array.tobytes()
        stride = array.shape[1]
    else:
        raise ValueError(f"unsupported array layout {array.shape} {array.dtype}")

    h = array.shape[0]
    scanlines = bytearray()
    for row in range(h):
        scanlines.append(0)  # filter type 0 (None)
        scanlines += raw[row * stride : (row + 1) * stride]

    ihdr = struct.pack(">IIBBBBB", array.shape[1], h, bit_depth, color_type, 0, 0, 0)
    return (
        _SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(bytes(scanlines), _ZLIB_LEVEL))
        + _chunk(b"IEND", b"")
    )


def _unfilter(data: bytes, height: int, stride: int, bpp: int) -> bytes:
    """Reverse PNG scanline filtering. bpp = bytes per pixel."""
    out = bytearray(height * stride)
    pos = 0
    prev_row = bytearray(stride)
    for row in range(height):
        if pos >= len(data):
            raise CorruptStream("truncated scanline data")
        ftype = data[pos]
        pos += 1
        line = bytearray(data[pos : pos + stride])
        if len(line) != stride:
            raise CorruptStream("truncated scanline data")
        pos += stride
        if ftype == 0:
            pass
        elif ftype == 1:  # Sub
            for i in range(bpp, stride):
                line[i] = (line[i] + line[i - bpp]) & 0xFF
        elif ftype == 2:  # Up
            for i in range(stride):
                line[i] = (line[i] + prev_row[i]) & 0xFF
        elif ftype == 3:  # Average
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                line[i] = (line[i] + (left + prev_row[i]) // 2) & 0xFF
        elif ftype == 4:  # Paeth
            for i in range(stride):
                a = line[i - bpp] if i >= bpp else 0
                b = prev_row[i]
                c = prev_row[i - bpp] if i >= bpp else 0
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                pred = a if (pa <= pb and pa <= pc) else (b if pb <= pc else c)
                line[i] = (line[i] + pred) & 0xFF
        else:
            raise CorruptStream(f"unknown filter type {ftype}")
        out[row * stride : (row + 1) * stride] = line
        prev_row = line
    return bytes(out)


def decode_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes written by encode_png (or compatible encoders).

    Returns (H, W, 4) uint16 for 16-bit RGBA or (H, W) uint8 for 8-bit gray.
    """
    if not data.startswith(_SIGNATURE):
        raise CorruptStream("missing PNG signature")
    pos = len(_SIGNATURE)
    ihdr = None
    idat = bytearray()
    while pos + 8 <= len(data):
        length, tag = struct.unpack(">I4s", data[pos : pos + 8])
        payload = data[pos + 8 : pos + 8 + length]
        if len(payload) != length:
            raise CorruptStream("truncated chunk")
        crc = struct.unpack(">I", data[pos + 8 + length : pos + 12 + length])[0]
        if crc != (zlib.crc32(tag + payload) & 0xFFFFFFFF):
            raise CorruptStream(f"bad CRC in {tag!r} chunk")
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = payload
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    if ihdr is None or not idat:
        raise CorruptStream("missing IHDR or IDAT")

    width, height, bit_depth, color_type, comp, filt, interlace = struct.unpack(
        ">IIBBBBB", ihdr
    )
    if comp != 0 or filt != 0 or interlace != 0:
        raise CorruptStream("unsupported compression/filter/interlace method")
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise CorruptStream(f"zlib decompression failed: {exc}") from exc

    if color_type == 6 and bit_depth == 16:
        bpp = 8
        stride = width * bpp
        pixels = _unfilter(raw, height, stride, bpp)
        return (
            np.frombuffer(pixels, dtype=">u2")
            .reshape(height, width, 4)
            .astype(np.uint16)
        )
    if color_type == 0 and bit_depth == 8:
        bpp = 1
        stride = width
        pixels = _unfilter(raw, height, stride, bpp)
        return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width).copy()
    raise CorruptStream(
        f"unsupported PNG layout: color type {color_type}, depth {bit_depth}"
    )
