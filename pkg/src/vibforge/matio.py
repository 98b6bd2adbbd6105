"""Read-only parser for level-5 MAT binary containers.

Layout: a 128-byte header (116 bytes of description text, 8 reserved bytes,
a 2-byte version that must decode to 0x0100, and a 2-byte endian indicator
that reads "IM" on little-endian files and "MI" on big-endian ones), followed
by 8-byte-aligned tagged data elements. Elements may be zlib-wrapped
(miCOMPRESSED); numeric matrices may store their payload in a narrower type
than the array class. Every read is bounds-checked so truncated or corrupted
input raises a typed error instead of overreading.
"""

from __future__ import annotations

import fnmatch
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import TimeSeries

HEADER_SIZE = 128

# Data element type tags.
MI_INT8 = 1
MI_UINT8 = 2
MI_INT16 = 3
MI_UINT16 = 4
MI_INT32 = 5
MI_UINT32 = 6
MI_SINGLE = 7
MI_DOUBLE = 9
MI_INT64 = 12
MI_UINT64 = 13
MI_MATRIX = 14
MI_COMPRESSED = 15

_NUMERIC_DTYPES = {
    MI_INT8: "i1",
    MI_UINT8: "u1",
    MI_INT16: "i2",
    MI_UINT16: "u2",
    MI_INT32: "i4",
    MI_UINT32: "u4",
    MI_SINGLE: "f4",
    MI_DOUBLE: "f8",
}

# Array classes (first byte of the array-flags word).
_MX_CLASSES = {
    6: "float64",
    7: "float32",
    9: "uint8",
    10: "int16",
    12: "int32",
}

_COMPLEX_BIT = 0x0800

# Cap on a single inflated element, to stop decompression bombs.
_MAX_INFLATED = 1 << 31


class MatFormatError(Exception):
    """Base class for malformed or unsupported MAT input."""


class TruncatedFile(MatFormatError):
    pass


class BadMagic(MatFormatError):
    pass


class UnsupportedElement(MatFormatError):
    def __init__(self, message: str, type_tag: int, offset: int) -> None:
        super().__init__(f"{message} (type tag {type_tag} at byte offset {offset})")
        self.type_tag = type_tag
        self.offset = offset


class DecompressFailure(MatFormatError):
    pass


class NoMatch(Exception):
    pass


class MatchAmbiguous(Exception):
    def __init__(self, pattern: str, matches: list[str]) -> None:
        super().__init__(f"pattern {pattern!r} matches {len(matches)} variables: {sorted(matches)}")
        self.matches = sorted(matches)


@dataclass(frozen=True)
class MatVariable:
    name: str
    element_class: str
    dims: tuple[int, ...]
    data: np.ndarray  # float64, shape = dims, filled in column-major order
    was_compressed: bool


@dataclass(frozen=True)
class MatFile:
    header_text: str
    version: int
    endianness: str  # "little" | "big"
    variables: tuple[MatVariable, ...]

    def variable(self, name: str) -> MatVariable:
        for var in self.variables:
            if var.name == name:
                return var
        raise KeyError(name)


class _Reader:
    """Bounds-checked cursor over one element stream."""

    def __init__(self, buf: bytes, endian: str, base_offset: int) -> None:
        self.buf = buf
        self.endian = endian  # "<" or ">"
        self.pos = 0
        self.base = base_offset  # for error messages relative to the file

    def offset(self) -> int:
        return self.base + self.pos

    def remaining(self) -> int:
        return len(self.buf) - self.pos

    def take(self, n: int, what: str) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise TruncatedFile(
                f"input ends inside {what} at byte offset {self.offset()} "
                f"(need {n} bytes, have {self.remaining()})"
            )
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def skip_padding(self, n_payload: int) -> None:
        pad = (-n_payload) % 8
        if pad:
            # Padding may be absent at end-of-stream; tolerate that.
            self.pos = min(self.pos + pad, len(self.buf))

    def read_tag(self, what: str) -> tuple[int, int, bool]:
        """Returns (type_tag, n_bytes, is_small_element)."""
        word = struct.unpack(self.endian + "I", self.take(4, f"{what} tag"))[0]
        small_count = word >> 16
        if small_count:
            mi_type = word & 0xFFFF
            if small_count > 4:
                raise MatFormatError(
                    f"small element at byte offset {self.offset() - 4} declares "
                    f"{small_count} bytes (max 4)"
                )
            return mi_type, small_count, True
        n_bytes = struct.unpack(self.endian + "I", self.take(4, f"{what} size"))[0]
        return word, n_bytes, False

    def read_element(self, what: str) -> tuple[int, bytes, int]:
        """Returns (type_tag, payload, tag_offset); advances past padding."""
        tag_offset = self.offset()
        mi_type, n_bytes, small = self.read_tag(what)
        if small:
            block = self.take(4, f"{what} small payload")
            return mi_type, block[:n_bytes], tag_offset
        payload = self.take(n_bytes, f"{what} payload ({n_bytes} bytes)")
        self.skip_padding(n_bytes)
        return mi_type, payload, tag_offset


def _decode_numeric(payload: bytes, mi_type: int, endian: str, offset: int) -> np.ndarray:
    if mi_type not in _NUMERIC_DTYPES:
        raise UnsupportedElement("unsupported numeric storage", mi_type, offset)
    dtype = np.dtype(endian + _NUMERIC_DTYPES[mi_type])
    if len(payload) % dtype.itemsize:
        raise MatFormatError(
            f"numeric payload of {len(payload)} bytes is not a multiple of "
            f"item size {dtype.itemsize} (byte offset {offset})"
        )
    return np.frombuffer(payload, dtype=dtype).astype(np.float64)


def _parse_matrix(payload: bytes, endian: str, base_offset: int, was_compressed: bool) -> MatVariable:
    r = _Reader(payload, endian, base_offset)

    flag_type, flag_payload, flag_off = r.read_element("array flags")
    if flag_type != MI_UINT32 or len(flag_payload) < 8:
        raise MatFormatError(f"malformed array-flags subelement at byte offset {flag_off}")
    flags = struct.unpack(endian + "I", flag_payload[:4])[0]
    mx_class = flags & 0xFF
    if flags & _COMPLEX_BIT:
        raise UnsupportedElement("complex arrays are not supported", mx_class, flag_off)
    if mx_class not in _MX_CLASSES:
        raise UnsupportedElement("unsupported array class", mx_class, flag_off)
    element_class = _MX_CLASSES[mx_class]

    dim_type, dim_payload, dim_off = r.read_element("dimensions")
    if dim_type != MI_INT32 or len(dim_payload) < 8 or len(dim_payload) % 4:
        raise MatFormatError(f"malformed dimensions subelement at byte offset {dim_off}")
    dims = tuple(
        struct.unpack(endian + "i", dim_payload[i : i + 4])[0]
        for i in range(0, len(dim_payload), 4)
    )
    if any(d < 0 for d in dims):
        raise MatFormatError(f"negative dimension in {dims} at byte offset {dim_off}")

    name_type, name_payload, name_off = r.read_element("array name")
    if name_type != MI_INT8:
        raise UnsupportedElement("array name must be an int8 element", name_type, name_off)
    name = name_payload.decode("latin-1")
    if not name or "\x00" in name:
        raise MatFormatError(f"empty or NUL-bearing variable name at byte offset {name_off}")

    data_type, data_payload, data_off = r.read_element(f"data of {name!r}")
    values = _decode_numeric(data_payload, data_type, endian, data_off)
    count = 1
    for d in dims:
        count *= d
    if values.size != count:
        raise MatFormatError(
            f"variable {name!r}: dims {dims} imply {count} elements but payload "
            f"holds {values.size} (byte offset {data_off})"
        )
    data = values.reshape(dims, order="F")
    return MatVariable(
        name=name,
        element_class=element_class,
        dims=dims,
        data=data,
        was_compressed=was_compressed,
    )


def parse_mat(data: bytes) -> MatFile:
    """Parse one MAT container held fully in memory."""
    if len(data) < HEADER_SIZE:
        raise TruncatedFile(f"file is {len(data)} bytes; the header alone is {HEADER_SIZE}")
    magic = data[126:128]
    if magic == b"IM":
        endian = "<"
    elif magic == b"MI":
        endian = ">"
    else:
        raise BadMagic(f"endian indicator is {magic!r}, expected b'IM' or b'MI'")
    version = struct.unpack(endian + "H", data[124:126])[0]
    if version != 0x0100:
        raise MatFormatError(f"unsupported MAT version 0x{version:04x} (expected 0x0100)")
    header_text = data[:116].decode("latin-1").rstrip("\x00 ")

    variables: list[MatVariable] = []
    r = _Reader(data, endian, 0)
    r.pos = HEADER_SIZE
    while r.remaining() > 0:
        if r.remaining() < 8:
            raise TruncatedFile(
                f"trailing {r.remaining()} bytes at offset {r.offset()} cannot hold an element tag"
            )
        mi_type, payload, tag_offset = r.read_element("top-level element")
        if mi_type == MI_COMPRESSED:
            inflater = zlib.decompressobj()
            try:
                inner = inflater.decompress(payload, _MAX_INFLATED + 1)
            except zlib.error as exc:
                raise DecompressFailure(
                    f"zlib failure in element at byte offset {tag_offset}: {exc}"
                ) from None
            if len(inner) > _MAX_INFLATED or inflater.unconsumed_tail:
                raise DecompressFailure(
                    f"element at byte offset {tag_offset} inflates past the "
                    f"{_MAX_INFLATED}-byte cap"
                )
            if not inflater.eof:
                raise DecompressFailure(
                    f"truncated compressed stream in element at byte offset {tag_offset}"
                )
            if inflater.unused_data:
                raise DecompressFailure(
                    f"garbage after compressed stream in element at byte offset {tag_offset}"
                )
            ir = _Reader(inner, endian, tag_offset)
            inner_type, inner_payload, inner_off = ir.read_element("compressed element")
            if inner_type != MI_MATRIX:
                raise UnsupportedElement(
                    "compressed wrapper must contain a matrix", inner_type, inner_off
                )
            variables.append(_parse_matrix(inner_payload, endian, inner_off, True))
        elif mi_type == MI_MATRIX:
            variables.append(_parse_matrix(payload, endian, tag_offset, False))
        else:
            raise UnsupportedElement("unsupported top-level element", mi_type, tag_offset)

    names = [v.name for v in variables]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise MatFormatError(f"duplicate variable names: {dup}")
    return MatFile(
        header_text=header_text,
        version=version,
        endianness="little" if endian == "<" else "big",
        variables=tuple(variables),
    )


def parse_mat_file(path: str | Path) -> MatFile:
    return parse_mat(Path(path).read_bytes())


def extract_channel(file: MatFile, name_pattern: str, sampling_rate: float) -> TimeSeries:
    """Select one variable by glob pattern and flatten it column-major.

    When several variables match, names ending in "RPM" are set aside; if
    exactly one non-RPM match remains it wins, otherwise the ambiguity is
    reported with every matching name.
    """
    matches = [v for v in file.variables if fnmatch.fnmatchcase(v.name, name_pattern)]
    if not matches:
        raise NoMatch(f"pattern {name_pattern!r} matches no variable")
    if len(matches) > 1:
        non_rpm = [v for v in matches if not v.name.endswith("RPM")]
        if len(non_rpm) != 1:
            raise MatchAmbiguous(name_pattern, [v.name for v in matches])
        matches = non_rpm
    samples = matches[0].data.reshape(-1, order="F")
    return TimeSeries(samples=samples, sampling_rate=sampling_rate)


class SignalCsvError(Exception):
    pass


def read_signal_csv(path: str | Path, sampling_rate: float) -> TimeSeries:
    """Load a text signal: either headerless 1-column amplitude rows or
    2-column time,amplitude rows (the time column is discarded)."""
    samples: list[float] = []
    with open(path, encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) not in (1, 2):
                raise SignalCsvError(f"{path}: line {line_num} has {len(parts)} columns")
            try:
                samples.append(float(parts[-1]))
            except ValueError:
                raise SignalCsvError(f"{path}: line {line_num} is not numeric: {line!r}")
    if not samples:
        raise SignalCsvError(f"{path}: no samples")
    return TimeSeries(samples=np.array(samples, dtype=np.float64), sampling_rate=sampling_rate)
