"""DICOM Part-10 data-element reader/writer.

Scope is deliberately narrow: explicit-VR little-endian transfer syntax,
parsed byte-exactly at the element level. Sequences and undefined-length
values are carried as opaque byte blobs so that whatever we do not model
survives a round trip untouched. Implicit-VR and big-endian inputs are
rejected loudly rather than misparsed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

from .errors import DicomParseError, DicomSerializeError, UnsupportedTransferSyntaxError

EXPLICIT_VR_LITTLE_ENDIAN = "1.2.840.10008.1.2.1"
IMPLICIT_VR_LITTLE_ENDIAN = "1.2.840.10008.1.2"
EXPLICIT_VR_BIG_ENDIAN = "1.2.840.10008.1.2.2"

DICOM_MAGIC = b"DICM"
PREAMBLE_SIZE = 128

UNDEFINED_LENGTH = 0xFFFFFFFF

# Group reserved by this package for encrypted (remapped) elements.
ENCRYPTED_GROUP = 0x7777

# VRs whose explicit encoding uses a 2-byte reserved field + 4-byte length.
LONG_FORM_VRS = frozenset(
    {"OB", "OD", "OF", "OL", "OV", "OW", "SQ", "UC", "UN", "UR", "UT"}
)

KNOWN_VRS = LONG_FORM_VRS | frozenset(
    {
        "AE", "AS", "AT", "CS", "DA", "DS", "DT", "FD", "FL", "IS", "LO",
        "LT", "PN", "SH", "SL", "SS", "ST", "TM", "UI", "UL", "US",
    }
)

# Text VRs are padded to even length with a trailing space; everything else
# (UI, numeric strings excluded by the standard, binary blobs) pads with NUL.
SPACE_PADDED_VRS = frozenset(
    {"AE", "AS", "CS", "DA", "DS", "DT", "IS", "LO", "LT", "PN", "SH", "ST", "TM", "UC", "UR", "UT"}
)

SHORT_FORM_MAX_VL = 0xFFFE
LONG_FORM_MAX_VL = 0xFFFFFFFE

_ITEM = (0xFFFE, 0xE000)
_ITEM_DELIMITER = (0xFFFE, 0xE00D)
_SEQUENCE_DELIMITER = (0xFFFE, 0xE0DD)


@dataclass(frozen=True, order=True)
class Tag:
    """A (group, element) pair; ordering is lexicographic."""

    group: int
    element: int

    def __post_init__(self):
        for part in (self.group, self.element):
            if not 0 <= part <= 0xFFFF:
                raise ValueError(f"tag component out of 16-bit range: {part:#x}")

    @property
    def is_private(self) -> bool:
        return self.group % 2 == 1

    @property
    def is_encrypted(self) -> bool:
        return self.group == ENCRYPTED_GROUP

    @classmethod
    def parse(cls, text: str) -> "Tag":
        """Parse 'GGGG,EEEE' hex notation (surrounding parens tolerated)."""
        cleaned = text.strip().strip("()").replace(" ", "")
        parts = cleaned.split(",")
        if len(parts) != 2:
            raise ValueError(f"malformed tag {text!r}; expected GGGG,EEEE")
        try:
            group, element = (int(p, 16) for p in parts)
        except ValueError:
            raise ValueError(f"malformed tag {text!r}; expected hex GGGG,EEEE") from None
        return cls(group, element)

    def __str__(self) -> str:
        return f"({self.group:04X},{self.element:04X})"


PIXEL_DATA = Tag(0x7FE0, 0x0010)
TRANSFER_SYNTAX_UID = Tag(0x0002, 0x0010)


def vl_capacity(vr: str) -> int:
    """Largest value length encodable for a VR."""
    return LONG_FORM_MAX_VL if vr in LONG_FORM_VRS else SHORT_FORM_MAX_VL


@dataclass(frozen=True)
class DataElement:
    """One data element: tag, value representation and raw value field.

    ``vf`` holds exactly the value bytes; the value length is derived from it
    rather than stored, so the two can never disagree. Elements read from an
    undefined-length encoding keep their raw content (items and trailing
    delimiter included) in ``vf`` with ``undefined_length`` set, and are
    re-emitted verbatim.
    """

    tag: Tag
    vr: str
    vf: bytes
    undefined_length: bool = False

    def __post_init__(self):
        if self.vr not in KNOWN_VRS:
            raise ValueError(f"unknown VR {self.vr!r}")
        if not isinstance(self.vf, bytes):
            raise ValueError("vf must be bytes")
        if self.undefined_length and self.vr not in LONG_FORM_VRS:
            raise ValueError(f"VR {self.vr} cannot carry an undefined length")
        cap = vl_capacity(self.vr)
        padded = len(self.vf) + (len(self.vf) % 2)
        if not self.undefined_length and padded > cap:
            raise ValueError(
                f"value of {len(self.vf)} bytes exceeds VR {self.vr} capacity {cap:#x}"
            )

    @property
    def vl(self) -> int:
        return len(self.vf)

    def __repr__(self) -> str:
        body = f"{len(self.vf)} bytes" if len(self.vf) > 24 else self.vf.hex()
        extra = ", undefined_length" if self.undefined_length else ""
        return f"DataElement({self.tag}, {self.vr}, {body}{extra})"


@dataclass(frozen=True)
class Dataset:
    """An ordered element list plus the Part-10 envelope.

    ``preamble`` is the literal 128 bytes preceding the DICM magic, or None
    for a file that never had one (lenient parses only). Instances are
    immutable; all editing operations return new datasets.
    """

    preamble: bytes | None = b"\x00" * PREAMBLE_SIZE
    elements: tuple[DataElement, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.preamble is not None and len(self.preamble) != PREAMBLE_SIZE:
            raise ValueError(f"preamble must be {PREAMBLE_SIZE} bytes")
        pixels = [el for el in self.elements if el.tag == PIXEL_DATA]
        if len(pixels) > 1:
            raise ValueError("more than one pixel-data element")
        if pixels and pixels[0].undefined_length:
            raise ValueError("undefined-length (encapsulated) pixel data is unsupported")

    def __len__(self) -> int:
        return len(self.elements)

    def tags(self) -> list[Tag]:
        return [el.tag for el in self.elements]


def find(ds: Dataset, tag: Tag) -> list[int]:
    """Positions of every element bearing ``tag``, in file order."""
    return [i for i, el in enumerate(ds.elements) if el.tag == tag]


def insert_before_pixel_data(ds: Dataset, el: DataElement) -> Dataset:
    """Insert ``el`` immediately before the pixel-data element.

    Without pixel data the element is appended. Repeated inserts keep
    insertion order: the new element lands after any earlier elements with
    the same tag.
    """
    positions = find(ds, PIXEL_DATA)
    at = positions[0] if positions else len(ds.elements)
    elements = ds.elements[:at] + (el,) + ds.elements[at:]
    return replace(ds, elements=elements)


def parse(data: bytes, *, strict: bool = False) -> Dataset:
    """Parse a Part-10 byte stream into a Dataset.

    Accepts the 128-byte-preamble + "DICM" layout, or (lenient mode only) a
    bare stream starting at the file-meta group. The transfer syntax UID is
    checked before the main dataset is read; anything other than explicit-VR
    little-endian raises UnsupportedTransferSyntaxError. In strict mode the
    preamble, magic and transfer syntax element are all mandatory.
    """
    warnings: list[str] = []
    pos = 0
    preamble: bytes | None = None

    if len(data) >= PREAMBLE_SIZE + 4 and data[PREAMBLE_SIZE : PREAMBLE_SIZE + 4] == DICOM_MAGIC:
        preamble = data[:PREAMBLE_SIZE]
        pos = PREAMBLE_SIZE + 4
    elif strict:
        raise DicomParseError("missing DICM magic")
    elif _looks_like_file_meta(data):
        warnings.append("no preamble/DICM magic; parsed as a bare file-meta stream")
    else:
        raise DicomParseError("missing DICM magic and input does not start at a file-meta group")

    elements: list[DataElement] = []

    # File-meta group first: it is always explicit-VR little-endian, and the
    # transfer syntax it declares must be vetted before anything after it is
    # interpreted.
    while pos < len(data) and _peek_group(data, pos) == 0x0002:
        el, pos = _read_element(data, pos)
        elements.append(el)

    ts = _transfer_syntax_of(elements)
    if ts is None:
        if strict:
            raise UnsupportedTransferSyntaxError("transfer syntax UID (0002,0010) absent")
        if pos < len(data) or elements:
            warnings.append(
                "transfer syntax UID absent; assuming explicit-VR little-endian"
            )
    elif ts != EXPLICIT_VR_LITTLE_ENDIAN:
        raise UnsupportedTransferSyntaxError(f"unsupported transfer syntax {ts!r}")

    while pos < len(data):
        el, pos = _read_element(data, pos)
        elements.append(el)

    try:
        return Dataset(preamble=preamble, elements=tuple(elements), warnings=tuple(warnings))
    except ValueError as exc:
        raise DicomParseError(str(exc)) from None


def serialize(ds: Dataset) -> bytes:
    """Write a Dataset back to bytes, padding odd-length values."""
    out = bytearray()
    if ds.preamble is not None:
        out += ds.preamble
        out += DICOM_MAGIC
    for el in ds.elements:
        out += _element_bytes(el)
    return bytes(out)


def element_bytes(el: DataElement) -> bytes:
    """The exact wire encoding of a single element."""
    return _element_bytes(el)


def _element_bytes(el: DataElement) -> bytes:
    vf = el.vf
    if not el.undefined_length and len(vf) % 2:
        vf = vf + (b" " if el.vr in SPACE_PADDED_VRS else b"\x00")
    vl = UNDEFINED_LENGTH if el.undefined_length else len(vf)
    if not el.undefined_length and vl > vl_capacity(el.vr):
        raise DicomSerializeError(
            f"{el.tag} {el.vr}: padded length {vl:#x} exceeds capacity {vl_capacity(el.vr):#x}"
        )
    head = struct.pack("<HH", el.tag.group, el.tag.element) + el.vr.encode("ascii")
    if el.vr in LONG_FORM_VRS:
        head += b"\x00\x00" + struct.pack("<I", vl)
    else:
        head += struct.pack("<H", vl)
    return head + vf


def _looks_like_file_meta(data: bytes) -> bool:
    if len(data) < 8:
        return False
    group, _ = struct.unpack_from("<HH", data, 0)
    return group == 0x0002 and _is_known_vr(data[4:6])


def _is_known_vr(raw: bytes) -> bool:
    try:
        return raw.decode("ascii") in KNOWN_VRS
    except UnicodeDecodeError:
        return False


def _peek_group(data: bytes, pos: int) -> int | None:
    if pos + 2 > len(data):
        return None
    return struct.unpack_from("<H", data, pos)[0]


def _transfer_syntax_of(elements: list[DataElement]) -> str | None:
    for el in elements:
        if el.tag == TRANSFER_SYNTAX_UID:
            return el.vf.rstrip(b"\x00 ").decode("ascii", errors="replace")
    return None


def _read_element(data: bytes, pos: int) -> tuple[DataElement, int]:
    if pos + 8 > len(data):
        raise DicomParseError(f"truncated element header at offset {pos}")
    group, element = struct.unpack_from("<HH", data, pos)
    raw_vr = data[pos + 4 : pos + 6]
    if not _is_known_vr(raw_vr):
        raise DicomParseError(f"unknown VR {raw_vr!r} at offset {pos + 4}")
    vr = raw_vr.decode("ascii")

    if vr in LONG_FORM_VRS:
        if pos + 12 > len(data):
            raise DicomParseError(f"truncated element header at offset {pos}")
        if data[pos + 6 : pos + 8] != b"\x00\x00":
            raise DicomParseError(f"nonzero reserved bytes after VR {vr} at offset {pos + 6}")
        (vl,) = struct.unpack_from("<I", data, pos + 8)
        body = pos + 12
    else:
        (vl,) = struct.unpack_from("<H", data, pos + 6)
        body = pos + 8

    tag = Tag(group, element)
    if vl == UNDEFINED_LENGTH:
        end = _undefined_value_end(data, body)
        return DataElement(tag, vr, data[body:end], undefined_length=True), end

    if vl > vl_capacity(vr):
        raise DicomParseError(f"{tag} {vr}: declared length {vl:#x} exceeds VR capacity")
    if body + vl > len(data):
        raise DicomParseError(
            f"{tag}: declared length {vl} exceeds remaining {len(data) - body} bytes"
        )
    return DataElement(tag, vr, data[body : body + vl]), body + vl


def _undefined_value_end(data: bytes, pos: int) -> int:
    """End offset (past the sequence delimiter) of an undefined-length value."""
    while True:
        if pos + 8 > len(data):
            raise DicomParseError("unterminated undefined-length value")
        group, element = struct.unpack_from("<HH", data, pos)
        (length,) = struct.unpack_from("<I", data, pos + 4)
        if (group, element) == _SEQUENCE_DELIMITER:
            if length != 0:
                raise DicomParseError("sequence delimiter with nonzero length")
            return pos + 8
        if (group, element) != _ITEM:
            raise DicomParseError(
                f"unexpected tag ({group:04X},{element:04X}) inside undefined-length value"
            )
        if length == UNDEFINED_LENGTH:
            pos = _undefined_item_end(data, pos + 8)
        else:
            if pos + 8 + length > len(data):
                raise DicomParseError("truncated sequence item")
            pos += 8 + length


def _undefined_item_end(data: bytes, pos: int) -> int:
    """End offset (past the item delimiter) of an undefined-length item."""
    while True:
        if pos + 8 > len(data):
            raise DicomParseError("unterminated undefined-length item")
        group, element = struct.unpack_from("<HH", data, pos)
        if (group, element) == _ITEM_DELIMITER:
            (length,) = struct.unpack_from("<I", data, pos + 4)
            if length != 0:
                raise DicomParseError("item delimiter with nonzero length")
            return pos + 8
        _, pos = _read_element(data, pos)
