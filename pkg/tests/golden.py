"""Hand-assembled DICOM byte fixtures plus a small independent walker.

Everything in here builds files byte by byte with struct.pack, on purpose
not using the package's serializer, so round-trip tests check the real
codec against independently constructed bytes. ``walk`` is a one-off
element-boundary parser used to cross-check fixture layout; it shares no
code with the package.
"""

from __future__ import annotations

import struct

PREAMBLE = b"\x00" * 128
MAGIC = b"DICM"

# Independent copy of the explicit-VR length rules (do not import the
# package's tables here).
_WIDE_VRS = ("OB", "OD", "OF", "OL", "OV", "OW", "SQ", "UC", "UN", "UR", "UT")

EXPLICIT_LE = "1.2.840.10008.1.2.1"
IMPLICIT_LE = "1.2.840.10008.1.2"


def el(group: int, element: int, vr: str, value: bytes) -> bytes:
    """One explicit-VR little-endian element; values must be pre-padded."""
    assert len(value) % 2 == 0, "golden fixtures are authored with even-length values"
    head = struct.pack("<HH", group, element) + vr.encode()
    if vr in _WIDE_VRS:
        return head + b"\x00\x00" + struct.pack("<I", len(value)) + value
    return head + struct.pack("<H", len(value)) + value


def txt(s: str) -> bytes:
    """Space-padded text value."""
    raw = s.encode()
    return raw + b" " if len(raw) % 2 else raw


def ui(s: str) -> bytes:
    """NUL-padded UID value."""
    raw = s.encode()
    return raw + b"\x00" if len(raw) % 2 else raw


def us(v: int) -> bytes:
    return struct.pack("<H", v)


def file_meta(
    ts: str = EXPLICIT_LE,
    sop_class: str = "1.2.840.10008.5.1.4.1.1.7",
    sop_instance: str = "1.2.3.4.5.6.7.8.9.10",
) -> bytes:
    body = (
        el(0x0002, 0x0002, "UI", ui(sop_class))
        + el(0x0002, 0x0003, "UI", ui(sop_instance))
        + el(0x0002, 0x0010, "UI", ui(ts))
    )
    return el(0x0002, 0x0000, "UL", struct.pack("<I", len(body))) + body


def minimal_file() -> bytes:
    """Preamble + magic, zero elements."""
    return PREAMBLE + MAGIC


def image_file() -> bytes:
    """A realistic small image: patient identity, UIDs, image description,
    8x8 pixel data. Identity values carry long sentinels for leakage tests."""
    pixels = bytes(range(64))
    body = (
        el(0x0008, 0x0016, "UI", ui("1.2.840.10008.5.1.4.1.1.7"))
        + el(0x0008, 0x0018, "UI", ui("1.2.3.4.5.6.7.8.9.10"))
        + el(0x0008, 0x0060, "CS", txt("OT"))
        + el(0x0008, 0x0080, "LO", txt("SENTINEL GENERAL HOSPITAL #1"))
        + el(0x0010, 0x0010, "PN", txt("SENTINEL^PATIENT^NAME^XYZQ"))
        + el(0x0010, 0x0020, "LO", txt("PID-SENTINEL-0042-ABCDEF"))
        + el(0x0010, 0x0030, "DA", txt("19700101"))
        + el(0x0010, 0x0040, "CS", txt("F"))
        + el(0x0020, 0x000D, "UI", ui("1.2.3.4.5.1"))
        + el(0x0020, 0x000E, "UI", ui("1.2.3.4.5.2"))
        + el(0x0028, 0x0002, "US", us(1))
        + el(0x0028, 0x0004, "CS", txt("MONOCHROME2"))
        + el(0x0028, 0x0010, "US", us(8))
        + el(0x0028, 0x0011, "US", us(8))
        + el(0x0028, 0x0030, "DS", txt("1.0\\1.0"))
        + el(0x0028, 0x0100, "US", us(8))
        + el(0x0028, 0x0101, "US", us(8))
        + el(0x0028, 0x0102, "US", us(7))
        + el(0x0028, 0x0103, "US", us(0))
        + el(0x7FE0, 0x0010, "OW", pixels)
    )
    return PREAMBLE + MAGIC + file_meta() + body


def meta12_file() -> bytes:
    """Exactly 12 elements, 6 of them encryptable; used by the exhaustive
    protect/unprotect oracle."""
    body = (
        el(0x0008, 0x0016, "UI", ui("1.2.840.10008.5.1.4.1.1.7"))
        + el(0x0008, 0x0018, "UI", ui("1.2.3.4.5.6.7.8.9.11"))
        + el(0x0008, 0x0060, "CS", txt("OT"))
        + el(0x0008, 0x0080, "LO", txt("SENTINEL GENERAL HOSPITAL #2"))
        + el(0x0010, 0x0010, "PN", txt("SENTINEL^PATIENT^TWELVE^ELS"))
        + el(0x0010, 0x0020, "LO", txt("PID-SENTINEL-0012-TWELVE"))
        + el(0x0018, 0x0015, "CS", txt("CHEST"))
        + el(0x7FE0, 0x0010, "OW", bytes(range(64, 96)))
    )
    return PREAMBLE + MAGIC + file_meta(sop_instance="1.2.3.4.5.6.7.8.9.11") + body


def sequence_file() -> bytes:
    """Sequences in both defined- and undefined-length encodings, plus an
    undefined-length item, to pin the opaque pass-through behavior."""
    inner = el(0x0008, 0x0060, "CS", txt("CT"))
    defined_item = struct.pack("<HHI", 0xFFFE, 0xE000, len(inner)) + inner
    undefined_item = (
        struct.pack("<HHI", 0xFFFE, 0xE000, 0xFFFFFFFF)
        + inner
        + struct.pack("<HHI", 0xFFFE, 0xE00D, 0)
    )
    seq_delim = struct.pack("<HHI", 0xFFFE, 0xE0DD, 0)

    defined_sq = el(0x0040, 0x0100, "SQ", defined_item)
    undefined_sq_value = defined_item + undefined_item + seq_delim
    undefined_sq = (
        struct.pack("<HH", 0x0040, 0x0275)
        + b"SQ\x00\x00"
        + struct.pack("<I", 0xFFFFFFFF)
        + undefined_sq_value
    )
    body = (
        el(0x0008, 0x0060, "CS", txt("MR"))
        + defined_sq
        + undefined_sq
        + el(0x0010, 0x0020, "LO", txt("PID-AFTER-SEQUENCES"))
    )
    return PREAMBLE + MAGIC + file_meta(sop_instance="1.2.3.4.5.6.7.8.9.12") + body


def bare_meta_file() -> bytes:
    """Preamble-less stream starting straight at the file-meta group."""
    return file_meta() + el(0x0010, 0x0020, "LO", txt("PID-NO-PREAMBLE"))


def annotation_file(vf: bytes) -> bytes:
    """Image file with one raw (0070,0006) ST element spliced in before
    the pixel data, bytes supplied by the caller."""
    base = image_file()
    pixel = el(0x7FE0, 0x0010, "OW", bytes(range(64)))
    assert base.endswith(pixel)
    return base[: -len(pixel)] + el(0x0070, 0x0006, "ST", vf) + pixel


GOLDEN_FILES = {
    "minimal": minimal_file,
    "image": image_file,
    "meta12": meta12_file,
    "sequences": sequence_file,
    "bare-meta": bare_meta_file,
}


def walk(data: bytes) -> list[tuple[int, int, str, int, bytes]]:
    """Independent one-off element walker for cross-checking fixtures.

    Returns (group, element, vr, declared_vl, value) per element. For
    undefined lengths it scans flat for the sequence delimiter, which is
    enough for these fixtures (their values never embed delimiter bytes).
    """
    pos = 0
    if data[128:132] == MAGIC:
        pos = 132
    out = []
    while pos < len(data):
        group, element = struct.unpack_from("<HH", data, pos)
        vr = data[pos + 4 : pos + 6].decode()
        if vr in _WIDE_VRS:
            (vl,) = struct.unpack_from("<I", data, pos + 8)
            pos += 12
        else:
            (vl,) = struct.unpack_from("<H", data, pos + 6)
            pos += 8
        if vl == 0xFFFFFFFF:
            stop = data.index(struct.pack("<HHI", 0xFFFE, 0xE0DD, 0), pos)
            value = data[pos : stop + 8]
            pos = stop + 8
        else:
            value = data[pos : pos + vl]
            pos += vl
        out.append((group, element, vr, vl, value))
    return out
