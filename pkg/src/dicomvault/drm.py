"""Selective per-element encryption that keeps the file a parseable DICOM.

Each selected element is replaced in place by a private element tagged
(7777,k) with VR "OB", k counting encrypted elements in file order. Its
value is a random IV followed by the AES-CBC ciphertext of a small record
holding the original tag, VR, length and value, so decryption can restore
the element byte-exactly. Everything not selected is left untouched, which
is what lets ordinary readers keep working on the protected file.
"""

from __future__ import annotations

import logging
import secrets
import struct
from dataclasses import dataclass, replace
from typing import Callable

from . import cipher
from .dicom import (
    DataElement,
    Dataset,
    ENCRYPTED_GROUP,
    KNOWN_VRS,
    LONG_FORM_VRS,
    Tag,
    UNDEFINED_LENGTH,
)
from .errors import DecryptionError, DrmError

logger = logging.getLogger(__name__)

AES256_CBC_URI = "http://www.w3.org/2001/04/xmlenc#aes256-cbc"
AES128_CBC_URI = "http://www.w3.org/2001/04/xmlenc#aes128-cbc"

KEY_LENGTHS = {AES256_CBC_URI: 32, AES128_CBC_URI: 16}

ENCRYPTED_VR = "OB"

# Plaintext record inside each encrypted value: original group, element,
# VR (2 ASCII bytes) and value length, then the original value bytes.
_RECORD_HEAD = struct.Struct("<HH2sI")


@dataclass(frozen=True)
class SessionKey:
    """Symmetric key for one protection run."""

    key: bytes
    algorithm: str = AES256_CBC_URI

    def __post_init__(self):
        if self.algorithm not in KEY_LENGTHS:
            raise DrmError(f"unsupported cipher algorithm {self.algorithm!r}")
        expected = KEY_LENGTHS[self.algorithm]
        if len(self.key) != expected:
            raise DrmError(
                f"key must be {expected} bytes for {self.algorithm.rsplit('#', 1)[-1]}, "
                f"got {len(self.key)}"
            )

    def __repr__(self) -> str:  # never echo key material
        return f"SessionKey(<{len(self.key)} bytes>, {self.algorithm.rsplit('#', 1)[-1]})"


def generate_session_key(bits: int = 256) -> SessionKey:
    """Fresh random key from the OS CSPRNG; 256-bit by default."""
    if bits not in (128, 256):
        raise DrmError(f"unsupported key size {bits}; use 128 or 256")
    algorithm = AES256_CBC_URI if bits == 256 else AES128_CBC_URI
    return SessionKey(secrets.token_bytes(bits // 8), algorithm)


@dataclass(frozen=True)
class ElementRecord:
    """Flat per-element record mirroring the on-wire layout.

    ``bvr_len``/``bvl_len`` are the widths of the VR and length fields as
    encoded (the 4-byte VR width counts the reserved pad of long-form VRs);
    ``bexplicit`` is always true here since only explicit VR is handled.
    ``bstate_index`` marks encrypted (remapped-tag) elements, whose
    ``sinfo`` names the original tag and VR when that mapping is known.
    ``next`` chains records in file order; the last record has None.
    """

    wgroup: int
    welement: int
    bexplicit: bool
    bstate_index: bool
    bvr_len: int
    bvl_len: int
    vr: str
    vl: int
    e_len: int
    vf: bytes
    sinfo: str = ""
    next: int | None = None

    @property
    def tag(self) -> Tag:
        return Tag(self.wgroup, self.welement)


def build_records(
    ds: Dataset, originals: dict[Tag, tuple[Tag, str]] | None = None
) -> list[ElementRecord]:
    """One record per element, file order preserved through ``next`` links.

    ``originals`` (remapped tag -> original tag and VR, e.g. from a decrypted
    license manifest) fills in ``sinfo`` for encrypted elements.
    """
    records = []
    count = len(ds.elements)
    for i, el in enumerate(ds.elements):
        wide = el.vr in LONG_FORM_VRS
        encrypted = el.tag.group == ENCRYPTED_GROUP
        sinfo = ""
        if encrypted and originals and el.tag in originals:
            orig, vr = originals[el.tag]
            sinfo = f"{orig.group:04X},{orig.element:04X} {vr}"
        records.append(
            ElementRecord(
                wgroup=el.tag.group,
                welement=el.tag.element,
                bexplicit=True,
                bstate_index=encrypted,
                bvr_len=4 if wide else 2,
                bvl_len=4 if wide else 2,
                vr=el.vr,
                vl=UNDEFINED_LENGTH if el.undefined_length else el.vl,
                e_len=len(el.vf),
                vf=el.vf,
                sinfo=sinfo,
                next=i + 1 if i + 1 < count else None,
            )
        )
    return records


def records_to_dataset(
    records: list[ElementRecord], preamble: bytes | None = b"\x00" * 128
) -> Dataset:
    """Rebuild a dataset from records (inverse of :func:`build_records`)."""
    elements = tuple(
        DataElement(
            r.tag, r.vr, r.vf, undefined_length=(r.vl == UNDEFINED_LENGTH)
        )
        for r in records
    )
    return Dataset(preamble=preamble, elements=elements)


def encrypt_elements(
    ds: Dataset,
    selection: frozenset[Tag] | set[Tag],
    sk: SessionKey,
    *,
    iv_source: Callable[[], bytes] | None = None,
) -> Dataset:
    """Encrypt every element whose tag is in ``selection``, in place.

    The selection is expected to have passed policy validation. Selected
    tags absent from the dataset are logged and skipped. ``iv_source`` lets
    tests inject reproducible IVs; by default each element gets a fresh
    random one, so re-encrypting the same file never repeats ciphertext.
    """
    selection = set(selection)
    counter = max(
        (el.tag.element for el in ds.elements if el.tag.group == ENCRYPTED_GROUP),
        default=0,
    )
    out: list[DataElement] = []
    seen: set[Tag] = set()
    for el in ds.elements:
        if el.tag not in selection:
            out.append(el)
            continue
        seen.add(el.tag)
        counter += 1
        if counter > 0xFFFF:
            raise DrmError("more than 65535 encrypted elements; cannot assign a private tag")
        wire_vl = UNDEFINED_LENGTH if el.undefined_length else el.vl
        record = _RECORD_HEAD.pack(
            el.tag.group, el.tag.element, el.vr.encode("ascii"), wire_vl
        ) + el.vf
        iv = iv_source() if iv_source is not None else None
        blob = cipher.encrypt(sk.key, record, iv=iv)
        out.append(DataElement(Tag(ENCRYPTED_GROUP, counter), ENCRYPTED_VR, blob))
    for tag in sorted(selection - seen):
        logger.warning("selected tag %s not present in dataset; skipped", tag)
    return replace(ds, elements=tuple(out))


def decrypt_elements(ds: Dataset, sk: SessionKey, *, partial: bool = False) -> Dataset:
    """Restore every encrypted element to its original, in place.

    With ``partial`` true, elements that do not decrypt under this key are
    left as they are instead of failing the whole run; that is how files
    protected in several passes with separate keys are peeled one key at a
    time.
    """
    out: list[DataElement] = []
    for el in ds.elements:
        if el.tag.group != ENCRYPTED_GROUP:
            out.append(el)
            continue
        try:
            out.append(_decrypt_element(el, sk))
        except DecryptionError:
            if not partial:
                raise
            out.append(el)
    return replace(ds, elements=tuple(out))


def _decrypt_element(el: DataElement, sk: SessionKey) -> DataElement:
    try:
        record = cipher.decrypt(sk.key, el.vf)
    except ValueError as exc:
        raise DecryptionError(
            f"{el.tag}: decryption failed, key mismatch or corrupted ciphertext ({exc})"
        ) from None
    head = _RECORD_HEAD.size
    if len(record) < head:
        raise DecryptionError(f"{el.tag}: decrypted record shorter than its header")
    group, element, raw_vr, vl = _RECORD_HEAD.unpack_from(record)
    vf = record[head:]
    try:
        vr = raw_vr.decode("ascii")
    except UnicodeDecodeError:
        raise DecryptionError(f"{el.tag}: decrypted record has a non-ASCII VR") from None
    undefined = vl == UNDEFINED_LENGTH
    # Structural sanity doubles as an integrity check: CBC with a wrong key
    # occasionally survives unpadding, but not these field constraints.
    if vr not in KNOWN_VRS or (not undefined and vl != len(vf)):
        raise DecryptionError(
            f"{el.tag}: decrypted record is not well formed; key mismatch or corruption"
        )
    try:
        return DataElement(Tag(group, element), vr, vf, undefined_length=undefined)
    except ValueError as exc:
        raise DecryptionError(f"{el.tag}: restored element invalid: {exc}") from None
