"""XML authorization licenses: RSA-wrapped session keys plus a manifest.

A license is a small XML document. The session key appears once per
recipient, wrapped under that recipient's RSA public key inside
EncryptedKey; the document's own CipherData carries the protection
manifest (which remapped tag hides which original element) encrypted under
the session key. Anyone holding a listed private key can recover both; the
XML itself never contains key or manifest plaintext.
"""

from __future__ import annotations

import base64
import binascii
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.sax.saxutils import escape

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import padding as rsa_padding
from cryptography.hazmat.primitives.asymmetric import rsa
from cryptography.hazmat.primitives.hashes import SHA1

from . import cipher
from .dicom import Dataset, ENCRYPTED_GROUP, Tag
from .drm import AES128_CBC_URI, AES256_CBC_URI, KEY_LENGTHS, SessionKey
from .errors import KeyMismatchError, LicenseError, LicenseParseError, NotAuthorizedError

XENC_NS = "http://www.w3.org/2001/04/xmlenc#"
DSIG_NS = "http://www.w3.org/2000/09/xmldsig#"

RSA_15_URI = "http://www.w3.org/2001/04/xmlenc#rsa-1_5"
RSA_OAEP_URI = "http://www.w3.org/2001/04/xmlenc#rsa-oaep-mgf1p"

MIN_RSA_BITS = 2048

DEFAULT_KEY_NAME = "sessionkey"


@dataclass(frozen=True)
class WrappedKey:
    """One EncryptedKey block: the session key wrapped for each recipient."""

    key_name: str = DEFAULT_KEY_NAME
    wrap_algorithm: str = RSA_15_URI
    cipher_values: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.cipher_values:
            raise LicenseError("a wrapped key needs at least one cipher value")


@dataclass(frozen=True)
class License:
    data_algorithm: str
    wrapped_keys: tuple[WrappedKey, ...]
    manifest_cipher_value: str

    @property
    def recipient_count(self) -> int:
        return sum(len(wk.cipher_values) for wk in self.wrapped_keys)


def issue_license(
    sk: SessionKey,
    recipients: list[rsa.RSAPublicKey],
    manifest: bytes,
    *,
    wrap_algorithm: str = RSA_15_URI,
    key_name: str = DEFAULT_KEY_NAME,
) -> str:
    """Build the license XML for ``recipients``.

    The manifest travels encrypted under the session key; the session key
    travels wrapped under each recipient's RSA public key (PKCS#1 v1.5 by
    default, matching the rsa-1_5 algorithm URI; OAEP on request).
    """
    if not recipients:
        raise LicenseError("at least one recipient public key is required")
    pad = _wrap_padding(wrap_algorithm)
    for pub in recipients:
        if pub.key_size < MIN_RSA_BITS:
            raise LicenseError(
                f"recipient RSA key of {pub.key_size} bits is too small; "
                f"need at least {MIN_RSA_BITS}"
            )
    wrapped = tuple(
        base64.b64encode(pub.encrypt(sk.key, pad)).decode("ascii") for pub in recipients
    )
    manifest_cv = base64.b64encode(cipher.encrypt(sk.key, manifest)).decode("ascii")
    return _render_license(
        sk.algorithm, [WrappedKey(key_name, wrap_algorithm, wrapped)], manifest_cv
    )


def extend_license(
    lic: License, sk: SessionKey, new_recipients: list[rsa.RSAPublicKey]
) -> str:
    """Re-issue ``lic`` with extra recipients, keeping the existing ones.

    Existing cipher values (and the manifest ciphertext) are carried over
    verbatim; the session key recovered by :func:`authorize` is wrapped for
    each new recipient under the license's own wrap algorithm.
    """
    if not new_recipients:
        raise LicenseError("at least one new recipient public key is required")
    if sk.algorithm != lic.data_algorithm:
        raise LicenseError("session key algorithm does not match the license")
    first = lic.wrapped_keys[0]
    pad = _wrap_padding(first.wrap_algorithm)
    for pub in new_recipients:
        if pub.key_size < MIN_RSA_BITS:
            raise LicenseError(
                f"recipient RSA key of {pub.key_size} bits is too small; "
                f"need at least {MIN_RSA_BITS}"
            )
    added = tuple(
        base64.b64encode(pub.encrypt(sk.key, pad)).decode("ascii") for pub in new_recipients
    )
    blocks = [
        WrappedKey(first.key_name, first.wrap_algorithm, first.cipher_values + added),
        *lic.wrapped_keys[1:],
    ]
    return _render_license(lic.data_algorithm, blocks, lic.manifest_cipher_value)


def _render_license(
    data_algorithm: str, wrapped_keys: list[WrappedKey], manifest_cv: str
) -> str:
    key_elements = []
    for wk in wrapped_keys:
        blocks = "\n".join(
            f"  <CipherData>\n    <CipherValue>{cv}</CipherValue>\n  </CipherData>"
            for cv in wk.cipher_values
        )
        key_elements.append(
            f"""<EncryptedKey xmlns="{XENC_NS}" >
  <EncryptionMethod Algorithm="{wk.wrap_algorithm}" />
  <KeyInfo xmlns="{DSIG_NS}" >
    <KeyName>{escape(wk.key_name)}</KeyName>
  </KeyInfo>
{blocks}
  </EncryptedKey>"""
        )
    joined = "\n".join(key_elements)
    return f"""<?xml version="1.0" standalone="no"?>
<article>
<EncryptedData Type="http://www.w3.org/2001/04/xmlenc#Element"
  xmlns="{XENC_NS}" >
<EncryptionMethod Algorithm="{data_algorithm}"/>
<KeyInfo xmlns="{DSIG_NS}" >
{joined}
</KeyInfo>
<CipherData>
  <CipherValue>{manifest_cv}</CipherValue>
</CipherData>
</EncryptedData>
</article>
"""


def parse_license(xml: str) -> License:
    """Parse license XML back into its parts; extra elements are ignored."""
    try:
        root = ET.fromstring(xml)
    except ET.ParseError as exc:
        raise LicenseParseError(f"malformed license XML: {exc}") from None

    if root.tag == f"{{{XENC_NS}}}EncryptedData":
        enc_data = root
    else:
        enc_data = root.find(f"{{{XENC_NS}}}EncryptedData")
        if enc_data is None:
            raise LicenseParseError("license lacks an EncryptedData element")

    method = enc_data.find(f"{{{XENC_NS}}}EncryptionMethod")
    data_algorithm = method.get("Algorithm") if method is not None else None
    if data_algorithm is None:
        raise LicenseParseError("EncryptedData lacks an EncryptionMethod algorithm")
    if data_algorithm not in (AES256_CBC_URI, AES128_CBC_URI):
        raise LicenseParseError(f"unrecognized data cipher URI {data_algorithm!r}")

    key_info = enc_data.find(f"{{{DSIG_NS}}}KeyInfo")
    encrypted_keys = key_info.findall(f"{{{XENC_NS}}}EncryptedKey") if key_info is not None else []
    if not encrypted_keys:
        raise LicenseParseError("license lacks an EncryptedKey element")

    wrapped_keys = []
    for ek in encrypted_keys:
        ek_method = ek.find(f"{{{XENC_NS}}}EncryptionMethod")
        wrap_algorithm = ek_method.get("Algorithm") if ek_method is not None else None
        if wrap_algorithm is None:
            raise LicenseParseError("EncryptedKey lacks an EncryptionMethod algorithm")
        if wrap_algorithm not in (RSA_15_URI, RSA_OAEP_URI):
            raise LicenseParseError(f"unrecognized key wrap URI {wrap_algorithm!r}")
        name_el = ek.find(f"{{{DSIG_NS}}}KeyInfo/{{{DSIG_NS}}}KeyName")
        key_name = name_el.text.strip() if name_el is not None and name_el.text else DEFAULT_KEY_NAME
        values = tuple(
            _cipher_value_text(cd)
            for cd in ek.findall(f"{{{XENC_NS}}}CipherData")
        )
        if not values:
            raise LicenseParseError("EncryptedKey lacks CipherData")
        wrapped_keys.append(WrappedKey(key_name, wrap_algorithm, values))

    manifest_blocks = enc_data.findall(f"{{{XENC_NS}}}CipherData")
    if not manifest_blocks:
        raise LicenseParseError("license lacks its CipherData payload")
    if len(manifest_blocks) > 1:
        raise LicenseParseError("license has more than one top-level CipherData")
    manifest_cv = _cipher_value_text(manifest_blocks[0])

    return License(data_algorithm, tuple(wrapped_keys), manifest_cv)


def authorize(lic: License, private_key: rsa.RSAPrivateKey) -> tuple[SessionKey, bytes]:
    """Recover the session key and manifest with a recipient's private key.

    Cipher values are tried in document order; the first one that unwraps
    to a key of the right length wins. No unwrap at all means the key
    holder was never a recipient.
    """
    expected = KEY_LENGTHS[lic.data_algorithm]
    for wk in lic.wrapped_keys:
        pad = _wrap_padding(wk.wrap_algorithm)
        for cv in wk.cipher_values:
            blob = _b64decode(cv)
            try:
                candidate = private_key.decrypt(blob, pad)
            except ValueError:
                continue
            if len(candidate) != expected:
                continue
            sk = SessionKey(candidate, lic.data_algorithm)
            try:
                manifest = cipher.decrypt(sk.key, _b64decode(lic.manifest_cipher_value))
            except ValueError as exc:
                raise KeyMismatchError(f"license/key mismatch: {exc}") from None
            return sk, manifest
    raise NotAuthorizedError("not an authorized recipient")


def load_public_key_pem(data: bytes) -> rsa.RSAPublicKey:
    try:
        key = serialization.load_pem_public_key(data)
    except ValueError as exc:
        raise LicenseError(f"cannot load public key: {exc}") from None
    if not isinstance(key, rsa.RSAPublicKey):
        raise LicenseError("public key is not RSA")
    return key


def load_private_key_pem(data: bytes, password: bytes | None = None) -> rsa.RSAPrivateKey:
    try:
        key = serialization.load_pem_private_key(data, password=password)
    except (ValueError, TypeError) as exc:
        raise LicenseError(f"cannot load private key: {exc}") from None
    if not isinstance(key, rsa.RSAPrivateKey):
        raise LicenseError("private key is not RSA")
    return key


@dataclass(frozen=True)
class ManifestEntry:
    """One manifest line: which private tag replaced which original element."""

    remapped: Tag
    original: Tag
    vr: str

    def line(self) -> str:
        return (
            f"{self.remapped.group:04X},{self.remapped.element:04X}"
            f" <- {self.original.group:04X},{self.original.element:04X} {self.vr}"
        )


_MANIFEST_LINE = re.compile(
    r"^([0-9A-Fa-f]{4},[0-9A-Fa-f]{4})\s*<-\s*([0-9A-Fa-f]{4},[0-9A-Fa-f]{4})\s+([A-Z]{2})$"
)


def remap_entries(original: Dataset, protected: Dataset) -> list[ManifestEntry]:
    """Derive manifest entries by lining up an original/protected pair.

    Protection replaces elements in place, so the two datasets must have the
    same element count with remapped tags at the changed positions.
    """
    if len(original.elements) != len(protected.elements):
        raise LicenseError("datasets differ in element count; not an in-place protection pair")
    entries = []
    for before, after in zip(original.elements, protected.elements):
        if before.tag == after.tag:
            continue
        if after.tag.group != ENCRYPTED_GROUP:
            raise LicenseError(
                f"element changed tag {before.tag} -> {after.tag} without being encrypted"
            )
        entries.append(ManifestEntry(after.tag, before.tag, before.vr))
    return entries


def format_manifest(entries: list[ManifestEntry]) -> str:
    return "".join(e.line() + "\n" for e in entries)


def parse_manifest(text: str) -> list[ManifestEntry]:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        m = _MANIFEST_LINE.match(line)
        if not m:
            raise LicenseError(f"manifest line {lineno} is malformed: {line!r}")
        entries.append(ManifestEntry(Tag.parse(m.group(1)), Tag.parse(m.group(2)), m.group(3)))
    return entries


def manifest_originals(entries: list[ManifestEntry]) -> dict[Tag, tuple[Tag, str]]:
    """Remapped tag -> (original tag, VR) lookup for record building."""
    return {e.remapped: (e.original, e.vr) for e in entries}


def _wrap_padding(uri: str):
    if uri == RSA_15_URI:
        return rsa_padding.PKCS1v15()
    if uri == RSA_OAEP_URI:
        return rsa_padding.OAEP(
            mgf=rsa_padding.MGF1(algorithm=SHA1()), algorithm=SHA1(), label=None
        )
    raise LicenseError(f"unrecognized key wrap URI {uri!r}")


def _cipher_value_text(cipher_data: ET.Element) -> str:
    value = cipher_data.find(f"{{{XENC_NS}}}CipherValue")
    if value is None or not value.text or not value.text.strip():
        raise LicenseParseError("CipherData lacks a CipherValue")
    return "".join(value.text.split())


def _b64decode(text: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise LicenseParseError(f"cipher value is not valid base64: {exc}") from None
