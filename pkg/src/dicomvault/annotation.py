"""Multimedia annotations carried in (0070,0006) short-text elements.

An annotation element's value field starts with a fixed 8-byte header
(kind, sequence index, x, y as little-endian 16-bit words) followed by the
content: either the media bytes themselves (store-by-value) or a URI
pointing at an external content server (store-by-reference). Link
annotations always carry a URI. Elements whose value does not match the
header convention are left alone as ordinary free text.
"""

from __future__ import annotations

import logging
import struct
import urllib.error
import urllib.request
from dataclasses import dataclass
from enum import IntEnum
from urllib.parse import urlsplit
from urllib.request import url2pathname

from .dicom import DataElement, Dataset, SHORT_FORM_MAX_VL, Tag, insert_before_pixel_data
from .errors import (
    AuthorizationRejectedError,
    NotAnAnnotationError,
    NotAReferenceError,
    PayloadTooLargeError,
    ReferenceFetchError,
)

logger = logging.getLogger(__name__)

ANNOTATION_TAG = Tag(0x0070, 0x0006)
ANNOTATION_VR = "ST"

HEADER_SIZE = 8
_HEADER = struct.Struct("<HHHH")

# Header (8 bytes) plus content must fit a short-form value length.
MAX_VALUE_PAYLOAD = SHORT_FORM_MAX_VL - HEADER_SIZE

ALLOWED_SCHEMES = ("file", "http", "https")


class AnnotationKind(IntEnum):
    LINK = 1
    IMAGE = 2
    AUDIO = 3
    VIDEO = 4
    ANIMATION = 5


@dataclass(frozen=True)
class Annotation:
    """One annotation: what it is, where it sits, and its content.

    ``payload`` is ``bytes`` for embedded content and ``str`` (a URI) for
    referenced content; link annotations are URIs by definition.
    """

    kind: AnnotationKind
    index: int
    x: int
    y: int
    payload: bytes | str

    def __post_init__(self):
        object.__setattr__(self, "kind", AnnotationKind(self.kind))
        for name in ("index", "x", "y"):
            value = getattr(self, name)
            if not 0 <= value <= 0xFFFF:
                raise ValueError(f"{name} out of 16-bit range: {value}")
        if isinstance(self.payload, str):
            _check_uri(self.payload)
        elif isinstance(self.payload, bytes):
            if self.kind is AnnotationKind.LINK:
                raise ValueError("link annotations carry a URI string, not bytes")
        else:
            raise ValueError("payload must be bytes or a URI string")
        body = self._body()
        if len(body) + (len(body) % 2) > MAX_VALUE_PAYLOAD:
            raise PayloadTooLargeError(
                f"payload of {len(body)} bytes exceeds embedded capacity "
                f"({MAX_VALUE_PAYLOAD}); store it by reference instead"
            )

    @property
    def is_reference(self) -> bool:
        return isinstance(self.payload, str)

    def _body(self) -> bytes:
        if isinstance(self.payload, str):
            return self.payload.encode("utf-8")
        return self.payload

    def describe(self) -> str:
        """Short human-readable summary, e.g. 'audio #1 @ (120,160)'."""
        return f"{self.kind.name.lower()} #{self.index} @ ({self.x},{self.y})"


def encode_annotation(a: Annotation) -> DataElement:
    """Encode an annotation as a (0070,0006) ST element.

    Odd-length content gets one trailing NUL so the element length stays
    even; the original length is not recorded, so byte payloads of odd
    length come back with that extra byte (URI payloads do not, the pad is
    stripped on decode).
    """
    vf = _HEADER.pack(a.kind, a.index, a.x, a.y) + a._body()
    if len(vf) % 2:
        vf += b"\x00"
    return DataElement(ANNOTATION_TAG, ANNOTATION_VR, vf)


def decode_annotation(el: DataElement) -> Annotation:
    """Inverse of :func:`encode_annotation`.

    Raises NotAnAnnotationError when the element does not follow the
    annotation convention (wrong tag, short value, or an implausible kind
    word); such elements are ordinary unformatted text and must be left
    alone.
    """
    if el.tag != ANNOTATION_TAG:
        raise NotAnAnnotationError(f"element {el.tag} is not an annotation carrier")
    if len(el.vf) < HEADER_SIZE:
        raise NotAnAnnotationError("not an annotation element: value shorter than header")
    kind_word, index, x, y = _HEADER.unpack_from(el.vf)
    if not 1 <= kind_word <= 5:
        raise NotAnAnnotationError(f"not an annotation element: kind word {kind_word:#06x}")
    raw = el.vf[HEADER_SIZE:]

    payload: bytes | str
    if kind_word == AnnotationKind.LINK:
        try:
            payload = raw.decode("utf-8").rstrip("\x00")
        except UnicodeDecodeError:
            raise NotAnAnnotationError("link annotation content is not UTF-8") from None
    else:
        payload = _sniff_reference(raw) or raw

    try:
        return Annotation(AnnotationKind(kind_word), index, x, y, payload)
    except ValueError as exc:
        raise NotAnAnnotationError(str(exc)) from None


def list_annotations(ds: Dataset) -> list[Annotation]:
    """All decodable annotations, in file order; free-text lookalikes are skipped."""
    out = []
    for pos, el in enumerate(ds.elements):
        if el.tag != ANNOTATION_TAG:
            continue
        try:
            out.append(decode_annotation(el))
        except NotAnAnnotationError as exc:
            logger.warning("skipping (0070,0006) element at position %d: %s", pos, exc)
    return out


def add_annotation(ds: Dataset, a: Annotation) -> Dataset:
    """Append an annotation, placed just before the pixel-data element."""
    return insert_before_pixel_data(ds, encode_annotation(a))


def resolve_reference(
    a: Annotation, credentials: str | None = None, *, timeout: float = 10.0
) -> bytes:
    """Fetch the content behind a referenced annotation.

    ``credentials`` is presented as a bearer token on http(s) fetches and
    ignored for file URIs. Authorization rejections raise
    AuthorizationRejectedError; any other fetch problem raises
    ReferenceFetchError.
    """
    if not a.is_reference or not a.payload:
        raise NotAReferenceError("annotation payload is embedded bytes, not a reference")
    uri = a.payload
    parts = urlsplit(uri)

    if parts.scheme == "file":
        if parts.netloc not in ("", "localhost"):
            raise ReferenceFetchError(f"unsupported file URI host {parts.netloc!r}")
        path = url2pathname(parts.path)
        try:
            with open(path, "rb") as fh:
                return fh.read()
        except OSError as exc:
            raise ReferenceFetchError(f"cannot read {path}: {exc}") from exc

    request = urllib.request.Request(uri)
    if credentials:
        request.add_header("Authorization", f"Bearer {credentials}")
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return response.read()
    except urllib.error.HTTPError as exc:
        if exc.code in (401, 403):
            raise AuthorizationRejectedError(
                f"content server rejected credentials for {uri} (HTTP {exc.code})"
            ) from exc
        raise ReferenceFetchError(f"fetch of {uri} failed: HTTP {exc.code}") from exc
    except (urllib.error.URLError, TimeoutError) as exc:
        raise ReferenceFetchError(f"fetch of {uri} failed: {exc}") from exc


def _check_uri(text: str) -> None:
    if text == "":
        return
    if _sniff_reference(text.encode("utf-8")) != text:
        raise ValueError(
            f"reference URI {text!r} is not a well-formed {'/'.join(ALLOWED_SCHEMES)} URI"
        )


def _sniff_reference(raw: bytes) -> str | None:
    """Return the URI if ``raw`` reads as one with an allowed scheme."""
    try:
        text = raw.decode("utf-8").rstrip("\x00")
    except UnicodeDecodeError:
        return None
    if not text or any(ord(c) < 0x20 for c in text):
        return None
    try:
        parts = urlsplit(text)
    except ValueError:
        return None
    if parts.scheme == "file" and (parts.path or parts.netloc):
        return text
    if parts.scheme in ("http", "https") and parts.netloc:
        return text
    return None
