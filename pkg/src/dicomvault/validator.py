"""Compatibility checks for annotated and protected files.

"Still opens in an ordinary viewer" is approximated by a checklist over
the parsed structure: the file parses strictly, annotations sit where
readers expect them, identifier tags survive untouched, the image group
was encrypted all-or-nothing, encrypted elements keep to their private
group, and every length is even. Driving real viewer binaries is out of
scope; this checklist is the stand-in.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from enum import Enum

from .annotation import ANNOTATION_TAG, ANNOTATION_VR, decode_annotation
from .dicom import (
    DataElement,
    Dataset,
    ENCRYPTED_GROUP,
    PIXEL_DATA,
    TRANSFER_SYNTAX_UID,
    Tag,
    find,
    parse,
)
from .errors import DicomParseError, NotAnAnnotationError
from .policy import DEFAULT_POLICY, EncryptionPolicy


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    code: str
    tag: Tag | None
    message: str

    def line(self) -> str:
        where = f" [{self.tag.group:04X},{self.tag.element:04X}]" if self.tag else ""
        return f"{self.severity.value.upper()} {self.code}{where} {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def passed(self) -> bool:
        return not any(f.severity is Severity.ERROR for f in self.findings)

    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity is Severity.ERROR]

    def to_text(self) -> str:
        lines = [f.line() for f in self.findings]
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def validate(
    data: bytes,
    reference: bytes | None = None,
    *,
    policy: EncryptionPolicy = DEFAULT_POLICY,
) -> ValidationReport:
    """Run the compatibility checklist over ``data``.

    ``reference`` (the pre-protection original) enables the byte-identity
    checks that cannot be made from one file alone. All problems come back
    as findings; nothing raises.
    """
    findings: list[Finding] = []

    try:
        ds = parse(data)
    except DicomParseError as exc:
        findings.append(Finding(Severity.ERROR, "C1", None, f"does not parse: {exc}"))
        return ValidationReport(tuple(findings))

    if ds.preamble is None:
        findings.append(
            Finding(Severity.ERROR, "C1", None, "no preamble/DICM magic; strict parse fails")
        )

    ref: Dataset | None = None
    if reference is not None:
        try:
            ref = parse(reference)
        except DicomParseError as exc:
            findings.append(
                Finding(Severity.ERROR, "C3", None, f"reference does not parse: {exc}")
            )

    _check_annotations(ds, findings)
    _check_never_encrypt(ds, ref, policy, findings)
    _check_image_group(ds, ref, policy, findings)
    _check_encrypted_elements(ds, findings)
    _check_even_lengths(ds, findings)

    return ValidationReport(tuple(findings))


def diff_elements(a: bytes, b: bytes) -> list[tuple[Tag, str]]:
    """Element-level structural diff, in file order.

    Each entry is (tag, "changed" | "added" | "removed"). Raises
    DicomParseError when either input does not parse.
    """
    a_els = parse(a).elements
    b_els = parse(b).elements
    a_keys = [_element_key(el) for el in a_els]
    b_keys = [_element_key(el) for el in b_els]
    matcher = difflib.SequenceMatcher(a=a_keys, b=b_keys, autojunk=False)

    out: list[tuple[Tag, str]] = []
    for op, i1, i2, j1, j2 in matcher.get_opcodes():
        if op == "equal":
            continue
        if op == "replace":
            k = 0
            while i1 + k < i2 and j1 + k < j2:
                ta, tb = a_els[i1 + k].tag, b_els[j1 + k].tag
                if ta == tb:
                    out.append((ta, "changed"))
                else:
                    out.append((ta, "removed"))
                    out.append((tb, "added"))
                k += 1
            out.extend((a_els[i].tag, "removed") for i in range(i1 + k, i2))
            out.extend((b_els[j].tag, "added") for j in range(j1 + k, j2))
        elif op == "delete":
            out.extend((a_els[i].tag, "removed") for i in range(i1, i2))
        elif op == "insert":
            out.extend((b_els[j].tag, "added") for j in range(j1, j2))
    return out


def _element_key(el: DataElement) -> tuple:
    return (el.tag, el.vr, el.vf, el.undefined_length)


def _check_annotations(ds: Dataset, findings: list[Finding]) -> None:
    pixel_positions = find(ds, PIXEL_DATA)
    pixel_at = pixel_positions[0] if pixel_positions else None
    count = 0
    for pos, el in enumerate(ds.elements):
        if el.tag != ANNOTATION_TAG:
            continue
        try:
            ann = decode_annotation(el)
        except NotAnAnnotationError:
            continue  # genuine free text is fine where it is
        count += 1
        if el.vr != ANNOTATION_VR:
            findings.append(
                Finding(
                    Severity.ERROR, "C2", el.tag,
                    f"annotation element has VR {el.vr}, expected {ANNOTATION_VR}",
                )
            )
        if pixel_at is not None and pos > pixel_at:
            findings.append(
                Finding(
                    Severity.ERROR, "C2", el.tag,
                    f"annotation ({ann.describe()}) placed after the pixel-data element",
                )
            )
        if not ann.is_reference and _looks_binary(ann.payload):
            findings.append(
                Finding(
                    Severity.WARNING, "C2", el.tag,
                    f"annotation ({ann.describe()}) embeds binary data in a short-text element",
                )
            )
    findings.append(
        Finding(Severity.INFO, "C2", None, f"{count} annotation element(s)")
    )


def _check_never_encrypt(
    ds: Dataset, ref: Dataset | None, policy: EncryptionPolicy, findings: list[Finding]
) -> None:
    if not find(ds, TRANSFER_SYNTAX_UID):
        findings.append(
            Finding(
                Severity.ERROR, "C3", TRANSFER_SYNTAX_UID,
                "transfer syntax UID is missing; a never-encrypt tag was dropped or encrypted",
            )
        )
    if ref is None:
        return
    protected_tags = policy.never_encrypt | {
        el.tag for el in ref.elements if el.tag.group == 0x0002
    }
    for tag in sorted(protected_tags):
        ref_els = [ref.elements[i] for i in find(ref, tag)]
        if not ref_els:
            continue
        cand_els = [ds.elements[i] for i in find(ds, tag)]
        if len(cand_els) != len(ref_els):
            findings.append(
                Finding(
                    Severity.ERROR, "C3", tag,
                    "never-encrypt tag missing from (or duplicated in) the protected file",
                )
            )
            continue
        for r, c in zip(ref_els, cand_els):
            if _element_key(r) != _element_key(c):
                findings.append(
                    Finding(
                        Severity.ERROR, "C3", tag,
                        "never-encrypt tag differs from the reference bytes",
                    )
                )
                break


def _check_image_group(
    ds: Dataset, ref: Dataset | None, policy: EncryptionPolicy, findings: list[Finding]
) -> None:
    present = set(ds.tags())
    described = policy.encrypt_with_image & present
    if described and PIXEL_DATA not in present:
        for tag in sorted(described):
            findings.append(
                Finding(
                    Severity.ERROR, "C4", tag,
                    "image-description tag present without pixel data (image group split)",
                )
            )
    if ref is None:
        return
    ref_group = policy.image_group() & set(ref.tags())
    if not ref_group:
        return
    kept = ref_group & present
    if kept and kept != ref_group:
        for tag in sorted(ref_group - kept):
            findings.append(
                Finding(
                    Severity.ERROR, "C4", tag,
                    "image group partially encrypted; its members travel together",
                )
            )


def _check_encrypted_elements(ds: Dataset, findings: list[Finding]) -> None:
    for el in ds.elements:
        if el.tag.group != ENCRYPTED_GROUP:
            continue
        if el.vr != "OB":
            findings.append(
                Finding(
                    Severity.ERROR, "C5", el.tag,
                    f"encrypted element has VR {el.vr}, expected OB",
                )
            )
        if len(el.vf) < 32 or len(el.vf) % 16:
            findings.append(
                Finding(
                    Severity.ERROR, "C5", el.tag,
                    f"encrypted element length {len(el.vf)} is not a plausible IV+ciphertext",
                )
            )


def _check_even_lengths(ds: Dataset, findings: list[Finding]) -> None:
    for el in ds.elements:
        if not el.undefined_length and len(el.vf) % 2:
            findings.append(
                Finding(
                    Severity.ERROR, "C6", el.tag,
                    f"odd value length {len(el.vf)}",
                )
            )


def _looks_binary(payload: bytes) -> bool:
    try:
        text = payload.decode("ascii")
    except UnicodeDecodeError:
        return True
    return any(ch not in "\r\n\t\f" and not ch.isprintable() for ch in text)
