"""Encryption restrictions: which tags may, must, or must never be encrypted.

Three rule groups drive validation. Identifier tags that cross-link files
(and the whole file-meta group) can never be encrypted without breaking
every reader. Image-description tags travel as one unit with the pixel
data: all together or not at all, in both directions. Patient-identity
tags must be encrypted whenever they are present. Everything else is at
the operator's discretion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .dicom import Dataset, PIXEL_DATA, Tag
from .errors import PolicyError, PolicyFileError, PolicyViolationError


class PolicyClass(Enum):
    NEVER_ENCRYPT = "never-encrypt"
    ENCRYPT_WITH_IMAGE = "encrypt-with-image"
    MUST_ENCRYPT = "must-encrypt"
    DISCRETIONARY = "discretionary"


# Identifier (UID) tags required to associate DICOM objects.
COMMON_UID_TAGS = frozenset(
    {
        Tag(0x0002, 0x0002),  # Media Storage SOP Class UID
        Tag(0x0002, 0x0003),  # Media Storage SOP Instance UID
        Tag(0x0002, 0x0010),  # Transfer Syntax UID
        Tag(0x0002, 0x0012),  # Implementation Class UID
        Tag(0x0008, 0x0016),  # SOP Class UID
        Tag(0x0008, 0x0018),  # SOP Instance UID
        Tag(0x0020, 0x000D),  # Study Instance UID
        Tag(0x0020, 0x000E),  # Series Instance UID
        Tag(0x0020, 0x0052),  # Frame of Reference UID
    }
)

# Image-description tags that only make sense next to the pixel data.
IMAGE_DESCRIPTION_TAGS = frozenset(
    {
        Tag(0x0028, 0x0002),  # Samples Per Pixel
        Tag(0x0028, 0x0004),  # Photometric Interpretation
        Tag(0x0028, 0x0010),  # Rows
        Tag(0x0028, 0x0011),  # Columns
        Tag(0x0028, 0x0030),  # Pixel Spacing
        Tag(0x0028, 0x0100),  # Bits Allocated
        Tag(0x0028, 0x0101),  # Bits Stored
        Tag(0x0028, 0x0102),  # High Bit
        Tag(0x0028, 0x0103),  # Pixel Representation
        Tag(0x0028, 0x0120),  # Pixel Padding Value
    }
)

# Patient identity tags: name, ID, birth date, sex.
PATIENT_IDENTITY_TAGS = frozenset(
    {
        Tag(0x0010, 0x0010),
        Tag(0x0010, 0x0020),
        Tag(0x0010, 0x0030),
        Tag(0x0010, 0x0040),
    }
)


@dataclass(frozen=True)
class EncryptionPolicy:
    """The three tag sets; the whole file-meta group is implicitly never-encrypt.

    The pixel-data tag anchors the with-image group and is a member of it
    without being listed.
    """

    never_encrypt: frozenset[Tag] = COMMON_UID_TAGS
    encrypt_with_image: frozenset[Tag] = IMAGE_DESCRIPTION_TAGS
    must_encrypt: frozenset[Tag] = PATIENT_IDENTITY_TAGS

    def __post_init__(self):
        sets = {
            "never": self.never_encrypt,
            "with-image": self.encrypt_with_image,
            "must": self.must_encrypt,
        }
        names = list(sets)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                overlap = sets[a] & sets[b]
                if overlap:
                    tags = ", ".join(str(t) for t in sorted(overlap))
                    raise PolicyError(f"policy sets [{a}] and [{b}] overlap on {tags}")
        for name in ("encrypt_with_image", "must_encrypt"):
            bad = [t for t in getattr(self, name) if t.group == 0x0002]
            if bad:
                raise PolicyError(f"file-meta tags cannot appear in {name}")
        if PIXEL_DATA in self.encrypt_with_image | self.must_encrypt | self.never_encrypt:
            raise PolicyError("pixel data anchors the with-image group implicitly; do not list it")

    def image_group(self) -> frozenset[Tag]:
        return self.encrypt_with_image | {PIXEL_DATA}


DEFAULT_POLICY = EncryptionPolicy()


@dataclass(frozen=True)
class Violation:
    tag: Tag
    policy_class: PolicyClass
    rule: str
    message: str


def classify(tag: Tag, policy: EncryptionPolicy = DEFAULT_POLICY) -> PolicyClass:
    """Deterministic class lookup; unlisted tags are discretionary."""
    if tag.group == 0x0002 or tag in policy.never_encrypt:
        return PolicyClass.NEVER_ENCRYPT
    if tag == PIXEL_DATA or tag in policy.encrypt_with_image:
        return PolicyClass.ENCRYPT_WITH_IMAGE
    if tag in policy.must_encrypt:
        return PolicyClass.MUST_ENCRYPT
    return PolicyClass.DISCRETIONARY


def validate_selection(
    selection: set[Tag] | frozenset[Tag],
    ds: Dataset,
    policy: EncryptionPolicy = DEFAULT_POLICY,
    *,
    coerce: bool = False,
) -> frozenset[Tag]:
    """Check a protection selection against the policy.

    Strict mode (default) raises PolicyViolationError listing every broken
    rule. Coerce mode repairs what it can instead: a partial with-image
    selection grows to the full group present in the file, and present
    must-encrypt tags are added; never-encrypt picks and an image group
    without its pixel data stay fatal. The returned selection always
    re-validates cleanly in strict mode.
    """
    present = set(ds.tags())
    selected = set(selection)
    violations: list[Violation] = []

    for tag in sorted(selected):
        if classify(tag, policy) is PolicyClass.NEVER_ENCRYPT:
            violations.append(
                Violation(
                    tag,
                    PolicyClass.NEVER_ENCRYPT,
                    "never-encrypt",
                    f"{tag} is a never-encrypt tag; readers need it in the clear",
                )
            )

    group = policy.image_group()
    group_present = group & present
    picked = selected & group
    if picked:
        if PIXEL_DATA not in present:
            for tag in sorted(picked):
                violations.append(
                    Violation(
                        tag,
                        PolicyClass.ENCRYPT_WITH_IMAGE,
                        "image-group-no-pixel-data",
                        f"{tag} is image-bound but the file has no pixel data to pair it with",
                    )
                )
        elif picked != group_present:
            if coerce:
                selected |= group_present
            else:
                for tag in sorted(group_present - picked):
                    violations.append(
                        Violation(
                            tag,
                            PolicyClass.ENCRYPT_WITH_IMAGE,
                            "image-group-partial",
                            f"{tag} must be encrypted together with the rest of the image group",
                        )
                    )

    missing_must = (policy.must_encrypt & present) - selected
    if missing_must:
        if coerce:
            selected |= missing_must
        else:
            for tag in sorted(missing_must):
                violations.append(
                    Violation(
                        tag,
                        PolicyClass.MUST_ENCRYPT,
                        "must-encrypt-missing",
                        f"{tag} is present and must be encrypted but was not selected",
                    )
                )

    if violations:
        raise PolicyViolationError(violations)
    return frozenset(selected)


def parse_policy_text(text: str) -> EncryptionPolicy:
    """Parse the policy override format: [never] / [with-image] / [must]
    section headers, one GGGG,EEEE tag per line, '#' comments."""
    sections: dict[str, set[Tag]] = {"never": set(), "with-image": set(), "must": set()}
    current: set[Tag] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in sections:
                raise PolicyFileError(f"line {lineno}: unknown section [{name}]")
            current = sections[name]
            continue
        if current is None:
            raise PolicyFileError(f"line {lineno}: tag before any section header")
        try:
            current.add(Tag.parse(line))
        except ValueError as exc:
            raise PolicyFileError(f"line {lineno}: {exc}") from None
    return EncryptionPolicy(
        never_encrypt=frozenset(sections["never"]),
        encrypt_with_image=frozenset(sections["with-image"]),
        must_encrypt=frozenset(sections["must"]),
    )


def load_policy(path: str) -> EncryptionPolicy:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_policy_text(fh.read())


def format_policy(policy: EncryptionPolicy) -> str:
    """Render a policy in the override-file format (the default renders the
    built-in tag tables)."""
    lines = []
    for header, tags in (
        ("never", policy.never_encrypt),
        ("with-image", policy.encrypt_with_image),
        ("must", policy.must_encrypt),
    ):
        lines.append(f"[{header}]")
        lines.extend(f"{t.group:04X},{t.element:04X}" for t in sorted(tags))
        lines.append("")
    return "\n".join(lines)
