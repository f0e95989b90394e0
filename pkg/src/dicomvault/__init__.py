"""Multimedia annotations and selective per-element encryption for DICOM files.

The package reads and writes explicit-VR little-endian DICOM at the
data-element level, embeds multimedia annotations as standard-shaped
(0070,0006) elements, encrypts chosen elements in place behind private
tags so the file stays readable, and carries the session key to recipients
in an RSA-wrapped XML license.
"""

from .annotation import (
    ANNOTATION_TAG,
    Annotation,
    AnnotationKind,
    add_annotation,
    decode_annotation,
    encode_annotation,
    list_annotations,
    resolve_reference,
)
from .dicom import (
    DataElement,
    Dataset,
    ENCRYPTED_GROUP,
    PIXEL_DATA,
    Tag,
    element_bytes,
    find,
    insert_before_pixel_data,
    parse,
    serialize,
)
from .drm import (
    ElementRecord,
    SessionKey,
    build_records,
    decrypt_elements,
    encrypt_elements,
    generate_session_key,
    records_to_dataset,
)
from .errors import (
    AnnotationError,
    AuthorizationRejectedError,
    DecryptionError,
    DicomParseError,
    DicomSerializeError,
    DicomVaultError,
    DrmError,
    KeyMismatchError,
    LicenseError,
    LicenseParseError,
    NotAnAnnotationError,
    NotAReferenceError,
    NotAuthorizedError,
    PayloadTooLargeError,
    PolicyError,
    PolicyFileError,
    PolicyViolationError,
    ReferenceFetchError,
    UnsupportedTransferSyntaxError,
)
from .license import (
    License,
    ManifestEntry,
    WrappedKey,
    authorize,
    extend_license,
    format_manifest,
    issue_license,
    load_private_key_pem,
    load_public_key_pem,
    manifest_originals,
    parse_license,
    parse_manifest,
    remap_entries,
)
from .policy import (
    DEFAULT_POLICY,
    EncryptionPolicy,
    PolicyClass,
    Violation,
    classify,
    format_policy,
    load_policy,
    parse_policy_text,
    validate_selection,
)
from .validator import Finding, Severity, ValidationReport, diff_elements, validate

__version__ = "0.1.0"
