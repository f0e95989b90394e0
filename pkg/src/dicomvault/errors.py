"""Exception hierarchy shared across the package."""


class DicomVaultError(Exception):
    """Base class for every error raised by this package."""


class DicomParseError(DicomVaultError):
    """Input bytes are not a DICOM stream this parser accepts."""


class UnsupportedTransferSyntaxError(DicomParseError):
    """Transfer syntax is not explicit-VR little-endian."""


class DicomSerializeError(DicomVaultError):
    """A dataset cannot be written as a valid DICOM stream."""


class AnnotationError(DicomVaultError):
    """Problem encoding, decoding or resolving an annotation."""


class NotAnAnnotationError(AnnotationError):
    """Element does not carry an annotation payload."""


class PayloadTooLargeError(AnnotationError):
    """Embedded payload exceeds the short-text length ceiling."""


class NotAReferenceError(AnnotationError):
    """Annotation payload is embedded bytes, not a URI."""


class ReferenceFetchError(AnnotationError):
    """Referenced content could not be retrieved."""


class AuthorizationRejectedError(ReferenceFetchError):
    """Content server rejected the presented credentials."""


class PolicyError(DicomVaultError):
    """Problem loading or applying an encryption policy."""


class PolicyFileError(PolicyError):
    """Policy override file is malformed."""


class PolicyViolationError(PolicyError):
    """A protection selection breaks one or more policy rules.

    Carries the individual violations so callers can report each one.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(v.message for v in self.violations)
        super().__init__(f"selection violates encryption policy: {lines}")


class DrmError(DicomVaultError):
    """Problem during selective element encryption or decryption."""


class DecryptionError(DrmError):
    """Ciphertext did not decrypt to a well-formed element record."""


class LicenseError(DicomVaultError):
    """Problem issuing, parsing or using an authorization license."""


class LicenseParseError(LicenseError):
    """License XML is malformed or missing required parts."""


class NotAuthorizedError(LicenseError):
    """No wrapped key in the license unwraps with the given private key."""


class KeyMismatchError(LicenseError):
    """Session key was recovered but the license payload will not decrypt."""
