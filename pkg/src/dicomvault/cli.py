"""Command-line front end: annotate, protect, license and validate files.

Every subcommand is a thin composition of library calls; nothing here
parses bytes or touches key material beyond loading PEM files. Output
files are written to a temp file and renamed into place, so a failing run
never leaves a partial file behind. Exit codes: 0 success, 1 domain error,
2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import annotation, dicom, drm, license as license_mod, policy as policy_mod, validator
from .errors import DicomVaultError

POLICY_ENV_VAR = "DICOMVAULT_POLICY"

_KIND_NAMES = {k.name.lower(): k for k in annotation.AnnotationKind}

_TEXT_VRS = dicom.SPACE_PADDED_VRS | {"UI"}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (DicomVaultError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dicomvault",
        description="Annotate, selectively encrypt, license and validate DICOM files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="print the element table of a file")
    p.add_argument("file")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("annotate", help="add one multimedia annotation")
    p.add_argument("file")
    p.add_argument("--kind", required=True, help="link|image|audio|video|animation (or 1-5)")
    p.add_argument("--index", type=int, default=0, help="sequence number in the view")
    p.add_argument("--x", type=int, default=0)
    p.add_argument("--y", type=int, default=0)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--payload-file", help="embed these bytes (store-by-value)")
    src.add_argument("--uri", help="store this reference URI instead of content")
    p.add_argument("--out", help="output path (default: edit in place)")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("annotations", help="list annotations; optionally extract one")
    p.add_argument("file")
    p.add_argument("--extract", type=int, metavar="N", help="extract the N-th listed annotation")
    p.add_argument("--out", help="where to write the extracted payload")
    p.add_argument("--resolve", action="store_true", help="fetch referenced content over file/http(s)")
    p.add_argument("--token", help="bearer token presented when resolving http(s) references")
    p.set_defaults(func=cmd_annotations)

    p = sub.add_parser("protect", help="encrypt selected elements and issue a license")
    p.add_argument("file")
    p.add_argument("--select", action="append", default=[], metavar="GGGG,EEEE",
                   help="tag to encrypt (repeatable)")
    p.add_argument("--select-class", action="append", default=[], choices=["must", "image"],
                   help="select every present tag of a policy class (repeatable)")
    p.add_argument("--recipient", action="append", required=True, metavar="PEM",
                   help="recipient RSA public key file (repeatable)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="coerce", action="store_false",
                      help="reject policy-incomplete selections (default)")
    mode.add_argument("--coerce", dest="coerce", action="store_true",
                      help="expand the selection to satisfy the policy")
    p.set_defaults(coerce=False)
    p.add_argument("--policy", help=f"policy override file (or ${POLICY_ENV_VAR})")
    p.add_argument("--key-bits", type=int, choices=[128, 256], default=256)
    p.add_argument("--out", help="protected file path (default: NAME.protected.EXT)")
    p.add_argument("--license-out", help="license path (default: OUT.license.xml)")
    p.set_defaults(func=cmd_protect)

    p = sub.add_parser("unprotect", help="decrypt a protected file with a license")
    p.add_argument("file")
    p.add_argument("--license", required=True, dest="license_path")
    p.add_argument("--key", required=True, help="recipient RSA private key PEM")
    p.add_argument("--partial", action="store_true",
                   help="leave elements that this key cannot decrypt in place")
    p.add_argument("--out", help="output path (default: NAME.decrypted.EXT)")
    p.set_defaults(func=cmd_unprotect)

    p = sub.add_parser("license-show", help="describe a license file")
    p.add_argument("license_path", metavar="license")
    p.add_argument("--key", help="private key PEM; also prints the decrypted manifest")
    p.set_defaults(func=cmd_license_show)

    p = sub.add_parser("license-issue", help="re-issue a license to additional recipients")
    p.add_argument("--license", required=True, dest="license_path")
    p.add_argument("--key", required=True, help="private key of an existing recipient")
    p.add_argument("--recipient", action="append", required=True, metavar="PEM",
                   help="additional recipient public key (repeatable)")
    p.add_argument("--out", required=True, help="path for the extended license")
    p.set_defaults(func=cmd_license_issue)

    p = sub.add_parser("validate", help="run the compatibility checklist")
    p.add_argument("file")
    p.add_argument("--reference", help="pre-protection original for byte-identity checks")
    p.add_argument("--policy", help=f"policy override file (or ${POLICY_ENV_VAR})")
    p.set_defaults(func=cmd_validate)

    return parser


def cmd_inspect(args) -> int:
    ds = dicom.parse(_read(args.file))
    for warning in ds.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    for el in ds.elements:
        print(f"{el.tag} {el.vr} {el.vl:>10}  {_preview(el)}")
    return 0


def cmd_annotate(args) -> int:
    ds = dicom.parse(_read(args.file))
    kind = _parse_kind(args.kind)
    if args.payload_file is not None:
        payload: bytes | str = _read(args.payload_file)
    else:
        payload = args.uri
    ann = annotation.Annotation(kind, args.index, args.x, args.y, payload)
    out = args.out or args.file
    _write_atomic(out, dicom.serialize(annotation.add_annotation(ds, ann)))
    print(f"added {ann.describe()} -> {out}")
    return 0


def cmd_annotations(args) -> int:
    ds = dicom.parse(_read(args.file))
    annotations = annotation.list_annotations(ds)
    for n, ann in enumerate(annotations, start=1):
        if ann.is_reference:
            print(f"{n}: {ann.describe()} -> {ann.payload}")
        else:
            print(f"{n}: {ann.describe()} value {len(ann.payload)} bytes")
    if args.extract is None:
        return 0
    if args.out is None:
        print("error: --extract requires --out", file=sys.stderr)
        return 1
    if not 1 <= args.extract <= len(annotations):
        print(f"error: no annotation #{args.extract} (file has {len(annotations)})", file=sys.stderr)
        return 1
    ann = annotations[args.extract - 1]
    if ann.is_reference:
        if not args.resolve:
            print(
                f"error: annotation #{args.extract} is a reference; pass --resolve to fetch it",
                file=sys.stderr,
            )
            return 1
        payload = annotation.resolve_reference(ann, args.token)
    else:
        payload = ann.payload
    _write_atomic(args.out, payload)
    print(f"extracted {len(payload)} bytes -> {args.out}")
    return 0


def cmd_protect(args) -> int:
    data = _read(args.file)
    ds = dicom.parse(data)
    policy = _load_policy(args.policy)

    selection = {dicom.Tag.parse(t) for t in args.select}
    present = set(ds.tags())
    for cls in args.select_class:
        if cls == "must":
            selection |= policy.must_encrypt & present
        else:
            selection |= policy.image_group() & present
    if not selection:
        print("error: nothing selected; pass --select or --select-class", file=sys.stderr)
        return 1

    validated = policy_mod.validate_selection(selection, ds, policy, coerce=args.coerce)
    sk = drm.generate_session_key(args.key_bits)
    protected = drm.encrypt_elements(ds, validated, sk)
    manifest = license_mod.format_manifest(license_mod.remap_entries(ds, protected))
    recipients = [license_mod.load_public_key_pem(_read(p)) for p in args.recipient]
    xml = license_mod.issue_license(sk, recipients, manifest.encode("utf-8"))

    out = args.out or _derived_name(args.file, "protected")
    license_out = args.license_out or f"{out}.license.xml"
    _write_atomic(out, dicom.serialize(protected))
    _write_atomic(license_out, xml.encode("utf-8"))
    encrypted_count = len(ds.elements) - sum(
        a is b for a, b in zip(ds.elements, protected.elements)
    )
    print(f"protected {encrypted_count} element(s) -> {out}")
    print(f"license for {len(recipients)} recipient(s) -> {license_out}")
    return 0


def cmd_unprotect(args) -> int:
    data = _read(args.file)
    lic = license_mod.parse_license(_read_text(args.license_path))
    private_key = license_mod.load_private_key_pem(_read(args.key))
    sk, _manifest = license_mod.authorize(lic, private_key)
    restored = drm.decrypt_elements(dicom.parse(data), sk, partial=args.partial)
    out = args.out or _derived_name(args.file, "decrypted")
    _write_atomic(out, dicom.serialize(restored))
    print(f"decrypted -> {out}")
    return 0


def cmd_license_show(args) -> int:
    lic = license_mod.parse_license(_read_text(args.license_path))
    print(f"recipients: {lic.recipient_count}")
    print(f"data algorithm: {lic.data_algorithm}")
    for wk in lic.wrapped_keys:
        print(f"key wrap: {wk.wrap_algorithm} (key name {wk.key_name!r})")
    if args.key:
        private_key = license_mod.load_private_key_pem(_read(args.key))
        _sk, manifest = license_mod.authorize(lic, private_key)
        print("manifest:")
        for line in manifest.decode("utf-8", errors="replace").splitlines():
            print(f"  {line}")
    return 0


def cmd_license_issue(args) -> int:
    lic = license_mod.parse_license(_read_text(args.license_path))
    private_key = license_mod.load_private_key_pem(_read(args.key))
    sk, _manifest = license_mod.authorize(lic, private_key)
    new_recipients = [license_mod.load_public_key_pem(_read(p)) for p in args.recipient]
    xml = license_mod.extend_license(lic, sk, new_recipients)
    _write_atomic(args.out, xml.encode("utf-8"))
    print(f"license extended to {len(new_recipients)} more recipient(s) -> {args.out}")
    return 0


def cmd_validate(args) -> int:
    reference = _read(args.reference) if args.reference else None
    report = validator.validate(_read(args.file), reference, policy=_load_policy(args.policy))
    print(report.to_text())
    return 0 if report.passed else 1


def _parse_kind(text: str) -> annotation.AnnotationKind:
    name = text.strip().lower()
    if name in _KIND_NAMES:
        return _KIND_NAMES[name]
    try:
        return annotation.AnnotationKind(int(name))
    except (ValueError, KeyError):
        raise ValueError(
            f"unknown annotation kind {text!r}; use one of {', '.join(_KIND_NAMES)}"
        ) from None


def _load_policy(path: str | None) -> policy_mod.EncryptionPolicy:
    path = path or os.environ.get(POLICY_ENV_VAR)
    if path:
        return policy_mod.load_policy(path)
    return policy_mod.DEFAULT_POLICY


def _derived_name(path: str, label: str) -> str:
    p = Path(path)
    return str(p.with_name(f"{p.stem}.{label}{p.suffix}"))


def _read(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write_atomic(path: str, data: bytes) -> None:
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or Path("."), prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _preview(el: dicom.DataElement) -> str:
    if el.undefined_length:
        return f"<undefined length, {len(el.vf)} raw bytes>"
    if el.vr in _TEXT_VRS:
        text = el.vf.decode("ascii", errors="replace").strip("\x00 ")
        if all(ch.isprintable() or ch in "\r\n\t" for ch in text):
            flat = " ".join(text.split())
            return flat[:60] + ("..." if len(flat) > 60 else "")
    return f"<{len(el.vf)} bytes>"


if __name__ == "__main__":
    sys.exit(main())
