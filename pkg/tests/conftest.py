from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import rsa

import golden
from dicomvault import parse

STUB_TOKEN = "letmein-0042"
STUB_CONTENT = b"stub media payload 0123456789 abcdef"


@pytest.fixture(scope="session")
def image_bytes() -> bytes:
    return golden.image_file()


@pytest.fixture()
def image_ds(image_bytes):
    return parse(image_bytes)


@pytest.fixture(scope="session")
def meta12_bytes() -> bytes:
    return golden.meta12_file()


@pytest.fixture()
def meta12_ds(meta12_bytes):
    return parse(meta12_bytes)


@pytest.fixture(scope="session")
def rsa_keypair():
    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    return key, key.public_key()


@pytest.fixture(scope="session")
def other_rsa_keypair():
    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    return key, key.public_key()


def private_pem(key) -> bytes:
    return key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )


def public_pem(key) -> bytes:
    return key.public_bytes(
        serialization.Encoding.PEM,
        serialization.PublicFormat.SubjectPublicKeyInfo,
    )


class _StubContentHandler(BaseHTTPRequestHandler):
    def do_GET(self):
        if self.headers.get("Authorization") == f"Bearer {STUB_TOKEN}":
            self.send_response(200)
            self.send_header("Content-Length", str(len(STUB_CONTENT)))
            self.end_headers()
            self.wfile.write(STUB_CONTENT)
        else:
            self.send_error(403, "bad token")

    def log_message(self, *args):  # keep test output clean
        pass


@pytest.fixture(scope="session")
def stub_server():
    """Local content server honoring one static bearer token."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubContentHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/media/clip"
    server.shutdown()
    thread.join(timeout=5)
