"""Internal AES-CBC helpers (random IV prepended, PKCS#7 padding)."""

from __future__ import annotations

import os

from cryptography.hazmat.primitives import padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

BLOCK_SIZE = 16


def encrypt(key: bytes, plaintext: bytes, iv: bytes | None = None) -> bytes:
    """Encrypt, returning IV followed by ciphertext."""
    if iv is None:
        iv = os.urandom(BLOCK_SIZE)
    if len(iv) != BLOCK_SIZE:
        raise ValueError(f"IV must be {BLOCK_SIZE} bytes")
    padder = padding.PKCS7(BLOCK_SIZE * 8).padder()
    padded = padder.update(plaintext) + padder.finalize()
    enc = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    return iv + enc.update(padded) + enc.finalize()


def decrypt(key: bytes, blob: bytes) -> bytes:
    """Inverse of :func:`encrypt`; raises ValueError on any malformation."""
    if len(blob) < 2 * BLOCK_SIZE:
        raise ValueError("ciphertext shorter than IV plus one block")
    iv, ciphertext = blob[:BLOCK_SIZE], blob[BLOCK_SIZE:]
    if len(ciphertext) % BLOCK_SIZE:
        raise ValueError("ciphertext is not a whole number of blocks")
    dec = Cipher(algorithms.AES(key), modes.CBC(iv)).decryptor()
    padded = dec.update(ciphertext) + dec.finalize()
    unpadder = padding.PKCS7(BLOCK_SIZE * 8).unpadder()
    return unpadder.update(padded) + unpadder.finalize()
