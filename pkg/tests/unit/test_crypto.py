"""Tests for govchain.crypto module."""

from __future__ import annotations

import pytest

from govchain.crypto import Digest
from govchain.crypto import KeyPair
from govchain.crypto import address_of
from govchain.crypto import canonical_json
from govchain.crypto import derive_keypair
from govchain.crypto import hash_bytes
from govchain.crypto import hash_object
from govchain.crypto import sign
from govchain.crypto import verify
from govchain.crypto import verify_hex
from govchain.exceptions import CryptoError

EMPTY_SHA256 = (
    "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
)


class TestHashing:
    """Test SHA-256 hashing and canonical encoding."""

    def test_empty_input_vector(self):
        """Test the standard SHA-256 digest of empty input."""
        assert hash_bytes(b"").hex() == EMPTY_SHA256

    def test_digest_is_32_bytes(self):
        """Test digests have a fixed length for any input size."""
        assert len(hash_bytes(b"x" * 10_000)) == 32

    def test_digest_rejects_wrong_length(self):
        """Test Digest refuses values that are not 32 bytes."""
        with pytest.raises(CryptoError, match="32 bytes"):
            Digest(b"short")

    def test_digest_from_hex_roundtrip(self):
        """Test parsing a digest back from hex."""
        digest = hash_bytes(b"abc")
        assert Digest.from_hex(digest.hex()) == digest

    def test_digest_from_invalid_hex(self):
        """Test invalid hex raises CryptoError."""
        with pytest.raises(CryptoError, match="invalid digest hex"):
            Digest.from_hex("zz")

    def test_canonical_json_sorts_keys(self):
        """Test key order does not change the encoding."""
        assert canonical_json({"b": 1, "a": 2}) == canonical_json(
            {"a": 2, "b": 1}
        )
        assert canonical_json({"b": 1, "a": 2}) == b'{"a":2,"b":1}'

    def test_hash_object_is_deterministic(self):
        """Test equal structures hash equally."""
        assert hash_object({"x": [1, 2]}) == hash_object({"x": [1, 2]})
        assert hash_object({"x": [1, 2]}) != hash_object({"x": [2, 1]})


class TestKeys:
    """Test key derivation, signing and addresses."""

    def test_derive_is_deterministic(self):
        """Test the same seed and name give the same key."""
        assert derive_keypair(1, "alice") == derive_keypair(1, "alice")

    def test_derive_differs_by_name_and_seed(self):
        """Test different names or seeds give different keys."""
        base = derive_keypair(1, "alice").public_key
        assert derive_keypair(1, "bob").public_key != base
        assert derive_keypair(2, "alice").public_key != base

    def test_address_is_truncated_key_hash(self):
        """Test address = first 20 bytes of hash(public key)."""
        key = KeyPair.from_seed(b"seed")
        assert key.address == hash_bytes(key.public_key)[:20].hex()
        assert len(key.address) == 40
        assert address_of(key.public_key) == key.address

    def test_private_key_not_in_repr(self):
        """Test the private half is hidden from repr."""
        key = KeyPair.from_seed(b"seed")
        assert key.private_key.hex() not in repr(key)

    def test_sign_and_verify(self):
        """Test a valid signature verifies."""
        key = KeyPair.from_seed(b"seed")
        signature = sign(key, b"message")
        assert verify(key.public_key, b"message", signature)

    def test_verify_rejects_tampered_message(self):
        """Test a signature does not cover another message."""
        key = KeyPair.from_seed(b"seed")
        signature = sign(key, b"message")
        assert not verify(key.public_key, b"messagE", signature)

    def test_verify_rejects_other_key(self):
        """Test a signature does not verify under another key."""
        key = KeyPair.from_seed(b"seed")
        other = KeyPair.from_seed(b"other")
        signature = sign(key, b"message")
        assert not verify(other.public_key, b"message", signature)

    def test_verify_malformed_input_is_false(self):
        """Test malformed keys or signatures return False."""
        key = KeyPair.from_seed(b"seed")
        assert not verify(b"short", b"message", b"\x00" * 64)
        assert not verify(key.public_key, b"message", b"\x00" * 10)

    def test_verify_hex_invalid_hex(self):
        """Test non-hex input is rejected rather than raising."""
        assert not verify_hex("not-hex", b"message", "also-not-hex")

    def test_verify_hex_valid(self):
        """Test the hex variant accepts a good signature."""
        key = KeyPair.from_seed(b"seed")
        signature = sign(key, b"message").hex()
        assert verify_hex(key.public_hex, b"message", signature)
