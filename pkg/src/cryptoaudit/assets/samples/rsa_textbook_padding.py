"""Tiny public-key helper used by the licensing service."""

import random
from math import gcd


def generate_keypair(bits=1024):
    p = _random_prime(bits // 2)
    q = _random_prime(bits // 2)
    n = p * q
    phi = (p - 1) * (q - 1)
    e = 65537
    assert gcd(e, phi) == 1
    d = pow(e, -1, phi)
    return (n, e), (n, d)


def encrypt(public_key, message: bytes) -> int:
    n, e = public_key
    m = int.from_bytes(message, "big")
    if m >= n:
        raise ValueError("message too long")
    return pow(m, e, n)


def decrypt(private_key, ciphertext: int) -> bytes:
    n, d = private_key
    m = pow(ciphertext, d, n)
    return m.to_bytes((m.bit_length() + 7) // 8, "big")


def _random_prime(bits):
    while True:
        candidate = random.getrandbits(bits) | (1 << (bits - 1)) | 1
        if _is_probable_prime(candidate):
            return candidate


def _is_probable_prime(n, rounds=20):
    if n < 4:
        return n in (2, 3)
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(rounds):
        a = random.randrange(2, n - 1)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True
