"""Arithmetic in GF(2^k) through exponential/logarithm tables."""

from __future__ import annotations

import numpy as np

# Primitive polynomials, bit i = coefficient of x^i.
PRIMITIVE_POLY = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,  # x^4 + x + 1
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
}


class GF:
    """The field with ``2**k`` elements; elements are the integers ``0..q-1``.

    Addition is XOR.  ``mul``, ``inv`` and ``div`` accept scalars or arrays.
    """

    def __init__(self, k: int, poly: int | None = None):
        if k not in PRIMITIVE_POLY and poly is None:
            raise ValueError(f"no default primitive polynomial for k={k}")
        self.k = k
        self.q = 1 << k
        self.poly = PRIMITIVE_POLY[k] if poly is None else poly
        q = self.q
        exp = np.zeros(2 * q, dtype=np.int64)
        log = np.full(q, -1, dtype=np.int64)
        a = 1
        for i in range(q - 1):
            exp[i] = a
            if log[a] != -1:
                raise ValueError(f"polynomial {bin(self.poly)} is not primitive")
            log[a] = i
            a <<= 1
            if a & q:
                a ^= self.poly
        exp[q - 1:2 * q - 2] = exp[:q - 1]
        self.exp, self.log = exp, log
        nz = np.arange(1, q)
        table = np.zeros((q, q), dtype=np.int64)
        table[1:, 1:] = exp[(log[nz][:, None] + log[nz][None, :]) % (q - 1)]
        self.mul_table = table
        inv = np.zeros(q, dtype=np.int64)
        inv[1:] = exp[(q - 1 - log[nz]) % (q - 1)]
        self.inv_table = inv

    def __repr__(self):
        return f"GF(2^{self.k}, poly={bin(self.poly)})"

    @staticmethod
    def add(a, b):
        return np.bitwise_xor(a, b)

    def mul(self, a, b):
        out = self.mul_table[a, b]
        return int(out) if np.ndim(out) == 0 else out

    def inv(self, a):
        if np.any(np.asarray(a) == 0):
            raise ZeroDivisionError("0 has no inverse in GF(2^k)")
        out = self.inv_table[a]
        return int(out) if np.ndim(out) == 0 else out

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def matvec(self, A, x):
        """``A @ x`` over the field."""
        A = np.asarray(A, dtype=np.int64)
        x = np.asarray(x, dtype=np.int64)
        if A.shape[1] == 0:
            return np.zeros(A.shape[0], dtype=np.int64)
        return np.bitwise_xor.reduce(self.mul_table[A, x[None, :]], axis=1)
