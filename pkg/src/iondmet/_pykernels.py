"""Numpy implementations of the statevector kernels (fallback backend)."""

import numpy as np

_IPOW = np.array([1, 1j, -1, -1j])


def pauli_expectation(amps, xmasks, zmasks, nys, coeffs):
    """sum_k c_k <psi|P_k|psi> for strings given as bit masks."""
    idx = np.arange(amps.size, dtype=np.int64)
    conj = amps.conj()
    total = 0j
    for x, z, ny, c in zip(xmasks, zmasks, nys, coeffs):
        sign = 1 - 2 * (np.bitwise_count(idx & z) & 1).astype(np.int64)
        total += c * _IPOW[ny % 4] * np.dot(conj[idx ^ x], sign * amps)
    return complex(total)


def apply_1q(amps, n, q, u):
    psi = amps.reshape((2 ** q, 2, 2 ** (n - q - 1)))
    return np.einsum("ab,ibj->iaj", u, psi).reshape(-1)


def apply_2q(amps, n, q0, q1, u):
    psi = amps.reshape((2,) * n)
    u4 = u.reshape(2, 2, 2, 2)
    out = np.tensordot(u4, psi, axes=([2, 3], [q0, q1]))
    return np.moveaxis(out, [0, 1], [q0, q1]).reshape(-1)
