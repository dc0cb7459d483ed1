"""Pure-numpy circuit kernels, batched over configurations.

Same contract as the compiled ``_ckernels`` module; used when the extension is
not built or when ``QCLATTICE_PURE_PYTHON`` is set.

Parameter layout per layer: theta[N], theta_zz[N-1], phi[N]; two layers, then
the scale factor.  ``sigma`` is a float array of shape (B, N).
"""

from functools import lru_cache

import numpy as np

_SQRT1_2 = 1.0 / np.sqrt(2.0)


@lru_cache(maxsize=32)
def _tables(n):
    idx = np.arange(2 ** n)
    z = (1 - 2 * ((idx[:, None] >> np.arange(n)) & 1)).astype(np.float64)  # (2^n, n)
    zz = z[:, :-1] * z[:, 1:]
    return z, zz


@lru_cache(maxsize=32)
def _pauli_tables(n, flip, phase):
    idx = np.arange(2 ** n)
    par = np.zeros(2 ** n, dtype=np.int64)
    m = idx & phase
    while np.any(m):
        par ^= m & 1
        m >>= 1
    return idx ^ flip, (1 - 2 * par).astype(np.float64)


def _split(psi, n, j):
    return psi.reshape(psi.shape[0], 2 ** (n - j - 1), 2, 2 ** j)


def _x_block(psi, n, phi, sign=1.0):
    for j in range(n):
        v = _split(psi, n, j)
        c, isn = np.cos(phi[j]), sign * 1j * np.sin(phi[j])
        a0 = v[:, :, 0, :].copy()
        a1 = v[:, :, 1, :].copy()
        v[:, :, 0, :] = c * a0 + isn * a1
        v[:, :, 1, :] = isn * a0 + c * a1


def _h_wall(psi, n):
    for j in range(n):
        v = _split(psi, n, j)
        a0 = v[:, :, 0, :].copy()
        a1 = v[:, :, 1, :]
        v[:, :, 0, :] = (a0 + a1) * _SQRT1_2
        v[:, :, 1, :] = (a0 - a1) * _SQRT1_2


def _phase(sigma, theta, theta_zz, n):
    z, zz = _tables(n)
    coeff = sigma * theta
    coeff_zz = sigma[:, :-1] * sigma[:, 1:] * theta_zz
    return coeff @ z.T + coeff_zz @ zz.T  # (B, 2^n)


def _unpack(params, n):
    if n < 2:
        raise ValueError("the circuit model needs at least two sites")
    L = 3 * n - 1
    if params.shape != (2 * L + 1,):
        raise ValueError(f"expected {2 * L + 1} parameters for {n} sites, got {params.shape}")
    layers = []
    for l in range(2):
        o = l * L
        layers.append((params[o:o + n], params[o + n:o + 2 * n - 1], params[o + 2 * n - 1:o + L]))
    return layers, params[2 * L]


def _forward(params, sigma, n):
    (t1, zz1, p1), (t2, zz2, p2) = _unpack(params, n)[0]
    b = sigma.shape[0]
    psi1 = np.exp(1j * _phase(sigma, t1, zz1, n)) * (2.0 ** (-0.5 * n))
    psi2 = psi1.copy()
    _x_block(psi2, n, p1)
    psi3 = psi2.copy()
    _h_wall(psi3, n)
    d2 = np.exp(1j * _phase(sigma, t2, zz2, n))
    psi4 = psi3 * d2
    psi5 = psi4.copy()
    _x_block(psi5, n, p2)
    assert psi5.shape == (b, 2 ** n)
    return psi1, psi2, psi4, psi5, d2


def _apply_pauli(psi, n, flip, phase, n_y):
    dest, sign = _pauli_tables(n, flip, phase)
    out = np.empty_like(psi)
    out[:, dest] = (1j ** n_y) * sign * psi
    return out


def statevectors(params, sigma, n):
    """Final states, shape (B, 2^n)."""
    return _forward(np.asarray(params, float), np.asarray(sigma, float), n)[3]


def energies(params, sigma, flip, phase, n_y):
    params = np.asarray(params, dtype=np.float64)
    sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    n = sigma.shape[1]
    psi = _forward(params, sigma, n)[3]
    ppsi = _apply_pauli(psi, n, flip, phase, n_y)
    return params[-1] * np.einsum("bi,bi->b", psi.conj(), ppsi).real


def _flip_overlap(lam, psi, n, j):
    """Im <lam| X_j |psi> for each batch row."""
    v = _split(psi, n, j)
    flipped = np.stack([v[:, :, 1, :], v[:, :, 0, :]], axis=2).reshape(psi.shape)
    return np.einsum("bi,bi->b", lam.conj(), flipped).imag


def energies_and_jacobian(params, sigma, flip, phase, n_y):
    """Energies (B,) and their derivatives (B, 6N-1), by adjoint sweep."""
    params = np.asarray(params, dtype=np.float64)
    sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    n = sigma.shape[1]
    (t1, zz1, p1), (t2, zz2, p2) = _unpack(params, n)[0]
    s = params[-1]
    L = 3 * n - 1
    z, zz = _tables(n)
    psi1, psi2, psi4, psi5, d2 = _forward(params, sigma, n)
    lam = _apply_pauli(psi5, n, flip, phase, n_y)
    expv = np.einsum("bi,bi->b", psi5.conj(), lam).real

    jac = np.empty((sigma.shape[0], 6 * n - 1))
    jac[:, -1] = expv
    sig_zz = sigma[:, :-1] * sigma[:, 1:]

    # layer 2 X block
    for j in range(n):
        jac[:, L + 2 * n - 1 + j] = -2.0 * s * _flip_overlap(lam, psi5, n, j)
    _x_block(lam, n, p2, sign=-1.0)
    # layer 2 diagonal block
    g = (lam.conj() * psi4).imag
    jac[:, L:L + n] = -2.0 * s * sigma * (g @ z)
    jac[:, L + n:L + 2 * n - 1] = -2.0 * s * sig_zz * (g @ zz)
    lam *= d2.conj()
    _h_wall(lam, n)
    # layer 1 X block
    for j in range(n):
        jac[:, 2 * n - 1 + j] = -2.0 * s * _flip_overlap(lam, psi2, n, j)
    _x_block(lam, n, p1, sign=-1.0)
    g = (lam.conj() * psi1).imag
    jac[:, 0:n] = -2.0 * s * sigma * (g @ z)
    jac[:, n:2 * n - 1] = -2.0 * s * sig_zz * (g @ zz)
    return s * expv, jac
