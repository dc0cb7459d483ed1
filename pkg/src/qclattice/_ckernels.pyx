# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled circuit kernels; see ``_kernels_py`` for the reference contract.

States are held as interleaved (re, im) double buffers of length 2 * 2**n.
"""

import numpy as np

from libc.math cimport cos, sin, sqrt
from libc.stdlib cimport malloc, free


cdef void diag_vector(const double* sig, const double* th, const double* zz, int n,
                      double* d) noexcept nogil:
    """d[b] = exp(i * (sum_j sig_j th_j z_j(b) + sum_j sig_j sig_j+1 zz_j z_j z_j+1)).

    Built by doubling over qubits, so only 4 sin/cos pairs per qubit.
    """
    cdef double fr[2][2]
    cdef double fi[2][2]
    cdef double a, c, ang, xr, xi
    cdef int j, bj, bp
    cdef Py_ssize_t b, half, u
    a = sig[0] * th[0]
    d[0] = cos(a)
    d[1] = sin(a)
    d[2] = cos(a)
    d[3] = -sin(a)
    for j in range(1, n):
        half = (<Py_ssize_t> 1) << j
        a = sig[j] * th[j]
        c = sig[j - 1] * sig[j] * zz[j - 1]
        for bj in range(2):
            for bp in range(2):
                ang = (1 - 2 * bj) * (a + c * (1 - 2 * bp))
                fr[bj][bp] = cos(ang)
                fi[bj][bp] = sin(ang)
        for b in range(half):
            bp = (b >> (j - 1)) & 1
            xr = d[2 * b]
            xi = d[2 * b + 1]
            u = 2 * (b + half)
            d[u] = xr * fr[1][bp] - xi * fi[1][bp]
            d[u + 1] = xr * fi[1][bp] + xi * fr[1][bp]
            d[2 * b] = xr * fr[0][bp] - xi * fi[0][bp]
            d[2 * b + 1] = xr * fi[0][bp] + xi * fr[0][bp]


cdef void x_block(double* psi, int n, const double* phi, double sgn) noexcept nogil:
    """prod_j exp(i * sgn * phi_j X_j)."""
    cdef Py_ssize_t dim = (<Py_ssize_t> 1) << n, stride, blk, k, k1
    cdef int j
    cdef double c, s, a0r, a0i, a1r, a1i
    for j in range(n):
        stride = (<Py_ssize_t> 1) << j
        c = cos(phi[j])
        s = sgn * sin(phi[j])
        blk = 0
        while blk < dim:
            for k in range(blk, blk + stride):
                k1 = k + stride
                a0r = psi[2 * k]
                a0i = psi[2 * k + 1]
                a1r = psi[2 * k1]
                a1i = psi[2 * k1 + 1]
                psi[2 * k] = c * a0r - s * a1i
                psi[2 * k + 1] = c * a0i + s * a1r
                psi[2 * k1] = c * a1r - s * a0i
                psi[2 * k1 + 1] = c * a1i + s * a0r
            blk += 2 * stride


cdef void h_wall(double* psi, int n) noexcept nogil:
    cdef Py_ssize_t dim = (<Py_ssize_t> 1) << n, stride, blk, k, k1
    cdef int j
    cdef double r = 1.0 / sqrt(2.0)
    cdef double a0r, a0i, a1r, a1i
    for j in range(n):
        stride = (<Py_ssize_t> 1) << j
        blk = 0
        while blk < dim:
            for k in range(blk, blk + stride):
                k1 = k + stride
                a0r = psi[2 * k]
                a0i = psi[2 * k + 1]
                a1r = psi[2 * k1]
                a1i = psi[2 * k1 + 1]
                psi[2 * k] = (a0r + a1r) * r
                psi[2 * k + 1] = (a0i + a1i) * r
                psi[2 * k1] = (a0r - a1r) * r
                psi[2 * k1 + 1] = (a0i - a1i) * r
            blk += 2 * stride


cdef inline int parity(Py_ssize_t x) noexcept nogil:
    cdef int p = 0
    while x:
        p ^= <int> (x & 1)
        x >>= 1
    return p


cdef void apply_pauli(const double* psi, double* out, int n, Py_ssize_t flip,
                      Py_ssize_t phase, int n_y) noexcept nogil:
    """out = P psi with P|b> = i**n_y (-1)**parity(b & phase) |b ^ flip>."""
    cdef Py_ssize_t b, t, dim = (<Py_ssize_t> 1) << n
    cdef double cr, ci, pr, pi
    cdef int k = n_y % 4
    cr = 1.0 if k == 0 else (-1.0 if k == 2 else 0.0)
    ci = 1.0 if k == 1 else (-1.0 if k == 3 else 0.0)
    for b in range(dim):
        pr = psi[2 * b]
        pi = psi[2 * b + 1]
        if parity(b & phase):
            pr = -pr
            pi = -pi
        t = b ^ flip
        out[2 * t] = cr * pr - ci * pi
        out[2 * t + 1] = cr * pi + ci * pr


cdef double flip_overlap_imag(const double* lam, const double* psi, int n, int j) noexcept nogil:
    """Im <lam| X_j |psi>."""
    cdef Py_ssize_t b, f, dim = (<Py_ssize_t> 1) << n, bit = (<Py_ssize_t> 1) << j
    cdef double acc = 0.0
    for b in range(dim):
        f = b ^ bit
        acc += lam[2 * b] * psi[2 * f + 1] - lam[2 * b + 1] * psi[2 * f]
    return acc


cdef struct Work:
    int n
    double* psi1
    double* psi2
    double* psi4
    double* psi5
    double* d2
    double* lam
    double* g


cdef int work_alloc(Work* w, int n) noexcept nogil:
    cdef Py_ssize_t size = 2 * ((<Py_ssize_t> 1) << n) * sizeof(double)
    w.n = n
    w.psi1 = <double*> malloc(size)
    w.psi2 = <double*> malloc(size)
    w.psi4 = <double*> malloc(size)
    w.psi5 = <double*> malloc(size)
    w.d2 = <double*> malloc(size)
    w.lam = <double*> malloc(size)
    w.g = <double*> malloc(size)
    if (w.psi1 == NULL or w.psi2 == NULL or w.psi4 == NULL or w.psi5 == NULL
            or w.d2 == NULL or w.lam == NULL or w.g == NULL):
        return -1
    return 0


cdef void work_free(Work* w) noexcept nogil:
    free(w.psi1); free(w.psi2); free(w.psi4); free(w.psi5)
    free(w.d2); free(w.lam); free(w.g)


cdef double forward(Work* w, const double* p, const double* sig, Py_ssize_t flip,
                    Py_ssize_t phase, int n_y) noexcept nogil:
    """Run the circuit for one configuration and return <psi|P|psi>.

    Leaves the intermediate states and P|psi> (in ``lam``) in the work buffers.
    """
    cdef int n = w.n
    cdef Py_ssize_t b, dim = (<Py_ssize_t> 1) << n
    cdef int L = 3 * n - 1
    cdef double norm = 1.0 / sqrt(<double> dim)
    cdef double acc = 0.0, xr, xi
    diag_vector(sig, p, p + n, n, w.psi1)
    for b in range(2 * dim):
        w.psi1[b] *= norm
        w.psi2[b] = w.psi1[b]
    x_block(w.psi2, n, p + 2 * n - 1, 1.0)
    for b in range(2 * dim):
        w.psi4[b] = w.psi2[b]
    h_wall(w.psi4, n)
    diag_vector(sig, p + L, p + L + n, n, w.d2)
    for b in range(dim):
        xr = w.psi4[2 * b]
        xi = w.psi4[2 * b + 1]
        w.psi4[2 * b] = xr * w.d2[2 * b] - xi * w.d2[2 * b + 1]
        w.psi4[2 * b + 1] = xr * w.d2[2 * b + 1] + xi * w.d2[2 * b]
    for b in range(2 * dim):
        w.psi5[b] = w.psi4[b]
    x_block(w.psi5, n, p + L + 2 * n - 1, 1.0)
    apply_pauli(w.psi5, w.lam, n, flip, phase, n_y)
    for b in range(2 * dim):
        acc += w.psi5[b] * w.lam[b]
    return acc


cdef void diag_grad(Work* w, const double* psi, const double* sig, double s2,
                    double* out_th, double* out_zz) noexcept nogil:
    cdef int n = w.n, j
    cdef Py_ssize_t b, dim = (<Py_ssize_t> 1) << n
    cdef double acc
    for b in range(dim):
        w.g[b] = w.lam[2 * b] * psi[2 * b + 1] - w.lam[2 * b + 1] * psi[2 * b]
    for j in range(n):
        acc = 0.0
        for b in range(dim):
            if (b >> j) & 1:
                acc -= w.g[b]
            else:
                acc += w.g[b]
        out_th[j] = -s2 * sig[j] * acc
    for j in range(n - 1):
        acc = 0.0
        for b in range(dim):
            if ((b >> j) ^ (b >> (j + 1))) & 1:
                acc -= w.g[b]
            else:
                acc += w.g[b]
        out_zz[j] = -s2 * sig[j] * sig[j + 1] * acc


cdef void backward(Work* w, const double* p, const double* sig, double* jac) noexcept nogil:
    cdef int n = w.n, j
    cdef Py_ssize_t b, dim = (<Py_ssize_t> 1) << n
    cdef int L = 3 * n - 1
    cdef double s2 = 2.0 * p[2 * L]
    cdef double lr, li
    for j in range(n):
        jac[L + 2 * n - 1 + j] = -s2 * flip_overlap_imag(w.lam, w.psi5, n, j)
    x_block(w.lam, n, p + L + 2 * n - 1, -1.0)
    diag_grad(w, w.psi4, sig, s2, jac + L, jac + L + n)
    for b in range(dim):
        lr = w.lam[2 * b]
        li = w.lam[2 * b + 1]
        w.lam[2 * b] = lr * w.d2[2 * b] + li * w.d2[2 * b + 1]
        w.lam[2 * b + 1] = li * w.d2[2 * b] - lr * w.d2[2 * b + 1]
    h_wall(w.lam, n)
    for j in range(n):
        jac[2 * n - 1 + j] = -s2 * flip_overlap_imag(w.lam, w.psi2, n, j)
    x_block(w.lam, n, p + 2 * n - 1, -1.0)
    diag_grad(w, w.psi1, sig, s2, jac, jac + n)


def _prepare(params, sigma):
    p = np.ascontiguousarray(params, dtype=np.float64)
    sg = np.ascontiguousarray(np.atleast_2d(sigma), dtype=np.float64)
    n = sg.shape[1]
    if n < 2:
        raise ValueError("circuit kernels need at least two sites")
    if p.shape[0] != 6 * n - 1:
        raise ValueError(f"expected {6 * n - 1} parameters for {n} sites, got {p.shape[0]}")
    return p, sg, n


def statevectors(params, sigma, int n):
    p, sg, n = _prepare(params, sigma)
    cdef double[::1] pv = p
    cdef double[:, ::1] sv = sg
    cdef Py_ssize_t i, b, dim = (<Py_ssize_t> 1) << n, nb = sg.shape[0]
    out = np.empty((nb, dim), dtype=np.complex128)
    cdef double[:, ::1] ov = out.view(np.float64)
    cdef Work w
    if work_alloc(&w, n) != 0:
        work_free(&w)
        raise MemoryError()
    try:
        for i in range(nb):
            forward(&w, &pv[0], &sv[i, 0], 0, 0, 0)
            for b in range(2 * dim):
                ov[i, b] = w.psi5[b]
    finally:
        work_free(&w)
    return out


def energies(params, sigma, Py_ssize_t flip, Py_ssize_t phase, int n_y):
    p, sg, n = _prepare(params, sigma)
    cdef double[::1] pv = p
    cdef double[:, ::1] sv = sg
    cdef Py_ssize_t i, nb = sg.shape[0]
    out = np.empty(nb)
    cdef double[::1] ov = out
    cdef Work w
    cdef double scale = pv[pv.shape[0] - 1]
    if work_alloc(&w, n) != 0:
        work_free(&w)
        raise MemoryError()
    try:
        with nogil:
            for i in range(nb):
                ov[i] = scale * forward(&w, &pv[0], &sv[i, 0], flip, phase, n_y)
    finally:
        work_free(&w)
    return out


def energies_and_jacobian(params, sigma, Py_ssize_t flip, Py_ssize_t phase, int n_y):
    p, sg, n = _prepare(params, sigma)
    cdef double[::1] pv = p
    cdef double[:, ::1] sv = sg
    cdef Py_ssize_t i, nb = sg.shape[0]
    cdef Py_ssize_t npar = pv.shape[0]
    out = np.empty(nb)
    jac = np.empty((nb, npar))
    cdef double[::1] ov = out
    cdef double[:, ::1] jv = jac
    cdef Work w
    cdef double e
    cdef double scale = pv[npar - 1]
    if work_alloc(&w, n) != 0:
        work_free(&w)
        raise MemoryError()
    try:
        with nogil:
            for i in range(nb):
                e = forward(&w, &pv[0], &sv[i, 0], flip, phase, n_y)
                ov[i] = scale * e
                jv[i, npar - 1] = e
                backward(&w, &pv[0], &sv[i, 0], &jv[i, 0])
    finally:
        work_free(&w)
    return out, jac
