"""Compiled inner loop for cap-piece evaluation.

Points are processed in blocks, cap by cap, so every inner loop runs over a
contiguous block of points and compiles to SIMD code.  No libm call is made
in those loops: sin and cos use a branch-free reduction by multiples of pi/2
and Taylor polynomials (error below 1e-16 on the reduced range), and the
shift to each tile uses

    sin(pi a (s - k)) = sin(pi a s) cos(pi a k) - cos(pi a s) sin(pi a k)

with the k-terms precomputed per tile.  Near u = s - k = 0 the factor
sin(x)/x is taken from its own series to avoid cancellation.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

BLOCK = 256
# Cody-Waite split of pi/2: m * _P1 and m * _P2 are exact for |m| < 2^20
_HALF_PI = math.pi / 2
_P1 = math.ldexp(math.floor(math.ldexp(_HALF_PI, 32)), -32)
_P2 = math.ldexp(math.floor(math.ldexp(_HALF_PI - _P1, 65)), -65)
_P3 = float(np.float64(_HALF_PI) - _P1 - _P2)
_REDUCE_LIMIT = 2.0 ** 20 * _HALF_PI
# reciprocal factorials 1/k!
_F3, _F4, _F5, _F6, _F7, _F8, _F9, _F10, _F11, _F12, _F13, _F14, _F15, _F16 = (
    1.0 / math.factorial(k) for k in range(3, 17))


@nb.njit(cache=True, nogil=True, inline="always", error_model="numpy")
def _sincos(x):
    """(sin x, cos x) for |x| < 2^19 pi with selects instead of branches or lookups."""
    m = math.floor(x * (1.0 / _HALF_PI) + 0.5)
    r = ((x - m * _P1) - m * _P2) - m * _P3
    r2 = r * r
    r4 = r2 * r2
    r8 = r4 * r4
    # pairs of Taylor terms evaluated independently (|r| <= pi/4, error below 1e-16)
    s = r * ((1.0 - r2 * _F3) + r4 * (_F5 - r2 * _F7)
             + r8 * ((_F9 - r2 * _F11) + r4 * (_F13 - r2 * _F15)))
    c = ((1.0 - r2 * 0.5) + r4 * (_F4 - r2 * _F6)
         + r8 * ((_F8 - r2 * _F10) + r4 * (_F12 - r2 * _F14))
         + r8 * r8 * _F16)
    q = m - 4.0 * math.floor(m * 0.25)        # quadrant 0..3
    odd = q == 1.0 or q == 3.0
    sv = c if odd else s
    cv = s if odd else c
    sv = -sv if q >= 2.0 else sv
    cv = -cv if q == 1.0 or q == 2.0 else cv
    return sv, cv


@nb.njit(cache=True, nogil=True, inline="always", error_model="numpy")
def _sinc2_small(x2):
    """(sin(x)/x)^2 from x^2, for |x| <= 1/4."""
    r = 1.0 + x2 * (-1.0 / 6 + x2 * (1.0 / 120 + x2 * (-1.0 / 5040 + x2 * (1.0 / 362880 + x2 * (
        -1.0 / 39916800)))))
    return r * r


@nb.njit(cache=True, nogil=True, inline="always", error_model="numpy")
def _even_pow(base, e):
    v = 1.0
    while e > 0:
        if e & 1:
            v *= base
        base *= base
        e >>= 1
    return v


@nb.njit(cache=True, nogil=True, inline="always", error_model="numpy")
def _sinc2(u, S, C, ck, sk, pia):
    """(sin(x)/x)^2 at x = pi a u, u = s - k, from sin/cos of pi a s and pi a k."""
    x = pia * u
    x2 = x * x
    sn = S * ck - C * sk
    big = (sn * sn) / x2
    small = _sinc2_small(x2)
    return big if x2 > 0.0625 else small


@nb.njit(cache=True, nogil=True, inline="always", error_model="numpy")
def _axis_factors(w, sj, Sj, Cj, kt, ck, sk, pia, half, sq, R, n):
    """w[p] *= g(s_j[p] - kt) up to the constant norm (g^2 when ``sq``)."""
    if half == 6:
        for p in range(n):
            u = sj[p] - kt
            r2 = _sinc2(u, Sj[p], Cj[p], ck, sk, pia)
            r4 = r2 * r2
            v = r4 * r4 * r4
            v = v * v if sq else v
            w[p] *= v if abs(u) <= R else 0.0
    else:
        for p in range(n):
            u = sj[p] - kt
            v = _even_pow(_sinc2(u, Sj[p], Cj[p], ck, sk, pia), half)
            v = v * v if sq else v
            w[p] *= v if abs(u) <= R else 0.0


@nb.njit(cache=True, nogil=True, error_model="numpy", fastmath={"contract"})
def cap_values_kernel(P, frames, lifted, inv, cap_ptr, kmin, kmax, tidx, tc, ts, coef,
                      pia, half, sq, normd, normj, R, ore, oim):
    d, N = P.shape
    C = frames.shape[0]
    width = 1
    for c in range(C):
        for j in range(d):
            width = max(width, kmax[c, j] - kmin[c, j] + 1)
    s = np.empty((d, BLOCK))
    S = np.empty((d, BLOCK))
    Co = np.empty((d, BLOCK))
    table = np.empty((d, width, BLOCK))
    ok = np.empty(BLOCK)
    w = np.empty(BLOCK)
    re = np.empty(BLOCK)
    im = np.empty(BLOCK)
    ph = np.empty(BLOCK)
    for b0 in range(0, N, BLOCK):
        n = min(BLOCK, N - b0)
        for c in range(C):
            # frame coordinates in tile units, and the points near this cap's tiles
            for p in range(n):
                ok[p] = 1.0
            for j in range(d):
                sj = s[j]
                for p in range(n):
                    sj[p] = 0.0
                for k in range(d):
                    f = frames[c, k, j] * inv[j]
                    Pk = P[k]
                    for p in range(n):
                        sj[p] += Pk[b0 + p] * f
                lo = kmin[c, j] - R
                hi = kmax[c, j] + R
                for p in range(n):
                    ok[p] = ok[p] if lo <= sj[p] <= hi else 0.0
            near = 0.0
            for p in range(n):
                near += ok[p]
            if near == 0.0:
                continue
            for j in range(d):
                sj = s[j]
                Sj = S[j]
                Cj = Co[j]
                for p in range(n):
                    Sj[p], Cj[p] = _sincos(pia * sj[p])
            for p in range(n):
                re[p] = 0.0
                im[p] = 0.0
            t0 = cap_ptr[c]
            t1 = cap_ptr[c + 1]
            span = 0
            for j in range(d):
                span += kmax[c, j] - kmin[c, j] + 1
            if (t1 - t0) * d <= span:
                # few tiles: one pass over the block per tile and axis
                for t in range(t0, t1):
                    for p in range(n):
                        w[p] = normd * ok[p]
                    for j in range(d):
                        _axis_factors(w, s[j], S[j], Co[j], float(tidx[t, j]), tc[t, j], ts[t, j],
                                      pia, half, sq, R, n)
                    cr = coef[t].real
                    ci = coef[t].imag
                    for p in range(n):
                        re[p] += cr * w[p]
                        im[p] += ci * w[p]
            else:
                # many tiles: tabulate each axis factor once per lattice index
                for j in range(d):
                    k0 = kmin[c, j]
                    for q in range(kmax[c, j] - k0 + 1):
                        row = table[j, q]
                        for p in range(n):
                            row[p] = normj * ok[p]
                        kq = k0 + q
                        a = pia * kq
                        _axis_factors(row, s[j], S[j], Co[j], float(kq), math.cos(a), math.sin(a),
                                      pia, half, sq, R, n)
                for t in range(t0, t1):
                    for p in range(n):
                        w[p] = 1.0
                    for j in range(d):
                        row = table[j, tidx[t, j] - kmin[c, j]]
                        for p in range(n):
                            w[p] *= row[p]
                    cr = coef[t].real
                    ci = coef[t].imag
                    for p in range(n):
                        re[p] += cr * w[p]
                        im[p] += ci * w[p]
            # modulation by exp(i x . lifted center)
            for p in range(n):
                ph[p] = 0.0
            for k in range(d):
                lk = lifted[c, k]
                Pk = P[k]
                for p in range(n):
                    ph[p] += Pk[b0 + p] * lk
            orc = ore[c]
            oic = oim[c]
            for p in range(n):
                sp, cp = _sincos(ph[p])
                orc[b0 + p] = re[p] * cp - im[p] * sp
                oic[b0 + p] = re[p] * sp + im[p] * cp
            for p in range(n):
                if abs(ph[p]) >= _REDUCE_LIMIT:
                    sp = math.sin(ph[p])
                    cp = math.cos(ph[p])
                    orc[b0 + p] = re[p] * cp - im[p] * sp
                    oic[b0 + p] = re[p] * sp + im[p] * cp
    return ore, oim


def cap_values(pts, frames, lifted, dims, cap_ptr, kmin, kmax, tidx, coef, profile, R, power=1):
    N, C = pts.shape[0], frames.shape[0]
    if N == 0 or C == 0:
        return np.zeros((N, C), dtype=np.complex128)
    d = dims.shape[0]
    pia = math.pi * float(profile.a)
    norm = float(profile.scale) * float(profile.a) / float(profile.beta0)
    normj = norm * norm if power == 2 else norm
    ore = np.zeros((C, N))
    oim = np.zeros((C, N))
    cap_values_kernel(np.ascontiguousarray(np.asarray(pts, dtype=np.float64).T), frames, lifted, 1.0 / dims,
                      cap_ptr, kmin, kmax, tidx, np.cos(pia * tidx), np.sin(pia * tidx), coef,
                      pia, int(profile.order) // 2, power == 2, normj ** d, normj, float(R), ore, oim)
    out = np.empty((N, C), dtype=np.complex128)
    out.real = ore.T
    out.imag = oim.T
    return out
