# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled q-Gaussian quadrature kernels.

Same algorithm as ``_kernel_py``: GK15 with a local acceptance test,
singularity subtraction at the probe point, doubling tail panels.
One depth-first interval stack per probe point.
"""
import numpy as np
from libc.math cimport exp, log1p, sqrt, fabs, atan, M_PI, INFINITY

cdef enum:
    MAXC = 3
    STACK = 256

cdef double XGK[8]
cdef double WGK[8]
cdef double WG[4]
XGK[:] = [0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
          0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
          0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
          0.207784955007898467600689403773245, 0.0]
WGK[:] = [0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
          0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
          0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
          0.204432940075298892414161999234649, 0.209482141084727828012999174891714]
WG[:] = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
         0.381830050505118944950369775488975, 0.417959183673469387755102040816327]

cdef double WINDOW = 40.0
cdef int MAX_DEPTH = 60
cdef int MAX_PANELS = 200
cdef double ABS_FLOOR = 1e-14
cdef double MOMENT_SPAN = 200.0
MOMENT_EDGE = 1e6


cdef inline void components(double x, double q, int nc, double* g) noexcept nogil:
    cdef double x2 = x * x, u, lg, h, phi
    if q == 1.0:
        h = exp(-x2)
        g[0] = h
        if nc > 1:
            g[1] = -2.0 * x * h
        if nc > 2:
            g[2] = 0.5 * h * x2 * x2
        return
    u = (q - 1.0) * x2
    if u <= -1.0:
        g[0] = 0.0
        if nc > 1:
            g[1] = 0.0
        if nc > 2:
            g[2] = 0.0
        return
    lg = log1p(u)
    h = exp(-lg / (q - 1.0))
    g[0] = h
    if nc > 1:
        g[1] = -2.0 * x * h / (1.0 + u)
    if nc > 2:
        if fabs(u) < 1e-3:
            phi = 0.5 + u * (-2.0 / 3.0 + u * (0.75 + u * (-0.8 + u * (5.0 / 6.0))))
        else:
            phi = (lg - u / (1.0 + u)) / (u * u)
        g[2] = h * x2 * x2 * phi


cdef struct Ctx:
    double xi
    double eta
    double q
    int nc
    int mode          # 0: subtracted Cauchy kernel, 1: plain Cauchy kernel, 2: no kernel
    int sel2          # mode 2 only: use component 2 as second output (moments)
    double g0[MAXC]


cdef inline void integrand(Ctx* c, double x, double* re, double* im) noexcept nogil:
    cdef double g[MAXC]
    cdef double dx, den, kr, ki
    cdef int k
    components(x, c.q, c.nc, g)
    if c.mode == 2:
        re[0] = g[0]
        im[0] = 0.0
        if c.sel2:
            re[1] = g[2]
            im[1] = 0.0
        return
    dx = x - c.xi
    den = dx * dx + c.eta * c.eta
    kr = dx / den
    ki = c.eta / den
    for k in range(c.nc):
        if c.mode == 0:
            g[k] -= c.g0[k]
        re[k] = g[k] * kr
        im[k] = g[k] * ki


cdef inline void gk15(Ctx* c, int nout, double a, double b,
                      double* kre, double* kim, double* err) noexcept nogil:
    cdef double half = 0.5 * (b - a), mid = 0.5 * (a + b)
    cdef double gre[MAXC]
    cdef double gim[MAXC]
    cdef double re1[MAXC]
    cdef double im1[MAXC]
    cdef double re2[MAXC]
    cdef double im2[MAXC]
    cdef int j, k
    cdef double dr, di
    for k in range(nout):
        kre[k] = 0.0
        kim[k] = 0.0
        gre[k] = 0.0
        gim[k] = 0.0
    integrand(c, mid, re1, im1)
    for k in range(nout):
        kre[k] = WGK[7] * re1[k]
        kim[k] = WGK[7] * im1[k]
        gre[k] = WG[3] * re1[k]
        gim[k] = WG[3] * im1[k]
    for j in range(7):
        integrand(c, mid - half * XGK[j], re1, im1)
        integrand(c, mid + half * XGK[j], re2, im2)
        for k in range(nout):
            kre[k] += WGK[j] * (re1[k] + re2[k])
            kim[k] += WGK[j] * (im1[k] + im2[k])
            if j & 1:
                gre[k] += WG[j >> 1] * (re1[k] + re2[k])
                gim[k] += WG[j >> 1] * (im1[k] + im2[k])
    for k in range(nout):
        kre[k] *= half
        kim[k] *= half
        dr = kre[k] - gre[k] * half
        di = kim[k] - gim[k] * half
        err[k] = sqrt(dr * dr + di * di)


cdef int adaptive(Ctx* c, int nout, double* a0, double* b0, int ninit, double ref_len,
                  double* tol, double* tre, double* tim, double* terr) noexcept nogil:
    """Depth-first local-error refinement; returns 1 if the depth cap forced acceptance."""
    cdef double sa[STACK]
    cdef double sb[STACK]
    cdef int sd[STACK]
    cdef int top = 0, i, k, d, good, forced = 0
    cdef double a, b, scale
    cdef double kre[MAXC]
    cdef double kim[MAXC]
    cdef double err[MAXC]
    for i in range(ninit - 1, -1, -1):
        sa[top] = a0[i]
        sb[top] = b0[i]
        sd[top] = 0
        top += 1
    while top > 0:
        top -= 1
        a = sa[top]
        b = sb[top]
        d = sd[top]
        gk15(c, nout, a, b, kre, kim, err)
        scale = sqrt((b - a) / ref_len)
        good = 1
        for k in range(nout):
            if err[k] > tol[k] * scale:
                good = 0
                break
        if good or d >= MAX_DEPTH or top + 2 > STACK:
            if not good:
                forced = 1
            for k in range(nout):
                tre[k] += kre[k]
                tim[k] += kim[k]
                terr[k] += err[k]
        else:
            sa[top] = 0.5 * (a + b)
            sb[top] = b
            sd[top] = d + 1
            top += 1
            sa[top] = a
            sb[top] = 0.5 * (a + b)
            sd[top] = d + 1
            top += 1
    return forced


cdef int tails(Ctx* c, int nout, double start, double width, int direction, double tail_tol,
               double max_edge, double* tol, double* tre, double* tim, double* terr,
               int* forced) noexcept nogil:
    """Doubling panels away from ``start``.

    Returns 0 when the increment test passed, 1 if the panel cap was hit,
    3 when ``|edge|`` reached ``max_edge`` first.
    """
    cdef double edge = start, w = width, a, b
    cdef double pre[MAXC]
    cdef double pim[MAXC]
    cdef int p, k, done
    for p in range(MAX_PANELS):
        for k in range(nout):
            pre[k] = 0.0
            pim[k] = 0.0
        if fabs(edge) + w > max_edge:
            w = max_edge - fabs(edge)
        if direction > 0:
            a = edge
            b = edge + w
        else:
            a = edge - w
            b = edge
        if adaptive(c, nout, &a, &b, 1, w, tol, pre, pim, terr):
            forced[0] = 1
        done = 1
        for k in range(nout):
            tre[k] += pre[k]
            tim[k] += pim[k]
            if sqrt(pre[k] * pre[k] + pim[k] * pim[k]) > tail_tol * sqrt(tre[k] * tre[k] + tim[k] * tim[k]):
                done = 0
        if done:
            return 0
        edge += direction * w
        w *= 2.0
        if fabs(edge) >= max_edge:
            return 3
    return 1


cdef int one_point(double xi, double eta, double q, int nc, double rel_tol, double tail_tol,
                   double* tre, double* tim, double* achieved) noexcept nogil:
    cdef Ctx c
    cdef double a0[3]
    cdef double b0[3]
    cdef double kre[MAXC]
    cdef double kim[MAXC]
    cdef double err[MAXC]
    cdef double sre[MAXC]
    cdef double sim[MAXC]
    cdef double tol[MAXC]
    cdef double terr[MAXC]
    cdef double hw = fabs(xi) + WINDOW, lt, m1, m2, mag, r
    cdef int nint = 0, i, k, forced = 0, status = 0
    c.xi = xi
    c.eta = eta
    c.q = q
    c.nc = nc
    c.mode = 0
    c.sel2 = 0
    components(xi, q, nc, c.g0)
    m1 = xi if xi < 0.0 else 0.0
    m2 = xi if xi > 0.0 else 0.0
    if m1 > xi - hw:
        a0[nint] = xi - hw
        b0[nint] = m1
        nint += 1
    if m2 > m1:
        a0[nint] = m1
        b0[nint] = m2
        nint += 1
    if xi + hw > m2:
        a0[nint] = m2
        b0[nint] = xi + hw
        nint += 1
    lt = M_PI - 2.0 * atan(eta / hw)
    for k in range(nc):
        tre[k] = 0.0
        tim[k] = c.g0[k] * lt
        terr[k] = 0.0
    # scale from one unrefined pass
    for k in range(nc):
        sre[k] = 0.0
        sim[k] = c.g0[k] * lt
    for i in range(nint):
        gk15(&c, nc, a0[i], b0[i], kre, kim, err)
        for k in range(nc):
            sre[k] += kre[k]
            sim[k] += kim[k]
    for k in range(nc):
        mag = sqrt(sre[k] * sre[k] + sim[k] * sim[k])
        tol[k] = rel_tol * (mag if mag > ABS_FLOOR else ABS_FLOOR)
    forced = adaptive(&c, nc, a0, b0, nint, 2.0 * hw, tol, tre, tim, terr)
    c.mode = 1
    if tails(&c, nc, xi + hw, hw, 1, tail_tol, INFINITY, tol, tre, tim, terr, &forced):
        status = 2
    if tails(&c, nc, xi - hw, hw, -1, tail_tol, INFINITY, tol, tre, tim, terr, &forced):
        status = 2
    if status == 0 and forced:
        status = 1
    achieved[0] = 0.0
    for k in range(nc):
        mag = sqrt(tre[k] * tre[k] + tim[k] * tim[k])
        r = terr[k] / (mag if mag > ABS_FLOOR else ABS_FLOOR)
        if r > achieved[0]:
            achieved[0] = r
    return status


def cauchy_transform(xi, double eta, double q, int ncomp=1, double rel_tol=1e-8,
                     double tail_tol=1e-10):
    """Integrals ``int g(x) / (x - xi - i*eta) dx`` for g in (h, h_x, h_q)."""
    cdef double[::1] xs = np.ascontiguousarray(np.atleast_1d(xi), dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0], i
    cdef int k
    out_re = np.empty((ncomp, n))
    out_im = np.empty((ncomp, n))
    status = np.empty(n, dtype=np.int64)
    achieved = np.empty(n)
    cdef double[:, ::1] ore = out_re
    cdef double[:, ::1] oim = out_im
    cdef long long[::1] ost = status
    cdef double[::1] oach = achieved
    cdef double tre[MAXC]
    cdef double tim[MAXC]
    if ncomp < 1 or ncomp > MAXC:
        raise ValueError("ncomp must be 1, 2 or 3")
    with nogil:
        for i in range(n):
            ost[i] = one_point(xs[i], eta, q, ncomp, rel_tol, tail_tol, tre, tim, &oach[i])
            for k in range(ncomp):
                ore[k, i] = tre[k]
                oim[k, i] = tim[k]
    return out_re + 1j * out_im, status, achieved


def qgauss_moments(double q, double rel_tol=1e-10, double tail_tol=1e-12,
                   double max_edge=MOMENT_EDGE):
    """Return ``(I, dI/dq, status)`` with ``I = int h(x; q) dx``.

    Status 3 means the panels stopped at ``|x| = max_edge`` before the
    increment test passed; the caller adds the analytic remainder.
    """
    cdef Ctx c
    cdef double a0[2]
    cdef double b0[2]
    cdef double kre[2]
    cdef double kim[2]
    cdef double err[2]
    cdef double tol[2]
    cdef double tre[2]
    cdef double tim[2]
    cdef double terr[2]
    cdef int i, k, forced = 0, status = 0, right, left
    c.xi = 0.0
    c.eta = 0.0
    c.q = q
    c.nc = 3
    c.mode = 2
    c.sel2 = 1
    a0[0] = -MOMENT_SPAN
    b0[0] = 0.0
    a0[1] = 0.0
    b0[1] = MOMENT_SPAN
    cdef double sre[2]
    for k in range(2):
        tre[k] = 0.0
        tim[k] = 0.0
        terr[k] = 0.0
        sre[k] = 0.0
    for i in range(2):
        gk15(&c, 2, a0[i], b0[i], kre, kim, err)
        for k in range(2):
            sre[k] += kre[k]
    for k in range(2):
        tol[k] = rel_tol * (fabs(sre[k]) if fabs(sre[k]) > ABS_FLOOR else ABS_FLOOR)
    forced = adaptive(&c, 2, a0, b0, 2, 2.0 * MOMENT_SPAN, tol, tre, tim, terr)
    right = tails(&c, 2, MOMENT_SPAN, MOMENT_SPAN, 1, tail_tol, max_edge, tol, tre, tim, terr, &forced)
    left = tails(&c, 2, -MOMENT_SPAN, MOMENT_SPAN, -1, tail_tol, max_edge, tol, tre, tim, terr, &forced)
    if right == 1 or left == 1:
        status = 2
    elif forced:
        status = 1
    elif right == 3 or left == 3:
        status = 3
    return tre[0], tre[1], status
