# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled numerical kernel (twin of ``_kernel_py``).

This module mirrors ``_kernel_py.py`` statement for statement; both twins
perform the same floating-point operations in the same order (the build
disables FP contraction), so results are bit-identical.  Keep them in
lockstep when editing either one.
"""

from libc.math cimport log, sqrt
from libc.stdlib cimport free, malloc

# Layout constants; must match _layout.py (the backend-equivalence tests
# would catch any drift).
DEF DEV_LAM = 0
DEF DEV_C = 1
DEF DEV_Z = 2
DEF DEV_FMD = 3
DEF DEV_EPSL = 4
DEF DEV_EPSTX = 5
DEF DEV_DMAX = 6
DEF DEV_EMAX = 7
DEF DEV_PMAX = 8
DEF DEV_THD = 9
DEF DEV_THE = 10
DEF DEV_THP = 11
DEF DEV_R = 12
DEF DEV_S2 = 13

DEF STATUS_OK = 0
DEF STATUS_SATURATED = 1
DEF SOLVE_OK = 0
DEF SOLVE_INFEASIBLE = 1
DEF SOLVE_NO_CONVERGENCE = 2

DEF PHASE1_EXIT = 1e-6
DEF PHASE1_GAP = 1e-6
DEF ROOM_MIN = 1e-9


cdef int _costs(int n, const double *dev, const double *kinds,
                const double *f_osp, const double *wired,
                const double *prices, const double *load_oth,
                const double *x, double *out3) nogil:
    cdef double lam = dev[DEV_LAM]
    cdef double c = dev[DEV_C]
    cdef double z = dev[DEV_Z]
    cdef double fmd = dev[DEV_FMD]
    cdef double el = dev[DEV_EPSL]
    cdef double etx = dev[DEV_EPSTX]
    cdef double r = dev[DEV_R]
    cdef double s2 = dev[DEV_S2]
    cdef double lc = lam * c
    cdef double s = 0.0
    cdef double util3, util4, a_den, dloc, dtx, d, e, p, g_j
    cdef int j

    for j in range(n):
        s += x[j]
    util3 = (1.0 - s) * lc / fmd
    if util3 >= 1.0:
        return 0
    util4 = lam * z * s / r
    if util4 >= 1.0:
        return 0

    a_den = fmd - (1.0 - s) * lc
    dloc = c / a_den
    dtx = lam * s2 * s / (2.0 * (1.0 - util4)) + z / r
    d = (1.0 - s) * dloc + s * dtx
    e = (1.0 - s) * el * dloc + s * etx * dtx
    p = 0.0
    for j in range(n):
        if kinds[j] != 0.0:
            if x[j] != 0.0:
                g_j = f_osp[j] - (load_oth[j] + x[j] * lc)
                if g_j <= 0.0:
                    return 0
                d += x[j] * (wired[j] + c / g_j)
        else:
            d += x[j] * (wired[j] + c / f_osp[j])
        p += x[j] * prices[j]
    p *= lc
    out3[0] = d
    out3[1] = e
    out3[2] = p
    return 1


def eval_costs(double[::1] dev, double[::1] kinds, double[::1] f_osp,
               double[::1] wired, double[::1] prices, double[::1] load_oth,
               double[::1] alpha, double[::1] out):
    """out = [delay, energy, payment, disutility]."""
    cdef int n = alpha.shape[0]
    cdef double out3[3]
    if not _costs(n, &dev[0], &kinds[0], &f_osp[0], &wired[0], &prices[0],
                  &load_oth[0], &alpha[0], out3):
        return STATUS_SATURATED
    out[0] = out3[0]
    out[1] = out3[1]
    out[2] = out3[2]
    out[3] = (dev[DEV_THD] * out3[0] / dev[DEV_DMAX]
              + dev[DEV_THE] * out3[1] / dev[DEV_EMAX]
              + dev[DEV_THP] * out3[2] / dev[DEV_PMAX])
    return STATUS_OK


def eval_grad(double[::1] dev, double[::1] kinds, double[::1] f_osp,
              double[::1] wired, double[::1] prices, double[::1] load_oth,
              double[::1] alpha, double[::1] out):
    """Analytic gradient of the disutility with respect to the own row."""
    cdef int n = alpha.shape[0]
    cdef double lam = dev[DEV_LAM]
    cdef double c = dev[DEV_C]
    cdef double z = dev[DEV_Z]
    cdef double fmd = dev[DEV_FMD]
    cdef double el = dev[DEV_EPSL]
    cdef double etx = dev[DEV_EPSTX]
    cdef double dmax = dev[DEV_DMAX]
    cdef double emax = dev[DEV_EMAX]
    cdef double pmax = dev[DEV_PMAX]
    cdef double thd = dev[DEV_THD]
    cdef double the = dev[DEV_THE]
    cdef double thp = dev[DEV_THP]
    cdef double r = dev[DEV_R]
    cdef double s2 = dev[DEV_S2]
    cdef double lc = lam * c
    cdef double s = 0.0
    cdef double util3, util4, a_den, dloc, w_den, dtx, t1, t2, g_e, g_j, g_d
    cdef int j

    for j in range(n):
        s += alpha[j]
    util3 = (1.0 - s) * lc / fmd
    if util3 >= 1.0:
        return STATUS_SATURATED
    util4 = lam * z * s / r
    if util4 >= 1.0:
        return STATUS_SATURATED

    a_den = fmd - (1.0 - s) * lc
    dloc = c / a_den
    w_den = 1.0 - util4
    dtx = lam * s2 * s / (2.0 * w_den) + z / r
    t1 = -dloc - (1.0 - s) * lc * c / (a_den * a_den)
    t2 = dtx + s * lam * s2 / (2.0 * w_den * w_den)
    g_e = el * t1 + etx * t2
    for j in range(n):
        if kinds[j] != 0.0:
            g_j = f_osp[j] - (load_oth[j] + alpha[j] * lc)
            if g_j <= 0.0:
                return STATUS_SATURATED
            g_d = t1 + t2 + wired[j] + c / g_j + alpha[j] * lc * c / (g_j * g_j)
        else:
            g_d = t1 + t2 + wired[j] + c / f_osp[j]
        out[j] = (thd * g_d / dmax + the * g_e / emax
                  + thp * lc * prices[j] / pmax)
    return STATUS_OK


def eval_curv(double[::1] dev, double[::1] kinds, double[::1] f_osp,
              double[::1] load_oth, double[::1] alpha, double[::1] out2,
              double[::1] out_psi):
    """Curvature terms: out2 = [gamma, upsilon], out_psi per column (0 cloud)."""
    cdef int n = alpha.shape[0]
    cdef double lam = dev[DEV_LAM]
    cdef double c = dev[DEV_C]
    cdef double z = dev[DEV_Z]
    cdef double fmd = dev[DEV_FMD]
    cdef double r = dev[DEV_R]
    cdef double s2 = dev[DEV_S2]
    cdef double lc = lam * c
    cdef double s = 0.0
    cdef double util3, util4, a_den, w_den, g_j
    cdef int j

    for j in range(n):
        s += alpha[j]
    util3 = (1.0 - s) * lc / fmd
    if util3 >= 1.0:
        return STATUS_SATURATED
    util4 = lam * z * s / r
    if util4 >= 1.0:
        return STATUS_SATURATED

    a_den = fmd - (1.0 - s) * lc
    w_den = 1.0 - util4
    out2[0] = (2.0 * lc * c / (a_den * a_den)
               + (1.0 - s) * 2.0 * lc * lc * c / (a_den * a_den * a_den))
    out2[1] = (lam * s2 / (w_den * w_den)
               + s * lam * lam * s2 * z / (r * w_den * w_den * w_den))
    for j in range(n):
        if kinds[j] != 0.0:
            g_j = f_osp[j] - (load_oth[j] + alpha[j] * lc)
            if g_j <= 0.0:
                return STATUS_SATURATED
            out_psi[j] = (2.0 * lc * c / (g_j * g_j)
                          + alpha[j] * 2.0 * lc * lc * c / (g_j * g_j * g_j))
        else:
            out_psi[j] = 0.0
    return STATUS_OK


def eval_hess(double[::1] dev, double[::1] kinds, double[::1] f_osp,
              double[::1] load_oth, double[::1] alpha, double[::1] out_h):
    """Row-major n*n Hessian of the disutility in the own row."""
    cdef int n = alpha.shape[0]
    cdef double out2[2]
    cdef double *psi = <double *> malloc(n * sizeof(double))
    cdef double dmax, emax, thd, the, el, etx, base, h
    cdef double out2v0, out2v1
    cdef int j, k, status
    if psi == NULL:
        raise MemoryError()
    try:
        # mirror of eval_curv on raw pointers
        status = _curv_raw(n, &dev[0], &kinds[0], &f_osp[0], &load_oth[0],
                           &alpha[0], out2, psi)
        if status != STATUS_OK:
            return status
        dmax = dev[DEV_DMAX]
        emax = dev[DEV_EMAX]
        thd = dev[DEV_THD]
        the = dev[DEV_THE]
        el = dev[DEV_EPSL]
        etx = dev[DEV_EPSTX]
        base = (thd / dmax + the * el / emax) * out2[0] \
            + (thd / dmax + the * etx / emax) * out2[1]
        for j in range(n):
            for k in range(n):
                h = base
                if j == k and kinds[j] != 0.0:
                    h += thd * psi[j] / dmax
                out_h[j * n + k] = h
        return STATUS_OK
    finally:
        free(psi)


cdef int _curv_raw(int n, const double *dev, const double *kinds,
                   const double *f_osp, const double *load_oth,
                   const double *alpha, double *out2, double *out_psi) nogil:
    cdef double lam = dev[DEV_LAM]
    cdef double c = dev[DEV_C]
    cdef double z = dev[DEV_Z]
    cdef double fmd = dev[DEV_FMD]
    cdef double r = dev[DEV_R]
    cdef double s2 = dev[DEV_S2]
    cdef double lc = lam * c
    cdef double s = 0.0
    cdef double util3, util4, a_den, w_den, g_j
    cdef int j

    for j in range(n):
        s += alpha[j]
    util3 = (1.0 - s) * lc / fmd
    if util3 >= 1.0:
        return STATUS_SATURATED
    util4 = lam * z * s / r
    if util4 >= 1.0:
        return STATUS_SATURATED

    a_den = fmd - (1.0 - s) * lc
    w_den = 1.0 - util4
    out2[0] = (2.0 * lc * c / (a_den * a_den)
               + (1.0 - s) * 2.0 * lc * lc * c / (a_den * a_den * a_den))
    out2[1] = (lam * s2 / (w_den * w_den)
               + s * lam * lam * s2 * z / (r * w_den * w_den * w_den))
    for j in range(n):
        if kinds[j] != 0.0:
            g_j = f_osp[j] - (load_oth[j] + alpha[j] * lc)
            if g_j <= 0.0:
                return STATUS_SATURATED
            out_psi[j] = (2.0 * lc * c / (g_j * g_j)
                          + alpha[j] * 2.0 * lc * lc * c / (g_j * g_j * g_j))
        else:
            out_psi[j] = 0.0
    return STATUS_OK


cdef int _chol_solve(int n, const double *hess, const double *grad, double *d,
                     double *lfac, double ridge) nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(n):
        for j in range(i + 1):
            acc = hess[i * n + j]
            if i == j:
                acc += ridge
            for k in range(j):
                acc -= lfac[i * n + k] * lfac[j * n + k]
            if i == j:
                if acc <= 0.0:
                    return 0
                lfac[i * n + i] = sqrt(acc)
            else:
                lfac[i * n + j] = acc / lfac[j * n + j]
    for i in range(n):
        acc = -grad[i]
        for k in range(i):
            acc -= lfac[i * n + k] * d[k]
        d[i] = acc / lfac[i * n + i]
    i = n - 1
    while i >= 0:
        acc = d[i]
        for k in range(i + 1, n):
            acc -= lfac[k * n + i] * d[k]
        d[i] = acc / lfac[i * n + i]
        i -= 1
    return 1


cdef int _chol_solve_ridge(int n, const double *hess, const double *grad,
                           double *d, double *lfac) nogil:
    cdef double tr = 0.0
    cdef double base, ridge
    cdef int j, attempt
    for j in range(n):
        tr += hess[j * n + j]
    base = 1e-14 * (1.0 + tr / n)
    ridge = 0.0
    for attempt in range(16):
        if _chol_solve(n, hess, grad, d, lfac, ridge):
            return 1
        if ridge == 0.0:
            ridge = base
        else:
            ridge *= 100.0
    return 0


cdef int _eval2(int n, const double *dev, const double *kinds,
                const double *f_osp, const double *wired,
                const double *prices, const double *load_oth,
                const double *x, double t, double tau, const double *beta,
                double stab_cap, int want, double *grad, double *hess,
                double *g_d, double *scr, double *info) nogil:
    cdef double lam = dev[DEV_LAM]
    cdef double c = dev[DEV_C]
    cdef double z = dev[DEV_Z]
    cdef double fmd = dev[DEV_FMD]
    cdef double el = dev[DEV_EPSL]
    cdef double etx = dev[DEV_EPSTX]
    cdef double dmax = dev[DEV_DMAX]
    cdef double emax = dev[DEV_EMAX]
    cdef double pmax = dev[DEV_PMAX]
    cdef double thd = dev[DEV_THD]
    cdef double the = dev[DEV_THE]
    cdef double thp = dev[DEV_THP]
    cdef double r = dev[DEV_R]
    cdef double s2 = dev[DEV_S2]
    cdef double lc = lam * c
    cdef double kw = lam * z / r
    cdef double s = 0.0
    cdef double m3, m4, m5_j, m6, m7, m8
    cdef double a_den, dloc, w_den, dtx, d_val, e_val, p_val, u_val, f_obj
    cdef double diff, lnsum, t1, t2, g_e, gam, ups, c_ones, g_u, val
    cdef double gnorm2, k_gam, k_ups, c_j, v6_j, v8_j, v6_k, v8_k, diag
    cdef double g_j, psi_j
    cdef int j, k

    for j in range(n):
        if x[j] <= 0.0 or x[j] >= 1.0:
            return 0
        s += x[j]
    if s >= 1.0:
        return 0
    m3 = stab_cap - (1.0 - s) * lc / fmd
    if m3 <= 0.0:
        return 0
    m4 = stab_cap - kw * s
    if m4 <= 0.0:
        return 0
    for j in range(n):
        if kinds[j] != 0.0:
            m5_j = stab_cap - (load_oth[j] + x[j] * lc) / f_osp[j]
            if m5_j <= 0.0:
                return 0
            scr[j] = f_osp[j] - (load_oth[j] + x[j] * lc)
            scr[2 * n + j] = m5_j
        else:
            scr[j] = 0.0
            scr[2 * n + j] = 0.0

    a_den = fmd - (1.0 - s) * lc
    dloc = c / a_den
    w_den = 1.0 - kw * s
    dtx = lam * s2 * s / (2.0 * w_den) + z / r
    d_val = (1.0 - s) * dloc + s * dtx
    e_val = (1.0 - s) * el * dloc + s * etx * dtx
    p_val = 0.0
    for j in range(n):
        if kinds[j] != 0.0:
            scr[n + j] = c / scr[j]
        else:
            scr[n + j] = c / f_osp[j]
        d_val += x[j] * (wired[j] + scr[n + j])
        p_val += x[j] * prices[j]
    p_val *= lc

    m6 = 1.0 - d_val / dmax
    if m6 <= 0.0:
        return 0
    m7 = 1.0 - e_val / emax
    if m7 <= 0.0:
        return 0
    m8 = 1.0 - p_val / pmax
    if m8 <= 0.0:
        return 0

    u_val = thd * d_val / dmax + the * e_val / emax + thp * p_val / pmax
    f_obj = u_val
    for j in range(n):
        diff = x[j] - beta[j]
        f_obj += 0.5 * tau * diff * diff

    lnsum = 0.0
    for j in range(n):
        lnsum += log(x[j])
        lnsum += log(1.0 - x[j])
    lnsum += log(1.0 - s)
    lnsum += log(m3)
    lnsum += log(m4)
    for j in range(n):
        if kinds[j] != 0.0:
            lnsum += log(scr[2 * n + j])
    lnsum += log(m6)
    lnsum += log(m7)
    lnsum += log(m8)
    info[0] = t * f_obj - lnsum
    if want == 0:
        return 1

    t1 = -dloc - (1.0 - s) * lc * c / (a_den * a_den)
    t2 = dtx + s * lam * s2 / (2.0 * w_den * w_den)
    g_e = el * t1 + etx * t2
    gam = (2.0 * lc * c / (a_den * a_den)
           + (1.0 - s) * 2.0 * lc * lc * c / (a_den * a_den * a_den))
    ups = (lam * s2 / (w_den * w_den)
           + s * lam * lam * s2 * z / (r * w_den * w_den * w_den))

    c_ones = 1.0 / (1.0 - s) - (lc / fmd) / m3 + kw / m4 + (g_e / emax) / m7
    for j in range(n):
        if kinds[j] != 0.0:
            g_j = scr[j]
            g_d[j] = t1 + t2 + wired[j] + scr[n + j] + x[j] * lc * c / (g_j * g_j)
        else:
            g_d[j] = t1 + t2 + wired[j] + scr[n + j]
    gnorm2 = 0.0
    for j in range(n):
        g_u = thd * g_d[j] / dmax + the * g_e / emax + thp * lc * prices[j] / pmax
        val = t * (g_u + tau * (x[j] - beta[j]))
        val += -1.0 / x[j] + 1.0 / (1.0 - x[j]) + c_ones
        if kinds[j] != 0.0:
            val += (lc / f_osp[j]) / scr[2 * n + j]
        val += (g_d[j] / dmax) / m6
        val += (lc * prices[j] / pmax) / m8
        grad[j] = val
        gnorm2 += val * val
    info[1] = sqrt(gnorm2)

    k_gam = thd / dmax + the * el / emax
    k_ups = thd / dmax + the * etx / emax
    c_j = (t * (k_gam * gam + k_ups * ups)
           + 1.0 / ((1.0 - s) * (1.0 - s))
           + (lc / fmd) * (lc / fmd) / (m3 * m3)
           + kw * kw / (m4 * m4)
           + (g_e / emax) * (g_e / emax) / (m7 * m7)
           + (gam + ups) / dmax / m6
           + (el * gam + etx * ups) / emax / m7)
    for j in range(n):
        v6_j = (g_d[j] / dmax) / m6
        v8_j = (lc * prices[j] / pmax) / m8
        for k in range(n):
            v6_k = (g_d[k] / dmax) / m6
            v8_k = (lc * prices[k] / pmax) / m8
            hess[j * n + k] = c_j + v6_j * v6_k + v8_j * v8_k
        diag = t * tau + 1.0 / (x[j] * x[j]) \
            + 1.0 / ((1.0 - x[j]) * (1.0 - x[j]))
        if kinds[j] != 0.0:
            g_j = scr[j]
            psi_j = (2.0 * lc * c / (g_j * g_j)
                     + x[j] * 2.0 * lc * lc * c / (g_j * g_j * g_j))
            m5_j = scr[2 * n + j]
            diag += t * thd * psi_j / dmax
            diag += (lc / f_osp[j]) * (lc / f_osp[j]) / (m5_j * m5_j)
            diag += psi_j / dmax / m6
        hess[j * n + j] += diag
    return 1


cdef int _eval1(int n, const double *dev, const double *kinds,
                const double *f_osp, const double *wired,
                const double *prices, const double *load_oth,
                const double *y, double t, double stab_cap, int want,
                double *grad, double *hess, double *g_d, double *scr,
                double *info) nogil:
    cdef double lam = dev[DEV_LAM]
    cdef double c = dev[DEV_C]
    cdef double z = dev[DEV_Z]
    cdef double fmd = dev[DEV_FMD]
    cdef double el = dev[DEV_EPSL]
    cdef double etx = dev[DEV_EPSTX]
    cdef double dmax = dev[DEV_DMAX]
    cdef double emax = dev[DEV_EMAX]
    cdef double pmax = dev[DEV_PMAX]
    cdef double r = dev[DEV_R]
    cdef double s2 = dev[DEV_S2]
    cdef double lc = lam * c
    cdef double kw = lam * z / r
    cdef double m_var = y[n]
    cdef double s = 0.0
    cdef double m3, m4, m5_j, m6, m7, m8
    cdef double a_den, dloc, w_den, dtx, d_val, e_val, p_val
    cdef double cap_d, cap_e, cap_p, capmax
    cdef double lnsum, t1, t2, g_e, gam, ups, c_ones, val, g_m
    cdef double gnorm2, c_j, v6_j, v8_j, v6_k, v8_k, diag, cross
    cdef double g_j, psi_j
    cdef int j, k, dim

    for j in range(n):
        if y[j] <= 0.0 or y[j] >= 1.0:
            return 0
        s += y[j]
    if s >= 1.0:
        return 0
    m3 = stab_cap - (1.0 - s) * lc / fmd
    if m3 <= 0.0:
        return 0
    m4 = stab_cap - kw * s
    if m4 <= 0.0:
        return 0
    for j in range(n):
        if kinds[j] != 0.0:
            m5_j = stab_cap - (load_oth[j] + y[j] * lc) / f_osp[j]
            if m5_j <= 0.0:
                return 0
            scr[j] = f_osp[j] - (load_oth[j] + y[j] * lc)
            scr[2 * n + j] = m5_j
        else:
            scr[j] = 0.0
            scr[2 * n + j] = 0.0

    a_den = fmd - (1.0 - s) * lc
    dloc = c / a_den
    w_den = 1.0 - kw * s
    dtx = lam * s2 * s / (2.0 * w_den) + z / r
    d_val = (1.0 - s) * dloc + s * dtx
    e_val = (1.0 - s) * el * dloc + s * etx * dtx
    p_val = 0.0
    for j in range(n):
        if kinds[j] != 0.0:
            scr[n + j] = c / scr[j]
        else:
            scr[n + j] = c / f_osp[j]
        d_val += y[j] * (wired[j] + scr[n + j])
        p_val += y[j] * prices[j]
    p_val *= lc

    cap_d = d_val / dmax - 1.0
    cap_e = e_val / emax - 1.0
    cap_p = p_val / pmax - 1.0
    capmax = cap_d
    if cap_e > capmax:
        capmax = cap_e
    if cap_p > capmax:
        capmax = cap_p
    info[2] = capmax

    m6 = m_var - cap_d
    if m6 <= 0.0:
        return 0
    m7 = m_var - cap_e
    if m7 <= 0.0:
        return 0
    m8 = m_var - cap_p
    if m8 <= 0.0:
        return 0

    lnsum = 0.0
    for j in range(n):
        lnsum += log(y[j])
        lnsum += log(1.0 - y[j])
    lnsum += log(1.0 - s)
    lnsum += log(m3)
    lnsum += log(m4)
    for j in range(n):
        if kinds[j] != 0.0:
            lnsum += log(scr[2 * n + j])
    lnsum += log(m6)
    lnsum += log(m7)
    lnsum += log(m8)
    info[0] = t * m_var - lnsum
    if want == 0:
        return 1

    t1 = -dloc - (1.0 - s) * lc * c / (a_den * a_den)
    t2 = dtx + s * lam * s2 / (2.0 * w_den * w_den)
    g_e = el * t1 + etx * t2
    gam = (2.0 * lc * c / (a_den * a_den)
           + (1.0 - s) * 2.0 * lc * lc * c / (a_den * a_den * a_den))
    ups = (lam * s2 / (w_den * w_den)
           + s * lam * lam * s2 * z / (r * w_den * w_den * w_den))

    c_ones = 1.0 / (1.0 - s) - (lc / fmd) / m3 + kw / m4 + (g_e / emax) / m7
    for j in range(n):
        if kinds[j] != 0.0:
            g_j = scr[j]
            g_d[j] = t1 + t2 + wired[j] + scr[n + j] + y[j] * lc * c / (g_j * g_j)
        else:
            g_d[j] = t1 + t2 + wired[j] + scr[n + j]
    gnorm2 = 0.0
    for j in range(n):
        val = -1.0 / y[j] + 1.0 / (1.0 - y[j]) + c_ones
        if kinds[j] != 0.0:
            val += (lc / f_osp[j]) / scr[2 * n + j]
        val += (g_d[j] / dmax) / m6
        val += (lc * prices[j] / pmax) / m8
        grad[j] = val
        gnorm2 += val * val
    g_m = t - 1.0 / m6 - 1.0 / m7 - 1.0 / m8
    grad[n] = g_m
    gnorm2 += g_m * g_m
    info[1] = sqrt(gnorm2)

    dim = n + 1
    c_j = (1.0 / ((1.0 - s) * (1.0 - s))
           + (lc / fmd) * (lc / fmd) / (m3 * m3)
           + kw * kw / (m4 * m4)
           + (g_e / emax) * (g_e / emax) / (m7 * m7)
           + (gam + ups) / dmax / m6
           + (el * gam + etx * ups) / emax / m7)
    for j in range(n):
        v6_j = (g_d[j] / dmax) / m6
        v8_j = (lc * prices[j] / pmax) / m8
        for k in range(n):
            v6_k = (g_d[k] / dmax) / m6
            v8_k = (lc * prices[k] / pmax) / m8
            hess[j * dim + k] = c_j + v6_j * v6_k + v8_j * v8_k
        diag = 1.0 / (y[j] * y[j]) + 1.0 / ((1.0 - y[j]) * (1.0 - y[j]))
        if kinds[j] != 0.0:
            g_j = scr[j]
            psi_j = (2.0 * lc * c / (g_j * g_j)
                     + y[j] * 2.0 * lc * lc * c / (g_j * g_j * g_j))
            m5_j = scr[2 * n + j]
            diag += (lc / f_osp[j]) * (lc / f_osp[j]) / (m5_j * m5_j)
            diag += psi_j / dmax / m6
        hess[j * dim + j] += diag
        cross = (-(g_d[j] / dmax) / (m6 * m6)
                 - (g_e / emax) / (m7 * m7)
                 - (lc * prices[j] / pmax) / (m8 * m8))
        hess[j * dim + n] = cross
        hess[n * dim + j] = cross
    hess[n * dim + n] = 1.0 / (m6 * m6) + 1.0 / (m7 * m7) + 1.0 / (m8 * m8)
    return 1


cdef (int, int) _newton2(int n, const double *dev, const double *kinds,
                         const double *f_osp, const double *wired,
                         const double *prices, const double *load_oth,
                         double *x, double t, double tau, const double *beta,
                         double stab_cap, double gtol, int max_iter,
                         double *grad, double *hess, double *lfac, double *d,
                         double *xt, double *g_d, double *scr,
                         double *info) nogil:
    cdef int it = 0
    cdef int j, accepted
    cdef double slope, phi0, gnorm0, step
    while it < max_iter:
        if not _eval2(n, dev, kinds, f_osp, wired, prices, load_oth, x, t, tau,
                      beta, stab_cap, 1, grad, hess, g_d, scr, info):
            return 1, it
        if info[1] <= gtol:
            return 0, it
        if not _chol_solve_ridge(n, hess, grad, d, lfac):
            return 1, it
        slope = 0.0
        for j in range(n):
            slope += grad[j] * d[j]
        if slope >= 0.0:
            return 1, it
        phi0 = info[0]
        gnorm0 = info[1]
        step = 1.0
        accepted = 0
        while step >= 1e-20:
            for j in range(n):
                xt[j] = x[j] + step * d[j]
            if _eval2(n, dev, kinds, f_osp, wired, prices, load_oth, xt, t,
                      tau, beta, stab_cap, 0, grad, hess, g_d, scr, info):
                if info[0] <= phi0 + 0.25 * step * slope:
                    accepted = 1
                    break
            step *= 0.5
        if accepted == 0 or info[0] >= phi0:
            # phi differences fell below double resolution; accept a step
            # on strict gradient-norm decrease instead
            step = 1.0
            accepted = 0
            while step >= 1e-3:
                for j in range(n):
                    xt[j] = x[j] + step * d[j]
                if _eval2(n, dev, kinds, f_osp, wired, prices, load_oth, xt,
                          t, tau, beta, stab_cap, 1, grad, hess, g_d, scr,
                          info):
                    if info[1] < 0.99 * gnorm0:
                        accepted = 1
                        break
                step *= 0.5
            if accepted == 0:
                return 1, it
        for j in range(n):
            x[j] = xt[j]
        it += 1
    return 2, it


cdef (int, int) _newton1(int n, const double *dev, const double *kinds,
                         const double *f_osp, const double *wired,
                         const double *prices, const double *load_oth,
                         double *y, double t, double stab_cap, double gtol,
                         int max_iter, double *grad, double *hess,
                         double *lfac, double *d, double *yt, double *g_d,
                         double *scr, double *info) nogil:
    cdef int dim = n + 1
    cdef int it = 0
    cdef int j, accepted
    cdef double slope, phi0, gnorm0, step
    while it < max_iter:
        if not _eval1(n, dev, kinds, f_osp, wired, prices, load_oth, y, t,
                      stab_cap, 1, grad, hess, g_d, scr, info):
            return 1, it
        if info[2] <= -PHASE1_EXIT:
            return 4, it
        if info[1] <= gtol:
            return 0, it
        if not _chol_solve_ridge(dim, hess, grad, d, lfac):
            return 1, it
        slope = 0.0
        for j in range(dim):
            slope += grad[j] * d[j]
        if slope >= 0.0:
            return 1, it
        phi0 = info[0]
        gnorm0 = info[1]
        step = 1.0
        accepted = 0
        while step >= 1e-20:
            for j in range(dim):
                yt[j] = y[j] + step * d[j]
            if _eval1(n, dev, kinds, f_osp, wired, prices, load_oth, yt, t,
                      stab_cap, 0, grad, hess, g_d, scr, info):
                if info[0] <= phi0 + 0.25 * step * slope:
                    accepted = 1
                    break
            step *= 0.5
        if accepted == 0 or info[0] >= phi0:
            step = 1.0
            accepted = 0
            while step >= 1e-3:
                for j in range(dim):
                    yt[j] = y[j] + step * d[j]
                if _eval1(n, dev, kinds, f_osp, wired, prices, load_oth, yt,
                          t, stab_cap, 1, grad, hess, g_d, scr, info):
                    if info[1] < 0.99 * gnorm0:
                        accepted = 1
                        break
                step *= 0.5
            if accepted == 0:
                return 1, it
        for j in range(dim):
            y[j] = yt[j]
        it += 1
    return 2, it


def solve_prox(double[::1] dev, double[::1] kinds, double[::1] f_osp,
               double[::1] wired, double[::1] prices, double[::1] load_oth,
               double[::1] beta, double tau, double delta_stab, double t0,
               double mu, double tol_kkt, int max_newton,
               double[::1] out_alpha, double[::1] out_diag):
    """Minimize disutility + (tau/2)|alpha - beta|^2 under C1-C8.

    The caller guarantees every edge column has strictly positive C5 room.
    out_diag = [kkt_residual, final_barrier_t, newton_iterations, phase1_used].
    """
    cdef int n = out_alpha.shape[0]
    cdef double *buf = <double *> malloc(
        ((n + 1) + (n + 1) * (n + 1) * 2 + (n + 1) * 2 + n + 3 * n + n
         + 3 + (n + 1) + n) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double *grad = buf
    cdef double *hess = grad + (n + 1)
    cdef double *lfac = hess + (n + 1) * (n + 1)
    cdef double *d = lfac + (n + 1) * (n + 1)
    cdef double *xt = d + (n + 1)
    cdef double *g_d = xt + (n + 1)
    cdef double *scr = g_d + n
    cdef double *room = scr + 3 * n
    cdef double *info = room + n
    cdef double *y = info + 3
    cdef double *x = y + (n + 1)
    cdef int status
    try:
        status = _solve_prox_impl(
            n, &dev[0], &kinds[0], &f_osp[0], &wired[0], &prices[0],
            &load_oth[0], &beta[0], tau, delta_stab, t0, mu, tol_kkt,
            max_newton, &out_alpha[0], &out_diag[0], grad, hess, lfac, d, xt,
            g_d, scr, room, info, y, x)
    finally:
        free(buf)
    return status


cdef int _solve_prox_impl(int n, const double *dev, const double *kinds,
                          const double *f_osp, const double *wired,
                          const double *prices, const double *load_oth,
                          const double *beta, double tau, double delta_stab,
                          double t0, double mu, double tol_kkt,
                          int max_newton, double *out_alpha, double *out_diag,
                          double *grad, double *hess, double *lfac, double *d,
                          double *xt, double *g_d, double *scr, double *room,
                          double *info, double *y, double *x) nogil:
    cdef double lam = dev[DEV_LAM]
    cdef double c = dev[DEV_C]
    cdef double z = dev[DEV_Z]
    cdef double fmd = dev[DEV_FMD]
    cdef double r = dev[DEV_R]
    cdef double lc = lam * c
    cdef double stab_cap = 1.0 - delta_stab
    cdef double out3[3]
    cdef double room_sum = 0.0
    cdef double room_j, s_min, s_max, target, capmax, t, t_req, gtol
    cdef double d_val, e_val, p_val
    cdef int j, n_con, nt_total, solved, stage, code, iters
    cdef double phase1_used = 0.0

    for j in range(n):
        if kinds[j] != 0.0:
            room_j = (stab_cap * f_osp[j] - load_oth[j]) / lc
            if room_j < ROOM_MIN:
                return SOLVE_INFEASIBLE
            if room_j > 1.0:
                room_j = 1.0
        else:
            room_j = 1.0
        room[j] = room_j
        room_sum += room_j
    s_min = 1.0 - stab_cap * fmd / lc
    s_max = stab_cap * r / (lam * z)
    if s_max > 1.0:
        s_max = 1.0
    if s_min > 0.0:
        if s_min >= s_max or s_min >= 0.999 * room_sum:
            return SOLVE_INFEASIBLE
        target = s_min + 0.05 * (s_max - s_min)
        if target > 0.999 * room_sum:
            target = 0.999 * room_sum
        for j in range(n):
            x[j] = target * room[j] / room_sum
    else:
        for j in range(n):
            x[j] = 1e-6
            if x[j] > 0.5 * room[j]:
                x[j] = 0.5 * room[j]

    if not _costs(n, dev, kinds, f_osp, wired, prices, load_oth, x, out3):
        return SOLVE_INFEASIBLE
    d_val = out3[0]
    e_val = out3[1]
    p_val = out3[2]
    capmax = d_val / dev[DEV_DMAX] - 1.0
    if e_val / dev[DEV_EMAX] - 1.0 > capmax:
        capmax = e_val / dev[DEV_EMAX] - 1.0
    if p_val / dev[DEV_PMAX] - 1.0 > capmax:
        capmax = p_val / dev[DEV_PMAX] - 1.0

    n_con = 2 * n + 3 + 3
    for j in range(n):
        if kinds[j] != 0.0:
            n_con += 1

    nt_total = 0
    if capmax > -1e-9:
        phase1_used = 1.0
        for j in range(n):
            y[j] = x[j]
        y[n] = capmax + 1.0
        t = t0
        t_req = n_con / PHASE1_GAP
        solved = 0
        for stage in range(60):
            gtol = 0.05 * PHASE1_GAP * t
            if gtol < 0.01 * n_con:
                gtol = 0.01 * n_con
            code, iters = _newton1(n, dev, kinds, f_osp, wired, prices,
                                   load_oth, y, t, stab_cap, gtol, max_newton,
                                   grad, hess, lfac, d, xt, g_d, scr, info)
            nt_total += iters
            if code == 4:
                solved = 1
                break
            if t >= t_req:
                break
            t *= mu
            if t > t_req:
                t = t_req
        if not solved:
            if not _eval1(n, dev, kinds, f_osp, wired, prices, load_oth, y, t,
                          stab_cap, 0, grad, hess, g_d, scr, info):
                return SOLVE_INFEASIBLE
            if info[2] > -1e-9:
                return SOLVE_INFEASIBLE
        for j in range(n):
            x[j] = y[j]

    # The last centering stage runs at exactly t_req (duality gap == tol_kkt);
    # overshooting t further hits the double-precision wall on phi decrements.
    t = t0
    t_req = n_con / tol_kkt
    for stage in range(80):
        gtol = 0.05 * tol_kkt * t
        if gtol < 0.01 * n_con:
            gtol = 0.01 * n_con
        code, iters = _newton2(n, dev, kinds, f_osp, wired, prices, load_oth,
                               x, t, tau, beta, stab_cap, gtol, max_newton,
                               grad, hess, lfac, d, xt, g_d, scr, info)
        nt_total += iters
        if t >= t_req:
            break
        t *= mu
        if t > t_req:
            t = t_req

    if not _eval2(n, dev, kinds, f_osp, wired, prices, load_oth, x, t, tau,
                  beta, stab_cap, 1, grad, hess, g_d, scr, info):
        return SOLVE_NO_CONVERGENCE
    for j in range(n):
        out_alpha[j] = x[j]
    # diag[0] is the raw stationarity residual |grad phi|/t; near sharply
    # active constraints it is precision-limited, so the caller judges
    # optimality by the residual projected off the active normals.
    out_diag[0] = info[1] / t
    out_diag[1] = t
    out_diag[2] = nt_total
    out_diag[3] = phase1_used
    return SOLVE_OK
