"""Pure-Python numerical kernel (reference twin of the compiled kernel).

``_kernel_cy.pyx`` mirrors this module statement for statement: both twins
perform the same floating-point operations in the same order, so they return
bit-identical results.  Keep them in lockstep when editing either one.

Conventions shared by all entry points:

* ``dev`` is a packed length-14 array (layout in ``_layout``), ``kinds`` holds
  0.0 for cloud and 1.0 for edge columns, ``load_oth`` is the load other
  devices route to each OSP (cycles/s), ``wired`` is the per-column backbone
  delay for this device (0 for edge columns).
* All stability checks inside the solver use utilization <= stab_cap
  (= 1 - delta_stab); the plain ``eval_*`` entry points only guard against
  hard saturation (utilization >= 1).
* Scratch layout inside the solver: scr[0:n] edge server headroom (cycles/s),
  scr[n:2n] per-column server delay, scr[2n:3n] C5 barrier slack.
"""

import math

from ._layout import (
    DEV_LAM, DEV_C, DEV_Z, DEV_FMD, DEV_EPSL, DEV_EPSTX, DEV_DMAX, DEV_EMAX,
    DEV_PMAX, DEV_THD, DEV_THE, DEV_THP, DEV_R, DEV_S2,
    STATUS_OK, STATUS_SATURATED, SOLVE_OK, SOLVE_INFEASIBLE,
    SOLVE_NO_CONVERGENCE,
)

_PHASE1_EXIT = 1e-6     # caps must clear this normalized slack before phase 2
_PHASE1_GAP = 1e-6      # duality-gap target of the feasibility phase
_ROOM_MIN = 1e-9        # columns with less C5 room than this are unusable


def _costs(n, dev, kinds, f_osp, wired, prices, load_oth, x):
    """Delay, energy and payment rate at row x.  Returns (ok, d, e, p)."""
    lam = dev[DEV_LAM]
    c = dev[DEV_C]
    z = dev[DEV_Z]
    fmd = dev[DEV_FMD]
    el = dev[DEV_EPSL]
    etx = dev[DEV_EPSTX]
    r = dev[DEV_R]
    s2 = dev[DEV_S2]
    lc = lam * c

    s = 0.0
    for j in range(n):
        s += x[j]
    util3 = (1.0 - s) * lc / fmd
    if util3 >= 1.0:
        return 0, 0.0, 0.0, 0.0
    util4 = lam * z * s / r
    if util4 >= 1.0:
        return 0, 0.0, 0.0, 0.0

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
                    return 0, 0.0, 0.0, 0.0
                d += x[j] * (wired[j] + c / g_j)
        else:
            d += x[j] * (wired[j] + c / f_osp[j])
        p += x[j] * prices[j]
    p *= lc
    return 1, d, e, p


def eval_costs(dev, kinds, f_osp, wired, prices, load_oth, alpha, out):
    """out = [delay, energy, payment, disutility]."""
    n = len(alpha)
    ok, d, e, p = _costs(n, dev, kinds, f_osp, wired, prices, load_oth, alpha)
    if not ok:
        return STATUS_SATURATED
    out[0] = d
    out[1] = e
    out[2] = p
    out[3] = (dev[DEV_THD] * d / dev[DEV_DMAX]
              + dev[DEV_THE] * e / dev[DEV_EMAX]
              + dev[DEV_THP] * p / dev[DEV_PMAX])
    return STATUS_OK


def eval_grad(dev, kinds, f_osp, wired, prices, load_oth, alpha, out):
    """Analytic gradient of the disutility with respect to the own row."""
    n = len(alpha)
    lam = dev[DEV_LAM]
    c = dev[DEV_C]
    z = dev[DEV_Z]
    fmd = dev[DEV_FMD]
    el = dev[DEV_EPSL]
    etx = dev[DEV_EPSTX]
    dmax = dev[DEV_DMAX]
    emax = dev[DEV_EMAX]
    pmax = dev[DEV_PMAX]
    thd = dev[DEV_THD]
    the = dev[DEV_THE]
    thp = dev[DEV_THP]
    r = dev[DEV_R]
    s2 = dev[DEV_S2]
    lc = lam * c

    s = 0.0
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


def eval_curv(dev, kinds, f_osp, load_oth, alpha, out2, out_psi):
    """Curvature terms: out2 = [gamma, upsilon], out_psi per column (0 cloud)."""
    n = len(alpha)
    lam = dev[DEV_LAM]
    c = dev[DEV_C]
    z = dev[DEV_Z]
    fmd = dev[DEV_FMD]
    r = dev[DEV_R]
    s2 = dev[DEV_S2]
    lc = lam * c

    s = 0.0
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


def eval_hess(dev, kinds, f_osp, load_oth, alpha, out_h):
    """Row-major n*n Hessian of the disutility in the own row."""
    n = len(alpha)
    out2 = [0.0, 0.0]
    psi = [0.0] * n
    status = eval_curv(dev, kinds, f_osp, load_oth, alpha, out2, psi)
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


def _chol_solve(n, hess, grad, d, lfac, ridge):
    """Solve (hess + ridge*I) d = -grad via Cholesky.  Returns 1 on success."""
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
                lfac[i * n + i] = math.sqrt(acc)
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


def _chol_solve_ridge(n, hess, grad, d, lfac):
    """Cholesky solve with deterministic diagonal-ridge escalation."""
    tr = 0.0
    for j in range(n):
        tr += hess[j * n + j]
    base = 1e-14 * (1.0 + tr / n)
    ridge = 0.0
    for _ in range(16):
        if _chol_solve(n, hess, grad, d, lfac, ridge):
            return 1
        if ridge == 0.0:
            ridge = base
        else:
            ridge *= 100.0
    return 0


def _eval2(n, dev, kinds, f_osp, wired, prices, load_oth, x, t, tau, beta,
           stab_cap, want, grad, hess, g_d, scr, info):
    """Barrier objective of the proximal subproblem at x.

    info[0] = phi; with want != 0 also fills grad/hess and info[1] = |grad|.
    Returns 0 if x is outside the strict domain.
    """
    lam = dev[DEV_LAM]
    c = dev[DEV_C]
    z = dev[DEV_Z]
    fmd = dev[DEV_FMD]
    el = dev[DEV_EPSL]
    etx = dev[DEV_EPSTX]
    dmax = dev[DEV_DMAX]
    emax = dev[DEV_EMAX]
    pmax = dev[DEV_PMAX]
    thd = dev[DEV_THD]
    the = dev[DEV_THE]
    thp = dev[DEV_THP]
    r = dev[DEV_R]
    s2 = dev[DEV_S2]
    lc = lam * c
    kw = lam * z / r

    s = 0.0
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
        lnsum += math.log(x[j])
        lnsum += math.log(1.0 - x[j])
    lnsum += math.log(1.0 - s)
    lnsum += math.log(m3)
    lnsum += math.log(m4)
    for j in range(n):
        if kinds[j] != 0.0:
            lnsum += math.log(scr[2 * n + j])
    lnsum += math.log(m6)
    lnsum += math.log(m7)
    lnsum += math.log(m8)
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
    info[1] = math.sqrt(gnorm2)

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


def _eval1(n, dev, kinds, f_osp, wired, prices, load_oth, y, t,
           stab_cap, want, grad, hess, g_d, scr, info):
    """Barrier objective of the feasibility phase at y = (x, m).

    Minimizes m subject to the structural constraints and the caps relaxed
    by m.  info[0] = phi, info[1] = |grad| (want != 0), info[2] = worst
    normalized cap violation at x.
    """
    lam = dev[DEV_LAM]
    c = dev[DEV_C]
    z = dev[DEV_Z]
    fmd = dev[DEV_FMD]
    el = dev[DEV_EPSL]
    etx = dev[DEV_EPSTX]
    dmax = dev[DEV_DMAX]
    emax = dev[DEV_EMAX]
    pmax = dev[DEV_PMAX]
    r = dev[DEV_R]
    s2 = dev[DEV_S2]
    lc = lam * c
    kw = lam * z / r
    m_var = y[n]

    s = 0.0
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
        lnsum += math.log(y[j])
        lnsum += math.log(1.0 - y[j])
    lnsum += math.log(1.0 - s)
    lnsum += math.log(m3)
    lnsum += math.log(m4)
    for j in range(n):
        if kinds[j] != 0.0:
            lnsum += math.log(scr[2 * n + j])
    lnsum += math.log(m6)
    lnsum += math.log(m7)
    lnsum += math.log(m8)
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
    info[1] = math.sqrt(gnorm2)

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


def _newton2(n, dev, kinds, f_osp, wired, prices, load_oth, x, t, tau, beta,
             stab_cap, gtol, max_iter, grad, hess, lfac, d, xt, g_d, scr, info):
    """Damped Newton on the phase-2 barrier.  0 converged / 1 stalled / 2 cap."""
    it = 0
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


def _newton1(n, dev, kinds, f_osp, wired, prices, load_oth, y, t,
             stab_cap, gtol, max_iter, grad, hess, lfac, d, yt, g_d, scr, info):
    """Newton on the phase-1 barrier; returns 4 as soon as the caps clear."""
    dim = n + 1
    it = 0
    while it < max_iter:
        if not _eval1(n, dev, kinds, f_osp, wired, prices, load_oth, y, t,
                      stab_cap, 1, grad, hess, g_d, scr, info):
            return 1, it
        if info[2] <= -_PHASE1_EXIT:
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


def solve_prox(dev, kinds, f_osp, wired, prices, load_oth, beta, tau,
               delta_stab, t0, mu, tol_kkt, max_newton, out_alpha, out_diag):
    """Minimize disutility + (tau/2)|alpha - beta|^2 under C1-C8.

    The caller guarantees every edge column has strictly positive C5 room.
    out_diag = [kkt_residual, final_barrier_t, newton_iterations, phase1_used].
    """
    n = len(out_alpha)
    lam = dev[DEV_LAM]
    c = dev[DEV_C]
    z = dev[DEV_Z]
    fmd = dev[DEV_FMD]
    r = dev[DEV_R]
    lc = lam * c
    stab_cap = 1.0 - delta_stab

    grad = [0.0] * (n + 1)
    hess = [0.0] * ((n + 1) * (n + 1))
    lfac = [0.0] * ((n + 1) * (n + 1))
    d = [0.0] * (n + 1)
    xt = [0.0] * (n + 1)
    g_d = [0.0] * n
    scr = [0.0] * (3 * n)
    room = [0.0] * n
    info = [0.0, 0.0, 0.0]
    x = [0.0] * n

    # Interior starting row.  When the local queue alone would breach the
    # stability margin, spread the minimum required offload across columns
    # proportionally to their room.
    room_sum = 0.0
    for j in range(n):
        if kinds[j] != 0.0:
            room_j = (stab_cap * f_osp[j] - load_oth[j]) / lc
            if room_j < _ROOM_MIN:
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

    ok, d_val, e_val, p_val = _costs(n, dev, kinds, f_osp, wired, prices,
                                     load_oth, x)
    if not ok:
        return SOLVE_INFEASIBLE
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
    phase1_used = 0.0
    if capmax > -1e-9:
        phase1_used = 1.0
        y = [0.0] * (n + 1)
        for j in range(n):
            y[j] = x[j]
        y[n] = capmax + 1.0
        t = t0
        t_req = n_con / _PHASE1_GAP
        solved = 0
        for _ in range(60):
            gtol = 0.05 * _PHASE1_GAP * t
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
    for _ in range(80):
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
