# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernel.

Line-parallel transcription of _kernel_py.py with identical float64 operation
order (compiled with -ffp-contract=off), so both backends produce bit-identical
trajectories. Keep the two files in sync; semantics are documented in the
Python module.
"""

from libc.math cimport cos, sin, tanh, sqrt, fabs, fmod, isfinite

cdef double PI = 3.141592653589793
cdef int N_STATE = 14
cdef int DOF = 4


cdef inline double _wrap(double theta) nogil:
    cdef double t = fmod(theta + PI, 2.0 * PI)
    if t <= 0.0:
        t += 2.0 * PI
    return t - PI


cdef inline double _clamp_force(double v, double lim) nogil:
    if v > lim:
        return lim
    if v < -lim:
        return -lim
    return v


cdef inline double _circle_box_local(double lx, double ly, double h, double r,
                                     double* nlx, double* nly,
                                     double* cx_l, double* cy_l) nogil:
    cdef double adx = fabs(lx) - h
    cdef double ady = fabs(ly) - h
    cdef double cx, cyv, ddx, ddy, dist, inv, sx, sy
    if adx > 0.0 or ady > 0.0:
        cx = lx
        if cx > h:
            cx = h
        elif cx < -h:
            cx = -h
        cyv = ly
        if cyv > h:
            cyv = h
        elif cyv < -h:
            cyv = -h
        ddx = lx - cx
        ddy = ly - cyv
        dist = sqrt(ddx * ddx + ddy * ddy)
        if dist > 1e-12:
            inv = 1.0 / dist
            nlx[0] = ddx * inv
            nly[0] = ddy * inv
        elif adx > ady:
            nlx[0] = 1.0 if lx >= 0.0 else -1.0
            nly[0] = 0.0
        else:
            nlx[0] = 0.0
            nly[0] = 1.0 if ly >= 0.0 else -1.0
        cx_l[0] = cx
        cy_l[0] = cyv
        return dist - r
    if adx > ady:
        sx = 1.0 if lx >= 0.0 else -1.0
        nlx[0] = sx
        nly[0] = 0.0
        cx_l[0] = sx * h
        cy_l[0] = ly
        return adx - r
    sy = 1.0 if ly >= 0.0 else -1.0
    nlx[0] = 0.0
    nly[0] = sy
    cx_l[0] = lx
    cy_l[0] = sy * h
    return ady - r


cdef inline double _normal_force(double phi, double pd, double k, double cd,
                                 double dt, double inv_n) nogil:
    # Damping cap pinned to the 200 Hz reference step; see
    # _kernel_py._normal_force for the rationale.
    cdef double damp_c = cd
    cdef double dt_cap = dt
    cdef double cap, fn
    if dt_cap < 0.005:
        dt_cap = 0.005
    if inv_n > 1e-12:
        cap = 1.0 / (dt_cap * inv_n)
        if damp_c > cap:
            damp_c = cap
    fn = k * (-phi) - damp_c * pd
    if fn < 0.0:
        fn = 0.0
    return fn


cdef inline double _friction_force(double fn, double vt0, double s, double mu,
                                   double eps) nogil:
    # Scalar implicit tanh friction; see _kernel_py._friction_force.
    cdef double mn = mu * fn
    cdef double c, ft, th, gv, gp
    cdef int _i
    if mn <= 0.0:
        return 0.0
    c = mn / eps
    ft = -c * vt0 / (1.0 + c * s)
    if ft > mn:
        ft = mn
    elif ft < -mn:
        ft = -mn
    for _i in range(4):
        th = tanh((vt0 + s * ft) / eps)
        gv = ft + mn * th
        gp = 1.0 + mn * s * (1.0 - th * th) / eps
        ft = ft - gv / gp
        if ft > mn:
            ft = mn
        elif ft < -mn:
            ft = -mn
    return ft


cdef inline void _lin_solve(double* a, double* b, int n) nogil:
    # Gaussian elimination with partial pivoting, flat row-major a (stride n).
    cdef int col, r, cc, p
    cdef double best, v, tmp, piv, fac, s
    for col in range(n - 1):
        p = col
        best = a[col * n + col]
        if best < 0.0:
            best = -best
        for r in range(col + 1, n):
            v = a[r * n + col]
            if v < 0.0:
                v = -v
            if v > best:
                best = v
                p = r
        if p != col:
            for cc in range(col, n):
                tmp = a[col * n + cc]
                a[col * n + cc] = a[p * n + cc]
                a[p * n + cc] = tmp
            tmp = b[col]
            b[col] = b[p]
            b[p] = tmp
        piv = a[col * n + col]
        for r in range(col + 1, n):
            fac = a[r * n + col] / piv
            for cc in range(col + 1, n):
                a[r * n + cc] -= fac * a[col * n + cc]
            b[r] -= fac * b[col]
    for r in range(n - 1, -1, -1):
        s = b[r]
        for cc in range(r + 1, n):
            s -= a[r * n + cc] * b[cc]
        b[r] = s / a[r * n + r]


cdef int _step(double* state, double* cmd, double* phys, int kind,
               double* emb, double* out) nogil:
    cdef double m_o = phys[0]
    cdef double h = phys[1]
    cdef double mu = phys[2]
    cdef double k = phys[3]
    cdef double cd = phys[4]
    cdef double eps = phys[5]
    cdef double g = phys[6]
    cdef double dt = phys[7]
    cdef double kp = phys[8]
    cdef double kd = phys[9]
    cdef double fl = phys[10]

    cdef double ox = state[0]
    cdef double oy = state[1]
    cdef double oth = state[2]
    cdef double ovx = state[3]
    cdef double ovy = state[4]
    cdef double ow = state[5]

    cdef double inertia = m_o * (h * h + h * h) / 3.0
    cdef double inv_mo = 1.0 / m_o
    cdef double inv_io = 1.0 / inertia
    cdef double cth = cos(oth)
    cdef double sth = sin(oth)

    cdef int n_obj, nf0, nf1, nf
    cdef int i, j, f, a, o, nc, ci, ri, ngc, _i, _bt
    cdef double lx, ly, rx, ry, cy, vpx, vpy, fn, ft
    cdef double inv_n, inv_t
    cdef double rf, mf, inv_mf, qx, qy, vx, vy, fx, fy, phi
    cdef double dxw, dyw, nlx, nly, cxl, cyl, nx, ny
    cdef double vbx, vby, rvx, rvy, pd, tx, ty, vt, ln, lt
    cdef double fnx, fny, nvx, nvy
    cdef double bx, by, beta, l1, l2, m1, m2, rt
    cdef double q1, q2, w1, w2, a1, a12, c1, s1, c12, s12
    cdef double tipx, tipy, j11, j12, j21, j22
    cdef double c2r, s2r, m11, m12, m22, det, mi11, mi12, mi22
    cdef double a11, a21, a12m, a22, lxx, lxy, lyy
    cdef double t1, t2, inv_rn, inv_rt
    cdef double h12, cor1, cor2, n1, n2, nw1, nw2, qdd1, qdd2
    cdef double novx, novy, now
    cdef double rs, at, wij, sc, v, fcap, psi, sarg, th, fv, dd, alpha, pt, ex
    cdef double aox, aoy, al, vt0

    cdef int c_knd[8]
    cdef int c_rob[8]
    cdef double c_fn[8]
    cdef double c_vt[8]
    cdef double c_s[8]
    cdef double c_tx[8]
    cdef double c_ty[8]
    cdef double c_rx[8]
    cdef double c_ry[8]
    cdef double frx[2]
    cdef double fry[2]
    cdef double arx[2]
    cdef double ary[2]
    cdef double j11a[2]
    cdef double j12a[2]
    cdef double j21a[2]
    cdef double j22a[2]
    cdef double mi11a[2]
    cdef double mi12a[2]
    cdef double mi22a[2]
    cdef double t1a[2]
    cdef double t2a[2]
    cdef double cor1a[2]
    cdef double cor2a[2]
    cdef int gi_[6]
    cdef double g_m[6]
    cdef double g_b[6]
    cdef double g_tx[6]
    cdef double g_ty[6]
    cdef double g_lm[6]
    cdef double g_e[6]
    cdef double g_f[6]
    cdef double g_th[6]
    cdef double g_d[6]
    cdef double ww[36]
    cdef double aa[36]
    cdef double rr[6]

    # Count the contacts loading each body before computing any force, so the
    # per-contact solves can split the shared inertia (n_obj for the object,
    # nf0/nf1 for each robot body).
    n_obj = 0
    for i in range(4):
        if i == 0:
            lx = -h
            ly = -h
        elif i == 1:
            lx = h
            ly = -h
        elif i == 2:
            lx = h
            ly = h
        else:
            lx = -h
            ly = h
        ry = lx * sth + ly * cth
        if oy + ry < 0.0:
            n_obj += 1
    nf0 = 0
    nf1 = 0
    if kind == 0:
        rf = emb[0]
        for f in range(2):
            qx = state[6 + 2 * f]
            qy = state[7 + 2 * f]
            nf = 0
            if qy - rf < 0.0:
                nf += 1
            dxw = qx - ox
            dyw = qy - oy
            lx = cth * dxw + sth * dyw
            ly = -sth * dxw + cth * dyw
            phi = _circle_box_local(lx, ly, h, rf, &nlx, &nly, &cxl, &cyl)
            if phi < 0.0:
                nf += 1
                n_obj += 1
            if f == 0:
                nf0 = nf
            else:
                nf1 = nf
    else:
        for a in range(2):
            o = 8 * a
            a1 = emb[o + 2] + state[6 + 2 * a]
            a12 = a1 + state[7 + 2 * a]
            tipx = emb[o] + emb[o + 3] * cos(a1) + emb[o + 4] * cos(a12)
            tipy = emb[o + 1] + emb[o + 3] * sin(a1) + emb[o + 4] * sin(a12)
            nf = 0
            if tipy - emb[o + 7] < 0.0:
                nf += 1
            dxw = tipx - ox
            dyw = tipy - oy
            lx = cth * dxw + sth * dyw
            ly = -sth * dxw + cth * dyw
            phi = _circle_box_local(lx, ly, h, emb[o + 7], &nlx, &nly, &cxl, &cyl)
            if phi < 0.0:
                nf += 1
                n_obj += 1
            if a == 0:
                nf0 = nf
            else:
                nf1 = nf

    # Pass one: gravity, actuation, and spring-damper normal forces, with a
    # record of every active contact for the friction pass.
    for i in range(8):
        c_knd[i] = 0
        c_rob[i] = 0
        c_fn[i] = 0.0
        c_vt[i] = 0.0
        c_s[i] = 0.0
        c_tx[i] = 0.0
        c_ty[i] = 0.0
        c_rx[i] = 0.0
        c_ry[i] = 0.0
    nc = 0
    frx[0] = 0.0
    frx[1] = 0.0
    fry[0] = 0.0
    fry[1] = 0.0
    arx[0] = 0.0
    arx[1] = 0.0
    ary[0] = 0.0
    ary[1] = 0.0

    cdef double fox = 0.0
    cdef double foy = -m_o * g
    cdef double tau = 0.0

    # Object vs table: penalty at every penetrating corner (two corners are
    # needed to hold a flat box in equilibrium).
    for i in range(4):
        if i == 0:
            lx = -h
            ly = -h
        elif i == 1:
            lx = h
            ly = -h
        elif i == 2:
            lx = h
            ly = h
        else:
            lx = -h
            ly = h
        rx = lx * cth - ly * sth
        ry = lx * sth + ly * cth
        cy = oy + ry
        if cy < 0.0:
            vpx = ovx - ow * ry
            vpy = ovy + ow * rx
            inv_n = (inv_mo + rx * rx * inv_io) * n_obj
            fn = _normal_force(cy, vpy, k, cd, dt, inv_n)
            foy += fn
            tau += rx * fn
            c_knd[nc] = 0
            c_fn[nc] = fn
            c_vt[nc] = vpx
            c_ry[nc] = ry
            nc += 1

    if kind == 0:
        rf = emb[0]
        mf = emb[1]
        inv_mf = 1.0 / mf
        for f in range(2):
            qx = state[6 + 2 * f]
            qy = state[7 + 2 * f]
            vx = state[10 + 2 * f]
            vy = state[11 + 2 * f]
            nf = nf0 if f == 0 else nf1
            fx = _clamp_force(kp * (cmd[2 * f] - qx) - kd * vx, fl)
            fy = _clamp_force(kp * (cmd[2 * f + 1] - qy) - kd * vy, fl)
            # finger vs table
            phi = qy - rf
            if phi < 0.0:
                inv_t = inv_mf * nf
                fn = _normal_force(phi, vy, k, cd, dt, inv_t)
                fy += fn
                c_knd[nc] = 1
                c_rob[nc] = f
                c_fn[nc] = fn
                c_vt[nc] = vx
                c_s[nc] = dt * inv_t
                c_tx[nc] = 1.0
                c_ty[nc] = 0.0
                nc += 1
            # finger vs object
            dxw = qx - ox
            dyw = qy - oy
            lx = cth * dxw + sth * dyw
            ly = -sth * dxw + cth * dyw
            phi = _circle_box_local(lx, ly, h, rf, &nlx, &nly, &cxl, &cyl)
            if phi < 0.0:
                nx = cth * nlx - sth * nly
                ny = sth * nlx + cth * nly
                rx = cxl * cth - cyl * sth
                ry = cxl * sth + cyl * cth
                vbx = ovx - ow * ry
                vby = ovy + ow * rx
                rvx = vx - vbx
                rvy = vy - vby
                pd = rvx * nx + rvy * ny
                tx = -ny
                ty = nx
                vt = rvx * tx + rvy * ty
                ln = rx * ny - ry * nx
                lt = rx * ty - ry * tx
                inv_n = inv_mf * nf + (inv_mo + ln * ln * inv_io) * n_obj
                fn = _normal_force(phi, pd, k, cd, dt, inv_n)
                fnx = fn * nx
                fny = fn * ny
                fx += fnx
                fy += fny
                fox -= fnx
                foy -= fny
                tau += rx * (-fny) - ry * (-fnx)
                c_knd[nc] = 2
                c_rob[nc] = f
                c_fn[nc] = fn
                c_vt[nc] = vt
                c_s[nc] = inv_mf
                c_tx[nc] = tx
                c_ty[nc] = ty
                c_rx[nc] = rx
                c_ry[nc] = ry
                nc += 1
            frx[f] = fx
            fry[f] = fy
            arx[f] = fx * inv_mf
            ary[f] = fy * inv_mf
    else:
        for a in range(2):
            o = 8 * a
            bx = emb[o]
            by = emb[o + 1]
            beta = emb[o + 2]
            l1 = emb[o + 3]
            l2 = emb[o + 4]
            m1 = emb[o + 5]
            m2 = emb[o + 6]
            rt = emb[o + 7]
            q1 = state[6 + 2 * a]
            q2 = state[7 + 2 * a]
            w1 = state[10 + 2 * a]
            w2 = state[11 + 2 * a]
            a1 = beta + q1
            a12 = a1 + q2
            c1 = cos(a1)
            s1 = sin(a1)
            c12 = cos(a12)
            s12 = sin(a12)
            tipx = bx + l1 * c1 + l2 * c12
            tipy = by + l1 * s1 + l2 * s12
            j11 = -l1 * s1 - l2 * s12
            j12 = -l2 * s12
            j21 = l1 * c1 + l2 * c12
            j22 = l2 * c12
            vx = j11 * w1 + j12 * w2
            vy = j21 * w1 + j22 * w2
            c2r = cos(q2)
            s2r = sin(q2)
            m11 = m1 * l1 * l1 + m2 * (l1 * l1 + 2.0 * l1 * l2 * c2r + l2 * l2)
            m12 = m2 * (l1 * l2 * c2r + l2 * l2)
            m22 = m2 * l2 * l2
            det = m11 * m22 - m12 * m12
            mi11 = m22 / det
            mi12 = -m12 / det
            mi22 = m11 / det
            # tip-space inverse inertia J M^-1 J^T
            a11 = mi11 * j11 + mi12 * j12
            a21 = mi12 * j11 + mi22 * j12
            a12m = mi11 * j21 + mi12 * j22
            a22 = mi12 * j21 + mi22 * j22
            lxx = j11 * a11 + j12 * a21
            lxy = j11 * a12m + j12 * a22
            lyy = j21 * a12m + j22 * a22
            t1 = _clamp_force(kp * (cmd[2 * a] - q1) - kd * w1, fl)
            t2 = _clamp_force(kp * (cmd[2 * a + 1] - q2) - kd * w2, fl)
            nf = nf0 if a == 0 else nf1
            fx = 0.0
            fy = 0.0
            # tip vs table
            phi = tipy - rt
            if phi < 0.0:
                fn = _normal_force(phi, vy, k, cd, dt, lyy * nf)
                fy += fn
                c_knd[nc] = 1
                c_rob[nc] = a
                c_fn[nc] = fn
                c_vt[nc] = vx
                c_s[nc] = dt * (lxx * nf)
                c_tx[nc] = 1.0
                c_ty[nc] = 0.0
                nc += 1
            # tip vs object
            dxw = tipx - ox
            dyw = tipy - oy
            lx = cth * dxw + sth * dyw
            ly = -sth * dxw + cth * dyw
            phi = _circle_box_local(lx, ly, h, rt, &nlx, &nly, &cxl, &cyl)
            if phi < 0.0:
                nx = cth * nlx - sth * nly
                ny = sth * nlx + cth * nly
                rx = cxl * cth - cyl * sth
                ry = cxl * sth + cyl * cth
                vbx = ovx - ow * ry
                vby = ovy + ow * rx
                rvx = vx - vbx
                rvy = vy - vby
                pd = rvx * nx + rvy * ny
                tx = -ny
                ty = nx
                vt = rvx * tx + rvy * ty
                ln = rx * ny - ry * nx
                lt = rx * ty - ry * tx
                inv_rn = nx * (lxx * nx + lxy * ny) + ny * (lxy * nx + lyy * ny)
                inv_rt = tx * (lxx * tx + lxy * ty) + ty * (lxy * tx + lyy * ty)
                inv_n = inv_rn * nf + (inv_mo + ln * ln * inv_io) * n_obj
                fn = _normal_force(phi, pd, k, cd, dt, inv_n)
                fnx = fn * nx
                fny = fn * ny
                fx += fnx
                fy += fny
                fox -= fnx
                foy -= fny
                tau += rx * (-fny) - ry * (-fnx)
                c_knd[nc] = 2
                c_rob[nc] = a
                c_fn[nc] = fn
                c_vt[nc] = vt
                c_s[nc] = inv_rt
                c_tx[nc] = tx
                c_ty[nc] = ty
                c_rx[nc] = rx
                c_ry[nc] = ry
                nc += 1
            h12 = m2 * l1 * l2 * s2r
            cor1 = -h12 * (2.0 * w1 * w2 + w2 * w2)
            cor2 = h12 * (w1 * w1)
            # pass-one tip acceleration (Jdot*qdot dropped: the friction
            # predictor only needs the force-driven part)
            n1 = t1 + j11 * fx + j21 * fy - cor1
            n2 = t2 + j12 * fx + j22 * fy - cor2
            qdd1 = mi11 * n1 + mi12 * n2
            qdd2 = mi12 * n1 + mi22 * n2
            arx[a] = j11 * qdd1 + j12 * qdd2
            ary[a] = j21 * qdd1 + j22 * qdd2
            frx[a] = fx
            fry[a] = fy
            j11a[a] = j11
            j12a[a] = j12
            j21a[a] = j21
            j22a[a] = j22
            mi11a[a] = mi11
            mi12a[a] = mi12
            mi22a[a] = mi22
            t1a[a] = t1
            t2a[a] = t2
            cor1a[a] = cor1
            cor2a[a] = cor2

    # Pass two: friction. Every contact touching the object is one coupled
    # group: the ground corners share identical tangents, and a robot contact
    # feeds torque into the same rotation state (at high mu its friction can
    # exceed the object's weight), so one-at-a-time updates either buzz
    # (full inertia each: sustained period-2 limit cycle) or, mass-split,
    # under-apply kinetic friction during driven slides. Each force satisfies
    # ft_i = -mu*fn_i*tanh(slip_i'/eps) with slip' = b + dt*(W ft), W the
    # tangential response matrix. Robot-ground contacts have no torque path
    # anywhere (point tips), so they stay scalar, fed with the pass-one
    # accelerations.
    aox = fox * inv_mo
    aoy = foy * inv_mo
    al = tau * inv_io
    for i in range(6):
        gi_[i] = 0
    ngc = 0
    for ci in range(nc):
        if c_knd[ci] != 1:
            gi_[ngc] = ci
            ngc += 1
    if ngc > 0:
        for i in range(6):
            g_m[i] = 0.0
            g_b[i] = 0.0
            g_tx[i] = 0.0
            g_ty[i] = 0.0
            g_lm[i] = 0.0
            g_e[i] = 0.0
            g_f[i] = 0.0
            g_th[i] = 0.0
            g_d[i] = 0.0
            rr[i] = 0.0
        for i in range(36):
            ww[i] = 0.0
            aa[i] = 0.0
        for i in range(ngc):
            ci = gi_[i]
            if c_knd[ci] == 0:
                g_e[i] = 1.0
                g_tx[i] = 1.0
                g_ty[i] = 0.0
                g_lm[i] = -c_ry[ci]
                rs = 0.0
                at = aox - al * c_ry[ci]
            else:
                ri = c_rob[ci]
                g_e[i] = -1.0
                g_tx[i] = c_tx[ci]
                g_ty[i] = c_ty[ci]
                g_lm[i] = c_rx[ci] * c_ty[ci] - c_ry[ci] * c_tx[ci]
                rs = c_s[ci]
                at = (arx[ri] - (aox - al * c_ry[ci])) * c_tx[ci] + (ary[ri] - (aoy + al * c_rx[ci])) * c_ty[ci]
            g_m[i] = mu * c_fn[ci]
            g_b[i] = c_vt[ci] + dt * at
            for j in range(i + 1):
                wij = g_e[i] * g_e[j] * (inv_mo * (g_tx[i] * g_tx[j] + g_ty[i] * g_ty[j]) + inv_io * g_lm[i] * g_lm[j])
                if i == j:
                    wij += rs
                ww[i * 6 + j] = wij
                ww[j * 6 + i] = wij
        # Saturated-linear start: tanh replaced by its unit slope, one linear
        # solve, then clamped to the friction cones.
        for i in range(ngc):
            sc = g_m[i] / eps
            for j in range(ngc):
                v = dt * sc * ww[i * 6 + j]
                if i == j:
                    v += 1.0
                aa[i * ngc + j] = v
            rr[i] = -sc * g_b[i]
        _lin_solve(aa, rr, ngc)
        for i in range(ngc):
            v = rr[i]
            fcap = g_m[i]
            if v > fcap:
                v = fcap
            elif v < -fcap:
                v = -fcap
            g_f[i] = v
        psi = 0.0
        for i in range(ngc):
            sarg = g_b[i]
            for j in range(ngc):
                sarg += dt * ww[i * 6 + j] * g_f[j]
            th = tanh(sarg / eps)
            g_th[i] = th
            fv = g_f[i] + g_m[i] * th
            rr[i] = fv
            psi += fv * fv
        for _i in range(25):
            if psi <= 1e-20:
                break
            # Newton direction (undamped Newton cycles between the two
            # saturated plateaus; backtracking forces a residual decrease,
            # which only exists through the transition band)
            for i in range(ngc):
                dd = g_m[i] * (1.0 - g_th[i] * g_th[i]) / eps * dt
                for j in range(ngc):
                    v = dd * ww[i * 6 + j]
                    if i == j:
                        v += 1.0
                    aa[i * ngc + j] = v
            _lin_solve(aa, rr, ngc)
            for i in range(ngc):
                g_d[i] = rr[i]
            alpha = 1.0
            for _bt in range(30):
                pt = 0.0
                for i in range(ngc):
                    fv = g_f[i] - alpha * g_d[i]
                    sarg = g_b[i]
                    for j in range(ngc):
                        sarg += dt * ww[i * 6 + j] * (g_f[j] - alpha * g_d[j])
                    th = tanh(sarg / eps)
                    g_th[i] = th
                    rr[i] = fv + g_m[i] * th
                    pt += rr[i] * rr[i]
                if pt <= (1.0 - 1e-4 * alpha) * psi:
                    break
                alpha *= 0.5
            for i in range(ngc):
                g_f[i] = g_f[i] - alpha * g_d[i]
            psi = pt
        for i in range(ngc):
            v = g_f[i]
            fcap = g_m[i]
            if v > fcap:
                v = fcap
            elif v < -fcap:
                v = -fcap
            g_f[i] = v
        for i in range(ngc):
            ci = gi_[i]
            ft = g_f[i]
            ex = g_e[i] * ft
            fox += ex * g_tx[i]
            foy += ex * g_ty[i]
            tau += ex * g_lm[i]
            if c_knd[ci] == 2:
                ri = c_rob[ci]
                frx[ri] += ft * g_tx[i]
                fry[ri] += ft * g_ty[i]
    for ci in range(nc):
        if c_knd[ci] == 1:
            ri = c_rob[ci]
            vt0 = c_vt[ci] + dt * arx[ri]
            ft = _friction_force(c_fn[ci], vt0, c_s[ci], mu, eps)
            frx[ri] += ft

    if kind == 0:
        rf = emb[0]
        mf = emb[1]
        inv_mf = 1.0 / mf
        for f in range(2):
            qx = state[6 + 2 * f]
            qy = state[7 + 2 * f]
            vx = state[10 + 2 * f]
            vy = state[11 + 2 * f]
            nvx = vx + dt * (frx[f] * inv_mf)
            nvy = vy + dt * (fry[f] * inv_mf)
            out[6 + 2 * f] = qx + dt * 0.5 * (vx + nvx)
            out[7 + 2 * f] = qy + dt * 0.5 * (vy + nvy)
            out[10 + 2 * f] = nvx
            out[11 + 2 * f] = nvy
    else:
        for a in range(2):
            q1 = state[6 + 2 * a]
            q2 = state[7 + 2 * a]
            w1 = state[10 + 2 * a]
            w2 = state[11 + 2 * a]
            n1 = t1a[a] + j11a[a] * frx[a] + j21a[a] * fry[a] - cor1a[a]
            n2 = t2a[a] + j12a[a] * frx[a] + j22a[a] * fry[a] - cor2a[a]
            nw1 = w1 + dt * (mi11a[a] * n1 + mi12a[a] * n2)
            nw2 = w2 + dt * (mi12a[a] * n1 + mi22a[a] * n2)
            out[6 + 2 * a] = q1 + dt * 0.5 * (w1 + nw1)
            out[7 + 2 * a] = q2 + dt * 0.5 * (w2 + nw2)
            out[10 + 2 * a] = nw1
            out[11 + 2 * a] = nw2

    novx = ovx + dt * (fox * inv_mo)
    novy = ovy + dt * (foy * inv_mo)
    now = ow + dt * (tau * inv_io)
    out[0] = ox + dt * 0.5 * (ovx + novx)
    out[1] = oy + dt * 0.5 * (ovy + novy)
    out[2] = _wrap(oth + dt * 0.5 * (ow + now))
    out[3] = novx
    out[4] = novy
    out[5] = now

    for i in range(N_STATE):
        if not isfinite(out[i]):
            return 1
    return 0


def step(double[::1] state, double[::1] cmd, double[::1] phys, int kind,
         double[::1] emb, double[::1] out):
    """One dynamics step. Returns 0, or 1 if the output is non-finite."""
    return _step(&state[0], &cmd[0], &phys[0], kind, &emb[0], &out[0])


def rollout(double[::1] state0, double[::1] knot_times, double[:, ::1] knots,
            int n_steps, double[::1] phys, int kind, double[::1] emb,
            double[:, ::1] states_out, double[:, ::1] cmds_out):
    """Piecewise-linear knot interpolation driven through _step().

    Returns -1 on success, else the index of the first failing step.
    """
    cdef int n_knots = knot_times.shape[0]
    cdef double dt = phys[7]
    cdef int i, j, seg, rc
    cdef double t, frac
    cdef int ret = -1
    with nogil:
        for j in range(N_STATE):
            states_out[0, j] = state0[j]
        seg = 0
        for i in range(n_steps):
            t = i * dt
            while seg + 1 < n_knots - 1 and t >= knot_times[seg + 1]:
                seg += 1
            if t <= knot_times[0]:
                for j in range(DOF):
                    cmds_out[i, j] = knots[0, j]
            elif t >= knot_times[n_knots - 1]:
                for j in range(DOF):
                    cmds_out[i, j] = knots[n_knots - 1, j]
            else:
                frac = (t - knot_times[seg]) / (knot_times[seg + 1] - knot_times[seg])
                for j in range(DOF):
                    cmds_out[i, j] = knots[seg, j] + (knots[seg + 1, j] - knots[seg, j]) * frac
            rc = _step(&states_out[i, 0], &cmds_out[i, 0], &phys[0], kind,
                       &emb[0], &states_out[i + 1, 0])
            if rc != 0:
                ret = i
                break
    return ret
