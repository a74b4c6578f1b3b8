"""Pure-Python simulation kernel: symplectic stepping with penalty contacts.

Velocities update explicitly from the current-state forces; positions then
advance by the trapezoid of old and new velocity, which makes constant-force
flight (free fall) exact rather than O(dt) biased.

This is the reference implementation and import-time fallback for the compiled
extension (_kernel.pyx). The two are kept line-parallel with identical float64
operation order, so their outputs are bit-identical; any change here must be
mirrored there.

Contact forces are computed in two passes. Pass one accumulates everything
except friction: gravity, PD actuation, and spring-damper normal forces
(_normal_force), and records each active contact's geometry. Pass two solves
tanh-regularized Coulomb friction implicitly in the end-of-step tangential
slip, fed with the pass-one accelerations, so a driven slide sees full
kinetic friction while a freely resting contact gets a dead-beat stop
instead of the overshoot chatter that an explicit tanh with slope mu*N/eps
produces at 200 Hz. All contacts touching the object are solved as one
coupled system through the tangential response matrix (damped Newton with a
backtracking line search); robot-vs-table contacts are independent scalar
solves (_friction_force).

State layout (14 floats):
    [ox, oy, otheta, ovx, ovy, omega, q0..q3, v0..v3]
Physics parameter layout (11 floats):
    [object_mass, object_half_extent, friction_mu, contact_stiffness,
     contact_damping, friction_vel_eps, gravity, sim_dt, robot_kp, robot_kd,
     robot_force_limit]
Embodiment constants:
    kind 0 (fingers): [finger_radius, finger_mass]
    kind 1 (arms): per arm [base_x, base_y, base_angle, l1, l2, m1, m2, tip_radius]
"""

from __future__ import annotations

import math

N_STATE = 14
DOF = 4


def _wrap(theta: float) -> float:
    t = math.fmod(theta + math.pi, 2.0 * math.pi)
    if t <= 0.0:
        t += 2.0 * math.pi
    return t - math.pi


def _clamp_force(v: float, lim: float) -> float:
    if v > lim:
        return lim
    if v < -lim:
        return -lim
    return v


def _circle_box_local(lx: float, ly: float, h: float, r: float):
    """Circle (center in box frame, radius r) vs square box of half extent h.

    Returns (phi, nlx, nly, cx_l, cy_l): signed distance, outward normal and
    closest surface point, all in the box frame.
    """
    adx = abs(lx) - h
    ady = abs(ly) - h
    if adx > 0.0 or ady > 0.0:
        cx_l = lx
        if cx_l > h:
            cx_l = h
        elif cx_l < -h:
            cx_l = -h
        cy_l = ly
        if cy_l > h:
            cy_l = h
        elif cy_l < -h:
            cy_l = -h
        ddx = lx - cx_l
        ddy = ly - cy_l
        dist = math.sqrt(ddx * ddx + ddy * ddy)
        if dist > 1e-12:
            inv = 1.0 / dist
            nlx = ddx * inv
            nly = ddy * inv
        elif adx > ady:
            nlx = 1.0 if lx >= 0.0 else -1.0
            nly = 0.0
        else:
            nlx = 0.0
            nly = 1.0 if ly >= 0.0 else -1.0
        return dist - r, nlx, nly, cx_l, cy_l
    if adx > ady:
        sx = 1.0 if lx >= 0.0 else -1.0
        return adx - r, sx, 0.0, sx * h, ly
    sy = 1.0 if ly >= 0.0 else -1.0
    return ady - r, 0.0, sy, lx, sy * h


def _normal_force(phi, pd, k, cd, dt, inv_n):
    """Spring-damper normal force for one penetrating contact.

    pd is the separation rate (negative while approaching); inv_n the inverse
    effective mass along the normal, pre-split by the caller across the
    contacts loading the same body this step. Damping is signed (resists
    separation too, floored at zero net force): approach-only damping at this
    step rate returns more impulse than the spring absorbed and objects
    bounce forever. The damping coefficient is capped by the effective mass
    at the 200 Hz reference step rather than the running dt, so refining the
    timestep never changes the contact law (a dt-varying cap is a different
    model at every resolution and the refinement oracle cannot converge).
    """
    damp_c = cd
    dt_cap = dt
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


def _friction_force(fn, vt0, s, mu, eps):
    """Coulomb friction for one contact, implicit in the end-of-step slip.

    Solves ft = -mu*fn*tanh((vt0 + s*ft)/eps), where vt0 is the tangential
    speed the contact point would reach this step under every force except
    this friction (current slip plus dt times the pass-one tangential
    acceleration) and s = dt*inv_t with the pre-split inverse effective mass.
    Feeding the other forces through vt0 matters in both regimes: a freely
    buzzing contact gets a dead-beat stop instead of the overshoot that
    sustains period-2 chatter, while a driven slide still sees full kinetic
    mu*fn because the drive reappears in vt0. Solving against the current
    slip alone applies only the force that would stop a free point, and a
    slowly pushed box fails to trail the finger by its static force offset.

    g(ft) = ft + mu*fn*tanh((vt0+s*ft)/eps) is monotone with slope >= 1, so
    clamped Newton from a saturated-linear initializer converges globally.
    As dt -> 0 this reduces to the plain law -mu*fn*tanh(vt/eps).
    """
    mn = mu * fn
    if mn <= 0.0:
        return 0.0
    c = mn / eps
    ft = -c * vt0 / (1.0 + c * s)
    if ft > mn:
        ft = mn
    elif ft < -mn:
        ft = -mn
    for _ in range(4):
        th = math.tanh((vt0 + s * ft) / eps)
        gv = ft + mn * th
        gp = 1.0 + mn * s * (1.0 - th * th) / eps
        ft = ft - gv / gp
        if ft > mn:
            ft = mn
        elif ft < -mn:
            ft = -mn
    return ft


def _lin_solve(a, b, n):
    """Gaussian elimination with partial pivoting, flat row-major a (stride
    n), solution overwrites b. Both buffers are scratch. n <= 6."""
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


def step(state, cmd, phys, kind, emb, out) -> int:
    """One dynamics step. Returns 0, or 1 if the output is non-finite."""
    m_o = phys[0]
    h = phys[1]
    mu = phys[2]
    k = phys[3]
    cd = phys[4]
    eps = phys[5]
    g = phys[6]
    dt = phys[7]
    kp = phys[8]
    kd = phys[9]
    fl = phys[10]

    ox = state[0]
    oy = state[1]
    oth = state[2]
    ovx = state[3]
    ovy = state[4]
    ow = state[5]

    inertia = m_o * (h * h + h * h) / 3.0
    inv_mo = 1.0 / m_o
    inv_io = 1.0 / inertia
    cth = math.cos(oth)
    sth = math.sin(oth)

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
            phi, nlx, nly, cxl, cyl = _circle_box_local(lx, ly, h, rf)
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
            tipx = emb[o] + emb[o + 3] * math.cos(a1) + emb[o + 4] * math.cos(a12)
            tipy = emb[o + 1] + emb[o + 3] * math.sin(a1) + emb[o + 4] * math.sin(a12)
            nf = 0
            if tipy - emb[o + 7] < 0.0:
                nf += 1
            dxw = tipx - ox
            dyw = tipy - oy
            lx = cth * dxw + sth * dyw
            ly = -sth * dxw + cth * dyw
            phi, nlx, nly, cxl, cyl = _circle_box_local(lx, ly, h, emb[o + 7])
            if phi < 0.0:
                nf += 1
                n_obj += 1
            if a == 0:
                nf0 = nf
            else:
                nf1 = nf

    # Pass one: gravity, actuation, and spring-damper normal forces, with a
    # record of every active contact for the friction pass.
    c_knd = [0] * 8
    c_rob = [0] * 8
    c_fn = [0.0] * 8
    c_vt = [0.0] * 8
    c_s = [0.0] * 8
    c_tx = [0.0] * 8
    c_ty = [0.0] * 8
    c_rx = [0.0] * 8
    c_ry = [0.0] * 8
    nc = 0
    frx = [0.0, 0.0]  # robot force accumulators: Cartesian for fingers,
    fry = [0.0, 0.0]  # tip-space for arms
    arx = [0.0, 0.0]  # pass-one acceleration of the robot contact point
    ary = [0.0, 0.0]

    fox = 0.0
    foy = -m_o * g
    tau = 0.0

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
                invf = inv_mf * nf
                fn = _normal_force(phi, vy, k, cd, dt, invf)
                fy += fn
                c_knd[nc] = 1
                c_rob[nc] = f
                c_fn[nc] = fn
                c_vt[nc] = vx
                c_s[nc] = dt * invf
                c_tx[nc] = 1.0
                c_ty[nc] = 0.0
                nc += 1
            # finger vs object
            dxw = qx - ox
            dyw = qy - oy
            lx = cth * dxw + sth * dyw
            ly = -sth * dxw + cth * dyw
            phi, nlx, nly, cxl, cyl = _circle_box_local(lx, ly, h, rf)
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
        j11a = [0.0, 0.0]
        j12a = [0.0, 0.0]
        j21a = [0.0, 0.0]
        j22a = [0.0, 0.0]
        mi11a = [0.0, 0.0]
        mi12a = [0.0, 0.0]
        mi22a = [0.0, 0.0]
        t1a = [0.0, 0.0]
        t2a = [0.0, 0.0]
        cor1a = [0.0, 0.0]
        cor2a = [0.0, 0.0]
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
            c1 = math.cos(a1)
            s1 = math.sin(a1)
            c12 = math.cos(a12)
            s12 = math.sin(a12)
            tipx = bx + l1 * c1 + l2 * c12
            tipy = by + l1 * s1 + l2 * s12
            j11 = -l1 * s1 - l2 * s12
            j12 = -l2 * s12
            j21 = l1 * c1 + l2 * c12
            j22 = l2 * c12
            vx = j11 * w1 + j12 * w2
            vy = j21 * w1 + j22 * w2
            c2r = math.cos(q2)
            s2r = math.sin(q2)
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
            phi, nlx, nly, cxl, cyl = _circle_box_local(lx, ly, h, rt)
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
    gi_ = [0, 0, 0, 0, 0, 0]
    ngc = 0
    for ci in range(nc):
        if c_knd[ci] != 1:
            gi_[ngc] = ci
            ngc += 1
    if ngc > 0:
        g_m = [0.0] * 6
        g_b = [0.0] * 6
        g_tx = [0.0] * 6
        g_ty = [0.0] * 6
        g_lm = [0.0] * 6
        g_e = [0.0] * 6
        g_f = [0.0] * 6
        g_th = [0.0] * 6
        ww = [0.0] * 36
        aa = [0.0] * 36
        rr = [0.0] * 6
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
        g_d = [0.0] * 6
        psi = 0.0
        for i in range(ngc):
            sarg = g_b[i]
            for j in range(ngc):
                sarg += dt * ww[i * 6 + j] * g_f[j]
            th = math.tanh(sarg / eps)
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
                    th = math.tanh(sarg / eps)
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
        if not math.isfinite(out[i]):
            return 1
    return 0


def rollout(state0, knot_times, knots, n_steps, phys, kind, emb, states_out, cmds_out) -> int:
    """Piecewise-linear knot interpolation driven through step().

    Fills states_out (n_steps+1, 14) and cmds_out (n_steps, dof) with the dense
    trajectory and the per-tick commands actually applied. Returns -1 on
    success, else the index of the first failing step.
    """
    n_knots = knot_times.shape[0]
    dt = phys[7]
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
        rc = step(states_out[i], cmds_out[i], phys, kind, emb, states_out[i + 1])
        if rc != 0:
            return i
    return -1
