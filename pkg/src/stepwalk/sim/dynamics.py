"""Compiled kernels for the planar biped.

Everything here works on flat float64 arrays so numba can compile it; the
object-level API lives in :mod:`stepwalk.sim.biped`.  Packed parameter
indices follow :data:`stepwalk.sim.model.PACKED_FIELDS`.

Integration is semi-implicit Euler.  Contact is a penalty spring-damper per
sole point with Coulomb-capped tangential friction; damping and friction
enter the velocity update implicitly and a small active-set loop keeps the
normal force non-negative and the tangential force inside the cone.
"""

import math

import numpy as np
from numba import njit

(TORSO_M, TORSO_L, TORSO_C, TORSO_I,
 THIGH_M, THIGH_L, THIGH_C, THIGH_I,
 SHANK_M, SHANK_L, SHANK_C, SHANK_I,
 FOOT_M, FOOT_CX, FOOT_CZ, FOOT_I,
 HEEL_X, TOE_X, ANKLE_H, GRAV,
 K_C, C_C, C_T, MU,
 K_LIM, J_DAMP, MAX_SPEED) = range(27)

NDOF = 9
NCONTACT = 4  # left heel, left toe, right heel, right toe

# per-joint parameter rows in the ``jp`` array
ARM, LOWER, UPPER, KP, KD, TAU_LIM = range(6)


@njit(cache=True)
def _leg_point(q, qd, P, side, level, lx, lz, J, out):
    """Position, Jacobian and velocity-product acceleration of a leg point.

    ``level`` selects the carrying link (1 thigh, 2 shank, 3 foot) and
    (lx, lz) is the point in that link's frame.  ``out`` receives
    (x, z, bias_x, bias_z) where bias is the J-dot times q-dot term.
    """
    for i in range(2):
        for j in range(NDOF):
            J[i, j] = 0.0
    b = 3 + 3 * side
    a1 = q[2] + q[b]
    a2 = a1 + q[b + 1]
    a3 = a2 + q[b + 2]
    w1 = qd[2] + qd[b]
    w2 = w1 + qd[b + 1]
    w3 = w2 + qd[b + 2]
    r2x = r2z = r3x = r3z = 0.0
    if level == 1:
        c, s = math.cos(a1), math.sin(a1)
        r1x = lx * c + lz * s
        r1z = -lx * s + lz * c
    else:
        lt = P[THIGH_L]
        r1x = -lt * math.sin(a1)
        r1z = -lt * math.cos(a1)
        if level == 2:
            c, s = math.cos(a2), math.sin(a2)
            r2x = lx * c + lz * s
            r2z = -lx * s + lz * c
        else:
            ls = P[SHANK_L]
            r2x = -ls * math.sin(a2)
            r2z = -ls * math.cos(a2)
            c, s = math.cos(a3), math.sin(a3)
            r3x = lx * c + lz * s
            r3z = -lx * s + lz * c
    # d r / d a = (r_z, -r_x)
    d3x, d3z = r3z, -r3x
    d2x, d2z = d3x + r2z, d3z - r2x
    d1x, d1z = d2x + r1z, d2z - r1x
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    J[0, 2] = d1x
    J[1, 2] = d1z
    J[0, b] = d1x
    J[1, b] = d1z
    J[0, b + 1] = d2x
    J[1, b + 1] = d2z
    J[0, b + 2] = d3x
    J[1, b + 2] = d3z
    out[0] = q[0] + r1x + r2x + r3x
    out[1] = q[1] + r1z + r2z + r3z
    out[2] = -(w1 * w1 * r1x + w2 * w2 * r2x + w3 * w3 * r3x)
    out[3] = -(w1 * w1 * r1z + w2 * w2 * r2z + w3 * w3 * r3z)


@njit(cache=True)
def _add_body(M, h, J, out, m, inertia, b, level, g):
    for i in range(NDOF):
        ji0 = J[0, i]
        ji1 = J[1, i]
        if ji0 == 0.0 and ji1 == 0.0:
            continue
        for j in range(NDOF):
            M[i, j] += m * (ji0 * J[0, j] + ji1 * J[1, j])
        h[i] += m * (ji0 * out[2] + ji1 * (out[3] + g))
    # angular velocity of the link = pitch rate + joint rates along the chain
    M[2, 2] += inertia
    for k in range(level):
        M[2, b + k] += inertia
        M[b + k, 2] += inertia
        for l in range(level):
            M[b + k, b + l] += inertia


@njit(cache=True)
def mass_matrix_and_bias(q, qd, P, jp, M, h, J, out):
    """Fill ``M`` (9x9) and ``h`` = Coriolis/centripetal + gravity forces."""
    for i in range(NDOF):
        h[i] = 0.0
        for j in range(NDOF):
            M[i, j] = 0.0
    g = P[GRAV]
    # torso
    for i in range(2):
        for j in range(NDOF):
            J[i, j] = 0.0
    a0 = q[2]
    w0 = qd[2]
    rx = P[TORSO_C] * math.sin(a0)
    rz = P[TORSO_C] * math.cos(a0)
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    J[0, 2] = rz
    J[1, 2] = -rx
    out[0] = q[0] + rx
    out[1] = q[1] + rz
    out[2] = -w0 * w0 * rx
    out[3] = -w0 * w0 * rz
    _add_body(M, h, J, out, P[TORSO_M], P[TORSO_I], 2, 0, g)
    for side in range(2):
        b = 3 + 3 * side
        _leg_point(q, qd, P, side, 1, 0.0, -P[THIGH_C], J, out)
        _add_body(M, h, J, out, P[THIGH_M], P[THIGH_I], b, 1, g)
        _leg_point(q, qd, P, side, 2, 0.0, -P[SHANK_C], J, out)
        _add_body(M, h, J, out, P[SHANK_M], P[SHANK_I], b, 2, g)
        _leg_point(q, qd, P, side, 3, P[FOOT_CX], P[FOOT_CZ], J, out)
        _add_body(M, h, J, out, P[FOOT_M], P[FOOT_I], b, 3, g)
    for j in range(6):
        M[3 + j, 3 + j] += jp[ARM, j]


@njit(cache=True)
def terrain_penetration(px, pz, edges, levels, n_edges):
    """Penetration depth and outward normal of a point below the terrain."""
    i = 0
    while i < n_edges and edges[i] <= px:
        i += 1
    hgt = levels[i]
    if pz >= hgt:
        return 0.0, 0.0, 1.0
    best = hgt - pz
    nx = 0.0
    nz = 1.0
    if i > 0 and levels[i - 1] <= pz:
        d = px - edges[i - 1]
        if d < best:
            best = d
            nx = -1.0
            nz = 0.0
    if i < n_edges and levels[i + 1] <= pz:
        d = edges[i] - px
        if d < best:
            best = d
            nx = 1.0
            nz = 0.0
    return best, nx, nz


@njit(cache=True)
def _solve(A, b, x):
    """Gaussian elimination with partial pivoting; A and b are overwritten."""
    n = b.shape[0]
    for k in range(n):
        p = k
        amax = abs(A[k, k])
        for i in range(k + 1, n):
            if abs(A[i, k]) > amax:
                amax = abs(A[i, k])
                p = i
        if p != k:
            for j in range(n):
                tmp = A[k, j]
                A[k, j] = A[p, j]
                A[p, j] = tmp
            tmp = b[k]
            b[k] = b[p]
            b[p] = tmp
        piv = A[k, k]
        for i in range(k + 1, n):
            f = A[i, k] / piv
            if f != 0.0:
                for j in range(k, n):
                    A[i, j] -= f * A[k, j]
                b[i] -= f * b[k]
    for i in range(n - 1, -1, -1):
        s = b[i]
        for j in range(i + 1, n):
            s -= A[i, j] * x[j]
        x[i] = s / A[i, i]


@njit(cache=True)
def contact_points(q, qd, P, pos, vel, Jc):
    """Heel and toe of each foot: positions (4,2), velocities (4,2), Jacobians (4,2,9)."""
    out = np.empty(4)
    J = np.empty((2, NDOF))
    for side in range(2):
        for k in range(2):
            lx = P[HEEL_X] if k == 0 else P[TOE_X]
            _leg_point(q, qd, P, side, 3, lx, -P[ANKLE_H], J, out)
            c = 2 * side + k
            pos[c, 0] = out[0]
            pos[c, 1] = out[1]
            for i in range(2):
                s = 0.0
                for j in range(NDOF):
                    Jc[c, i, j] = J[i, j]
                    s += J[i, j] * qd[j]
                vel[c, i] = s


@njit(cache=True)
def substep(q, qd, tau, P, jp, edges, levels, n_edges, dt, forces, grf, ws_M, ws_h, ws_J, ws_out,
            ws_Jc, ws_pc, ws_vc, ws_A, ws_b, ws_x):
    """Advance (q, qd) in place by one semi-implicit Euler step.

    ``forces`` (4, 4) receives per contact point (normal force, tangential
    force, normal x, normal z); ``grf`` (2,) the vertical force per foot.
    Returns 0 on success, 1 on divergence.
    """
    M = ws_M
    h = ws_h
    mass_matrix_and_bias(q, qd, P, jp, M, h, ws_J, ws_out)
    contact_points(q, qd, P, ws_pc, ws_vc, ws_Jc)

    Qf = np.empty(NDOF)
    for i in range(NDOF):
        Qf[i] = -h[i]
    for j in range(6):
        qj = q[3 + j]
        lim = 0.0
        if qj < jp[LOWER, j]:
            lim = P[K_LIM] * (jp[LOWER, j] - qj)
        elif qj > jp[UPPER, j]:
            lim = P[K_LIM] * (jp[UPPER, j] - qj)
        Qf[3 + j] += tau[j] + lim

    kc = P[K_C]
    cc = P[C_C]
    ct = P[C_T]
    mu = P[MU]
    pen = np.zeros(NCONTACT)
    nrm = np.zeros((NCONTACT, 2))
    Jn = np.zeros((NCONTACT, NDOF))
    Jt = np.zeros((NCONTACT, NDOF))
    mode = np.zeros(NCONTACT, dtype=np.int64)  # 0 off, 1 stick, 2 slide
    sgn = np.zeros(NCONTACT)
    for c in range(NCONTACT):
        d, nx, nz = terrain_penetration(ws_pc[c, 0], ws_pc[c, 1], edges, levels, n_edges)
        pen[c] = d
        nrm[c, 0] = nx
        nrm[c, 1] = nz
        tx = nz
        tz = -nx
        for j in range(NDOF):
            Jn[c, j] = nx * ws_Jc[c, 0, j] + nz * ws_Jc[c, 1, j]
            Jt[c, j] = tx * ws_Jc[c, 0, j] + tz * ws_Jc[c, 1, j]
        if d > 0.0:
            mode[c] = 1

    x = ws_x
    for _it in range(10):
        for i in range(NDOF):
            s = 0.0
            for j in range(NDOF):
                ws_A[i, j] = M[i, j]
                s += M[i, j] * qd[j]
            ws_b[i] = s + dt * Qf[i]
        for j in range(6):
            ws_A[3 + j, 3 + j] += dt * P[J_DAMP]
        for c in range(NCONTACT):
            if mode[c] == 0:
                continue
            for i in range(NDOF):
                ws_b[i] += dt * kc * pen[c] * Jn[c, i]
                for j in range(NDOF):
                    ws_A[i, j] += dt * cc * Jn[c, i] * Jn[c, j]
            if mode[c] == 1:
                for i in range(NDOF):
                    for j in range(NDOF):
                        ws_A[i, j] += dt * ct * Jt[c, i] * Jt[c, j]
            else:
                f = mu * sgn[c]
                for i in range(NDOF):
                    ws_b[i] -= dt * f * kc * pen[c] * Jt[c, i]
                    for j in range(NDOF):
                        ws_A[i, j] -= dt * f * cc * Jt[c, i] * Jn[c, j]
        _solve(ws_A, ws_b, x)
        changed = False
        for c in range(NCONTACT):
            if mode[c] == 0:
                continue
            vn = 0.0
            vt = 0.0
            for j in range(NDOF):
                vn += Jn[c, j] * x[j]
                vt += Jt[c, j] * x[j]
            fn = kc * pen[c] - cc * vn
            if fn < 0.0:
                mode[c] = 0
                changed = True
            elif mode[c] == 1:
                ft = -ct * vt
                if abs(ft) > mu * fn:
                    mode[c] = 2
                    sgn[c] = 1.0 if vt > 0.0 else -1.0
                    changed = True
            elif vt * sgn[c] < 0.0:
                mode[c] = 1
                changed = True
        if not changed:
            break

    grf[0] = 0.0
    grf[1] = 0.0
    for c in range(NCONTACT):
        fn = 0.0
        ft = 0.0
        if mode[c] != 0:
            vn = 0.0
            vt = 0.0
            for j in range(NDOF):
                vn += Jn[c, j] * x[j]
                vt += Jt[c, j] * x[j]
            fn = kc * pen[c] - cc * vn
            if fn < 0.0:
                fn = 0.0
            if mode[c] == 1:
                ft = -ct * vt
            else:
                ft = -mu * sgn[c] * fn
            # the loop may stop on its iteration cap; never report outside the cone
            lim = mu * fn
            if ft > lim:
                ft = lim
            elif ft < -lim:
                ft = -lim
        forces[c, 0] = fn
        forces[c, 1] = ft
        forces[c, 2] = nrm[c, 0]
        forces[c, 3] = nrm[c, 1]
        # vertical component of n*fn + t*ft with t = (nz, -nx)
        grf[c // 2] += nrm[c, 1] * fn - nrm[c, 0] * ft

    status = 0
    for i in range(NDOF):
        v = x[i]
        if not math.isfinite(v) or abs(v) > P[MAX_SPEED]:
            status = 1
        qd[i] = v
        q[i] += dt * v
        if not math.isfinite(q[i]):
            status = 1
    return status


@njit(cache=True)
def pd_inline(qdes, q, qd, jp, tau):
    for j in range(6):
        t = jp[KP, j] * (qdes[j] - q[3 + j]) - jp[KD, j] * qd[3 + j]
        lim = jp[TAU_LIM, j]
        if t > lim:
            t = lim
        elif t < -lim:
            t = -lim
        tau[j] = t


@njit(cache=True)
def skeleton(q, P, pts):
    """Joint positions (10, 2): hip, head, then per leg knee, ankle, heel, toe."""
    a0 = q[2]
    pts[0, 0] = q[0]
    pts[0, 1] = q[1]
    pts[1, 0] = q[0] + P[TORSO_L] * math.sin(a0)
    pts[1, 1] = q[1] + P[TORSO_L] * math.cos(a0)
    for side in range(2):
        b = 3 + 3 * side
        a1 = a0 + q[b]
        a2 = a1 + q[b + 1]
        a3 = a2 + q[b + 2]
        kx = q[0] - P[THIGH_L] * math.sin(a1)
        kz = q[1] - P[THIGH_L] * math.cos(a1)
        ax = kx - P[SHANK_L] * math.sin(a2)
        az = kz - P[SHANK_L] * math.cos(a2)
        c, s = math.cos(a3), math.sin(a3)
        hz = -P[ANKLE_H]
        o = 2 + 4 * side
        pts[o, 0] = kx
        pts[o, 1] = kz
        pts[o + 1, 0] = ax
        pts[o + 1, 1] = az
        pts[o + 2, 0] = ax + P[HEEL_X] * c + hz * s
        pts[o + 2, 1] = az - P[HEEL_X] * s + hz * c
        pts[o + 3, 0] = ax + P[TOE_X] * c + hz * s
        pts[o + 3, 1] = az - P[TOE_X] * s + hz * c


@njit(cache=True)
def _cross(ax, az, bx, bz, cx, cz):
    return (bx - ax) * (cz - az) - (bz - az) * (cx - ax)


@njit(cache=True)
def _segments_cross(p1x, p1z, p2x, p2z, p3x, p3z, p4x, p4z):
    d1 = _cross(p3x, p3z, p4x, p4z, p1x, p1z)
    d2 = _cross(p3x, p3z, p4x, p4z, p2x, p2z)
    d3 = _cross(p1x, p1z, p2x, p2z, p3x, p3z)
    d4 = _cross(p1x, p1z, p2x, p2z, p4x, p4z)
    return d1 * d2 < 0.0 and d3 * d4 < 0.0


@njit(cache=True)
def self_collision(q, P):
    """True when a foot crosses its own thigh or the torso, or a shank crosses the torso."""
    pts = np.empty((10, 2))
    skeleton(q, P, pts)
    hx, hz = pts[0, 0], pts[0, 1]
    tx, tz = pts[1, 0], pts[1, 1]
    for side in range(2):
        o = 2 + 4 * side
        kx, kz = pts[o, 0], pts[o, 1]
        ax, az = pts[o + 1, 0], pts[o + 1, 1]
        ex, ez = pts[o + 2, 0], pts[o + 2, 1]
        fx, fz = pts[o + 3, 0], pts[o + 3, 1]
        if _segments_cross(ex, ez, fx, fz, hx, hz, kx, kz):
            return True
        if _segments_cross(ex, ez, fx, fz, hx, hz, tx, tz):
            return True
        if _segments_cross(kx, kz, ax, az, hx, hz, tx, tz):
            return True
    return False


@njit(cache=True)
def control_steps(Q, QD, QDES, jp, P, edges, levels, n_edges, n_sub, dt,
                  grf_out, tau_out, coll_out, status_out, fmax_out):
    """Run ``n_sub`` PD + physics substeps for every row of a batch in place.

    ``grf_out`` and ``tau_out`` receive substep means.  ``fmax_out`` (B, 2)
    records the largest normal force and the largest |F_t| / (mu F_n) ratio
    seen, for diagnostics.  Rows with non-zero ``status_out`` are skipped.
    """
    B = Q.shape[0]
    M = np.empty((NDOF, NDOF))
    h = np.empty(NDOF)
    J = np.empty((2, NDOF))
    out = np.empty(4)
    Jc = np.empty((NCONTACT, 2, NDOF))
    pc = np.empty((NCONTACT, 2))
    vc = np.empty((NCONTACT, 2))
    A = np.empty((NDOF, NDOF))
    bb = np.empty(NDOF)
    x = np.empty(NDOF)
    tau = np.empty(6)
    forces = np.empty((NCONTACT, 4))
    grf = np.empty(2)
    mu = P[MU]
    for e in range(B):
        grf_out[e, 0] = 0.0
        grf_out[e, 1] = 0.0
        for j in range(6):
            tau_out[e, j] = 0.0
        if status_out[e] != 0:
            continue
        q = Q[e]
        qd = QD[e]
        for s in range(n_sub):
            pd_inline(QDES[e], q, qd, jp, tau)
            st = substep(q, qd, tau, P, jp, edges[e], levels[e], n_edges[e], dt, forces, grf,
                         M, h, J, out, Jc, pc, vc, A, bb, x)
            grf_out[e, 0] += grf[0]
            grf_out[e, 1] += grf[1]
            for j in range(6):
                tau_out[e, j] += tau[j]
            for c in range(NCONTACT):
                fn = forces[c, 0]
                if fn > fmax_out[e, 0]:
                    fmax_out[e, 0] = fn
                if fn > 0.0:
                    r = abs(forces[c, 1]) / (mu * fn)
                    if r > fmax_out[e, 1]:
                        fmax_out[e, 1] = r
            if st != 0:
                status_out[e] = 1
                break
        grf_out[e, 0] /= n_sub
        grf_out[e, 1] /= n_sub
        for j in range(6):
            tau_out[e, j] /= n_sub
        if status_out[e] == 0 and self_collision(q, P):
            coll_out[e] = True


@njit(cache=True)
def physics_step_kernel(q, qd, tau, P, jp, edges, levels, n_edges, dt, forces, grf):
    M = np.empty((NDOF, NDOF))
    h = np.empty(NDOF)
    J = np.empty((2, NDOF))
    out = np.empty(4)
    Jc = np.empty((NCONTACT, 2, NDOF))
    pc = np.empty((NCONTACT, 2))
    vc = np.empty((NCONTACT, 2))
    A = np.empty((NDOF, NDOF))
    bb = np.empty(NDOF)
    x = np.empty(NDOF)
    return substep(q, qd, tau, P, jp, edges, levels, n_edges, dt, forces, grf,
                   M, h, J, out, Jc, pc, vc, A, bb, x)


@njit(cache=True)
def energy(q, qd, P, jp):
    """Kinetic + gravitational + joint-limit spring energy (zero potential at z = 0)."""
    M = np.empty((NDOF, NDOF))
    h = np.empty(NDOF)
    J = np.empty((2, NDOF))
    out = np.empty(4)
    mass_matrix_and_bias(q, qd, P, jp, M, h, J, out)
    ke = 0.0
    for i in range(NDOF):
        for j in range(NDOF):
            ke += 0.5 * qd[i] * M[i, j] * qd[j]
    g = P[GRAV]
    pe = P[TORSO_M] * g * (q[1] + P[TORSO_C] * math.cos(q[2]))
    for side in range(2):
        _leg_point(q, qd, P, side, 1, 0.0, -P[THIGH_C], J, out)
        pe += P[THIGH_M] * g * out[1]
        _leg_point(q, qd, P, side, 2, 0.0, -P[SHANK_C], J, out)
        pe += P[SHANK_M] * g * out[1]
        _leg_point(q, qd, P, side, 3, P[FOOT_CX], P[FOOT_CZ], J, out)
        pe += P[FOOT_M] * g * out[1]
    for j in range(6):
        over = 0.0
        if q[3 + j] < jp[LOWER, j]:
            over = jp[LOWER, j] - q[3 + j]
        elif q[3 + j] > jp[UPPER, j]:
            over = q[3 + j] - jp[UPPER, j]
        pe += 0.5 * P[K_LIM] * over * over
    return ke + pe


@njit(cache=True)
def foot_kinematics(q, qd, P, out):
    """Per foot sole-center (x, z, vx, vz) into ``out`` (2, 4)."""
    J = np.empty((2, NDOF))
    o = np.empty(4)
    lx = 0.5 * (P[HEEL_X] + P[TOE_X])
    for side in range(2):
        _leg_point(q, qd, P, side, 3, lx, -P[ANKLE_H], J, o)
        out[side, 0] = o[0]
        out[side, 1] = o[1]
        vx = 0.0
        vz = 0.0
        for j in range(NDOF):
            vx += J[0, j] * qd[j]
            vz += J[1, j] * qd[j]
        out[side, 2] = vx
        out[side, 3] = vz


@njit(cache=True)
def batch_readouts(Q, QD, P, feet_out, low_out):
    """Sole-center kinematics (B, 2, 4) and the lowest heel/toe height (B,)."""
    pts = np.empty((10, 2))
    for e in range(Q.shape[0]):
        foot_kinematics(Q[e], QD[e], P, feet_out[e])
        skeleton(Q[e], P, pts)
        low = pts[4, 1]
        for k in (5, 8, 9):
            if pts[k, 1] < low:
                low = pts[k, 1]
        low_out[e] = low


def joint_params(model) -> np.ndarray:
    """(6, 6) per-joint parameter table in the row order ARM..TAU_LIM."""
    return np.stack([
        model.per_joint("armature"),
        model.per_joint("joint_lower"),
        model.per_joint("joint_upper"),
        model.per_joint("kp"),
        model.per_joint("kd"),
        model.per_joint("torque_limit"),
    ])
