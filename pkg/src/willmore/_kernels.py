"""Numba kernels: single-layer panel integrals and field evaluation.

Parallelism is over observation points / matrix rows only; each point's
panel sum runs sequentially, so results are independent of thread count.
fastmath stays off to keep summation IEEE-reproducible.
"""
import numpy as np
from numba import njit, prange

# Degree-5 symmetric 7-point rule on the triangle (weights sum to 1).
_A1, _B1, _W1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
_A2, _B2, _W2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
TRI_RULE_BARY = np.array([
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
TRI_RULE_W = np.array([0.225, _W1, _W1, _W1, _W2, _W2, _W2])

# Degree-2 midpoint rule used once a panel is many diameters away.
TRI_RULE3_BARY = np.array([
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
])
TRI_RULE3_W = np.array([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])

# A panel farther than FAR_RATIO diameters uses the 3-point rule.
FAR_RATIO = 12.0


@njit(cache=True)
def _panel_one_over_r(px, py, pz, tri):
    """Exact integral of 1/|x - y| dS(y) over a flat triangle.

    Edge-wise closed form with a solid-angle correction; valid for any
    observation point, including points in the triangle plane (w = 0).
    """
    e1x = tri[1, 0] - tri[0, 0]
    e1y = tri[1, 1] - tri[0, 1]
    e1z = tri[1, 2] - tri[0, 2]
    e2x = tri[2, 0] - tri[0, 0]
    e2y = tri[2, 1] - tri[0, 1]
    e2z = tri[2, 2] - tri[0, 2]
    nx = e1y * e2z - e1z * e2y
    ny = e1z * e2x - e1x * e2z
    nz = e1x * e2y - e1y * e2x
    nn = np.sqrt(nx * nx + ny * ny + nz * nz)
    nx /= nn
    ny /= nn
    nz /= nn
    w = (px - tri[0, 0]) * nx + (py - tri[0, 1]) * ny + (pz - tri[0, 2]) * nz
    aw = abs(w)

    total_log = 0.0
    total_atan = 0.0
    for k in range(3):
        ax = tri[k, 0]
        ay = tri[k, 1]
        az = tri[k, 2]
        k2 = (k + 1) % 3
        bx = tri[k2, 0]
        by = tri[k2, 1]
        bz = tri[k2, 2]
        sx = bx - ax
        sy = by - ay
        sz = bz - az
        sn = np.sqrt(sx * sx + sy * sy + sz * sz)
        sx /= sn
        sy /= sn
        sz /= sn
        # outward in-plane edge normal m = s x n
        mx = sy * nz - sz * ny
        my = sz * nx - sx * nz
        mz = sx * ny - sy * nx
        lm = (ax - px) * sx + (ay - py) * sy + (az - pz) * sz
        lp = lm + sn
        Rm = np.sqrt((px - ax) ** 2 + (py - ay) ** 2 + (pz - az) ** 2)
        Rp = np.sqrt((px - bx) ** 2 + (py - by) ** 2 + (pz - bz) ** 2)
        d = (ax - px) * mx + (ay - py) * my + (az - pz) * mz
        R02 = d * d + w * w

        if lp + lm > 0.0:
            den = Rm + lm
            L = np.log((Rp + lp) / den) if den > 0.0 else 0.0
        else:
            den = Rp - lp
            L = np.log((Rm - lm) / den) if den > 0.0 else 0.0
        total_log += d * L
        total_atan += (np.arctan2(d * lp, R02 + aw * Rp)
                       - np.arctan2(d * lm, R02 + aw * Rm))
    return total_log - aw * total_atan


@njit(cache=True, parallel=True)
def assemble_single_layer(obs, tris):
    """Collocation matrix A[i, j] = int_{panel j} 1/|x_i - y| dS(y)."""
    P = obs.shape[0]
    Q = tris.shape[0]
    A = np.empty((P, Q))
    for i in prange(P):
        px = obs[i, 0]
        py = obs[i, 1]
        pz = obs[i, 2]
        for j in range(Q):
            A[i, j] = _panel_one_over_r(px, py, pz, tris[j])
    return A


@njit(cache=True)
def _rule_contrib(px, py, pz, st, weight, want_hess, nq, out):
    """Add one (sub)triangle's quadrature contribution (nq = 3 or 7 points).

    st holds the corners as a flat row (x0 y0 z0 x1 y1 z1 x2 y2 z2 ...).
    out accumulates (u, gx, gy, gz, hxx, hyy, hzz, hxy, hxz, hyz) scaled by
    `weight`; each quadrature point uses exact kernel derivatives, so the
    accumulated Hessian is trace-free to round-off.
    """
    e1x = st[3] - st[0]
    e1y = st[4] - st[1]
    e1z = st[5] - st[2]
    e2x = st[6] - st[0]
    e2y = st[7] - st[1]
    e2z = st[8] - st[2]
    cx = e1y * e2z - e1z * e2y
    cy = e1z * e2x - e1x * e2z
    cz = e1x * e2y - e1y * e2x
    area = 0.5 * np.sqrt(cx * cx + cy * cy + cz * cz)
    for q in range(nq):
        if nq == 3:
            l0 = TRI_RULE3_BARY[q, 0]
            l1 = TRI_RULE3_BARY[q, 1]
            l2 = TRI_RULE3_BARY[q, 2]
            wq = weight * area * TRI_RULE3_W[q]
        else:
            l0 = TRI_RULE_BARY[q, 0]
            l1 = TRI_RULE_BARY[q, 1]
            l2 = TRI_RULE_BARY[q, 2]
            wq = weight * area * TRI_RULE_W[q]
        yx = l0 * st[0] + l1 * st[3] + l2 * st[6]
        yy = l0 * st[1] + l1 * st[4] + l2 * st[7]
        yz = l0 * st[2] + l1 * st[5] + l2 * st[8]
        dx = px - yx
        dy = py - yy
        dz = pz - yz
        r2 = dx * dx + dy * dy + dz * dz
        r = np.sqrt(r2)
        inv_r = 1.0 / r
        inv_r3 = inv_r / r2
        out[0] += wq * inv_r
        out[1] -= wq * dx * inv_r3
        out[2] -= wq * dy * inv_r3
        out[3] -= wq * dz * inv_r3
        if want_hess:
            inv_r5 = inv_r3 / r2
            out[4] += wq * (3.0 * dx * dx - r2) * inv_r5
            out[5] += wq * (3.0 * dy * dy - r2) * inv_r5
            out[6] += wq * (3.0 * dz * dz - r2) * inv_r5
            out[7] += wq * 3.0 * dx * dy * inv_r5
            out[8] += wq * 3.0 * dx * dz * inv_r5
            out[9] += wq * 3.0 * dy * dz * inv_r5


@njit(cache=True)
def _panel_accumulate(px, py, pz, tri, weight, theta, max_depth, want_hess,
                      stack, out):
    """Rule contribution of one panel, subdividing while the observation
    point is closer than theta times the (sub)triangle diameter; panels
    beyond FAR_RATIO diameters drop to the 3-point rule."""
    for k in range(3):
        for c in range(3):
            stack[0, 3 * k + c] = tri[k, c]
    stack[0, 9] = 0.0
    ns = 1
    while ns > 0:
        ns -= 1
        row = ns
        depth = stack[row, 9]
        ccx = (stack[row, 0] + stack[row, 3] + stack[row, 6]) / 3.0
        ccy = (stack[row, 1] + stack[row, 4] + stack[row, 7]) / 3.0
        ccz = (stack[row, 2] + stack[row, 5] + stack[row, 8]) / 3.0
        d2 = (px - ccx) ** 2 + (py - ccy) ** 2 + (pz - ccz) ** 2
        e01 = ((stack[row, 3] - stack[row, 0]) ** 2
               + (stack[row, 4] - stack[row, 1]) ** 2
               + (stack[row, 5] - stack[row, 2]) ** 2)
        e12 = ((stack[row, 6] - stack[row, 3]) ** 2
               + (stack[row, 7] - stack[row, 4]) ** 2
               + (stack[row, 8] - stack[row, 5]) ** 2)
        e20 = ((stack[row, 0] - stack[row, 6]) ** 2
               + (stack[row, 1] - stack[row, 7]) ** 2
               + (stack[row, 2] - stack[row, 8]) ** 2)
        diam2 = max(e01, max(e12, e20))
        if depth < max_depth and d2 < theta * theta * diam2:
            x0 = stack[row, 0]
            y0 = stack[row, 1]
            z0 = stack[row, 2]
            x1 = stack[row, 3]
            y1 = stack[row, 4]
            z1 = stack[row, 5]
            x2 = stack[row, 6]
            y2 = stack[row, 7]
            z2 = stack[row, 8]
            m01x = 0.5 * (x0 + x1)
            m01y = 0.5 * (y0 + y1)
            m01z = 0.5 * (z0 + z1)
            m12x = 0.5 * (x1 + x2)
            m12y = 0.5 * (y1 + y2)
            m12z = 0.5 * (z1 + z2)
            m20x = 0.5 * (x2 + x0)
            m20y = 0.5 * (y2 + y0)
            m20z = 0.5 * (z2 + z0)
            stack[ns, 0] = x0
            stack[ns, 1] = y0
            stack[ns, 2] = z0
            stack[ns, 3] = m01x
            stack[ns, 4] = m01y
            stack[ns, 5] = m01z
            stack[ns, 6] = m20x
            stack[ns, 7] = m20y
            stack[ns, 8] = m20z
            stack[ns, 9] = depth + 1.0
            ns += 1
            stack[ns, 0] = m01x
            stack[ns, 1] = m01y
            stack[ns, 2] = m01z
            stack[ns, 3] = x1
            stack[ns, 4] = y1
            stack[ns, 5] = z1
            stack[ns, 6] = m12x
            stack[ns, 7] = m12y
            stack[ns, 8] = m12z
            stack[ns, 9] = depth + 1.0
            ns += 1
            stack[ns, 0] = m20x
            stack[ns, 1] = m20y
            stack[ns, 2] = m20z
            stack[ns, 3] = m12x
            stack[ns, 4] = m12y
            stack[ns, 5] = m12z
            stack[ns, 6] = x2
            stack[ns, 7] = y2
            stack[ns, 8] = z2
            stack[ns, 9] = depth + 1.0
            ns += 1
            stack[ns, 0] = m01x
            stack[ns, 1] = m01y
            stack[ns, 2] = m01z
            stack[ns, 3] = m12x
            stack[ns, 4] = m12y
            stack[ns, 5] = m12z
            stack[ns, 6] = m20x
            stack[ns, 7] = m20y
            stack[ns, 8] = m20z
            stack[ns, 9] = depth + 1.0
            ns += 1
        else:
            nq = 3 if d2 > FAR_RATIO * FAR_RATIO * diam2 else 7
            _rule_contrib(px, py, pz, stack[row], weight, want_hess, nq, out)


@njit(cache=True, parallel=True)
def eval_fields(points, tris, sigma, theta, max_depth, want_hess):
    """u, Du (and optionally D2u) of the single layer at exterior points.

    Returns (P, 10): u, gx, gy, gz, hxx, hyy, hzz, hxy, hxz, hyz; the last
    six stay zero when want_hess is False.
    """
    P = points.shape[0]
    Q = tris.shape[0]
    result = np.zeros((P, 10))
    cap = 4 + 3 * (max_depth + 1)
    for i in prange(P):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        out = np.zeros(10)
        stack = np.empty((cap, 10))
        for j in range(Q):
            _panel_accumulate(px, py, pz, tris[j], sigma[j], theta, max_depth,
                              want_hess, stack, out)
        for c in range(10):
            result[i, c] = out[c]
    return result


@njit(cache=True, parallel=True)
def eval_u_analytic(points, tris, sigma):
    """Potential only, via the exact panel integrals (assembly-consistent)."""
    P = points.shape[0]
    Q = tris.shape[0]
    u = np.zeros(P)
    for i in prange(P):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        acc = 0.0
        for j in range(Q):
            acc += sigma[j] * _panel_one_over_r(px, py, pz, tris[j])
        u[i] = acc
    return u
