"""Numba hot loops: counter-based RNG, exact thinning, backward-MC slices, wealth paths.

Randomness is counter-based (splitmix64 finaliser over a keyed counter), so
every (stream key, counter) pair yields the same uniform on any thread
schedule; the Python mirror of the key derivation lives in ``_rng``.
Grid surfaces are passed as one flat value array plus per-slice offsets and
node counts, which keeps the kernels free of Python object handling.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

U64 = np.uint64
_GOLDEN = U64(0x9E3779B97F4A7C15)
_MIX_A = U64(0xBF58476D1CE4E5B9)
_MIX_B = U64(0x94D049BB133111EB)
_STREAM = U64(0xC2B2AE3D27D4EB4F)
_INV53 = 1.1102230246251565e-16  # 2**-53

STATUS_OK = 0
STATUS_STEP_TOO_LARGE = 1
STATUS_SINGULAR = 2
STATUS_BLOWUP = 1
STATUS_EVENT_CAP = 2

LAW_TWO_POINT = 0
LAW_UNIFORM = 1
LAW_LOGNORMAL = 2
LAW_CONSTANT = 3


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> U64(30))) * _MIX_A
    z = (z ^ (z >> U64(27))) * _MIX_B
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def _derive(key, index):
    return _mix64((key ^ ((U64(index) + U64(1)) * _STREAM)) + _GOLDEN)


@njit(cache=True, inline="always")
def _u01(key, counter):
    return (_mix64(key + U64(counter) * _GOLDEN) >> U64(11)) * _INV53


# ---------------------------------------------------------------------------
# point-process simulation
# ---------------------------------------------------------------------------


@njit(cache=True)
def hawkes_thinning(lam0, lam_inf, alpha, beta, horizon, key, cap):
    """Exact event times/marks on [0, horizon] by Ogata thinning.

    Between events every component decays monotonically towards its
    reversion level, so ``sum_l max(lam_l, lam_inf_l)`` dominates the total
    intensity on the whole inter-event interval and the bound is exact.
    Returns (times, marks, overflowed).
    """
    m = lam0.shape[0]
    size = 256
    times = np.empty(size, np.float64)
    marks = np.empty(size, np.int64)
    lam = lam0.copy()
    t = 0.0
    n = 0
    ctr = 0
    overflow = False
    while True:
        bound = 0.0
        for l in range(m):
            hi = lam[l] if lam[l] > lam_inf[l] else lam_inf[l]
            bound += hi
        if bound <= 0.0:
            break
        u = _u01(key, ctr)
        ctr += 1
        wait = -np.log(1.0 - u) / bound
        t += wait
        if t >= horizon:
            break
        tot = 0.0
        for l in range(m):
            lam[l] = lam_inf[l] + (lam[l] - lam_inf[l]) * np.exp(-alpha[l] * wait)
            tot += lam[l]
        u = _u01(key, ctr)
        ctr += 1
        if u * bound <= tot:
            if n == cap:
                overflow = True
                break
            u = _u01(key, ctr)
            ctr += 1
            target = u * tot
            comp = m - 1
            acc = 0.0
            for l in range(m):
                acc += lam[l]
                if target < acc:
                    comp = l
                    break
            if n == size:
                new_times = np.empty(size * 2, np.float64)
                new_marks = np.empty(size * 2, np.int64)
                new_times[:size] = times
                new_marks[:size] = marks
                times = new_times
                marks = new_marks
                size *= 2
            times[n] = t
            marks[n] = comp
            n += 1
            for l in range(m):
                lam[l] += beta[l, comp]
    return times[:n].copy(), marks[:n].copy(), overflow


@njit(cache=True)
def euler_bernoulli_path(lam0, lam_inf, alpha, beta, dt, n_steps, key):
    """One grid path of the Euler scheme with Bernoulli jump indicators.

    Jump probability per component and step is ``lam_l * dt``; at most one
    jump per component per step, materialising in the intensity at the next
    grid time.  Returns (grid_intensity, event_times, event_marks, ok);
    ``ok`` is False when some ``lam_l * dt`` exceeded one.
    """
    m = lam0.shape[0]
    grid = np.empty((n_steps + 1, m))
    lam = lam0.copy()
    jump = np.empty(m, np.bool_)
    size = 64
    times = np.empty(size, np.float64)
    marks = np.empty(size, np.int64)
    n = 0
    ctr = 0
    ok = True
    for k in range(n_steps):
        for l in range(m):
            grid[k, l] = lam[l]
        for l in range(m):
            p = lam[l] * dt
            if p > 1.0:
                ok = False
            u = _u01(key, ctr)
            ctr += 1
            jump[l] = u < p
        if not ok:
            break
        for l in range(m):
            nxt = lam[l] + alpha[l] * (lam_inf[l] - lam[l]) * dt
            for j in range(m):
                if jump[j]:
                    nxt += beta[l, j]
            lam[l] = nxt
        for j in range(m):
            if jump[j]:
                if n == size:
                    new_times = np.empty(size * 2, np.float64)
                    new_marks = np.empty(size * 2, np.int64)
                    new_times[:size] = times
                    new_marks[:size] = marks
                    times = new_times
                    marks = new_marks
                    size *= 2
                times[n] = (k + 1) * dt
                marks[n] = j
                n += 1
    if ok:
        for l in range(m):
            grid[n_steps, l] = lam[l]
    return grid, times[:n].copy(), marks[:n].copy(), ok


# ---------------------------------------------------------------------------
# interpolation on per-slice uniform grids
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _interp1(values, off, n, lam_lo, inv_dlam, x):
    pos = (x - lam_lo) * inv_dlam
    if pos <= 0.0:
        return values[off]
    i = int(pos)
    if i >= n - 1:
        return values[off + n - 1]
    w = pos - i
    return values[off + i] * (1.0 - w) + values[off + i + 1] * w


@njit(cache=True, inline="always")
def _interp2(values, off, n1, n2, lam_lo, inv_dlam, x1, x2):
    p1 = (x1 - lam_lo) * inv_dlam
    p2 = (x2 - lam_lo) * inv_dlam
    if p1 <= 0.0:
        i1 = 0
        w1 = 0.0
    else:
        i1 = int(p1)
        if i1 >= n1 - 1:
            i1 = n1 - 2
            w1 = 1.0
        else:
            w1 = p1 - i1
    if p2 <= 0.0:
        i2 = 0
        w2 = 0.0
    else:
        i2 = int(p2)
        if i2 >= n2 - 1:
            i2 = n2 - 2
            w2 = 1.0
        else:
            w2 = p2 - i2
    base = off + i1 * n2 + i2
    v00 = values[base]
    v01 = values[base + 1]
    v10 = values[base + n2]
    v11 = values[base + n2 + 1]
    return (v00 * (1.0 - w1) * (1.0 - w2) + v01 * (1.0 - w1) * w2
            + v10 * w1 * (1.0 - w2) + v11 * w1 * w2)


@njit(cache=True, inline="always")
def _solve_small(a, b, x):
    """Gaussian elimination with partial pivoting for tiny systems.

    Destroys ``a`` and ``b``; returns False on a vanishing pivot.
    """
    k = b.shape[0]
    for col in range(k):
        piv = col
        big = abs(a[col, col])
        for row in range(col + 1, k):
            mag = abs(a[row, col])
            if mag > big:
                big = mag
                piv = row
        if big <= 0.0 or not np.isfinite(big):
            return False
        if piv != col:
            for c in range(k):
                tmp = a[col, c]
                a[col, c] = a[piv, c]
                a[piv, c] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        inv = 1.0 / a[col, col]
        for row in range(col + 1, k):
            f = a[row, col] * inv
            if f != 0.0:
                for c in range(col, k):
                    a[row, c] -= f * a[col, c]
                b[row] -= f * b[col]
    for row in range(k - 1, -1, -1):
        s = b[row]
        for c in range(row + 1, k):
            s -= a[row, c] * x[c]
        x[row] = s / a[row, row]
    return True


# ---------------------------------------------------------------------------
# backward Monte Carlo slices
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def solve_slice_m1k1(i_slice, n_nodes, n_slices, n_paths, dt, lam_lo, dlam,
                     alpha, lam_inf, beta, ssq, bprem, cj1, cj2,
                     ns, offsets, values, slice_key, crn, trapezoid,
                     out_mean, out_se, out_status):
    """One time slice of the backward recursion, single component and asset.

    For each grid node, average over ``n_paths`` intensity paths the
    running quadratic cost integral, reading the surface only from
    already-solved later slices (the integration node at the launch time
    reads the next slice, keeping the scheme explicit).  ``cj1`` is
    ``J * E[Z]`` and ``cj2`` is ``J^2 * E[Z^2]``.
    """
    inv_dlam = 1.0 / dlam
    last = n_slices if trapezoid else n_slices - 1
    for j in prange(n_nodes):
        lam_start = lam_lo + j * dlam
        node_key = slice_key if crn else _derive(slice_key, j)
        s1 = 0.0
        s2 = 0.0
        status = 0
        for p in range(n_paths):
            pkey = _derive(node_key, p)
            lam = lam_start
            acc = 0.0
            ctr = 0
            for k in range(i_slice, last):
                es = k if k > i_slice else i_slice + 1
                off = offsets[es]
                n_es = ns[es, 0]
                g0 = _interp1(values, off, n_es, lam_lo, inv_dlam, lam)
                g1 = _interp1(values, off, n_es, lam_lo, inv_dlam, lam + beta)
                ratio = g1 / g0 - 1.0
                gam = ssq + (ratio + 1.0) * lam * cj2
                zh = bprem + lam * cj1 * ratio
                f = g0 * zh * zh / gam
                if trapezoid and (k == i_slice or k == n_slices - 1):
                    acc += 0.5 * f * dt
                else:
                    acc += f * dt
                if k < n_slices - 1:
                    p_jump = lam * dt
                    if p_jump > 1.0:
                        status = STATUS_STEP_TOO_LARGE
                    u = _u01(pkey, ctr)
                    ctr += 1
                    lam += alpha * (lam_inf - lam) * dt
                    if u < p_jump:
                        lam += beta
            val = 1.0 - acc
            s1 += val
            s2 += val * val
        mean = s1 / n_paths
        var = s2 / n_paths - mean * mean
        if var < 0.0:
            var = 0.0
        out_mean[j] = mean
        out_se[j] = np.sqrt(var / n_paths)
        out_status[j] = status


@njit(cache=True, parallel=True)
def solve_slice_general(i_slice, n_nodes, n_slices, n_paths, dt, lam_lo, dlam,
                        alpha, lam_inf, beta, ssq, bprem, jmat, ez, ez2,
                        ns, offsets, values, slice_key, crn, trapezoid,
                        out_mean, out_se, out_status):
    """General-slice version: one or two jump components, any small k."""
    m = alpha.shape[0]
    kk = bprem.shape[0]
    inv_dlam = 1.0 / dlam
    last = n_slices if trapezoid else n_slices - 1
    for j in prange(n_nodes):
        lam_start = np.empty(m)
        if m == 1:
            lam_start[0] = lam_lo + j * dlam
        else:
            n2 = ns[i_slice, 1]
            lam_start[0] = lam_lo + (j // n2) * dlam
            lam_start[1] = lam_lo + (j % n2) * dlam
        node_key = slice_key if crn else _derive(slice_key, j)
        lam = np.empty(m)
        ratio = np.empty(m)
        jump = np.empty(m, np.bool_)
        gam = np.empty((kk, kk))
        zh = np.empty(kk)
        zh_work = np.empty(kk)
        w = np.empty(kk)
        s1 = 0.0
        s2 = 0.0
        status = 0
        for p in range(n_paths):
            pkey = _derive(node_key, p)
            for l in range(m):
                lam[l] = lam_start[l]
            acc = 0.0
            ctr = 0
            for k in range(i_slice, last):
                es = k if k > i_slice else i_slice + 1
                off = offsets[es]
                if m == 1:
                    g0 = _interp1(values, off, ns[es, 0], lam_lo, inv_dlam, lam[0])
                    g1 = _interp1(values, off, ns[es, 0], lam_lo, inv_dlam,
                                  lam[0] + beta[0, 0])
                    ratio[0] = g1 / g0 - 1.0
                else:
                    g0 = _interp2(values, off, ns[es, 0], ns[es, 1], lam_lo,
                                  inv_dlam, lam[0], lam[1])
                    for l in range(m):
                        gs = _interp2(values, off, ns[es, 0], ns[es, 1], lam_lo,
                                      inv_dlam, lam[0] + beta[0, l],
                                      lam[1] + beta[1, l])
                        ratio[l] = gs / g0 - 1.0
                for a in range(kk):
                    zh[a] = bprem[a]
                    for b in range(kk):
                        gam[a, b] = ssq[a, b]
                for l in range(m):
                    c2 = (ratio[l] + 1.0) * lam[l] * ez2[l]
                    c1 = lam[l] * ez[l] * ratio[l]
                    for a in range(kk):
                        zh[a] += c1 * jmat[a, l]
                        for b in range(kk):
                            gam[a, b] += c2 * jmat[a, l] * jmat[b, l]
                for a in range(kk):
                    zh_work[a] = zh[a]
                if not _solve_small(gam, zh_work, w):
                    status = STATUS_SINGULAR
                    break
                quad = 0.0
                for a in range(kk):
                    quad += zh[a] * w[a]
                f = g0 * quad
                if trapezoid and (k == i_slice or k == n_slices - 1):
                    acc += 0.5 * f * dt
                else:
                    acc += f * dt
                if k < n_slices - 1:
                    for l in range(m):
                        p_jump = lam[l] * dt
                        if p_jump > 1.0:
                            status = STATUS_STEP_TOO_LARGE
                        u = _u01(pkey, ctr)
                        ctr += 1
                        jump[l] = u < p_jump
                    for l in range(m):
                        nxt = lam[l] + alpha[l] * (lam_inf[l] - lam[l]) * dt
                        for jj in range(m):
                            if jump[jj]:
                                nxt += beta[l, jj]
                        lam[l] = nxt
            val = 1.0 - acc
            s1 += val
            s2 += val * val
        mean = s1 / n_paths
        var = s2 / n_paths - mean * mean
        if var < 0.0:
            var = 0.0
        out_mean[j] = mean
        out_se[j] = np.sqrt(var / n_paths)
        out_status[j] = status


# ---------------------------------------------------------------------------
# forward wealth simulation
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _normal(key, ctr):
    u1 = _u01(key, ctr)
    u2 = _u01(key, ctr + 1)
    return np.sqrt(-2.0 * np.log(1.0 - u1)) * np.cos(6.283185307179586 * u2)


@njit(cache=True)
def _table_ratios(lam, t, beta, use_table, n_slices, dt_tab, lam_lo, inv_dlam,
                  ns, offsets, values, ratio):
    """Non-local ratio vector at (t, lam); zeros without a surface."""
    m = lam.shape[0]
    if not use_table:
        for l in range(m):
            ratio[l] = 0.0
        return
    s = int(t / dt_tab + 0.5)
    if s > n_slices - 1:
        s = n_slices - 1
    off = offsets[s]
    if m == 1:
        g0 = _interp1(values, off, ns[s, 0], lam_lo, inv_dlam, lam[0])
        g1 = _interp1(values, off, ns[s, 0], lam_lo, inv_dlam, lam[0] + beta[0, 0])
        ratio[0] = g1 / g0 - 1.0
    else:
        g0 = _interp2(values, off, ns[s, 0], ns[s, 1], lam_lo, inv_dlam,
                      lam[0], lam[1])
        for l in range(m):
            gs = _interp2(values, off, ns[s, 0], ns[s, 1], lam_lo, inv_dlam,
                          lam[0] + beta[0, l], lam[1] + beta[1, l])
            ratio[l] = gs / g0 - 1.0


@njit(cache=True)
def _portfolio(shifted_x, lam, ratio, ssq, bprem, jmat, ez, ez2, gam, zh, pi):
    """pi = -(Gamma^{-1} Zhat) * shifted_x; returns False on singular Gamma."""
    m = lam.shape[0]
    kk = bprem.shape[0]
    for a in range(kk):
        zh[a] = bprem[a]
        for b in range(kk):
            gam[a, b] = ssq[a, b]
    for l in range(m):
        c2 = (ratio[l] + 1.0) * lam[l] * ez2[l]
        c1 = lam[l] * ez[l] * ratio[l]
        for a in range(kk):
            zh[a] += c1 * jmat[a, l]
            for b in range(kk):
                gam[a, b] += c2 * jmat[a, l] * jmat[b, l]
    if not _solve_small(gam, zh, pi):
        return False
    for a in range(kk):
        pi[a] = -pi[a] * shifted_x
    return True


@njit(cache=True, parallel=True)
def wealth_terminal(n_paths, x0, r, horizon, dt_w, target_shift, event_cap,
                    lam0, lam_inf, alpha, beta,
                    ssq, sigma, bprem, jmat, ez, ez2,
                    law_id, law_a, law_b,
                    use_table, n_slices, dt_tab, lam_lo, dlam,
                    ns, offsets, values,
                    key_base, out_xt, out_status):
    """Terminal wealth under the feedback strategy, one entry per path.

    Integrates the discounted wealth (exact risk-free compounding) with an
    Euler step between exact Hawkes events; the jump-compensator drift is
    applied continuously and price jumps are applied at event times with
    freshly sampled marks.  Diffusion noise is aggregated to the single
    Gaussian increment of the scalar wealth.  Status: 0 ok, 1 blow-up,
    2 event-cap overflow.
    """
    m = lam0.shape[0]
    kk = bprem.shape[0]
    nn = sigma.shape[1]
    inv_dlam = 1.0 / dlam
    n_steps = int(horizon / dt_w + 0.5)
    for p in prange(n_paths):
        ev_key = _derive(_derive(key_base, 0), p)
        w_key = _derive(_derive(key_base, 1), p)
        times, marks, overflow = hawkes_thinning(lam0, lam_inf, alpha, beta,
                                                 horizon, ev_key, event_cap)
        if overflow:
            out_xt[p] = np.nan
            out_status[p] = STATUS_EVENT_CAP
            continue
        n_ev = times.shape[0]
        lam = lam0.copy()
        ratio = np.empty(m)
        gam = np.empty((kk, kk))
        zh = np.empty(kk)
        pi = np.empty(kk)
        xd = x0  # discounted wealth X(t) e^{-rt}
        t = 0.0
        ev = 0
        ctr = 0
        status = STATUS_OK
        for k in range(n_steps):
            t_grid = (k + 1) * dt_w
            if t_grid > horizon:
                t_grid = horizon
            while t < t_grid - 1e-14:
                has_event = ev < n_ev and times[ev] <= t_grid
                t_next = times[ev] if has_event else t_grid
                delta = t_next - t
                disc = np.exp(-r * t)
                x = xd / disc
                _table_ratios(lam, t, beta, use_table, n_slices, dt_tab,
                              lam_lo, inv_dlam, ns, offsets, values, ratio)
                shifted = x - target_shift * np.exp(-r * (horizon - t))
                if not _portfolio(shifted, lam, ratio, ssq, bprem, jmat, ez,
                                  ez2, gam, zh, pi):
                    status = STATUS_BLOWUP
                    break
                drift = 0.0
                dvol = 0.0
                for a in range(kk):
                    drift += pi[a] * bprem[a]
                for l in range(m):
                    comp = 0.0
                    for a in range(kk):
                        comp += pi[a] * jmat[a, l]
                    drift -= comp * ez[l] * lam[l]
                for jj in range(nn):
                    col = 0.0
                    for a in range(kk):
                        col += pi[a] * sigma[a, jj]
                    dvol += col * col
                dvol = np.sqrt(dvol)
                z = _normal(w_key, ctr)
                ctr += 2
                xd += disc * (drift * delta + dvol * np.sqrt(delta) * z)
                for l in range(m):
                    lam[l] = lam_inf[l] + (lam[l] - lam_inf[l]) * np.exp(-alpha[l] * delta)
                t = t_next
                if has_event:
                    comp_idx = marks[ev]
                    ev += 1
                    disc = np.exp(-r * t)
                    x = xd / disc
                    _table_ratios(lam, t, beta, use_table, n_slices, dt_tab,
                                  lam_lo, inv_dlam, ns, offsets, values, ratio)
                    shifted = x - target_shift * np.exp(-r * (horizon - t))
                    if not _portfolio(shifted, lam, ratio, ssq, bprem, jmat,
                                      ez, ez2, gam, zh, pi):
                        status = STATUS_BLOWUP
                        break
                    law = law_id[comp_idx]
                    if law == LAW_TWO_POINT:
                        u = _u01(w_key, ctr)
                        ctr += 1
                        zmark = law_a[comp_idx] if u < 0.5 else law_b[comp_idx]
                    elif law == LAW_UNIFORM:
                        u = _u01(w_key, ctr)
                        ctr += 1
                        zmark = law_a[comp_idx] + (law_b[comp_idx] - law_a[comp_idx]) * u
                    elif law == LAW_LOGNORMAL:
                        z = _normal(w_key, ctr)
                        ctr += 2
                        zmark = np.exp(law_a[comp_idx] + law_b[comp_idx] * z) - 1.0
                    else:
                        zmark = law_a[comp_idx]
                    jump_expo = 0.0
                    for a in range(kk):
                        jump_expo += pi[a] * jmat[a, comp_idx]
                    xd += disc * jump_expo * zmark
                    for l in range(m):
                        lam[l] += beta[l, comp_idx]
                if abs(xd) > 1e12:
                    status = STATUS_BLOWUP
                    break
            if status != STATUS_OK:
                break
        if status == STATUS_BLOWUP:
            out_xt[p] = np.nan
            out_status[p] = status
        else:
            out_xt[p] = xd * np.exp(r * horizon)
            out_status[p] = STATUS_OK
