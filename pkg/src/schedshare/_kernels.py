"""Hot kernels for profile-space scans.

Everything here runs on int64 arrays: step costs are pre-scaled by a common
denominator so all share macro values are exact integers, micro ranks are
small integers, and "infinite" is the INF_MACRO sentinel. The same code
compiles under numba or runs as plain Python/numpy when the
``SCHEDSHARE_NO_JIT`` environment variable is set (the pure fallback path);
``benchmarks/bench_kernels.py`` compares the two.

Machine composition is summarized per profile as: load, disruptor count,
and the top-two priority ranks of disruptors and regulars on each machine.
Because shares are resource-aware, an agent's share on a machine depends
only on that machine's composition, which makes deviation checks O(1).

The static game data travels as one tuple ``gd``:
``(seg_ptr, seg_len, seg_cost, seg_cum, cap, phi, eps)`` — CSR segment
layout, scaled step costs, per-machine capacity, scaled cumulative costs,
and micro ranks, all int64.
"""

import os

import numpy as np

NUMBA_ENABLED = os.environ.get("SCHEDSHARE_NO_JIT", "").lower() not in (
    "1",
    "true",
    "yes",
)

if NUMBA_ENABLED:
    from numba import njit
else:  # pure-Python/numpy fallback

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


INF_MACRO = np.int64(1) << np.int64(62)
NOBODY = np.int64(1) << np.int64(60)

MECH_CAP = 0
MECH_STEP = 1
MECH_STOCH = 2


@njit(cache=True)
def _locate(j, load, seg_ptr, seg_cum):
    """CSR index of the segment holding `load` on machine j (load within capacity)."""
    for t in range(seg_ptr[j], seg_ptr[j + 1]):
        if load <= seg_cum[t]:
            return t
    return np.int64(-1)


@njit(cache=True)
def _share(mech, is_dis_i, rank_i, j, load, dcnt, dh1, dh2, rh1, rh2, gd, m1, m2, d_total):
    """Share (macro, micro) of one agent on machine j given j's composition.

    The composition (load, counts, top-two ranks) already includes the agent.
    """
    seg_ptr, seg_len, seg_cost, seg_cum, cap, phi, eps = gd
    if mech == MECH_CAP:
        t = seg_ptr[j]
        beta = cap[j]
        if is_dis_i:
            if load <= beta and dcnt == d_total and load > dcnt:
                return np.int64(0), eps[t]
            if load > beta and dcnt == 1:
                return np.int64(0), eps[t]
            return phi[t], np.int64(0)
        if load > beta:
            return INF_MACRO, np.int64(0)
        if rank_i != rh1:
            return np.int64(0), np.int64(0)
        if load == beta and dcnt == 0:
            return seg_cost[t], np.int64(0)
        return phi[t], np.int64(0)

    # step-function protocols: beyond the represented segments everyone is
    # charged infinity (the listed segments are the finite stand-in for a
    # total step function)
    if load > cap[j]:
        return INF_MACRO, np.int64(0)
    t = _locate(j, load, seg_ptr, seg_cum)
    first = seg_ptr[j]
    w = load - (seg_cum[t] - seg_len[t])
    if w == seg_len[t]:
        w = np.int64(0)

    if is_dis_i:
        if mech == MECH_STOCH:
            if (j == m1 or j == m2) and (w == 0 or w == seg_len[t] - 1) and dcnt == 1:
                return np.int64(0), np.int64(0)
            if w != 1 and dcnt >= 2 and load > dcnt and (rank_i == dh1 or rank_i == dh2):
                return np.int64(0), eps[t]
            if w == 1 and dcnt == 1 and t > first:
                return np.int64(0), eps[t - 1]
            return phi[t], np.int64(0)
        if w != 1 and dcnt == d_total and load > dcnt:
            return np.int64(0), eps[t]
        if w == 1 and dcnt == 1 and t > first:
            return np.int64(0), eps[t - 1]
        return phi[t], np.int64(0)

    # regular agents (same rule for both step protocols)
    if w == 0 and dcnt == 0 and rank_i == rh1:
        return seg_cost[t], np.int64(0)
    if w == 0 and dcnt > 0 and rank_i == rh1:
        return phi[t], np.int64(0)
    if w == 1 and (rank_i == rh1 or rank_i == rh2):
        return phi[t], np.int64(0)
    if w != 0 and w != 1 and rank_i == rh1:
        return phi[t], np.int64(0)
    return np.int64(0), np.int64(0)


@njit(cache=True)
def _stats(a, is_dis, m, loads, dcnt, dh1, dh2, rh1, rh2):
    """One pass over agents (already in priority order) summarizing each machine."""
    for j in range(m):
        loads[j] = 0
        dcnt[j] = 0
        dh1[j] = NOBODY
        dh2[j] = NOBODY
        rh1[j] = NOBODY
        rh2[j] = NOBODY
    for i in range(a.shape[0]):
        j = a[i]
        loads[j] += 1
        if is_dis[i]:
            dcnt[j] += 1
            if dh1[j] == NOBODY:
                dh1[j] = i
            elif dh2[j] == NOBODY:
                dh2[j] = i
        else:
            if rh1[j] == NOBODY:
                rh1[j] = i
            elif rh2[j] == NOBODY:
                rh2[j] = i


@njit(cache=True)
def _deviation_share(mech, i, di, j, loads, dcnt, dh1, dh2, rh1, rh2, gd, m1, m2, d_total):
    """Share agent i would pay after unilaterally joining machine j."""
    if di:
        if i < dh1[j]:
            h1, h2 = np.int64(i), dh1[j]
        elif i < dh2[j]:
            h1, h2 = dh1[j], np.int64(i)
        else:
            h1, h2 = dh1[j], dh2[j]
        return _share(
            mech, di, i, j, loads[j] + 1, dcnt[j] + 1, h1, h2, rh1[j], rh2[j],
            gd, m1, m2, d_total,
        )
    if i < rh1[j]:
        h1, h2 = np.int64(i), rh1[j]
    elif i < rh2[j]:
        h1, h2 = rh1[j], np.int64(i)
    else:
        h1, h2 = rh1[j], rh2[j]
    return _share(
        mech, di, i, j, loads[j] + 1, dcnt[j], dh1[j], dh2[j], h1, h2,
        gd, m1, m2, d_total,
    )


@njit(cache=True)
def _witness(mech, a, is_dis, m, loads, dcnt, dh1, dh2, rh1, rh2, gd, m1, m2, d_total):
    """(-1, -1) if no agent can strictly lower its share; else (agent, machine)."""
    n = a.shape[0]
    for i in range(n):
        j0 = a[i]
        di = is_dis[i]
        cm, cu = _share(
            mech, di, i, j0, loads[j0], dcnt[j0], dh1[j0], dh2[j0],
            rh1[j0], rh2[j0], gd, m1, m2, d_total,
        )
        for j in range(m):
            if j == j0:
                continue
            am, au = _deviation_share(
                mech, i, di, j, loads, dcnt, dh1, dh2, rh1, rh2, gd, m1, m2, d_total
            )
            if am < cm or (am == cm and au < cu):
                return np.int64(i), np.int64(j)
    return np.int64(-1), np.int64(-1)


@njit(cache=True)
def nash_witness(mech, a, is_dis, m, gd, m1, m2, d_total):
    loads = np.empty(m, np.int64)
    dcnt = np.empty(m, np.int64)
    dh1 = np.empty(m, np.int64)
    dh2 = np.empty(m, np.int64)
    rh1 = np.empty(m, np.int64)
    rh2 = np.empty(m, np.int64)
    _stats(a, is_dis, m, loads, dcnt, dh1, dh2, rh1, rh2)
    return _witness(mech, a, is_dis, m, loads, dcnt, dh1, dh2, rh1, rh2, gd, m1, m2, d_total)


@njit(cache=True)
def _charged(mech, a, is_dis, m, loads, dcnt, dh1, dh2, rh1, rh2, gd, m1, m2, d_total):
    """Total charged (macro, micro) over all agents; macro saturates at INF_MACRO."""
    macro = np.int64(0)
    micro = np.int64(0)
    inf = False
    for i in range(a.shape[0]):
        j = a[i]
        sm, su = _share(
            mech, is_dis[i], i, j, loads[j], dcnt[j], dh1[j], dh2[j],
            rh1[j], rh2[j], gd, m1, m2, d_total,
        )
        if sm >= INF_MACRO:
            inf = True
        else:
            macro += sm
            micro += su
    if inf:
        return INF_MACRO, np.int64(0)
    return macro, micro


@njit(cache=True)
def enumerate_pne_kernel(mech, n, m, is_dis, gd, m1, m2, d_total):
    """Scan all m**n profiles in lexicographic order; return PNE codes and charges."""
    loads = np.empty(m, np.int64)
    dcnt = np.empty(m, np.int64)
    dh1 = np.empty(m, np.int64)
    dh2 = np.empty(m, np.int64)
    rh1 = np.empty(m, np.int64)
    rh2 = np.empty(m, np.int64)
    a = np.zeros(n, np.int64)
    size = 64
    codes = np.empty(size, np.int64)
    cmac = np.empty(size, np.int64)
    cmic = np.empty(size, np.int64)
    found = 0
    total = np.int64(1)
    for _ in range(n):
        total *= m
    for code in range(total):
        _stats(a, is_dis, m, loads, dcnt, dh1, dh2, rh1, rh2)
        wi, _wj = _witness(
            mech, a, is_dis, m, loads, dcnt, dh1, dh2, rh1, rh2, gd, m1, m2, d_total
        )
        if wi < 0:
            if found == size:
                size *= 2
                nc = np.empty(size, np.int64)
                nm = np.empty(size, np.int64)
                nu = np.empty(size, np.int64)
                nc[:found] = codes[:found]
                nm[:found] = cmac[:found]
                nu[:found] = cmic[:found]
                codes, cmac, cmic = nc, nm, nu
            mac, mic = _charged(
                mech, a, is_dis, m, loads, dcnt, dh1, dh2, rh1, rh2, gd, m1, m2, d_total
            )
            codes[found] = code
            cmac[found] = mac
            cmic[found] = mic
            found += 1
        # odometer: last agent varies fastest, giving ascending lexicographic order
        for pos in range(n - 1, -1, -1):
            a[pos] += 1
            if a[pos] < m:
                break
            a[pos] = 0
    return codes[:found].copy(), cmac[:found].copy(), cmic[:found].copy()


@njit(cache=True)
def machine_cost_scaled(j, load, gd):
    """Scaled cost of machine j at the given load (INF_MACRO past capacity)."""
    seg_ptr, seg_len, seg_cost, seg_cum, cap, phi, eps = gd
    if load == 0:
        return np.int64(0)
    if load > cap[j]:
        return INF_MACRO
    return seg_cost[_locate(j, load, seg_ptr, seg_cum)]


@njit(cache=True)
def audit_profiles(mech, mat, is_dis, m, gd, m1, m2, d_total):
    """Budget and overcharge audit over a batch of assignment rows.

    Returns (budget violations, overcharge violations, first bad row index).
    A budget violation: some finite-cost machine collects less macro share
    than its cost, or an infinite-cost machine has no infinite share.
    An overcharge violation: total charged macro below total machine cost.
    """
    loads = np.empty(m, np.int64)
    dcnt = np.empty(m, np.int64)
    dh1 = np.empty(m, np.int64)
    dh2 = np.empty(m, np.int64)
    rh1 = np.empty(m, np.int64)
    rh2 = np.empty(m, np.int64)
    collected = np.empty(m, np.int64)
    has_inf = np.empty(m, np.int64)
    budget_bad = 0
    over_bad = 0
    first_bad = np.int64(-1)
    for row in range(mat.shape[0]):
        a = mat[row]
        _stats(a, is_dis, m, loads, dcnt, dh1, dh2, rh1, rh2)
        for j in range(m):
            collected[j] = 0
            has_inf[j] = 0
        for i in range(a.shape[0]):
            j = a[i]
            sm, _su = _share(
                mech, is_dis[i], i, j, loads[j], dcnt[j], dh1[j], dh2[j],
                rh1[j], rh2[j], gd, m1, m2, d_total,
            )
            if sm >= INF_MACRO:
                has_inf[j] = 1
            else:
                collected[j] += sm
        total_cost = np.int64(0)
        total_share = np.int64(0)
        cost_inf = False
        share_inf = False
        bad = False
        for j in range(m):
            c = machine_cost_scaled(j, loads[j], gd)
            if c >= INF_MACRO:
                cost_inf = True
                if has_inf[j] == 0:
                    bad = True
            else:
                total_cost += c
                if has_inf[j] == 0 and collected[j] < c:
                    bad = True
            if has_inf[j] == 1:
                share_inf = True
            else:
                total_share += collected[j]
        if bad:
            budget_bad += 1
            if first_bad < 0:
                first_bad = row
        if cost_inf:
            over = not share_inf
        else:
            over = (not share_inf) and total_share < total_cost
        if over:
            over_bad += 1
            if first_bad < 0:
                first_bad = row
    return budget_bad, over_bad, first_bad
