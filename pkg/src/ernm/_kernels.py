"""Compiled Metropolis-Hastings core shared by the full and conditional
samplers.

The chain state lives in flat numpy arrays; all hot-path work (proposals,
incremental statistic updates, hypergeometric centering lookups, seed-count
mechanism weights) runs under numba.  The centering expectations are cached
in lazily filled tables keyed by (degree profile, group size), so a lookup
is O(1) after first use.

Statistic bookkeeping per move:

* dyad toggle (i, j): edge count; for each homophily variable, the two
  endpoint terms (their same-group partner count and centering change).
* attribute change (node: a -> b): group counts; for the changed variable,
  the node's own homophily term, the sqrt terms of its neighbours in groups
  a/b, and the centering of every node in groups a/b (their group size
  moved).  Undirected chains aggregate that last sum over a degree
  histogram, so the cost is O(max degree), not O(n).

Seed-count mechanisms (biased-seed and positive contact tracing) enter the
acceptance ratio through the infected-population count only; feasibility
vetoes are a per-node boolean mask.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NEG_INF = -np.inf
_DIR_CAP = 96  # dense centering cache limit for directed networks


# ---------------------------------------------------------------------------
# centering expectations (numba side)


@njit(cache=True, inline="always")
def _lchoose(lgam, a, b):
    return lgam[a] - lgam[b] - lgam[a - b]


@njit(cache=True)
def _e_sqrt_hyp(lgam, n_pop, n_success, n_draw):
    if n_draw <= 0 or n_success <= 0:
        return 0.0
    lo = n_draw + n_success - n_pop
    if lo < 0:
        lo = 0
    hi = n_success if n_success < n_draw else n_draw
    denom = _lchoose(lgam, n_pop, n_draw)
    total = 0.0
    for a in range(lo, hi + 1):
        lp = _lchoose(lgam, n_success, a) + _lchoose(lgam, n_pop - n_success, n_draw - a) - denom
        total += math.exp(lp) * math.sqrt(a)
    return total


@njit(cache=True)
def _e_sqrt_biv(lgam, n_pop, d2, d1, n_draw):
    if n_draw <= 0 or (d2 + d1) == 0:
        return 0.0
    rest = n_pop - d2 - d1
    denom = _lchoose(lgam, n_pop, n_draw)
    total = 0.0
    amax = d2 if d2 < n_draw else n_draw
    for a in range(0, amax + 1):
        bmax = n_draw - a
        if d1 < bmax:
            bmax = d1
        for b in range(0, bmax + 1):
            c = n_draw - a - b
            if c > rest:
                continue
            lp = (
                _lchoose(lgam, d2, a)
                + _lchoose(lgam, d1, b)
                + _lchoose(lgam, rest, c)
                - denom
            )
            total += math.exp(lp) * math.sqrt(2 * a + b)
    return total


@njit(cache=True, inline="always")
def _e_und(etab, lgam, n, d, nk):
    # E(sqrt same-group partners) for an undirected node of degree d whose
    # group holds nk nodes (itself included).
    if nk <= 1 or d == 0:
        return 0.0
    v = etab[d, nk]
    if not np.isnan(v):
        return v
    v = _e_sqrt_hyp(lgam, n - 1, d, nk - 1)
    etab[d, nk] = v
    return v


@njit(cache=True, inline="always")
def _e_dir(et3, lgam, n, cap, d2, d1, nk):
    if nk <= 1 or (d2 + d1) == 0:
        return 0.0
    if d2 > cap or d1 > cap:
        return _e_sqrt_biv(lgam, n - 1, d2, d1, nk - 1)
    idx = (d2 * (cap + 1) + d1) * (n + 1) + nk
    v = et3[idx]
    if not np.isnan(v):
        return v
    v = _e_sqrt_biv(lgam, n - 1, d2, d1, nk - 1)
    et3[idx] = v
    return v


@njit(cache=True, inline="always")
def _seed_logweight(lgam, n, n_inf, si, smi):
    # log[(n_i - s_i)!/n_i!] + log[(n_-i - s_-i)!/n_-i!], -inf if impossible
    if n_inf < si or (n - n_inf) < smi:
        return NEG_INF
    return (lgam[n_inf - si] - lgam[n_inf]) + (lgam[n - n_inf - smi] - lgam[n - n_inf])


# ---------------------------------------------------------------------------
# incremental statistic deltas


@njit(cache=True)
def _delta_dyad(
    i, j, adj, x, gsz, cnt, deg, d2, d1, directed,
    hompos, edges_pos, sq, etab, et3, lgam, n, cap, dg,
):
    dg[:] = 0.0
    add = adj[i, j] == 0
    dm = 1 if add else -1
    if edges_pos >= 0:
        dg[edges_pos] = float(dm)
    nvar = x.shape[1]
    for v in range(nvar):
        hp = hompos[v]
        if hp < 0:
            continue
        xi = x[i, v]
        xj = x[j, v]
        acc = 0.0
        if xj == xi:
            acc += sq[cnt[v, i, xj] + dm] - sq[cnt[v, i, xj]]
            acc += sq[cnt[v, j, xi] + dm] - sq[cnt[v, j, xi]]
        if directed:
            m_old = adj[i, j] + adj[j, i]
            d2i, d1i = d2[i], d1[i]
            d2j, d1j = d2[j], d1[j]
            if add:
                if m_old == 0:
                    nd2i, nd1i, nd2j, nd1j = d2i, d1i + 1, d2j, d1j + 1
                else:
                    nd2i, nd1i, nd2j, nd1j = d2i + 1, d1i - 1, d2j + 1, d1j - 1
            else:
                if m_old == 1:
                    nd2i, nd1i, nd2j, nd1j = d2i, d1i - 1, d2j, d1j - 1
                else:
                    nd2i, nd1i, nd2j, nd1j = d2i - 1, d1i + 1, d2j - 1, d1j + 1
            acc -= _e_dir(et3, lgam, n, cap, nd2i, nd1i, gsz[v, xi]) - _e_dir(
                et3, lgam, n, cap, d2i, d1i, gsz[v, xi]
            )
            acc -= _e_dir(et3, lgam, n, cap, nd2j, nd1j, gsz[v, xj]) - _e_dir(
                et3, lgam, n, cap, d2j, d1j, gsz[v, xj]
            )
        else:
            acc -= _e_und(etab, lgam, n, deg[i] + dm, gsz[v, xi]) - _e_und(
                etab, lgam, n, deg[i], gsz[v, xi]
            )
            acc -= _e_und(etab, lgam, n, deg[j] + dm, gsz[v, xj]) - _e_und(
                etab, lgam, n, deg[j], gsz[v, xj]
            )
        dg[hp] = acc


@njit(cache=True)
def _apply_dyad(
    i, j, adj, x, cnt, deg, d2, d1, directed, hist, maxdeg, g, dg,
):
    add = adj[i, j] == 0
    dm = 1 if add else -1
    nvar = x.shape[1]
    if directed:
        m_old = adj[i, j] + adj[j, i]
        if add:
            if m_old == 0:
                d1[i] += 1
                d1[j] += 1
            else:
                d2[i] += 1
                d1[i] -= 1
                d2[j] += 1
                d1[j] -= 1
        else:
            if m_old == 1:
                d1[i] -= 1
                d1[j] -= 1
            else:
                d2[i] -= 1
                d1[i] += 1
                d2[j] -= 1
                d1[j] += 1
        adj[i, j] = 1 if add else 0
    else:
        for v in range(nvar):
            pass
        # histogram bins move with the degree
        for v in range(nvar):
            hist[v, x[i, v], deg[i]] -= 1
            hist[v, x[j, v], deg[j]] -= 1
        deg[i] += dm
        deg[j] += dm
        for v in range(nvar):
            hist[v, x[i, v], deg[i]] += 1
            hist[v, x[j, v], deg[j]] += 1
        if deg[i] > maxdeg[0]:
            maxdeg[0] = deg[i]
        if deg[j] > maxdeg[0]:
            maxdeg[0] = deg[j]
        adj[i, j] = 1 if add else 0
        adj[j, i] = adj[i, j]
    for v in range(nvar):
        cnt[v, i, x[j, v]] += dm
        cnt[v, j, x[i, v]] += dm
    for t in range(g.shape[0]):
        g[t] += dg[t]


@njit(cache=True)
def _delta_attr(
    node, v, lnew, adj, x, gsz, cnt, deg, d2, d1, directed,
    hompos, gcpos, sq, etab, et3, lgam, n, cap,
    nbr, nbr_cnt, hist, maxdeg, dg,
):
    dg[:] = 0.0
    lold = x[node, v]
    p = gcpos[v, lold]
    if p >= 0:
        dg[p] = -1.0
    p = gcpos[v, lnew]
    if p >= 0:
        dg[p] = 1.0
    hp = hompos[v]
    if hp < 0:
        return
    sz_old = gsz[v, lold]
    sz_new = gsz[v, lnew]
    acc = sq[cnt[v, node, lnew]] - sq[cnt[v, node, lold]]
    if directed:
        acc -= _e_dir(et3, lgam, n, cap, d2[node], d1[node], sz_new + 1) - _e_dir(
            et3, lgam, n, cap, d2[node], d1[node], sz_old
        )
        # every other member of the two groups sees its group size change
        for other in range(n):
            if other == node:
                continue
            lo = x[other, v]
            if lo == lold:
                acc -= _e_dir(et3, lgam, n, cap, d2[other], d1[other], sz_old - 1) - _e_dir(
                    et3, lgam, n, cap, d2[other], d1[other], sz_old
                )
            elif lo == lnew:
                acc -= _e_dir(et3, lgam, n, cap, d2[other], d1[other], sz_new + 1) - _e_dir(
                    et3, lgam, n, cap, d2[other], d1[other], sz_new
                )
    else:
        acc -= _e_und(etab, lgam, n, deg[node], sz_new + 1) - _e_und(
            etab, lgam, n, deg[node], sz_old
        )
        top = maxdeg[0]
        for d in range(1, top + 1):
            c = hist[v, lold, d]
            if c > 0:
                acc -= c * (_e_und(etab, lgam, n, d, sz_old - 1) - _e_und(etab, lgam, n, d, sz_old))
            c = hist[v, lnew, d]
            if c > 0:
                acc -= c * (_e_und(etab, lgam, n, d, sz_new + 1) - _e_und(etab, lgam, n, d, sz_new))
        # the histogram still holds `node` in the lold row; undo its share
        dnode = deg[node]
        if dnode > 0:
            acc += _e_und(etab, lgam, n, dnode, sz_old - 1) - _e_und(etab, lgam, n, dnode, sz_old)
    # neighbours in the two groups gain/lose a same-group partner
    for t in range(nbr_cnt[node]):
        j = nbr[node, t]
        lj = x[j, v]
        if lj != lold and lj != lnew:
            continue
        m = adj[node, j] + adj[j, node] if directed else adj[node, j]
        c = cnt[v, j, lj]
        if lj == lold:
            acc += sq[c - m] - sq[c]
        else:
            acc += sq[c + m] - sq[c]
    dg[hp] = acc


@njit(cache=True)
def _apply_attr(
    node, v, lnew, adj, x, gsz, cnt, deg, directed,
    nbr, nbr_cnt, hist, g, dg,
):
    lold = x[node, v]
    for t in range(nbr_cnt[node]):
        j = nbr[node, t]
        m = adj[node, j] + adj[j, node] if directed else adj[node, j]
        cnt[v, j, lold] -= m
        cnt[v, j, lnew] += m
    gsz[v, lold] -= 1
    gsz[v, lnew] += 1
    if not directed:
        hist[v, lold, deg[node]] -= 1
        hist[v, lnew, deg[node]] += 1
    x[node, v] = lnew
    for t in range(g.shape[0]):
        g[t] += dg[t]


@njit(cache=True)
def _nbr_add(nbr, nbr_cnt, i, j):
    nbr[i, nbr_cnt[i]] = j
    nbr_cnt[i] += 1


@njit(cache=True)
def _nbr_remove(nbr, nbr_cnt, i, j):
    c = nbr_cnt[i]
    for t in range(c):
        if nbr[i, t] == j:
            nbr[i, t] = nbr[i, c - 1]
            nbr_cnt[i] = c - 1
            return


# ---------------------------------------------------------------------------
# main chain


@njit(cache=True, nogil=True)
def run_chain(
    gen,
    # schedule
    burnin, n_samples, thin, p_dyad, fixed_counts,
    # proposal spaces
    ud_i, ud_j, ua_node, ua_var,
    # state
    adj, x, gsz, cnt, deg, d2, d1, directed,
    nbr, nbr_cnt, hist, maxdeg,
    # statistic encoding
    eta, g, hompos, gcpos, edges_pos,
    # tables
    sq, etab, et3, lgam,
    # mechanism
    mech_active, mvar, inf_level, si, smi, must_uninf, n_inf0,
    # recording
    out_g, out_lw, out_ninf, store_x, out_x,
    record_codes, code_counts, dyad_bit, attr_bit,
    acc_counts,
):
    n = adj.shape[0]
    q = eta.shape[0]
    n_ud = ud_i.shape[0]
    n_ua = ua_node.shape[0]
    dg = np.zeros(q)
    dg2 = np.zeros(q)
    n_inf = n_inf0
    code = np.uint64(0)
    if record_codes:
        for a in range(n):
            for b in range(n):
                if adj[a, b] == 1 and dyad_bit[a, b] >= 0:
                    code ^= np.uint64(1) << np.uint64(dyad_bit[a, b])
        for a in range(n):
            for vv in range(x.shape[1]):
                if x[a, vv] == 1 and attr_bit[a, vv] >= 0:
                    code ^= np.uint64(1) << np.uint64(attr_bit[a, vv])
    total = burnin + n_samples * thin
    sample_at = burnin + thin - 1
    m = 0
    for step in range(total):
        do_dyad = False
        if n_ud > 0 and n_ua > 0:
            do_dyad = gen.random() < p_dyad
        elif n_ud > 0:
            do_dyad = True
        if do_dyad:
            acc_counts[1] += 1
            idx = gen.integers(0, n_ud)
            i = ud_i[idx]
            j = ud_j[idx]
            _delta_dyad(
                i, j, adj, x, gsz, cnt, deg, d2, d1, directed,
                hompos, edges_pos, sq, etab, et3, lgam, n, _DIR_CAP, dg,
            )
            dlp = 0.0
            for t in range(q):
                dlp += eta[t] * dg[t]
            if dlp >= 0.0 or gen.random() < math.exp(dlp):
                _apply_dyad(i, j, adj, x, cnt, deg, d2, d1, directed, hist, maxdeg, g, dg)
                if adj[i, j] == 1:
                    _nbr_add(nbr, nbr_cnt, i, j)
                    _nbr_add(nbr, nbr_cnt, j, i)
                elif not directed or adj[j, i] == 0:
                    _nbr_remove(nbr, nbr_cnt, i, j)
                    _nbr_remove(nbr, nbr_cnt, j, i)
                else:
                    # directed removal with the reverse arc still present
                    if adj[i, j] == 0 and adj[j, i] == 0:
                        _nbr_remove(nbr, nbr_cnt, i, j)
                        _nbr_remove(nbr, nbr_cnt, j, i)
                acc_counts[0] += 1
                if record_codes and dyad_bit[i, j] >= 0:
                    code ^= np.uint64(1) << np.uint64(dyad_bit[i, j])
        elif n_ua > 0:
            acc_counts[3] += 1
            if fixed_counts:
                # label swap between two attribute slots of the same variable
                ia = gen.integers(0, n_ua)
                ib = gen.integers(0, n_ua)
                if ia != ib:
                    a = ua_node[ia]
                    b = ua_node[ib]
                    v = ua_var[ia]
                    la = x[a, v]
                    lb = x[b, v]
                    if la != lb:
                        ok = True
                        if mech_active and v == mvar:
                            if must_uninf[a] == 1 and lb == inf_level:
                                ok = False
                            if must_uninf[b] == 1 and la == inf_level:
                                ok = False
                        if ok:
                            _delta_attr(
                                a, v, lb, adj, x, gsz, cnt, deg, d2, d1, directed,
                                hompos, gcpos, sq, etab, et3, lgam, n, _DIR_CAP,
                                nbr, nbr_cnt, hist, maxdeg, dg,
                            )
                            _apply_attr(a, v, lb, adj, x, gsz, cnt, deg, directed,
                                        nbr, nbr_cnt, hist, g, dg)
                            _delta_attr(
                                b, v, la, adj, x, gsz, cnt, deg, d2, d1, directed,
                                hompos, gcpos, sq, etab, et3, lgam, n, _DIR_CAP,
                                nbr, nbr_cnt, hist, maxdeg, dg2,
                            )
                            dlp = 0.0
                            for t in range(q):
                                dlp += eta[t] * (dg[t] + dg2[t])
                            if dlp >= 0.0 or gen.random() < math.exp(dlp):
                                _apply_attr(b, v, la, adj, x, gsz, cnt, deg, directed,
                                            nbr, nbr_cnt, hist, g, dg2)
                                acc_counts[2] += 1
                            else:
                                # undo the first half
                                _delta_attr(
                                    a, v, la, adj, x, gsz, cnt, deg, d2, d1, directed,
                                    hompos, gcpos, sq, etab, et3, lgam, n, _DIR_CAP,
                                    nbr, nbr_cnt, hist, maxdeg, dg2,
                                )
                                _apply_attr(a, v, la, adj, x, gsz, cnt, deg, directed,
                                            nbr, nbr_cnt, hist, g, dg2)
                    else:
                        acc_counts[2] += 1
                else:
                    acc_counts[2] += 1
            else:
                idx = gen.integers(0, n_ua)
                node = ua_node[idx]
                v = ua_var[idx]
                mlev_v = cnt.shape[2]
                lnew = int(gen.integers(0, gsz_levels(gsz, v)))
                lold = x[node, v]
                if lnew == lold:
                    acc_counts[2] += 1
                else:
                    reject = False
                    dninf = 0
                    if mvar >= 0 and v == mvar:
                        if lnew == inf_level:
                            dninf = 1
                        elif lold == inf_level:
                            dninf = -1
                    if mech_active and v == mvar:
                        if dninf == 1 and must_uninf[node] == 1:
                            reject = True
                    dlw = 0.0
                    if mech_active and dninf != 0 and not reject:
                        lw_new = _seed_logweight(lgam, n, n_inf + dninf, si, smi)
                        lw_old = _seed_logweight(lgam, n, n_inf, si, smi)
                        if lw_new == NEG_INF:
                            reject = True
                        else:
                            dlw = lw_new - lw_old
                    if not reject:
                        _delta_attr(
                            node, v, lnew, adj, x, gsz, cnt, deg, d2, d1, directed,
                            hompos, gcpos, sq, etab, et3, lgam, n, _DIR_CAP,
                            nbr, nbr_cnt, hist, maxdeg, dg,
                        )
                        dlp = dlw
                        for t in range(q):
                            dlp += eta[t] * dg[t]
                        if dlp >= 0.0 or gen.random() < math.exp(dlp):
                            _apply_attr(node, v, lnew, adj, x, gsz, cnt, deg, directed,
                                        nbr, nbr_cnt, hist, g, dg)
                            n_inf += dninf
                            acc_counts[2] += 1
                            if record_codes and attr_bit[node, v] >= 0:
                                code ^= np.uint64(1) << np.uint64(attr_bit[node, v])
        if record_codes and step >= burnin:
            code_counts[code] += 1
        if step == sample_at:
            for t in range(q):
                out_g[m, t] = g[t]
            out_ninf[m] = n_inf
            if mech_active:
                out_lw[m] = _seed_logweight(lgam, n, n_inf, si, smi)
            if store_x:
                for a in range(n):
                    for vv in range(x.shape[1]):
                        out_x[m, a, vv] = x[a, vv]
            m += 1
            sample_at += thin
    return n_inf


@njit(cache=True, inline="always")
def gsz_levels(gsz, v):
    # number of levels of variable v = length of its group-size row that is
    # in use; encoded as trailing -1 sentinel-free: store level count in
    # gsz[v, -1]? Instead the caller packs level counts into the last column.
    return gsz[v, gsz.shape[1] - 1]
