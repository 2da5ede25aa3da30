"""JIT-compiled hot paths: coordinate samplers and the process step loop.

Every distribution family is an explicit transform of ``gen.random()``
uniform doubles, so the byte stream drawn from a given seed is a fixed,
documented function of the run configuration. Draws per coordinate:
uniform / bernoulli / cauchy / laplace / exponential / pareto /
finite-discrete 1, gaussian 2 (Box-Muller, uncached), cantor 1 (its
binary digits supply the i.i.d. ternary bits). A mixture with more than
one component consumes 1 extra selector draw per point.

The run loop consumes, per step: the K fresh sample draws, then one
uniform per candidate subset that ties the running minimum during the
lexicographic enumeration. Step 0 performs only the initial selection.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

FAM_UNIFORM = 0
FAM_GAUSSIAN = 1
FAM_BERNOULLI = 2
FAM_CAUCHY = 3
FAM_LAPLACE = 4
FAM_EXPONENTIAL = 5
FAM_PARETO = 6
FAM_CANTOR = 7
FAM_FINITE = 8

# params layout per family (padded with zeros to the table width):
#   uniform      [lo, hi]
#   gaussian     [mean, sd]
#   bernoulli    [p]
#   cauchy       [loc, scale]
#   laplace      [loc, scale]
#   exponential  [rate]
#   pareto       [alpha, scale]
#   cantor       [depth]
#   finite       [n_atoms, v_1..v_n, cum_1..cum_n]

STOP_BUDGET = 0
STOP_CONVERGED = 1
STOP_DIVERGED = 2


@njit(cache=True)
def cantor_coord(gen, depth):
    """Sum of b_k * 2/3^k, k=1..depth, with i.i.d. uniform bits b_k.

    The bits are the leading binary digits of one uniform draw, which
    are exactly i.i.d. fair bits for depth <= 52.
    """
    u = gen.random()
    val = 0.0
    t = 1.0
    for _ in range(depth):
        t /= 3.0
        u *= 2.0
        if u >= 1.0:
            u -= 1.0
            val += 2.0 * t
    return val


@njit(cache=True)
def _coord(gen, fam, par):
    if fam == FAM_UNIFORM:
        return par[0] + (par[1] - par[0]) * gen.random()
    elif fam == FAM_GAUSSIAN:
        u1 = gen.random()
        u2 = gen.random()
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        return par[0] + par[1] * r * math.cos(2.0 * math.pi * u2)
    elif fam == FAM_BERNOULLI:
        return 1.0 if gen.random() < par[0] else 0.0
    elif fam == FAM_CAUCHY:
        return par[0] + par[1] * math.tan(math.pi * (gen.random() - 0.5))
    elif fam == FAM_LAPLACE:
        u = gen.random()
        if u < 1e-300:  # keep log finite; probability ~2^-53 per draw
            u = 1e-300
        if u < 0.5:
            return par[0] + par[1] * math.log(2.0 * u)
        return par[0] - par[1] * math.log(2.0 * (1.0 - u))
    elif fam == FAM_EXPONENTIAL:
        return -math.log(1.0 - gen.random()) / par[0]
    elif fam == FAM_PARETO:
        return par[1] * math.pow(1.0 - gen.random(), -1.0 / par[0])
    elif fam == FAM_CANTOR:
        return cantor_coord(gen, int(par[0]))
    else:  # FAM_FINITE
        u = gen.random()
        n_atoms = int(par[0])
        for i in range(n_atoms):
            if u < par[1 + n_atoms + i]:
                return par[1 + i]
        return par[n_atoms]


@njit(cache=True)
def sample_point(gen, comp_cum, fam_tab, par_tab, out_row):
    """Draw one point into ``out_row``; returns nothing."""
    c = 0
    if comp_cum.shape[0] > 1:
        u = gen.random()
        c = comp_cum.shape[0] - 1
        for i in range(comp_cum.shape[0]):
            if u < comp_cum[i]:
                c = i
                break
    for j in range(out_row.shape[0]):
        out_row[j] = _coord(gen, fam_tab[c, j], par_tab[c, j])


@njit(cache=True)
def fill_samples(gen, comp_cum, fam_tab, par_tab, out):
    for i in range(out.shape[0]):
        sample_point(gen, comp_cum, fam_tab, par_tab, out[i])


@njit(cache=True)
def run_process(
    gen,
    pool,
    combos,
    kept_tab,
    comp_cum,
    fam_tab,
    par_tab,
    max_steps,
    tol_f,
    move_window,
    tol_move,
    diverge_radius,
    rec_f,
    rec_d,
    rec_mu,
    rec_changed,
    rec_rejected,
    rec_mindist,
    rec_ties,
):
    """Drive the process in place; returns (t_stop, stop_code, chosen).

    ``pool`` holds the current N-point configuration and is mutated; on
    return its rows indexed by ``kept_tab[chosen]`` are the final core.
    Record arrays must have length max_steps + 1; entries 0..t_stop are
    filled. Convergence requires a full quiet window: F below tol_f at a
    step t >= move_window with every recorded barycenter in the window
    within tol_move of the current one. Divergence uses the recorded
    statistics lower bound |mu'| - D > diverge_radius, which implies the
    whole core lies beyond the radius.
    """
    N, d = pool.shape
    C, K = combos.shape
    m = N - K
    mu = np.empty(d)
    tmp = np.empty((m, d))
    tol_move_sq = tol_move * tol_move
    pending_mindist = np.inf
    chosen = 0

    for t in range(max_steps + 1):
        # global pool moments; mu temporarily holds the coordinate sums
        tot_sq = 0.0
        for j in range(d):
            mu[j] = 0.0
        for i in range(N):
            for j in range(d):
                v = pool[i, j]
                mu[j] += v
                tot_sq += v * v

        # lexicographic enumeration with reservoir tie-breaking
        best = np.inf
        chosen = 0
        ties = 1
        for c in range(C):
            rs = 0.0
            for j in range(d):
                s = mu[j]
                for kk in range(K):
                    s -= pool[combos[c, kk], j]
                rs += s * s
            rem_sq = 0.0
            for kk in range(K):
                i = combos[c, kk]
                for j in range(d):
                    v = pool[i, j]
                    rem_sq += v * v
            g = (tot_sq - rem_sq) - rs / m
            if g < best:
                best = g
                chosen = c
                ties = 1
            elif g == best:
                ties += 1
                if gen.random() < 1.0 / ties:
                    chosen = c

        # core statistics, recomputed from scratch over the kept points
        for j in range(d):
            mu[j] = 0.0
        for kk in range(m):
            i = kept_tab[chosen, kk]
            for j in range(d):
                mu[j] += pool[i, j]
        for j in range(d):
            mu[j] /= m
        f = 0.0
        for kk in range(m):
            i = kept_tab[chosen, kk]
            for j in range(d):
                dx = pool[i, j] - mu[j]
                f += dx * dx
        dmax_sq = 0.0
        for a in range(m):
            ia = kept_tab[chosen, a]
            for b in range(a + 1, m):
                ib = kept_tab[chosen, b]
                s = 0.0
                for j in range(d):
                    dx = pool[ia, j] - pool[ib, j]
                    s += dx * dx
                if s > dmax_sq:
                    dmax_sq = s
        dd = math.sqrt(dmax_sq)

        rec_f[t] = f
        rec_d[t] = dd
        for j in range(d):
            rec_mu[t, j] = mu[j]
        rec_ties[t] = ties
        rec_mindist[t] = pending_mindist
        if t == 0:
            rec_changed[t] = 0
            rec_rejected[t] = 0
        elif chosen == C - 1:
            # last lexicographic removal is exactly the fresh rows
            rec_changed[t] = 0
            rec_rejected[t] = 1
        else:
            rec_changed[t] = 1
            rec_rejected[t] = 0

        stop = -1
        if f < tol_f and t >= move_window:
            ok = True
            for s_idx in range(t - move_window, t):
                dsq = 0.0
                for j in range(d):
                    dx = rec_mu[s_idx, j] - mu[j]
                    dsq += dx * dx
                if dsq >= tol_move_sq:
                    ok = False
                    break
            if ok:
                stop = STOP_CONVERGED
        if stop < 0:
            nrm = 0.0
            for j in range(d):
                nrm += mu[j] * mu[j]
            if math.sqrt(nrm) - dd > diverge_radius:
                stop = STOP_DIVERGED
        if stop < 0 and t == max_steps:
            stop = STOP_BUDGET
        if stop >= 0:
            return t, stop, chosen

        # next pool: kept points first (kept order), then K fresh draws
        for kk in range(m):
            i = kept_tab[chosen, kk]
            for j in range(d):
                tmp[kk, j] = pool[i, j]
        for kk in range(m):
            for j in range(d):
                pool[kk, j] = tmp[kk, j]
        for kk in range(K):
            sample_point(gen, comp_cum, fam_tab, par_tab, pool[m + kk])
        md_sq = np.inf
        for kk in range(K):
            for a in range(m):
                s = 0.0
                for j in range(d):
                    dx = pool[m + kk, j] - pool[a, j]
                    s += dx * dx
                if s < md_sq:
                    md_sq = s
        pending_mindist = math.sqrt(md_sq)

    return max_steps, STOP_BUDGET, chosen
