"""Compiled inner loops shared by :mod:`bayesqart.tree` and :mod:`bayesqart.sampler`.

A tree lives in a flat arena of two arrays: ``ints`` with shape ``(cap, 5)``
holding var / left / right / parent / depth per slot, and ``floats`` with
shape ``(cap, 2)`` holding the cut value and the leaf parameter.  Slot 0 is
always the root.  ``var == LEAF`` marks a leaf and ``var == FREE`` an unused
slot.  An ensemble is the same layout with a leading tree axis.
"""

import math

import numpy as np
from numba import njit

VAR, LEFT, RIGHT, PARENT, DEPTH = 0, 1, 2, 3, 4
CUT, MU = 0, 1
LEAF, FREE = -1, -2

GROW, PRUNE, SWAP, CHANGE = 0, 1, 2, 3
MOVE_NAMES = ("grow", "prune", "swap", "change")

NEG_INF = -np.inf


def empty_arena(cap: int, n_trees: int | None = None):
    shape = (cap,) if n_trees is None else (n_trees, cap)
    ints = np.full(shape + (5,), -1, dtype=np.int64)
    ints[..., VAR] = FREE
    floats = np.zeros(shape + (2,), dtype=np.float64)
    return ints, floats


# ---------------------------------------------------------------- structure


@njit(cache=True)
def p_split(depth, psi1, psi2):
    if depth == 0:
        return 1.0
    return psi1 / (1.0 + depth) ** psi2


@njit(cache=True)
def route(ints, floats, x):
    k = 0
    while ints[k, VAR] >= 0:
        if x[ints[k, VAR]] <= floats[k, CUT]:
            k = ints[k, LEFT]
        else:
            k = ints[k, RIGHT]
    return k


@njit(cache=True)
def route_rows(ints, floats, X, out):
    for i in range(X.shape[0]):
        out[i] = route(ints, floats, X[i])


@njit(cache=True)
def count_free(ints):
    c = 0
    for k in range(ints.shape[0]):
        if ints[k, VAR] == FREE:
            c += 1
    return c


@njit(cache=True)
def alloc(ints):
    for k in range(ints.shape[0]):
        if ints[k, VAR] == FREE:
            return k
    return -1


@njit(cache=True)
def grow_at(ints, floats, node, var, cut):
    """Split leaf ``node``; both children inherit its leaf parameter."""
    left = alloc(ints)
    ints[left, VAR] = LEAF
    right = alloc(ints)
    ints[right, VAR] = LEAF
    d = ints[node, DEPTH] + 1
    for c in (left, right):
        ints[c, LEFT] = -1
        ints[c, RIGHT] = -1
        ints[c, PARENT] = node
        ints[c, DEPTH] = d
        floats[c, CUT] = 0.0
        floats[c, MU] = floats[node, MU]
    ints[node, VAR] = var
    ints[node, LEFT] = left
    ints[node, RIGHT] = right
    floats[node, CUT] = cut
    return left, right


@njit(cache=True)
def prune_at(ints, floats, node):
    for c in (ints[node, LEFT], ints[node, RIGHT]):
        ints[c, VAR] = FREE
        ints[c, LEFT] = -1
        ints[c, RIGHT] = -1
        ints[c, PARENT] = -1
        ints[c, DEPTH] = -1
    ints[node, VAR] = LEAF
    ints[node, LEFT] = -1
    ints[node, RIGHT] = -1
    floats[node, CUT] = 0.0


@njit(cache=True)
def is_prunable(ints, k):
    if ints[k, VAR] < 0:
        return False
    return ints[ints[k, LEFT], VAR] == LEAF and ints[ints[k, RIGHT], VAR] == LEAF


@njit(cache=True)
def collect(ints, kind, out):
    """Fill ``out`` with slot indices of one kind; returns the count.

    kind 0: leaves, 1: internal nodes, 2: prunable nodes,
    3: internal nodes whose parent is also internal (swap children).
    """
    c = 0
    for k in range(ints.shape[0]):
        v = ints[k, VAR]
        if v == FREE:
            continue
        if kind == 0:
            hit = v == LEAF
        elif kind == 1:
            hit = v >= 0
        elif kind == 2:
            hit = is_prunable(ints, k)
        else:
            hit = v >= 0 and ints[k, PARENT] >= 0
        if hit:
            out[c] = k
            c += 1
    return c


@njit(cache=True)
def in_subtree(ints, leaf, node):
    k = leaf
    while k != -1:
        if k == node:
            return True
        k = ints[k, PARENT]
    return False


@njit(cache=True)
def node_rows(ints, leaf_of, node, out):
    """Training rows reaching ``node``; returns the count."""
    c = 0
    if ints[node, VAR] == LEAF:
        for i in range(leaf_of.shape[0]):
            if leaf_of[i] == node:
                out[c] = i
                c += 1
    else:
        for i in range(leaf_of.shape[0]):
            if in_subtree(ints, leaf_of[i], node):
                out[c] = i
                c += 1
    return c


# ---------------------------------------------------------------- rule menus


@njit(cache=True)
def var_varies(X, rows, n, v):
    if n < 2:
        return False
    first = X[rows[0], v]
    for t in range(1, n):
        if X[rows[t], v] != first:
            return True
    return False


@njit(cache=True)
def n_avail_vars(X, rows, n):
    c = 0
    for v in range(X.shape[1]):
        if var_varies(X, rows, n, v):
            c += 1
    return c


@njit(cache=True)
def nth_avail_var(X, rows, n, which):
    c = 0
    for v in range(X.shape[1]):
        if var_varies(X, rows, n, v):
            if c == which:
                return v
            c += 1
    return -1


@njit(cache=True)
def is_splittable(X, rows, n):
    if n < 2:
        return False
    for v in range(X.shape[1]):
        if var_varies(X, rows, n, v):
            return True
    return False


@njit(cache=True)
def cut_menu(X, rows, n, v, buf):
    """Distinct values of predictor ``v`` over ``rows`` minus the largest.

    Writes the sorted menu into ``buf`` and returns its length.
    """
    for t in range(n):
        buf[t] = X[rows[t], v]
    vals = np.sort(buf[:n])
    m = 0
    for t in range(n):
        if t == 0 or vals[t] != vals[t - 1]:
            buf[m] = vals[t]
            m += 1
    return m - 1


@njit(cache=True)
def menu_contains(buf, m, cut):
    lo, hi = 0, m
    while lo < hi:
        mid = (lo + hi) // 2
        if buf[mid] < cut:
            lo = mid + 1
        else:
            hi = mid
    return lo < m and buf[lo] == cut


@njit(cache=True)
def log_tree_prior(ints, floats, leaf_of, X, psi1, psi2):
    """Log probability of the tree under the generating process.

    An internal node contributes ``log p_split(d)`` plus the log of the
    uniform rule probability over its local menu.  A leaf contributes
    ``log(1 - p_split(d))`` when some valid split exists for its rows and 0
    otherwise.  Empty leaves and rules outside their local menu give -inf.
    """
    n = leaf_of.shape[0]
    rows = np.empty(n, dtype=np.int64)
    buf = np.empty(n, dtype=np.float64)
    total = 0.0
    for k in range(ints.shape[0]):
        v = ints[k, VAR]
        if v == FREE:
            continue
        cnt = node_rows(ints, leaf_of, k, rows)
        d = ints[k, DEPTH]
        if v == LEAF:
            if cnt == 0:
                return NEG_INF
            if is_splittable(X, rows, cnt):
                ps = p_split(d, psi1, psi2)
                if ps >= 1.0:
                    return NEG_INF
                total += math.log1p(-ps)
        else:
            if not var_varies(X, rows, cnt, v):
                return NEG_INF
            m = cut_menu(X, rows, cnt, v, buf)
            if not menu_contains(buf, m, floats[k, CUT]):
                return NEG_INF
            total += math.log(p_split(d, psi1, psi2))
            total -= math.log(n_avail_vars(X, rows, cnt)) + math.log(m)
    return total


# ---------------------------------------------------------------- likelihood


@njit(cache=True)
def leaf_term(A, B, c, s0):
    """Partition-dependent part of a leaf's log marginal likelihood."""
    den = c + s0 * B
    return 0.5 * math.log(c / den) + s0 * A * A / (2.0 * c * den)


@njit(cache=True)
def node_log_marginal(A, B, n, sum_log_nu, sum_w2_over_nu, c, s0):
    """Log of the leaf likelihood integrated against the N(0, s0) leaf prior.

    ``c`` is ``theta2_sq * phi`` and ``s0`` the prior variance.
    """
    return (
        -0.5 * n * math.log(2.0 * math.pi * c)
        - 0.5 * sum_log_nu
        - sum_w2_over_nu / (2.0 * c)
        + leaf_term(A, B, c, s0)
    )


@njit(cache=True)
def grow_log_ratio(Ap, Bp, Al, Bl, Ar, Br, c, s0):
    dp = c + s0 * Bp
    dl = c + s0 * Bl
    dr = c + s0 * Br
    vol = 0.5 * math.log(c * dp / (dr * dl))
    quad = s0 / (2.0 * c) * (Ar * Ar / dr + Al * Al / dl - Ap * Ap / dp)
    return vol + quad


@njit(cache=True)
def leaf_stats(ints, leaf_of, w, inv_nu):
    cap = ints.shape[0]
    A = np.zeros(cap)
    B = np.zeros(cap)
    cnt = np.zeros(cap, dtype=np.int64)
    for i in range(leaf_of.shape[0]):
        k = leaf_of[i]
        A[k] += w[i] * inv_nu[i]
        B[k] += inv_nu[i]
        cnt[k] += 1
    return A, B, cnt


@njit(cache=True)
def tree_log_lik(ints, leaf_of, w, inv_nu, c, s0):
    """Sum of partition-dependent leaf terms; -inf if some leaf is empty."""
    A, B, cnt = leaf_stats(ints, leaf_of, w, inv_nu)
    total = 0.0
    for k in range(ints.shape[0]):
        if ints[k, VAR] == LEAF:
            if cnt[k] == 0:
                return NEG_INF
            total += leaf_term(A[k], B[k], c, s0)
    return total


# ---------------------------------------------------------------- MH moves


@njit(cache=True)
def pick(u, m):
    k = int(u * m)
    return m - 1 if k >= m else k


@njit(cache=True)
def _split_prior_gain(X, rows, n, v, cut, d, psi1, psi2, scratch):
    """Log p(T*) - log p(T) for splitting a leaf at depth ``d``.

    Excludes the rule probability, which the caller adds.
    """
    nl = 0
    nr = 0
    left = scratch[0]
    right = scratch[1]
    for t in range(n):
        r = rows[t]
        if X[r, v] <= cut:
            left[nl] = r
            nl += 1
        else:
            right[nr] = r
            nr += 1
    ps = p_split(d, psi1, psi2)
    gain = math.log(ps) - math.log1p(-ps)
    pc = p_split(d + 1, psi1, psi2)
    if is_splittable(X, left, nl):
        gain += math.log1p(-pc)
    if is_splittable(X, right, nr):
        gain += math.log1p(-pc)
    return gain


@njit(cache=True)
def grow_proposal(ints, leaf_of, X, node, var, cut, move_cum, psi1, psi2):
    """Forward and reverse log proposal probabilities plus prior gain for a GROW.

    Returns ``(log_q_fwd, log_q_rev, log_prior_gain)``; the node must be a leaf
    whose rows admit ``(var, cut)``.
    """
    n = leaf_of.shape[0]
    rows = np.empty(n, dtype=np.int64)
    buf = np.empty(n)
    scratch = np.empty((2, n), dtype=np.int64)
    cnt = node_rows(ints, leaf_of, node, rows)
    n_av = n_avail_vars(X, rows, cnt)
    m = cut_menu(X, rows, cnt, var, buf)
    idx = np.empty(ints.shape[0], dtype=np.int64)
    n_leaves = collect(ints, 0, idx)
    n_prun = collect(ints, 2, idx)
    parent = ints[node, PARENT]
    # node becomes prunable; its parent stops being prunable if it was
    n_prun_new = n_prun + 1
    if parent >= 0 and is_prunable(ints, parent):
        n_prun_new -= 1
    p_grow = move_cum[GROW]
    p_prune = move_cum[PRUNE] - move_cum[GROW]
    log_rule = -math.log(n_av) - math.log(m)
    log_q_fwd = math.log(p_grow) - math.log(n_leaves) + log_rule
    log_q_rev = math.log(p_prune) - math.log(n_prun_new) if p_prune > 0 else NEG_INF
    gain = _split_prior_gain(X, rows, cnt, var, cut, ints[node, DEPTH], psi1, psi2, scratch)
    return log_q_fwd, log_q_rev, gain + log_rule


@njit(cache=True)
def grow_mh_ratio(log_q_fwd, log_q_rev, prior_gain):
    """Prior and proposal part of a GROW's log acceptance ratio; a PRUNE uses its negation."""
    return prior_gain + (log_q_rev - log_q_fwd)


@njit(cache=True)
def _accept(log_ratio, u):
    if log_ratio >= 0.0:
        return True
    if u <= 0.0:
        return log_ratio > NEG_INF
    return math.log(u) < log_ratio


@njit(cache=True)
def _try_grow(ints, floats, leaf_of, X, w, inv_nu, c, s0, psi1, psi2, move_cum, use_lik, u):
    n = leaf_of.shape[0]
    cap = ints.shape[0]
    idx = np.empty(cap, dtype=np.int64)
    n_leaves = collect(ints, 0, idx)
    node = idx[pick(u[1], n_leaves)]
    rows = np.empty(n, dtype=np.int64)
    cnt = node_rows(ints, leaf_of, node, rows)
    n_av = n_avail_vars(X, rows, cnt)
    if n_av == 0:
        return False
    var = nth_avail_var(X, rows, cnt, pick(u[2], n_av))
    buf = np.empty(n)
    m = cut_menu(X, rows, cnt, var, buf)
    cut = buf[pick(u[3], m)]

    log_q_fwd, log_q_rev, prior_gain = grow_proposal(
        ints, leaf_of, X, node, var, cut, move_cum, psi1, psi2
    )
    log_r = grow_mh_ratio(log_q_fwd, log_q_rev, prior_gain)
    if use_lik:
        Ap = Bp = Al = Bl = 0.0
        for t in range(cnt):
            i = rows[t]
            a = w[i] * inv_nu[i]
            Ap += a
            Bp += inv_nu[i]
            if X[i, var] <= cut:
                Al += a
                Bl += inv_nu[i]
        log_r += grow_log_ratio(Ap, Bp, Al, Bl, Ap - Al, Bp - Bl, c, s0)
    if not _accept(log_r, u[4]):
        return False
    left, right = grow_at(ints, floats, node, var, cut)
    for t in range(cnt):
        i = rows[t]
        leaf_of[i] = left if X[i, var] <= cut else right
    return True


@njit(cache=True)
def _try_prune(ints, floats, leaf_of, X, w, inv_nu, c, s0, psi1, psi2, move_cum, use_lik, u):
    cap = ints.shape[0]
    idx = np.empty(cap, dtype=np.int64)
    n_prun = collect(ints, 2, idx)
    if n_prun == 0:
        return False
    node = idx[pick(u[1], n_prun)]
    if node == 0:
        # a root-only tree has zero prior mass
        return False
    var = ints[node, VAR]
    cut = floats[node, CUT]
    # evaluate the matching GROW from the pruned tree
    trial = ints.copy()
    prune_at(trial, floats.copy(), node)
    lo = ints[node, LEFT]
    hi = ints[node, RIGHT]
    pruned_leaf_of = leaf_of.copy()
    for i in range(leaf_of.shape[0]):
        if leaf_of[i] == lo or leaf_of[i] == hi:
            pruned_leaf_of[i] = node
    log_q_g, log_q_p, prior_gain = grow_proposal(
        trial, pruned_leaf_of, X, node, var, cut, move_cum, psi1, psi2
    )
    log_r = -grow_mh_ratio(log_q_g, log_q_p, prior_gain)
    if use_lik:
        Al = Bl = Ar = Br = 0.0
        for i in range(leaf_of.shape[0]):
            k = leaf_of[i]
            if k == lo:
                Al += w[i] * inv_nu[i]
                Bl += inv_nu[i]
            elif k == hi:
                Ar += w[i] * inv_nu[i]
                Br += inv_nu[i]
        log_r -= grow_log_ratio(Al + Ar, Bl + Br, Al, Bl, Ar, Br, c, s0)
    if not _accept(log_r, u[4]):
        return False
    mu = floats[node, MU]
    prune_at(ints, floats, node)
    floats[node, MU] = mu
    leaf_of[:] = pruned_leaf_of
    return True


@njit(cache=True)
def _try_rule_move(ints, floats, leaf_of, X, w, inv_nu, c, s0, psi1, psi2, use_lik, u, is_swap):
    n = leaf_of.shape[0]
    cap = ints.shape[0]
    idx = np.empty(cap, dtype=np.int64)
    new_ints = ints.copy()
    new_floats = floats.copy()
    log_q = 0.0
    if is_swap:
        n_pairs = collect(ints, 3, idx)
        if n_pairs == 0:
            return False
        child = idx[pick(u[1], n_pairs)]
        parent = ints[child, PARENT]
        new_ints[parent, VAR] = ints[child, VAR]
        new_floats[parent, CUT] = floats[child, CUT]
        new_ints[child, VAR] = ints[parent, VAR]
        new_floats[child, CUT] = floats[parent, CUT]
    else:
        n_int = collect(ints, 1, idx)
        node = idx[pick(u[1], n_int)]
        rows = np.empty(n, dtype=np.int64)
        cnt = node_rows(ints, leaf_of, node, rows)
        n_av = n_avail_vars(X, rows, cnt)
        var = nth_avail_var(X, rows, cnt, pick(u[2], n_av))
        buf = np.empty(n)
        m_new = cut_menu(X, rows, cnt, var, buf)
        cut = buf[pick(u[3], m_new)]
        m_old = cut_menu(X, rows, cnt, ints[node, VAR], buf)
        # the node's own rows do not move, so only the cut menu sizes differ
        log_q = math.log(m_new) - math.log(m_old)
        new_ints[node, VAR] = var
        new_floats[node, CUT] = cut

    new_leaf_of = np.empty(n, dtype=np.int64)
    route_rows(new_ints, new_floats, X, new_leaf_of)
    lik_new = tree_log_lik(new_ints, new_leaf_of, w, inv_nu, c, s0)
    if lik_new == NEG_INF:
        return False
    prior_new = log_tree_prior(new_ints, new_floats, new_leaf_of, X, psi1, psi2)
    if prior_new == NEG_INF:
        return False
    log_r = prior_new - log_tree_prior(ints, floats, leaf_of, X, psi1, psi2) + log_q
    if use_lik:
        log_r += lik_new - tree_log_lik(ints, leaf_of, w, inv_nu, c, s0)
    if not _accept(log_r, u[4]):
        return False
    ints[:] = new_ints
    floats[:] = new_floats
    leaf_of[:] = new_leaf_of
    return True


@njit(cache=True)
def mh_tree(ints, floats, leaf_of, X, w, inv_nu, c, s0, psi1, psi2, move_cum, use_lik, u):
    """One Metropolis-Hastings structural update; returns (move, accepted)."""
    move = 0
    while move < 3 and u[0] >= move_cum[move]:
        move += 1
    if move == GROW:
        ok = _try_grow(ints, floats, leaf_of, X, w, inv_nu, c, s0, psi1, psi2, move_cum, use_lik, u)
    elif move == PRUNE:
        ok = _try_prune(ints, floats, leaf_of, X, w, inv_nu, c, s0, psi1, psi2, move_cum, use_lik, u)
    else:
        ok = _try_rule_move(
            ints, floats, leaf_of, X, w, inv_nu, c, s0, psi1, psi2, use_lik, u, move == SWAP
        )
    return move, ok


@njit(cache=True)
def draw_leaves(ints, floats, leaf_of, w, inv_nu, c, s0, z):
    """Gaussian draw of every leaf parameter, consuming ``z`` in slot order."""
    A, B, cnt = leaf_stats(ints, leaf_of, w, inv_nu)
    t = 0
    for k in range(ints.shape[0]):
        if ints[k, VAR] == LEAF:
            den = c + s0 * B[k]
            mean = s0 * A[k] / den
            var = c * s0 / den
            floats[k, MU] = mean + math.sqrt(var) * z[t]
            t += 1


@njit(cache=True)
def ensemble_fit(floats3, leaf_of2, out):
    out[:] = 0.0
    for j in range(leaf_of2.shape[0]):
        for i in range(leaf_of2.shape[1]):
            out[i] += floats3[j, leaf_of2[j, i], MU]


@njit(cache=True)
def sweep(
    ints3, floats3, leaf_of2, X, y, nu, fitted, theta1, c, s0, psi1, psi2,
    move_cum, use_lik, update_structure, U, Z, counts,
):
    """Backfit every tree once: structural MH step then leaf draw.

    ``fitted`` is updated incrementally and recomputed exactly at the end.
    """
    n = y.shape[0]
    inv_nu = 1.0 / nu
    w = np.empty(n)
    for j in range(ints3.shape[0]):
        ints = ints3[j]
        floats = floats3[j]
        leaf_of = leaf_of2[j]
        for i in range(n):
            w[i] = y[i] - fitted[i] + floats[leaf_of[i], MU] - theta1 * nu[i]
            fitted[i] -= floats[leaf_of[i], MU]
        if update_structure:
            move, ok = mh_tree(ints, floats, leaf_of, X, w, inv_nu, c, s0, psi1, psi2,
                               move_cum, use_lik, U[j])
            counts[move, 0] += 1
            if ok:
                counts[move, 1] += 1
        draw_leaves(ints, floats, leaf_of, w, inv_nu, c, s0, Z[j])
        for i in range(n):
            fitted[i] += floats[leaf_of[i], MU]
    ensemble_fit(floats3, leaf_of2, fitted)


# ---------------------------------------------------------------- snapshots


@njit(cache=True)
def _preorder(ints, floats, root, var, val, right, pos):
    """Write the subtree at ``root`` in pre-order starting at ``pos``; returns the end."""
    stack = np.empty(ints.shape[0] + 1, dtype=np.int64)
    # entries >= 0 are nodes to emit; -(p + 1) marks "right child of position p starts here"
    top = 0
    stack[0] = root
    while top >= 0:
        k = stack[top]
        top -= 1
        if k < 0:
            p = -k - 1
            right[p] = pos - p
            continue
        if ints[k, VAR] >= 0:
            var[pos] = ints[k, VAR]
            val[pos] = floats[k, CUT]
            stack[top + 1] = ints[k, RIGHT]
            stack[top + 2] = -(pos + 1)
            stack[top + 3] = ints[k, LEFT]
            top += 3
        else:
            var[pos] = LEAF
            val[pos] = floats[k, MU]
            right[pos] = 0
        pos += 1
    return pos


@njit(cache=True)
def flatten_ensemble(ints3, floats3, var, val, right, ptr, offset):
    """Write each tree in pre-order; ``right`` holds relative right-child offsets."""
    pos = offset
    for j in range(ints3.shape[0]):
        ptr[j] = pos
        pos = _preorder(ints3[j], floats3[j], 0, var, val, right, pos)
    return pos


@njit(cache=True)
def predict_flat(var, val, right, ptr, n_snap, n_trees, X):
    out = np.zeros((n_snap, X.shape[0]))
    for s in range(n_snap):
        for i in range(X.shape[0]):
            total = 0.0
            for t in range(n_trees):
                k = ptr[s * n_trees + t]
                while var[k] >= 0:
                    if X[i, var[k]] <= val[k]:
                        k += 1
                    else:
                        k += right[k]
                total += val[k]
            out[s, i] = total
    return out
