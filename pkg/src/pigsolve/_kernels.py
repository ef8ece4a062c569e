"""Hot loops, each in a numba flavour and a pure-numpy flavour.

Public wrappers take ``backend=None|"numba"|"numpy"``; ``None`` follows the
``PIGSOLVE_DISABLE_NUMBA`` environment flag (see :mod:`pigsolve._accel`).
"""

import numpy as np

from ._accel import HAVE_NUMBA, njit, prange, resolve_backend

# ---------------------------------------------------------------------------
# small helpers


def segment_sum(x, ptr):
    """Sum of ``x[ptr[i]:ptr[i+1]]`` for every segment, empty segments -> 0."""
    n = len(ptr) - 1
    out = np.zeros(n, dtype=np.float64)
    if n == 0 or len(x) == 0:
        return out
    counts = np.diff(ptr)
    idx = np.minimum(ptr[:-1], len(x) - 1)
    out[:] = np.add.reduceat(x, idx)
    out[counts == 0] = 0.0
    return out


def entry_values(v, reward, trans_ptr, succ, prob):
    """``reward[e] + sum_t prob[t] * v[succ[t]]`` for every entry (numpy)."""
    return reward + np.add.reduceat(prob * v[succ], trans_ptr[:-1])


# ---------------------------------------------------------------------------
# Bellman sweep on vector games (1 x n or m x 1); m x n states come back NaN


@njit(parallel=True, cache=True)
def _sweep_nb(v, n_rows, n_cols, entry_ptr, reward, trans_ptr, succ, prob, out):
    n = n_rows.shape[0]
    for s in prange(n):
        if n_rows[s] > 1 and n_cols[s] > 1:
            out[s] = np.nan
            continue
        maximise = n_cols[s] == 1
        e0 = entry_ptr[s]
        best = 0.0
        for e in range(e0, entry_ptr[s + 1]):
            acc = 0.0
            for t in range(trans_ptr[e], trans_ptr[e + 1]):
                acc += prob[t] * v[succ[t]]
            q = reward[e] + acc
            if e == e0:
                best = q
            elif maximise:
                if q > best:
                    best = q
            elif q < best:
                best = q
        out[s] = best


def _sweep_np(v, n_rows, n_cols, entry_ptr, reward, trans_ptr, succ, prob, out):
    q = entry_values(v, reward, trans_ptr, succ, prob)
    starts = entry_ptr[:-1]
    hi = np.maximum.reduceat(q, starts)
    lo = np.minimum.reduceat(q, starts)
    out[:] = np.where(n_cols == 1, hi, lo)
    out[(n_rows > 1) & (n_cols > 1)] = np.nan


def bellman_sweep(v, game, out=None, backend=None):
    if out is None:
        out = np.empty_like(v)
    fn = _sweep_nb if resolve_backend(backend) == "numba" else _sweep_np
    fn(v, game.n_rows, game.n_cols, game.entry_ptr, game.reward, game.trans_ptr, game.succ, game.prob, out)
    return out


@njit(cache=True)
def _gauss_seidel_nb(v, order, n_rows, n_cols, entry_ptr, reward, trans_ptr, succ, prob):
    # in place; returns the sup-norm change of the sweep
    delta = 0.0
    for i in range(order.shape[0]):
        s = order[i]
        if n_rows[s] > 1 and n_cols[s] > 1:
            continue
        maximise = n_cols[s] == 1
        e0 = entry_ptr[s]
        best = 0.0
        for e in range(e0, entry_ptr[s + 1]):
            acc = 0.0
            for t in range(trans_ptr[e], trans_ptr[e + 1]):
                acc += prob[t] * v[succ[t]]
            q = reward[e] + acc
            if e == e0:
                best = q
            elif maximise:
                if q > best:
                    best = q
            elif q < best:
                best = q
        d = abs(best - v[s])
        if d > delta:
            delta = d
        v[s] = best
    return delta


def gauss_seidel_sweep(v, order, game, backend=None):
    fn = _gauss_seidel_nb
    if resolve_backend(backend) == "numpy" and HAVE_NUMBA:
        fn = _gauss_seidel_nb.py_func
    return fn(v, order, game.n_rows, game.n_cols, game.entry_ptr, game.reward, game.trans_ptr, game.succ, game.prob)


# ---------------------------------------------------------------------------
# transience rank (least fixpoint)


@njit(cache=True)
def _rank_nb(entry_ptr, trans_ptr, succ, prob, final, rank):
    n = entry_ptr.shape[0] - 1
    rank[final] = 0
    k = 0
    changed = True
    while changed:
        k += 1
        changed = False
        for s in range(n):
            if rank[s] >= 0:
                continue
            ok = True
            for e in range(entry_ptr[s], entry_ptr[s + 1]):
                found = False
                for t in range(trans_ptr[e], trans_ptr[e + 1]):
                    r = rank[succ[t]]
                    if prob[t] > 0.0 and r >= 0 and r < k:
                        found = True
                        break
                if not found:
                    ok = False
                    break
            if ok:
                rank[s] = k
                changed = True


def _rank_np(entry_ptr, trans_ptr, succ, prob, final, rank):
    rank[final] = 0
    positive = prob > 0.0
    k = 0
    while True:
        k += 1
        good = rank >= 0
        ent_ok = np.logical_or.reduceat(good[succ] & positive, trans_ptr[:-1])
        st_ok = np.logical_and.reduceat(ent_ok, entry_ptr[:-1])
        new = st_ok & ~good
        if not new.any():
            break
        rank[new] = k


def transience_rank(entry_ptr, trans_ptr, succ, prob, final, backend=None):
    rank = np.full(len(entry_ptr) - 1, -1, dtype=np.int32)
    fn = _rank_nb if resolve_backend(backend) == "numba" else _rank_np
    fn(entry_ptr, trans_ptr, succ, prob, final, rank)
    return rank


# ---------------------------------------------------------------------------
# layered solve of the dice race
#
# Layer (a, b) holds (1, a, b, .) and (2, a, b, .).  Stops leave the layer
# towards larger banked totals; the only intra-layer coupling is the pair of
# bust targets x = v(2, a, b, 0) and y = v(1, a, b, 0).  Each chain is
# evaluated backwards in tau as an affine function of its bust value; the
# pair is then closed by Newton steps on the composed piecewise-affine map.

# lay = (target, d, exact, base1, base2, block)  packed in an int64 array
# faces: sorted scoring faces; ntau[o], off[o]: per own-score block layout
# win_c[j], win_s[j]: win payoff of player j+1 is win_c + win_s * opp
# mode 0: optimise (p1 max, p2 min); mode 1: follow ``choice`` (0 stop, 1 roll)


@njit(cache=True)
def _chain_nb(own, opp, base, other, bustval, v, lay, faces, ntau, off, wc, ws, maximise,
              mode, choice, val, slope, write):
    target = lay[0]
    d = lay[1]
    exact = lay[2]
    nt = ntau[own]
    start = base + off[own] + opp * nt
    for tau in range(nt - 1, -1, -1):
        idx = start + tau
        if tau >= target - own:
            val[tau] = wc + ws * opp
            slope[tau] = 0.0
        else:
            nvalid = 0
            acc = 0.0
            sacc = 0.0
            for i in range(faces.shape[0]):
                k = faces[i]
                if exact == 1 and own + tau + k > target:
                    break
                acc += val[tau + k]
                sacc += slope[tau + k]
                nvalid += 1
            nbust = d - nvalid
            roll = (nbust * bustval + acc) / d
            rslope = (nbust + sacc) / d
            if tau == 0:
                val[tau] = roll
                slope[tau] = rslope
            else:
                stop = v[other + off[opp] + (own + tau) * ntau[opp]]
                if mode == 0:
                    take_stop = stop >= roll if maximise else stop <= roll
                else:
                    take_stop = choice[idx] == 0
                if take_stop:
                    val[tau] = stop
                    slope[tau] = 0.0
                else:
                    val[tau] = roll
                    slope[tau] = rslope
        if write:
            v[idx] = val[tau]


@njit(cache=True)
def _layered_nb(v, lay, faces, ntau, off, wc, ws, mode, choice, resid_tol, max_newton, max_plain):
    target = lay[0]
    base1 = lay[3]
    base2 = lay[4]
    maxn = 0
    for o in range(target):
        if ntau[o] > maxn:
            maxn = ntau[o]
    val = np.zeros(maxn + 16)
    slope = np.zeros(maxn + 16)
    worst = 0.0
    iters = 0
    for a in range(target - 1, -1, -1):
        for b in range(target - 1, -1, -1):
            # x: v(2,a,b,0) = block 2, own b, opp a;  y: v(1,a,b,0)
            ix = base2 + off[b] + a * ntau[b]
            iy = base1 + off[a] + b * ntau[a]
            x = v[ix]
            it = 0
            resid = 0.0
            while True:
                _chain_nb(a, b, base1, base2, x, v, lay, faces, ntau, off, wc[0], ws[0], True,
                          mode, choice, val, slope, False)
                y = val[0]
                b0 = slope[0]
                a0 = y - b0 * x
                _chain_nb(b, a, base2, base1, y, v, lay, faces, ntau, off, wc[1], ws[1], False,
                          mode, choice, val, slope, False)
                xn = val[0]
                d0 = slope[0]
                c0 = xn - d0 * y
                resid = abs(xn - x)
                it += 1
                if resid <= resid_tol or it >= max_newton + max_plain:
                    break
                den = 1.0 - d0 * b0
                if it <= max_newton and den > 1e-300:
                    x = (c0 + d0 * a0) / den
                else:
                    x = xn
            _chain_nb(a, b, base1, base2, x, v, lay, faces, ntau, off, wc[0], ws[0], True,
                      mode, choice, val, slope, True)
            y = v[iy]
            _chain_nb(b, a, base2, base1, y, v, lay, faces, ntau, off, wc[1], ws[1], False,
                      mode, choice, val, slope, True)
            if resid > worst:
                worst = resid
            iters += it
    return worst, iters


def _chains_np(own, opp, base, other, bustval, v, lay, faces, ntau, off, wc, ws, maximise,
               mode, choice, width):
    """Vectorised chain over several layers of one anti-diagonal."""
    target, d, exact = int(lay[0]), int(lay[1]), int(lay[2])
    L = len(own)
    nt = ntau[own]
    start = base + off[own] + opp * nt
    val = np.zeros((L, width))
    slope = np.zeros((L, width))
    rows = np.arange(L)
    win = wc + ws * opp.astype(np.float64)
    stop_base = other + off[opp]
    stop_stride = ntau[opp]
    idxs = np.zeros((L, width), dtype=np.int64)
    for tau in range(int(nt.max()) - 1, -1, -1):
        live = tau < nt
        is_win = live & (tau >= target - own)
        play = live & ~is_win
        acc = np.zeros(L)
        sacc = np.zeros(L)
        nvalid = np.zeros(L, dtype=np.int64)
        for k in faces:
            ok = play if not exact else play & (own + tau + k <= target)
            acc = acc + np.where(ok, val[rows, np.minimum(tau + k, width - 1)], 0.0)
            sacc = sacc + np.where(ok, slope[rows, np.minimum(tau + k, width - 1)], 0.0)
            nvalid += ok
        nbust = d - nvalid
        roll = (nbust * bustval + acc) / d
        rslope = (nbust + sacc) / d
        if tau == 0:
            nv, ns = roll, rslope
        else:
            sidx = np.where(play, stop_base + np.minimum(own + tau, target - 1) * stop_stride, 0)
            stop = v[sidx]
            if mode == 0:
                take_stop = stop >= roll if maximise else stop <= roll
            else:
                take_stop = choice[np.where(play, start + tau, 0)] == 0
            nv = np.where(take_stop, stop, roll)
            ns = np.where(take_stop, 0.0, rslope)
        val[:, tau] = np.where(is_win, win, np.where(play, nv, 0.0))
        slope[:, tau] = np.where(play, ns, 0.0)
        idxs[:, tau] = np.where(live, start + tau, -1)
    return val, slope, idxs


def _layered_np(v, lay, faces, ntau, off, wc, ws, mode, choice, resid_tol, max_newton, max_plain):
    target = int(lay[0])
    base1, base2 = int(lay[3]), int(lay[4])
    width = int(ntau.max()) + int(faces.max()) + 1
    worst, iters = 0.0, 0
    for diag in range(2 * (target - 1), -1, -1):
        a = np.arange(max(0, diag - target + 1), min(diag, target - 1) + 1, dtype=np.int64)
        b = diag - a
        ix = base2 + off[b] + a * ntau[b]
        x = v[ix].copy()
        done = np.zeros(len(a), dtype=bool)
        resid = np.zeros(len(a))
        it = 0
        while True:
            val1, sl1, _ = _chains_np(a, b, base1, base2, x, v, lay, faces, ntau, off, wc[0], ws[0],
                                      True, mode, choice, width)
            y, b0 = val1[:, 0], sl1[:, 0]
            a0 = y - b0 * x
            val2, sl2, _ = _chains_np(b, a, base2, base1, y, v, lay, faces, ntau, off, wc[1], ws[1],
                                      False, mode, choice, width)
            xn, d0 = val2[:, 0], sl2[:, 0]
            c0 = xn - d0 * y
            r = np.abs(xn - x)
            resid = np.where(done, resid, r)
            it += 1
            newly = ~done & (r <= resid_tol)
            iters += int((~done).sum())
            done |= newly
            if done.all() or it >= max_newton + max_plain:
                break
            den = 1.0 - d0 * b0
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = (c0 + d0 * a0) / den
            step = np.where((den > 1e-300) & (it <= max_newton), newton, xn)
            x = np.where(done, x, step)
        val1, _, id1 = _chains_np(a, b, base1, base2, x, v, lay, faces, ntau, off, wc[0], ws[0],
                                  True, mode, choice, width)
        m = id1 >= 0
        v[id1[m]] = val1[m]
        y = val1[:, 0]
        val2, _, id2 = _chains_np(b, a, base2, base1, y, v, lay, faces, ntau, off, wc[1], ws[1],
                                  False, mode, choice, width)
        m = id2 >= 0
        v[id2[m]] = val2[m]
        worst = max(worst, float(resid.max()))
    return worst, iters


def layered_pass(v, lay, faces, ntau, off, wc, ws, mode, choice, resid_tol,
                 max_newton=64, max_plain=200000, backend=None):
    """Fill the play states of ``v`` layer by layer; returns (worst residual, inner steps)."""
    fn = _layered_nb if resolve_backend(backend) == "numba" else _layered_np
    worst, iters = fn(v, lay, faces, ntau, off, wc, ws, mode, choice, float(resid_tol),
                      int(max_newton), int(max_plain))
    return float(worst), int(iters)


# ---------------------------------------------------------------------------
# seeded simulation on a compiled game
#
# Generator: SplitMix64.  Game g uses its own stream whose state starts at
# splitmix64_mix(splitmix64_mix(seed) + g * GOLDEN); each step advances the
# state by GOLDEN and draws u = (mix(state) >> 11) * 2**-53.  Results depend
# only on (seed, g), never on how games are sharded.

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
RNG_ID = "splitmix64/per-game-stream/v1"


@njit(cache=True)
def _mix_nb(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _mix_np(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def stream_seed(seed):
    return _mix_np(np.asarray([int(seed) % (1 << 64)], dtype=np.uint64))[0]


@njit(cache=True)
def _simulate_nb(key, first, n_games, entry_ptr, trans_ptr, succ, prob, choice, reward,
                 initial, final, start_a, start_b, alternate, max_steps, total, first_state):
    for g in range(first, first + n_games):
        st = _mix_nb(key + np.uint64(g) * GOLDEN)
        s = initial
        if alternate:
            s = start_a if g % 2 == 0 else start_b
        acc = 0.0
        steps = 0
        seen_first = -1
        while s != final:
            if s != initial and seen_first < 0:
                seen_first = s
            e = entry_ptr[s] + choice[s]
            acc += reward[e]
            st = st + GOLDEN
            u = (_mix_nb(st) >> _S11) * _INV53
            lo = trans_ptr[e]
            hi = trans_ptr[e + 1]
            nxt = succ[hi - 1]
            c = 0.0
            for t in range(lo, hi):
                c += prob[t]
                if u < c:
                    nxt = succ[t]
                    break
            s = nxt
            steps += 1
            if steps > max_steps:
                return g
        total[g - first] = acc
        first_state[g - first] = seen_first
    return -1


def _simulate_np(key, first, n_games, entry_ptr, trans_ptr, succ, prob, choice, reward,
                 initial, final, start_a, start_b, alternate, max_steps, total, first_state):
    g = np.arange(first, first + n_games, dtype=np.uint64)
    with np.errstate(over="ignore"):
        st = _mix_np(key + g * GOLDEN)
    if alternate:
        s = np.where(g % np.uint64(2) == 0, start_a, start_b).astype(np.int64)
    else:
        s = np.full(n_games, initial, dtype=np.int64)
    total[:] = 0.0
    first_state[:] = -1
    active = np.flatnonzero(s != final)
    steps = 0
    maxlen = int(np.diff(trans_ptr).max())
    while active.size:
        sa = s[active]
        fs = first_state[active]
        set_first = (sa != initial) & (fs < 0)
        first_state[active[set_first]] = sa[set_first]
        e = entry_ptr[sa] + choice[sa]
        total[active] += reward[e]
        with np.errstate(over="ignore"):
            st[active] += GOLDEN
        u = (_mix_np(st[active]) >> _S11) * _INV53
        lo = trans_ptr[e]
        hi = trans_ptr[e + 1]
        nxt = succ[hi - 1].astype(np.int64)
        c = np.zeros(active.size)
        picked = np.zeros(active.size, dtype=bool)
        for j in range(maxlen):
            t = lo + j
            inside = t < hi
            c = c + np.where(inside, prob[np.minimum(t, len(prob) - 1)], 0.0)
            hit = inside & ~picked & (u < c)
            nxt = np.where(hit, succ[np.minimum(t, len(succ) - 1)], nxt)
            picked |= hit
        s[active] = nxt
        steps += 1
        if steps > max_steps:
            return int(active[0]) + first
        active = active[nxt != final]
    return -1


def simulate(seed, first, n_games, game, choice, reward, start_a, start_b, alternate,
             max_steps=10_000_000, backend=None):
    total = np.zeros(n_games)
    first_state = np.full(n_games, -1, dtype=np.int64)
    key = stream_seed(seed)
    fn = _simulate_nb if resolve_backend(backend) == "numba" else _simulate_np
    bad = fn(key, int(first), int(n_games), game.entry_ptr, game.trans_ptr, game.succ, game.prob,
             choice, reward, int(game.initial), int(game.final), int(start_a), int(start_b),
             bool(alternate), int(max_steps), total, first_state)
    if bad >= 0:
        raise RuntimeError(f"game {bad} exceeded {max_steps} steps without finishing")
    return total, first_state
