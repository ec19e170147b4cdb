"""Compiled inner loops of the engine.

All kernels release the GIL so the send stage can run on several threads
at once.  Each worker only writes rows of ``progress``/``msg_sent``/
``eff_ros`` that belong to its own cells, plus its own slice of the
message buffer.
"""
import math

import numba
import numpy as np

AVAILABLE = 0
BURNING = 1
BURNED = 2


@numba.njit(nogil=True, cache=True)
def send_chunk(cells, neighbors, status, hros, bros, lb, heading, perturb,
               progress, msg_sent, eff_ros, has_spread, live_count, fast_count,
               dist, axis_rad, dt, delta, out_sender, out_receiver):
    """Advance fire along the live axes of ``cells``; emit messages.

    An axis is live while its neighbour is available and has not been
    messaged.  After the update ``live_count[i]`` holds the live axes left
    and ``fast_count[i]`` those whose rate is at least ``delta``.

    Returns ``(n_messages, n_axis_updates)``.  Messages land in
    ``out_sender[:n]``/``out_receiver[:n]`` in cell order, then axis order.
    """
    n_msg = 0
    n_upd = 0
    for idx in range(cells.shape[0]):
        i = cells[idx]
        has_spread[i] = True
        h = hros[i]
        a = (h + bros[i]) / 2.0
        e = 0.0
        if a > 0.0:
            b = (h + bros[i]) / (2.0 * lb[i])
            e2 = 1.0 - (b * b) / (a * a)
            if e2 > 0.0:
                e = math.sqrt(e2)
        semi = a * (1.0 - e * e)
        live = 0
        fast = 0
        for k in range(8):
            j = neighbors[i, k]
            if j < 0 or status[j] != AVAILABLE or msg_sent[i, k]:
                continue
            if h <= 0.0:
                ros = 0.0
            else:
                phi = math.degrees(axis_rad[k] - heading[i]) % 360.0
                if phi < 90.0 or phi > 270.0:
                    ros = semi / (1.0 - e * math.cos(math.radians(phi)))
                else:
                    ros = semi
            r = ros * perturb[i, k]
            eff_ros[i, k] = r
            p = progress[i, k] + r * dt
            n_upd += 1
            if p >= dist[k]:
                p = dist[k]
                msg_sent[i, k] = True
                out_sender[n_msg] = i
                out_receiver[n_msg] = j
                n_msg += 1
            else:
                live += 1
                if r >= delta:
                    fast += 1
            progress[i, k] = p
        live_count[i] = live
        fast_count[i] = fast
    return n_msg, n_upd


@numba.njit(nogil=True, cache=True)
def merge_sorted(a, b):
    """Sorted union of two sorted, duplicate-free index arrays."""
    out = np.empty(a.shape[0] + b.shape[0], dtype=np.int64)
    i = j = n = 0
    while i < a.shape[0] and j < b.shape[0]:
        if a[i] < b[j]:
            out[n] = a[i]
            i += 1
        elif b[j] < a[i]:
            out[n] = b[j]
            j += 1
        else:
            out[n] = a[i]
            i += 1
            j += 1
        n += 1
    while i < a.shape[0]:
        out[n] = a[i]
        i += 1
        n += 1
    while j < b.shape[0]:
        out[n] = b[j]
        j += 1
        n += 1
    return out[:n]


@numba.njit(nogil=True, cache=True)
def unique_available(receivers, status, seen):
    """Sorted distinct receivers that are still available.

    ``seen`` is an all-False scratch array over cells; it is restored before
    returning.
    """
    out = np.empty(receivers.shape[0], dtype=np.int64)
    n = 0
    for r in receivers:
        if not seen[r] and status[r] == AVAILABLE:
            seen[r] = True
            out[n] = r
            n += 1
    out = np.sort(out[:n])
    for r in out:
        seen[r] = False
    return out


@numba.njit(nogil=True, cache=True)
def burnout(burning, new, neighbors, status, msg_sent, eff_ros, has_spread,
            live_count, fast_count, delta, flags, retire):
    """Burn-out sweep after the receive stage.

    ``new`` cells were just ignited, so each burning neighbour loses the
    live axis pointing at them.  ``flags`` (length of the merged list) gets
    0 (keeps burning), 1 (no available neighbour left) or 2 (every live
    axis below ``delta``).

    Returns ``(cells, n_flag2)``.  With ``retire`` flagged cells are marked
    burned and ``cells`` is the new burning list; otherwise it is the merged
    list aligned with ``flags``.
    """
    for n_idx in range(new.shape[0]):
        c = new[n_idx]
        for k in range(8):
            j = neighbors[c, k]
            if j < 0 or status[j] != BURNING or not has_spread[j]:
                continue
            back = (k + 4) % 8
            if not msg_sent[j, back]:
                live_count[j] -= 1
                if eff_ros[j, back] >= delta:
                    fast_count[j] -= 1
    if retire:
        return _merge_retire(burning, new, neighbors, status, msg_sent, has_spread,
                             live_count, fast_count)
    cells = merge_sorted(burning, new)
    n2 = 0
    for idx in range(cells.shape[0]):
        c = cells[idx]
        if has_spread[c]:
            live = live_count[c]
            fast = fast_count[c]
        else:
            live = 0
            for k in range(8):
                nbr = neighbors[c, k]
                if nbr >= 0 and status[nbr] == AVAILABLE and not msg_sent[c, k]:
                    live += 1
            fast = live
        if live == 0:
            flags[idx] = 1
        elif fast == 0:
            flags[idx] = 2
            n2 += 1
        else:
            flags[idx] = 0
    return cells, n2


@numba.njit(nogil=True, cache=True)
def _merge_retire(burning, new, neighbors, status, msg_sent, has_spread, live_count, fast_count):
    """Merge ``new`` into ``burning`` keeping only cells that can still spread."""
    out = np.empty(burning.shape[0] + new.shape[0], dtype=np.int64)
    i = j = n = 0
    n2 = 0
    while i < burning.shape[0] or j < new.shape[0]:
        if j >= new.shape[0] or (i < burning.shape[0] and burning[i] < new[j]):
            c = burning[i]
            i += 1
        else:
            c = new[j]
            j += 1
        if has_spread[c]:
            live = live_count[c]
            fast = fast_count[c]
        else:
            live = 0
            for k in range(8):
                nbr = neighbors[c, k]
                if nbr >= 0 and status[nbr] == AVAILABLE and not msg_sent[c, k]:
                    live += 1
            fast = live
        if live > 0 and fast > 0:
            out[n] = c
            n += 1
        else:
            status[c] = BURNED
            if live > 0:
                n2 += 1
    return out[:n], n2


@numba.njit(nogil=True, cache=True)
def parametric_rates(cells, fuel_index, slope_pct, slope_az, table, ws, heading,
                     hros, bros, lb, head, hfi):
    """Evaluate the built-in parametric model for ``cells`` into per-cell arrays.

    Returns -1 on success, else the position in ``cells`` of a cell whose
    fuel has no table row.
    """
    for idx in range(cells.shape[0]):
        i = cells[idx]
        p = table[fuel_index[i]]
        if math.isnan(p[0]):
            return idx
        sf = 1.0 + p[5] * slope_pct[i] * math.cos(heading - slope_az[i])
        if sf < 0.0:
            sf = 0.0
        h = p[0] * (1.0 + p[1] * ws) * sf
        hros[i] = h
        bros[i] = p[2] * h
        lb[i] = p[3] + p[4] * ws
        head[i] = heading
        hfi[i] = p[6] * h
    return -1


@numba.njit(nogil=True, cache=True)
def receive_parametric(receivers, status, seen, fuel_index, slope_pct, slope_az, table,
                       ws, heading, delta, use_hfi, hfi_min, period,
                       hros, bros, lb, head, hfi, ignition_period, scar):
    """Fused receive stage for the parametric model.

    Returns ``(new_cells, bad)``; ``bad >= 0`` flags a cell with unknown fuel.
    """
    cand = unique_available(receivers, status, seen)
    bad = parametric_rates(cand, fuel_index, slope_pct, slope_az, table, ws, heading,
                           hros, bros, lb, head, hfi)
    if bad >= 0:
        return cand[:0], cand[bad]
    out = np.empty(cand.shape[0], dtype=np.int64)
    n = 0
    for i in cand:
        if hros[i] > delta and (not use_hfi or hfi[i] >= hfi_min):
            status[i] = BURNING
            ignition_period[i] = period
            scar[i] = 1
            out[n] = i
            n += 1
    return out[:n], -1


@numba.njit(nogil=True, cache=True)
def count_live_axes(cells, neighbors, status, msg_sent):
    total = 0
    for idx in range(cells.shape[0]):
        i = cells[idx]
        for k in range(8):
            j = neighbors[i, k]
            if j >= 0 and status[j] == AVAILABLE and not msg_sent[i, k]:
                total += 1
    return total


def warmup():
    """Trigger compilation on tiny inputs."""
    cells = np.zeros(1, np.int64)
    nb = np.full((1, 8), -1, np.int32)
    st = np.zeros(1, np.int8)
    f1 = np.ones(1)
    f8 = np.ones((1, 8))
    ms = np.zeros((1, 8), np.bool_)
    buf = np.zeros(8, np.int64)
    i8 = np.zeros(1, np.int8)
    send_chunk(cells, nb, st, f1, f1, f1, f1.copy(), f8, f8.copy(), ms, f8.copy(),
               np.zeros(1, np.bool_), i8, i8.copy(), np.ones(8), np.zeros(8), 1.0, 0.0, buf, buf.copy())
    merge_sorted(cells, cells)
    unique_available(cells, st, np.zeros(1, np.bool_))
    burnout(cells, cells[:0], nb, st, ms, f8, np.zeros(1, np.bool_), i8, i8.copy(), 0.0, np.zeros(1, np.int8), True)
    count_live_axes(cells, nb, st, ms)
    tab = np.ones((1, 7))
    i32 = np.zeros(1, np.int32)
    receive_parametric(cells, st.copy(), np.zeros(1, np.bool_), i32, f1, f1, tab, 0.0, 0.0, 0.0,
                       False, 0.0, 1, f1.copy(), f1.copy(), f1.copy(), f1.copy(), f1.copy(),
                       np.zeros(1, np.int64), np.zeros(1, np.uint8))
