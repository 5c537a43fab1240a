"""Jitted event loop of the reference simulator.

Deliberately self-contained: the kernel reimplements the physical system from
its definition (batch epochs, preemption, exponential completions) and shares
no code with the analytical modules.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def simulate(policy_fifo, n_clients, service_rate, period,
             batch_start, start_off, gap_after, batch_of,
             n_periods, warmup_periods, seed,
             raw_cap, n_lat_bins, n_paoi_bins, paoi_hi):
    np.random.seed(seed)
    n_batches = start_off.shape[0]
    mean_service = 1.0 / service_rate
    stats_start = warmup_periods * period
    last_gen_period = n_periods - 2  # later generations have unresolved outcomes

    gen_time = np.full(n_clients, -1.0)
    gen_period = np.full(n_clients, -1, np.int64)

    # processor-sharing active set with positional index for O(1) removal
    active_ids = np.zeros(n_clients, np.int64)
    active_pos = np.full(n_clients, -1, np.int64)
    n_active = 0

    # FIFO ring buffer; stale frames of a generating batch sit at the head
    queue = np.zeros(n_clients, np.int64)
    q_head = 0
    q_len = 0
    shuffle_buf = np.zeros(n_clients, np.int64)

    successes = np.zeros(n_clients, np.int64)
    last_del_time = np.full(n_clients, -1.0)
    last_del_gen = np.zeros(n_clients)
    aoi_area = np.zeros(n_clients)
    aoi_start = np.full(n_clients, -1.0)
    aoi_end = np.full(n_clients, -1.0)

    raw_mode = raw_cap > 0
    cap = raw_cap if raw_mode else 1
    lat_vals = np.zeros(cap)
    lat_cli = np.zeros(cap, np.int32)
    paoi_vals = np.zeros(cap)
    paoi_cli = np.zeros(cap, np.int32)
    n_lat = 0
    n_paoi = 0
    lat_hist = np.zeros((n_clients, n_lat_bins), np.int64)
    paoi_hist = np.zeros((n_clients, n_paoi_bins), np.int64)
    lat_scale = n_lat_bins / period
    paoi_scale = n_paoi_bins / paoi_hi

    for n in range(n_periods):
        base = n * period
        for j in range(n_batches):
            t_epoch = base + start_off[j]
            lo = batch_start[j]
            hi = batch_start[j + 1]
            if policy_fifo:
                while q_len > 0 and batch_of[queue[q_head]] == j:
                    q_head += 1
                    if q_head == n_clients:
                        q_head = 0
                    q_len -= 1
                nb = hi - lo
                for k in range(nb):
                    shuffle_buf[k] = lo + k
                for k in range(nb - 1, 0, -1):
                    r = np.random.randint(0, k + 1)
                    tmp = shuffle_buf[k]
                    shuffle_buf[k] = shuffle_buf[r]
                    shuffle_buf[r] = tmp
                for k in range(nb):
                    tail = q_head + q_len
                    if tail >= n_clients:
                        tail -= n_clients
                    queue[tail] = shuffle_buf[k]
                    q_len += 1
            else:
                for i in range(lo, hi):
                    pos = active_pos[i]
                    if pos >= 0:
                        moved = active_ids[n_active - 1]
                        active_ids[pos] = moved
                        active_pos[moved] = pos
                        n_active -= 1
                        active_pos[i] = -1
                for i in range(lo, hi):
                    active_ids[n_active] = i
                    active_pos[i] = n_active
                    n_active += 1
            for i in range(lo, hi):
                gen_time[i] = t_epoch
                gen_period[i] = n

            t = t_epoch
            t_next = t_epoch + gap_after[j]
            while (q_len if policy_fifo else n_active) > 0:
                dt = np.random.exponential(mean_service)
                if t + dt > t_next:
                    break
                t += dt
                if policy_fifo:
                    i = queue[q_head]
                    q_head += 1
                    if q_head == n_clients:
                        q_head = 0
                    q_len -= 1
                else:
                    k = np.random.randint(0, n_active)
                    i = active_ids[k]
                    moved = active_ids[n_active - 1]
                    active_ids[k] = moved
                    active_pos[moved] = k
                    n_active -= 1
                    active_pos[i] = -1

                g = gen_time[i]
                if warmup_periods <= gen_period[i] <= last_gen_period:
                    successes[i] += 1
                if t >= stats_start:
                    lat = t - g
                    if raw_mode:
                        lat_vals[n_lat] = lat
                        lat_cli[n_lat] = i
                        n_lat += 1
                    bin_l = int(lat * lat_scale)
                    if bin_l >= n_lat_bins:
                        bin_l = n_lat_bins - 1
                    lat_hist[i, bin_l] += 1
                    if last_del_time[i] >= stats_start:
                        pa = t - last_del_gen[i]
                        if raw_mode:
                            paoi_vals[n_paoi] = pa
                            paoi_cli[n_paoi] = i
                            n_paoi += 1
                        bin_p = int(pa * paoi_scale)
                        if bin_p >= n_paoi_bins:
                            bin_p = n_paoi_bins - 1
                        paoi_hist[i, bin_p] += 1
                        s_prev = last_del_time[i]
                        aoi_area[i] += (t - s_prev) * (0.5 * (t + s_prev) - last_del_gen[i])
                        if aoi_start[i] < 0.0:
                            aoi_start[i] = s_prev
                        aoi_end[i] = t
                last_del_time[i] = t
                last_del_gen[i] = g

    return (successes, lat_vals[:n_lat], lat_cli[:n_lat],
            paoi_vals[:n_paoi], paoi_cli[:n_paoi],
            lat_hist, paoi_hist, aoi_area, aoi_start, aoi_end)
