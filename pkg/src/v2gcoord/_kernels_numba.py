"""Jit-compiled hot kernels.

Loop-oriented twins of ``_kernels_numpy``: identical signatures,
identical arithmetic order where it affects the result. Importing this
module requires numba; ``backend`` decides whether it is used.
"""

import numpy as np
from numba import njit

BACKEND_NAME = "numba"


@njit(cache=True)
def ev_power_bounds(soc, cap_kwh, p_ch_max, p_dis_max, soc_min_eff, soc_max_eff, dt_h):
    n = soc.shape[0]
    floor = np.empty(n)
    ceil = np.empty(n)
    head = np.empty(n)
    depth = np.empty(n)
    for i in range(n):
        c = min(p_ch_max[i], (soc_max_eff[i] - soc[i]) * cap_kwh[i] / dt_h)
        f = max(p_dis_max[i], (soc_min_eff[i] - soc[i]) * cap_kwh[i] / dt_h)
        if f > c:
            f = c
        ceil[i] = c
        floor[i] = f
        head[i] = max(0.0, soc_max_eff[i] - soc[i]) * cap_kwh[i]
        depth[i] = max(0.0, soc[i] - soc_min_eff[i]) * cap_kwh[i]
    return floor, ceil, head, depth


@njit(cache=True)
def waterfill(target_kw, floor_kw, ceil_kw, head_kwh, depth_kwh, dt_h):
    n = floor_kw.shape[0]
    p = np.zeros(n)
    clipped = np.zeros(n, dtype=np.bool_)
    free = np.ones(n, dtype=np.bool_)
    kappa = 0.0
    n_iter = 0
    for _ in range(n + 1):
        n_iter += 1
        pinned_sum = 0.0
        for i in range(n):
            if clipped[i]:
                pinned_sum += p[i]
        residual = target_kw - pinned_sum
        if residual > 0.0:
            denom = 0.0
            for i in range(n):
                if free[i]:
                    denom += head_kwh[i]
            if denom <= 0.0:
                for i in range(n):
                    if free[i]:
                        p[i] = 0.0
                break
            kappa = residual * dt_h / denom
            for i in range(n):
                if free[i]:
                    p[i] = kappa * head_kwh[i] / dt_h
        elif residual < 0.0:
            denom = 0.0
            for i in range(n):
                if free[i]:
                    denom += depth_kwh[i]
            if denom <= 0.0:
                for i in range(n):
                    if free[i]:
                        p[i] = 0.0
                break
            kappa = residual * dt_h / denom
            for i in range(n):
                if free[i]:
                    p[i] = kappa * depth_kwh[i] / dt_h
        else:
            kappa = 0.0
            for i in range(n):
                if free[i]:
                    p[i] = 0.0
        any_viol = False
        for i in range(n):
            if free[i]:
                tol = 1e-12 * max(1.0, abs(ceil_kw[i]))
                if p[i] > ceil_kw[i] + tol or p[i] < floor_kw[i] - tol:
                    if p[i] > ceil_kw[i]:
                        p[i] = ceil_kw[i]
                    elif p[i] < floor_kw[i]:
                        p[i] = floor_kw[i]
                    clipped[i] = True
                    free[i] = False
                    any_viol = True
        if not any_viol:
            break
    return p, kappa, clipped, n_iter


@njit(cache=True)
def gae_scan(rewards, values, bootstrap_value, nonterminal, gamma, lam):
    k = rewards.shape[0]
    adv = np.zeros(k)
    next_value = bootstrap_value
    running = 0.0
    for i in range(k - 1, -1, -1):
        delta = rewards[i] + gamma * next_value * nonterminal[i] - values[i]
        running = delta + gamma * lam * nonterminal[i] * running
        adv[i] = running
        next_value = values[i]
    return adv
