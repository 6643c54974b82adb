"""Pure-numpy reference implementations of the hot kernels.

Same signatures and semantics as the numba variants in
``_kernels_numba``; this module is the fallback when the jit backend is
disabled or unavailable, and the ground truth the backends are tested
against each other with.
"""

import numpy as np

BACKEND_NAME = "numpy"


def ev_power_bounds(soc, cap_kwh, p_ch_max, p_dis_max, soc_min_eff, soc_max_eff, dt_h):
    """Per-EV feasible power box and SOC headroom/depth energies.

    floor may be positive when an EV sits below a rising minimum bound
    (it must charge at least that much); ceil is clamped so the box is
    never empty even if the charger cannot satisfy the floor.
    """
    ceil = np.minimum(p_ch_max, (soc_max_eff - soc) * cap_kwh / dt_h)
    floor = np.maximum(p_dis_max, (soc_min_eff - soc) * cap_kwh / dt_h)
    floor = np.minimum(floor, ceil)
    head = np.maximum(0.0, soc_max_eff - soc) * cap_kwh
    depth = np.maximum(0.0, soc - soc_min_eff) * cap_kwh
    return floor, ceil, head, depth


def waterfill(target_kw, floor_kw, ceil_kw, head_kwh, depth_kwh, dt_h):
    """Distribute an aggregate power over EVs at a common buffer factor.

    Solves for the scalar kappa such that every unclipped EV moves the
    same fraction of its SOC headroom (charging) or depth (discharging),
    then clips to the per-EV box and re-solves over the remaining EVs
    until the target is conserved or every EV is pinned. kappa is the
    shared buffer factor: positive charging, negative discharging, so
    p_i = kappa * buffer_i / dt on the free set in either regime.

    Returns (p_kw, kappa, clipped, n_iter).
    """
    n = floor_kw.shape[0]
    p = np.zeros(n)
    clipped = np.zeros(n, dtype=np.bool_)
    free = np.ones(n, dtype=np.bool_)
    kappa = 0.0
    n_iter = 0
    for _ in range(n + 1):
        n_iter += 1
        residual = target_kw - float(p[clipped].sum())
        if residual > 0.0:
            denom = float(head_kwh[free].sum())
            if denom <= 0.0:
                p[free] = 0.0
                break
            kappa = residual * dt_h / denom
            p[free] = kappa * head_kwh[free] / dt_h
        elif residual < 0.0:
            denom = float(depth_kwh[free].sum())
            if denom <= 0.0:
                p[free] = 0.0
                break
            kappa = residual * dt_h / denom
            p[free] = kappa * depth_kwh[free] / dt_h
        else:
            kappa = 0.0
            p[free] = 0.0
        tol = 1e-12 * np.maximum(1.0, np.abs(ceil_kw))
        viol = free & ((p > ceil_kw + tol) | (p < floor_kw - tol))
        if not viol.any():
            break
        p[viol] = np.clip(p[viol], floor_kw[viol], ceil_kw[viol])
        clipped |= viol
        free &= ~viol
    return p, kappa, clipped, n_iter


def gae_scan(rewards, values, bootstrap_value, nonterminal, gamma, lam):
    """Backward recursion for truncated generalized advantage estimates."""
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
