"""Independent reference implementations used by the tests."""

import numpy as np


def scoring_events(plan_xyz, feet_tracks, dt, radius, delay):
    """Brute-force event simulation of step scoring.

    Counts consecutive in-radius samples with integers (no float timer) and
    restarts the count whenever no foot is inside the current target's
    radius or right after a score.  Returns the sample indices of scores.
    """
    n = len(plan_xyz)
    k = 0
    run = 0
    events = []
    for t, feet in enumerate(feet_tracks):
        if k >= n:
            break
        target = plan_xyz[k]
        inside = any(np.sqrt(np.sum((np.asarray(f) - target) ** 2)) <= radius for f in feet)
        run = run + 1 if inside else 0
        if run * dt > delay + 1e-9:
            events.append(t)
            k += 1
            run = 0
    return events


def gae_brute_force(rewards, values, dones, gamma, lam):
    """A_t = sum_l (gamma lam)^l delta_{t+l}, truncated at the first terminal."""
    T = len(rewards)
    adv = np.zeros(T)
    for t in range(T):
        total, coef = 0.0, 1.0
        for u in range(t, T):
            nonterminal = 1.0 - dones[u]
            delta = rewards[u] + gamma * values[u + 1] * nonterminal - values[u]
            total += coef * delta
            if dones[u]:
                break
            coef *= gamma * lam
        adv[t] = total
    return adv, adv + np.asarray(values[:T])
