"""Generalised advantage estimation."""

from __future__ import annotations

import numpy as np


def gae(rewards, values, next_value, dones, gamma: float, lam: float):
    """Advantages and returns for one or several aligned sequences.

    Arrays are indexed by time along axis 0; extra trailing axes hold
    independent sequences. ``dones[t]`` cuts the bootstrap from step t to
    t + 1, so nothing leaks across episode boundaries.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    d = np.asarray(dones, dtype=np.float64)
    if not (r.shape == v.shape == d.shape):
        raise ValueError("rewards, values and dones must have equal shapes")
    nv = np.broadcast_to(np.asarray(next_value, dtype=np.float64), r.shape[1:])
    adv = np.zeros_like(r)
    last = np.zeros(r.shape[1:])
    for t in reversed(range(r.shape[0])):
        keep = 1.0 - d[t]
        v_next = nv if t == r.shape[0] - 1 else v[t + 1]
        delta = r[t] + gamma * v_next * keep - v[t]
        last = delta + gamma * lam * keep * last
        adv[t] = last
    return adv, adv + v
