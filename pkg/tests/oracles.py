"""Independent reference implementations used as test oracles.

Nothing here imports the package's solvers: routing is checked against
exhaustive enumeration, the SOCP against an LP over a polygonal
approximation of each cone, shortest paths against networkx.
"""
from __future__ import annotations

import itertools
from collections import deque

import numpy as np
from scipy.optimize import linprog


def brute_force_slot(Q, dst, links, caps, V, h_dummy=1.0):
    """Optimal ``-sum w x - V h (data + dummies)`` by enumerating every unit assignment.

    Each capacity unit of each link is idle, a dummy, or one packet of some
    flow (any sign of weight).  Departures per (node, flow) may not exceed
    the backlog.
    """
    n_flows = Q.shape[1]
    units = [l for l, c in zip(links, caps) for _ in range(int(c))]
    choices = ["idle", "dummy"] + list(range(n_flows))
    best = np.inf
    for combo in itertools.product(choices, repeat=len(units)):
        out = {}
        obj = 0.0
        ok = True
        for (i, j), ch in zip(units, combo):
            if ch == "idle":
                continue
            if ch == "dummy":
                obj -= V * h_dummy
                continue
            f = ch
            out[(i, f)] = out.get((i, f), 0) + 1
            if out[(i, f)] > Q[i, f]:
                ok = False
                break
            qj = 0 if j == dst[f] else Q[j, f]
            obj -= (Q[i, f] - qj) + V * h_dummy
        if ok:
            best = min(best, obj)
    return best


def bfs_oracle(adj, src, dst):
    """Hop count ``src -> dst`` by plain breadth-first search, or None."""
    n = len(adj)
    seen = {src: 0}
    dq = deque([src])
    while dq:
        u = dq.popleft()
        if u == dst:
            return seen[u]
        for v in range(n):
            if adj[u][v] and v not in seen:
                seen[v] = seen[u] + 1
                dq.append(v)
    return None


def polygon_socp(R, I, rho, sides=2048):
    """Bracket the min-max sidelobe value with an LP.

    Replacing ``|z| <= eta`` with ``Re(z e^{-j phi_k}) <= eta`` over ``sides``
    phases relaxes each cone, so the LP value is a lower bound; the peak
    magnitude at the LP solution is an upper bound, at most
    ``1/cos(pi/sides)`` above it.  Returns ``(lower, upper, s)``.
    """
    L, M = R.shape
    phi = 2.0 * np.pi * np.arange(sides) / sides
    c, s_ = np.cos(phi), np.sin(phi)
    A = (c[:, None, None] * R[None] + s_[:, None, None] * I[None]).reshape(-1, M)
    A_ub = np.hstack([A, -np.ones((A.shape[0], 1))])
    b_ub = np.zeros(A.shape[0])
    A_ub = np.vstack([A_ub, np.r_[-np.ones(M), 0.0]])
    b_ub = np.r_[b_ub, -rho * M]
    cost = np.r_[np.zeros(M), 1.0]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(0, 1)] * M + [(0, None)], method="highs")
    assert res.status == 0, res.message
    s = res.x[:M]
    upper = float(np.max(np.hypot(R @ s, I @ s)))
    return float(res.fun), upper, s


def enumerate_binary_peak(R, I, k_on):
    """Minimum masked peak over all binary weight vectors with exactly ``k_on`` ones."""
    M = R.shape[1]
    best = np.inf
    for on in itertools.combinations(range(M), k_on):
        s = np.zeros(M)
        s[list(on)] = 1.0
        best = min(best, float(np.max(np.hypot(R @ s, I @ s))))
    return best
