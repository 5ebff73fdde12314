"""Compiled GWMIN over an implicitly stored conflict graph.

The graph is never materialised.  Vertices sharing a task form a clique, and
so do vertices occupying the same (antenna, slot) or (satellite, slot) cell.
Vertex i is adjacent to j iff they share the task or any cell.  Results
match ``confgraph.greedy_mwis`` on the explicit graph vertex for vertex.

Vertices must be sorted by task so that each task's members are contiguous.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _gwmin(task, ant, eos, start, ps, weight, num_slots, n_ant, n_eos):
    n = task.shape[0]
    selected = np.empty(0, np.int64)
    if n == 0:
        return selected

    # task ranges (vertices sorted by task)
    t_lo = np.empty(n, np.int64)
    t_hi = np.empty(n, np.int64)
    i = 0
    while i < n:
        j = i
        while j < n and task[j] == task[i]:
            j += 1
        for q in range(i, j):
            t_lo[q] = i
            t_hi[q] = j
        i = j

    # cell -> members (CSR); antenna cells first, then satellite cells
    n_cells = (n_ant + n_eos) * num_slots
    counts = np.zeros(n_cells + 1, np.int64)
    for v in range(n):
        for s in range(start[v], start[v] + ps[v]):
            counts[ant[v] * num_slots + s + 1] += 1
            counts[(n_ant + eos[v]) * num_slots + s + 1] += 1
    for c in range(n_cells):
        counts[c + 1] += counts[c]
    fill = counts[:-1].copy()
    members = np.empty(counts[n_cells], np.int64)
    for v in range(n):
        for s in range(start[v], start[v] + ps[v]):
            c = ant[v] * num_slots + s
            members[fill[c]] = v
            fill[c] += 1
            c = (n_ant + eos[v]) * num_slots + s
            members[fill[c]] = v
            fill[c] += 1

    stamp = np.full(n, -1, np.int64)
    deg = np.empty(n, np.int64)
    for v in range(n):
        d = t_hi[v] - t_lo[v] - 1
        for s in range(start[v], start[v] + ps[v]):
            for c in (ant[v] * num_slots + s, (n_ant + eos[v]) * num_slots + s):
                for m in range(counts[c], counts[c + 1]):
                    u = members[m]
                    if task[u] != task[v] and stamp[u] != v:
                        stamp[u] = v
                        d += 1
        deg[v] = d

    alive = np.ones(n, np.bool_)
    out = np.empty(n, np.int64)
    n_out = 0
    token = n
    dead = np.empty(n, np.int64)
    while True:
        best = -1
        best_r = 0.0
        for v in range(n):
            if alive[v] and weight[v] > 0:
                r = weight[v] / (deg[v] + 1)
                if best < 0 or r > best_r:
                    best = v
                    best_r = r
        if best < 0:
            break
        out[n_out] = best
        n_out += 1

        # closed neighbourhood of best
        nd = 0
        for u in range(t_lo[best], t_hi[best]):
            if alive[u]:
                alive[u] = False
                dead[nd] = u
                nd += 1
        for s in range(start[best], start[best] + ps[best]):
            for c in (ant[best] * num_slots + s, (n_ant + eos[best]) * num_slots + s):
                for m in range(counts[c], counts[c + 1]):
                    u = members[m]
                    if alive[u]:
                        alive[u] = False
                        dead[nd] = u
                        nd += 1

        # each live vertex loses one degree per dead neighbour
        for q in range(nd):
            u = dead[q]
            token += 1
            if task[u] != task[best]:
                for x in range(t_lo[u], t_hi[u]):
                    if alive[x]:
                        stamp[x] = token
                        deg[x] -= 1
            for s in range(start[u], start[u] + ps[u]):
                for c in (ant[u] * num_slots + s, (n_ant + eos[u]) * num_slots + s):
                    for m in range(counts[c], counts[c + 1]):
                        x = members[m]
                        if alive[x] and stamp[x] != token:
                            stamp[x] = token
                            deg[x] -= 1
    return np.sort(out[:n_out])


def gwmin_arrays(task, ant, eos, start, ps, weight, num_slots, n_ant, n_eos):
    """Indices chosen by GWMIN; all index arrays are int64, ``weight`` float64."""
    return _gwmin(np.ascontiguousarray(task, np.int64), np.ascontiguousarray(ant, np.int64),
                  np.ascontiguousarray(eos, np.int64), np.ascontiguousarray(start, np.int64),
                  np.ascontiguousarray(ps, np.int64), np.ascontiguousarray(weight, np.float64),
                  int(num_slots), int(n_ant), int(n_eos))
