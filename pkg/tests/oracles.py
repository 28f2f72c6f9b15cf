"""Independent oracles shared by the test suite.

Everything here is deliberately naive (finite differences, scalar loops,
brute-force scans) so it cannot share a bug with the vectorized code under
test.
"""

import numpy as np


def central_diff_grad(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f at x, one entry at a time."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        i = it.multi_index
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
        it.iternext()
    return g


def rel_err(approx, exact):
    """Scale-relative worst-case error: max|a-e| / (max|e| + tiny)."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    denom = np.abs(exact).max() + 1e-12
    return np.abs(approx - exact).max() / denom


def loop_softmax_row(row):
    m = max(row)
    e = [np.exp(v - m) for v in row]
    s = sum(e)
    return [v / s for v in e]


def loop_log_sum_exp(row):
    m = max(row)
    return m + np.log(sum(np.exp(v - m) for v in row))


def loop_cosine(u, v):
    nu = np.sqrt(sum(x * x for x in u))
    nv = np.sqrt(sum(x * x for x in v))
    if nu < 1e-12 or nv < 1e-12:
        return 0.0
    return sum(a * b for a, b in zip(u, v)) / (nu * nv)


def brute_force_edges(x, threshold):
    """O(n^2) pair scan: undirected edges where cosine similarity > threshold."""
    n = x.shape[0]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if loop_cosine(x[i], x[j]) > threshold:
                edges.append((i, j))
    return sorted(edges)


def loop_normalized_adjacency(edges, n):
    """Scalar-loop D^-1/2 (A+I) D^-1/2 for small graphs."""
    a = np.zeros((n, n))
    for u, v in edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    a = a + np.eye(n)
    deg = a.sum(axis=1)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if a[i, j] != 0.0:
                out[i, j] = a[i, j] / np.sqrt(deg[i] * deg[j])
    return out


def loop_gcn_layer(a_norm, h, w, b):
    """One propagation layer computed with explicit scalar loops."""
    n, d_in = h.shape
    d_out = w.shape[1]
    hw = np.zeros((n, d_out))
    for i in range(n):
        for k in range(d_out):
            hw[i, k] = sum(h[i, j] * w[j, k] for j in range(d_in))
    out = np.zeros((n, d_out))
    for i in range(n):
        for k in range(d_out):
            out[i, k] = sum(a_norm[i, j] * hw[j, k] for j in range(n)) + b[0, k]
    return out


def loop_gcl_sim(x_star):
    """Literal double sum of Eq-style similarity loss, including i == j."""
    n = x_star.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += loop_cosine(x_star[i], x_star[j])
    return -total / n


def loop_gcl_dis(x, x_star):
    n = x.shape[0]
    total = 0.0
    for i in range(n):
        sims = [loop_cosine(x[i], x_star[j]) for j in range(n)]
        total += loop_log_sum_exp(sims)
    return total
