"""Independent reference solvers used to check the conic fits.

Nothing here touches the package's solver path; every oracle is a
brute-force or closed-form computation on a small problem.
"""
from itertools import combinations

import numpy as np


def lp_by_enumeration(c, G, h, tol=1e-9):
    """``min c.z`` s.t. ``G z <= h`` by enumerating every vertex.

    Solves each square subsystem of active constraints and keeps the best
    feasible point. Assumes the feasible set is bounded and nonempty.
    """
    c, G, h = (np.asarray(a, dtype=float) for a in (c, G, h))
    n = len(c)
    best = np.inf
    for rows in combinations(range(len(h)), n):
        A = G[list(rows)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        z = np.linalg.solve(A, h[list(rows)])
        if np.all(G @ z <= h + tol):
            best = min(best, float(c @ z))
    return best


def golden_section(fun, lo, hi, tol=1e-12):
    """Minimize a unimodal scalar function on ``[lo, hi]``."""
    invphi = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = (a + b) / 2
    return x, fun(x)


def diagonal_instance(rng, n_states=3):
    """Diagonal qubit states ``diag(a_j, 1 - a_j)`` and random 2-outcome frequencies."""
    a = rng.uniform(0, 1, size=n_states)
    states = np.array([np.diag([x, 1 - x]).astype(complex) for x in a])
    f0 = rng.uniform(0, 1, size=n_states)
    freqs = np.column_stack([f0, 1 - f0])
    return a, states, freqs


# For diagonal states only the diagonal (x, y) of Pi_0 matters, and the
# diagonal of any 2-outcome POVM is a pair x, y in [0, 1]. So
# p_j0 = a_j x + (1 - a_j) y and |f_j1 - p_j1| = |f_j0 - p_j0|.


def single_delta_oracle(a, freqs):
    """LP over ``z = (x, y, delta)``: min delta s.t. |f_j0 - p_j0| <= delta, box on x, y."""
    G, h = [], []
    for aj, fj in zip(a, freqs[:, 0]):
        G.append([aj, 1 - aj, -1])
        h.append(fj)
        G.append([-aj, -(1 - aj), -1])
        h.append(-fj)
    G += [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]]
    h += [0, 1, 0, 1, 0, 2]
    return lp_by_enumeration([0, 0, 1], G, h)


def least_squares_oracle(a, freqs):
    """Exact minimum of sum_jk (f_jk - p_jk)^2 over the box by active-set enumeration.

    The objective is ``2 ||M z - f0||^2`` with ``M = [a, 1 - a]``. Candidate
    minimizers: the unconstrained one, the 1-D minimizer on each edge, and
    the four corners; the best feasible candidate is the box minimum.
    """
    M = np.column_stack([a, 1 - a])
    f0 = freqs[:, 0]

    def obj(z):
        return 2 * float(np.sum((M @ z - f0) ** 2))

    cands = [np.linalg.lstsq(M, f0, rcond=None)[0]]
    for fixed in (0, 1):
        for val in (0.0, 1.0):
            free = 1 - fixed
            col = M[:, free]
            t = np.clip(col @ (f0 - val * M[:, fixed]) / (col @ col), 0, 1)
            z = np.zeros(2)
            z[fixed], z[free] = val, t
            cands.append(z)
    cands += [np.array(c, dtype=float) for c in ((0, 0), (0, 1), (1, 0), (1, 1))]
    feasible = [z for z in cands if np.all(z >= -1e-12) and np.all(z <= 1 + 1e-12)]
    return min(obj(z) for z in feasible)


def least_squares_grid(a, freqs, n=201):
    """Coarse grid search over the box (sanity check on the active-set oracle)."""
    grid = np.linspace(0, 1, n)
    x, y = np.meshgrid(grid, grid, indexing="ij")
    p = a[:, None, None] * x + (1 - a[:, None, None]) * y
    return float((2 * (p - freqs[:, 0, None, None]) ** 2).sum(axis=0).min())
