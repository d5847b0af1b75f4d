"""Independent reference implementations used by the tests.

Nothing here imports the package: loops, math.fsum and exact fractions only,
so agreement with the vectorized code is meaningful.
"""
import math
from fractions import Fraction


def step_B(z, b, M):
    return b + (1 - b) * (abs(z) >= M)


def fitness_loops(pi, K, B, L):
    """m_x = K_x sum_z B(x - z) K_z pi_z with K a list over sites and B a callable."""
    n = 2 * L + 1
    out = []
    for i in range(n):
        x = i - L
        acc = 0.0
        for j in range(n):
            z = j - L
            acc += B(x - z) * K[j] * pi[j]
        out.append(K[i] * acc)
    return out


def potential_fsum(pi, K, B, L, mu_tilde):
    m = fitness_loops(pi, K, B, L)
    return math.fsum(p * v for p, v in zip(pi, m)) + mu_tilde * math.fsum(math.log(p) for p in pi)


def dd_rates_loops(counts, K, C, L, birth=1.0, death=1.0):
    n = 2 * L + 1
    b, d = [], []
    for i in range(n):
        conv = sum(C(i - j) * counts[j] for j in range(n))
        b.append(birth * counts[i])
        d.append(death * counts[i] * conv / K[i])
    return b, d


def w_loops(pi, K, C, L, kind):
    n = 2 * L + 1
    out = []
    for i in range(n):
        conv = sum(C(i - j) * pi[j] for j in range(n))
        out.append(max(0.0, 1 - conv / K[i]) if kind == "W1" else K[i] / conv)
    return out


def solve_exact(A, rhs):
    """Gauss-Jordan elimination over Fractions."""
    n = len(A)
    M = [[Fraction(v) for v in row] + [Fraction(r)] for row, r in zip(A, rhs)]
    for c in range(n):
        piv = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c] / M[c][c]
                M[r] = [a - f * bb for a, bb in zip(M[r], M[c])]
    return [M[i][n] / M[i][i] for i in range(n)]


def equal_fitness_face(Ks, b, M_sites_apart=True, mass=1):
    """Weights on a face with sites >= M apart: K_i (b K_i w_i + sum_{j != i} K_j w_j) = m1.

    Ks are exact Fractions (or values convertible to them). Returns (weights, m1).
    """
    k = len(Ks)
    Ks = [Fraction(v) for v in Ks]
    b = Fraction(b)
    A, rhs = [], []
    for i in range(k):
        row = [Ks[i] * Ks[j] * (b if i == j else 1) for j in range(k)] + [Fraction(-1)]
        A.append(row)
        rhs.append(0)
    A.append([Fraction(1)] * k + [Fraction(0)])
    rhs.append(Fraction(mass))
    sol = solve_exact(A, rhs)
    return sol[:k], sol[k]


def dirichlet_moments(alpha, n):
    a0 = alpha * n
    mean = alpha / a0
    var = alpha * (a0 - alpha) / (a0 * a0 * (a0 + 1))
    return mean, var


def det_map_hand(pi, W, A=None):
    q = [p * w for p, w in zip(pi, W)]
    s = sum(q)
    q = [v / s for v in q]
    if A is None:
        return q
    n = len(q)
    return [sum(q[y] * A[y][x] for y in range(n)) for x in range(n)]


def moran_rates_loops(counts, K, B, L, sigma, mu):
    """Selection and mutation rates x -> y written out term by term."""
    n = 2 * L + 1
    N = sum(counts)
    pi = [c / N for c in counts]
    m = fitness_loops(pi, K, B, L)
    sel = [[0.0] * n for _ in range(n)]
    mut = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                sel[i][j] = N / 2 * pi[i] * pi[j] * (0.5 + sigma * (m[j] - m[i]))
                mut[i][j] = N / 2 * mu * pi[i]
    return sel, mut
