"""Generate the correction coefficients c_r used by the corrected trapezoidal rule.

For a smooth compactly supported g the punctured lattice rule

    sum_{j != 0} ln|j| g(j) + sum_r c_r sum_{q in S_r} g(q)

reproduces  int ln|y| g(y) dy  up to terms of order 2p+2 in the Taylor
expansion of g at the origin.  Matching the D4-invariant polynomial moments
P of degree <= 2p gives the linear conditions

    sum_r c_r sum_{q in S_r} P(q) = Z_P'(0) / 2,

where Z_P(s) = sum_{j != 0} P(j) |j|^(-2s) is continued analytically through
the theta-function (Hecke) representation.  Each P is written in the basis
|x|^(2n) Re((x + i y)^(4m)); the harmonic factor gives an entire Epstein zeta
function except for m = 0.  The systems for p >= 3 are underdetermined and
are solved in the minimum-norm sense.

Usage:  python tools/gen_pct_coefficients.py > src/ls2d/data/pct_coefficients.txt
"""
import sys

import mpmath as mp

mp.mp.dps = 50
NMAX = 12  # lattice cut-off for theta sums (t >= 1)


def _harmonic(m, i, j):
    return mp.re(mp.mpc(i, j) ** (4 * m))


def _theta(m, t):
    s = mp.mpf(0)
    for i in range(-NMAX, NMAX + 1):
        for j in range(-NMAX, NMAX + 1):
            if i == 0 and j == 0:
                continue
            s += _harmonic(m, i, j) * mp.exp(-mp.pi * t * (i * i + j * j))
    return s


def zeta_derivative(m, n):
    """Z'_{H_m}(-n) for H_m = Re z^(4m), n >= 0."""
    d = 4 * m
    s = -n
    integral = mp.quad(lambda t: (t ** (s - 1) + t ** (d - s)) * _theta(m, t), [1, 2, 4, mp.inf])
    if m > 0:
        return mp.pi ** (-n) * integral * (-1) ** n * mp.factorial(n)
    if n == 0:
        return integral - 1 - mp.euler - mp.log(mp.pi)
    lam = integral + mp.mpf(1) / (s - 1) - mp.mpf(1) / s
    return mp.pi ** (-n) * lam * (-1) ** n * mp.factorial(n)


def representatives(k):
    reps = []
    i = 0
    while len(reps) < k:
        for j in range(i + 1):
            reps.append((i, j))
        i += 1
    return reps[:k]


def orbit(i, j):
    pts = set()
    for a, b in ((i, j), (j, i)):
        for sa in (1, -1):
            for sb in (1, -1):
                pts.add((sa * a, sb * b))
    return sorted(pts)


def coefficients(p):
    k = p * (p + 1) // 2 + 1
    reps = representatives(k)
    rows, rhs = [], []
    for K in range(p + 1):
        for m in range(K // 2 + 1):
            n = K - 2 * m
            row = []
            for (i, j) in reps:
                row.append(sum(mp.mpf(a * a + b * b) ** n * _harmonic(m, a, b) for a, b in orbit(i, j)))
            rows.append(row)
            rhs.append(zeta_derivative(m, n) / 2)
    A = mp.matrix(rows)
    b = mp.matrix(rhs)
    # minimum-norm solution  A^T (A A^T)^-1 b
    x = A.T * mp.lu_solve(A * A.T, b)
    return [x[r] for r in range(k)]


def main():
    out = sys.stdout
    out.write("# p r c_r\n")
    for p in range(1, 5):
        for r, c in enumerate(coefficients(p), start=1):
            out.write(f"{p} {r} {mp.nstr(c, 25, min_fixed=-5, max_fixed=5)}\n")


if __name__ == "__main__":
    main()
