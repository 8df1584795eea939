"""Exact rational linear algebra: linear systems and linear feasibility.

Everything here works on ``fractions.Fraction`` so that strict inequalities and
equalities can be decided without tolerances.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


def solve_linear_system(A: Sequence[Sequence], b: Sequence) -> list[Fraction] | None:
    """A solution of ``A x = b`` (free variables set to zero), or None if inconsistent."""
    m = len(A)
    n = len(A[0]) if m else 0
    rows = [[as_fraction(v) for v in A[i]] + [as_fraction(b[i])] for i in range(m)]
    pivot_cols = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, m) if rows[i][c] != 0), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(m):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [vi - f * vr for vi, vr in zip(rows[i], rows[r])]
        pivot_cols.append(c)
        r += 1
        if r == m:
            break
    for i in range(r, m):
        if rows[i][n] != 0:
            return None
    x = [Fraction(0)] * n
    for i, c in enumerate(pivot_cols):
        x[c] = rows[i][n]
    return x


def find_feasible_point(A: Sequence[Sequence], b: Sequence) -> list[Fraction] | None:
    """Find ``x`` (unrestricted in sign) with ``A x >= b`` row-wise, or return None.

    Phase-I simplex with Bland's rule over exact rationals. Free variables are
    split as ``x = u - w``; rows with ``b_i <= 0`` start with their slack basic, the
    others get an artificial variable.
    """
    m = len(A)
    if m == 0:
        return [Fraction(0)] * (len(A[0]) if A else 0)
    n = len(A[0])
    a = [[as_fraction(v) for v in row] for row in A]
    rhs = [as_fraction(v) for v in b]

    # columns: u (n) | w (n) | slack (m) | artificial (k)
    needs_art = [rhs[i] > 0 for i in range(m)]
    art_col = {}
    n_cols = 2 * n + m
    for i in range(m):
        if needs_art[i]:
            art_col[i] = n_cols
            n_cols += 1

    tableau = []
    basis = []
    for i in range(m):
        row = [Fraction(0)] * (n_cols + 1)
        if needs_art[i]:
            # a.u - a.w - s = b, b > 0
            for j in range(n):
                row[j] = a[i][j]
                row[n + j] = -a[i][j]
            row[2 * n + i] = Fraction(-1)
            row[art_col[i]] = Fraction(1)
            row[-1] = rhs[i]
            basis.append(art_col[i])
        else:
            # -a.u + a.w + s = -b >= 0
            for j in range(n):
                row[j] = -a[i][j]
                row[n + j] = a[i][j]
            row[2 * n + i] = Fraction(1)
            row[-1] = -rhs[i]
            basis.append(2 * n + i)
        tableau.append(row)

    art_set = set(art_col.values())
    # reduced costs of the phase-I objective (sum of artificials)
    cost = [Fraction(0)] * (n_cols + 1)
    for i in range(m):
        if needs_art[i]:
            for j in range(n_cols + 1):
                if j not in art_set:
                    cost[j] -= tableau[i][j]

    while True:
        entering = next((j for j in range(n_cols) if cost[j] < 0), None)
        if entering is None:
            break
        leaving = None
        best = None
        for i in range(m):
            coef = tableau[i][entering]
            if coef > 0:
                ratio = tableau[i][-1] / coef
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leaving]):
                    best, leaving = ratio, i
        if leaving is None:
            # unbounded direction cannot occur in phase I (objective bounded below by 0)
            raise ArithmeticError("phase-I simplex reported unbounded")
        _pivot(tableau, cost, leaving, entering)
        basis[leaving] = entering

    if -cost[-1] != 0:
        return None
    values = [Fraction(0)] * n_cols
    for i, col in enumerate(basis):
        values[col] = tableau[i][-1]
    return [values[j] - values[n + j] for j in range(n)]


def _pivot(tableau, cost, r, c):
    row = tableau[r]
    inv = 1 / row[c]
    row = [v * inv for v in row]
    tableau[r] = row
    for i, other in enumerate(tableau):
        if i != r:
            f = other[c]
            if f != 0:
                tableau[i] = [vo - f * vr for vo, vr in zip(other, row)]
    f = cost[c]
    if f != 0:
        cost[:] = [vo - f * vr for vo, vr in zip(cost, row)]
