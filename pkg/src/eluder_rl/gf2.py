"""Linear systems over the two-element field, with rows packed into Python ints.

Bit ``i`` of a row is the coefficient of variable ``i``.
"""

from __future__ import annotations


def parity(x: int) -> int:
    return bin(x).count("1") & 1


def dot(a: int, b: int) -> int:
    return parity(a & b)


class Gf2System:
    """Incrementally maintained echelon form of ``<row, theta> = rhs`` equations.

    Rows are stored by leading (highest) bit, so reduction of a query vector is a
    single descending sweep.
    """

    def __init__(self, n_vars: int):
        self.n_vars = n_vars
        self._pivots: dict[int, tuple[int, int]] = {}
        self.consistent = True

    def copy(self) -> "Gf2System":
        other = Gf2System(self.n_vars)
        other._pivots = dict(self._pivots)
        other.consistent = self.consistent
        return other

    @property
    def rank(self) -> int:
        return len(self._pivots)

    def reduce(self, row: int, rhs: int = 0) -> tuple[int, int]:
        """Eliminate pivot columns from ``row``; returns (residual row, residual rhs)."""
        out = 0
        while row:
            lead = row.bit_length() - 1
            entry = self._pivots.get(lead)
            if entry is None:
                out |= 1 << lead
                row ^= 1 << lead
            else:
                row ^= entry[0]
                rhs ^= entry[1]
        return out, rhs

    def add(self, row: int, rhs: int) -> bool:
        """Add one equation. Returns False (and marks the system inconsistent) on conflict."""
        if not self.consistent:
            return False
        residual, r = self.reduce(row, rhs & 1)
        if residual == 0:
            if r:
                self.consistent = False
            return self.consistent
        self._pivots[residual.bit_length() - 1] = (residual, r)
        return True

    def value_of(self, row: int) -> int | None:
        """The forced value of ``<row, theta>`` over all solutions, or None if free."""
        residual, r = self.reduce(row, 0)
        return r if residual == 0 else None

    def solve(self) -> int | None:
        """One solution (free variables set to zero), or None if inconsistent."""
        if not self.consistent:
            return None
        theta = 0
        for lead in sorted(self._pivots):
            row, rhs = self._pivots[lead]
            bit = rhs ^ dot(row ^ (1 << lead), theta)
            if bit:
                theta |= 1 << lead
        return theta


def rank(rows) -> int:
    system = Gf2System(0)
    for row in rows:
        system.add(row, 0)
    return system.rank


def basis_indices(rows) -> list[int]:
    """Indices of a greedy maximal linearly independent subsequence of ``rows``."""
    system = Gf2System(0)
    picked = []
    for i, row in enumerate(rows):
        before = system.rank
        system.add(row, 0)
        if system.rank > before:
            picked.append(i)
    return picked


def bits_to_int(bits: str) -> int:
    """``"101"`` -> coordinates (1, 0, 1); coordinate 0 is the leftmost character."""
    value = 0
    for i, ch in enumerate(bits):
        if ch == "1":
            value |= 1 << i
        elif ch != "0":
            raise ValueError(f"not a bit string: {bits!r}")
    return value


def int_to_bits(value: int, n: int) -> str:
    return "".join("1" if (value >> i) & 1 else "0" for i in range(n))
