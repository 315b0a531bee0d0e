"""Integer linear forms a*x + b over a single unknown.

Both the reverse-mode generator and the trace parser push values of this
shape through arithmetic.  All arithmetic is exact; anything that would
leave the a*x + b family (two symbolic operands under * or /, a symbolic
divisor, inexact division) raises.
"""

from __future__ import annotations

from dataclasses import dataclass


class NonLinearExpression(Exception):
    pass


class InexactDivision(Exception):
    pass


@dataclass(frozen=True)
class LinearValue:
    coeff: int = 0
    const: int = 0

    @property
    def is_numeric(self) -> bool:
        return self.coeff == 0

    def add(self, other: "LinearValue") -> "LinearValue":
        return LinearValue(self.coeff + other.coeff, self.const + other.const)

    def sub(self, other: "LinearValue") -> "LinearValue":
        return LinearValue(self.coeff - other.coeff, self.const - other.const)

    def neg(self) -> "LinearValue":
        return LinearValue(-self.coeff, -self.const)

    def mul(self, other: "LinearValue") -> "LinearValue":
        if self.coeff != 0 and other.coeff != 0:
            raise NonLinearExpression("product of two symbolic operands")
        if other.coeff == 0:
            return LinearValue(self.coeff * other.const, self.const * other.const)
        return LinearValue(other.coeff * self.const, other.const * self.const)

    def div(self, other: "LinearValue") -> "LinearValue":
        if other.coeff != 0:
            raise NonLinearExpression("symbolic divisor")
        d = other.const
        if d == 0:
            raise InexactDivision("division by zero")
        if self.coeff % d != 0 or self.const % d != 0:
            raise InexactDivision(f"{self} not divisible by {d}")
        return LinearValue(self.coeff // d, self.const // d)

    def scale(self, k: int) -> "LinearValue":
        return LinearValue(self.coeff * k, self.const * k)

    def resolve(self, x: int) -> int:
        return self.coeff * x + self.const

    @staticmethod
    def of(n: int) -> "LinearValue":
        return LinearValue(0, n)

    @staticmethod
    def unknown() -> "LinearValue":
        return LinearValue(1, 0)

    def render(self, symbol: str = "x") -> str:
        """Human form used in solution steps: '2x + 18', 'x', '30 - 2x', '7'."""
        a, b = self.coeff, self.const
        if a == 0:
            return str(b)
        if a == 1:
            head = symbol
        elif a == -1:
            head = f"-{symbol}"
        else:
            head = f"{a}{symbol}"
        if b == 0:
            return head
        if a < 0 < b:
            # prefer '30 - 2x' over '-2x + 30'
            return f"{b} - {-a}{symbol}" if a != -1 else f"{b} - {symbol}"
        if b < 0:
            return f"{head} - {-b}"
        return f"{head} + {b}"
