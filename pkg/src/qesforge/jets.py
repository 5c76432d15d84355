"""Truncated Taylor series ("jets") of fixed order 6.

A jet stores f(x0), f'(x0)/1!, ..., f^(6)(x0)/6! and propagates them through
arithmetic and elementary functions exactly, so downstream code gets machine-
precision derivatives without symbolic algebra or finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainEvaluationError

ORDER = 6
N_COEFF = ORDER + 1

_FACT = [math.factorial(k) for k in range(N_COEFF)]


@dataclass(frozen=True)
class Jet:
    """Value plus scaled derivatives of a scalar function at base point x0."""

    x0: float
    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) != N_COEFF:
            raise ValueError(f"jet needs exactly {N_COEFF} coefficients")

    @property
    def value(self) -> float:
        return self.coeffs[0]

    def derivative(self, k: int) -> float:
        """k-th derivative of the represented function at x0, k <= 6."""
        if not 0 <= k <= ORDER:
            raise ValueError(f"derivative order {k} outside 0..{ORDER}")
        return self.coeffs[k] * _FACT[k]

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check_base(other)
            return Jet(self.x0, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))
        return Jet(self.x0, (self.coeffs[0] + other,) + self.coeffs[1:])

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.x0, tuple(-a for a in self.coeffs))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check_base(other)
            a, b = self.coeffs, other.coeffs
            out = [0.0] * N_COEFF
            for i in range(N_COEFF):
                ai = a[i]
                if ai == 0.0:
                    continue
                for j in range(N_COEFF - i):
                    out[i + j] += ai * b[j]
            return Jet(self.x0, tuple(out))
        return Jet(self.x0, tuple(a * other for a in self.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            self._check_base(other)
            return _div(self, other)
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return constant(other, self.x0) / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("jet exponent must be an integer")
        if n < 0:
            return 1.0 / (self ** (-n))
        result = constant(1.0, self.x0)
        base = self
        k = n
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def _check_base(self, other: "Jet"):
        if self.x0 != other.x0:
            raise ValueError("jets have different base points")


def constant(v: float, x0: float = 0.0) -> Jet:
    return Jet(x0, (float(v),) + (0.0,) * ORDER)


def differentiate(j: Jet, n: int = 1) -> Jet:
    """Jet of the n-th derivative; the top n coefficients are lost (set to 0)."""
    if n < 0:
        raise ValueError("derivative order must be nonnegative")
    coeffs = j.coeffs
    for _ in range(n):
        coeffs = tuple((k + 1) * coeffs[k + 1] for k in range(N_COEFF - 1)) + (0.0,)
    return Jet(j.x0, coeffs)


def variable(x0: float) -> Jet:
    """The identity function x as a jet at x0."""
    return Jet(x0, (float(x0), 1.0) + (0.0,) * (ORDER - 1))


def _div(num: Jet, den: Jet) -> Jet:
    if den.coeffs[0] == 0.0:
        raise DomainEvaluationError("division by zero", num.x0)
    a, b = num.coeffs, den.coeffs
    q = [0.0] * N_COEFF
    inv = 1.0 / b[0]
    for k in range(N_COEFF):
        acc = a[k]
        for j in range(k):
            acc -= q[j] * b[k - j]
        q[k] = acc * inv
    return Jet(num.x0, tuple(q))


def exp(u: Jet) -> Jet:
    c = [0.0] * N_COEFF
    c[0] = math.exp(u.coeffs[0])
    for k in range(1, N_COEFF):
        acc = 0.0
        for j in range(1, k + 1):
            acc += j * u.coeffs[j] * c[k - j]
        c[k] = acc / k
    return Jet(u.x0, tuple(c))


def _sin_cos(u: Jet, hyperbolic: bool):
    s = [0.0] * N_COEFF
    c = [0.0] * N_COEFF
    if hyperbolic:
        s[0], c[0] = math.sinh(u.coeffs[0]), math.cosh(u.coeffs[0])
    else:
        s[0], c[0] = math.sin(u.coeffs[0]), math.cos(u.coeffs[0])
    for k in range(1, N_COEFF):
        sa = ca = 0.0
        for j in range(1, k + 1):
            sa += j * u.coeffs[j] * c[k - j]
            ca += j * u.coeffs[j] * s[k - j]
        s[k] = sa / k
        c[k] = ca / k if hyperbolic else -ca / k
    return Jet(u.x0, tuple(s)), Jet(u.x0, tuple(c))


def sin(u: Jet) -> Jet:
    return _sin_cos(u, False)[0]


def cos(u: Jet) -> Jet:
    return _sin_cos(u, False)[1]


def tan(u: Jet) -> Jet:
    s, c = _sin_cos(u, False)
    if c.coeffs[0] == 0.0:
        raise DomainEvaluationError("tan at a pole", u.x0)
    return s / c


def sinh(u: Jet) -> Jet:
    return _sin_cos(u, True)[0]


def cosh(u: Jet) -> Jet:
    return _sin_cos(u, True)[1]


def tanh(u: Jet) -> Jet:
    s, c = _sin_cos(u, True)
    return s / c


def sqrt(u: Jet) -> Jet:
    if u.coeffs[0] < 0.0:
        raise DomainEvaluationError("sqrt of a negative value", u.x0)
    if u.coeffs[0] == 0.0:
        raise DomainEvaluationError("sqrt at a zero is not jet-differentiable", u.x0)
    r = [0.0] * N_COEFF
    r[0] = math.sqrt(u.coeffs[0])
    inv = 0.5 / r[0]
    for k in range(1, N_COEFF):
        acc = u.coeffs[k]
        for j in range(1, k):
            acc -= r[j] * r[k - j]
        r[k] = acc * inv
    return Jet(u.x0, tuple(r))


FUNCTIONS = {
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "sinh": sinh,
    "cosh": cosh,
    "tanh": tanh,
    "exp": exp,
    "sqrt": sqrt,
}
