"""Admissibility screening for generating functions.

Decides whether a periodic U(x) can drive the three-level construction:
zero structure (simple zeros anywhere, one double zero at the half-period),
evenness about the half-period, the curvature constraint at double zeros,
and global nonnegativity of the branch discriminant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import expr, jets

GRID = 4096
FIRST_ORDER = "first_order"
SECOND_ORDER = "second_order_midpoint"
FORBIDDEN = "forbidden_higher_order"

RANGE_OK = "range_ok"
BRANCH_SWITCH = "branch_switch_required"


@dataclass(frozen=True)
class ZeroRecord:
    """One zero of U in [0, L): location, multiplicity, admissibility class."""

    x: float
    order: int
    classification: str


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class AdmissibilityReport:
    passed: bool
    zeros: tuple
    parity_defect: float
    curvature_value: float
    curvature_target: float
    third_derivative_midpoint: float
    s_min: float
    range_ok: bool
    checks: tuple = field(default=())

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True)
class VplusRegularity:
    mode: str
    b0_points: tuple
    c0_points: tuple


class CompiledU:
    """U bound to parameter values, with array, scalar and jet access."""

    def __init__(self, u, eps0: float, eps1: float, period: float):
        if isinstance(u, str):
            u = expr.parse(u)
        self.expression = u
        self.eps0 = float(eps0)
        self.eps1 = float(eps1)
        self.period = float(period)
        self.params = {"eps0": self.eps0, "eps1": self.eps1}

    def arr(self, x):
        return expr.eval_array(self.expression, x, self.params)

    def jet(self, x: float) -> jets.Jet:
        return expr.eval_jet(self.expression, x, self.params)

    def value(self, x: float) -> float:
        return self.jet(x).value

    def deriv(self, x: float, k: int = 1) -> float:
        return self.jet(x).derivative(k)


def _refine_transversal(f, lo: float, hi: float) -> float:
    return brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)


def _refine_tangential(fp, x: float, dx: float):
    """Refine a touch point as a root of f'; None if f' has no sign change."""
    lo, hi = x - dx, x + dx
    flo, fhi = fp(lo), fp(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        return None
    return _refine_transversal(fp, lo, hi)


def _scan_roots(cu: CompiledU, level: float) -> list:
    """All roots of U - level in [0, L), transversal and tangential."""
    L = cu.period
    xs = np.linspace(0.0, L, GRID, endpoint=False)
    vals = cu.arr(xs) - level
    scale = float(np.max(np.abs(vals)))
    if scale == 0.0:
        return []

    def f(x):
        return cu.value(x) - level

    def fp(x):
        return cu.deriv(x, 1)

    roots = []
    dx = L / GRID
    # transversal: sign change between consecutive samples (circular)
    for i in range(GRID):
        a, b = vals[i], vals[(i + 1) % GRID]
        if a == 0.0:
            roots.append(xs[i])
            continue
        if a * b < 0.0:
            roots.append(_refine_transversal(f, xs[i], xs[i] + dx))
    # tangential: local minima of |U - level| that graze zero
    absv = np.abs(vals)
    tiny = absv < 1e-9 * scale
    for i in np.nonzero(tiny)[0]:
        left = absv[(i - 1) % GRID]
        right = absv[(i + 1) % GRID]
        if absv[i] <= left and absv[i] <= right:
            got = _refine_tangential(fp, float(xs[i]), dx)
            if got is not None and abs(f(got)) < 1e-7 * scale:
                roots.append(got)

    reduced = sorted(r % L for r in roots)
    out = []
    for r in reduced:
        if out and min(r - out[-1], out[0] + L - r) < 1e-8 * L:
            continue
        out.append(r)
    return out


def _zero_order(cu: CompiledU, x: float, scale: float) -> int:
    j = cu.jet(x)
    thr = 1e-10 * max(scale, 1.0)
    for k, c in enumerate(j.coeffs):
        if abs(c) > thr:
            return k
    return jets.N_COEFF


def locate_zeros(u, eps0: float, eps1: float, period: float) -> tuple:
    """Zeros of U in [0, period) with orders, sorted by location."""
    cu = u if isinstance(u, CompiledU) else CompiledU(u, eps0, eps1, period)
    xs = np.linspace(0.0, cu.period, GRID, endpoint=False)
    scale = float(np.max(np.abs(cu.arr(xs))))
    records = []
    for r in _scan_roots(cu, 0.0):
        order = _zero_order(cu, r, scale)
        if order == 1:
            cls = FIRST_ORDER
        elif order == 2:
            cls = SECOND_ORDER
        else:
            cls = FORBIDDEN
        records.append(ZeroRecord(r, order, cls))
    return tuple(records)


def _fft_derivative(vals: np.ndarray, period: float) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.rfftfreq(len(vals), d=period / len(vals))
    return np.fft.irfft(1j * k * np.fft.rfft(vals), n=len(vals))


def discriminant_samples(cu: CompiledU, n: int = GRID):
    """S = U'^2 + 4 U (U + 2 eps0)(U - 2 eps1) on a uniform grid."""
    xs = np.linspace(0.0, cu.period, n, endpoint=False)
    uv = cu.arr(xs)
    up = _fft_derivative(uv, cu.period)
    sv = up * up + 4.0 * uv * (uv + 2.0 * cu.eps0) * (uv - 2.0 * cu.eps1)
    return xs, sv


def check_admissibility(u, eps0: float, eps1: float, period: float) -> AdmissibilityReport:
    """Run every admissibility check; the report carries all diagnostics."""
    cu = u if isinstance(u, CompiledU) else CompiledU(u, eps0, eps1, period)
    L = cu.period
    xm = 0.5 * L
    xs = np.linspace(0.0, L, GRID, endpoint=False)
    uv = cu.arr(xs)
    scale = float(np.max(np.abs(uv)))
    ref = max(scale, 1.0)
    checks = []

    def add(name, passed, detail):
        checks.append(CheckResult(name, bool(passed), detail))

    pos = cu.eps0 > 0.0 and cu.eps1 > 0.0
    add("energies_positive", pos, f"eps0={cu.eps0:g}, eps1={cu.eps1:g}")

    probes = np.linspace(0.0, L, 17)
    per_defect = float(np.max(np.abs(cu.arr(probes + L) - cu.arr(probes))))
    add("periodicity", per_defect <= 1e-8 * ref, f"defect {per_defect:.3e}")

    t = np.linspace(0.0, 0.5 * L, 512, endpoint=False)[1:]
    parity_defect = float(np.max(np.abs(cu.arr(xm + t) - cu.arr(xm - t))))
    add("parity_about_midpoint", parity_defect <= 1e-8 * ref, f"defect {parity_defect:.3e}")

    zeros = locate_zeros(cu, cu.eps0, cu.eps1, L)
    bad = [z for z in zeros if z.classification == FORBIDDEN]
    add(
        "zero_orders",
        not bad,
        "orders " + (", ".join(f"{z.order}@{z.x:.6f}" for z in zeros) or "none"),
    )

    doubles = [z for z in zeros if z.order == 2]
    mid = [z for z in doubles if abs(z.x - xm) <= 1e-6 * L]
    add("midpoint_double_zero", bool(mid), f"double zeros at {[round(z.x, 6) for z in doubles]}")

    target = 8.0 * cu.eps0 * cu.eps1
    curv_mid = cu.deriv(xm, 2)
    curv_ok = True
    worst = 0.0
    for z in doubles:
        dev = abs(cu.deriv(z.x, 2) - target)
        worst = max(worst, dev)
        if dev > 1e-6 * max(abs(target), 1.0):
            curv_ok = False
    add("curvature_at_double_zeros", curv_ok and bool(doubles), f"max |U'' - 8*eps0*eps1| = {worst:.3e}")

    d3_mid = cu.deriv(xm, 3)
    d3_ok = all(abs(cu.deriv(z.x, 3)) <= 1e-6 * ref for z in doubles)
    add("third_derivative_vanishes", d3_ok, f"U'''(midpoint) = {d3_mid:.3e}")

    _, sv = discriminant_samples(cu)
    s_scale = max(float(np.max(np.abs(sv))), 1.0)
    s_min = float(np.min(sv))
    add("discriminant_nonnegative", s_min >= -1e-9 * s_scale, f"min S = {s_min:.6e}")

    umin, umax = float(np.min(uv)), float(np.max(uv))
    range_ok = umin > -2.0 * cu.eps0 and umax < 2.0 * cu.eps1

    passed = all(c.passed for c in checks)
    return AdmissibilityReport(
        passed=passed,
        zeros=zeros,
        parity_defect=parity_defect,
        curvature_value=curv_mid,
        curvature_target=target,
        third_derivative_midpoint=d3_mid,
        s_min=s_min,
        range_ok=range_ok,
        checks=tuple(checks),
    )


def find_level_crossings(cu: CompiledU, level: float) -> tuple:
    """Points in [0, L) where U crosses or touches the given level."""
    return tuple(_scan_roots(cu, level))


def vplus_regularity_mode(u, eps0: float, eps1: float, period: float) -> VplusRegularity:
    """Whether the upper partner needs branch switching to stay regular.

    U confined to the open strip (-2*eps0, 2*eps1) keeps one root branch
    regular everywhere; any excursion forces switches at the strip crossings.
    """
    cu = u if isinstance(u, CompiledU) else CompiledU(u, eps0, eps1, period)
    b0 = find_level_crossings(cu, 2.0 * cu.eps1)
    c0 = find_level_crossings(cu, -2.0 * cu.eps0)
    mode = RANGE_OK if not b0 and not c0 else BRANCH_SWITCH
    return VplusRegularity(mode=mode, b0_points=b0, c0_points=c0)
