"""Three-level factorization chain driven by a single generating function.

Given an admissible periodic U(x) and positive level spacings (eps0, eps1),
this module resolves the root branches of the defining quadratic
(U - 2*eps1) W^2 + U' W - U (U + 2*eps0) = 0, assembles the superpotential
chain W0, W1, W2, the partner potentials, and the three lower / two upper
eigenfunctions.  Evaluation is jet based away from the structural points of
U and switches to matched local series inside narrow windows around them;
the seam between the two representations is verified at construction time.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.chebyshev import Chebyshev
from scipy.fft import dct
from scipy.integrate import quad

from . import jets, local_series, validator
from .errors import (
    BranchInconsistencyError,
    InadmissibleInputError,
    NegativeDiscriminantError,
    PatchFailureError,
    QuadratureNonconvergenceError,
    SeamMismatchError,
    UnremovablePoleError,
    VplusPoleError,
)

PATCH_FRACTION = 1e-3
SEAM_TOL = 1e-8
DISC_TOL = 1e-12
CHEB_DEGREE = 512
# Chain functions can have complex branch points close to the real axis
# (steep shoulders in the potential); the antiderivative tables double
# their resolution until the coefficient tail is negligible.
CHEB_DEGREE_MAX = 8192
CHEB_TAIL_REL = 1e-10
CHAIN_NAMES = ("w0", "w1", "w2")

# Length of the high-order local Taylor data for U (from its Fourier modes)
# and of the series branches solved from it.
U_TAYLOR_TERMS = 18
LOCAL_COEFFS = 16
# Where S has a high-order zero the direct evaluator inherits catastrophic
# cancellation well beyond the nominal patch window; the matched series is
# the accurate representation out to this fraction of the period.
WIDE_EVAL_FRACTION = 8e-3
FOURIER_SAMPLES = 4096

KIND_SIMPLE_ZERO = "simple_zero"
KIND_DOUBLE_ZERO = "double_zero"
KIND_UPPER_EDGE = "upper_strip_edge"
KIND_LOWER_EDGE = "lower_strip_edge"
KIND_BRANCH_TOUCH = "branch_touch"


@dataclass(frozen=True)
class EnergyPair:
    """Spacings of the two excited levels above the ground state."""

    eps0: float
    eps1: float

    def __post_init__(self):
        if not (self.eps0 > 0.0 and self.eps1 > 0.0):
            raise ValueError("both level spacings must be positive")

    @property
    def top(self) -> float:
        return self.eps0 + self.eps1


@dataclass(frozen=True)
class BranchMap:
    """Piecewise-constant root-branch sign on the period circle.

    breakpoints are the zeros of the branch discriminant S in [0, L);
    signs[i] applies on the arc from breakpoints[i] up to the next
    breakpoint (cyclically), closed on the left.
    """

    period: float
    breakpoints: tuple
    signs: tuple

    def sign_at(self, x: float) -> int:
        xr = x % self.period
        i = bisect_right(self.breakpoints, xr) - 1
        if i < 0:
            i = len(self.signs) - 1
        return self.signs[i]


class _BranchLocal:
    """All local series derived from one W+ branch at one structural point."""

    def __init__(self, wp: local_series.LaurentPoly, u_loc, pair: EnergyPair):
        e0, e1 = pair.eps0, pair.eps1
        self.wp = wp
        wpt = _structural(wp, 1e-9)
        if wpt.valuation >= 1:
            slope = wpt.coeff(1)
            tol = 1e-6 * max(1.0, 2.0 * e0)
            if abs(slope - 2.0 * e0) > tol and abs(slope + 2.0 * e0) > tol:
                raise UnremovablePoleError(
                    wp.x0,
                    f"W+ vanishes with slope {slope:.6g} outside {{+2*eps0, -2*eps0}}; "
                    "the chain pole cannot cancel",
                )
        # numerators that cancel at t = 0 must be trimmed before dividing,
        # or roundoff remnants turn into spurious pole terms downstream
        wp_d = wp.derivative()
        diff0 = (wp_d - 2.0 * e0).structurally_trimmed(1e-12) / wp
        self.w0 = (wp - diff0) * 0.5
        self.w1 = (wp + diff0) * 0.5
        self.wt = u_loc.structurally_trimmed(1e-12) / wp
        wt_d = self.wt.derivative()
        diff2 = (wt_d - 2.0 * e1).structurally_trimmed(1e-12) / self.wt
        self.w2 = (self.wt + diff2) * 0.5
        self.g = (self.w0 + self.w2) * self.wt - wt_d
        self.h = self.g.derivative() - self.g * (self.w2 - self.w0)
        w0d = self.w0.derivative()
        self.v_minus = (self.w0 * self.w0 - w0d) * 0.5
        self.v_plus = (self.w0 * self.w0 + w0d) * 0.5


class _Patch:
    """A structural point of U with its per-(side, sign) matched branches."""

    def __init__(self, x: float, kind: str, u_jet: jets.Jet):
        self.x = x
        self.kind = kind
        self.u_jet = u_jet
        self.branches = {}  # (side, sign) -> _BranchLocal or UnremovablePoleError
        self.vplus_pole = False
        self.eval_halfwidth = 0.0

    def local(self, side: int, sign: int) -> _BranchLocal:
        # a combination whose chain pole cannot cancel is stored as the
        # error itself: harmless unless evaluation actually lands on it
        got = self.branches[(side, sign)]
        if isinstance(got, UnremovablePoleError):
            raise got
        return got


def _reduce(x: float, period: float) -> float:
    xr = math.fmod(float(x), period)
    if xr < 0.0:
        xr += period
    return xr


def _structural(lp: local_series.LaurentPoly, tol: float) -> local_series.LaurentPoly:
    return lp.structurally_trimmed(tol)


def stable_discriminant(u_jet: jets.Jet, pair: EnergyPair) -> jets.Jet:
    """Jet of S = U'^2 + 4 U (U + 2 eps0)(U - 2 eps1); total, never raises."""
    up = jets.differentiate(u_jet)
    return up * up + 4.0 * u_jet * (u_jet + 2.0 * pair.eps0) * (u_jet - 2.0 * pair.eps1)


def _select_form(u: jets.Jet, up: jets.Jet, sqrt_s: jets.Jet, sign: int, pair: EnergyPair) -> jets.Jet:
    """Cancellation-free form of the chosen root branch.

    Both forms are the same root algebraically; the choice keeps the
    denominator (resp. numerator) a same-sign sum.
    """
    if sign * up.value >= 0.0:
        return 2.0 * u * (u + 2.0 * pair.eps0) / (up + sign * sqrt_s)
    return (-up + sign * sqrt_s) / (2.0 * (u - 2.0 * pair.eps1))


class ConstructedSystem:
    """Result of the construction; every evaluator hangs off an instance."""

    def __init__(self, u, eps0: float, eps1: float, period: float, validate: bool = True):
        self.pair = EnergyPair(float(eps0), float(eps1))
        self.period = float(period)
        self.u = validator.CompiledU(u, self.pair.eps0, self.pair.eps1, self.period)
        self.patch_halfwidth = PATCH_FRACTION * self.period
        self.midpoint = 0.5 * self.period
        self._build_fourier()
        self.report = None
        if validate:
            self.report = validator.check_admissibility(u, eps0, eps1, period)
            if not self.report.passed:
                failed = [c.name for c in self.report.checks if not c.passed]
                raise InadmissibleInputError(
                    "generating function failed admissibility checks: " + ", ".join(failed),
                    self.report,
                )
        self._classify_points()
        self._match_patches()
        self._build_branch_map()
        self._register_poles()
        self._verify_oddness()
        self._assembly = None

    # ------------------------------------------------------------------
    # construction phases
    # ------------------------------------------------------------------

    def _build_fourier(self):
        """Retained Fourier modes of U, for Taylor data beyond the jet order."""
        n = FOURIER_SAMPLES
        xs = np.arange(n) * (self.period / n)
        spec = np.fft.rfft(np.asarray(self.u.arr(xs), dtype=float)) / n
        mag = np.abs(spec)
        keep = np.nonzero(mag > 1e-13 * max(float(mag.max()), 1e-300))[0]
        weight = np.where((keep == 0) | (keep == n // 2), 1.0, 2.0)
        self._fourier_amp = spec[keep] * weight
        self._fourier_freq = keep * (2.0 * math.pi / self.period)

    def _u_taylor(self, x0: float, m: int):
        """First m Taylor coefficients of U at x0, via its Fourier modes."""
        cur = self._fourier_amp * np.exp(1j * self._fourier_freq * x0)
        out = [float(np.sum(cur.real))]
        fact = 1.0
        for k in range(1, m):
            cur = cur * (1j * self._fourier_freq)
            fact *= k
            out.append(float(np.sum(cur.real)) / fact)
        return tuple(out)

    def _classify_points(self):
        L = self.period
        _, sv = validator.discriminant_samples(self.u)
        self._s_samples = sv
        self._s_scale = max(float(np.max(np.abs(sv))), 1.0)
        zero_records = validator.locate_zeros(self.u, self.pair.eps0, self.pair.eps1, L)
        pts = []
        for z in zero_records:
            if z.order == 1:
                pts.append((z.x, KIND_SIMPLE_ZERO))
            elif z.order == 2:
                pts.append((z.x, KIND_DOUBLE_ZERO))
            else:
                raise InadmissibleInputError(
                    f"zero of order {z.order} at x={z.x:.6g} is outside the supported classes",
                    self.report,
                )
        for p in validator.find_level_crossings(self.u, 2.0 * self.pair.eps1):
            pts.append((p, KIND_UPPER_EDGE))
        for p in validator.find_level_crossings(self.u, -2.0 * self.pair.eps0):
            pts.append((p, KIND_LOWER_EDGE))
        known = sorted(p for p, _ in pts)
        for p in self._accidental_discriminant_zeros():
            if not known or min(abs(p - k) for k in known) > 1e-6 * L:
                if min(p, L - p) > 1e-6 * L:
                    pts.append((p, KIND_BRANCH_TOUCH))
        pts.sort()
        self.patches = [_Patch(p, kind, self.u.jet(p)) for p, kind in pts]
        self._patch_xs = [p.x for p in self.patches]
        n = len(self.patches)
        for i, patch in enumerate(self.patches):
            r = self.patch_halfwidth
            if patch.kind in (KIND_DOUBLE_ZERO, KIND_BRANCH_TOUCH):
                r = WIDE_EVAL_FRACTION * L
                if n > 1:
                    xs = self._patch_xs
                    gap = min(
                        (xs[(i + 1) % n] - xs[i]) % L, (xs[i] - xs[i - 1]) % L
                    )
                    r = min(r, 0.3 * gap)
                r = max(r, self.patch_halfwidth)
            patch.eval_halfwidth = r

    def _accidental_discriminant_zeros(self):
        sv = self._s_samples
        n = len(sv)
        L = self.period
        out = []
        av = np.abs(sv)
        tiny = av < 1e-9 * self._s_scale
        # one candidate per contiguous tiny run (circular): a flat valley of
        # a high-order zero is full of roundoff wiggles, and each spurious
        # local minimum would otherwise become a structural point
        idx = np.nonzero(tiny)[0]
        if idx.size and idx.size < n:
            runs = []
            start = prev = int(idx[0])
            for i in idx[1:]:
                i = int(i)
                if i == prev + 1:
                    prev = i
                    continue
                runs.append((start, prev))
                start = prev = i
            runs.append((start, prev))
            if len(runs) > 1 and runs[0][0] == 0 and runs[-1][1] == n - 1:
                head = runs[0]
                runs = runs[1:-1] + [(runs[-1][0], head[1] + n)]
            for (a, b) in runs:
                imin = min(range(a, b + 1), key=lambda i: av[i % n]) % n
                out.append(imin * L / n)
        for i in range(n):
            if sv[i] * sv[(i + 1) % n] < 0 and not (tiny[i] or tiny[(i + 1) % n]):
                out.append((i + 0.5) * L / n)
        return sorted(out)

    def _is_breakpoint(self, x: float) -> bool:
        s = stable_discriminant(self.u.jet(x), self.pair).value
        return abs(s) <= 1e-8 * self._s_scale

    def _build_branch_map(self):
        L = self.period
        tol = 1e-6 * L
        bps = sorted(p.x for p in self.patches if self._is_breakpoint(p.x))
        if not bps:
            raise BranchInconsistencyError(
                "no discriminant zeros found; a branch sign map cannot be anchored"
            )
        if not any(abs(b - self.midpoint) <= tol for b in bps):
            raise BranchInconsistencyError(
                "the half-period point is not a discriminant zero; "
                "no sign assignment can make W+ odd about it"
            )
        n = len(bps)
        # arc i runs from bps[i] to the next breakpoint; reflecting its
        # midpoint about the half-period point finds its parity partner
        pairing = []
        for i in range(n):
            hi = bps[(i + 1) % n] + (L if i == n - 1 else 0.0)
            mid = _reduce(2.0 * self.midpoint - 0.5 * (bps[i] + hi), L)
            j = bisect_right(bps, mid) - 1
            if j < 0:
                j = n - 1
            pairing.append(j)
            if j == i:
                raise BranchInconsistencyError(
                    "an arc is its own reflection about the half-period point; "
                    "W+ cannot be odd with one sign on it"
                )
        # rel[i]: stable-form sign relation across bps[i] (arc i-1 -> arc i)
        # that continues W+ smoothly, when first-order data can tell
        rel = [self._glue_preference(b) for b in bps]
        signs = [0] * n
        signs[0] = +1  # arc whose left endpoint is nearest the origin wins +
        while not all(signs):
            progressed = False
            for i in range(n):
                j = (i - 1) % n
                if rel[i] is not None:
                    if signs[j] and not signs[i]:
                        signs[i] = signs[j] * rel[i]
                        progressed = True
                    elif signs[i] and not signs[j]:
                        signs[j] = signs[i] * rel[i]
                        progressed = True
                if signs[i] and not signs[pairing[i]]:
                    signs[pairing[i]] = -signs[i]
                    progressed = True
            if not progressed:
                signs[signs.index(0)] = +1
        for i in range(n):
            if signs[pairing[i]] != -signs[i]:
                raise BranchInconsistencyError(
                    "reflection pairing of the arcs is inconsistent; "
                    "the breakpoint set is not symmetric about the half-period point"
                )
            if rel[i] is not None and signs[i] != signs[(i - 1) % n] * rel[i]:
                raise BranchInconsistencyError(
                    "smooth continuation across a discriminant zero contradicts "
                    "the parity pairing of the arcs"
                )
        self.branch_map = BranchMap(L, tuple(bps), tuple(signs))

    def _glue_preference(self, b: float):
        """Sign relation (+1 same, -1 flipped) continuing W+ through b.

        At an odd-power discriminant zero the fixed-sign stable forms swap
        root curves, so exactly one relation is differentiable; at an
        analytic even-power touch both look alike at this order and the
        decision is left to the parity pairing (None).
        """
        d = self.patch_halfwidth
        out = {}
        for sl in (+1, -1):
            jl = self._w_direct(_reduce(b - d, self.period), sl)
            grow = jl.value + 2.0 * d * jl.derivative(1)
            for sr in (+1, -1):
                jr = self._w_direct(_reduce(b + d, self.period), sr)
                out[(sl, sr)] = abs(jr.value - grow) + 2.0 * d * abs(
                    jr.derivative(1) - jl.derivative(1)
                )
        same = max(out[(+1, +1)], out[(-1, -1)])
        flip = max(out[(+1, -1)], out[(-1, +1)])
        if 10.0 * flip <= same:
            return -1
        if 10.0 * same <= flip:
            return +1
        return None

    def _match_patches(self):
        h = self.patch_halfwidth
        e0, e1 = self.pair.eps0, self.pair.eps1
        for patch in self.patches:
            uc = self._u_taylor(patch.x, U_TAYLOR_TERMS)
            scale = max(1.0, max(abs(c) for c in patch.u_jet.coeffs))
            for a, b in zip(uc, patch.u_jet.coeffs):
                if abs(a - b) > 1e-7 * scale:
                    raise PatchFailureError(
                        patch.x, "Fourier-mode Taylor data disagrees with the jet of U"
                    )
            candidates = list(
                local_series.taylor_branches(patch.x, uc, e0, e1, n_coeffs=LOCAL_COEFFS)
            )
            if patch.kind == KIND_UPPER_EDGE:
                candidates += list(
                    local_series.pole_branches(patch.x, uc, e0, e1, n_coeffs=LOCAL_COEFFS)
                )
            if not candidates:
                raise PatchFailureError(patch.x, "no local branch solves the quadratic")
            u_loc = local_series.LaurentPoly(patch.x, 0, uc)
            for side in (+1, -1):
                xs = patch.x + side * h
                for sign in (+1, -1):
                    target = self._w_direct(_reduce(xs, self.period), sign).value
                    ref = max(1.0, abs(target))
                    best, best_err = None, math.inf
                    for cand in candidates:
                        err = abs(cand(xs) - target)
                        if err < best_err:
                            best, best_err = cand, err
                    if best_err > SEAM_TOL * ref:
                        raise SeamMismatchError(xs, best_err / ref, SEAM_TOL)
                    try:
                        patch.branches[(side, sign)] = _BranchLocal(best, u_loc, self.pair)
                    except UnremovablePoleError as exc:
                        patch.branches[(side, sign)] = exc
            if patch.kind not in (KIND_DOUBLE_ZERO, KIND_BRANCH_TOUCH):
                for sign in (+1, -1):
                    pa = patch.branches[(+1, sign)]
                    pb = patch.branches[(-1, sign)]
                    if isinstance(pa, UnremovablePoleError) or isinstance(pb, UnremovablePoleError):
                        continue
                    a = _structural(pa.wp, 1e-9)
                    b = _structural(pb.wp, 1e-9)
                    if a.valuation != b.valuation:
                        raise PatchFailureError(
                            patch.x, "branch type changes across a point that is not a breakpoint"
                        )

    def _active_local(self, patch: _Patch, side: int) -> _BranchLocal:
        sign = self.branch_map.sign_at(patch.x + side * 0.5 * self.patch_halfwidth)
        return patch.local(side, sign)

    def _register_poles(self):
        """Pole locations and residues of each chain member under the sign map."""
        self.poles = {name: [] for name in CHAIN_NAMES}
        for patch in self.patches:
            loc = self._active_local(patch, +1)
            # V+ is singular exactly where the active W0 keeps a pole; at a
            # transversal lower-edge crossing that is the vanishing branch,
            # but a tuned tangential touch can stay regular
            patch.vplus_pole = (
                patch.kind == KIND_LOWER_EDGE
                and _structural(loc.w0, 1e-9).valuation < 0
            )
            for name in CHAIN_NAMES:
                lp = _structural(getattr(loc, name), 1e-12)
                if lp.valuation < 0:
                    res = lp.residue()
                    if abs(res) > 1e-8:
                        if abs(res - round(res)) > 1e-6:
                            raise PatchFailureError(
                                patch.x, f"{name} residue {res:.8g} is not an integer"
                            )
                        self.poles[name].append((patch.x, float(round(res))))

    def _verify_oddness(self):
        L, xm = self.period, self.midpoint
        vals = []
        for t in np.linspace(0.0, 0.5 * L, 514)[1:-1]:
            a, b = xm + t, xm - t
            if self._near_patch(a)[0] is not None or self._near_patch(b)[0] is not None:
                continue
            wa = self.w_plus(a).value
            wb = self.w_plus(b).value
            if abs(wa) > 1e3 or abs(wb) > 1e3:
                continue
            vals.append((abs(wa + wb), max(abs(wa), abs(wb))))
        if not vals:
            raise BranchInconsistencyError("no usable probes for the oddness check")
        scale = max(1.0, max(v[1] for v in vals))
        worst = max(v[0] for v in vals)
        if worst > 1e-8 * scale:
            raise BranchInconsistencyError(
                f"W+ is not odd about the half-period point under the accepted sign map "
                f"(defect {worst:.3e} at scale {scale:.3g})"
            )

    # ------------------------------------------------------------------
    # W evaluators
    # ------------------------------------------------------------------

    def _near_patch(self, x: float):
        """(patch, signed offset) if x lies inside a patch's series region,
        else (None, 0.0).  The region is the wide evaluation window, not the
        nominal patch window."""
        if not self.patches:
            return None, 0.0
        xr = _reduce(x, self.period)
        i = bisect_right(self._patch_xs, xr)
        for j in (i - 1, i % len(self.patches)):
            p = self.patches[j]
            t = xr - p.x
            t -= self.period * round(t / self.period)
            if abs(t) <= p.eval_halfwidth:
                return p, t
        return None, 0.0

    def _patch_sign(self, patch: _Patch, t: float) -> int:
        off = t if t != 0.0 else 0.5 * self.patch_halfwidth
        return self.branch_map.sign_at(patch.x + off)

    def _w_direct(self, x: float, sign: int) -> jets.Jet:
        u = self.u.jet(x)
        up = jets.differentiate(u)
        s = stable_discriminant(u, self.pair)
        scale = (
            up.value * up.value
            + abs(4.0 * u.value * (u.value + 2.0 * self.pair.eps0) * (u.value - 2.0 * self.pair.eps1))
            + 1.0
        )
        if s.value < -DISC_TOL * scale:
            raise NegativeDiscriminantError(x, s.value)
        if s.value <= 0.0:
            s = jets.Jet(s.x0, (1e-30 * scale,) + s.coeffs[1:])
        return _select_form(u, up, jets.sqrt(s), sign, self.pair)

    @staticmethod
    def _local_jet(lp: local_series.LaurentPoly, t: float, x: float) -> jets.Jet:
        lp = _structural(lp, 1e-12)
        if t == 0.0:
            if lp.valuation >= 0:
                return jets.Jet(x, tuple(lp.coeff(k) for k in range(jets.N_COEFF)))
            # exact pole hit: signed infinity, right-side convention
            inf = math.copysign(math.inf, lp.coeffs[0])
            return jets.Jet(x, (inf,) * jets.N_COEFF)
        coeffs = []
        fact = 1.0
        for k in range(jets.N_COEFF):
            acc = 0.0
            for j, c in enumerate(lp.coeffs):
                m = lp.valuation + j
                ff = 1.0
                for r in range(k):
                    ff *= m - r
                if ff != 0.0 and c != 0.0:
                    acc += c * ff * t ** (m - k)
            coeffs.append(acc / fact)
            fact *= k + 1.0
        return jets.Jet(x, tuple(coeffs))

    def w_plus(self, x: float, sign: int | None = None) -> jets.Jet:
        """Jet of the branch-resolved W+ at x (sign-map branch unless overridden)."""
        xr = _reduce(x, self.period)
        patch, t = self._near_patch(xr)
        if patch is None:
            if sign is None:
                sign = self.branch_map.sign_at(xr)
            return self._w_direct(xr, sign)
        if sign is None:
            sign = self._patch_sign(patch, t)
        side = +1 if t >= 0.0 else -1
        return self._local_jet(patch.local(side, sign).wp, t, xr)

    def w_plus_tilde(self, x: float, sign: int | None = None) -> jets.Jet:
        xr = _reduce(x, self.period)
        patch, t = self._near_patch(xr)
        if patch is not None:
            if sign is None:
                sign = self._patch_sign(patch, t)
            side = +1 if t >= 0.0 else -1
            return self._local_jet(patch.local(side, sign).wt, t, xr)
        if sign is None:
            sign = self.branch_map.sign_at(xr)
        return self.u.jet(xr) / self._w_direct(xr, sign)

    def _chain_jets(self, x: float, sign: int | None = None):
        """(W0, W1, W2) jets at x; local-series backed inside patch windows."""
        xr = _reduce(x, self.period)
        patch, t = self._near_patch(xr)
        if patch is not None:
            if sign is None:
                sign = self._patch_sign(patch, t)
            side = +1 if t >= 0.0 else -1
            loc = patch.local(side, sign)
            return tuple(self._local_jet(getattr(loc, n), t, xr) for n in CHAIN_NAMES)
        if sign is None:
            sign = self.branch_map.sign_at(xr)
        e0, e1 = self.pair.eps0, self.pair.eps1
        w = self._w_direct(xr, sign)
        diff0 = (jets.differentiate(w) - 2.0 * e0) / w
        wt = self.u.jet(xr) / w
        diff2 = (jets.differentiate(wt) - 2.0 * e1) / wt
        return 0.5 * (w - diff0), 0.5 * (w + diff0), 0.5 * (wt + diff2)

    def superpotentials(self, x: float, sign: int | None = None):
        return self._chain_jets(x, sign)

    def potentials(self, x: float, sign: int | None = None):
        """(V-, V+) at x.  An exact hit of a lower-strip-edge point whose
        active branch vanishes raises: V+ has a genuine pole there."""
        xr = _reduce(x, self.period)
        patch, t = self._near_patch(xr)
        if patch is not None and abs(t) < 1e-12 * self.period and patch.vplus_pole:
            raise VplusPoleError(patch.x)
        w0 = self._chain_jets(xr, sign)[0]
        v = w0.value * w0.value
        d = w0.derivative(1)
        return 0.5 * (v - d), 0.5 * (v + d)

    # ------------------------------------------------------------------
    # wavefunctions
    # ------------------------------------------------------------------

    def _ensure_assembly(self) -> "_StateAssembly":
        if self._assembly is None:
            self._assembly = _StateAssembly(self)
        return self._assembly

    def wavefunctions_minus(self, x, c0: float = 1.0, c1: float = 1.0, c2: float = 1.0):
        return self._ensure_assembly().psi_minus(x, c0, c1, c2)

    def wavefunctions_plus(self, x, c1: float = 1.0, c2: float = 1.0):
        return self._ensure_assembly().psi_plus(x, c1, c2)

    def log_weight(self, i: int, x) -> float:
        """Pole-regularized integral of W_i from the half-period point to x."""
        return self._ensure_assembly().log_weight(i, float(x))

    # ------------------------------------------------------------------
    # quadrature
    # ------------------------------------------------------------------

    def _w_value(self, i: int, x: float) -> float:
        return self._chain_jets(x)[i].value

    def integrate_superpotential(self, i: int, a: float, b: float) -> float:
        """Integral of W_i over [a, b]; principal value across chain poles.

        [a, b] must fit inside one period after reduction by a common shift.
        """
        if i not in (0, 1, 2):
            raise ValueError("chain index must be 0, 1 or 2")
        if b < a:
            return -self.integrate_superpotential(i, b, a)
        L = self.period
        shift = math.floor(a / L) * L
        a2, b2 = a - shift, b - shift
        if b2 > L + 1e-12:
            raise ValueError("integration range spans more than one period after reduction")
        b2 = min(b2, L)
        h = self.patch_halfwidth
        name = CHAIN_NAMES[i]
        cuts = [a2, b2]
        windows = []
        for patch in self.patches:
            for img in (patch.x - L, patch.x, patch.x + L):
                lo, hi = img - h, img + h
                if hi <= a2 or lo >= b2:
                    continue
                lo, hi = max(lo, a2), min(hi, b2)
                cuts += [lo, hi]
                windows.append((lo, hi, patch, img))
        cuts = sorted(set(cuts))
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi - lo < 1e-15:
                continue
            win = next((w for w in windows if w[0] <= lo and hi <= w[1]), None)
            if win is not None:
                total += self._integrate_local(win[2], win[3], name, lo, hi)
            else:
                val, err = quad(
                    lambda x: self._w_value(i, x), lo, hi,
                    epsabs=1e-13, epsrel=1e-13, limit=200,
                )
                if err > 1e-10:
                    raise QuadratureNonconvergenceError(lo, hi, err, 1e-10)
                total += val
        return total

    def _integrate_local(self, patch: _Patch, img: float, name: str, lo: float, hi: float) -> float:
        t0, t1 = lo - img, hi - img
        lp_l = _structural(getattr(self._active_local(patch, -1), name), 1e-12)
        lp_r = _structural(getattr(self._active_local(patch, +1), name), 1e-12)
        if t1 <= 0.0:
            return _laurent_piece(lp_l, t0, t1)
        if t0 >= 0.0:
            return _laurent_piece(lp_r, t0, t1)
        res_l, res_r = lp_l.residue(), lp_r.residue()
        if abs(res_l - res_r) > 1e-6 * max(1.0, abs(res_l)):
            raise PatchFailureError(
                patch.x, f"pole residue of {name} differs across the point; no principal value exists"
            )
        total = res_l * math.log(abs(t1 / t0))
        total += _laurent_piece(_drop_residue(lp_l), t0, 0.0)
        total += _laurent_piece(_drop_residue(lp_r), 0.0, t1)
        return total

    # ------------------------------------------------------------------

    @property
    def energies(self):
        return (0.0, self.pair.eps0, self.pair.top)


def _drop_residue(lp: local_series.LaurentPoly) -> local_series.LaurentPoly:
    if lp.valuation > -1:
        return lp
    idx = -1 - lp.valuation
    coeffs = tuple(0.0 if j == idx else c for j, c in enumerate(lp.coeffs))
    return local_series.LaurentPoly(lp.x0, lp.valuation, coeffs)


def _laurent_piece(lp: local_series.LaurentPoly, t0: float, t1: float) -> float:
    """Integral of a Laurent series over [t0, t1] lying on one side of 0."""
    if lp.valuation < -1:
        raise PatchFailureError(lp.x0, "nonintegrable pole order in a chain member")
    total = 0.0
    for k, c in enumerate(lp.coeffs):
        if c == 0.0:
            continue
        p = lp.valuation + k
        if p == -1:
            if t0 == 0.0 or t1 == 0.0:
                # endpoint exactly on a logarithmic singularity: divergent
                raise QuadratureNonconvergenceError(lp.x0 + t0, lp.x0 + t1, math.inf, 1e-10)
            total += c * math.log(abs(t1 / t0))
        else:
            total += c * (t1 ** (p + 1) - t0 ** (p + 1)) / (p + 1)
    return total


def _safe_log(d: float) -> float:
    return math.log(d) if d > 0.0 else -math.inf


def _cheb_fit(f, n: int, lo: float, hi: float) -> Chebyshev:
    """Degree n-1 Chebyshev interpolant on [lo, hi] via first-kind nodes.

    The DCT route avoids the O(n^2) Vandermonde of Chebyshev.interpolate,
    which matters once the resolution ladder climbs past a few thousand.
    """
    j = np.arange(n)
    theta = (2.0 * j + 1.0) * math.pi / (2.0 * n)
    x = np.cos(theta)
    y = f(lo + (hi - lo) * 0.5 * (x + 1.0))
    c = dct(y, type=2) / n
    c[0] *= 0.5
    return Chebyshev(c, domain=[lo, hi])


class _StateAssembly:
    """Spectral antiderivative tables and pole bookkeeping for the five states."""

    def __init__(self, system: ConstructedSystem):
        self.sys = system
        L = system.period
        self.xm = system.midpoint
        # When the root branches carry a midpoint constant (W0 -> +/-B with
        # B != 0) the glued chain jumps at the branch-map breakpoints; a
        # single fit across a jump never converges, so the tables are built
        # per smooth segment.
        cuts = sorted(b for b in set(system.branch_map.breakpoints) if 1e-12 < b < L - 1e-12)
        self.seg_bounds = [0.0] + cuts + [L]
        self.pole_sets = []
        self.images = []
        self.seg_tables = []
        self.seg_base = []
        self.phi_mid = []
        for i, name in enumerate(CHAIN_NAMES):
            qs = tuple(system.poles[name])
            imgs = []
            for (q, rho) in qs:
                for k in (-1, 0, 1):
                    qi = q + k * L
                    if -0.5 * L <= qi <= 1.5 * L:
                        imgs.append((qi, rho))
            self.pole_sets.append(qs)
            self.images.append(tuple(imgs))
            sample = lambda xv, idx=i: self._regular_samples(idx, np.asarray(xv, dtype=float))
            tables = []
            base = []
            acc = 0.0
            for a, b in zip(self.seg_bounds[:-1], self.seg_bounds[1:]):
                n = CHEB_DEGREE
                while True:
                    cheb = _cheb_fit(sample, n, a, b)
                    tail = float(np.max(np.abs(cheb.coef[-max(8, n // 8):])))
                    scale = float(np.max(np.abs(cheb.coef)))
                    if tail <= CHEB_TAIL_REL * max(scale, 1e-300) or n >= CHEB_DEGREE_MAX:
                        break
                    n *= 2
                cheb = cheb.integ()
                tables.append(cheb)
                base.append(acc - float(cheb(a)))
                acc += float(cheb(b)) - float(cheb(a))
            self.seg_tables.append(tables)
            self.seg_base.append(base)
            self.phi_mid.append(self._phi(i, self.xm))
        self.wrap_signs = None

    def _phi(self, i: int, x: float) -> float:
        """Antiderivative of the pole-free part of chain i, from 0 to x."""
        bounds = self.seg_bounds
        xc = min(max(x, bounds[0]), bounds[-1])
        k = min(max(bisect_right(bounds, xc) - 1, 0), len(bounds) - 2)
        return self.seg_base[i][k] + float(self.seg_tables[i][k](xc))

    def _regular_samples(self, i: int, xs: np.ndarray) -> np.ndarray:
        sysm = self.sys
        name = CHAIN_NAMES[i]
        flat = xs.ravel()
        out = np.empty_like(flat)
        for k, x in enumerate(flat):
            patch, t = sysm._near_patch(x)
            if patch is None:
                v = sysm._chain_jets(x)[i].value
                for (q, rho) in self.images[i]:
                    v -= rho / (x - q)
            else:
                side = +1 if t >= 0.0 else -1
                lp = _structural(getattr(sysm._active_local(patch, side), name), 1e-12)
                center = x - t
                if lp.valuation < 0:
                    lp = lp.regular_part()
                v = float(lp(lp.x0 + t))
                for (q, rho) in self.images[i]:
                    if abs(q - center) < 1e-9:
                        continue  # own pole handled by the series split
                    v -= rho / (x - q)
            out[k] = v
        return out.reshape(xs.shape)

    def log_weight(self, i: int, x: float) -> float:
        phi = self._phi(i, x) - self.phi_mid[i]
        for (q, rho) in self.images[i]:
            phi += rho * (_safe_log(abs(x - q)) - math.log(abs(self.xm - q)))
        return phi

    def _log_weight_excluding(self, i: int, x: float, skip_q: float) -> float:
        phi = self._phi(i, x) - self.phi_mid[i]
        for (q, rho) in self.images[i]:
            if q == skip_q:
                phi -= rho * math.log(abs(self.xm - q))
                continue
            phi += rho * (_safe_log(abs(x - q)) - math.log(abs(self.xm - q)))
        return phi

    def _flip(self, i: int, x: float) -> float:
        lo, hi = (x, self.xm) if x < self.xm else (self.xm, x)
        n = 0
        for (q, rho) in self.pole_sets[i]:
            if lo < q < hi and (int(round(rho)) % 2) != 0:
                n += 1
        return -1.0 if n % 2 else 1.0

    def _nearest_pole_image(self, i: int, x: float):
        best = None
        for (q, rho) in self.images[i]:
            d = abs(x - q)
            if d <= self.sys.patch_halfwidth and (best is None or d < best[2]):
                best = (q, rho, d)
        return best

    def _pole_window_value(self, i_chain: int, x: float, q: float, rho: float, local_name: str) -> float:
        """flip * (local series with the pole power shifted out) * sign * weight."""
        sysm = self.sys
        t = x - q
        patch, tp = sysm._near_patch(x)
        if patch is None:
            raise PatchFailureError(q, "pole image lies outside every patch window")
        side = +1 if tp >= 0.0 else -1
        lp = _structural(getattr(sysm._active_local(patch, side), local_name), 1e-12)
        rho_int = int(round(rho))
        shifted = local_series.LaurentPoly(lp.x0, lp.valuation - rho_int, lp.coeffs)
        base = math.exp(-self._log_weight_excluding(i_chain, x, q))
        sgn = 1.0 if t >= 0.0 else float((-1.0) ** rho_int)
        val = sysm._local_jet(shifted, tp, x).value
        # an exact hit takes the right-side limit, so the flip must too
        probe = x if t != 0.0 else q + 0.5 * sysm.patch_halfwidth
        return self._flip(i_chain, probe) * sgn * val * base

    # raw single-period state values, unit constants
    def _psi0_raw(self, x: float) -> float:
        near = self._nearest_pole_image(0, x)
        if near is not None:
            return self._pole_window_value(0, x, near[0], near[1], "w0")
        return self._flip(0, x) * math.exp(-self.log_weight(0, x))

    def _psi1_raw(self, x: float) -> float:
        near = self._nearest_pole_image(1, x)
        if near is not None:
            return self._pole_window_value(1, x, near[0], near[1], "wp")
        return self._flip(1, x) * self.sys.w_plus(x).value * math.exp(-self.log_weight(1, x))

    def _g_value(self, x: float) -> float:
        sysm = self.sys
        patch, t = sysm._near_patch(x)
        if patch is not None:
            side = +1 if t >= 0.0 else -1
            lp = sysm._active_local(patch, side).g
            return sysm._local_jet(lp, t, x).value
        w0, _, w2 = sysm._chain_jets(x)
        wt = sysm.w_plus_tilde(x)
        return (w0.value + w2.value) * wt.value - wt.derivative(1)

    def _h_value(self, x: float) -> float:
        sysm = self.sys
        patch, t = sysm._near_patch(x)
        if patch is not None:
            side = +1 if t >= 0.0 else -1
            lp = sysm._active_local(patch, side).h
            return sysm._local_jet(lp, t, x).value
        w0, _, w2 = sysm._chain_jets(x)
        wt = sysm.w_plus_tilde(x)
        g = (w0 + w2) * wt - jets.differentiate(wt)
        return g.derivative(1) - g.value * (w2.value - w0.value)

    def _psi2_raw(self, x: float) -> float:
        near = self._nearest_pole_image(2, x)
        if near is not None:
            return self._pole_window_value(2, x, near[0], near[1], "g")
        return self._flip(2, x) * self._g_value(x) * math.exp(-self.log_weight(2, x))

    def _psi1p_raw(self, x: float) -> float:
        return (
            math.sqrt(2.0)
            * self.sys.pair.eps0
            * self._flip(1, x)
            * math.exp(-self.log_weight(1, x))
        )

    def _psi2p_raw(self, x: float) -> float:
        near = self._nearest_pole_image(2, x)
        if near is not None:
            v = self._pole_window_value(2, x, near[0], near[1], "h")
        else:
            v = self._flip(2, x) * self._h_value(x) * math.exp(-self.log_weight(2, x))
        return v / math.sqrt(2.0)

    def _wrap_sign(self, values_fn) -> float:
        """Continuation sign across the period seam, by cubic extrapolation."""
        L = self.sys.period
        d = L / 64.0
        xs = np.array([d, 2 * d, 3 * d, 4 * d])
        ys = np.array([values_fn(x) for x in xs])
        coef = np.polyfit(xs, ys, 3)
        left_true = float(np.polyval(coef, -d))
        left_raw = values_fn(L - d)
        if abs(left_true) < 1e-12 or abs(left_raw) < 1e-12:
            return 1.0
        return 1.0 if left_raw / left_true > 0 else -1.0

    def _ensure_wrap_signs(self):
        if self.wrap_signs is None:
            self.wrap_signs = (
                self._wrap_sign(self._psi0_raw),
                self._wrap_sign(self._psi1_raw),
                self._wrap_sign(self._psi2_raw),
            )

    def _extend(self, fn, x: float, state: int) -> float:
        L = self.sys.period
        xr = _reduce(x, L)
        k = round((x - xr) / L)
        if k == 0:
            return fn(xr)
        self._ensure_wrap_signs()
        return (self.wrap_signs[state] ** int(k)) * fn(xr)

    def psi_minus(self, x, c0: float, c1: float, c2: float):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((3, xs.size))
        for k, xi in enumerate(xs.ravel()):
            out[0, k] = c0 * self._extend(self._psi0_raw, xi, 0)
            out[1, k] = c1 * self._extend(self._psi1_raw, xi, 1)
            out[2, k] = c2 * self._extend(self._psi2_raw, xi, 2)
        if np.ndim(x) == 0:
            return float(out[0, 0]), float(out[1, 0]), float(out[2, 0])
        shape = np.shape(x)
        return out[0].reshape(shape), out[1].reshape(shape), out[2].reshape(shape)

    def psi_plus(self, x, c1: float, c2: float):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((2, xs.size))
        for k, xi in enumerate(xs.ravel()):
            out[0, k] = c1 * self._extend(self._psi1p_raw, xi, 1)
            out[1, k] = c2 * self._extend(self._psi2p_raw, xi, 2)
        if np.ndim(x) == 0:
            return float(out[0, 0]), float(out[1, 0])
        shape = np.shape(x)
        return out[0].reshape(shape), out[1].reshape(shape)


def construct(u, eps0: float, eps1: float, period: float, validate: bool = True) -> ConstructedSystem:
    """Build the full three-level system from a generating-function expression."""
    return ConstructedSystem(u, eps0, eps1, period, validate=validate)


def build_branch_map(u, eps0: float, eps1: float, period: float) -> BranchMap:
    return construct(u, eps0, eps1, period).branch_map


def w_plus(x: float, system: ConstructedSystem, sign: int | None = None) -> jets.Jet:
    return system.w_plus(x, sign)


def w_plus_tilde(x: float, system: ConstructedSystem, sign: int | None = None) -> jets.Jet:
    return system.w_plus_tilde(x, sign)


def superpotentials(x: float, system: ConstructedSystem, sign: int | None = None):
    return system.superpotentials(x, sign)


def potentials(x: float, system: ConstructedSystem, sign: int | None = None):
    return system.potentials(x, sign)


def wavefunctions_minus(x, system: ConstructedSystem, c0: float = 1.0, c1: float = 1.0, c2: float = 1.0):
    return system.wavefunctions_minus(x, c0, c1, c2)


def wavefunctions_plus(x, system: ConstructedSystem, c1: float = 1.0, c2: float = 1.0):
    return system.wavefunctions_plus(x, c1, c2)


def integrate_superpotential(i: int, a: float, b: float, system: ConstructedSystem) -> float:
    return system.integrate_superpotential(i, a, b)
