"""Best n-term approximation, rate fitting, and tail-sum diagnostics.

Everything here lives on the sequence side of a wavelet expansion: a
coefficient field is reduced to weighted moduli, sorted once into an
approximation plan, and the plan answers error queries for every n.  The
rest of the module turns decay measurements into fitted exponents and
checks classified tail sums against norm bounds.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .spaces import BesovSpec, admissible, besov_norm, embedding_predicate
from .surface import PolyhedralSurface, ResolutionOfUnity
from .wavelets import (BasisSpec, CoefficientField, WaveletIndex,
                       classify_level, level_size)
from .weighted import WeightedSpec, weighted_sobolev_norm

_TOL = 1e-12
# Below this many stored weights, tail sums use math.fsum (exactly rounded);
# above it, the precomputed cumulative table.
_EXACT_SUM_CUTOFF = 4096


def _require_sequence_target(target: BesovSpec) -> None:
    if math.isinf(target.p) or target.p != target.q:
        raise ValueError("n-term targets need p = q < inf")
    if not admissible(target):
        raise ValueError(f"target {target} is not admissible")


# -- the approximation plan ------------------------------------------------------


@dataclass(frozen=True)
class NTermPlan:
    """Every wavelet index of a field, ordered by decreasing weighted modulus.

    The weight of index (j, xi) is 2**(j * e) * |c| with e the target's
    weight exponent; ties are broken by the lexicographic index order
    (level, patch, type, cell, component).  The generator block is always
    retained and never counts against n.  ``tail_p[n]`` holds
    sum_{m >= n} weight_m ** p, so errors for all n come from one table.
    """

    target: BesovSpec
    basis: BasisSpec
    n_patches: int
    field_J: int
    order_level: np.ndarray
    order_flat: np.ndarray
    weights: np.ndarray
    weight_p: np.ndarray
    tail_p: np.ndarray

    @property
    def n_indices(self) -> int:
        return len(self.weights)

    def error_at(self, n: int) -> float:
        """Sequence-norm error after keeping the n heaviest wavelet terms."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        n = min(n, self.n_indices)
        p = self.target.p
        if self.n_indices <= _EXACT_SUM_CUTOFF:
            total = math.fsum(self.weight_p[n:].tolist())
        else:
            total = float(self.tail_p[n])
        return total ** (1.0 / p)

    def retained(self, n: int) -> tuple[WaveletIndex, ...]:
        """The first n indices of the plan as WaveletIndex tuples."""
        n = min(max(n, 0), self.n_indices)
        r = self.basis.d
        out = []
        for j, flat in zip(self.order_level[:n], self.order_flat[:n]):
            cells = 1 << int(j)
            i, e, k1, k2, m1, m2 = np.unravel_index(
                int(flat), (self.n_patches, 3, cells, cells, r, r))
            out.append(WaveletIndex(int(j), int(i), int(e) + 1,
                                    int(k1), int(k2), int(m1), int(m2)))
        return tuple(out)

    def apply(self, field: CoefficientField, n: int) -> CoefficientField:
        """Field with all but the n heaviest wavelet coefficients zeroed."""
        _check_same_shape(self, field)
        n = min(max(n, 0), self.n_indices)
        levels = {j: np.zeros_like(field.level(j)) for j in field.level_range()}
        lev_sel = self.order_level[:n]
        flat_sel = self.order_flat[:n]
        for j in field.level_range():
            pos = flat_sel[lev_sel == j]
            if pos.size:
                levels[j].ravel()[pos] = field.level(j).ravel()[pos]
        return CoefficientField(field.basis, field.J, field.n_patches,
                                field.coarse.copy(), levels, field.surface)


def _check_same_shape(plan: NTermPlan, field: CoefficientField) -> None:
    if (field.basis != plan.basis or field.J != plan.field_J
            or field.n_patches != plan.n_patches):
        raise ValueError("field layout does not match the plan")


def n_term_plan(field: CoefficientField, target: BesovSpec) -> NTermPlan:
    """Sort all wavelet coefficients of ``field`` by target-weighted modulus."""
    _require_sequence_target(target)
    e = target.weight_exponent()
    p = target.p
    lev_ids, flats, weights = [], [], []
    for j in field.level_range():
        w = (2.0 ** (j * e)) * np.abs(field.level(j)).ravel()
        weights.append(w)
        lev_ids.append(np.full(w.size, j, dtype=np.int16))
        flats.append(np.arange(w.size, dtype=np.int64))
    w = np.concatenate(weights) if weights else np.zeros(0)
    lev = np.concatenate(lev_ids) if lev_ids else np.zeros(0, dtype=np.int16)
    flat = np.concatenate(flats) if flats else np.zeros(0, dtype=np.int64)
    # primary: weight descending; ties: level, then flat position ascending
    order = np.lexsort((flat, lev, -w))
    w = w[order]
    wp = w ** p
    tail = np.zeros(len(w) + 1)
    tail[:-1] = np.cumsum(wp[::-1])[::-1]
    return NTermPlan(target=target, basis=field.basis, n_patches=field.n_patches,
                     field_J=field.J, order_level=lev[order],
                     order_flat=flat[order], weights=w, weight_p=wp, tail_p=tail)


def best_n_term(field: CoefficientField, target: BesovSpec,
                n: int) -> tuple[tuple[WaveletIndex, ...], float]:
    """Keep the n heaviest wavelet terms; return them and the tail error.

    Exactly optimal among coefficient-subset approximations in the target
    sequence norm, and deterministic under the tie rule.  The generator
    block is free: it is always kept and n counts wavelet terms only.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    plan = n_term_plan(field, target)
    return plan.retained(n), plan.error_at(n)


class UniformApprox(NamedTuple):
    error: float
    n_effective: int


def uniform_approx(field: CoefficientField, target: BesovSpec,
                   J_keep: int) -> UniformApprox:
    """Error of dropping every level above J_keep, in the target sequence norm.

    n_effective counts all indices of the kept levels (a level-truncation
    scheme stores the full census whether or not entries vanish).
    """
    _require_sequence_target(target)
    e = target.weight_exponent()
    p = target.p
    total = 0.0
    n_eff = 0
    for j in field.level_range():
        if j <= J_keep:
            n_eff += level_size(field.basis, j, field.n_patches)
        else:
            w = (2.0 ** (j * e)) * np.abs(field.level(j)).ravel()
            total += float((w ** p).sum())
    return UniformApprox(total ** (1.0 / p), n_eff)


# -- predicted exponents ---------------------------------------------------------


def predicted_rate(spec0: BesovSpec, spec1: BesovSpec) -> float:
    """Decay exponent of sigma_n for approximating spec0 functions in spec1.

    gamma/2 when the smoothness gap strictly exceeds the integrability gap;
    min(gamma/2, 1/q0 - 1/q1) in the equality case.
    """
    if not embedding_predicate(spec0, spec1):
        raise ValueError("no embedding from source into target")
    gamma = spec0.alpha - spec1.alpha
    threshold = 2.0 * max(0.0, spec0.inv_p - spec1.inv_p)
    if gamma > threshold + _TOL:
        return gamma / 2.0
    return min(gamma / 2.0, spec0.inv_q - spec1.inv_q)


def alpha_star(rho: float, k: int, s: float, p: float) -> float:
    """Critical adaptivity smoothness from weighted-norm order k, weight rho,
    and a base space (s, p, p)."""
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    return min(rho, k - rho, s - (inv_p - 0.5))


def gamma_star(s: float, s_prime: float, p: float, alpha_star: float,
               s_boundary: float = 1.0) -> float:
    """Convergence-gap exponent for an interpolated target scale.

    theta interpolates between the base space (s_prime = 0, theta = 1) and
    the target smoothness; the 0/0 corner at s_prime = 0 resolves to
    theta = 1.
    """
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    gap = 2.0 * (inv_p - 0.5)
    if s - s_prime < gap - _TOL:
        raise ValueError("need s - s_prime >= 2(1/p - 1/2)")
    if not (0.0 <= s_prime < min(1.5, s_boundary)):
        raise ValueError("need 0 <= s_prime < min(3/2, s_boundary)")
    denom = s - gap
    frac = 0.0 if s_prime == 0.0 else s_prime / denom
    theta = 1.0 - frac
    return (s - s_prime) + theta * (2.0 * alpha_star - s)


# -- classified tail sums --------------------------------------------------------


def _level_class_sum(field: CoefficientField, j: int, tau: float,
                     kinds: str) -> float:
    """sum |c|^tau over the wavelet indices of one level, filtered by class."""
    lev = field.level(j)
    if kinds == "all":
        sel = np.abs(lev)
    else:
        interior = classify_level(field.surface, field.basis, j)
        mask = interior if kinds == "interior" else ~interior
        # broadcast the per-cell mask over type and component axes
        sel = np.abs(lev) * mask[:, None, :, :, None, None]
    return float((sel ** tau).sum())


def level_tail_sums(field: CoefficientField, tau: float,
                    kinds: str = "all", workers: int = 1) -> dict[int, float]:
    """Per-level sums of |c|^tau over indices of the requested class.

    kinds: "all", "interior", or "boundary" (cell classification against the
    patch boundary).  Results are combined in fixed level order regardless
    of worker count.
    """
    if kinds not in ("all", "interior", "boundary"):
        raise ValueError(f"unknown index class {kinds!r}")
    if kinds != "all" and field.surface is None:
        raise ValueError("classified tail sums need the field's surface")
    levels = list(field.level_range())
    if workers > 1 and len(levels) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sums = list(pool.map(
                lambda j: _level_class_sum(field, j, tau, kinds), levels))
    else:
        sums = [_level_class_sum(field, j, tau, kinds) for j in levels]
    return dict(zip(levels, sums))


@dataclass(frozen=True)
class GrowthReport:
    """Per-step growth of a cumulative quantity, judged over a final window."""

    values: np.ndarray
    growths: np.ndarray
    tol: float
    window: int

    @property
    def stable(self) -> bool:
        """No growth step in the final window exceeds the tolerance."""
        tail = self.growths[-self.window:]
        return bool(len(tail) >= 1 and np.all(tail <= self.tol))

    @property
    def growing(self) -> bool:
        """Every growth step in the final window exceeds the tolerance."""
        tail = self.growths[-self.window:]
        return bool(len(tail) >= 1 and np.all(tail > self.tol))


def assess_growth(values, *, growth_tol: float = 0.05,
                  window: int = 3) -> GrowthReport:
    """Relative step-to-step growth of a cumulative sequence.

    A probe quantity "grows" when every one of the last ``window`` steps
    increases by more than ``growth_tol``; it is "stable" when none does.
    """
    v = np.asarray(list(values), dtype=float)
    if len(v) < window + 1:
        raise ValueError("need at least window + 1 values")
    prev = v[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(prev > 0.0, v[1:] / prev - 1.0,
                     np.where(v[1:] > 0.0, np.inf, 0.0))
    return GrowthReport(values=v, growths=g, tol=growth_tol, window=window)


def cumulative_tail(level_sums: dict[int, float]) -> np.ndarray:
    """Running totals of per-level tail sums, in increasing level order."""
    return np.cumsum([level_sums[j] for j in sorted(level_sums)])


def boundary_tail_check(field: CoefficientField, s: float, p: float,
                        tau: float) -> tuple[float, float, float]:
    """Compare the boundary-index tail sum against a Besov norm bound.

    lhs = sum over boundary-classified wavelet indices of |c|^tau,
    rhs = besov_norm(field, (s, p, p))^tau; returns (lhs, rhs, lhs/rhs).
    tau must satisfy 1/2 <= 1/tau <= 1/p or 1/p < 1/tau < 1 - 1/p + s.
    """
    spec = BesovSpec(s, p, p)
    if not admissible(spec):
        raise ValueError(f"(s, p, p) = {spec} is not admissible")
    it, ip = 1.0 / tau, spec.inv_p
    in_range = (0.5 - _TOL <= it <= ip + _TOL) or (ip < it < 1.0 - ip + s)
    if not in_range:
        raise ValueError(f"1/tau = {it} outside the admitted range")
    lhs = math.fsum(level_tail_sums(field, tau, kinds="boundary").values())
    rhs = besov_norm(field, spec) ** tau
    ratio = 0.0 if lhs == 0.0 else lhs / rhs
    return lhs, rhs, ratio


def interior_tail_check(field: CoefficientField, handle,
                        weighted: WeightedSpec, tau: float,
                        resolution: ResolutionOfUnity | None = None,
                        **norm_kwargs) -> tuple[float, float, float]:
    """Compare the interior-index tail sum against a weighted norm bound.

    lhs = sum over interior-classified wavelet indices of |c|^tau,
    rhs = weighted_sobolev_norm(handle, ...)^tau; returns (lhs, rhs, lhs/rhs).
    Requires 1/2 <= 1/tau < 1/2 + min(rho, k - rho) and a basis whose dual
    order covers the derivative order k.
    """
    it = 1.0 / tau
    bound = 0.5 + min(weighted.rho, weighted.k - weighted.rho)
    if not (0.5 - _TOL <= it < bound - _TOL):
        raise ValueError(f"1/tau = {it} outside [1/2, {bound})")
    if field.basis.dt < weighted.k:
        raise ValueError("basis dual order is below the derivative order")
    if field.surface is None:
        raise ValueError("interior tail check needs the field's surface")
    lhs = math.fsum(level_tail_sums(field, tau, kinds="interior").values())
    if resolution is None:
        resolution = ResolutionOfUnity(field.surface)
    rhs = weighted_sobolev_norm(handle, field.surface, resolution,
                                weighted, **norm_kwargs) ** tau
    ratio = 0.0 if lhs == 0.0 else lhs / rhs
    return lhs, rhs, ratio


# -- local polynomial approximation ----------------------------------------------


def _fd_partial(f: Callable, X, Y, bx: int, by: int, h: float):
    """Central finite-difference partial derivative of a bivariate callable."""
    if bx > 0:
        return (_fd_partial(f, X + h, Y, bx - 1, by, h)
                - _fd_partial(f, X - h, Y, bx - 1, by, h)) / (2.0 * h)
    if by > 0:
        return (_fd_partial(f, X, Y + h, bx, by - 1, h)
                - _fd_partial(f, X, Y - h, bx, by - 1, h)) / (2.0 * h)
    return f(X, Y)


def whitney_check(f: Callable, Q: tuple[float, float, float], k: int,
                  derivs: dict[tuple[int, int], Callable] | None = None,
                  quad_order: int = 12) -> float:
    """Ratio of the best polynomial-fit error on a square to its scaled
    k-th seminorm.

    Q = (x0, y0, edge) is an axis-aligned square; the fit runs over total
    degree < k; the seminorm uses supplied partial derivatives of order k
    or central finite differences.  Returns
    ||f - P||_{L2(Q)} / (|Q|^{k/2} |f|_{W^k(L2(Q))}), or exactly 0.0 when
    the numerator is at roundoff level (polynomial reproduction).
    """
    from ._gauss import unit_rule

    if k < 1:
        raise ValueError("k must be >= 1")
    x0, y0, edge = Q
    if edge <= 0:
        raise ValueError("square edge must be positive")
    nodes, wts = unit_rule(quad_order)
    X, Y = np.meshgrid(x0 + edge * nodes, y0 + edge * nodes, indexing="ij")
    W = np.outer(wts, wts).ravel() * edge * edge
    fv = np.asarray(f(X, Y), dtype=float).ravel()

    # reference coordinates in [-1, 1] for a conditioned Legendre design
    U = (2.0 * (X.ravel() - x0) / edge) - 1.0
    V = (2.0 * (Y.ravel() - y0) / edge) - 1.0
    cols = []
    for a in range(k):
        for b in range(k - a):
            pa = np.polynomial.legendre.legval(U, [0.0] * a + [1.0])
            pb = np.polynomial.legendre.legval(V, [0.0] * b + [1.0])
            cols.append(pa * pb)
    A = np.stack(cols, axis=1) * np.sqrt(W)[:, None]
    rhs = fv * np.sqrt(W)
    coeff, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    resid = rhs - A @ coeff
    numerator = float(np.sqrt((resid ** 2).sum()))

    scale = float(np.sqrt((W * fv ** 2).sum()))
    if numerator <= 1e-11 * max(scale, 1e-300):
        return 0.0

    semi_sq = 0.0
    h_fd = edge * 1e-3
    for bx in range(k + 1):
        by = k - bx
        if derivs is not None:
            dv = np.asarray(derivs[(bx, by)](X, Y), dtype=float).ravel()
        else:
            dv = np.asarray(_fd_partial(f, X, Y, bx, by, h_fd),
                            dtype=float).ravel()
        semi_sq += float((W * dv ** 2).sum())
    seminorm = math.sqrt(semi_sq)
    denom = (edge * edge) ** (k / 2.0) * seminorm
    if denom <= numerator * 1e-12:
        raise RuntimeError("vanishing seminorm with a nonzero fit residual; "
                           "quadrature or derivative inputs are inconsistent")
    return numerator / denom


# -- rate fitting ----------------------------------------------------------------


@dataclass(frozen=True)
class RateReport:
    """Least-squares power-law fit of an error sequence on log-log axes."""

    n: np.ndarray
    error: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    fit_lo: int
    fit_hi: int
    predicted: float | None = None
    verdict: str = "unchecked"

    @property
    def decay(self) -> float:
        """Positive decay exponent (negated slope)."""
        return -self.slope


def fit_rate(samples, predicted: float | None = None, *,
             rel_tol: float = 0.10, abs_tol: float = 0.05) -> RateReport:
    """Fit error ~ C * n^slope by least squares on log-log axes.

    With at least seven samples the two smallest and the single largest n
    are dropped before fitting (transient and truncation ends pollute the
    asymptotic slope).  ``predicted`` is a positive decay exponent; the
    verdict compares it against -slope within max(rel_tol*|pred|, abs_tol).
    """
    pairs = np.asarray([(float(n), float(e)) for n, e in samples])
    if len(pairs) < 4:
        raise ValueError("need at least 4 samples")
    n, err = pairs[:, 0], pairs[:, 1]
    if np.any(np.diff(n) <= 0):
        raise ValueError("sample sizes must be strictly increasing")
    if np.any(err <= 0):
        raise ValueError("errors must be positive")
    if np.any(err[1:] > err[:-1] * (1.0 + 1e-9)):
        raise ValueError("errors must be nonincreasing")
    lo, hi = (2, len(n) - 1) if len(n) >= 7 else (0, len(n))
    ln, le = np.log(n[lo:hi]), np.log(err[lo:hi])
    slope, intercept = np.polyfit(ln, le, 1)
    fitted = slope * ln + intercept
    ss_res = float(((le - fitted) ** 2).sum())
    ss_tot = float(((le - le.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 and ss_res <= 1e-24 else \
        (0.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot)
    verdict = "unchecked"
    if predicted is not None:
        tol = max(rel_tol * abs(predicted), abs_tol)
        verdict = "consistent" if abs(-slope - predicted) <= tol else "inconsistent"
    return RateReport(n=n, error=err, slope=float(slope),
                      intercept=float(intercept), r_squared=float(r2),
                      fit_lo=lo, fit_hi=hi, predicted=predicted, verdict=verdict)


# -- synthetic coefficient fields ------------------------------------------------


def _blank_arrays(basis: BasisSpec, n_patches: int, J: int):
    K = 1 << basis.j_star
    r = basis.d
    coarse = np.zeros((n_patches, K, K, r, r))
    levels = {j: np.zeros((n_patches, 3, 1 << j, 1 << j, r, r))
              for j in range(basis.j_star, J + 1)}
    return coarse, levels


def synth_field(surface: PolyhedralSurface | None, basis: BasisSpec,
                kind: str, J: int, **params) -> CoefficientField:
    """Deterministic coefficient-field generators for approximation studies.

    kinds:
      - "extremal_a_star": level=j0, alpha  -> every entry of level j0 equals
        2**(-j0 * (alpha + 1)); other levels vanish.
      - "lacunary": alpha -> one entry per level, scaled 2**(-j * (alpha + 1)).
      - "random_besov": spec, seed -> Gaussian draws rescaled per level so the
        level terms of the seq norm decay geometrically (norm finite for
        every q); reproducible bit-exact from the seed.
      - "suffix_saturator": gamma, spec (p = q) -> weights chosen so the
        n-term error in the given target is (n+1)**(-gamma/2) up to the
        finite-census truncation; fills levels from coarse to fine.
    """
    n_patches = surface.n_patches if surface is not None else params.pop("n_patches")
    if J < basis.j_star:
        raise ValueError("J must be at least the generator level")
    coarse, levels = _blank_arrays(basis, n_patches, J)

    if kind == "extremal_a_star":
        j0 = int(params["level"])
        alpha = float(params["alpha"])
        if not (basis.j_star <= j0 <= J):
            raise ValueError("extremal level outside the stored range")
        levels[j0][...] = 2.0 ** (-j0 * (alpha + 1.0))
    elif kind == "lacunary":
        alpha = float(params["alpha"])
        for j in levels:
            levels[j][0, 0, 0, 0, 0, 0] = 2.0 ** (-j * (alpha + 1.0))
    elif kind == "random_besov":
        spec: BesovSpec = params["spec"]
        rng = np.random.default_rng(params["seed"])
        e = spec.weight_exponent()
        coarse[...] = rng.standard_normal(coarse.shape)
        for j in sorted(levels):
            g = rng.standard_normal(levels[j].shape)
            if math.isinf(spec.p):
                lp = float(np.abs(g).max())
            else:
                lp = float((np.abs(g) ** spec.p).sum() ** (1.0 / spec.p))
            target_lp = 2.0 ** (-float(j)) / (2.0 ** (j * e))
            levels[j][...] = g * (target_lp / lp)
    elif kind == "suffix_saturator":
        gamma = float(params["gamma"])
        spec = params["spec"]
        _require_sequence_target(spec)
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        a = gamma * spec.p / 2.0
        e = spec.weight_exponent()
        start = 0
        for j in sorted(levels):
            size = levels[j].size
            m = np.arange(start, start + size, dtype=float)
            wp = (m + 1.0) ** (-a) - (m + 2.0) ** (-a)
            w = wp ** (1.0 / spec.p)
            levels[j][...] = (w / 2.0 ** (j * e)).reshape(levels[j].shape)
            start += size
    else:
        raise ValueError(f"unknown synthetic field kind {kind!r}")

    return CoefficientField(basis, J, n_patches, coarse, levels, surface)
