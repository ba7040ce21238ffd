"""Smoothness-space norms computed from wavelet coefficient fields.

Scales are parameterized by (alpha, p, q): alpha is the smoothness order in
the L2-referenced scale, p the integrability of the level blocks, q the
across-level summability. The admissible window for the two-dimensional
surface setting is 1/2 <= 1/p <= alpha/2 + 1/2, with q <= 2 required exactly
on the upper (critical) line. Along the critical line 1/p = alpha/2 + 1/2 all
level weights collapse to one, which is what makes greedy coefficient
thresholding work in that regime.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._gauss import unit_rule
from .wavelets import CoefficientField, family_for

__all__ = [
    "BesovSpec",
    "admissible",
    "on_critical_line",
    "critical_line_spec",
    "adaptivity_tau",
    "besov_norm",
    "besov_level_terms",
    "seq_norm",
    "sobolev_norm",
    "coarse_lp_norm",
    "embedding_predicate",
    "interpolation_params",
]

_TOL = 1e-12


@dataclass(frozen=True)
class BesovSpec:
    """Scale parameters (alpha, p, q); p or q may be math.inf."""

    alpha: float
    p: float
    q: float

    def __post_init__(self):
        if not (self.p > 0):
            raise ValueError("p must be positive (math.inf allowed)")
        if not (self.q > 0):
            raise ValueError("q must be positive (math.inf allowed)")

    @property
    def inv_p(self) -> float:
        return 0.0 if math.isinf(self.p) else 1.0 / self.p

    @property
    def inv_q(self) -> float:
        return 0.0 if math.isinf(self.q) else 1.0 / self.q

    def weight_exponent(self) -> float:
        """Per-level weight is 2**(level * weight_exponent())."""
        return self.alpha + 2.0 * (0.5 - self.inv_p)


def adaptivity_tau(alpha: float) -> float:
    """Integrability on the critical line at smoothness alpha: 1/tau = alpha/2 + 1/2."""
    return 2.0 / (alpha + 1.0)


def critical_line_spec(alpha: float) -> BesovSpec:
    """The spec on the critical line with p = q = tau(alpha)."""
    tau = adaptivity_tau(alpha)
    return BesovSpec(alpha=alpha, p=tau, q=tau)


def on_critical_line(spec: BesovSpec, tol: float = _TOL) -> bool:
    return abs(spec.inv_p - (spec.alpha / 2.0 + 0.5)) <= tol


def admissible(spec: BesovSpec, tol: float = _TOL) -> bool:
    """1/2 <= 1/p <= alpha/2 + 1/2, with q <= 2 required on the critical line."""
    lo, hi = 0.5, spec.alpha / 2.0 + 0.5
    if spec.inv_p < lo - tol or spec.inv_p > hi + tol:
        return False
    if on_critical_line(spec, tol) and spec.q > 2.0 + tol:
        return False
    return True


def _lp(arrays, p: float) -> float:
    """l^p aggregate of the absolute values of a list of ndarrays."""
    if math.isinf(p):
        return max((float(np.abs(a).max()) if a.size else 0.0) for a in arrays)
    total = sum(float((np.abs(a) ** p).sum()) for a in arrays)
    return total ** (1.0 / p)


def _lq_combine(terms, q: float) -> float:
    terms = np.asarray(terms, dtype=float)
    if math.isinf(q):
        return float(terms.max()) if terms.size else 0.0
    return float((terms ** q).sum() ** (1.0 / q))


def coarse_lp_norm(field: CoefficientField, p: float, quad_order: int = 8) -> float:
    """Geometric L_p(surface) norm of the generator-block part of the expansion.

    For p = inf the generator part is a product of per-direction polynomials of
    degree < 2 on each coarse cell, so the max over cell corners is exact.
    """
    if field.surface is None:
        raise ValueError("field has no surface attached")
    basis = field.basis
    fam = family_for(basis)
    j0 = basis.j_star
    cells = 1 << j0
    r = basis.d

    if math.isinf(p):
        eps = 1e-9
        edge = np.concatenate([[eps], np.linspace(0.25, 0.75, 3), [1 - eps]])
        x = ((np.arange(cells)[:, None] + edge[None, :]) / cells).ravel()
    else:
        xg, wg = unit_rule(quad_order)
        x = ((np.arange(cells)[:, None] + xg[None, :]) / cells).ravel()
        w = np.tile(wg / cells, cells)

    k = np.minimum((x * cells).astype(int), cells - 1)
    loc = x * cells - k
    sval = np.stack([fam.scaling(m, loc) for m in range(r)])   # (r, N)

    best = 0.0
    total = 0.0
    for patch in field.surface.patches:
        C = field.coarse[patch.index]                          # (K, K, r, r)
        Cg = C[np.ix_(k, k)]                                   # (N, N, r, r)
        vals = (1 << j0) * np.einsum("abmn,ma,nb->ab", Cg, sval, sval)
        if math.isinf(p):
            best = max(best, float(np.abs(vals).max()))
        else:
            S, T = np.meshgrid(x, x, indexing="ij")
            jac = patch.jacobian_det(S.ravel(), T.ravel()).reshape(S.shape)
            total += float(np.sum(np.outer(w, w) * np.abs(vals) ** p * jac))
    return best if math.isinf(p) else total ** (1.0 / p)


def besov_level_terms(field: CoefficientField, spec: BesovSpec,
                      J: int | None = None) -> dict[int, float]:
    """Weighted per-level contributions 2^{j e} (sum_xi |c_xi|^p)^{1/p}."""
    e = spec.weight_exponent()
    out = {}
    for j in field.level_range():
        if J is not None and j > J:
            break
        arr = field.levels[j]
        out[j] = 2.0 ** (j * e) * _lp([arr], spec.p)
    return out


def besov_norm(field: CoefficientField, spec: BesovSpec,
               J: int | None = None, quad_order: int = 8) -> float:
    """Coarse L_p part plus weighted level aggregate; errors on inadmissible specs."""
    if not admissible(spec):
        raise ValueError(
            f"(alpha={spec.alpha}, p={spec.p}, q={spec.q}) lies outside the "
            "admissible window 1/2 <= 1/p <= alpha/2 + 1/2 (q <= 2 on the line)")
    terms = besov_level_terms(field, spec, J=J)
    tail = _lq_combine(list(terms.values()), spec.q)
    return coarse_lp_norm(field, spec.p, quad_order=quad_order) + tail


def seq_norm(field: CoefficientField, spec: BesovSpec, J: int | None = None) -> float:
    """Pure coefficient-space version: the generator block enters as a level-j*
    term (weight 2^{j* e}, l^p over its coefficients); no surface quadrature."""
    e = spec.weight_exponent()
    terms = [2.0 ** (field.basis.j_star * e) * _lp([field.coarse], spec.p)]
    terms.extend(besov_level_terms(field, spec, J=J).values())
    return _lq_combine(terms, spec.q)


def sobolev_norm(field: CoefficientField, s: float,
                 J: int | None = None, quad_order: int = 8) -> float:
    """L2-scale norm of order s: coarse L2 plus (sum_j 4^{sj} sum |c|^2)^{1/2}.

    The coefficient characterization is validated for |s| < 1/2 on these
    surfaces; outside that range a warning is emitted and the value returned
    is the same formula, to be read as a diagnostic only.
    """
    if abs(s) >= 0.5:
        warnings.warn(
            f"order s={s} outside the validated range |s| < 1/2; value is formal",
            UserWarning, stacklevel=2)
    total = 0.0
    for j in field.level_range():
        if J is not None and j > J:
            break
        arr = field.levels[j]
        total += 4.0 ** (s * j) * float((np.abs(arr) ** 2).sum())
    return coarse_lp_norm(field, 2.0, quad_order=quad_order) + math.sqrt(total)


def embedding_predicate(src: BesovSpec, dst: BesovSpec, tol: float = _TOL) -> bool:
    """Continuous embedding of the src scale into the dst scale.

    Holds when the smoothness gap gamma = alpha0 - alpha1 strictly exceeds
    2 max{0, 1/p0 - 1/p1}, and in the limiting equal-gap case exactly when
    q0 <= q1.
    """
    gamma = src.alpha - dst.alpha
    need = 2.0 * max(0.0, src.inv_p - dst.inv_p)
    if gamma > need + tol:
        return True
    if abs(gamma - need) <= tol:
        return src.q <= dst.q + tol
    return False


def interpolation_params(a: BesovSpec, b: BesovSpec, theta: float) -> BesovSpec:
    """Exact interpolation space between two scales: componentwise convex
    combination of (alpha, 1/p, 1/q) with parameter theta in (0, 1)."""
    if not (0.0 < theta < 1.0):
        raise ValueError("theta must lie strictly between 0 and 1")
    if math.isinf(a.q) and math.isinf(b.q):
        raise ValueError("at least one endpoint must have q < inf")
    alpha = (1 - theta) * a.alpha + theta * b.alpha
    ip = (1 - theta) * a.inv_p + theta * b.inv_p
    iq = (1 - theta) * a.inv_q + theta * b.inv_q
    p = math.inf if ip == 0.0 else 1.0 / ip
    q = math.inf if iq == 0.0 else 1.0 / iq
    return BesovSpec(alpha=alpha, p=p, q=q)
