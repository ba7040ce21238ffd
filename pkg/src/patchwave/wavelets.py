"""Patchwise tensor-product multiwavelet bases with exact dyadic supports.

The 1-D building blocks are orthonormal piecewise-polynomial multiwavelets on
[0,1]: order 1 is the Haar system, order 2 the piecewise-linear system with two
dual vanishing moments (the dual system equals the primal one, so analysis and
synthesis use the same, pointwise-evaluable functions). Surface bases arise by
lifting tensor products through each patch chart; nothing couples across patch
boundaries.

Coefficients are taken in the patchwise parametric inner product
``<u, v> = sum_i int_{[0,1]^2} u(kappa_i(s,t)) conj(v(kappa_i(s,t))) ds dt``.
"""
from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import sqrt

import numpy as np

from ._gauss import unit_rule
from .surface import PolyhedralSurface, point_segment_distance

__all__ = [
    "BasisSpec",
    "WaveletIndex",
    "IndexClass",
    "CoefficientField",
    "haar_basis",
    "multiwavelet_basis",
    "empty_field",
    "analyze",
    "synthesize",
    "synthesize_params",
    "classify_index",
    "classify_level",
    "moment_check",
    "support_of",
    "basis_inner_product",
    "dual_l2_norm",
    "level_size",
    "save_field",
    "load_field",
]

_SQ3 = sqrt(3.0)


@dataclass(frozen=True)
class BasisSpec:
    """Basis family parameters: primal order d, dual moments dt, coarsest level, quadrature.

    Supported families have d == dt in {1, 2}; order 1 is Haar. ``order`` is an
    alias for d. Wavelet levels run from j_star upward; the generator block sits
    at level j_star - 1 by convention.
    """

    d: int = 1
    dt: int = 1
    j_star: int = 0
    quad_order: int = 4

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("supported primal orders are 1 (Haar) and 2")
        if self.dt != self.d:
            raise ValueError("this orthonormal family has dt == d; "
                             f"got d={self.d}, dt={self.dt}")
        if self.j_star < 0:
            raise ValueError("j_star must be >= 0")
        if self.quad_order < self.d:
            raise ValueError("quadrature order must be at least the primal order")

    @property
    def order(self) -> int:
        return self.d

    def wavelets_per_cell(self) -> int:
        return 3 * self.d * self.d


def haar_basis(j_star: int = 0, quad_order: int = 4) -> BasisSpec:
    return BasisSpec(d=1, dt=1, j_star=j_star, quad_order=quad_order)


def multiwavelet_basis(j_star: int = 2, quad_order: int = 4) -> BasisSpec:
    """Order-2 family: piecewise linear, two vanishing moments, orthonormal."""
    return BasisSpec(d=2, dt=2, j_star=j_star, quad_order=quad_order)


# -- 1-D reference functions --------------------------------------------------

class _Family1D:
    """Piecewise-polynomial 1-D system on [0,1] with a breakpoint at 1/2.

    ``sca[m]`` / ``wav[m]`` hold monomial coefficients (ascending) per half.
    """

    def __init__(self, order: int):
        self.order = order
        if order == 1:
            self.sca = np.array([[[1.0], [1.0]]])
            self.wav = np.array([[[1.0], [-1.0]]])
        else:
            self.sca = np.array([
                [[1.0, 0.0], [1.0, 0.0]],
                [[-_SQ3, 2.0 * _SQ3], [-_SQ3, 2.0 * _SQ3]],
            ])
            # m=0: even about 1/2, two vanishing moments; m=1: odd, three
            self.wav = np.array([
                [[_SQ3, -4.0 * _SQ3], [-3.0 * _SQ3, 4.0 * _SQ3]],
                [[1.0, -6.0], [5.0, -6.0]],
            ])

    def _eval(self, table, m, x):
        x = np.asarray(x, dtype=float)
        v0 = np.polynomial.polynomial.polyval(x, table[m, 0])
        v1 = np.polynomial.polynomial.polyval(x, table[m, 1])
        out = np.where(x < 0.5, v0, v1)
        return np.where((x < 0.0) | (x > 1.0), 0.0, out)

    def scaling(self, m, x):
        return self._eval(self.sca, m, x)

    def wavelet(self, m, x):
        return self._eval(self.wav, m, x)


_FAMILIES: dict[int, _Family1D] = {}


def family_for(basis: BasisSpec) -> _Family1D:
    fam = _FAMILIES.get(basis.d)
    if fam is None:
        fam = _FAMILIES[basis.d] = _Family1D(basis.d)
    return fam


# -- indices ------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class WaveletIndex:
    """Single basis function index.

    level == j_star - 1 with etype == 0 denotes the generator (coarse) block;
    wavelet levels have etype in {1, 2, 3} (wavelet x scaling, scaling x wavelet,
    wavelet x wavelet). (m1, m2) select the per-cell polynomial component and
    are always 0 for the Haar family. Sort order is the serialization tie order
    (level, patch, etype, k1, k2, m1, m2).
    """

    level: int
    patch: int
    etype: int
    k1: int
    k2: int
    m1: int = 0
    m2: int = 0


@dataclass(frozen=True)
class IndexClass:
    """Interior/boundary classification witness for one wavelet index."""

    kind: str                     # "interior" or "boundary"
    rect: tuple                   # parameter support ((s0,s1),(t0,t1))
    ball_center: np.ndarray | None = None
    ball_radius: float = 0.0
    edge_clearance: float = 0.0   # 3D distance from ball to patch boundary

    @property
    def interior(self) -> bool:
        return self.kind == "interior"


def level_size(basis: BasisSpec, j: int, n_patches: int) -> int:
    """Number of wavelet indices at level j across the whole surface."""
    return n_patches * 3 * basis.d ** 2 * (1 << j) ** 2


# -- coefficient container ----------------------------------------------------

@dataclass(frozen=True)
class CoefficientField:
    """Generator-block plus per-level wavelet coefficients up to level J.

    Arrays: ``coarse`` has shape (I, K, K, r, r) with K = 2**j_star;
    ``levels[j]`` has shape (I, 3, 2**j, 2**j, r, r). C-order flattening matches
    the documented lexicographic index order (patch, etype, k1, k2, m1, m2).
    """

    basis: BasisSpec
    J: int
    n_patches: int
    coarse: np.ndarray
    levels: dict[int, np.ndarray] = field(default_factory=dict)
    surface: PolyhedralSurface | None = None

    def __post_init__(self):
        r, K = self.basis.d, 1 << self.basis.j_star
        if self.coarse.shape != (self.n_patches, K, K, r, r):
            raise ValueError(f"coarse block shape {self.coarse.shape} inconsistent with basis")
        for j, arr in self.levels.items():
            if not (self.basis.j_star <= j <= self.J):
                raise ValueError(f"level {j} outside [j_star, J]")
            if arr.shape != (self.n_patches, 3, 1 << j, 1 << j, r, r):
                raise ValueError(f"level {j} array has shape {arr.shape}")
        self.coarse.flags.writeable = False
        for arr in self.levels.values():
            arr.flags.writeable = False

    def level(self, j: int) -> np.ndarray:
        return self.levels[j]

    def level_range(self):
        return range(self.basis.j_star, self.J + 1)

    def n_wavelet_indices(self, J_max: int | None = None) -> int:
        J_max = self.J if J_max is None else J_max
        return sum(level_size(self.basis, j, self.n_patches)
                   for j in self.level_range() if j <= J_max)

    def entry(self, idx: WaveletIndex):
        if idx.etype == 0:
            return self.coarse[idx.patch, idx.k1, idx.k2, idx.m1, idx.m2]
        return self.levels[idx.level][idx.patch, idx.etype - 1,
                                      idx.k1, idx.k2, idx.m1, idx.m2]

    def replace_level(self, j: int, arr: np.ndarray) -> "CoefficientField":
        levels = dict(self.levels)
        levels[j] = np.array(arr)
        return replace(self, levels=levels)

    def truncated(self, J_keep: int) -> "CoefficientField":
        levels = {j: a for j, a in self.levels.items() if j <= J_keep}
        return replace(self, J=min(self.J, max([self.basis.j_star - 1, J_keep])),
                       levels=levels)


def empty_field(basis: BasisSpec, n_patches: int, J: int,
                surface: PolyhedralSurface | None = None,
                dtype=np.float64) -> CoefficientField:
    r, K = basis.d, 1 << basis.j_star
    coarse = np.zeros((n_patches, K, K, r, r), dtype=dtype)
    levels = {j: np.zeros((n_patches, 3, 1 << j, 1 << j, r, r), dtype=dtype)
              for j in range(basis.j_star, J + 1)}
    return CoefficientField(basis=basis, J=J, n_patches=n_patches,
                            coarse=coarse, levels=levels, surface=surface)


# -- analysis -----------------------------------------------------------------

def _ref_nodes(basis: BasisSpec, subcells: int):
    """Composite Gauss nodes/weights on [0,1] split into `subcells` equal parts."""
    x, w = unit_rule(basis.quad_order)
    offs = np.arange(subcells) / subcells
    nodes = (offs[:, None] + x[None, :] / subcells).ravel()
    weights = np.tile(w / subcells, subcells)
    return nodes, weights


def _value_matrices(basis: BasisSpec, subcells: int):
    """Weighted reference values of scaling/wavelet components at composite nodes."""
    fam = family_for(basis)
    nodes, weights = _ref_nodes(basis, subcells)
    r = basis.d
    S = np.vstack([fam.scaling(m, nodes) * weights for m in range(r)])
    W = np.vstack([fam.wavelet(m, nodes) * weights for m in range(r)])
    return nodes, S, W


def _sample(sampler, patch, S, T):
    if hasattr(sampler, "eval_params"):
        return np.asarray(sampler.eval_params(patch.index, S, T))
    pts = patch.chart(S.ravel(), T.ravel())
    return np.asarray(sampler(pts)).reshape(S.shape)


def _grid(nodes_per_cell, j):
    cells = 1 << j
    x1d = ((np.arange(cells)[:, None] + nodes_per_cell[None, :]) / cells).ravel()
    S, T = np.meshgrid(x1d, x1d, indexing="ij")
    return x1d, S, T


def analyze(surface: PolyhedralSurface, sampler, basis: BasisSpec, J: int,
            min_cell_level: int = 0, workers: int = 1) -> CoefficientField:
    """Patchwise wavelet analysis of a function up to level J.

    `sampler` is either a callable on 3D points of shape (N, 3) or an object
    with ``eval_params(patch_index, S, T)``. ``min_cell_level`` forces the
    per-cell quadrature grid at least that fine (exactness for data that is
    piecewise polynomial on a known dyadic grid).
    """
    if J < basis.j_star:
        raise ValueError("J must be >= j_star")
    jobs = []
    for patch in surface.patches:
        jobs.append((patch, None))          # coarse block
        for j in range(basis.j_star, J + 1):
            jobs.append((patch, j))

    # probe dtype cheaply
    probe = _sample(sampler, surface.patches[0],
                    np.array([[0.21]]), np.array([[0.37]]))
    dtype = np.complex128 if np.iscomplexobj(probe) else np.float64

    r = basis.d
    K = 1 << basis.j_star
    coarse = np.zeros((surface.n_patches, K, K, r, r), dtype=dtype)
    levels = {j: np.zeros((surface.n_patches, 3, 1 << j, 1 << j, r, r), dtype=dtype)
              for j in range(basis.j_star, J + 1)}

    def run(job):
        patch, j = job
        if j is None:
            lev, kind = basis.j_star, "coarse"
        else:
            lev, kind = j, "wavelet"
        sub = 1 << max(0, max(lev + (kind == "wavelet"), min_cell_level) - lev)
        nodes, Smat, Wmat = _value_matrices(basis, sub)
        x1d, _, _ = _grid(nodes, lev)
        cells = 1 << lev
        npc = len(nodes)
        scale = 0.5 ** lev  # 2^{-lev/2} per direction: cell width times L2 normalization
        # chunk rows of parent cells to bound the sampled grid size
        chunk = max(1, min(cells, 4_000_000 // (npc * cells * npc)))
        for c0 in range(0, cells, chunk):
            c1 = min(cells, c0 + chunk)
            xs = x1d[c0 * npc:c1 * npc]
            S, T = np.meshgrid(xs, x1d, indexing="ij")
            U4 = _sample(sampler, patch, S, T).reshape(c1 - c0, npc, cells, npc)
            if kind == "coarse":
                coarse[patch.index, c0:c1] = (
                    np.einsum("ma,nb,kalb->klmn", Smat, Smat, U4) * scale)
            else:
                i = patch.index
                levels[j][i, 0, c0:c1] = np.einsum("ma,nb,kalb->klmn", Wmat, Smat, U4) * scale
                levels[j][i, 1, c0:c1] = np.einsum("ma,nb,kalb->klmn", Smat, Wmat, U4) * scale
                levels[j][i, 2, c0:c1] = np.einsum("ma,nb,kalb->klmn", Wmat, Wmat, U4) * scale

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(run, jobs))
    else:
        for job in jobs:
            run(job)
    return CoefficientField(basis=basis, J=J, n_patches=surface.n_patches,
                            coarse=coarse, levels=levels, surface=surface)


# -- synthesis ----------------------------------------------------------------

def synthesize_params(field: CoefficientField, patch_index: int, S, T):
    """Evaluate the expansion at parameter points of one patch."""
    basis = field.basis
    fam = family_for(basis)
    shape = np.asarray(S).shape
    S = np.asarray(S, dtype=float).ravel()
    T = np.asarray(T, dtype=float).ravel()
    if S.shape != T.shape:
        raise ValueError("S and T must have matching shapes")
    r = basis.d
    out = np.zeros(S.shape, dtype=field.coarse.dtype)

    def local(j, X):
        cells = 1 << j
        k = np.minimum((X * cells).astype(int), cells - 1)
        return k, X * cells - k

    # generator block at level j_star
    j0 = basis.j_star
    k1, ls = local(j0, S)
    k2, lt = local(j0, T)
    sv = np.stack([fam.scaling(m, ls) for m in range(r)])
    tv = np.stack([fam.scaling(m, lt) for m in range(r)])
    C = field.coarse[patch_index][k1, k2]              # (N, r, r)
    out += (1 << j0) * np.einsum("pmn,mp,np->p", C, sv, tv)

    for j in field.level_range():
        if j not in field.levels:
            continue
        k1, ls = local(j, S)
        k2, lt = local(j, T)
        sw = np.stack([fam.wavelet(m, ls) for m in range(r)])
        ss = np.stack([fam.scaling(m, ls) for m in range(r)])
        tw = np.stack([fam.wavelet(m, lt) for m in range(r)])
        ts = np.stack([fam.scaling(m, lt) for m in range(r)])
        lev = field.levels[j][patch_index]             # (3, 2^j, 2^j, r, r)
        Cg = lev[:, k1, k2]                            # (3, N, r, r)
        acc = (np.einsum("pmn,mp,np->p", Cg[0], sw, ts)
               + np.einsum("pmn,mp,np->p", Cg[1], ss, tw)
               + np.einsum("pmn,mp,np->p", Cg[2], sw, tw))
        out += (1 << j) * acc
    return out.reshape(shape)


def synthesize(field: CoefficientField, points):
    """Evaluate the expansion at 3D surface points (slow path: chart inversion)."""
    if field.surface is None:
        raise ValueError("field has no surface attached; use synthesize_params")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(pts), dtype=field.coarse.dtype)
    surf = field.surface
    for i, x in enumerate(pts):
        hit = None
        for patch in surf.patches:
            if abs(float(np.dot(x - patch.coeff_a, patch.normal))) > 1e-9 * (surf.min_edge + 1):
                continue
            s, t = patch.chart_inverse(x)
            if -1e-12 <= s <= 1 + 1e-12 and -1e-12 <= t <= 1 + 1e-12:
                hit = (patch.index, min(max(s, 0.0), 1.0), min(max(t, 0.0), 1.0))
                break
        if hit is None:
            raise ValueError(f"point {x} not located on any patch")
        out[i] = synthesize_params(field, hit[0], np.array([hit[1]]), np.array([hit[2]]))[0]
    return out if out.size > 1 else out[0]


# -- classification and supports ----------------------------------------------

def support_of(basis: BasisSpec, idx: WaveletIndex,
               surface: PolyhedralSurface | None = None):
    """Exact parameter support rectangle and (optionally) its surface measure."""
    if idx.etype == 0:
        j = basis.j_star
    else:
        j = idx.level
    h = 0.5 ** j
    rect = ((idx.k1 * h, (idx.k1 + 1) * h), (idx.k2 * h, (idx.k2 + 1) * h))
    param_area = h * h
    surface_area = None
    if surface is not None:
        patch = surface.patches[idx.patch]
        sc = 0.5 * (rect[0][0] + rect[0][1])
        tc = 0.5 * (rect[1][0] + rect[1][1])
        # |det D kappa| is affine in (s,t): midpoint value integrates it exactly
        surface_area = float(patch.jacobian_det(np.array(sc), np.array(tc))) * param_area
    return rect, param_area, surface_area


def _cell_image(patch, rect):
    (s0, s1), (t0, t1) = rect
    corners = np.array([patch.chart(s, t) for s, t in
                        ((s0, t0), (s1, t0), (s1, t1), (s0, t1))])
    center = corners.mean(axis=0)
    radius = float(np.max(np.linalg.norm(corners - center, axis=1)))
    return corners, center, radius


def classify_index(surface: PolyhedralSurface, basis: BasisSpec,
                   idx: WaveletIndex) -> IndexClass:
    """Interior/boundary split of a wavelet index.

    Interior requires: the support cell sits strictly inside the open parameter
    square, and the circumscribed ball of its image keeps more than 2^{-level}
    (surface units) of clearance from the patch boundary.
    """
    if idx.etype == 0:
        raise ValueError("generator-block indices are not classified")
    j = idx.level
    cells = 1 << j
    rect, _, _ = support_of(basis, idx)
    if idx.k1 == 0 or idx.k2 == 0 or idx.k1 == cells - 1 or idx.k2 == cells - 1:
        return IndexClass(kind="boundary", rect=rect)
    patch = surface.patches[idx.patch]
    corners, center, radius = _cell_image(patch, rect)
    dist = min(point_segment_distance(center, patch.corners[k], patch.corners[(k + 1) % 4])
               for k in range(4))
    clearance = dist - radius
    kind = "interior" if clearance > 0.5 ** j else "boundary"
    return IndexClass(kind=kind, rect=rect, ball_center=center,
                      ball_radius=radius, edge_clearance=clearance)


def classify_level(surface: PolyhedralSurface, basis: BasisSpec, j: int):
    """Vectorized interior mask per patch at level j: bool array (I, 2^j, 2^j).

    A cell is interior when it avoids the parameter boundary and the
    circumscribed ball of its image clears the patch boundary by more than
    2^{-j} surface units; agrees cell-by-cell with ``classify_index``.
    """
    cells = 1 << j
    h = 0.5 ** j
    masks = np.zeros((surface.n_patches, cells, cells), dtype=bool)
    k = np.arange(cells)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    s0 = (K1.ravel()) * h
    t0 = (K2.ravel()) * h
    inner = (K1 > 0) & (K2 > 0) & (K1 < cells - 1) & (K2 < cells - 1)
    for patch in surface.patches:
        corner_imgs = np.stack(
            [patch.chart(s0 + ds, t0 + dt) for ds, dt in
             ((0.0, 0.0), (h, 0.0), (h, h), (0.0, h))], axis=1)   # (N, 4, 3)
        centers = corner_imgs.mean(axis=1)
        radii = np.linalg.norm(corner_imgs - centers[:, None, :], axis=2).max(axis=1)
        dmin = np.full(len(centers), np.inf)
        for ke in range(4):
            a, b = patch.corners[ke], patch.corners[(ke + 1) % 4]
            ab = b - a
            tpar = np.clip((centers - a) @ ab / float(np.dot(ab, ab)), 0.0, 1.0)
            dmin = np.minimum(dmin, np.linalg.norm(centers - (a + tpar[:, None] * ab), axis=1))
        ok = (dmin - radii) > h
        masks[patch.index] = inner & ok.reshape(cells, cells)
    return masks


def iter_level_indices(basis: BasisSpec, n_patches: int, j: int):
    """All wavelet indices at level j in lexicographic order."""
    cells = 1 << j
    r = basis.d
    for i in range(n_patches):
        for e in (1, 2, 3):
            for k1 in range(cells):
                for k2 in range(cells):
                    for m1 in range(r):
                        for m2 in range(r):
                            yield WaveletIndex(j, i, e, k1, k2, m1, m2)


# -- inner products and moments -------------------------------------------------

def _index_values(basis: BasisSpec, idx: WaveletIndex, x, dim: int):
    """1-D factor values of a basis function at parameter points x."""
    fam = family_for(basis)
    j = basis.j_star if idx.etype == 0 else idx.level
    k = idx.k1 if dim == 0 else idx.k2
    m = idx.m1 if dim == 0 else idx.m2
    local = np.asarray(x) * (1 << j) - k
    inside = (local >= 0.0) & (local <= 1.0)
    use_wavelet = (idx.etype in (1, 3)) if dim == 0 else (idx.etype in (2, 3))
    vals = fam.wavelet(m, np.clip(local, 0.0, 1.0)) if use_wavelet \
        else fam.scaling(m, np.clip(local, 0.0, 1.0))
    return np.where(inside, vals, 0.0) * sqrt(2.0) ** j


def index_values_param(basis: BasisSpec, idx: WaveletIndex, S, T):
    """Values of the (primal) basis function at parameter points of its patch."""
    return _index_values(basis, idx, S, 0) * _index_values(basis, idx, T, 1)


def basis_inner_product(surface: PolyhedralSurface, basis: BasisSpec,
                        a: WaveletIndex, b: WaveletIndex) -> float:
    """Parametric inner product of two basis functions (exact quadrature)."""
    if a.patch != b.patch:
        return 0.0
    ja = basis.j_star if a.etype == 0 else a.level
    jb = basis.j_star if b.etype == 0 else b.level
    lev = max(ja, jb) + 1
    nodes, weights = _ref_nodes(basis, 1)
    cells = 1 << lev
    x = (np.arange(cells)[:, None] / cells + nodes[None, :] / cells).ravel()
    w = np.tile(weights / cells, cells)
    fa_s = _index_values(basis, a, x, 0)
    fb_s = _index_values(basis, b, x, 0)
    fa_t = _index_values(basis, a, x, 1)
    fb_t = _index_values(basis, b, x, 1)
    return float((w * fa_s * fb_s).sum() * (w * fa_t * fb_t).sum())


def dual_l2_norm(surface: PolyhedralSurface, basis: BasisSpec,
                 idx: WaveletIndex) -> float:
    """True L2(surface) norm of the (self-dual) basis function."""
    patch = surface.patches[idx.patch]
    j = basis.j_star if idx.etype == 0 else idx.level
    sub = 1
    nodes, weights = _ref_nodes(basis, sub)
    cells = 1 << (j + 1)
    x = (np.arange(cells)[:, None] / cells + nodes[None, :] / cells).ravel()
    w = np.tile(weights / cells, cells)
    S, T = np.meshgrid(x, x, indexing="ij")
    vals = index_values_param(basis, idx, S, T)
    jac = patch.jacobian_det(S.ravel(), T.ravel()).reshape(S.shape)
    W = np.outer(w, w)
    return float(np.sqrt(np.sum(W * vals ** 2 * jac)))


def moment_check(surface: PolyhedralSurface, basis: BasisSpec,
                 idx: WaveletIndex, poly_coeffs) -> float:
    """|<P, dual wavelet>| in the patch inner product, for interior indices.

    ``poly_coeffs[a, b]`` multiplies s^a t^b; the total degree must be < dt.
    Refuses boundary and generator indices: the vanishing-moment property is
    only asserted for interior duals.
    """
    C = np.atleast_2d(np.asarray(poly_coeffs, dtype=float))
    deg = -1
    for aa in range(C.shape[0]):
        for bb in range(C.shape[1]):
            if C[aa, bb] != 0.0:
                deg = max(deg, aa + bb)
    if deg >= basis.dt:
        raise ValueError(f"polynomial degree {deg} not below dt={basis.dt}")
    cls = classify_index(surface, basis, idx)
    if not cls.interior:
        raise ValueError("moment_check applies to interior indices only")
    j = idx.level
    order = max(basis.quad_order, basis.d + max(deg, 0) // 2 + 1)
    x, w = unit_rule(order)
    # integrate over the support cell, split at the midpoint in each direction
    half = 0.5 ** (j + 1)
    xs = np.concatenate([idx.k1 * 2 * half + x * half, idx.k1 * 2 * half + half + x * half])
    ws = np.concatenate([w * half, w * half])
    xt = np.concatenate([idx.k2 * 2 * half + x * half, idx.k2 * 2 * half + half + x * half])
    S, T = np.meshgrid(xs, xt, indexing="ij")
    P = np.polynomial.polynomial.polyval2d(S, T, C)
    vals = index_values_param(basis, idx, S, T)
    return float(abs(np.sum(np.outer(ws, ws) * P * vals)))


# -- serialization --------------------------------------------------------------

def save_field(field: CoefficientField, path) -> None:
    """Loss-free dump: npz archive with a JSON header and per-level arrays."""
    header = {
        "basis": {"d": field.basis.d, "dt": field.basis.dt,
                  "j_star": field.basis.j_star, "quad_order": field.basis.quad_order},
        "J": field.J,
        "n_patches": field.n_patches,
        "surface_hash": field.surface.content_hash() if field.surface else None,
        "levels": sorted(field.levels.keys()),
    }
    arrays = {f"level_{j}": field.levels[j] for j in field.levels}
    np.savez(path, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
             coarse=field.coarse, **arrays)


def load_field(path, surface: PolyhedralSurface | None = None) -> CoefficientField:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        basis = BasisSpec(**header["basis"])
        levels = {j: data[f"level_{j}"] for j in header["levels"]}
        field = CoefficientField(basis=basis, J=header["J"],
                                 n_patches=header["n_patches"],
                                 coarse=data["coarse"], levels=levels,
                                 surface=surface)
    if surface is not None and header["surface_hash"] is not None:
        if surface.content_hash() != header["surface_hash"]:
            raise ValueError("surface does not match the one the field was built on")
    return field
