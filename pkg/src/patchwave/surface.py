"""Patchwise-flat polyhedral surfaces with vertex cone atlases and a smooth partition of unity.

A surface is a closed, oriented collection of planar convex quadrilateral patches.
Every patch carries a bilinear chart from the unit square; every vertex carries a
tangent-cone atlas: one planar sector per incident patch, each with an opening angle
and a distance-preserving map from the unfolded sector into 3-space.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

__all__ = [
    "SurfaceError",
    "Patch",
    "ConeFace",
    "PolyhedralSurface",
    "ResolutionOfUnity",
    "load_surface",
    "surface_text",
    "face_polar_coords",
    "face_point",
    "delta_face",
    "partition_eval",
    "unit_cube",
    "fichera_corner",
    "quasi_random_points",
]

_PLANAR_TOL = 1e-9


class SurfaceError(ValueError):
    """Raised for invalid surface descriptions or incompatible configuration."""


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0.0:
        raise SurfaceError("zero-length edge encountered")
    return v / n


def point_segment_distance(p, a, b):
    """Euclidean distance from point `p` to segment [a, b]."""
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.dot(p - a, ab)) / denom
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (a + t * ab)))


def point_quad_distance(p, corners):
    """Euclidean distance from `p` to a planar convex quadrilateral given by 4 corners."""
    c = np.asarray(corners, dtype=float)
    n = _unit(np.cross(c[1] - c[0], c[3] - c[0]))
    off = float(np.dot(p - c[0], n))
    proj = p - off * n
    # inside test against all four edges (consistent winding)
    inside = True
    for k in range(4):
        a, b = c[k], c[(k + 1) % 4]
        if np.dot(np.cross(b - a, proj - a), n) < -1e-14:
            inside = False
            break
    if inside:
        return abs(off)
    d = min(point_segment_distance(p, c[k], c[(k + 1) % 4]) for k in range(4))
    return d


@dataclass(frozen=True)
class Patch:
    """Planar convex quadrilateral with a bilinear chart kappa: [0,1]^2 -> R^3.

    Corners are in cyclic order, counter-clockwise when seen from outside, so the
    outward unit normal is cross(c1-c0, c3-c0) normalized.
    """

    index: int
    corner_ids: tuple[int, int, int, int]
    corners: np.ndarray          # (4, 3)
    normal: np.ndarray           # (3,)
    frame: np.ndarray            # (2, 3) orthonormal in-plane basis
    area: float
    min_edge: float

    # bilinear coefficients: kappa(s,t) = a + b s + c t + d s t
    coeff_a: np.ndarray = field(repr=False, default=None)
    coeff_b: np.ndarray = field(repr=False, default=None)
    coeff_c: np.ndarray = field(repr=False, default=None)
    coeff_d: np.ndarray = field(repr=False, default=None)

    def chart(self, s, t):
        """Evaluate the bilinear chart at parameters (s, t); broadcasts."""
        s = np.asarray(s, dtype=float)[..., None]
        t = np.asarray(t, dtype=float)[..., None]
        return self.coeff_a + self.coeff_b * s + self.coeff_c * t + self.coeff_d * (s * t)

    def jacobian_det(self, s, t):
        """Area scaling |det D kappa| at (s, t); affine in (s, t) for planar quads."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        ds = self.coeff_b + self.coeff_d * t[..., None]
        dt = self.coeff_c + self.coeff_d * s[..., None]
        return np.linalg.norm(np.cross(ds, dt), axis=-1)

    def chart_inverse(self, x, tol=1e-13, maxit=40):
        """Invert the chart for a point known to lie on the patch plane."""
        x = np.asarray(x, dtype=float)
        u1, u2 = self.frame
        p = np.array([np.dot(x - self.coeff_a, u1), np.dot(x - self.coeff_a, u2)])
        b2 = np.array([np.dot(self.coeff_b, u1), np.dot(self.coeff_b, u2)])
        c2 = np.array([np.dot(self.coeff_c, u1), np.dot(self.coeff_c, u2)])
        d2 = np.array([np.dot(self.coeff_d, u1), np.dot(self.coeff_d, u2)])
        st = np.linalg.solve(np.column_stack([b2, c2]), p)  # affine initial guess
        if np.dot(d2, d2) > 0.0:
            for _ in range(maxit):
                r = b2 * st[0] + c2 * st[1] + d2 * st[0] * st[1] - p
                if np.dot(r, r) < tol * tol:
                    break
                J = np.column_stack([b2 + d2 * st[1], c2 + d2 * st[0]])
                st = st - np.linalg.solve(J, r)
        return float(st[0]), float(st[1])


@dataclass(frozen=True)
class ConeFace:
    """One face of a vertex tangent cone: a planar sector unfolded at the origin.

    The distance-preserving map is R(y) = apex + y1*e1 + y2*e2 with orthonormal
    in-plane vectors e1 (first bounding ray, along an edge of the patch) and e2.
    """

    vertex: int
    t: int
    patch: int                   # the unique incident patch spanning this sector
    gamma: float                 # opening angle in (0, pi)
    apex: np.ndarray             # (3,)
    e1: np.ndarray               # (3,)
    e2: np.ndarray               # (3,)
    normal: np.ndarray           # (3,)

    def to_3d(self, y1, y2):
        y1 = np.asarray(y1, dtype=float)[..., None]
        y2 = np.asarray(y2, dtype=float)[..., None]
        return self.apex + y1 * self.e1 + y2 * self.e2

    def to_plane(self, x):
        d = np.asarray(x, dtype=float) - self.apex
        return d @ self.e1, d @ self.e2


class PolyhedralSurface:
    """Immutable closed surface made of planar convex quadrilateral patches."""

    def __init__(self, vertices, patches, constants=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.vertices.flags.writeable = False
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise SurfaceError("vertices must be an (N, 3) array")
        quads = [tuple(int(v) for v in q) for q in patches]
        self._scale = float(np.max(np.ptp(self.vertices, axis=0)))
        self.patches = [self._build_patch(i, q) for i, q in enumerate(quads)]
        self.constants = dict(constants or {})
        self._check_edges()
        self.cones = self._build_cones()
        self.min_edge = min(p.min_edge for p in self.patches)

    # -- construction -------------------------------------------------------

    def _build_patch(self, index, quad):
        if len(quad) != 4 or len(set(quad)) != 4:
            raise SurfaceError(f"patch {index}: degenerate patch (needs 4 distinct corners)")
        c = self.vertices[list(quad)]
        n_raw = np.cross(c[1] - c[0], c[3] - c[0])
        if np.linalg.norm(n_raw) <= 1e-14 * self._scale ** 2:
            raise SurfaceError(f"patch {index}: degenerate patch (zero area corner span)")
        normal = _unit(n_raw)
        if abs(np.dot(c[2] - c[0], normal)) > _PLANAR_TOL * self._scale:
            raise SurfaceError(f"patch {index}: non-planar quadrilateral")
        u1 = _unit(c[1] - c[0])
        u2 = np.cross(normal, u1)
        # bilinear coefficients
        a = c[0]
        b = c[1] - c[0]
        cc = c[3] - c[0]
        d = c[2] - c[1] - c[3] + c[0]
        # det D kappa is affine in (s,t); positivity at all four corners <=> convex,
        # counter-clockwise quad <=> the chart is a diffeomorphism onto the patch
        p2 = lambda v: np.array([np.dot(v, u1), np.dot(v, u2)])
        b2, c2, d2 = p2(b), p2(cc), p2(d)
        cross2 = lambda u, v: u[0] * v[1] - u[1] * v[0]
        dets = [cross2(b2 + d2 * t, c2 + d2 * s) for s, t in ((0, 0), (1, 0), (0, 1), (1, 1))]
        if min(dets) <= 1e-12 * self._scale ** 2:
            raise SurfaceError(
                f"patch {index}: degenerate patch (chart Jacobian not positive; "
                "quad must be strictly convex and counter-clockwise from outside)")
        edges = [np.linalg.norm(c[(k + 1) % 4] - c[k]) for k in range(4)]
        area = 0.5 * abs(cross2(p2(c[2] - c[0]), p2(c[3] - c[1])))
        patch = Patch(index=index, corner_ids=tuple(quad), corners=c, normal=normal,
                      frame=np.vstack([u1, u2]), area=float(area), min_edge=float(min(edges)),
                      coeff_a=a, coeff_b=b, coeff_c=cc, coeff_d=d)
        for arr in (patch.corners, patch.normal, patch.frame):
            arr.flags.writeable = False
        return patch

    def _check_edges(self):
        seen: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
        for p in self.patches:
            ids = p.corner_ids
            for k in range(4):
                a, b = ids[k], ids[(k + 1) % 4]
                seen.setdefault((min(a, b), max(a, b)), []).append((p.index, a, b))
        for (a, b), uses in seen.items():
            if len(uses) != 2:
                raise SurfaceError(
                    f"non-manifold edge ({a},{b}): shared by {len(uses)} patches, expected 2")
            if uses[0][1] == uses[1][1]:
                raise SurfaceError(
                    f"inconsistent orientation across edge ({a},{b}) "
                    f"between patches {uses[0][0]} and {uses[1][0]}")
        self._edge_table = seen

    def _build_cones(self):
        incident: dict[int, list[tuple[int, int]]] = {}
        for p in self.patches:
            for pos, vid in enumerate(p.corner_ids):
                incident.setdefault(vid, []).append((p.index, pos))
        cones: dict[int, list[ConeFace]] = {}
        for vid, inc in sorted(incident.items()):
            self._check_vertex_cycle(vid, inc)
            faces = []
            for t, (pi, pos) in enumerate(sorted(inc)):
                p = self.patches[pi]
                apex = self.vertices[vid]
                nxt = p.corners[(pos + 1) % 4] - apex
                prv = p.corners[(pos - 1) % 4] - apex
                e1 = _unit(nxt)
                e2 = _unit(prv - np.dot(prv, e1) * e1)
                gamma = math.atan2(float(np.dot(prv, e2)), float(np.dot(prv, e1)))
                f = ConeFace(vertex=vid, t=t, patch=pi, gamma=gamma, apex=apex,
                             e1=e1, e2=e2, normal=p.normal)
                for arr in (f.e1, f.e2):
                    arr.flags.writeable = False
                faces.append(f)
            cones[vid] = faces
        return cones

    def _check_vertex_cycle(self, vid, inc):
        """The incident patches must close up into a single cycle around the vertex."""
        edge_of = {}
        for pi, pos in inc:
            ids = self.patches[pi].corner_ids
            nxt, prv = ids[(pos + 1) % 4], ids[(pos - 1) % 4]
            for other in (nxt, prv):
                edge_of.setdefault((min(vid, other), max(vid, other)), []).append(pi)
        for e, ps in edge_of.items():
            if len(ps) != 2:
                raise SurfaceError(f"non-manifold vertex {vid}: edge {e} in {len(ps)} patches")
        neighbors: dict[int, list[int]] = {}
        for ps in edge_of.values():
            neighbors.setdefault(ps[0], []).append(ps[1])
            neighbors.setdefault(ps[1], []).append(ps[0])
        start = inc[0][0]
        seen = {start}
        cur, prev = neighbors[start][0], start
        while cur != start:
            seen.add(cur)
            a, b = neighbors[cur]
            cur, prev = (b, cur) if a == prev else (a, cur)
        if len(seen) != len(inc):
            raise SurfaceError(f"vertex {vid}: incident patches do not form a single cycle")

    # -- queries -------------------------------------------------------------

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_patches(self):
        return len(self.patches)

    def cone_faces(self, n) -> list[ConeFace]:
        return self.cones[int(n)]

    def cone_angles(self, n):
        return [f.gamma for f in self.cone_faces(n)]

    def incident_patches(self, n):
        return [f.patch for f in self.cone_faces(n)]

    def corner_position(self, patch_index, vertex_id):
        ids = self.patches[patch_index].corner_ids
        return ids.index(vertex_id)

    def description(self):
        return {
            "vertices": [[float(x) for x in v] for v in self.vertices],
            "patches": [list(p.corner_ids) for p in self.patches],
            "constants": {k: float(v) for k, v in sorted(self.constants.items())},
        }

    def content_hash(self):
        return hashlib.sha256(surface_text(self).encode()).hexdigest()


# -- serialization ----------------------------------------------------------

def surface_text(surface: PolyhedralSurface) -> str:
    """Canonical structured-text (JSON) form; coordinate round-trip is exact."""
    return json.dumps(surface.description(), sort_keys=True, separators=(",", ":"))


def load_surface(source) -> PolyhedralSurface:
    """Build a surface from a description dict, JSON text, or a path to a JSON file.

    Required fields: ``vertices`` (list of [x, y, z]) and ``patches`` (list of
    [v0, v1, v2, v3], counter-clockwise from outside). Optional: ``constants``
    with keys C1, C2.
    """
    if isinstance(source, PolyhedralSurface):
        return source
    if isinstance(source, dict):
        doc = source
    else:
        text = None
        if isinstance(source, (str, os.PathLike)):
            s = str(source)
            if s.lstrip().startswith("{"):
                text = s
            else:
                with open(s, "r", encoding="utf-8") as fh:
                    text = fh.read()
        if text is None:
            raise SurfaceError(f"cannot interpret surface source of type {type(source)!r}")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SurfaceError(f"surface file is not valid JSON: {exc}") from exc
    for key in ("vertices", "patches"):
        if key not in doc:
            raise SurfaceError(f"surface description lacks required field '{key}'")
    return PolyhedralSurface(doc["vertices"], doc["patches"], doc.get("constants"))


# -- cone geometry ops ------------------------------------------------------

def face_polar_coords(surface: PolyhedralSurface, n: int, t: int, x) -> tuple[float, float]:
    """Polar coordinates (r, phi) of a 3D point on cone face t of vertex n.

    r is the distance to the vertex, phi in [0, gamma] measured from the first
    bounding ray. Raises if the point is off the face plane or outside the sector.
    """
    f = surface.cone_faces(n)[t]
    x = np.asarray(x, dtype=float)
    d = x - f.apex
    if abs(float(np.dot(d, f.normal))) > 1e-9 * (np.linalg.norm(d) + surface.min_edge):
        raise SurfaceError(f"point not on the plane of cone face ({n},{t})")
    y1, y2 = float(np.dot(d, f.e1)), float(np.dot(d, f.e2))
    r = math.hypot(y1, y2)
    phi = math.atan2(y2, y1)
    tol = 1e-12 + 1e-12 * abs(f.gamma)
    if phi < -tol or phi > f.gamma + tol:
        raise SurfaceError(f"point outside sector ({n},{t}): phi={phi}, gamma={f.gamma}")
    return r, float(min(max(phi, 0.0), f.gamma))


def face_point(surface: PolyhedralSurface, n: int, t: int, r: float, phi: float):
    """Inverse of face_polar_coords: map sector polar coordinates to 3-space."""
    f = surface.cone_faces(n)[t]
    return f.apex + r * (math.cos(phi) * f.e1 + math.sin(phi) * f.e2)


def _dist_to_ray(y1, y2, ux, uy):
    """Distance from planar point(s) to the ray {s*(ux,uy): s >= 0}."""
    p = y1 * ux + y2 * uy
    perp = np.abs(y1 * uy - y2 * ux)
    rad = np.hypot(y1, y2)
    return np.where(p >= 0.0, perp, rad)


def delta_face(surface: PolyhedralSurface, n: int, t: int, y, C2: float | None = None):
    """Truncated distance min{C2, dist(y, sector boundary)} for planar point(s) y.

    `y` is Cartesian in the unfolded sector; the sector boundary is the pair of
    bounding rays from the origin.
    """
    f = surface.cone_faces(n)[t]
    if C2 is None:
        C2 = surface.constants.get("C2", surface.min_edge / 8.0)
    y = np.asarray(y, dtype=float)
    y1, y2 = y[..., 0], y[..., 1]
    d0 = _dist_to_ray(y1, y2, 1.0, 0.0)
    d1 = _dist_to_ray(y1, y2, math.cos(f.gamma), math.sin(f.gamma))
    out = np.minimum(C2, np.minimum(d0, d1))
    return float(out) if out.ndim == 0 else out


# -- resolution of unity ----------------------------------------------------

def _smooth_step(t):
    """C-infinity step built from exp(-1/t): 0 at t<=0, 1 at t>=1, monotone."""
    t = np.asarray(t, dtype=float)
    a = np.zeros_like(t)
    b = np.zeros_like(t)
    pos = t > 1e-9
    neg = (1.0 - t) > 1e-9
    with np.errstate(under="ignore"):
        a[pos] = np.exp(-1.0 / t[pos])
        b[neg] = np.exp(-1.0 / (1.0 - t[neg]))
    return a / (a + b + (a + b == 0.0))


def _smooth_step_derivs(t):
    """Value, first and second derivative of the smooth step, away from {0,1} clamps."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 1e-7, 1.0 - 1e-7)
    with np.errstate(under="ignore"):
        a = np.exp(-1.0 / tc)
        b = np.exp(-1.0 / (1.0 - tc))
    ap = a / tc ** 2
    bp = -b / (1.0 - tc) ** 2
    app = a * (1.0 / tc ** 4 - 2.0 / tc ** 3)
    bpp = b * (1.0 / (1.0 - tc) ** 4 - 2.0 / (1.0 - tc) ** 3)
    s = a + b
    v = a / s
    num = ap * b - a * bp
    v1 = num / s ** 2
    v2 = (app * b - a * bpp) / s ** 2 - 2.0 * num * (ap + bp) / s ** 3
    inside = (t > 1e-7) & (t < 1.0 - 1e-7)
    v = np.where(t <= 1e-7, 0.0, np.where(t >= 1.0 - 1e-7, 1.0, v))
    v1 = np.where(inside, v1, 0.0)
    v2 = np.where(inside, v2, 0.0)
    return v, v1, v2


class ResolutionOfUnity:
    """Smooth partition of unity from radial vertex bumps, normalized to sum to one.

    Each vertex n carries a radial profile equal to 1 for r <= r0[n], 0 for
    r >= r1[n]; phi_n is the bump divided by the sum of all bumps. Construction
    validates the separation conditions: bumps vanish on non-incident patches
    with clearance C1, plateau balls meet no other bump, and the supports cover
    the surface.
    """

    def __init__(self, surface: PolyhedralSurface, C1=None, C2=None, r0=None, r1=None):
        self.surface = surface
        consts = surface.constants
        self.C1 = float(C1 if C1 is not None else consts.get("C1", surface.min_edge / 8.0))
        self.C2 = float(C2 if C2 is not None else consts.get("C2", self.C1))
        if self.C1 <= 0 or self.C2 <= 0:
            raise SurfaceError("C1 and C2 must be positive")
        nv = surface.n_vertices
        clear = self._clearances()
        if r1 is None:
            r1 = clear - 2.0 * self.C1
        self.r1 = np.broadcast_to(np.asarray(r1, dtype=float), (nv,)).copy()
        if r0 is None:
            r0 = np.minimum(self.C1, 0.5 * self.r1)
        self.r0 = np.broadcast_to(np.asarray(r0, dtype=float), (nv,)).copy()
        self._validate(clear)
        self.r0.flags.writeable = False
        self.r1.flags.writeable = False

    def _clearances(self):
        """Distance from each vertex to the nearest patch not containing it."""
        surf = self.surface
        out = np.full(surf.n_vertices, np.inf)
        for n in range(surf.n_vertices):
            inc = set(surf.incident_patches(n))
            p = surf.vertices[n]
            for patch in surf.patches:
                if patch.index in inc:
                    continue
                out[n] = min(out[n], point_quad_distance(p, patch.corners))
        return out

    def _validate(self, clear):
        surf = self.surface
        tol = 1e-12 * max(1.0, surf.min_edge)
        if np.any(self.r0 <= 0) or np.any(self.r1 <= self.r0):
            raise SurfaceError("resolution radii must satisfy 0 < r0 < r1")
        # (U1): supports keep clearance C1 from every non-incident patch
        bad = self.r1 + self.C1 > clear + tol
        if np.any(bad):
            n = int(np.argmax(bad))
            raise SurfaceError(
                f"resolution radius r1[{n}]={self.r1[n]:.6g} violates the clearance "
                f"condition against non-incident patches (clearance {clear[n]:.6g}, C1={self.C1:.6g})")
        # plateau balls must not meet any other bump support
        v = surf.vertices
        for n in range(surf.n_vertices):
            d = np.linalg.norm(v - v[n], axis=1)
            d[n] = np.inf
            if np.any(self.r0[n] + self.r1 > d + tol):
                m = int(np.argmin(d - self.r1))
                raise SurfaceError(
                    f"plateau of vertex {n} meets the bump of vertex {m}: "
                    f"r0+r1={self.r0[n] + self.r1[m]:.6g} > dist={d[m]:.6g}")
        # supports must cover the surface
        _, _, pts = quasi_random_points(surf, 2048)
        s = self._bump_sum(pts)
        if np.min(s) < 1e-6:
            raise SurfaceError("resolution radii leave part of the surface uncovered")

    # profile and bumps ------------------------------------------------------

    def profile(self, n, r):
        """Radial profile of the bump at vertex n (1 inside r0, 0 outside r1)."""
        r = np.asarray(r, dtype=float)
        t = (self.r1[n] - r) / (self.r1[n] - self.r0[n])
        return _smooth_step(t)

    def profile_derivs(self, n, r):
        """Profile value and first two radial derivatives at radii r."""
        w = self.r1[n] - self.r0[n]
        t = (self.r1[n] - np.asarray(r, dtype=float)) / w
        v, v1, v2 = _smooth_step_derivs(t)
        return v, -v1 / w, v2 / w ** 2

    def _bump_sum(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        s = np.zeros(len(pts))
        for m in range(self.surface.n_vertices):
            r = np.linalg.norm(pts - self.surface.vertices[m], axis=1)
            s += self.profile(m, r)
        return s

    def eval(self, n, pts):
        """phi_n at surface points `pts` ((3,) or (N,3))."""
        single = np.asarray(pts).ndim == 1
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.linalg.norm(pts - self.surface.vertices[n], axis=1)
        val = self.profile(n, r) / self._bump_sum(pts)
        return float(val[0]) if single else val

    def eval_all(self, pts):
        """All phi_n at the given points: array of shape (n_vertices, N)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        bumps = np.vstack([
            self.profile(m, np.linalg.norm(pts - self.surface.vertices[m], axis=1))
            for m in range(self.surface.n_vertices)])
        return bumps / np.sum(bumps, axis=0, keepdims=True)


def partition_eval(resolution: ResolutionOfUnity, n: int, x):
    """Value of the n-th partition function at surface point(s) x."""
    return resolution.eval(n, x)


# -- reference surfaces -----------------------------------------------------

def unit_cube() -> dict:
    """Description of the boundary of the unit cube (8 vertices, 6 patches)."""
    vertices = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]]
    patches = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4],
               [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]]
    return {"vertices": [[float(c) for c in v] for v in vertices], "patches": patches}


def fichera_corner() -> dict:
    """Description of the Fichera corner boundary ([-1,1]^3 minus [0,1]^3).

    The three big outer faces are quartered and the three L-shaped faces split
    into three unit squares, which adds flat (degenerate) vertices on edges and
    face centers; all 24 patches are unit squares.
    """
    squares = []  # (axis, level, u-range start, v-range start, outward sign)
    for axis in range(3):
        for a in (-1, 0):
            for b in (-1, 0):
                squares.append((axis, -1.0, a, b, -1.0))
        for a, b in ((-1, -1), (-1, 0), (0, -1)):
            squares.append((axis, 1.0, a, b, 1.0))
        squares.append((axis, 0.0, 0, 0, 1.0))
    vid: dict[tuple[float, float, float], int] = {}
    vertices: list[list[float]] = []
    patches = []
    for axis, level, a, b, sign in squares:
        u, v = (axis + 1) % 3, (axis + 2) % 3
        quad = []
        for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
            p = [0.0, 0.0, 0.0]
            p[axis], p[u], p[v] = level, float(a + du), float(b + dv)
            key = tuple(p)
            if key not in vid:
                vid[key] = len(vertices)
                vertices.append(list(key))
            quad.append(vid[key])
        c = np.array([vertices[i] for i in quad])
        n = np.cross(c[1] - c[0], c[3] - c[0])
        if n[axis] * sign < 0:
            quad = quad[::-1]
        patches.append(quad)
    return {"vertices": vertices, "patches": patches}


# -- sampling ----------------------------------------------------------------

def quasi_random_points(surface: PolyhedralSurface, count: int):
    """Deterministic low-discrepancy surface points, allocated to patches by area.

    Returns (patch_ids, params, points) with params in [0,1]^2.
    """
    areas = np.array([p.area for p in surface.patches])
    quota = areas / areas.sum() * count
    counts = np.floor(quota).astype(int)
    rem = count - counts.sum()
    if rem > 0:
        order = np.argsort(-(quota - counts))
        counts[order[:rem]] += 1
    halton = qmc.Halton(d=2, scramble=False)
    halton.fast_forward(1)  # skip the origin sample
    params = halton.random(int(counts.sum()))
    patch_ids = np.repeat(np.arange(surface.n_patches), counts)
    pts = np.vstack([
        surface.patches[pi].chart(params[i, 0], params[i, 1])
        for i, pi in enumerate(patch_ids)]) if len(patch_ids) else np.zeros((0, 3))
    return patch_ids, params, pts
