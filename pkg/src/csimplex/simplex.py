"""Numerical carrying simplex as a radial graph over the probability simplex.

The surface is represented by one radius rho(u) per direction u on a regular
barycentric lattice of the standard 2-simplex.  A graph-transform sweep maps
all vertices forward by T and re-samples the image surface along each lattice
ray; because every ray meets the carrying simplex exactly once (radial
homeomorphism), the iteration converges toward the attracting invariant
surface from the plane through the axial fixed points.

Ray/image intersection note: a ray t*u hits the triangle with image points
y_0, y_1, y_2 exactly where u lies in the triangle of normalized directions
d_i = y_i / sum(y_i); writing c for the barycentric weights of u among the
d_i, the intersection parameter is t = 1 / sum_i(c_i / s_i) with
s_i = sum(y_i).  Re-sampling therefore reduces to 2-D point location plus a
harmonic interpolation of the s_i.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .existence import axial_caps
from .models import CompetitiveMap

__all__ = [
    "SimplexMesh",
    "TangentConeEstimate",
    "SimplexError",
    "NonConvergenceError",
    "ZeroVectorError",
    "TooFewNeighborsError",
    "EmptyNeighborhoodError",
    "barycentric_lattice",
    "lattice_triangulation",
    "compute_carrying_simplex",
    "radial_project",
    "unordered_check",
    "invariance_residual",
    "surface_distance",
    "estimate_tangent_cone",
    "estimate_theta",
]

DEFAULT_RESOLUTION = 64
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 5000


class SimplexError(RuntimeError):
    pass


class NonConvergenceError(SimplexError):
    """Graph transform residual stayed above tolerance; carries the last mesh."""

    def __init__(self, message: str, mesh: "SimplexMesh"):
        super().__init__(message)
        self.mesh = mesh


class ZeroVectorError(SimplexError):
    pass


class TooFewNeighborsError(SimplexError):
    pass


class EmptyNeighborhoodError(SimplexError):
    pass


# ---------------------------------------------------------------------------
# Lattice
# ---------------------------------------------------------------------------

def _row_offset(i: int, N: int) -> int:
    return i * (N + 1) - i * (i - 1) // 2


def _lattice_index(i: np.ndarray, j: np.ndarray, N: int) -> np.ndarray:
    return i * (N + 1) - (i * (i - 1)) // 2 + j


def barycentric_lattice(N: int) -> np.ndarray:
    """All directions (i, j, N-i-j)/N, ordered by i then j."""
    pts = []
    for i in range(N + 1):
        for j in range(N + 1 - i):
            pts.append((i, j, N - i - j))
    return np.asarray(pts, dtype=float) / N


def lattice_triangulation(N: int) -> np.ndarray:
    """Faces of the regular lattice: N^2 triangles, counterclockwise in (i, j)."""
    faces = []
    for i in range(N):
        for j in range(N - i):
            v00 = _row_offset(i, N) + j
            v10 = _row_offset(i + 1, N) + j
            v01 = v00 + 1
            faces.append((v00, v10, v01))
            if j < N - i - 1:
                v11 = v10 + 1
                faces.append((v10, v11, v01))
    return np.asarray(faces, dtype=np.intp)


@dataclass
class SimplexMesh:
    """Radial graph r(u) over the barycentric lattice with its triangulation.

    ``residual`` is the size of the final graph-transform update,
    max over directions of |delta rho| * ||u||.
    """

    resolution: int
    directions: np.ndarray
    radii: np.ndarray
    triangulation: np.ndarray
    residual: float
    converged: bool = True
    sweeps: int = 0
    flagged: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    residual_history: list = field(default_factory=list)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def vertices(self) -> np.ndarray:
        return self.radii[:, None] * self.directions

    def max_edge_length(self) -> float:
        V = self.vertices
        tri = V[self.triangulation]
        e = np.concatenate(
            [tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 1], tri[:, 0] - tri[:, 2]]
        )
        return float(np.sqrt((e * e).sum(axis=1).max()))

    def _vertex_tree(self) -> cKDTree:
        if "vtree" not in self._cache:
            self._cache["vtree"] = cKDTree(self.vertices)
        return self._cache["vtree"]

    def _incident_faces(self) -> np.ndarray:
        """(M, 6) incident face indices per vertex, padded by repetition."""
        if "incidence" not in self._cache:
            M = self.directions.shape[0]
            lists: list[list[int]] = [[] for _ in range(M)]
            for f, tri in enumerate(self.triangulation):
                for v in tri:
                    lists[v].append(f)
            out = np.zeros((M, 6), dtype=np.intp)
            for v, fs in enumerate(lists):
                row = (fs * 6)[:6] if fs else [0] * 6
                out[v] = row[:6]
            self._cache["incidence"] = out
        return self._cache["incidence"]

    def to_json(self) -> dict:
        return {
            "resolution": int(self.resolution),
            "directions": self.directions.tolist(),
            "radii": self.radii.tolist(),
            "residual": float(self.residual),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SimplexMesh":
        N = int(doc["resolution"])
        directions = np.asarray(doc["directions"], dtype=float)
        lattice = barycentric_lattice(N)
        if directions.shape != lattice.shape or not np.allclose(directions, lattice, atol=1e-12):
            raise SimplexError("directions do not match the regular lattice for this resolution")
        radii = np.asarray(doc["radii"], dtype=float)
        if radii.shape[0] != directions.shape[0]:
            raise SimplexError("radii length does not match directions")
        return cls(
            resolution=N,
            directions=lattice,
            radii=radii,
            triangulation=lattice_triangulation(N),
            residual=float(doc["residual"]),
        )


@dataclass(frozen=True)
class TangentConeEstimate:
    base_point: np.ndarray
    radius: float
    secants: np.ndarray  # unit secant directions, one per sampled neighbor
    angle_to_w: float


# ---------------------------------------------------------------------------
# Regular-lattice point location (closed form)
# ---------------------------------------------------------------------------

def _locate_regular(u: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Containing face and barycentric weights for directions u on the regular
    lattice.  Returns (verts (m, 3) int, weights (m, 3))."""
    u = np.atleast_2d(u)
    a1 = u[:, 0] * N
    a2 = u[:, 1] * N
    i = np.clip(np.floor(a1).astype(np.intp), 0, N - 1)
    j = np.clip(np.floor(a2).astype(np.intp), 0, np.maximum(N - 1 - i, 0))
    fi = a1 - i
    fj = a2 - j
    # cells on the hypotenuse row have no down triangle; spill there is noise
    up = (fi + fj <= 1.0 + 1e-12) | (i + j == N - 1)
    verts = np.empty((u.shape[0], 3), dtype=np.intp)
    wts = np.empty((u.shape[0], 3))
    v00 = _lattice_index(i, j, N)
    v10 = _lattice_index(i + 1, j, N)
    v01 = v00 + 1
    # up triangle: (i, j), (i+1, j), (i, j+1)
    verts[up] = np.stack([v00[up], v10[up], v01[up]], axis=1)
    wts[up] = np.stack([1.0 - fi[up] - fj[up], fi[up], fj[up]], axis=1)
    dn = ~up
    if np.any(dn):
        v11 = v10 + 1
        verts[dn] = np.stack([v10[dn], v11[dn], v01[dn]], axis=1)
        wts[dn] = np.stack([1.0 - fj[dn], fi[dn] + fj[dn] - 1.0, 1.0 - fi[dn]], axis=1)
    wts = np.clip(wts, 0.0, None)
    wts /= wts.sum(axis=1, keepdims=True)
    return verts, wts


def radial_project(mesh: SimplexMesh, x: np.ndarray) -> np.ndarray:
    """Point where the ray through x meets the mesh surface.

    The direction u = x / sum(x) is located on the lattice and rho is
    interpolated barycentrically on the containing face.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    sums = X.sum(axis=1)
    if np.any(sums <= 0) or np.any(X < -1e-15):
        raise ZeroVectorError("radial projection needs a nonzero nonnegative point")
    U = X / sums[:, None]
    verts, wts = _locate_regular(U, mesh.resolution)
    rho = (mesh.radii[verts] * wts).sum(axis=1)
    out = rho[:, None] * U
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Graph transform
# ---------------------------------------------------------------------------

def _barycentric_2d(q: np.ndarray, t0: np.ndarray, t1: np.ndarray, t2: np.ndarray):
    """Barycentric coordinates of 2-D points q in triangles (t0, t1, t2);
    all arguments broadcast together on the leading axes."""
    d = (t1[..., 0] - t0[..., 0]) * (t2[..., 1] - t0[..., 1]) - (
        t2[..., 0] - t0[..., 0]
    ) * (t1[..., 1] - t0[..., 1])
    d = np.where(d == 0.0, 1e-300, d)
    c1 = (
        (q[..., 0] - t0[..., 0]) * (t2[..., 1] - t0[..., 1])
        - (t2[..., 0] - t0[..., 0]) * (q[..., 1] - t0[..., 1])
    ) / d
    c2 = (
        (t1[..., 0] - t0[..., 0]) * (q[..., 1] - t0[..., 1])
        - (q[..., 0] - t0[..., 0]) * (t1[..., 1] - t0[..., 1])
    ) / d
    return np.stack([1.0 - c1 - c2, c1, c2], axis=-1)


class _Transform:
    """One prepared graph-transform pass: lattice bookkeeping reused across sweeps."""

    def __init__(self, m: CompetitiveMap, N: int):
        if m.n != 3:
            raise SimplexError("simplex meshing is implemented for n = 3")
        self.m = m
        self.N = N
        self.U = barycentric_lattice(N)
        self.faces = lattice_triangulation(N)
        self.unorm = np.linalg.norm(self.U, axis=1)
        self.w = axial_caps(m)
        corner_mask = np.max(self.U, axis=1) == 1.0
        self.corner_idx = np.nonzero(corner_mask)[0]
        self.edges = []
        for axis in range(3):
            on = (self.U[:, axis] == 0.0) & ~corner_mask
            full = np.nonzero(self.U[:, axis] == 0.0)[0]
            self.edges.append((axis, full, np.nonzero(on)[0]))
        self.interior_idx = np.nonzero(np.min(self.U, axis=1) > 0.0)[0]
        self.neighbors = self._build_neighbors()

    def _build_neighbors(self) -> list[np.ndarray]:
        M = self.U.shape[0]
        nbrs: list[set] = [set() for _ in range(M)]
        for tri in self.faces:
            a, b, c = tri
            nbrs[a].update((b, c))
            nbrs[b].update((a, c))
            nbrs[c].update((a, b))
        return [np.fromiter(s, dtype=np.intp) for s in nbrs]

    def sweep(self, radii: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map the surface forward and re-sample it radially.

        Returns (new radii, indices whose ray missed the image surface and
        were extrapolated from lattice neighbors).
        """
        V = radii[:, None] * self.U
        Y = self.m(V)
        s = Y.sum(axis=1)
        new = np.full_like(radii, np.nan)

        # corners: the axis dynamics is 1-D, the image stays on the axis
        new[self.corner_idx] = s[self.corner_idx]

        # boundary edges: 1-D re-sampling in the surviving coordinate pair
        for axis, full_idx, query_idx in self.edges:
            if query_idx.size == 0:
                continue
            param_axis = 0 if axis != 0 else 1
            alpha_img = Y[full_idx, param_axis] / s[full_idx]
            order = np.argsort(alpha_img)
            xs = alpha_img[order]
            gs = (1.0 / s[full_idx])[order]
            alpha_q = self.U[query_idx, param_axis]
            g = np.interp(alpha_q, xs, gs)
            new[query_idx] = 1.0 / g

        # interior: 2-D point location among image-direction triangles
        D2 = (Y / s[:, None])[:, :2]
        tri0 = D2[self.faces[:, 0]]
        tri1 = D2[self.faces[:, 1]]
        tri2 = D2[self.faces[:, 2]]
        centroids = (tri0 + tri1 + tri2) / 3.0
        tree = cKDTree(centroids)
        queries = self.U[self.interior_idx, :2]
        kq = min(32, self.faces.shape[0])
        _, cand = tree.query(queries, k=kq)
        cand = np.atleast_2d(cand)
        bary = _barycentric_2d(
            queries[:, None, :], tri0[cand], tri1[cand], tri2[cand]
        )
        min_bary = bary.min(axis=2)
        best = np.argmax(min_bary, axis=1)
        rows = np.arange(queries.shape[0])
        ok = min_bary[rows, best] >= -1e-9
        # rare fallback: exhaustive scan for queries the candidate set missed
        missed_rows = np.nonzero(~ok)[0]
        face_pick = cand[rows, best]
        best_bary = bary[rows, best]
        for r in missed_rows:
            all_bary = _barycentric_2d(queries[r], tri0, tri1, tri2)
            f = int(np.argmax(all_bary.min(axis=1)))
            if all_bary[f].min() >= -1e-6:
                face_pick[r] = f
                best_bary[r] = all_bary[f]
                ok[r] = True
        c = np.clip(best_bary, 0.0, None)
        c /= c.sum(axis=1, keepdims=True)
        s_face = s[self.faces[face_pick]]
        t = 1.0 / (c / s_face).sum(axis=1)
        found = self.interior_idx[ok]
        new[found] = t[ok]

        flagged = self.interior_idx[~ok]
        pending = list(flagged)
        for _ in range(3):
            if not pending:
                break
            still = []
            for v in pending:
                vals = new[self.neighbors[v]]
                vals = vals[~np.isnan(vals)]
                if vals.size:
                    u = self.U[v]
                    t_max = float(np.min(self.w[u > 0] / u[u > 0]))
                    new[v] = min(float(vals.mean()), t_max)
                else:
                    still.append(v)
            if len(still) == len(pending):
                break
            pending = still
        for v in pending:  # isolated misses keep their previous radius
            new[v] = radii[v]
        return new, flagged


def compute_carrying_simplex(
    m: CompetitiveMap,
    resolution: int = DEFAULT_RESOLUTION,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> SimplexMesh:
    """Iterate the graph transform from the plane through the axial fixed
    points until the maximal radial displacement drops below tol.

    Raises NonConvergenceError (mesh attached) when max_iters sweeps do not
    reach tolerance.  Directions whose re-sampling ray missed the image
    surface are extrapolated from neighbors and reported in ``flagged``.
    """
    transform = _Transform(m, resolution)
    w = axial_caps(m)
    radii = 1.0 / (transform.U / w[None, :]).sum(axis=1)
    history: list[float] = []
    flagged = np.empty(0, dtype=np.intp)
    residual = float("inf")
    sweeps = 0
    for sweeps in range(1, max_iters + 1):
        new, flagged = transform.sweep(radii)
        residual = float(np.max(np.abs(new - radii) * transform.unorm))
        radii = new
        history.append(residual)
        if residual < tol:
            break
    mesh = SimplexMesh(
        resolution=resolution,
        directions=transform.U,
        radii=radii,
        triangulation=transform.faces,
        residual=residual,
        converged=residual < tol,
        sweeps=sweeps,
        flagged=flagged,
        residual_history=history,
    )
    if not mesh.converged:
        raise NonConvergenceError(
            f"residual {residual:.3e} above tol {tol:g} after {sweeps} sweeps", mesh
        )
    return mesh


# ---------------------------------------------------------------------------
# Mesh diagnostics
# ---------------------------------------------------------------------------

def unordered_check(mesh: SimplexMesh, tol: float) -> list[tuple[int, int]]:
    """Vertex pairs violating unorderedness: x <= y + tol in every coordinate
    and x_j < y_j - tol in some coordinate.  Empty list = pass."""
    V = mesh.vertices
    M = V.shape[0]
    out: list[tuple[int, int]] = []
    block = 256
    for start in range(0, M, block):
        va = V[start : start + block][:, None, :]
        below = np.all(va <= V[None, :, :] + tol, axis=2)
        strict = np.any(va < V[None, :, :] - tol, axis=2)
        rows, cols = np.nonzero(below & strict)
        out.extend((int(r + start), int(c)) for r, c in zip(rows, cols))
    return out


def _closest_point_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray):
    """Closest points to p on triangles (a, b, c); everything broadcasts on
    the leading axes.  Standard region decomposition."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = (ab * ap).sum(-1)
    d2 = (ac * ap).sum(-1)
    bp = p - b
    d3 = (ab * bp).sum(-1)
    d4 = (ac * bp).sum(-1)
    cp = p - c
    d5 = (ab * cp).sum(-1)
    d6 = (ac * cp).sum(-1)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    denom_ab = np.where(d1 - d3 != 0.0, d1 - d3, 1.0)
    v_ab = d1 / denom_ab
    denom_ac = np.where(d2 - d6 != 0.0, d2 - d6, 1.0)
    w_ac = d2 / denom_ac
    d43 = d4 - d3
    d56 = d5 - d6
    denom_bc = np.where(d43 + d56 != 0.0, d43 + d56, 1.0)
    w_bc = d43 / denom_bc

    denom = va + vb + vc
    denom = np.where(denom != 0.0, denom, 1.0)
    v_in = vb / denom
    w_in = vc / denom

    shape = np.broadcast_shapes(p.shape, a.shape)
    out = np.empty(shape)
    region_a = (d1 <= 0) & (d2 <= 0)
    region_b = (d3 >= 0) & (d4 <= d3)
    region_c = (d6 >= 0) & (d5 <= d6)
    region_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    region_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    region_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)

    closest = a + np.clip(v_in, 0, 1)[..., None] * ab + np.clip(w_in, 0, 1)[..., None] * ac
    sel_bc = b + np.clip(w_bc, 0, 1)[..., None] * (c - b)
    sel_ac = a + np.clip(w_ac, 0, 1)[..., None] * ac
    sel_ab = a + np.clip(v_ab, 0, 1)[..., None] * ab
    out[...] = closest
    out[region_bc] = sel_bc[region_bc]
    out[region_ac] = sel_ac[region_ac]
    out[region_ab] = sel_ab[region_ab]
    out[region_c] = np.broadcast_to(c, shape)[region_c]
    out[region_b] = np.broadcast_to(b, shape)[region_b]
    out[region_a] = np.broadcast_to(a, shape)[region_a]
    return out


def surface_distance(mesh: SimplexMesh, pts: np.ndarray, k_vertices: int = 8) -> np.ndarray:
    """Euclidean distance from each point to the triangulated surface,
    searching the faces incident to the k nearest vertices."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    V = mesh.vertices
    tree = mesh._vertex_tree()
    k = min(k_vertices, V.shape[0])
    _, nearest = tree.query(pts, k=k)
    nearest = np.atleast_2d(nearest)
    incidence = mesh._incident_faces()
    cand = incidence[nearest].reshape(pts.shape[0], -1)  # (Q, k*6)
    tris = mesh.triangulation[cand]  # (Q, k*6, 3)
    a = V[tris[..., 0]]
    b = V[tris[..., 1]]
    c = V[tris[..., 2]]
    closest = _closest_point_on_triangles(pts[:, None, :], a, b, c)
    d = np.linalg.norm(closest - pts[:, None, :], axis=2)
    return d.min(axis=1)


def invariance_residual(m: CompetitiveMap, mesh: SimplexMesh) -> float:
    """max over vertices v of distance(T(v), surface); near zero certifies
    approximate invariance T(S) = S."""
    images = m(mesh.vertices)
    return float(surface_distance(mesh, images).max())


def estimate_tangent_cone(
    mesh: SimplexMesh,
    base_point: np.ndarray,
    radius: float,
    w_basis: np.ndarray,
    min_neighbors: int = 3,
) -> TangentConeEstimate:
    """Secant directions from base_point to mesh vertices within radius and
    the worst angle between them and the plane spanned by w_basis."""
    xi = np.asarray(base_point, dtype=float)
    idx = mesh._vertex_tree().query_ball_point(xi, r=radius)
    V = mesh.vertices[idx]
    diffs = V - xi
    norms = np.linalg.norm(diffs, axis=1)
    # secants to near-coincident vertices carry only surface noise
    keep = norms > 1e-3 * radius
    if keep.sum() < min_neighbors:
        raise TooFewNeighborsError(
            f"{int(keep.sum())} neighbors within radius {radius:g} (need {min_neighbors})"
        )
    z = diffs[keep] / norms[keep, None]
    Q, _ = np.linalg.qr(np.asarray(w_basis, dtype=float))
    resid = z - (z @ Q) @ Q.T
    sines = np.clip(np.linalg.norm(resid, axis=1), 0.0, 1.0)
    angles = np.arcsin(sines)
    return TangentConeEstimate(
        base_point=xi, radius=float(radius), secants=z, angle_to_w=float(angles.max())
    )


def estimate_theta(
    mesh: SimplexMesh,
    q: np.ndarray,
    v: np.ndarray,
    w_basis: np.ndarray,
    radius: float,
) -> float:
    """Empirical constant Theta: max over mesh vertices xi near q of
    ||xi - Pi(xi)|| / ||q - Pi(xi)||, where Pi projects along v onto the
    plane q + W (the first-order leaf projection)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    B = np.asarray(w_basis, dtype=float)
    idx = mesh._vertex_tree().query_ball_point(q, r=radius)
    if not idx:
        raise EmptyNeighborhoodError(f"no mesh vertices within radius {radius:g} of q")
    xi = mesh.vertices[idx]
    Mcols = np.column_stack([v, B])
    coeffs = np.linalg.solve(Mcols, (xi - q).T)  # rows: v-component, then W-components
    num = np.abs(coeffs[0]) * np.linalg.norm(v)
    den = np.linalg.norm(B @ coeffs[1:], axis=0)
    good = den > 1e-14 * max(1.0, float(np.linalg.norm(q)))
    if not np.any(good):
        raise EmptyNeighborhoodError("all sampled vertices project onto q itself")
    return float((num[good] / den[good]).max())
