"""Grids, weakly singular kernel matrices and the 3D radial reduction.

Representation
--------------
Every operator is discretised on a *line* variable with measure dx:

* d = 1: functions f(x) on (-R, R) as they are;
* d = 3, radial sector: f(|x|) is represented by f_hat(r) = sqrt(4 pi) r f(r)
  on (0, R).  This map is unitary from radial L^2(R^3) onto L^2(0, R), and a
  convolution with G_{s,lam} becomes the half-line kernel

      K_hat(r, r') = G1(|r - r'|) - G1(r + r'),

  where G1 is the *one-dimensional* Green function with the same s (from
  G_3(r) = -G1'(r) / (2 pi r) and the substitution rho = |x - y|).  The
  angle-integrated kernel is therefore K_hat(r, r') / (r r').

A vector for a function f is ``sqrt(line_weights) * rep(f)``; with this
convention symmetric kernels give symmetric matrices and Frobenius norms are
Hilbert-Schmidt norms.

Weakly singular diagonals are handled by singularity subtraction: the
non-smooth power terms c |x - y|^a of the kernel are integrated exactly over
a window of neighbouring cells and the node rule over the same window is
subtracted.  A window (rather than the whole domain) avoids cancelling two
numbers of size R^{a+1} when the cells near a node are tiny.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .green_kernel import green_table, riesz_1d, _g1_at_zero, _g1_positive_quad


@dataclass(frozen=True)
class Grid:
    """Cell-centred graded grid.

    ``weights`` are the quadrature weights of the physical domain (cell
    volumes, so 4 pi r^2 is already folded in for d = 3).  ``edges`` are the
    cell boundaries.
    """

    dimension: int
    nodes: np.ndarray
    weights: np.ndarray
    cutoff: float
    edges: np.ndarray
    grading: float = 2.0
    kind: str = "power"
    inner: float = 1e-4

    @property
    def n(self):
        return len(self.nodes)

    @property
    def line_weights(self):
        """Weights of the line representation (dr for d = 3)."""
        if self.dimension == 1:
            return self.weights
        return self.weights / (4 * math.pi * self.nodes ** 2)

    def rep(self, f):
        """Line representation of nodal values f."""
        f = np.asarray(f, dtype=float)
        if self.dimension == 1:
            return f
        return math.sqrt(4 * math.pi) * self.nodes * f

    def unrep(self, fh):
        fh = np.asarray(fh)
        if self.dimension == 1:
            return fh
        return fh / (math.sqrt(4 * math.pi) * self.nodes)

    def to_vec(self, f):
        """Weighted vector of a function given by nodal values."""
        return np.sqrt(self.line_weights) * self.rep(f)

    def from_vec(self, vec):
        """Nodal values of the function represented by a weighted vector."""
        return self.unrep(np.asarray(vec) / np.sqrt(self.line_weights))

    def integrate(self, f):
        return float(np.dot(self.weights, f))

    def l2_norm(self, f):
        return math.sqrt(float(np.dot(self.weights, np.abs(f) ** 2)))

    def scaled(self, factor):
        """The same grid with every node (and the cutoff) multiplied by ``factor``."""
        return Grid(self.dimension, self.nodes * factor,
                    self.weights * factor ** self.dimension,
                    self.cutoff * factor, self.edges * factor, self.grading,
                    self.kind, self.inner * factor)

    def refined(self, factor=2.0):
        """Same cutoff and grading with ``factor`` times as many cells."""
        n = int(round(self.n * factor))
        if self.kind == "geometric" and self.dimension == 1:
            n += n % 2
        return make_grid(self.dimension, self.cutoff, n,
                         self.grading, self.kind, self.inner)

    def key(self):
        """Hashable identity used for caching."""
        return (self.dimension, self.n, float(self.cutoff),
                float(self.nodes[0]), float(self.nodes[-1]),
                float(np.sum(self.nodes)))


def make_grid(dimension, R, n, grading=2.0, kind="power", inner=1e-4) -> Grid:
    """Graded cell-centred grid on (-R, R) (d = 1) or (0, R) (d = 3).

    ``kind="power"``: cell boundaries R (k/n)^grading (mirrored in 1D).
    ``kind="geometric"``: one cell [0, inner], then boundaries growing by a
    constant ratio up to R (mirrored in 1D; n counts all cells).  The geometric family is
    invariant, up to a shift, under x -> x / eps and is what the shrinking
    limit needs: V(x/eps) is resolved equally well for every eps.

    Nodes are cell midpoints and weights the exact cell measures, so the
    weights sum to the measure of the truncated domain up to roundoff.
    """
    if dimension not in (1, 3):
        raise ConfigError("dimension must be 1 or 3")
    if not R > 0:
        raise ConfigError("cutoff R must be positive")
    n = int(n)
    if n < 2:
        raise ConfigError("grid needs at least 2 points")
    if not grading >= 1:
        raise ConfigError("grading must be >= 1")
    if kind == "geometric":
        if not 0 < inner < R:
            raise ConfigError("geometric grid needs 0 < inner < R")
        if dimension == 1 and n % 2:
            raise ConfigError("1D geometric grids need an even number of cells")
        m = n if dimension == 3 else n // 2
        half = np.concatenate([[0.0], np.geomspace(inner, R, m)])
        if dimension == 3:
            edges = half
            nodes = 0.5 * (edges[1:] + edges[:-1])
            weights = 4 * math.pi / 3 * (edges[1:] ** 3 - edges[:-1] ** 3)
        else:
            edges = np.concatenate([-half[:0:-1], half])
            nodes = 0.5 * (edges[1:] + edges[:-1])
            weights = np.diff(edges)
        return Grid(dimension, nodes, weights, float(R), edges, float(grading),
                    "geometric", float(inner))
    if kind != "power":
        raise ConfigError(f"unknown grid kind {kind!r}")
    if dimension == 3:
        tau = np.arange(n + 1) / n
        edges = R * tau ** grading
        nodes = 0.5 * (edges[1:] + edges[:-1])
        weights = 4 * math.pi / 3 * (edges[1:] ** 3 - edges[:-1] ** 3)
    else:
        tau = -1.0 + 2.0 * np.arange(n + 1) / n
        edges = R * np.sign(tau) * np.abs(tau) ** grading
        edges[0], edges[-1] = -R, R
        nodes = 0.5 * (edges[1:] + edges[:-1])
        weights = np.diff(edges)
    return Grid(dimension, nodes, weights, float(R), edges, float(grading))


# ---------------------------------------------------------------------------

@dataclass
class KernelMatrix:
    """Dense discretised integral operator with quadrature weights folded in."""

    entries: np.ndarray
    symmetric_similar: bool = True
    s: float = float("nan")
    lam: float = float("nan")
    d: int = 0

    @property
    def n(self):
        return self.entries.shape[0]

    _HEADER = struct.Struct("<qddq")

    def to_bytes(self) -> bytes:
        """Row-major float64 layout preceded by the header (n, s, lam, d)."""
        e = np.ascontiguousarray(self.entries, dtype="<f8")
        return self._HEADER.pack(self.n, self.s, self.lam, self.d) + e.tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "KernelMatrix":
        n, s, lam, d = cls._HEADER.unpack_from(buf)
        e = np.frombuffer(buf, dtype="<f8", offset=cls._HEADER.size, count=n * n)
        return cls(e.reshape(n, n).copy(), True, s, lam, d)


def hs_norm(M) -> float:
    """Frobenius norm, i.e. the Hilbert-Schmidt norm of the discretised operator."""
    a = M.entries if isinstance(M, KernelMatrix) else np.asarray(M)
    return float(np.linalg.norm(a))


def _power_domain_integral(x, a, lo, hi):
    """int_lo^hi |x - y|^a dy for lo <= x <= hi, a > -1."""
    return ((x - lo) ** (a + 1) + (hi - x) ** (a + 1)) / (a + 1)


# Half width (in cells) of the singularity-subtraction window.  The
# correction freezes the smooth factor at the node, which costs
# O(h f') on asymmetric (graded) windows; small windows keep that local.
SUBTRACTION_WINDOW = 2


def _local_power_correction(x, edges, lw, a, m=SUBTRACTION_WINDOW):
    """int_W |x_i - y|^a dy - sum_{j in W, j != i} |x_i - x_j|^a lw_j per node.

    W is the union of cells i-m..i+m (clipped to the grid).
    """
    n = len(x)
    idx = np.arange(n)
    lo = edges[np.maximum(idx - m, 0)]
    hi = edges[np.minimum(idx + m + 1, n)]
    out = _power_domain_integral(x, a, lo, hi)
    for k in range(1, m + 1):
        for sgn in (-1, 1):
            j = idx + sgn * k
            ok = (j >= 0) & (j < n)
            jj = j[ok]
            out[ok] -= np.abs(x[ok] - x[jj]) ** a * lw[jj]
    return out


def _check_kernel_domain(s, lam, d):
    if d == 3 and not (1.0 < s < 2.5):
        raise ConfigError(f"3D radial kernel needs s in (1, 5/2), got {s}")
    if d == 1 and (not (0.5 < s < 2.5) or abs(s - 1.0) < 1e-12):
        raise ConfigError(f"1D kernel needs s in (1/2,1) or (1,5/2), got {s}")
    if lam < 0:
        raise ConfigError("lam must be >= 0")
    if d == 1 and s > 1 and lam == 0:
        raise ConfigError(
            "zero-energy 1D kernel with s > 1 is not square-integrable against "
            "V (G_{s,0} diverges); Rollnick-type condition fails")


def kernel_matrix(s, lam, grid: Grid) -> np.ndarray:
    """Symmetric weighted matrix of ((-Delta)^{s/2} + lam)^{-1} on ``grid``.

    Off-diagonal entries are point values of the kernel, the diagonal comes
    from singularity subtraction (see module docstring).
    """
    d = grid.dimension
    _check_kernel_domain(s, lam, d)
    tab = green_table(float(s))
    x = grid.nodes
    lw = grid.line_weights
    n = len(x)
    diff = np.abs(x[:, None] - x[None, :])
    off = ~np.eye(n, dtype=bool)
    K = np.zeros((n, n))
    K[off] = tab.kernel(lam, diff[off])
    # singularity subtraction on the diagonal
    diag = np.full(n, tab.remainder_at_zero(lam)) * lw
    for c, a in tab.cusp_terms_at(lam):
        diag += c * _local_power_correction(x, grid.edges, lw, a)
    Kd = diag / lw
    if d == 3:
        refl = tab.kernel(lam, x[:, None] + x[None, :])
        K = K - refl
        Kd = Kd - np.diag(refl)
    K[~off] = Kd
    sw = np.sqrt(lw)
    M = K * np.outer(sw, sw)
    return 0.5 * (M + M.T)


def assemble_bs_matrix(V, s, lam, grid: Grid) -> KernelMatrix:
    """Birman-Schwinger matrix of u ((-Delta)^{s/2}+lam)^{-1} v on ``grid``.

    ``V`` is a :class:`~fracpoint.birman_schwinger.Potential` tabulated on
    ``grid`` or an array of nodal values.
    """
    vals = np.asarray(getattr(V, "values", V), dtype=float)
    if vals.shape != (grid.n,):
        raise ConfigError("potential values do not match the grid")
    M0 = kernel_matrix(s, lam, grid)
    return bs_from_kernel(M0, vals, s=s, lam=lam, d=grid.dimension)


def bs_from_kernel(M0, vals, s=float("nan"), lam=float("nan"), d=0) -> KernelMatrix:
    """u M0 v for a precomputed kernel matrix; bitwise symmetric for V of one sign."""
    v = np.sqrt(np.abs(vals))
    sg = np.sign(vals)
    M = sg[:, None] * (M0 * np.outer(v, v))
    return KernelMatrix(M, True, float(s), float(lam), int(d))


def angular_average_green(s, lam, r, r_prime) -> float:
    """Angle-integrated 3D kernel g0(r, r') = int dOmega' G_{s,lam}(x - y).

    With G1 the 1D Green function of the same s this equals
    (G1(|r - r'|) - G1(r + r')) / (r r'); radial convolution then reads
    (G * f)(r) = int_0^inf g0(r, r') f(r') r'^2 dr'.  For lam = 0 it is the
    exact power law 2 pi Lambda_s ((r+r')^{s-1} - |r-r'|^{s-1}) / ((s-1) r r').
    """
    if not (r > 0 and r_prime > 0):
        raise ConfigError("angular_average_green needs r, r' > 0")
    if not (1.0 < s < 2.5):
        raise ConfigError("angular_average_green needs s in (1, 5/2)")
    a, b = abs(r - r_prime), r + r_prime
    if lam == 0:
        c = riesz_1d(s)
        return c * (a ** (s - 1) - b ** (s - 1)) / (r * r_prime)
    if s == 2.0:
        k = math.sqrt(lam)
        return (math.exp(-k * a) - math.exp(-k * b)) / (2 * k * r * r_prime)
    ga = _g1_at_zero(s, lam)[0] if a == 0 else _g1_positive_quad(s, lam, a)[0]
    gb = _g1_positive_quad(s, lam, b)[0]
    return (ga - gb) / (r * r_prime)
