"""Weighted Bergman space machinery on the unit disk.

The measure is dA_alpha(z) = (1 + alpha) (1 - |z|^2)^alpha dA(z) with dA the
normalized area measure, so the disk has total mass one.  Everything here is
built around the orthonormal analytic basis e_k = z^k / ||z^k|| and a tensor
quadrature rule (Gauss-Jacobi in u = r^2, uniform trapezoid in angle).

Grid quantities are handled mode by mode: a function sampled on the rule is
Fourier transformed ring by ring, after which every inner product against
monomials reduces to a radial moment of one angular mode.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special

QUAD_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-13
GRAM_TOL = 1e-10


class DomainError(ValueError):
    """Raised when an argument lies outside the mathematical domain."""


def _check_alpha(alpha: float) -> None:
    if not alpha > -1.0:
        raise DomainError(f"alpha must exceed -1, got {alpha}")


@dataclass(frozen=True)
class SpaceParams:
    alpha: float = 0.0
    n_analytic: int = 16
    fourier_cap: int = 16
    radial_cap: int = 4

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.n_analytic < 1:
            raise DomainError("n_analytic must be at least 1")
        if self.fourier_cap < 0 or self.radial_cap < 0:
            raise DomainError("caps must be nonnegative")

    def require_hankel_caps(self) -> None:
        if self.fourier_cap < self.n_analytic - 1:
            raise DomainError(
                f"fourier_cap={self.fourier_cap} cannot represent f*e_j for "
                f"j < {self.n_analytic}"
            )


# ---------------------------------------------------------------------------
# closed forms


def log_monomial_mass(j, alpha: float):
    """log of int |z|^{2j} dA_alpha = log Gamma(j+1) Gamma(2+alpha) / Gamma(j+2+alpha)."""
    j = np.asarray(j, dtype=float)
    return special.gammaln(j + 1) + special.gammaln(2 + alpha) - special.gammaln(j + 2 + alpha)


def monomial_integral(j: int, k: int, alpha: float) -> complex:
    """Integral of z^j conj(z)^k against dA_alpha."""
    _check_alpha(alpha)
    if j < 0 or k < 0:
        raise DomainError("monomial powers must be nonnegative")
    if j != k:
        return 0.0 + 0.0j
    return complex(math.exp(float(log_monomial_mass(j, alpha))))


def inner_monomials(j: int, k: int, p: int, q: int, alpha: float) -> complex:
    """<z^j zbar^k, z^p zbar^q>_alpha."""
    return monomial_integral(j + q, k + p, alpha)


def analytic_basis_norm(k, alpha: float):
    """||z^k||_{2,alpha}; accepts scalars or arrays, evaluated in log space."""
    _check_alpha(alpha)
    out = np.exp(0.5 * log_monomial_mass(k, alpha))
    return float(out) if np.ndim(out) == 0 else out


def reproducing_kernel(z, w, alpha: float):
    """K_alpha(z, w) = (1 - z conj(w))^{-(2 + alpha)} on the principal branch."""
    _check_alpha(alpha)
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(np.abs(z) >= 1) or np.any(np.abs(w) >= 1):
        raise DomainError("reproducing kernel needs |z| < 1 and |w| < 1")
    out = (1.0 - z * np.conj(w)) ** (-(2.0 + alpha))
    return complex(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# polynomial elements of L^2(D, dA_alpha)


@dataclass
class MonomialCoeffs:
    """Finite combination sum c[p, q] z^p conj(z)^q."""

    entries: dict = field(default_factory=dict)

    @classmethod
    def monomial(cls, p: int, q: int, c: complex = 1.0) -> "MonomialCoeffs":
        return cls({(p, q): complex(c)})

    def __add__(self, other: "MonomialCoeffs") -> "MonomialCoeffs":
        out = dict(self.entries)
        for key, c in other.entries.items():
            out[key] = out.get(key, 0.0) + c
        return MonomialCoeffs(out)

    def scale(self, c: complex) -> "MonomialCoeffs":
        return MonomialCoeffs({k: c * v for k, v in self.entries.items()})

    def __sub__(self, other: "MonomialCoeffs") -> "MonomialCoeffs":
        return self + other.scale(-1.0)

    def times(self, other: "MonomialCoeffs") -> "MonomialCoeffs":
        out: dict = {}
        for (p, q), a in self.entries.items():
            for (s, t), b in other.entries.items():
                key = (p + s, q + t)
                out[key] = out.get(key, 0.0) + a * b
        return MonomialCoeffs(out)

    def conj(self) -> "MonomialCoeffs":
        return MonomialCoeffs({(q, p): np.conj(c) for (p, q), c in self.entries.items()})

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        zc = np.conj(z)
        out = np.zeros(z.shape, dtype=complex)
        for (p, q), c in self.entries.items():
            out += c * z**p * zc**q
        return out

    def is_analytic(self, tol: float = 0.0) -> bool:
        return all(q == 0 or abs(c) <= tol for (p, q), c in self.entries.items())

    def within_caps(self, params: SpaceParams) -> bool:
        return all(
            abs(p - q) <= params.fourier_cap and min(p, q) <= params.radial_cap
            for p, q in self.entries
        )


def inner(u: MonomialCoeffs, v: MonomialCoeffs, alpha: float) -> complex:
    total = 0.0 + 0.0j
    for (j, k), a in u.entries.items():
        for (p, q), b in v.entries.items():
            if j - k == p - q:
                total += a * np.conj(b) * inner_monomials(j, k, p, q, alpha)
    return total


def project(coeffs: MonomialCoeffs, params: SpaceParams) -> MonomialCoeffs:
    """Bergman projection P_alpha of a polynomial in z, zbar (closed form)."""
    out: dict = {}
    for (p, q), c in coeffs.entries.items():
        if p < q:
            continue
        m = p - q
        ratio = math.exp(float(log_monomial_mass(p, params.alpha) - log_monomial_mass(m, params.alpha)))
        out[(m, 0)] = out.get((m, 0), 0.0) + c * ratio
    return MonomialCoeffs(out)


# ---------------------------------------------------------------------------
# quadrature


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiskQuadrature:
    alpha: float
    radial_nodes: tuple
    radial_weights: tuple
    angular_count: int
    exactness_degree: int

    @cached_property
    def r(self) -> np.ndarray:
        return np.asarray(self.radial_nodes, dtype=float)

    @cached_property
    def w(self) -> np.ndarray:
        return np.asarray(self.radial_weights, dtype=float)

    @cached_property
    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.angular_count) / self.angular_count

    @cached_property
    def points(self) -> np.ndarray:
        """Nodes as an (R, M) complex array, ring by ring."""
        return self.r[:, None] * np.exp(1j * self.theta)[None, :]

    @cached_property
    def node_weights(self) -> np.ndarray:
        return np.repeat(self.w[:, None] / self.angular_count, self.angular_count, axis=1)

    @cached_property
    def key(self) -> str:
        return f"disk-a{self.alpha!r}-R{len(self.radial_nodes)}-M{self.angular_count}"

    @property
    def shape(self) -> tuple:
        return (len(self.radial_nodes), self.angular_count)

    @property
    def max_cap(self) -> int:
        """Number of analytic basis functions e_0.. that are exactly orthonormal under the rule."""
        return min(2 * len(self.radial_nodes), self.angular_count)

    def integrate(self, values) -> complex:
        values = np.asarray(values)
        # index-ordered accumulation: ring sums first, then radial weights
        return complex(self.w @ values.mean(axis=1))

    def norm(self, values) -> float:
        return math.sqrt(max(self.integrate(np.abs(values) ** 2).real, 0.0))

    def angular_modes(self, values) -> np.ndarray:
        """hat[a, m] = (1/M) sum_b values[a, b] exp(-i m theta_b)."""
        return np.fft.fft(np.asarray(values, dtype=complex), axis=1) / self.angular_count

    def radial_moments(self, hat: np.ndarray, smax: int) -> np.ndarray:
        """S[s, m] = sum_a w_a r_a^s hat[a, m] for s = 0..smax."""
        s = np.arange(smax + 1)
        with np.errstate(under="ignore"):
            powers = self.r[None, :] ** s[:, None]
        return (powers * self.w[None, :]) @ hat

    def basis_norms(self, n: int) -> np.ndarray:
        return analytic_basis_norm(np.arange(n), self.alpha)

    def pair_matrix(self, hat: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
        """out[r, c] = <h e_c, e_r> where hat holds the angular modes of h."""
        S = self.radial_moments(hat, n_rows + n_cols - 2)
        rows = np.arange(n_rows)[:, None]
        cols = np.arange(n_cols)[None, :]
        vals = S[rows + cols, (rows - cols) % self.angular_count]
        nr = self.basis_norms(n_rows)
        nc = self.basis_norms(n_cols)
        return vals / (nr[:, None] * nc[None, :])

    def analytic_coefficients(self, values, n: int) -> np.ndarray:
        """<g, e_k> for k < n."""
        self.require_cap(n)
        hat = self.angular_modes(values)
        S = self.radial_moments(hat, n - 1)
        k = np.arange(n)
        return S[k, k % self.angular_count] / self.basis_norms(n)

    def synthesize(self, coeffs) -> np.ndarray:
        """Node values of sum_k coeffs[k] e_k."""
        coeffs = np.asarray(coeffs, dtype=complex)
        n = coeffs.size
        self.require_cap(n)
        k = np.arange(n)
        with np.errstate(under="ignore"):
            radial = self.r[:, None] ** k[None, :] / self.basis_norms(n)[None, :]
        hat = np.zeros(self.shape, dtype=complex)
        hat[:, k] = radial * coeffs[None, :]
        return np.fft.ifft(hat, axis=1) * self.angular_count

    def analytic_residual(self, values, n: int | None = None) -> np.ndarray:
        """(I - P) applied to node values, P onto e_0..e_{n-1} (default: all exact ones)."""
        n = self.max_cap if n is None else n
        return np.asarray(values) - self.synthesize(self.analytic_coefficients(values, n))

    def basis_values(self, n: int) -> np.ndarray:
        """e_k at the nodes, shape (n, R, M)."""
        k = np.arange(n)
        with np.errstate(under="ignore"):
            radial = self.r[None, :] ** k[:, None] / self.basis_norms(n)[:, None]
        return radial[:, :, None] * np.exp(1j * k[:, None, None] * self.theta[None, None, :])

    def require_cap(self, n: int) -> None:
        if n > self.max_cap:
            raise QuadratureError(f"rule supports {self.max_cap} analytic basis functions, {n} requested")

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha": self.alpha,
                "radial_nodes": list(self.radial_nodes),
                "radial_weights": list(self.radial_weights),
                "angular_count": self.angular_count,
                "exactness_degree": self.exactness_degree,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DiskQuadrature":
        d = json.loads(text)
        return cls(
            alpha=float(d["alpha"]),
            radial_nodes=tuple(d["radial_nodes"]),
            radial_weights=tuple(d["radial_weights"]),
            angular_count=int(d["angular_count"]),
            exactness_degree=int(d["exactness_degree"]),
        )


def default_degree(params: SpaceParams) -> int:
    return 2 * (params.fourier_cap + 2 * params.radial_cap)


def quadrature_residual(quad: DiskQuadrature, degree: int | None = None) -> float:
    """Max |rule(z^j zbar^k) - closed form| over j + k <= degree."""
    degree = quad.exactness_degree if degree is None else degree
    d = np.arange(-degree, degree + 1)
    angular = np.exp(1j * np.outer(d, quad.theta)).mean(axis=1)
    s = np.arange(degree + 1)
    with np.errstate(under="ignore"):
        radial = (quad.r[None, :] ** s[:, None]) @ quad.w
    exact = np.exp(log_monomial_mass(s / 2.0, quad.alpha))
    worst = 0.0
    for j in range(degree + 1):
        k = np.arange(0, degree - j + 1)
        rule = radial[j + k] * angular[j - k + degree]
        ref = np.where(j == k, exact[j + k], 0.0)
        worst = max(worst, float(np.max(np.abs(rule - ref))))
    return worst


def build_quadrature(params: SpaceParams, target_degree: int | None = None, oversample: float = 1.0) -> DiskQuadrature:
    """Tensor rule for dA_alpha exact for z^j zbar^k with j + k <= target_degree.

    ``oversample`` scales both node counts up for non-polynomial integrands;
    exactness only ever grows with it.
    """
    degree = default_degree(params) if target_degree is None else int(target_degree)
    if degree < 0:
        raise DomainError("target_degree must be nonnegative")
    alpha = params.alpha
    n_rad = (degree // 2 + 2) // 2
    n_rad = max(1, int(math.ceil(n_rad * oversample)))
    n_ang = degree + 1
    n_ang = max(2, int(math.ceil(n_ang * oversample)))
    n_ang += n_ang % 2
    x, wj = special.roots_jacobi(n_rad, alpha, 0.0)
    u = (1.0 + x) / 2.0
    weights = (1.0 + alpha) * 2.0 ** (-alpha - 1.0) * wj
    # nodes ascending in r
    order = np.argsort(u)
    quad = DiskQuadrature(
        alpha=float(alpha),
        radial_nodes=tuple(np.sqrt(u[order]).tolist()),
        radial_weights=tuple(weights[order].tolist()),
        angular_count=int(n_ang),
        exactness_degree=degree,
    )
    if abs(sum(quad.radial_weights) - 1.0) > WEIGHT_SUM_TOL:
        raise QuadratureError("radial weights do not sum to one")
    residual = quadrature_residual(quad)
    if residual > QUAD_TOL:
        raise QuadratureError(f"quadrature exactness residual {residual:.3e} exceeds {QUAD_TOL}")
    return quad


def quadrature_for_cap(alpha: float, cap: int, oversample: float = 1.0) -> DiskQuadrature:
    """Smallest rule under which e_0 .. e_{cap-1} are exactly orthonormal."""
    params = SpaceParams(alpha=alpha, n_analytic=max(cap, 1), fourier_cap=max(cap, 1), radial_cap=0)
    return build_quadrature(params, target_degree=2 * (cap - 1) if cap > 1 else 2, oversample=oversample)


def gram_residual(quad: DiskQuadrature, n: int) -> float:
    """max |<e_j, e_k>_rule - delta_jk| for j, k < n."""
    E = quad.basis_values(n).reshape(n, -1)
    wts = quad.node_weights.reshape(-1)
    G = (E * wts) @ E.conj().T
    return float(np.max(np.abs(G - np.eye(n))))
