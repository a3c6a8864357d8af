"""Compact approximant families, strong-operator convergence checks, and the
simplex search for distance-realizing convex combinations.

A family psi_1..psi_M is either a mollified truncation of f
(psi_n = delta_{eps_n} * f_{r_n}, with 1 - r_n > eps_n so psi_n vanishes near
the circle) or a harmonic dilation (psi_n(z) = f(r_n z)).  For simplex weights
a, the objective J(a) is the norm of the N-section of H_{f - sum a_n psi_n}
(or the Toeplitz analogue); it is convex in a because sections are linear in
the symbol.
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .operators import (
    berezin_hankel_defect,
    essential_norm_estimate,
    product_gram,
    projection_coefficients,
    toeplitz_section,
)
from .rng import random_test_polynomial
from .space import DiskQuadrature, DomainError, SpaceParams
from .symbols import (
    MollifierAccuracyWarning,
    MollifierSpec,
    Symbol,
    boundary_vanishing_check,
    combine,
    dilate,
    mollify,
    truncate,
)

log = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-12
KINDS = ("mollified-truncation", "harmonic-dilation")
OPERATOR_KINDS = ("H", "H*", "T", "T*")


class ScheduleError(DomainError):
    pass


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("BLAB_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# families


@dataclass
class ApproximantFamily:
    base: Symbol
    members: list
    schedule: list  # (r_n, eps_n or None)
    family_kind: str

    def __len__(self):
        return len(self.members)

    def head(self, m: int) -> "ApproximantFamily":
        return ApproximantFamily(self.base, self.members[:m], self.schedule[:m], self.family_kind)

    def warm(self, quad: DiskQuadrature) -> None:
        """Evaluate every member on the grid, in parallel when BLAB_THREADS > 1."""
        symbols = [self.base, *self.members]
        workers = worker_count()
        if workers == 1:
            for s in symbols:
                s.on_grid(quad)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda s: s.on_grid(quad), symbols))

    def combination(self, weights: "SimplexWeights") -> Symbol:
        return combine(self.members, weights.a, provenance=f"simplex[{self.family_kind}]/{self.base.provenance}")


def geometric_schedule(m: int, r0: float = 0.5, ratio: float = 0.5, eps_factor: float | None = 0.5) -> list:
    """r_n = 1 - (1 - r0) ratio^(n-1); eps_n = eps_factor (1 - r_n)."""
    out = []
    for n in range(m):
        r = 1.0 - (1.0 - r0) * ratio**n
        out.append((r, None if eps_factor is None else eps_factor * (1.0 - r)))
    return out


def validate_schedule(schedule, kind: str) -> None:
    radii = [r for r, _ in schedule]
    if any(not 0 < r < 1 for r in radii):
        raise ScheduleError("schedule radii must lie in (0, 1)")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ScheduleError("schedule radii must increase strictly")
    if kind == "mollified-truncation":
        for r, eps in schedule:
            if eps is None or not eps > 0:
                raise ScheduleError("mollified-truncation needs eps_n > 0")
            if not 1.0 - r > eps:
                raise ScheduleError(f"schedule violation: 1 - r = {1 - r:g} <= eps = {eps:g}")


def build_family(
    f: Symbol,
    m: int = 6,
    kind: str = "mollified-truncation",
    schedule=None,
    r0: float = 0.5,
    ratio: float = 0.5,
    eps_factor: float = 0.5,
    resolution: tuple = (12, 24),
) -> ApproximantFamily:
    if kind not in KINDS:
        raise ValueError(f"unknown family kind {kind!r}")
    if schedule is None:
        schedule = geometric_schedule(m, r0, ratio, eps_factor if kind == "mollified-truncation" else None)
    schedule = [(float(r), None if e is None else float(e)) for r, e in schedule]
    validate_schedule(schedule, kind)
    members = []
    if kind == "mollified-truncation":
        for r, eps in schedule:
            with warnings.catch_warnings():
                # jumps in f_r always trip the local self-estimate; it is kept in meta
                warnings.simplefilter("ignore", MollifierAccuracyWarning)
                members.append(mollify(truncate(f, r), MollifierSpec(eps), resolution))
    else:
        if not f.harmonic:
            raise DomainError("harmonic-dilation families need a harmonic base symbol")
        members = [dilate(f, r) for r, _ in schedule]
    return ApproximantFamily(f, members, schedule, kind)


@dataclass
class SimplexWeights:
    a: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        if self.a.ndim != 1 or self.a.size == 0:
            raise DomainError("simplex weights must be a nonempty vector")
        if np.any(self.a < 0) or abs(self.a.sum() - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"not a simplex point: min {self.a.min():g}, sum {self.a.sum():.15g}")

    @classmethod
    def vertex(cls, m: int, k: int) -> "SimplexWeights":
        a = np.zeros(m)
        a[k] = 1.0
        return cls(a)

    @classmethod
    def barycenter(cls, m: int) -> "SimplexWeights":
        return cls(np.full(m, 1.0 / m))

    @classmethod
    def clean(cls, a) -> "SimplexWeights":
        """Clip rounding negatives and renormalize."""
        a = np.clip(np.asarray(a, dtype=float), 0.0, None)
        return cls(a / a.sum())

    def tolist(self) -> list:
        return [float(x) for x in self.a]


def interpolate(w1: SimplexWeights, w2: SimplexWeights, s: float) -> SimplexWeights:
    if w1.a.shape != w2.a.shape:
        raise DomainError("weights must have equal length")
    if not 0 <= s <= 1:
        raise DomainError("interpolation parameter must lie in [0, 1]")
    return SimplexWeights.clean(s * w1.a + (1.0 - s) * w2.a)


# ---------------------------------------------------------------------------
# strong operator convergence


@dataclass
class SotReport:
    rows: list  # (n, vector_id, residual)
    operator_kind: str

    def series(self, vector_id: str) -> list:
        return [res for n, vid, res in self.rows if vid == vector_id]

    def vector_ids(self) -> list:
        return list(dict.fromkeys(vid for _, vid, _ in self.rows))

    def to_record(self) -> dict:
        return {
            "operator_kind": self.operator_kind,
            "rows": [{"n": n, "vector": vid, "residual": res} for n, vid, res in self.rows],
        }


def default_test_vectors(n: int, seed: int = 0) -> dict:
    """e_0, e_1, e_4 and a seeded unit polynomial of degree 8, as coefficient vectors."""
    size = max(n, 9)
    out = {}
    for k in (0, 1, 4):
        c = np.zeros(size, dtype=complex)
        c[k] = 1.0
        out[f"e{k}"] = c
    c = np.zeros(size, dtype=complex)
    c[:9] = random_test_polynomial(seed, 8)
    out[f"rand8(seed={seed})"] = c
    return out


def _complement_vector(quad: DiskQuadrature, g_vals: np.ndarray) -> np.ndarray:
    # fixed injective map into the complement: g -> (I - P)(zbar g), normalized
    h = quad.analytic_residual(np.conj(quad.points) * g_vals)
    return h / quad.norm(h)


def sot_report(
    f: Symbol,
    family: ApproximantFamily,
    operator_kind: str,
    params: SpaceParams,
    quad: DiskQuadrature,
    test_vectors: dict | None = None,
    seed: int = 0,
) -> SotReport:
    """Residuals ||(A_f - A_{psi_n}) g|| for A in {H, H*, T, T*}.

    H:  ||(I-P)((f - psi) g)||      T:  ||P((f - psi) g)||
    T*: ||P(conj(f - psi) g)||      H*: ||P(conj(f - psi) h)||, h = (I-P)(zbar g)/||.||
    """
    if operator_kind not in OPERATOR_KINDS:
        raise ValueError(f"operator kind must be one of {OPERATOR_KINDS}")
    if test_vectors is None:
        test_vectors = default_test_vectors(params.n_analytic, seed)
    family.warm(quad)
    base = f.on_grid(quad)
    vecs = {}
    for vid, coeffs in test_vectors.items():
        g = quad.synthesize(coeffs)
        vecs[vid] = _complement_vector(quad, g) if operator_kind == "H*" else g
    rows = []
    for n, member in enumerate(family.members, start=1):
        diff = base - member.on_grid(quad)
        if operator_kind in ("H*", "T*"):
            diff = np.conj(diff)
        for vid, g in vecs.items():
            u = diff * g
            if operator_kind == "H":
                res = quad.norm(quad.analytic_residual(u))
            else:
                res = float(np.linalg.norm(quad.analytic_coefficients(u, quad.max_cap)))
            rows.append((n, vid, res))
    return SotReport(rows, operator_kind)


# ---------------------------------------------------------------------------
# joint sections and the simplex objective


@dataclass
class SectionStack:
    """Sections of A_{h_0}, ..., A_{h_M} in one coordinate frame, h_0 = f.

    For Hankel kinds the frame is built from the joint Gram matrix of all
    (I-P)(h_p e_j), so every block is an explicit (rows x N) matrix and
    J(a) = ||Y_0 - sum a_n Y_n|| is exactly the section norm of
    H_{f - sum a_n psi_n}.
    """

    kind: str  # "hankel" | "toeplitz"
    blocks: list
    n_proj: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.blocks) - 1

    def matrix(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        out = self.blocks[0].copy()
        for w, Y in zip(a, self.blocks[1:]):
            if w:
                out -= w * Y
        return out

    def combination_matrix(self, a) -> np.ndarray:
        """Section of sum a_n A_{psi_n}."""
        a = np.asarray(a, dtype=float)
        return sum(w * Y for w, Y in zip(a, self.blocks[1:]))

    def top_pair(self, a):
        X = self.matrix(a)
        gram = X.conj().T @ X
        lam, vecs = np.linalg.eigh((gram + gram.conj().T) / 2)
        sigma = math.sqrt(max(float(lam[-1]), 0.0))
        v = vecs[:, -1]
        u = X @ v / sigma if sigma > 0 else np.zeros(X.shape[0], dtype=complex)
        return sigma, u, v

    def objective(self, a) -> float:
        return self.top_pair(a)[0]

    def subgradient(self, a):
        sigma, u, v = self.top_pair(a)
        g = np.array([-float(np.real(np.vdot(u, Y @ v))) for Y in self.blocks[1:]])
        return sigma, g

    def head(self, m: int) -> "SectionStack":
        return SectionStack(self.kind, self.blocks[: m + 1], self.n_proj, dict(self.meta))


def build_stack(
    f: Symbol,
    family: ApproximantFamily,
    params: SpaceParams,
    quad: DiskQuadrature,
    kind: str = "hankel",
    n_proj: int | None = None,
) -> SectionStack:
    family.warm(quad)
    symbols = [f, *family.members]
    n = params.n_analytic
    if kind == "toeplitz":
        blocks = [toeplitz_section(s, params, quad).matrix for s in symbols]
        return SectionStack("toeplitz", blocks)
    if kind != "hankel":
        raise ValueError(f"kind must be hankel or toeplitz, got {kind!r}")
    n_proj = quad.max_cap if n_proj is None else n_proj
    C = [projection_coefficients(s, n, n_proj, quad) for s in symbols]
    p = len(symbols)
    big = np.zeros((p * n, p * n), dtype=complex)
    for i in range(p):
        for j in range(i, p):
            blk = product_gram(symbols[i], symbols[j], n, quad) - C[i].conj().T @ C[j]
            big[i * n:(i + 1) * n, j * n:(j + 1) * n] = blk
            if j != i:
                big[j * n:(j + 1) * n, i * n:(i + 1) * n] = blk.conj().T
    big = (big + big.conj().T) / 2
    lam, U = np.linalg.eigh(big)
    floor = max(float(lam[-1]), 0.0) * 1e-14
    keep = lam > floor
    Y = np.sqrt(lam[keep])[:, None] * U[:, keep].conj().T
    blocks = [Y[:, i * n:(i + 1) * n] for i in range(p)]
    meta = {"joint_min_eigenvalue": float(lam[0]), "rank": int(keep.sum())}
    return SectionStack("hankel", blocks, n_proj, meta)


# ---------------------------------------------------------------------------
# simplex search


@dataclass
class SearchResult:
    weights: SimplexWeights
    objective: float
    fw_gap: float
    bundle_gap: float
    converged: bool
    iterations: int
    trace: list

    def to_record(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "objective": self.objective,
            "fw_gap": self.fw_gap,
            "bundle_gap": self.bundle_gap,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _line_search(stack: SectionStack, x, d, gamma_max: float):
    res = optimize.minimize_scalar(
        lambda t: stack.objective(x + t * d),
        bounds=(0.0, gamma_max),
        method="bounded",
        options={"xatol": 1e-12 * max(gamma_max, 1e-12)},
    )
    return float(res.x), float(res.fun)


def simplex_search(
    stack: SectionStack,
    start: SimplexWeights | None = None,
    max_iters: int = 400,
    tol: float = 1e-7,
    fw_iters: int = 60,
) -> SearchResult:
    """Minimize J(a) = ||A_f - sum a_n A_{psi_n}|| over the simplex.

    Frank-Wolfe with away steps and exact line search runs first; since J is
    nonsmooth, its dual gap can stall at a kink, so the collected subgradient
    cuts then drive a Kelley cutting-plane phase whose LP value is a certified
    lower bound.  Stops when either gap falls below ``tol``.
    """
    m = stack.m
    if m == 0:
        raise DomainError("empty family")
    cuts = []  # (point, value, subgradient)
    trace = []
    best_x, best_val = None, math.inf
    lower = -math.inf
    fw_gap = math.inf

    def record(pt):
        nonlocal best_x, best_val
        val, g = stack.subgradient(pt)
        cuts.append((pt.copy(), val, g))
        if val < best_val:
            best_x, best_val = pt.copy(), val
        return val, g

    # vertex cuts first: the result can never lose to a single member
    vertex_vals = [record(SimplexWeights.vertex(m, k).a)[0] for k in range(m)]
    if m == 1:
        return SearchResult(SimplexWeights(np.ones(1)), vertex_vals[0], 0.0, 0.0, True, 0, [{"iter": 0, "J": vertex_vals[0]}])
    if start is None:
        start = SimplexWeights.vertex(m, int(np.argmin(vertex_vals)))
    x = start.a.copy()
    it = 0
    val, g = record(x)

    # Frank-Wolfe with away steps
    for it in range(1, min(fw_iters, max_iters) + 1):
        s = int(np.argmin(g))
        fw_gap = float(g @ x - g[s])
        lower = max(lower, val - fw_gap)
        trace.append({"iter": it, "phase": "fw", "J": val, "gap": fw_gap})
        if fw_gap <= tol:
            break
        support = np.flatnonzero(x > 0)
        v = int(support[np.argmax(g[support])])
        d_fw = -x.copy()
        d_fw[s] += 1.0
        d_away = x.copy()
        d_away[v] -= 1.0
        if -g @ d_fw >= -g @ d_away or x[v] >= 1.0:
            d, gmax = d_fw, 1.0
        else:
            d, gmax = d_away, x[v] / (1.0 - x[v])
        step, new_val = _line_search(stack, x, d, gmax)
        if new_val >= val - 1e-15:
            break
        x = np.clip(x + step * d, 0.0, None)
        x /= x.sum()
        val, g = record(x)

    # cutting planes over the simplex: min t s.t. t >= J_i + g_i (a - a_i)
    bundle_gap = best_val - lower
    c = np.zeros(m + 1)
    c[-1] = 1.0
    a_eq = np.ones((1, m + 1))
    a_eq[0, -1] = 0.0
    bounds = [(0, None)] * m + [(None, None)]
    while bundle_gap > tol and fw_gap > tol and it < max_iters:
        it += 1
        a_ub = np.array([np.append(gi, -1.0) for _, _, gi in cuts])
        b_ub = np.array([gi @ pi - vi for pi, vi, gi in cuts])
        lp = optimize.linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs")
        if lp.status != 0:
            log.warning("cutting-plane LP failed: %s", lp.message)
            break
        lower = max(lower, float(lp.x[-1]))
        x = np.clip(lp.x[:m], 0.0, None)
        x /= x.sum()
        val, g = record(x)
        bundle_gap = best_val - lower
        trace.append({"iter": it, "phase": "cut", "J": val, "gap": bundle_gap})

    converged = bundle_gap <= tol or fw_gap <= tol
    if not converged:
        log.warning("simplex search stopped after %d iterations with gap %.3e", it, bundle_gap)
    # final FW gap at the returned point
    _, g_best = stack.subgradient(best_x)
    fw_final = float(g_best @ best_x - g_best.min())
    return SearchResult(
        SimplexWeights.clean(best_x), best_val, fw_final, max(bundle_gap, 0.0), bool(converged), it, trace
    )


# ---------------------------------------------------------------------------
# certificates


def harmonicity_residual(f: Symbol, radius: float = 0.8, h: float = 1e-3, samples: int = 64) -> float:
    """Max nine-point discrete Laplacian of f over sample points with |z| <= radius."""
    rs = np.sqrt(np.linspace(0.0, 1.0, 8)) * radius
    th = 2 * np.pi * np.arange(samples // 8) / (samples // 8)
    z = (rs[:, None] * np.exp(1j * th)[None, :]).ravel()
    return float(np.max(np.abs(nine_point_laplacian(f, z, h))))


def nine_point_laplacian(f, z, h: float):
    """(4 * edges + corners - 20 * center) / (6 h^2); O(h^4) on harmonic functions."""
    z = np.asarray(z, dtype=complex)
    edges = f(z + h) + f(z - h) + f(z + 1j * h) + f(z - 1j * h)
    corners = f(z + h + 1j * h) + f(z + h - 1j * h) + f(z - h + 1j * h) + f(z - h - 1j * h)
    return (4 * edges + corners - 20 * f(z)) / (6 * h * h)


def distance_certificate(
    f: Symbol,
    family: ApproximantFamily,
    weights: SimplexWeights,
    kind: str,
    params: SpaceParams,
    quad: DiskQuadrature,
    stack: SectionStack | None = None,
    estimate=None,
    radii=(0.9, 0.95, 0.99, 0.995),
    caps=None,
    tol: float = 5e-3,
) -> dict:
    """Achieved distance J against the essential-norm sandwich for phi = sum a_n psi_n."""
    n = params.n_analytic
    if stack is None:
        stack = build_stack(f, family, params, quad, kind)
    if caps is None:
        caps = sorted({max(n // 4, 1), max(n // 2, 1), max(3 * n // 4, 1)})
    if estimate is None:
        estimate = essential_norm_estimate(f, kind, radii, caps, params, quad)
    J = stack.objective(weights.a)
    # interior rings overstate the limit |z| -> 1 for compact symbols
    lower = estimate.lower_outer
    phi = family.combination(weights)
    vanish_ok, vanish_max = boundary_vanishing_check(phi, 1.0, 1e-12)

    Y = stack.combination_matrix(weights.a)
    gram_phi = Y.conj().T @ Y
    probe = []
    for k in caps:
        block = gram_phi[k:, k:]
        probe.append([int(k), math.sqrt(max(float(np.linalg.eigvalsh(block)[-1]), 0.0)) if block.size else 0.0])

    report = {
        "kind": kind,
        "family_kind": family.family_kind,
        "M": len(family),
        "N": n,
        "alpha": params.alpha,
        "weights": weights.tolist(),
        "J": J,
        "lower": lower,
        "lower_all_radii": estimate.lower,
        "upper": estimate.upper,
        "gap": J - lower,
        "lower_le_J": bool(lower - tol <= J),
        "boundary_vanishing": {"passes": bool(vanish_ok), "max_abs": vanish_max, "support": phi.vanishes_beyond},
        "compactness_probe": probe,
        "estimate_flags": estimate.flags,
    }
    if family.family_kind == "harmonic-dilation":
        report["harmonicity_residual"] = harmonicity_residual(phi)
    return report


def kernel_probe(f: Symbol, z: complex, params: SpaceParams, quad: DiskQuadrature) -> float:
    return berezin_hankel_defect(f, z, params, quad).companion
