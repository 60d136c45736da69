"""Scaled orthogonal bases on unbounded domains.

Two families are provided:

* generalized Laguerre polynomials ``L_l(beta*(x - x_left))`` on
  ``(x_left, inf)``, orthogonal under the weight
  ``(x - x_left)**alpha * exp(-beta*(x - x_left))``;
* normalized Hermite functions ``sqrt(beta)*h_l(beta*x)`` on the real line,
  orthonormal under the plain Lebesgue measure (the Gaussian weight is folded
  into the functions, so every norm equals one).

The scaling factor ``beta`` controls how fast the basis decays; adapting it
(and, for Laguerre, the left endpoint ``x_left``) is what the rest of the
package is about.  Quadrature rules are computed once per (family, alpha,
order, kind) at unit scale via Golub-Welsch — eigenvalues and first
eigenvector components of the symmetric tridiagonal Jacobi matrix — and then
mapped to the requested scale, so repeated calls during time stepping are
cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

__all__ = [
    "ScaledBasis",
    "QuadratureRule",
    "laguerre_basis",
    "hermite_basis",
    "eval_basis_all",
    "eval_weighted_all",
    "gamma_norms",
    "quadrature",
    "modified_weights",
    "derivative_coeffs",
]

LAGUERRE = "laguerre"
HERMITE = "hermite"

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ScaledBasis:
    """A truncated basis: family, weight exponent, scale, left endpoint, order.

    ``order`` is the highest retained index N; the basis spans N+1 functions.
    For the Hermite family ``alpha`` and ``x_left`` must both be zero.
    """

    family: str
    alpha: float
    beta: float
    x_left: float
    order: int

    def __post_init__(self) -> None:
        if self.family not in (LAGUERRE, HERMITE):
            raise ValueError(f"unknown basis family {self.family!r}")
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise ValueError(f"scaling factor must be positive, got {self.beta}")
        if self.order < 0:
            raise ValueError(f"order must be nonnegative, got {self.order}")
        if self.family == LAGUERRE:
            if not (math.isfinite(self.alpha) and self.alpha > -1.0):
                raise ValueError(f"weight exponent must exceed -1, got {self.alpha}")
            if not math.isfinite(self.x_left):
                raise ValueError("left endpoint must be finite")
        else:
            if self.alpha != 0.0 or self.x_left != 0.0:
                raise ValueError("Hermite bases have alpha = 0 and x_left = 0")


def laguerre_basis(order: int, beta: float, alpha: float = 0.0, x_left: float = 0.0) -> ScaledBasis:
    """Scaled generalized Laguerre basis on (x_left, inf)."""
    return ScaledBasis(LAGUERRE, float(alpha), float(beta), float(x_left), int(order))


def hermite_basis(order: int, beta: float) -> ScaledBasis:
    """Scaled normalized Hermite-function basis on the real line."""
    return ScaledBasis(HERMITE, 0.0, float(beta), 0.0, int(order))


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights matched to a basis.

    ``kind`` is ``"gauss"`` (exact through degree 2N+1) or ``"radau"``
    (first node pinned at ``x_left``, exact through degree 2N).  For the
    Hermite family the weights integrate ``f(x) dx`` exactly whenever ``f``
    is a polynomial of degree <= 2N+1 times the squared Gaussian envelope,
    i.e. the Hermite functions are discretely orthonormal under the rule.
    """

    basis: ScaledBasis
    kind: str
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != (self.basis.order + 1,) or weights.shape != nodes.shape:
            raise ValueError("rule size must match basis order + 1")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        # Weights are mathematically positive; in float64 the extreme tail
        # weights underflow to 0.0 once the order reaches ~180, so only
        # negative values are rejected here.
        if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)


def eval_basis_all(basis: ScaledBasis, x) -> np.ndarray:
    """Evaluate all N+1 basis functions at x.

    Returns shape (N+1,) for scalar input and (N+1, len(x)) for 1-d input.
    Laguerre evaluation requires ``x >= x_left``.
    """
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if basis.family == LAGUERRE:
        y = basis.beta * (xa - basis.x_left)
        if np.any(y < 0.0):
            raise ValueError("Laguerre basis evaluated left of its endpoint")
        out = _laguerre_all(basis.order, basis.alpha, y)
    else:
        out = math.sqrt(basis.beta) * _hermite_fn_all(basis.order, basis.beta * xa)
    return out[:, 0] if scalar else out


def eval_weighted_all(basis: ScaledBasis, x) -> np.ndarray:
    """Evaluate the half-weighted basis functions sqrt(weight)*phi_l at x.

    For Laguerre this is exp(-y/2)*L_l(y) with y = beta*(x - x_left) (alpha
    contributes to the weight only through the quadrature, not the envelope).
    Unlike the bare polynomials, which reach ~1e30 near the largest N=40
    node, these stay O(1) over the whole node range, so nodal<->modal
    transforms built from them are float64-safe at any order used here.
    Hermite functions already carry their Gaussian envelope, so the plain
    evaluation is returned unchanged.
    """
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if basis.family == HERMITE:
        out = math.sqrt(basis.beta) * _hermite_fn_all(basis.order, basis.beta * xa)
        return out[:, 0] if scalar else out
    y = basis.beta * (xa - basis.x_left)
    if np.any(y < 0.0):
        raise ValueError("Laguerre basis evaluated left of its endpoint")
    out = np.empty((basis.order + 1,) + y.shape)
    out[0] = np.exp(-0.5 * y)
    if basis.order >= 1:
        out[1] = (basis.alpha + 1.0 - y) * out[0]
    for k in range(1, basis.order):
        out[k + 1] = ((2.0 * k + basis.alpha + 1.0 - y) * out[k] - (k + basis.alpha) * out[k - 1]) / (k + 1.0)
    return out[:, 0] if scalar else out


def modified_weights(rule: QuadratureRule) -> np.ndarray:
    """Weights that integrate plain dx (Laguerre) instead of the weighted measure.

    Multiplying the Gauss(-Radau) weights by exp(+beta*(x_j - x_left)) turns
    sum w~_j f(x_j) into an approximation of the unweighted integral of f over
    (x_left, inf), exact whenever f equals the weight times a polynomial of
    rule degree.  This is the single place exponential reweighting occurs;
    it is safe because w_j itself decays like the weight, so the product
    stays bounded.  For Hermite rules the weights already integrate dx.
    """
    basis = rule.basis
    if basis.family == HERMITE:
        return rule.weights.copy()
    d = rule.nodes - basis.x_left
    out = rule.weights * np.exp(basis.beta * d)
    if basis.alpha != 0.0:
        if rule.kind == "radau":
            raise ValueError("modified weights are singular at a pinned endpoint for alpha != 0")
        out = out / d**basis.alpha
    return out


def _laguerre_all(n: int, alpha: float, y: np.ndarray) -> np.ndarray:
    out = np.empty((n + 1,) + y.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = alpha + 1.0 - y
    for k in range(1, n):
        out[k + 1] = ((2.0 * k + alpha + 1.0 - y) * out[k] - (k + alpha) * out[k - 1]) / (k + 1.0)
    return out


def _hermite_fn_all(n: int, y: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite functions h_l(y); bounded for all real y."""
    out = np.empty((n + 1,) + y.shape)
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * y * y)
    if n >= 1:
        out[1] = math.sqrt(2.0) * y * out[0]
    for k in range(1, n):
        out[k + 1] = math.sqrt(2.0 / (k + 1.0)) * y * out[k] - math.sqrt(k / (k + 1.0)) * out[k - 1]
    return out


def gamma_norms(basis: ScaledBasis) -> np.ndarray:
    """Squared weighted norms of the basis functions, indices 0..N.

    Laguerre: Gamma(l+alpha+1) / (l! * beta**(alpha+1)), computed by the
    ratio recurrence g_l = g_{l-1} * (l+alpha)/l so no large-argument Gamma
    evaluations occur.  Hermite functions are orthonormal: all ones.
    """
    n = basis.order
    if basis.family == HERMITE:
        return np.ones(n + 1)
    g = np.empty(n + 1)
    g[0] = math.gamma(basis.alpha + 1.0) / basis.beta ** (basis.alpha + 1.0)
    for l in range(1, n + 1):
        g[l] = g[l - 1] * (l + basis.alpha) / l
    return g


def quadrature(basis: ScaledBasis, kind: str = "gauss") -> QuadratureRule:
    """N+1-node Gauss or Gauss-Radau rule for the basis's weighted measure.

    Unit-scale nodes/weights come from the Golub-Welsch eigenproblem and are
    cached; the returned rule is the mapped copy
    (Laguerre: x -> x/beta + x_left, w -> w * beta**-(alpha+1);
    Hermite: x -> x/beta, w -> w/beta).
    """
    if kind not in ("gauss", "radau"):
        raise ValueError(f"unknown rule kind {kind!r}")
    if basis.family == HERMITE and kind == "radau":
        raise ValueError("Radau rules are only defined for the Laguerre family")
    unit_nodes, unit_weights = _unit_rule(basis.family, basis.alpha, basis.order, kind)
    if basis.family == LAGUERRE:
        nodes = basis.x_left + unit_nodes / basis.beta
        if kind == "radau":
            nodes[0] = basis.x_left
        weights = unit_weights * basis.beta ** -(basis.alpha + 1.0)
    else:
        nodes = unit_nodes / basis.beta
        weights = unit_weights / basis.beta
    return QuadratureRule(basis, kind, nodes, weights)


@lru_cache(maxsize=128)
def _unit_rule(family: str, alpha: float, order: int, kind: str):
    n = order + 1
    if family == LAGUERRE:
        k = np.arange(n, dtype=float)
        diag = 2.0 * k + alpha + 1.0
        off = np.sqrt(k[1:] * (k[1:] + alpha))
        if kind == "radau":
            # Pinning a node at the endpoint 0 replaces the last diagonal
            # entry by order (independent of alpha for this weight).
            diag = diag.copy()
            diag[-1] = float(order)
        vals, first = _symtri_eigh_first(diag, off)
        weights = math.gamma(alpha + 1.0) * first**2
        if kind == "radau":
            vals = vals.copy()
            vals[0] = 0.0
        nodes = vals
    else:
        k = np.arange(n, dtype=float)
        diag = np.zeros(n)
        off = np.sqrt(k[1:] / 2.0)
        nodes, _ = _symtri_eigh_first(diag, off)
        # Function-space weights via the Christoffel identity
        # w_j = 1 / sum_l h_l(x_j)^2; the textbook polynomial weights times
        # exp(x_j^2) would overflow at large order.
        h = _hermite_fn_all(order, nodes)
        weights = 1.0 / np.sum(h * h, axis=0)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _symtri_eigh_first(diag: np.ndarray, off: np.ndarray, max_sweeps: int = 64):
    """Eigenvalues (ascending) and first eigenvector components of a
    symmetric tridiagonal matrix, by the QL algorithm with implicit shifts.

    Only the first row of the eigenvector matrix is accumulated, which is all
    Golub-Welsch needs; the row is a unit vector, so weights are
    mu_0 * first**2.
    """
    n = diag.size
    d = np.asarray(diag, dtype=float).copy()
    e = np.zeros(n)
    e[: n - 1] = off
    z = np.zeros(n)
    z[0] = 1.0
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > max_sweeps:
                raise RuntimeError("tridiagonal eigensolver failed to converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                f = z[i + 1]
                z[i + 1] = s * z[i] + c * f
                z[i] = c * z[i] - s * f
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    idx = np.argsort(d, kind="stable")
    return d[idx], z[idx]


def derivative_coeffs(coeffs: np.ndarray, basis: ScaledBasis) -> tuple[np.ndarray, ScaledBasis]:
    """Coefficients and basis of the exact derivative of an expansion.

    Laguerre: d/dx L_l(beta*(x-x_left)) = -beta * M_{l-1} with M from the
    alpha+1 family, so the result has order N-1 in (alpha+1, beta, x_left).
    Hermite: d/dx H_l = beta*(sqrt(l/2) H_{l-1} - sqrt((l+1)/2) H_{l+1}),
    so the result has order N+1 in the same basis family.
    """
    c = np.asarray(coeffs, dtype=float)
    n = basis.order
    if c.shape != (n + 1,):
        raise ValueError("coefficient vector must match basis order + 1")
    if basis.family == LAGUERRE:
        if n < 1:
            raise ValueError("Laguerre derivative needs order >= 1")
        out = -basis.beta * c[1:]
        return out, replace(basis, alpha=basis.alpha + 1.0, order=n - 1)
    # mode m receives sqrt((m+1)/2)*u_{m+1} - sqrt(m/2)*u_{m-1}, times beta
    m = np.arange(n + 2, dtype=float)
    upper = np.zeros(n + 2)
    upper[:n] = c[1:]
    lower = np.zeros(n + 2)
    lower[1:] = c
    out = basis.beta * (np.sqrt((m + 1.0) / 2.0) * upper - np.sqrt(m / 2.0) * lower)
    return out, replace(basis, order=n + 1)
