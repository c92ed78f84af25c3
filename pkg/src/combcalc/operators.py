"""Operator catalog and resolvent evaluation.

All operators act on C^m with an optional diagonal weight defining the inner
product; resolvents R(z) = (zI - T)^{-1} are evaluated by structure-aware
solves rather than generic inversion wherever the structure allows it.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

POLE_TOL = 1e-13


class OperatorError(ValueError):
    """Invalid operator construction or resolvent query."""


class PoleError(OperatorError):
    """Resolvent requested at (numerically) a spectral point."""


@dataclass(frozen=True)
class Operator:
    """A bounded operator on C^dim with spectral metadata.

    ``apply`` computes T x; ``solve_shifted`` computes (zI - T)^{-1} x.
    ``poles`` lists the points where the resolvent must not be evaluated
    (the finite spectrum of the discretized operator).  ``weight`` holds the
    positive diagonal of the inner-product weight (trapezoid weights for the
    integration-kernel operators, ones otherwise).
    """

    kind: str
    dim: int
    apply: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    solve_shifted: Callable[[complex, np.ndarray], np.ndarray] = field(repr=False)
    poles: tuple[complex, ...]
    weight: np.ndarray = field(repr=False)
    params: dict = field(default_factory=dict, repr=False)
    solve_shifted_adjoint: Callable[[complex, np.ndarray], np.ndarray] | None = field(
        default=None, repr=False
    )

    def _pole_check(self, z: complex) -> None:
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise OperatorError(f"resolvent point must be finite, got {z!r}")
        if self.poles:
            pa = np.asarray(self.poles)
            gaps = np.abs(z - pa) / np.maximum(1.0, np.abs(pa))
            j = int(np.argmin(gaps))
            if gaps[j] <= POLE_TOL:
                raise PoleError(
                    f"resolvent evaluated at spectral point {z!r} (pole {self.poles[j]!r})"
                )

    def resolvent(self, z: complex, x: np.ndarray) -> np.ndarray:
        """R(z) x; ``x`` may be a vector or a (dim, k) block of columns."""
        z = complex(z)
        self._pole_check(z)
        x = np.asarray(x, dtype=complex)
        if x.shape[0] != self.dim:
            raise OperatorError(f"vector has length {x.shape[0]}, operator dim is {self.dim}")
        return self.solve_shifted(z, x)

    def resolvent_adjoint(self, z: complex, x: np.ndarray) -> np.ndarray:
        """Adjoint R(z)* x in the weighted inner product: W^{-1}(conj(z) I - T^H)^{-1} W x."""
        z = complex(z)
        self._pole_check(z)
        if self.solve_shifted_adjoint is None:
            raise OperatorError(f"kind {self.kind!r} has no adjoint solve")
        x = np.asarray(x, dtype=complex)
        w = self.weight if x.ndim == 1 else self.weight[:, None]
        return self.solve_shifted_adjoint(z, w * x) / w

    def matrix(self) -> np.ndarray:
        """Dense materialization T (columns = T e_j)."""
        cols = [self.apply(e) for e in np.eye(self.dim, dtype=complex)]
        return np.column_stack(cols)

    def norm_vec(self, x: np.ndarray) -> float:
        """Weighted 2-norm sqrt(sum w_i |x_i|^2); Frobenius-style over columns."""
        x = np.asarray(x)
        w = self.weight if x.ndim == 1 else self.weight[:, None]
        return float(np.sqrt(np.sum(w * np.abs(x) ** 2).real))

    def inner(self, x: np.ndarray, y: np.ndarray) -> complex:
        return complex(np.sum(self.weight * np.conj(x) * y))


def _as_square(mat: np.ndarray) -> np.ndarray:
    a = np.asarray(mat, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise OperatorError(f"need a square matrix, got shape {a.shape}")
    return a


# ---------------------------------------------------------------------------
# catalog constructors


def dense_operator(mat: np.ndarray, poles: tuple[complex, ...] = ()) -> Operator:
    """Arbitrary dense matrix; shifted solves use LU factorization per point."""
    a = _as_square(mat)
    m = a.shape[0]
    eye = np.eye(m, dtype=complex)

    def apply(x):
        return a @ x

    def solve(z, x):
        return np.linalg.solve(z * eye - a, x)

    def solve_adj(z, x):
        return np.linalg.solve((z * eye - a).conj().T, x)

    pole_list = poles if poles else tuple(np.linalg.eigvals(a))
    return Operator("dense", m, apply, solve, tuple(map(complex, pole_list)), np.ones(m),
                    solve_shifted_adjoint=solve_adj)


def jordan_nilpotent(dim: int) -> Operator:
    """Nilpotent single Jordan block: (T x)_i = x_{i+1}, T^dim = 0.

    The resolvent is the finite Neumann sum z^{-1} sum_k (T/z)^k x, evaluated
    by Horner recursion; exact up to roundoff, no linear solve.
    """
    if dim < 1:
        raise OperatorError("dim must be at least 1")

    def apply(x):
        y = np.zeros_like(np.asarray(x, dtype=complex))
        y[:-1] = x[1:]
        return y

    def solve(z, x):
        # back-substitution of the bidiagonal system: y_i = (x_i + y_{i+1}) / z
        y = np.zeros_like(np.asarray(x, dtype=complex))
        for i in range(dim - 1, -1, -1):
            tail = y[i + 1] if i + 1 < dim else 0.0
            y[i] = (x[i] + tail) / z
        return y

    def solve_adj(z, x):
        # T^H is the forward shift; the bidiagonal system runs downward
        zc = np.conj(z)
        y = np.zeros_like(np.asarray(x, dtype=complex))
        for i in range(dim):
            tail = y[i - 1] if i > 0 else 0.0
            y[i] = (x[i] + tail) / zc
        return y

    return Operator("jordanNilpotent", dim, apply, solve, (0.0 + 0.0j,), np.ones(dim),
                    solve_shifted_adjoint=solve_adj)


def volterra_analytic(dim: int) -> Operator:
    """Discretized integration operator (V x)(t) = ∫_0^t x(s) ds on [0, 1].

    Uniform grid t_i = i h, h = 1/(dim-1), trapezoid weights.  V is lower
    triangular with zero first row; its spectrum is {0, h/2}, so the shifted
    system is an exact two-term forward recurrence solved in O(dim).
    The first grid weight pair (h/2 at the ends) defines the inner product
    used for L2 norms on [0, 1].
    """
    if dim < 8:
        raise OperatorError("dim must be at least 8 for a usable grid")
    m = dim
    h = 1.0 / (m - 1)
    w = np.full(m, h)
    w[0] = w[-1] = h / 2

    def apply(x):
        x = np.asarray(x, dtype=complex)
        y = np.empty_like(x)
        y[0] = 0.0
        y[1:] = np.cumsum((x[:-1] + x[1:]) * (h / 2), axis=0)
        return y

    def solve(z, x):
        # rows: z y_0 = x_0 ; z y_i - h (y_0/2 + y_1 + ... + y_{i-1} + y_i/2) = x_i
        x = np.asarray(x, dtype=complex)
        y = np.empty_like(x)
        y[0] = x[0] / z
        s = y[0] / 2  # running sum y_0/2 + y_1 + ... + y_{i-1}
        d = z - h / 2
        for i in range(1, m):
            y[i] = (x[i] + h * s) / d
            s += y[i]
        return y

    def solve_adj(z, x):
        # transposed system, solved upward: (conj(z) - h/2) y_j = x_j + h sum_{i>j} y_i
        zc = np.conj(z)
        x = np.asarray(x, dtype=complex)
        y = np.empty_like(x)
        d = zc - h / 2
        s = np.zeros_like(x[0])
        for j in range(m - 1, 0, -1):
            y[j] = (x[j] + h * s) / d
            s = s + y[j]
        y[0] = (x[0] + (h / 2) * s) / zc
        return y

    op = Operator(
        "volterraAnalytic",
        m,
        apply,
        solve,
        (0.0 + 0.0j, complex(h / 2)),
        w,
        params={"h": h, "grid": np.linspace(0.0, 1.0, m)},
        solve_shifted_adjoint=solve_adj,
    )
    return op


def apply_resolvent_continuous(z: complex, x: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Closed-form resolvent of exact integration acting on the linear
    interpolant of samples ``x``:

        ((zI - V)^{-1} f)(t) = f(t)/z + z^{-2} ∫_0^t e^{(t-s)/z} f(s) ds.

    The integral is evaluated exactly per grid cell against the piecewise
    linear interpolant, so the only error against the true continuous
    resolvent is the interpolation error of ``x`` itself.  Kept as an
    independent cross-check for the discrete solve.
    """
    x = np.asarray(x, dtype=complex)
    t = np.asarray(grid, dtype=float)
    m = len(t)
    y = np.empty(m, dtype=complex)
    y[0] = x[0] / z
    integ = 0.0 + 0.0j
    for i in range(1, m):
        a, b = t[i - 1], t[i]
        dt = b - a
        fa, fb = x[i - 1], x[i]
        # ∫_a^b e^{(t_i - s)/z} (fa + (fb-fa)(s-a)/dt) ds, antiderivatives in s
        ea = cmath.exp((t[i] - a) / z)
        slope = (fb - fa) / dt
        # ∫ e^{(t_i-s)/z} ds = -z e^{(t_i-s)/z};  ∫ s e^{(t_i-s)/z} ds = -z e^{(t_i-s)/z}(s+z)
        i0 = -z * (1.0 - ea)  # e^{(t_i-b)/z} = 1 at s=b
        i1 = -z * ((b + z) - ea * (a + z))
        cell = (fa - slope * a) * i0 + slope * i1
        # earlier cells carry the kernel referenced to t_{i-1}; rescale to t_i
        integ = integ * cmath.exp(dt / z) + cell
        y[i] = x[i] / z + integ / z**2
    return y


def weighted_shift(weights: np.ndarray) -> Operator:
    """Unilateral weighted backward shift: (T x)_i = w_i x_{i+1}.

    Quasinilpotent iff the weights decay suitably; here truncated to a
    nilpotent matrix, so the resolvent is again a finite Neumann recurrence.
    """
    ws = np.asarray(weights, dtype=complex)
    if ws.ndim != 1 or len(ws) < 1:
        raise OperatorError("need a 1-d nonempty weight sequence")
    if np.any(ws.imag != 0) or np.any(ws.real <= 0):
        raise OperatorError("shift weights must be positive")
    m = len(ws) + 1

    def apply(x):
        x = np.asarray(x, dtype=complex)
        y = np.zeros_like(x)
        wexp = ws if x.ndim == 1 else ws[:, None]
        y[:-1] = wexp * x[1:]
        return y

    def solve(z, x):
        x = np.asarray(x, dtype=complex)
        y = np.empty_like(x)
        y[-1] = x[-1] / z
        for i in range(m - 2, -1, -1):
            y[i] = (x[i] + ws[i] * y[i + 1]) / z
        return y

    def solve_adj(z, x):
        zc = np.conj(z)
        x = np.asarray(x, dtype=complex)
        y = np.empty_like(x)
        y[0] = x[0] / zc
        for i in range(1, m):
            y[i] = (x[i] + np.conj(ws[i - 1]) * y[i - 1]) / zc
        return y

    return Operator("weightedShift", m, apply, solve, (0.0 + 0.0j,), np.ones(m),
                    params={"weights": ws}, solve_shifted_adjoint=solve_adj)


def unitary_diagonal(dim: int, phases: np.ndarray | float = 1.0) -> Operator:
    """Diagonal unitary diag(e^{i phi_j}); a normal non-quasinilpotent probe.

    Its shifted inverse is exact and its operator norm is 1/dist(z, spectrum),
    which makes it the reference case for perturbation bounds.
    """
    if dim < 1:
        raise OperatorError("dim must be at least 1")
    phi = np.broadcast_to(np.asarray(phases, dtype=float), (dim,)).copy()
    diag = np.exp(1j * phi)

    def apply(x):
        x = np.asarray(x, dtype=complex)
        d = diag if x.ndim == 1 else diag[:, None]
        return d * x

    def solve(z, x):
        x = np.asarray(x, dtype=complex)
        den = z - diag
        return x / (den if x.ndim == 1 else den[:, None])

    def solve_adj(z, x):
        x = np.asarray(x, dtype=complex)
        den = np.conj(z - diag)
        return x / (den if x.ndim == 1 else den[:, None])

    return Operator("unitaryDiagonal", dim, apply, solve, tuple(map(complex, diag)),
                    np.ones(dim), params={"phases": phi}, solve_shifted_adjoint=solve_adj)


_CATALOG: dict[str, Callable[..., Operator]] = {
    "dense": dense_operator,
    "jordanNilpotent": jordan_nilpotent,
    "volterraAnalytic": volterra_analytic,
    "weightedShift": weighted_shift,
    "unitaryDiagonal": unitary_diagonal,
}


def catalog_kinds() -> tuple[str, ...]:
    return tuple(sorted(_CATALOG))


def make_operator(kind: str, **kwargs) -> Operator:
    if kind not in _CATALOG:
        raise OperatorError(
            f"unknown operator kind {kind!r}; available: {', '.join(catalog_kinds())}"
        )
    return _CATALOG[kind](**kwargs)


# ---------------------------------------------------------------------------
# resolvent-level utilities


def apply_resolvent(op: Operator, z: complex, x: np.ndarray) -> np.ndarray:
    return op.resolvent(z, x)


def resolvent_defect(op: Operator, z: complex, x: np.ndarray) -> float:
    """|| (zI - T) R(z) x - x || in the operator's weighted norm."""
    y = op.resolvent(z, x)
    r = z * y - op.apply(y) - np.asarray(x, dtype=complex)
    return op.norm_vec(r)


def resolvent_identity_residual(op: Operator, z: complex, w: complex, x: np.ndarray) -> float:
    """|| R(z)x - R(w)x - (w - z) R(z) R(w) x || / ||x||."""
    if abs(complex(z) - complex(w)) <= POLE_TOL:
        raise OperatorError("resolvent identity needs two distinct points")
    xnorm = op.norm_vec(x)
    if xnorm == 0.0:
        return 0.0
    rw = op.resolvent(w, x)
    lhs = op.resolvent(z, x) - rw
    rhs = (w - z) * op.resolvent(z, rw)
    return op.norm_vec(lhs - rhs) / xnorm


def materialize_resolvent(op: Operator, z: complex) -> np.ndarray:
    """Dense R(z) (columns = R(z) e_j); for small dims and oracles only."""
    cols = [op.resolvent(z, e) for e in np.eye(op.dim, dtype=complex)]
    return np.column_stack(cols)


def weighted_operator_norm(mat: np.ndarray, weight: np.ndarray) -> float:
    """Operator norm of ``mat`` between weighted-l2 spaces with diagonal
    weight: ||W^{1/2} A W^{-1/2}||_2."""
    a = _as_square(mat)
    sw = np.sqrt(np.asarray(weight, dtype=float))
    sim = (sw[:, None] * a) / sw[None, :]
    return float(np.linalg.norm(sim, 2))


def dense_resolvent_norm(op: Operator, z: complex) -> float:
    """Oracle: weighted operator norm of the materialized resolvent."""
    return weighted_operator_norm(materialize_resolvent(op, z), op.weight)


def null_space_weighted(mat: np.ndarray, weight: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Orthonormal (weighted) basis of the numerical kernel of ``mat``."""
    a = np.asarray(mat, dtype=complex)
    sw = np.sqrt(np.asarray(weight, dtype=float))
    sim = (sw[:, None] * a) / sw[None, :]
    ns = scipy.linalg.null_space(sim, rcond=rtol)
    return ns / sw[:, None]
