"""Finsler norms on R^N (N = 1, 2): evaluation, duals, gradients and the diffusion flux.

All evaluators are vectorised over leading axes: a point is an array whose
last axis has length ``N``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

__all__ = [
    "NormSpec",
    "FinslerEvaluator",
    "IdentityReport",
    "NormSpecError",
    "ZeroVector",
    "NonpositiveRadius",
]


class NormSpecError(ValueError):
    """Raised for a norm that is not a strictly convex norm on R^N."""


class ZeroVector(ValueError):
    pass


class NonpositiveRadius(ValueError):
    pass


@dataclass(frozen=True)
class NormSpec:
    """Declarative description of a norm H.

    ``kind`` is one of ``"euclidean"``, ``"pnorm"`` (exponent ``s``) or
    ``"aniso"`` (``H(xi) = sqrt(xi . A xi)`` with ``matrix`` = A).
    """

    kind: str
    dim: int
    s: float | None = None
    matrix: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise NormSpecError(f"dimension must be 1 or 2, got {self.dim}")
        if self.kind == "euclidean":
            return
        if self.kind == "pnorm":
            s = self.s
            if s is None or not math.isfinite(s) or s <= 1.0:
                raise NormSpecError(
                    f"pnorm exponent must lie in (1, inf) for a strictly convex unit ball, got {s}"
                )
            return
        if self.kind == "aniso":
            if self.matrix is None:
                raise NormSpecError("aniso norm needs a matrix")
            A = np.asarray(self.matrix, dtype=float)
            if A.shape != (self.dim, self.dim):
                raise NormSpecError(f"matrix shape {A.shape} does not match dimension {self.dim}")
            if not np.allclose(A, A.T, rtol=0, atol=1e-14 * max(1.0, np.abs(A).max())):
                raise NormSpecError("aniso matrix must be symmetric")
            if np.linalg.eigvalsh(A).min() <= 0:
                raise NormSpecError("aniso matrix must be positive definite")
            return
        raise NormSpecError(f"unknown norm kind {self.kind!r}")

    @classmethod
    def euclidean(cls, dim: int = 2) -> "NormSpec":
        return cls("euclidean", dim)

    @classmethod
    def pnorm(cls, s: float, dim: int = 2) -> "NormSpec":
        return cls("pnorm", dim, s=float(s))

    @classmethod
    def aniso(cls, A) -> "NormSpec":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls("aniso", A.shape[0], matrix=tuple(tuple(float(a) for a in row) for row in A))

    @classmethod
    def parse(cls, text: str, dim: int) -> "NormSpec":
        """Parse ``euclidean``, ``pnorm:<s>`` or ``aniso:<a11,a12,a22>`` (``aniso:<a11>`` in 1D).

        The anisotropic matrix may also be written as a nested list, ``aniso:[[2,1],[1,2]]``.
        """
        text = text.strip()
        head, _, arg = text.partition(":")
        head = head.strip().lower()
        if head == "euclidean" and not arg:
            return cls.euclidean(dim)
        if head == "pnorm":
            try:
                s = float(arg)
            except ValueError:
                raise NormSpecError(f"bad pnorm exponent in {text!r}") from None
            return cls.pnorm(s, dim)
        if head == "aniso" and arg.strip().startswith("["):
            try:
                A = np.array(json.loads(arg), dtype=float)
            except (ValueError, TypeError):
                raise NormSpecError(f"bad aniso matrix in {text!r}") from None
            if A.shape != (dim, dim):
                raise NormSpecError(f"aniso matrix must be {dim}x{dim}, got shape {A.shape}")
            return cls.aniso(A)
        if head == "aniso":
            try:
                vals = [float(a) for a in arg.split(",")]
            except ValueError:
                raise NormSpecError(f"bad aniso coefficients in {text!r}") from None
            if dim == 1 and len(vals) == 1:
                return cls.aniso([[vals[0]]])
            if dim == 2 and len(vals) == 3:
                a11, a12, a22 = vals
                return cls.aniso([[a11, a12], [a12, a22]])
            raise NormSpecError(f"aniso needs {1 if dim == 1 else 3} coefficients, got {len(vals)}")
        raise NormSpecError(f"unrecognised norm {text!r}")

    def __str__(self) -> str:
        if self.kind == "euclidean":
            return "euclidean"
        if self.kind == "pnorm":
            return f"pnorm:{self.s:g}"
        A = self.matrix
        if self.dim == 1:
            return f"aniso:{A[0][0]:g}"
        return f"aniso:{A[0][0]:g},{A[0][1]:g},{A[1][1]:g}"


@dataclass
class IdentityReport:
    spec: str
    n_samples: int
    duality_excess: float  # max of (|x.xi| - H0(x)H(xi)) / (|x||xi|), should be <= 0
    euler_residual: float  # max |xi.gradH - H| / H
    dual_grad_residual: float  # max |H0(gradH) - 1|
    flux_dual_residual: float  # max |H0(a(xi)) - H(xi)| / H(xi)
    monotonicity_min: float  # min (a(xi)-a(eta)).(xi-eta) / (|xi|+|eta|)^2
    tol: float = 1e-10
    mono_tol: float = 1e-12

    @property
    def passed(self) -> bool:
        return (
            self.duality_excess <= self.tol
            and self.euler_residual <= self.tol
            and self.dual_grad_residual <= self.tol
            and self.flux_dual_residual <= self.tol
            and self.monotonicity_min >= -self.mono_tol
        )

    def lines(self) -> list[str]:
        return [
            f"norm={self.spec} samples={self.n_samples}",
            f"duality_excess={self.duality_excess:.3e}",
            f"euler_residual={self.euler_residual:.3e}",
            f"dual_grad_residual={self.dual_grad_residual:.3e}",
            f"flux_dual_residual={self.flux_dual_residual:.3e}",
            f"monotonicity_min={self.monotonicity_min:.3e}",
            f"status={'PASS' if self.passed else 'FAIL'}",
        ]


@dataclass(frozen=True)
class FinslerEvaluator:
    """Immutable evaluator for a :class:`NormSpec` with cached derived data."""

    spec: NormSpec
    _A: np.ndarray = field(init=False, repr=False, compare=False)
    _Ainv: np.ndarray = field(init=False, repr=False, compare=False)
    _s_dual: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sp = self.spec
        A = np.asarray(sp.matrix, dtype=float) if sp.kind == "aniso" else np.eye(sp.dim)
        object.__setattr__(self, "_A", A)
        object.__setattr__(self, "_Ainv", np.linalg.inv(A))
        s_dual = sp.s / (sp.s - 1.0) if sp.kind == "pnorm" else 2.0
        object.__setattr__(self, "_s_dual", s_dual)
        for arr in (self._A, self._Ainv):
            arr.setflags(write=False)

    @classmethod
    def from_string(cls, text: str, dim: int) -> "FinslerEvaluator":
        return cls(NormSpec.parse(text, dim))

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def dual_exponent(self) -> float:
        return self._s_dual

    def _check(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1:] != (self.dim,):
            raise ValueError(f"last axis must have length {self.dim}, got shape {xi.shape}")
        return xi

    # -- norm and dual norm -------------------------------------------------

    def eval(self, xi):
        xi = self._check(xi)
        kind = self.spec.kind
        if kind == "euclidean" or self.dim == 1 and kind == "pnorm":
            return _pnorm(xi, 2.0)
        if kind == "pnorm":
            return _pnorm(xi, self.spec.s)
        return _quadratic(xi, self._A)

    def dual_eval(self, x):
        x = self._check(x)
        kind = self.spec.kind
        if kind == "euclidean" or self.dim == 1 and kind == "pnorm":
            return _pnorm(x, 2.0)
        if kind == "pnorm":
            return _pnorm(x, self._s_dual)
        return _quadratic(x, self._Ainv)

    def dual_eval_sampled(self, x, n_grid: int = 720, tol: float = 1e-13) -> float:
        """Brute-force ``sup_{xi != 0} x.xi / H(xi)`` for a single point.

        Test oracle only: trivial in 1D, a coarse angular scan refined by
        golden-section search in 2D.
        """
        x = self._check(x).reshape(self.dim)
        if self.dim == 1:
            return abs(x[0]) / float(self.eval(np.array([1.0])))

        def ratio(theta):
            e = np.array([math.cos(theta), math.sin(theta)])
            return float(x @ e) / float(self.eval(e))

        thetas = np.linspace(0.0, 2 * math.pi, n_grid, endpoint=False)
        e = np.stack([np.cos(thetas), np.sin(thetas)], axis=-1)
        vals = (e @ x) / self.eval(e)
        i = int(np.argmax(vals))
        step = 2 * math.pi / n_grid
        a, b = thetas[i] - step, thetas[i] + step
        g = (math.sqrt(5.0) - 1.0) / 2.0
        c, d = b - g * (b - a), a + g * (b - a)
        fc, fd = ratio(c), ratio(d)
        while b - a > tol:
            if fc > fd:
                b, d, fd = d, c, fc
                c = b - g * (b - a)
                fc = ratio(c)
            else:
                a, c, fc = c, d, fd
                d = a + g * (b - a)
                fd = ratio(d)
        return max(fc, fd, float(vals[i]))

    # -- derivatives --------------------------------------------------------

    def grad(self, xi):
        """Gradient of H; undefined (``ZeroVector``) at the origin."""
        xi = self._check(xi)
        H = self.eval(xi)
        if np.any(H == 0):
            raise ZeroVector("gradient of H is undefined at xi = 0")
        return self.flux(xi) / H[..., None]

    def flux(self, xi):
        """The flux ``a(xi) = H(xi) grad H(xi)``, i.e. the gradient of ``H^2 / 2``."""
        xi = self._check(xi)
        kind = self.spec.kind
        if kind == "euclidean" or self.dim == 1 and kind == "pnorm":
            return xi.copy()
        if kind == "aniso":
            return xi @ self._A
        s = self.spec.s
        m, y = _normalise(xi)
        H = _pnorm(y, s)
        # H^{2-s} |y_j|^{s-1} sign(y_j) on y = xi / max|xi_j|, then 1-homogeneity
        scale = np.where(H > 0, H, 1.0) ** (2.0 - s)
        a = scale[..., None] * np.abs(y) ** (s - 1.0) * np.sign(y)
        return np.where(m[..., None] > 0, m[..., None] * a, 0.0)

    def flux_jacobian(self, xi, eps: float = 0.0):
        """Hessian of ``H^2 / 2`` at each point, shape ``(..., N, N)``.

        For ``pnorm`` with ``s < 2`` the diagonal is singular on the axes; ``eps``
        regularises ``|xi_j|`` there.  The matrices are symmetric positive
        semidefinite.
        """
        xi = self._check(xi)
        n = self.dim
        kind = self.spec.kind
        if kind == "euclidean" or n == 1 and kind == "pnorm":
            return np.broadcast_to(np.eye(n), xi.shape + (n,)).copy()
        if kind == "aniso":
            return np.broadcast_to(self._A, xi.shape + (n,)).copy()
        s = self.spec.s
        _, y = _normalise(xi)  # the Hessian is 0-homogeneous
        H = _pnorm(y, s)
        ax = np.abs(y)
        Hs = np.where(H > 0, H, 1.0)
        g = ax ** (s - 1.0) * np.sign(y)
        rank1 = (2.0 - s) * Hs[..., None, None] ** (2.0 - 2.0 * s) * g[..., :, None] * g[..., None, :]
        diag = (s - 1.0) * Hs[..., None] ** (2.0 - s) * (ax + eps * Hs[..., None]) ** (s - 2.0)
        J = rank1 + diag[..., :, None] * np.eye(n)
        zero = H == 0
        if np.any(zero):
            J[zero] = np.eye(n)
        return J

    # -- balls ---------------------------------------------------------------

    def in_ball(self, x, R: float):
        if R <= 0:
            raise NonpositiveRadius(f"radius must be positive, got {R}")
        return self.dual_eval(x) < R

    def ball_volume(self, R: float) -> float:
        """Lebesgue measure of ``{H_0 < R}``."""
        if R <= 0:
            raise NonpositiveRadius(f"radius must be positive, got {R}")
        kind = self.spec.kind
        if self.dim == 1:
            if kind == "aniso":
                return 2.0 * R * math.sqrt(self._A[0, 0])
            return 2.0 * R
        if kind == "euclidean":
            return math.pi * R * R
        if kind == "aniso":
            return math.pi * R * R * math.sqrt(np.linalg.det(self._A))
        p = self._s_dual
        quarter, _ = integrate.quad(lambda t: (1.0 - t**p) ** (1.0 / p), 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
        return 4.0 * quarter * R * R

    def axis_extent(self) -> np.ndarray:
        """``max |x_i|`` over the dual unit ball, which equals ``H(e_i)``."""
        return self.eval(np.eye(self.dim))

    def equivalence_constants(self) -> tuple[float, float]:
        """``(c_lo, c_hi)`` with ``c_lo |xi| <= H(xi) <= c_hi |xi|``."""
        kind = self.spec.kind
        if kind == "euclidean" or self.dim == 1 and kind == "pnorm":
            return 1.0, 1.0
        if kind == "aniso":
            lam = np.linalg.eigvalsh(self._A)
            return float(math.sqrt(lam[0])), float(math.sqrt(lam[-1]))
        diag = 2.0 ** (1.0 / self.spec.s - 0.5)
        return (1.0, diag) if self.spec.s <= 2 else (diag, 1.0)

    def flux_bound(self) -> float:
        """Constant C with ``|a(xi)| <= C |xi|``."""
        return self.equivalence_constants()[1] ** 2

    # -- self checks ----------------------------------------------------------

    def verify_identities(self, n_samples: int = 1000, seed: int = 0) -> IdentityReport:
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        rng = np.random.default_rng(seed)
        n = self.dim

        def sample():
            pts = rng.standard_normal((n_samples, n))
            return pts * 10.0 ** rng.uniform(-3, 3, size=(n_samples, 1))

        xi, eta, x = sample(), sample(), sample()
        Hxi = self.eval(xi)
        nrm = np.linalg.norm
        dual_excess = (np.abs(np.sum(x * xi, axis=-1)) - self.dual_eval(x) * Hxi) / (nrm(x, axis=-1) * nrm(xi, axis=-1))
        g = self.grad(xi)
        euler = np.abs(np.sum(xi * g, axis=-1) - Hxi) / Hxi
        dual_grad = np.abs(self.dual_eval(g) - 1.0)
        a_xi, a_eta = self.flux(xi), self.flux(eta)
        flux_dual = np.abs(self.dual_eval(a_xi) - Hxi) / Hxi
        mono = np.sum((a_xi - a_eta) * (xi - eta), axis=-1) / (nrm(xi, axis=-1) + nrm(eta, axis=-1)) ** 2
        return IdentityReport(
            spec=str(self.spec),
            n_samples=n_samples,
            duality_excess=float(dual_excess.max()),
            euler_residual=float(euler.max()),
            dual_grad_residual=float(dual_grad.max()),
            flux_dual_residual=float(flux_dual.max()),
            monotonicity_min=float(mono.min()),
        )


def _normalise(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(m, x / m)`` with ``m = max |x_j|`` (``x`` itself where ``m = 0``)."""
    m = np.abs(x).max(axis=-1)
    safe = np.where(m > 0, m, 1.0)
    return m, x / safe[..., None]


def _quadratic(x: np.ndarray, A: np.ndarray) -> np.ndarray:
    m, y = _normalise(x)
    return m * np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", y, A, y), 0.0))


def _pnorm(x: np.ndarray, s: float) -> np.ndarray:
    ax = np.abs(x)
    m = ax.max(axis=-1)
    safe = np.where(m > 0, m, 1.0)
    # scale by the max component so large s does not overflow
    return m * np.sum((ax / safe[..., None]) ** s, axis=-1) ** (1.0 / s)
