"""Numerical differentiation via the integration operator with a B-spline prior.

The forward operator is Kf(x) = integral of f from 0 to x on [0,1].  Functions
are expanded in B-spline bases on a uniform extended knot grid (spacing 1/m,
knots continuing (q-1) cells past each end of [0,1]).  On that grid the
derivative of an order-q basis function is exactly

    B_j' = m * (L_{j-1} - L_j),

with L the order-(q-1) basis on the same grid, so a coefficient vector ``a``
for Kf in the order-q basis corresponds exactly to

    f = m * sum_j (a_{j+1} - a_j) L_j,

and the pair (f, Kf) satisfies the operator identity with no quadrature.  The
exact scale is the cell count m = J - q + 1; asymptotic statements are often
written with J instead since J/m -> 1.

Posterior inference over the coefficients is exact conjugate linear-Gaussian
algebra, model-averaged over a grid of dimensions J by marginal likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.linalg import cho_factor, cho_solve, eigvalsh
from scipy.stats import geom, poisson

from .streams import NOISE, POSTERIOR_DRAWS, PRIOR_DRAWS, substream

GEOMETRIC = "geometric"
POISSON = "poisson"


class QuadratureNonconvergence(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class SingularSystem(RuntimeError):
    """Regression normal equations numerically singular even with ridge."""


@dataclass(frozen=True)
class BSplineBasis:
    """Order-q B-spline basis on m uniform cells of [0,1], knots extended.

    J = m + q - 1 basis functions are active on (0,1]; each is nonnegative,
    supported on at most q consecutive cells, and they sum to one on (0,1].
    Cells follow the left-open convention ((i-1)/m, i/m].
    """

    q: int
    m: int
    knots: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.q < 1 or self.m < 1:
            raise ValueError("need order q >= 1 and m >= 1 cells")
        k = np.arange(self.m + 2 * self.q - 1, dtype=float)
        object.__setattr__(self, "knots", (k - (self.q - 1)) / self.m)

    @property
    def J(self) -> int:
        return self.m + self.q - 1

    @property
    def deriv_scale(self) -> int:
        """Exact constant in the derivative identity (the cell count m)."""
        return self.m

    def lower_order(self) -> "BSplineBasis":
        if self.q < 2:
            raise ValueError("no order-0 basis")
        return BSplineBasis(self.q - 1, self.m)

    def _cells(self, x: np.ndarray) -> np.ndarray:
        # cell index s with knots[s] < x <= knots[s+1]
        s = np.searchsorted(self.knots, x, side="left") - 1
        return np.clip(s, self.q - 1, self.m + self.q - 2)

    def active_values(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Values of the q active functions at each x.

        Returns (first_index, values) with values[i, k] = B_{first[i]+k}(x_i).
        Local triangular recursion; only the q nonzero functions are touched.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        s = self._cells(x)
        q = self.q
        vals = np.zeros((x.size, q))
        vals[:, 0] = 1.0
        left = np.empty((x.size, q))
        right = np.empty((x.size, q))
        for r in range(1, q):
            left[:, r] = x - self.knots[s + 1 - r]
            right[:, r] = self.knots[s + r] - x
            saved = np.zeros(x.size)
            for k in range(r):
                temp = vals[:, k] / (right[:, k + 1] + left[:, r - k])
                vals[:, k] = saved + right[:, k + 1] * temp
                saved = left[:, r - k] * temp
            vals[:, r] = saved
        return s - (q - 1), vals

    def design_matrix(self, x) -> np.ndarray:
        """Dense (len(x), J) matrix of basis values."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        first, vals = self.active_values(x)
        out = np.zeros((x.size, self.J))
        cols = first[:, None] + np.arange(self.q)[None, :]
        keep = (cols >= 0) & (cols < self.J)
        rows = np.broadcast_to(np.arange(x.size)[:, None], cols.shape)
        out[rows[keep], cols[keep]] = vals[keep]
        return out

    def eval_one(self, j: int, x) -> np.ndarray | float:
        """Value of basis function j (0-based) at x."""
        if not 0 <= j < self.J:
            raise ValueError(f"function index {j} outside 0..{self.J - 1}")
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        first, vals = self.active_values(x_arr)
        k = j - first
        out = np.where((k >= 0) & (k < self.q), vals[np.arange(x_arr.size), np.clip(k, 0, self.q - 1)], 0.0)
        return out if np.ndim(x) else float(out[0])


def bspline_eval(basis: BSplineBasis, j: int, x):
    """Value of B_{j,q} at x (0-based j)."""
    return basis.eval_one(j, x)


def bspline_derivative(basis: BSplineBasis, j: int, x):
    """Exact derivative of B_{j,q}: m * (L_{j-1}(x) - L_j(x)) on the shared grid."""
    if basis.q < 2:
        raise ValueError("derivative needs order q >= 2")
    low = basis.lower_order()
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    lo = low.eval_one(j - 1, x_arr) if 0 <= j - 1 < low.J else np.zeros(x_arr.size)
    hi = low.eval_one(j, x_arr) if 0 <= j < low.J else np.zeros(x_arr.size)
    out = basis.deriv_scale * (np.asarray(lo) - np.asarray(hi))
    return out if np.ndim(x) else float(out[0])


def difference_matrix(J: int) -> np.ndarray:
    """(J-1) x J first-difference matrix mapping a to (a_{j+1} - a_j)."""
    D = np.zeros((J - 1, J))
    D[np.arange(J - 1), np.arange(J - 1)] = -1.0
    D[np.arange(J - 1), np.arange(1, J)] = 1.0
    return D


def spline_f_values(a: np.ndarray, basis: BSplineBasis, x) -> np.ndarray:
    """f(x) = m sum_j (a_{j+1}-a_j) L_j(x): the pre-image of the order-q expansion."""
    a = np.asarray(a, dtype=float)
    if a.size != basis.J:
        raise ValueError("coefficient length must equal J")
    low = basis.lower_order()
    w = basis.deriv_scale * np.diff(a)
    return low.design_matrix(x) @ w


def volterra_apply_spline(a: np.ndarray, basis: BSplineBasis) -> Callable[[np.ndarray], np.ndarray]:
    """Kf as the exact order-q expansion, pinned to Kf(0) = 0.

    Kf(x) = sum_j a_j (B_j(x) - B_j(0)); its derivative is exactly the
    spline f built from the differences of ``a``.
    """
    a = np.asarray(a, dtype=float)
    if a.size != basis.J:
        raise ValueError("coefficient length must equal J")
    at_zero = float((basis.design_matrix(np.array([0.0])) @ a)[0])

    def kf(x):
        out = basis.design_matrix(x) @ a - at_zero
        return out if np.ndim(x) else float(out[0])

    return kf


def volterra_apply_numeric(f: Callable, x: float, tol: float = 1e-10, breakpoints=None) -> float:
    """Adaptive quadrature of the running integral of f from 0 to x.

    ``breakpoints`` (e.g. spline knots) let the integrator split at kinks of
    piecewise-polynomial integrands.
    """
    x = float(x)
    pts = None
    if breakpoints is not None:
        pts = [float(b) for b in np.asarray(breakpoints) if 0.0 < b < x]
    val, err = integrate.quad(f, 0.0, x, epsabs=tol * 1e-2, epsrel=1e-12, limit=500, points=pts)
    if err > tol:
        raise QuadratureNonconvergence(f"quadrature error {err:.2e} above {tol:.2e}")
    return float(val)


@dataclass(frozen=True)
class RegressionDesign:
    """Fixed design points in [0,1] with known noise level."""

    points: np.ndarray
    sigma: float

    def __post_init__(self):
        x = np.asarray(self.points, dtype=float)
        if x.ndim != 1 or x.size < 1:
            raise ValueError("need at least one design point")
        if np.any(np.diff(x) < 0):
            raise ValueError("design points must be sorted")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        object.__setattr__(self, "points", x)

    @property
    def n(self) -> int:
        return self.points.size

    @staticmethod
    def uniform(n: int, sigma: float) -> "RegressionDesign":
        return RegressionDesign(np.arange(1, n + 1) / n, sigma)


def empirical_norm(f: Callable, g: Callable, design: RegressionDesign) -> float:
    """Root mean square difference over the design points."""
    d = np.asarray(f(design.points), dtype=float) - np.asarray(g(design.points), dtype=float)
    return float(np.sqrt(np.mean(d**2)))


@dataclass(frozen=True)
class GramMatrix:
    """Normalised Gram matrix (1/n) B^T B of basis values at the design."""

    order: int
    matrix: np.ndarray
    eig_min: float
    eig_max: float

    @property
    def bandwidth(self) -> int:
        nz = np.abs(self.matrix) > 1e-15
        idx = np.nonzero(nz)
        return int(np.max(np.abs(idx[0] - idx[1]))) if idx[0].size else 0


def gram_matrix(design: RegressionDesign, basis: BSplineBasis) -> GramMatrix:
    B = basis.design_matrix(design.points)
    G = (B.T @ B) / design.n
    G = 0.5 * (G + G.T)
    eigs = eigvalsh(G)
    return GramMatrix(basis.q, G, float(eigs[0]), float(eigs[-1]))


@dataclass(frozen=True)
class DesignConditionReport:
    d1: tuple[float, float]
    d2: tuple[float, float]
    threshold: float
    passed: bool


def check_design_conditions(
    design: RegressionDesign,
    basis: BSplineBasis,
    kappa_cond: float = 100.0,
) -> DesignConditionReport:
    """Scaled eigenvalue extremes of the order-q and order-(q-1) Gram matrices.

    Both J * Gram_q and (J-1) * Gram_{q-1} should have eigenvalues in a fixed
    band [1/kappa_cond, kappa_cond] independent of J; the band default is wide
    because boundary basis functions keep only part of their mass in [0,1].
    """
    J = basis.J
    g1 = gram_matrix(design, basis)
    g2 = gram_matrix(design, basis.lower_order())
    d1 = (J * g1.eig_min, J * g1.eig_max)
    d2 = ((J - 1) * g2.eig_min, (J - 1) * g2.eig_max)
    lo, hi = 1.0 / kappa_cond, kappa_cond
    ok = all(lo <= v <= hi for v in (*d1, *d2))
    return DesignConditionReport(d1, d2, kappa_cond, ok)


@dataclass(frozen=True)
class SplinePrior:
    """Prior over (J, a): dimension law Pi_J and iid N(0, tau^2) coefficients.

    ``pi_j`` is geometric (tail exponent t = 0) or poisson (t = 1); J is
    conditioned on J >= q so the basis has at least one cell.
    """

    q: int = 3
    pi_j: str = GEOMETRIC
    pi_j_param: float = 0.3
    tau: float = 1.0

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("order q >= 2 required")
        if self.pi_j not in (GEOMETRIC, POISSON):
            raise ValueError(f"unknown dimension law {self.pi_j!r}")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")

    @property
    def tail_exponent(self) -> float:
        return 0.0 if self.pi_j == GEOMETRIC else 1.0

    def log_pmf(self, j) -> np.ndarray:
        j = np.asarray(j)
        if self.pi_j == GEOMETRIC:
            return geom.logpmf(j, self.pi_j_param)
        return poisson.logpmf(j, self.pi_j_param)

    def draw_dimension(self, rng: np.random.Generator) -> int:
        while True:
            if self.pi_j == GEOMETRIC:
                j = int(rng.geometric(self.pi_j_param))
            else:
                j = int(rng.poisson(self.pi_j_param))
            if j >= self.q:
                return j

    def basis_for(self, J: int) -> BSplineBasis:
        return BSplineBasis(self.q, J - self.q + 1)

    def condition_constants(self, j_max: int = 1000) -> tuple[float, float]:
        """Empirical (c_d, c_u) for the dimension-law envelope on 2 <= j <= j_max.

        c_d is the smallest constant with Pi(j <= J <= 2j) >= exp(-c_d j (log j)^t);
        c_u the largest with Pi(J > j) <= exp(-c_u j (log j)^t).  Window masses
        are computed in log space (single-point lower bound where the exact
        difference underflows), so the constants stay finite deep in the tail.
        """
        t = self.tail_exponent
        js = np.arange(2, j_max + 1)
        scale = js * np.log(js) ** t
        dist = geom if self.pi_j == GEOMETRIC else poisson
        arg = self.pi_j_param
        exact = dist.cdf(2 * js, arg) - dist.cdf(js - 1, arg)
        log_window = np.where(exact > 0, np.log(np.where(exact > 0, exact, 1.0)),
                              dist.logpmf(js, arg))
        log_tail = dist.logsf(js, arg)
        c_d = float(np.max(-log_window / scale))
        c_u = float(np.min(-log_tail / scale))
        return c_d, c_u


def draw_spline_prior(
    prior: SplinePrior,
    seed: int,
    replication: int = 0,
    forced_J: Optional[int] = None,
) -> tuple[int, np.ndarray, Callable]:
    """Reproducible draw (J, a, f) from the spline prior."""
    rng = substream(seed, PRIOR_DRAWS, replication)
    J = int(forced_J) if forced_J is not None else prior.draw_dimension(rng)
    a = prior.tau * rng.standard_normal(J)
    basis = prior.basis_for(J)

    def f(x):
        return spline_f_values(a, basis, x)

    return J, a, f


@dataclass(frozen=True)
class SplineComponent:
    """Posterior block for one dimension J."""

    J: int
    basis: BSplineBasis
    mean: np.ndarray
    cov_chol: np.ndarray
    log_ml: float
    ridged: bool


@dataclass(frozen=True)
class SplinePosterior:
    """Gaussian-mixture posterior over spline coefficients, weighted over J."""

    design: RegressionDesign
    prior: SplinePrior
    components: tuple[SplineComponent, ...]
    weights: np.ndarray

    @property
    def J_grid(self) -> np.ndarray:
        return np.array([c.J for c in self.components])

    def component_matrices(self, points: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """(Kf design, f design) value matrices at the given points, per J."""
        out = []
        for c in self.components:
            B = c.basis.design_matrix(points)
            X = B - c.basis.design_matrix(np.array([0.0]))
            low = c.basis.lower_order().design_matrix(points)
            F = low @ (c.basis.deriv_scale * difference_matrix(c.J))
            out.append((X, F))
        return out

    def draw_values(
        self,
        points: np.ndarray,
        draws: int,
        seed: int,
        replication: int = 0,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Posterior draws of (Kf values, f values) at the given points.

        Returns arrays of shape (draws, len(points)).
        """
        rng = substream(seed, POSTERIOR_DRAWS, replication)
        cells = rng.choice(len(self.components), size=draws, p=self.weights)
        mats = self.component_matrices(np.asarray(points, dtype=float))
        kf = np.empty((draws, len(points)))
        fv = np.empty((draws, len(points)))
        for idx in np.unique(cells):
            c = self.components[idx]
            rows = np.nonzero(cells == idx)[0]
            z = rng.standard_normal((rows.size, c.J))
            coeffs = c.mean + z @ c.cov_chol.T
            X, F = mats[idx]
            kf[rows] = coeffs @ X.T
            fv[rows] = coeffs @ F.T
        return kf, fv


def spline_posterior(
    design: RegressionDesign,
    y: np.ndarray,
    prior: SplinePrior,
    J_grid,
) -> SplinePosterior:
    """Exact conjugate posterior per J with marginal-likelihood weights.

    Per J the regressors are the Kf expansion values at the design points;
    weights combine the dimension prior with the Gaussian evidence and are
    normalised over the grid.  Near-singular normal equations are ridged
    (1e-10 * trace/J) and flagged on the component.
    """
    y = np.asarray(y, dtype=float)
    if y.size != design.n:
        raise ValueError("y length must match the design")
    sig2 = design.sigma**2
    tau2 = prior.tau**2
    comps = []
    log_scores = []
    for J in J_grid:
        J = int(J)
        if J < prior.q:
            raise ValueError(f"J = {J} below the basis order {prior.q}")
        basis = prior.basis_for(J)
        B = basis.design_matrix(design.points)
        X = B - basis.design_matrix(np.array([0.0]))
        A = sig2 * np.eye(J) + tau2 * (X.T @ X)
        ridged = False
        try:
            cond = np.linalg.cond(A)
        except np.linalg.LinAlgError:
            cond = np.inf
        if not np.isfinite(cond) or cond > 1e12:
            A = A + (1e-10 * np.trace(A) / J) * np.eye(J)
            ridged = True
        try:
            c_factor = cho_factor(A, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"normal equations singular at J={J}") from exc
        xty = X.T @ y
        mean = tau2 * cho_solve(c_factor, xty)
        # posterior covariance tau^2 sigma^2 A^(-1); store its cholesky
        Linv = np.linalg.inv(np.tril(c_factor[0]))
        cov = tau2 * sig2 * (Linv.T @ Linv)
        cov = 0.5 * (cov + cov.T)
        cov_chol = np.linalg.cholesky(cov + 1e-300 * np.eye(J))
        n = design.n
        logdet = (n - J) * np.log(sig2) + 2.0 * np.sum(np.log(np.diag(np.tril(c_factor[0]))))
        quad = (y @ y - tau2 * (xty @ cho_solve(c_factor, xty))) / sig2
        log_ml = -0.5 * (n * np.log(2.0 * np.pi) + logdet + quad)
        comps.append(SplineComponent(J, basis, mean, cov_chol, float(log_ml), ridged))
        log_scores.append(float(prior.log_pmf(J)) + log_ml)
    log_scores = np.asarray(log_scores)
    w = np.exp(log_scores - np.max(log_scores))
    w /= np.sum(w)
    return SplinePosterior(design, prior, tuple(comps), w)


def calibrate_inversion_constant(
    prior: SplinePrior,
    design: RegressionDesign,
    draws: int,
    seed: int,
    J_values=(8, 16, 32),
) -> float:
    """Measured max of ||f||_n / (J ||Kf||_n) over random coefficient draws.

    This is the empirical constant in the spline inversion inequality; it has
    no closed-form value and is reported, never asserted against a number.
    """
    worst = 0.0
    rng = substream(seed, PRIOR_DRAWS, 9)
    for J in J_values:
        basis = prior.basis_for(int(J))
        low = basis.lower_order().design_matrix(design.points)
        F = low @ (basis.deriv_scale * difference_matrix(basis.J))
        B = basis.design_matrix(design.points)
        X = B - basis.design_matrix(np.array([0.0]))
        for _ in range(draws):
            a = rng.standard_normal(basis.J)
            fn = np.sqrt(np.mean((F @ a) ** 2))
            kn = np.sqrt(np.mean((X @ a) ** 2))
            if kn > 0:
                worst = max(worst, fn / (basis.J * kn))
    return worst


def spline_modulus_report(J: int, delta: float, constant: float) -> float:
    """Modulus bound constant * J * delta with the calibrated constant."""
    if delta < 0 or J < 1 or constant < 0:
        raise ValueError("need J >= 1, delta >= 0, constant >= 0")
    return constant * J * delta


@dataclass(frozen=True)
class TrigPoly:
    """Finite cosine series plus polynomial; closed under d/dx and integration.

    Terms are (amplitude, frequency, phase) triples for amp*cos(freq*x+phase);
    ``poly`` holds ascending polynomial coefficients.
    """

    terms: tuple[tuple[float, float, float], ...]
    poly: tuple[float, ...] = (0.0,)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.polynomial.polynomial.polyval(x, np.asarray(self.poly))
        for amp, freq, phase in self.terms:
            out = out + amp * np.cos(freq * x + phase)
        return out if out.ndim else float(out)

    def derivative(self) -> "TrigPoly":
        terms = tuple((amp * freq, freq, phase + 0.5 * np.pi) for amp, freq, phase in self.terms)
        p = np.asarray(self.poly)
        dp = tuple(np.polynomial.polynomial.polyder(p)) if p.size > 1 else (0.0,)
        return TrigPoly(terms, dp)

    def antiderivative(self) -> "TrigPoly":
        """Antiderivative vanishing at 0."""
        terms = tuple((amp / freq, freq, phase - 0.5 * np.pi) for amp, freq, phase in self.terms)
        p = np.polynomial.polynomial.polyint(np.asarray(self.poly))
        out = TrigPoly(terms, tuple(p))
        shift = out(0.0)
        poly = list(out.poly)
        poly[0] -= shift
        return TrigPoly(terms, tuple(poly))


def holder_quotient(values: np.ndarray, h: float, frac: float) -> float:
    """max |v_{i+l} - v_i| / (l h)^frac over all lags of an equispaced sample."""
    worst = 0.0
    n = values.size
    for lag in range(1, n):
        num = np.max(np.abs(values[lag:] - values[:-lag]))
        worst = max(worst, num / (lag * h) ** frac)
    return worst


def make_holder_truth(beta: float, L: float, k_terms: int = 8, grid: int = 2001) -> TrigPoly:
    """Truth of smoothness beta: a lacunary cosine profile, antidifferentiated
    for the integer part and rescaled so the grid-measured Hoelder-beta
    constant equals L.
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    if L < 0:
        raise ValueError("L must be >= 0")
    if L == 0.0:
        return TrigPoly(tuple(), (0.0,))
    b_int = int(np.ceil(beta)) - 1
    b_frac = beta - b_int
    base = TrigPoly(tuple((2.0 ** (-k * b_frac), 2.0**k * np.pi, 0.0) for k in range(1, k_terms + 1)))
    xs = np.linspace(0.0, 1.0, grid)
    measured = holder_quotient(base(xs), xs[1] - xs[0], b_frac)
    scale = L / measured
    out = TrigPoly(tuple((scale * a, f, p) for a, f, p in base.terms))
    for _ in range(b_int):
        out = out.antiderivative()
    return out
