"""Replicated contraction experiments, slope fits, and verification reports.

Each regime maps (n, replication) to a pair of posterior credible radii: one
for the direct problem (distance between noisy image reconstructions) and one
for the inverse problem (distance to the truth itself).  Radii are averaged
over replications per n and a log-log slope is fitted against the theoretical
rate exponent.  The inverse-bound report additionally measures tail-set
masses and checks that the measured inverse radius is dominated by the radius
implied by the modulus bound, replication by replication.

All randomness is derived from the config seed through per-(n, replication)
substreams, so results are bit-reproducible and independent of execution
order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import deconv as dc
from . import rates, seq_model, spline_volterra as sv
from .rates import DECONV, MILD_SEQ, SEVERE_SEQ, VOLTERRA
from .streams import NOISE, substream

REGIME_CHOICES = (MILD_SEQ, SEVERE_SEQ, VOLTERRA, DECONV)


def _rep_key(n_index: int, replication: int) -> int:
    """Substream label unique per (n, replication) cell."""
    return (n_index << 20) + replication


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment configuration; every knob has a regime-sensible default."""

    regime: str = MILD_SEQ
    alpha: float = 1.0
    beta: float = 1.0
    p: float = 1.0
    gamma: float = 1.0
    xi: float = 0.0
    q: int = 3
    sigma: float = 0.25
    c_x: float = 0.25
    tau: float = 1.0
    radius: float = 1.0
    eta: float = 0.05
    head_n: int = 2**14
    n_grid: tuple[int, ...] = tuple(2**k for k in range(8, 17))
    replications: int = 50
    credible_level: float = 0.9
    draws_per_replication: int = 200
    seed: int = 1234
    M: float = 1.0
    tail_c: Optional[float] = None
    slope_tol: float = 0.07
    log_nuisance: bool = False
    j_grid_max: int = 256
    j_max_deconv: int = 64
    v_grid_size: int = 40
    v_min: float = 1e-3
    v_max: float = 10.0
    s_exponent: float = 2.0

    def __post_init__(self):
        if self.regime not in REGIME_CHOICES:
            raise ValueError(f"unknown regime {self.regime!r}")
        grid = tuple(int(n) for n in self.n_grid)
        if len(grid) < 4:
            raise ValueError("n_grid must have length >= 4 for slope fits")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.replications < 20:
            raise ValueError("replications must be >= 20")
        if not 0.0 < self.credible_level < 1.0:
            raise ValueError("credible_level must lie in (0,1)")
        if self.draws_per_replication < 100:
            raise ValueError("draws_per_replication must be >= 100")
        object.__setattr__(self, "n_grid", grid)

    @property
    def effective_tail_c(self) -> float:
        if self.tail_c is not None:
            return self.tail_c
        return 2.0 * (1.0 + 2.0 * self.alpha) / self.alpha

    def operator_spec(self) -> seq_model.IllPosedSpec:
        if self.regime == SEVERE_SEQ:
            return seq_model.IllPosedSpec(seq_model.SEVERE, p=self.p, gamma=self.gamma)
        return seq_model.IllPosedSpec(seq_model.MILD, p=self.p, C=1.0)

    def sequence_prior(self, n: int) -> seq_model.GaussianProductPrior:
        if self.regime == SEVERE_SEQ:
            k_n = rates.severe_k_n(self.alpha, self.xi, self.gamma, self.p, n)
            return seq_model.GaussianProductPrior(
                seq_model.SEVERE, alpha=self.alpha, xi=self.xi, p_exp=self.p,
                truncation=min(k_n, self.head_n),
            )
        return seq_model.GaussianProductPrior(seq_model.MILD, alpha=self.alpha)

    def tail_set(self, n: int) -> rates.TailSet:
        if self.regime == SEVERE_SEQ:
            k_n = rates.severe_k_n(self.alpha, self.xi, self.gamma, self.p, n)
            return rates.TailSet(k_n=k_n, rho_n=1.0, c=0.0)
        den = 1.0 + 2.0 * self.alpha + 2.0 * self.p
        k_n = max(1, int(np.floor(n ** (1.0 / den) + 0.5)))
        rho_n = float(n) ** (-min(self.alpha, self.beta) / den)
        return rates.TailSet(k_n=k_n, rho_n=rho_n, c=self.effective_tail_c)

    def theory(self) -> rates.RateExponents:
        return rates.rate_exponent(
            self.regime, alpha=self.alpha, beta=self.beta, p=self.p,
            gamma=self.gamma, xi=self.xi,
        )


def default_config(regime: str) -> ExperimentConfig:
    """Regime defaults matching the acceptance setups."""
    if regime == MILD_SEQ:
        return ExperimentConfig(regime=MILD_SEQ)
    if regime == SEVERE_SEQ:
        return ExperimentConfig(
            regime=SEVERE_SEQ, alpha=1.0, xi=0.0, gamma=1.0, p=1.0,
            n_grid=tuple(2**k for k in range(8, 15)),
        )
    if regime == VOLTERRA:
        # the lacunary profile spends its smoothness budget at the top
        # frequency, so O(1) amplitude needs a Hoelder constant ~ 50
        return ExperimentConfig(
            regime=VOLTERRA, q=3, beta=1.0, sigma=0.1, radius=50.0,
            replications=20, slope_tol=0.10,
            n_grid=tuple(2**k for k in range(8, 15)),
        )
    if regime == DECONV:
        return ExperimentConfig(
            regime=DECONV, beta=1.0, p=2.0, sigma=0.1, replications=20,
            n_grid=tuple(2**k for k in range(6, 13)),
        )
    raise ValueError(f"unknown regime {regime!r}")


@dataclass(frozen=True)
class ResultRow:
    """One replication cell; vacuous fields are NaN."""

    regime: str
    n: int
    replication: int
    radius_direct: float
    radius_inverse: float
    sn_mass: float
    implied_radius: float
    seed: int


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    theoretical_exponent: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.slope + self.theoretical_exponent) <= self.tolerance


@dataclass(frozen=True)
class RateFitResult:
    config: ExperimentConfig
    rows: tuple[ResultRow, ...]
    per_n: tuple[dict, ...]
    inverse_fit: SlopeFit
    direct_fit: SlopeFit

    @property
    def passed(self) -> bool:
        return self.inverse_fit.passed and self.direct_fit.passed


def fit_loglog(ns, values, log_nuisance: bool = False) -> tuple[float, float]:
    """OLS slope (and stderr) of log(values) on log(n).

    With ``log_nuisance`` an extra log(log n) regressor absorbs polylog
    factors; the returned slope is still the log-n coefficient.
    """
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    cols = [np.ones_like(x), x]
    if log_nuisance:
        cols.append(np.log(x))
    X = np.column_stack(cols)
    coef, res, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = max(x.size - X.shape[1], 1)
    resid = y - X @ coef
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return float(coef[1]), float(np.sqrt(cov[1, 1]))


def _seq_replication(cfg: ExperimentConfig, f0, n: int, key: int) -> tuple[float, float]:
    spec = cfg.operator_spec()
    prior = cfg.sequence_prior(n)
    obs = seq_model.observe(f0, spec, n, cfg.head_n, cfg.seed, replication=key)
    post_kf = seq_model.posterior(prior, obs, spec, seq_model.KFSPACE)
    post_f = seq_model.posterior(prior, obs, spec, seq_model.FSPACE)
    # 2*key / 2*key+1 keep the two radius streams disjoint across cells
    rad_dir = seq_model.credible_radius(
        post_kf, f0, spec, cfg.credible_level, cfg.draws_per_replication, cfg.seed, 2 * key
    )
    rad_inv = seq_model.credible_radius(
        post_f, f0, spec, cfg.credible_level, cfg.draws_per_replication, cfg.seed, 2 * key + 1
    )
    return rad_dir, rad_inv


def _volterra_j_grid(cfg: ExperimentConfig, n: int) -> tuple[int, ...]:
    grid = []
    j = 4
    while j <= min(cfg.j_grid_max, max(8, n // 4)):
        if j >= cfg.q:
            grid.append(j)
        j *= 2
    return tuple(grid)


def _volterra_replication(cfg, design, truth_vals, ktruth_vals, n: int, key: int):
    rng = substream(cfg.seed, NOISE, key)
    y = ktruth_vals + cfg.sigma * rng.standard_normal(n)
    prior = sv.SplinePrior(q=cfg.q, tau=cfg.tau)
    post = sv.spline_posterior(design, y, prior, _volterra_j_grid(cfg, n))
    kf, fv = post.draw_values(design.points, cfg.draws_per_replication, cfg.seed, key)
    d_dir = np.sqrt(np.mean((kf - ktruth_vals) ** 2, axis=1))
    d_inv = np.sqrt(np.mean((fv - truth_vals) ** 2, axis=1))
    level = cfg.credible_level
    return float(np.quantile(d_dir, level)), float(np.quantile(d_inv, level))


def _deconv_grids(cfg: ExperimentConfig):
    j_grid = []
    j = 1
    while j <= cfg.j_max_deconv:
        j_grid.append(j)
        j *= 2
    v_grid = np.geomspace(cfg.v_min, cfg.v_max, cfg.v_grid_size)
    return tuple(j_grid), v_grid


def _deconv_replication(cfg, cell_cache, bump, points, kf0_vals, f0_vals, n: int, key: int):
    rng = substream(cfg.seed, NOISE, key)
    y = kf0_vals + cfg.sigma * rng.standard_normal(points.size)
    post = dc.deconv_posterior_from_cache(cell_cache, y)
    kf, coeffs = post.draw_kf_values(cfg.draws_per_replication, cfg.seed, key)
    d_dir = np.sqrt(np.mean((kf - kf0_vals) ** 2, axis=1))
    # inverse distances in the design norm: the regression metric restricted
    # to where the data lives (global L2 is dominated by prior mass at nodes
    # outside the design window at desk scale)
    f_mats: dict[int, np.ndarray] = {}
    d_inv = np.empty(len(coeffs))
    for i, (cell, w) in enumerate(coeffs):
        if cell not in f_mats:
            comp = post.components[cell]
            d = points[:, None] - comp.nodes[None, :]
            f_mats[cell] = np.exp(-0.5 * (d / comp.v) ** 2) / np.sqrt(2.0 * np.pi * comp.v**2)
        d_inv[i] = np.sqrt(np.mean((f_mats[cell] @ w - f0_vals) ** 2))
    level = cfg.credible_level
    return float(np.quantile(d_dir, level)), float(np.quantile(d_inv, level))


def run_contraction_experiment(cfg: ExperimentConfig) -> RateFitResult:
    """Replicate observe -> posterior -> credible radius over the n grid and
    fit log-log slopes for the direct and inverse radii."""
    rows = []
    per_n = []
    theory = cfg.theory()
    if cfg.regime in (MILD_SEQ, SEVERE_SEQ):
        f0 = seq_model.make_truth(cfg.beta, cfg.radius, cfg.eta, cfg.head_n)
    elif cfg.regime == VOLTERRA:
        truth = sv.make_holder_truth(cfg.beta, cfg.radius)
        ktruth = truth.antiderivative()
    else:
        kernel = dc.ConvolutionKernel(dc.LAPLACE_P2)
        priorspec = dc.MixturePriorSpec(
            s=cfg.s_exponent, j_max=cfg.j_max_deconv, c_x=cfg.c_x, v_max=cfg.v_max
        )
        bump = dc.sobolev_bump_truth(int(cfg.beta), cfg.radius)
    for n_idx, n in enumerate(cfg.n_grid):
        if cfg.regime == VOLTERRA:
            design = sv.RegressionDesign.uniform(n, cfg.sigma)
            truth_vals = truth(design.points)
            ktruth_vals = ktruth(design.points)
        elif cfg.regime == DECONV:
            points = dc.deconv_design_points(n, cfg.c_x)
            kf0_vals = dc.bump_kf_values(kernel, bump, points)
            f0_vals = bump(points)
            j_grid, v_grid = _deconv_grids(cfg)
            cell_cache = dc.deconv_cell_cache(
                points, cfg.sigma, kernel, priorspec, j_grid, v_grid, n_ctx=n
            )
        dir_list = []
        inv_list = []
        for rep in range(cfg.replications):
            key = _rep_key(n_idx, rep)
            if cfg.regime in (MILD_SEQ, SEVERE_SEQ):
                rad_dir, rad_inv = _seq_replication(cfg, f0, n, key)
            elif cfg.regime == VOLTERRA:
                rad_dir, rad_inv = _volterra_replication(
                    cfg, design, truth_vals, ktruth_vals, n, key
                )
            else:
                rad_dir, rad_inv = _deconv_replication(
                    cfg, cell_cache, bump, points, kf0_vals, f0_vals, n, key
                )
            dir_list.append(rad_dir)
            inv_list.append(rad_inv)
            rows.append(ResultRow(cfg.regime, n, rep, rad_dir, rad_inv,
                                  float("nan"), float("nan"), key))
        dir_arr = np.asarray(dir_list)
        inv_arr = np.asarray(inv_list)
        per_n.append({
            "n": n,
            "mean_direct": float(dir_arr.mean()),
            "se_direct": float(dir_arr.std(ddof=1) / np.sqrt(dir_arr.size)),
            "mean_inverse": float(inv_arr.mean()),
            "se_inverse": float(inv_arr.std(ddof=1) / np.sqrt(inv_arr.size)),
        })
    ns = [d["n"] for d in per_n]
    slope_inv, se_inv = fit_loglog(ns, [d["mean_inverse"] for d in per_n], cfg.log_nuisance)
    slope_dir, se_dir = fit_loglog(ns, [d["mean_direct"] for d in per_n], cfg.log_nuisance)
    inverse_fit = SlopeFit(slope_inv, se_inv, theory.inverse_exponent, cfg.slope_tol)
    direct_fit = SlopeFit(slope_dir, se_dir, theory.direct_exponent, cfg.slope_tol)
    return RateFitResult(cfg, tuple(rows), tuple(per_n), inverse_fit, direct_fit)


@dataclass(frozen=True)
class InverseBoundReport:
    """Per-replication comparison of measured vs implied inverse radii."""

    config: ExperimentConfig
    n: int
    rows: tuple[ResultRow, ...]
    prior_sn_mass: rates.McEstimate
    hold_fraction: float
    passed: bool


def run_inverse_bound_report(cfg: ExperimentConfig, n: Optional[int] = None) -> InverseBoundReport:
    """Measure both sides of the radius transfer at a single n.

    For each replication: the direct credible radius feeds the modulus bound
    (scaled by M) to give an implied inverse radius, which must dominate the
    measured inverse radius; the tail-set masses quantify how much posterior
    sits outside the inversion-stable set.  Passes when the domination holds
    in at least 95% of replications.
    """
    if cfg.regime not in (MILD_SEQ, SEVERE_SEQ):
        raise ValueError("inverse-bound report runs in the sequence regimes")
    n = int(n if n is not None else max(cfg.n_grid))
    n_idx = len(cfg.n_grid) + 7  # distinct substream block from the rate runs
    spec = cfg.operator_spec()
    prior = cfg.sequence_prior(n)
    f0 = seq_model.make_truth(cfg.beta, cfg.radius, cfg.eta, cfg.head_n)
    ts = cfg.tail_set(n)
    f0_norm_s = seq_model.sobolev_norm(f0, cfg.beta)
    if ts.c > 0:
        prior_mass = rates.prior_mass_tail_mc(prior, ts, draws=10**5,
                                              N=cfg.head_n, seed=cfg.seed)
    else:
        prior_mass = rates.McEstimate(0.0, 0.0, 0)
    rows = []
    holds = 0
    for rep in range(cfg.replications):
        key = _rep_key(n_idx, rep)
        obs = seq_model.observe(f0, spec, n, cfg.head_n, cfg.seed, replication=key)
        post_kf = seq_model.posterior(prior, obs, spec, seq_model.KFSPACE)
        post_f = seq_model.posterior(prior, obs, spec, seq_model.FSPACE)
        rad_dir = seq_model.credible_radius(
            post_kf, f0, spec, cfg.credible_level, cfg.draws_per_replication, cfg.seed, 2 * key
        )
        rad_inv = seq_model.credible_radius(
            post_f, f0, spec, cfg.credible_level, cfg.draws_per_replication, cfg.seed, 2 * key + 1
        )
        # posterior mass outside the tail set, from fresh posterior draws
        rng = substream(cfg.seed, NOISE, key, 2)
        z = rng.standard_normal((cfg.draws_per_replication, cfg.head_n))
        draws = post_f.mean + z * np.sqrt(post_f.var)
        tail_sq = np.sum(draws[:, ts.k_n:] ** 2, axis=1)
        sn_mass = float(np.mean(tail_sq > ts.budget))
        implied = rates.implied_inverse_radius(
            lambda d: rates.modulus_upper_bound(ts, spec, f0_norm_s, cfg.beta, d),
            cfg.M * rad_dir,
        )
        holds += int(rad_inv <= implied)
        rows.append(ResultRow(cfg.regime, n, rep, rad_dir, rad_inv, sn_mass, implied, key))
    frac = holds / cfg.replications
    return InverseBoundReport(cfg, n, tuple(rows), prior_mass, frac, frac >= 0.95)


@dataclass(frozen=True)
class LemmaCell:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class LemmaSuiteReport:
    regime: str
    cells: tuple[LemmaCell, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cells)


def _mild_lemma_cells(seed: int, draws: int) -> list[LemmaCell]:
    cells = []
    alphas = (0.75, 1.0, 1.5)
    k_values = (10, 16, 24)
    for alpha in alphas:
        for k_n in k_values:
            c = 8.0
            rho_sq = max(0.01, 1.3 * 2.0 * (1.0 + 2.0 * alpha) / (alpha * c * k_n ** (2.0 * alpha)))
            if alpha == 1.0 and k_n == 10:
                rho_sq = 0.01
            ts = rates.TailSet(k_n=k_n, rho_n=np.sqrt(rho_sq), c=c)
            bound = rates.prior_mass_tail_bound(alpha, k_n, np.sqrt(rho_sq), c)
            prior = seq_model.GaussianProductPrior(seq_model.MILD, alpha=alpha)
            est = rates.prior_mass_tail_mc(prior, ts, draws=draws, N=1024, seed=seed)
            ok = est.estimate <= bound + 4.0 * est.stderr
            cells.append(LemmaCell(
                f"tail_mass[alpha={alpha},k={k_n}]", ok,
                f"mc={est.estimate:.3e}+-{est.stderr:.1e} bound={bound:.3e}",
            ))
    # small-ball sweep: -log mass may grow at most like the lemma exponent
    prior = seq_model.GaussianProductPrior(seq_model.MILD, alpha=1.0)
    spec = seq_model.IllPosedSpec(seq_model.MILD, p=1.0)
    f0 = seq_model.make_truth(1.0, 1.0, N=256)
    ratios = []
    for k, eps in enumerate((0.5, 0.35, 0.25)):
        est = rates.kl_smallball_mc(prior, f0, spec, eps, N=256, draws=draws,
                                    seed=seed + 11 + k, beta=1.0)
        if est.estimate <= 0:
            ratios = []
            break
        ratios.append(-np.log(est.estimate) / est.lemma_exponent)
    ok = bool(ratios) and all(r <= 2.0 * ratios[0] for r in ratios)
    cells.append(LemmaCell("kl_smallball_sweep", ok,
                           "ratios=" + ",".join(f"{r:.2f}" for r in ratios)))
    return cells


def _severe_lemma_cells(seed: int) -> list[LemmaCell]:
    cells = []
    alpha, xi, gamma, p = 1.0, 0.0, 1.0, 1.0
    for n in (10**4, 10**6):
        k_n = rates.severe_k_n(alpha, xi, gamma, p, n)
        prior = seq_model.GaussianProductPrior(
            seq_model.SEVERE, alpha=alpha, xi=xi, p_exp=p, truncation=k_n
        )
        spec = seq_model.IllPosedSpec(seq_model.SEVERE, p=p, gamma=gamma)
        f0 = seq_model.make_truth(1.0, 1.0, N=max(64, 4 * k_n))
        _, s_sum, t_sum = seq_model.expected_risk_components(prior, f0, spec, n)
        upper = k_n / n
        k_cont = rates.severe_k_n_continuous(alpha, xi, gamma, p, n)
        lower = np.floor(k_cont) / (4.0 * n)
        ok = lower <= s_sum <= upper and lower <= t_sum <= upper
        const_s = upper / s_sum
        const_t = upper / t_sum
        cells.append(LemmaCell(
            f"severe_sums[n={n}]", bool(ok),
            f"k_n={k_n} s_sum={s_sum:.3e} (const {const_s:.2f}) "
            f"t_sum={t_sum:.3e} (const {const_t:.2f}) bracket=[{lower:.3e},{upper:.3e}]",
        ))
        resid = abs(n * k_cont**-alpha * np.exp(-(xi + 2 * gamma) * k_cont**p) - 1.0)
        cells.append(LemmaCell(f"k_n_equation[n={n}]", resid <= 1e-8, f"residual={resid:.2e}"))
    return cells


def _deconv_prior_image_distances(
    priorspec: "dc.MixturePriorSpec",
    kernel: "dc.ConvolutionKernel",
    bump: "dc.PolyBump",
    n_ctx: int,
    draws: int,
    seed: int,
) -> np.ndarray:
    """||Kf - Kf0|| in L2(R) for prior draws, sharing one Fourier grid.

    Phase matrices are cached per dimension J, so the per-draw cost is a
    single matrix-vector product on the quadrature grid.
    """
    t, wq = dc.gauss_panels(0.0, 80.0, 0.25)
    lam2w = np.abs(kernel.fourier(t)) ** 2 * wq
    bump_hat = bump.fourier(t)
    phases: dict[int, np.ndarray] = {}
    out = np.empty(draws)
    for r in range(draws):
        mf = dc.draw_mixture_prior(priorspec, n_ctx, seed, replication=r)
        key = mf.nodes.size
        if key not in phases:
            phases[key] = np.exp(1j * t[:, None] * mf.nodes[None, :])
        fhat = np.exp(-0.5 * mf.v**2 * t**2) * (phases[key] @ mf.w)
        d2 = float(lam2w @ np.abs(fhat - bump_hat) ** 2) / np.pi
        out[r] = np.sqrt(max(d2, 0.0))
    return out


def _deconv_lemma_cells(seed: int, draws: int = 4000) -> list[LemmaCell]:
    cells = []
    kernel = dc.ConvolutionKernel(dc.LAPLACE_P2)
    priorspec = dc.MixturePriorSpec()
    bump = dc.sobolev_bump_truth(1, 1.0)
    beta, p = 1.0, 2.0
    expo = (beta + p) / (1.0 + 2.0 * beta + 2.0 * p)
    dists = {
        n: _deconv_prior_image_distances(priorspec, kernel, bump, n, draws, seed + n)
        for n in (64, 256)
    }

    def mass_at(n: int, scale: float) -> float:
        return float(np.mean(dists[n] <= scale * n**-expo))

    scale_star = None
    for scale in (1.0, 2.0, 4.0, 8.0):
        thr = np.exp(-64 * (scale * 64.0**-expo) ** 2)
        if mass_at(64, scale) >= thr:
            scale_star = scale
            break
    if scale_star is None:
        cells.append(LemmaCell("deconv_smallball", False, "no scale in 1..8 works at n=64"))
        return cells
    for n in (64, 256):
        m = mass_at(n, scale_star)
        thr = float(np.exp(-n * (scale_star * n**-expo) ** 2))
        cells.append(LemmaCell(
            f"deconv_smallball[n={n}]", m >= thr,
            f"scale={scale_star} mass={m:.4f} threshold={thr:.4f}",
        ))
    c_prime = dc.calibrate_sn_tail_constant(priorspec, J=2, a_grid=[10.0, 20.0, 40.0])
    ok = True
    details = [f"C'={c_prime:.3f}"]
    for a_n in (10.0, 20.0, 40.0):
        env, num = dc.prior_sn_tail(priorspec, dc.FourierWindow(a_n=a_n), J=2, c_prime=c_prime)
        ok = ok and num <= env * (1 + 1e-12)
        details.append(f"a={a_n:g}:num={num:.2e}<=env={env:.2e}")
    cells.append(LemmaCell("deconv_sn_tail_envelope", ok, " ".join(details)))
    return cells


def run_lemma_suite(regime: str, seed: int = 1234, draws: int = 10**5) -> LemmaSuiteReport:
    """Execute the analytic-vs-Monte-Carlo lemma checks for a regime."""
    if regime == MILD_SEQ:
        cells = _mild_lemma_cells(seed, draws)
    elif regime == SEVERE_SEQ:
        cells = _severe_lemma_cells(seed)
    elif regime == DECONV:
        cells = _deconv_lemma_cells(seed)
    else:
        raise ValueError(f"no lemma suite for regime {regime!r}")
    return LemmaSuiteReport(regime, tuple(cells))
