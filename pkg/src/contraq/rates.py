"""Tail sets, modulus-of-continuity bounds, rate exponents and prior-mass checks.

The inverse-problem machinery lives here: the coordinate tail sets on which
the operator inverts stably, the three-term modulus bound that converts a
direct radius into an inverse radius, the Chernoff bound on the prior mass
outside the tail set together with its Monte Carlo counterpart, the
Lambert-W truncation level for exponentially ill-posed operators, and the
theoretical rate exponents of the four regimes.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import floor
from typing import Callable, Optional

import numpy as np
from scipy.special import zeta

from .seq_model import (
    MILD,
    CoefficientSequence,
    GaussianProductPrior,
    IllPosedSpec,
    kappa,
    kf_sq_tail,
)
from .streams import PRIOR_DRAWS, substream

MILD_SEQ = "mild_seq"
SEVERE_SEQ = "severe_seq"
VOLTERRA = "volterra"
DECONV = "deconv"

REGIMES = (MILD_SEQ, SEVERE_SEQ, VOLTERRA, DECONV)


class HypothesisUnmet(ValueError):
    """A lemma's hypothesis fails, so its bound is not claimed."""


class TruncationTooCoarse(ValueError):
    """Explicit head too short for the requested Monte Carlo accuracy."""


class ChainViolation(AssertionError):
    """An analytically true inequality failed numerically (implementation bug)."""


@dataclass(frozen=True)
class TailSet:
    """Coordinate tail set {f : sum_{i>k_n} f_i^2 <= c * rho_n^2}."""

    k_n: int
    rho_n: float
    c: float = 0.0

    def __post_init__(self):
        if self.k_n < 1 or self.rho_n <= 0 or self.c < 0:
            raise ValueError("need k_n >= 1, rho_n > 0, c >= 0")

    @property
    def budget(self) -> float:
        return self.c * self.rho_n**2

    def contains(self, f: CoefficientSequence) -> bool:
        return f.tail_sq_beyond(self.k_n) <= self.budget


@dataclass(frozen=True)
class ModulusBound:
    """Three-term upper bound on the modulus of continuity.

    inversion_term = kappa_{k_n}^(-1) * delta
    tail_term      = sqrt(c) * rho_n
    bias_term      = 2 * ||f0||_s * k_n^(-beta)
    """

    inversion_term: float
    tail_term: float
    bias_term: float

    def __post_init__(self):
        if min(self.inversion_term, self.tail_term, self.bias_term) < 0:
            raise ValueError("all modulus terms must be >= 0")

    @property
    def total(self) -> float:
        return self.inversion_term + self.tail_term + self.bias_term


def modulus_upper_bound(
    ts: TailSet,
    spec: IllPosedSpec,
    f0_norm_s: float,
    beta: float,
    delta: float,
) -> ModulusBound:
    """Evaluate the modulus bound kappa_k^(-1) delta + sqrt(c) rho_n + 2 ||f0||_s k^(-beta)."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    k = float(kappa(spec, ts.k_n))
    return ModulusBound(
        inversion_term=delta / k,
        tail_term=np.sqrt(ts.c) * ts.rho_n,
        bias_term=2.0 * f0_norm_s * ts.k_n ** (-beta),
    )


def implied_inverse_radius(mod_bound_fn: Callable[[float], ModulusBound], direct_radius: float) -> float:
    """Inverse radius implied by a direct radius through a modulus bound."""
    if direct_radius < 0:
        raise ValueError("direct_radius must be >= 0")
    return mod_bound_fn(direct_radius).total


@dataclass(frozen=True)
class ChainReport:
    samples: int
    violations: int
    max_slack: float
    min_slack: float


def check_modulus_chain(
    ts: TailSet,
    spec: IllPosedSpec,
    samples: int,
    seed: int,
    head_n: int = 4096,
) -> ChainReport:
    """Draw random members of the tail set and verify the inversion inequality.

    For every draw g the exact chain ||g||^2 <= kappa_{k_n}^(-2) ||Kg||^2 + c rho_n^2
    must hold; a violation signals an implementation bug and raises.
    """
    if head_n <= ts.k_n:
        raise ValueError("head_n must exceed k_n")
    rng = substream(seed, PRIOR_DRAWS, 0, samples)
    k_inv2 = float(kappa(spec, ts.k_n)) ** (-2.0)
    i = np.arange(1, head_n + 1)
    kap = kappa(spec, i)
    min_slack = np.inf
    max_slack = -np.inf
    for s_idx in range(samples):
        g = rng.standard_normal(head_n) * rng.uniform(0.1, 10.0)
        tail = g[ts.k_n:]
        t_sq = float(np.sum(tail**2))
        if ts.budget == 0.0:
            g[ts.k_n:] = 0.0
        elif t_sq > 0:
            # rescale the tail onto a uniform point of the membership budget
            g[ts.k_n:] = tail * np.sqrt(rng.uniform(0.0, 1.0) * ts.budget / t_sq)
        lhs = float(np.sum(g**2))
        rhs = k_inv2 * float(np.sum((kap * g) ** 2)) + ts.budget
        slack = rhs - lhs
        if slack < -1e-9 * max(1.0, abs(rhs)):
            raise ChainViolation(f"chain inequality violated at draw {s_idx}: slack={slack}")
        min_slack = min(min_slack, slack)
        max_slack = max(max_slack, slack)
    return ChainReport(samples, 0, max_slack, min_slack)


def prior_mass_tail_bound(alpha: float, k_n: int, rho_n: float, c: float) -> float:
    """Chernoff bound exp(-(c/8) rho_n^2 k_n^(1+2 alpha)) on the prior mass
    outside the tail set, valid under k_n^(2 alpha) >= 2(1+2 alpha)/(alpha c rho_n^2)."""
    if alpha <= 0 or k_n < 1 or rho_n <= 0 or c <= 0:
        raise ValueError("need alpha > 0, k_n >= 1, rho_n > 0, c > 0")
    if k_n ** (2.0 * alpha) < 2.0 * (1.0 + 2.0 * alpha) / (alpha * c * rho_n**2):
        raise HypothesisUnmet(
            "k_n^(2 alpha) >= 2(1+2 alpha)/(alpha c rho_n^2) fails; bound not claimed"
        )
    return float(np.exp(-(c / 8.0) * rho_n**2 * k_n ** (1.0 + 2.0 * alpha)))


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    stderr: float
    draws: int
    low_confidence: bool = False

    def __iter__(self):
        return iter((self.estimate, self.stderr))


def prior_mass_tail_mc(
    prior: GaussianProductPrior,
    ts: TailSet,
    draws: int,
    N: int,
    seed: int,
) -> McEstimate:
    """Monte Carlo estimate of the prior mass outside the tail set.

    Simulates sum_{k_n < i <= N} lambda_i W_i^2 and adds the analytic mean of
    the omitted i > N block; the omitted mean must be below 1e-3 of the
    membership budget, otherwise the head is too coarse to decide.
    """
    if N < ts.k_n:
        raise ValueError("N must be >= k_n")
    if prior.truncation is not None and prior.truncation <= ts.k_n:
        return McEstimate(0.0, 0.0, draws)
    omitted = prior.variance_tail_mean(N)
    if ts.budget > 0 and omitted > 1e-3 * ts.budget:
        raise TruncationTooCoarse(
            f"omitted tail mean {omitted:.3e} exceeds 1e-3 * budget {ts.budget:.3e}"
        )
    lam = prior.variances(N)[ts.k_n:]
    rng = substream(seed, PRIOR_DRAWS, 1, N)
    hits = 0
    done = 0
    block = max(1, min(draws, int(2**24 // max(lam.size, 1)) or 1))
    while done < draws:
        m = min(block, draws - done)
        w = rng.standard_normal((m, lam.size))
        stat = w**2 @ lam + omitted
        hits += int(np.sum(stat > ts.budget))
        done += m
    p = hits / draws
    return McEstimate(p, float(np.sqrt(p * (1.0 - p) / draws)), draws)


@dataclass(frozen=True)
class SmallBallEstimate:
    estimate: float
    stderr: float
    draws: int
    lemma_exponent: float
    low_confidence: bool


def kl_smallball_mc(
    prior: GaussianProductPrior,
    f0: CoefficientSequence,
    spec: IllPosedSpec,
    epsilon: float,
    N: int,
    draws: int,
    seed: int,
    beta: Optional[float] = None,
) -> SmallBallEstimate:
    """Monte Carlo prior mass of the image-space ball {||Kf - Kf0|| <= epsilon}.

    Also reports the lemma's lower-bound exponent
    epsilon^(-(1+2 alpha - 2(alpha ^ beta)) / ((alpha ^ beta) + p)) when beta
    is supplied.  Estimates below 100/draws carry a low-confidence flag.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    lam = prior.variances(N)
    kap = kappa(spec, np.arange(1, N + 1))
    kf0 = kap * f0.value_head(N)
    # deterministic mean of the omitted block: E sum_{i>N} kappa^2 (f - f0)^2
    omitted = kf_sq_tail(f0, spec, N)
    if prior.truncation is None or prior.truncation > N:
        if spec.kind == MILD:
            omitted += prior.scale * spec.C**2 * float(
                zeta(1.0 + 2.0 * prior.alpha + 2.0 * spec.p, N + 1)
            )
        else:
            i = np.arange(N + 1, N + 4097, dtype=float)
            omitted += float(
                np.sum(
                    prior.scale
                    * i ** (-prior.alpha)
                    * np.exp(-prior.xi * i**prior.p_exp)
                    * np.exp(-2.0 * spec.gamma * i**spec.p)
                )
            )
    sd = np.sqrt(lam) * kap
    rng = substream(seed, PRIOR_DRAWS, 2, N)
    hits = 0
    done = 0
    block = max(1, min(draws, int(2**24 // max(N, 1)) or 1))
    eps_sq = epsilon**2
    while done < draws:
        m = min(block, draws - done)
        w = rng.standard_normal((m, N))
        delta = w * sd - kf0
        stat = np.einsum("ij,ij->i", delta, delta) + omitted
        hits += int(np.sum(stat <= eps_sq))
        done += m
    p = hits / draws
    if beta is not None:
        ab = min(prior.alpha, beta)
        expo = epsilon ** (-(1.0 + 2.0 * prior.alpha - 2.0 * ab) / (ab + spec.p))
    else:
        expo = float("nan")
    return SmallBallEstimate(
        p,
        float(np.sqrt(p * (1.0 - p) / draws)),
        draws,
        expo,
        low_confidence=(p < 100.0 / draws),
    )


def lambert_w(x) -> np.ndarray | float:
    """Principal-branch Lambert W on x >= 0 via Halley iteration.

    The initial guess is log-based; convergence to |w e^w - x| <= 1e-12 max(1,x)
    takes a handful of iterations across the whole nonnegative axis.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    v = np.atleast_1d(arr).astype(float)
    if np.any(v < 0):
        raise ValueError("principal branch implemented for x >= 0 only")
    w = np.where(v < np.e, np.log1p(v) * (1.0 - np.log1p(np.log1p(v)) / (2.0 + np.log1p(v))), 0.0)
    big = v >= np.e
    if np.any(big):
        L = np.log(v[big])
        w_big = L - np.log(L)
        w_big += np.log(L) / L
        w[big] = w_big
    for _ in range(50):
        e = np.exp(w)
        f = w * e - v
        wp1 = w + 1.0
        step = f / (e * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w = w - step
        if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(w))):
            break
    w = np.where(v == 0.0, 0.0, w)
    return float(w[0]) if scalar else w.reshape(arr.shape)


def severe_k_n_continuous(alpha: float, xi: float, gamma: float, p: float, n: int) -> float:
    """Continuous root of n * k^(-alpha) * exp(-(xi + 2 gamma) k^p) = 1.

    Evaluated through the Lambert-W closed form when the argument is
    representable, with a log-space Newton fallback for extreme parameters.
    """
    rate = xi + 2.0 * gamma
    if rate <= 0:
        raise ValueError("xi + 2*gamma must be > 0")
    if n < 2:
        raise ValueError("n must be >= 2")
    if alpha == 0.0:
        return (np.log(n) / rate) ** (1.0 / p)
    log_arg = (p / alpha) * np.log(n) + np.log(p * rate / alpha)
    if log_arg < 700.0:  # exp() still representable
        w = lambert_w(np.exp(log_arg))
        return float((alpha / (p * rate) * w) ** (1.0 / p))
    # Newton on g(k) = log n - alpha log k - rate k^p in log space
    k = (np.log(n) / rate) ** (1.0 / p)
    for _ in range(100):
        g = np.log(n) - alpha * np.log(k) - rate * k**p
        dg = -alpha / k - rate * p * k ** (p - 1.0)
        step = g / dg
        k -= step
        if abs(step) <= 1e-14 * k:
            break
    return float(k)


def severe_k_n(alpha: float, xi: float, gamma: float, p: float, n: int) -> int:
    """Truncation level: the continuous root rounded half-up, at least 1."""
    k = severe_k_n_continuous(alpha, xi, gamma, p, n)
    return max(1, int(floor(k + 0.5)))


@dataclass(frozen=True)
class RateExponents:
    """Theoretical rate exponents of a regime.

    Polynomial regimes store |exponent of n|; the severe regime stores the
    log-rate exponent beta/p on the inverse side and the polynomial exponent
    gamma/(xi+2 gamma) on the direct side.  Log powers are carried where the
    theory specifies them and are NaN where they are a free nuisance.
    """

    regime: str
    inverse_exponent: float
    direct_exponent: float
    log_power_inverse: float = 0.0
    log_power_direct: float = 0.0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime != SEVERE_SEQ:
            # equality happens only for the identity operator (p = 0)
            if not (0.0 < self.inverse_exponent <= self.direct_exponent < 0.6):
                raise ValueError("polynomial exponents must satisfy 0 < inverse <= direct < 1/2 + margin")


def rate_exponent(
    regime: str,
    alpha: float = 1.0,
    beta: float = 1.0,
    p: float = 1.0,
    t: float = 0.0,
    gamma: float = 1.0,
    xi: float = 0.0,
) -> RateExponents:
    """Rate exponents for the four regimes.

    mild_seq:   inverse (alpha^beta)/(1+2 alpha+2p), direct ((alpha^beta)+p)/(1+2 alpha+2p)
    severe_seq: inverse beta/p as a log rate; direct gamma/(xi+2 gamma) with
                log power -beta/p + gamma alpha/(p (xi+2 gamma))
    volterra:   inverse beta/(2 beta+3) with log power 3r, r = (1 v t)(beta+1)/(2 beta+3);
                direct (beta+1)/(2 beta+3) with log power (1 v t) beta/(2 beta+1)
    deconv:     inverse beta/(1+2 beta+2p), direct (beta+p)/(1+2 beta+2p); log powers free
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    if regime == MILD_SEQ:
        ab = min(alpha, beta)
        den = 1.0 + 2.0 * alpha + 2.0 * p
        return RateExponents(regime, ab / den, (ab + p) / den)
    if regime == SEVERE_SEQ:
        rate = xi + 2.0 * gamma
        if rate <= 0 or p < 1:
            raise ValueError("severe regime needs xi + 2 gamma > 0 and p >= 1")
        return RateExponents(
            regime,
            beta / p,
            gamma / rate,
            log_power_inverse=0.0,
            log_power_direct=-beta / p + gamma * alpha / (p * rate),
        )
    if regime == VOLTERRA:
        den = 2.0 * beta + 3.0
        r = max(1.0, t) * (beta + 1.0) / den
        return RateExponents(
            regime,
            beta / den,
            (beta + 1.0) / den,
            log_power_inverse=3.0 * r,
            log_power_direct=max(1.0, t) * beta / (2.0 * beta + 1.0),
        )
    if regime == DECONV:
        den = 1.0 + 2.0 * beta + 2.0 * p
        return RateExponents(regime, beta / den, (beta + p) / den,
                             log_power_inverse=float("nan"), log_power_direct=float("nan"))
    raise ValueError(f"unknown regime {regime!r}")
