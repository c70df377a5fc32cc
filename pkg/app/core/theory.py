"""
Numerical limits: the final-proportion root q, Galton-Watson survival
probabilities and the central-limit variances, plain and thinned.
"""
import logging
import math

from scipy import optimize

from app.core.resource import ResourceLaw
from app.errors import DomainError
from app.models import TheoryPrediction

logger = logging.getLogger(__name__)

CRITICAL_TOL = 1e-12
BRACKET_LO = 1e-12
BRACKET_HI = 1.0 - 1e-12
ITER_TOL = 1e-13
MAX_ITER = 1_000_000
CROSS_CHECK_TOL = 1e-9


def _check_p(p: float):
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"Edge probability must lie in [0, 1], got {p}")


def solve_q(mean_k: float) -> float:
    """Largest root in [0, 1) of mean_k * q + ln(1 - q) = 0"""
    if mean_k <= 0:
        raise DomainError(f"Mean resource must be positive, got {mean_k}")
    if mean_k <= 1.0 + CRITICAL_TOL:
        return 0.0

    def f(q):
        return mean_k * q + math.log1p(-q)

    hi = BRACKET_HI
    if f(hi) > 0:
        # root beyond 1 - 1e-12: only reachable for very large means
        hi = math.nextafter(1.0, 0.0)
        if f(hi) > 0:
            logger.warning("Root for mean %s is not representable below 1", mean_k)
            return hi

    q = optimize.bisect(f, BRACKET_LO, hi, xtol=1e-13, maxiter=200)
    for _ in range(2):
        step = f(q) / (mean_k - 1.0 / (1.0 - q))
        polished = q - step
        if BRACKET_LO < polished < hi and abs(f(polished)) <= abs(f(q)):
            q = polished
    return q


def solve_qhat(mean_k: float, p: float) -> float:
    """Root for the thinned mean p * mean_k; 0 when p * mean_k <= 1"""
    _check_p(p)
    if mean_k <= 0:
        raise DomainError(f"Mean resource must be positive, got {mean_k}")
    if p * mean_k <= 1.0 + CRITICAL_TOL:
        return 0.0
    return solve_q(p * mean_k)


def _largest_survival_root(law: ResourceLaw, c: float) -> float:
    """Largest fixed point of s = 1 - E[(1 - c s)^K]"""

    def phi(s):
        return 1.0 - law.pgf_at(1.0 - c * s)

    sigma = 1.0
    for _ in range(MAX_ITER):
        nxt = phi(sigma)
        if abs(nxt - sigma) < ITER_TOL:
            sigma = nxt
            break
        sigma = nxt
    else:
        logger.warning("Survival iteration hit %d steps (near-critical law)", MAX_ITER)

    if phi(1.0) >= 1.0 or sigma <= 0.0:
        return sigma

    def g(s):
        return phi(s) - s

    lo = sigma / 2.0
    if g(lo) <= 0:
        return sigma
    root = optimize.brentq(g, lo, 1.0, xtol=1e-15, maxiter=500)
    if abs(root - sigma) > CROSS_CHECK_TOL:
        logger.warning("Survival root cross-check disagrees: iteration %.15g, bracket %.15g", sigma, root)
    return root


def solve_sigma_gw(law: ResourceLaw) -> float:
    """Survival probability of the Galton-Watson tree with offspring law K"""
    if law.mean() <= 1.0 + CRITICAL_TOL:
        return 0.0
    return _largest_survival_root(law, 1.0)


def solve_sigma_gw_hat(law: ResourceLaw, p: float) -> float:
    """Survival probability with offspring thinned by independent Bernoulli(p) marks"""
    _check_p(p)
    if p * law.mean() <= 1.0 + CRITICAL_TOL:
        return 0.0
    return _largest_survival_root(law, p)


def _variance_formula(q: float, mean_k: float, var_k: float) -> float:
    numerator = q * var_k * (1 - q) ** 2 + q * (1 - q) + (1 - q) ** 2 * math.log1p(-q)
    denominator = ((1 - q) * mean_k - 1) ** 2
    return numerator / denominator


def variance_clt(law: ResourceLaw, q: float) -> float:
    """Variance of (N - n q) / sqrt(n) in the supercritical regime"""
    if law.mean() <= 1.0 + CRITICAL_TOL:
        raise DomainError("Limit variance is undefined when E K <= 1")
    if not 0.0 < q < 1.0:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    return _variance_formula(q, law.mean(), law.variance())


def thinned_moments(law: ResourceLaw, p: float) -> tuple[float, float]:
    """Mean and variance of the thinned resource"""
    _check_p(p)
    mean_k = law.mean()
    return p * mean_k, p * (1 - p) * mean_k + p * p * law.variance()


def variance_clt_hat(law: ResourceLaw, p: float) -> float:
    mean_hat, var_hat = thinned_moments(law, p)
    if mean_hat <= 1.0 + CRITICAL_TOL:
        raise DomainError("Thinned limit variance is undefined when p E K <= 1")
    return _variance_formula(solve_qhat(law.mean(), p), mean_hat, var_hat)


def predict(law: ResourceLaw, p: float, mode: int = 1) -> TheoryPrediction:
    """All limit quantities; ``q_star``, ``sigma_star`` and ``var_star`` follow the mode.

    Mode 1 checks every attempt against its edge, so the thinned quantities
    apply. Mode 2 pushes to a neighbor, so the limits do not depend on p.
    """
    _check_p(p)
    if mode not in (1, 2):
        raise DomainError(f"Unknown mode {mode}")

    mean_k = law.mean()
    mean_hat, var_hat = thinned_moments(law, p)
    supercritical = mean_k > 1.0 + CRITICAL_TOL
    supercritical_hat = mean_hat > 1.0 + CRITICAL_TOL

    q = solve_q(mean_k) if mean_k > 0 else 0.0
    q_hat = solve_qhat(mean_k, p) if mean_k > 0 else 0.0
    sigma_gw = solve_sigma_gw(law)
    sigma_gw_hat = solve_sigma_gw_hat(law, p)
    var_clt = variance_clt(law, q) if supercritical else None
    var_clt_hat = variance_clt_hat(law, p) if supercritical_hat else None

    if mode == 1:
        q_star, sigma_star, var_star, m_star = q_hat, sigma_gw_hat, var_clt_hat, mean_hat
    else:
        q_star, sigma_star, var_star, m_star = q, sigma_gw, var_clt, mean_k

    return TheoryPrediction(
        mode=mode,
        p=p,
        mean_k=mean_k,
        var_k=law.variance(),
        mean_k_hat=mean_hat,
        var_k_hat=var_hat,
        q=q,
        q_hat=q_hat,
        sigma_gw=sigma_gw,
        sigma_gw_hat=sigma_gw_hat,
        var_clt=var_clt,
        var_clt_hat=var_clt_hat,
        supercritical=supercritical,
        supercritical_hat=supercritical_hat,
        q_star=q_star,
        sigma_star=sigma_star,
        var_star=var_star,
        epsilon_max=m_star * q_star,
    )
