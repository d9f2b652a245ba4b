"""
Monte Carlo side of the exponent toolkit
Random power-constrained block codes, nearest-codeword decoding over the
AWGN channel, and the change-of-measure diagnostic behind the direct part.
"""

import math
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

from channel_core import (
    DegenerateEstimateError,
    DomainError,
    GaussianInputLaw,
    IdentityViolation,
    SizeError,
    binary_entropy,
    gaussian_conditional_divergence,
)
from settings import get_settings

logger = logging.getLogger(__name__)

# Decoder works on (trials x codewords) distance tiles of at most this many entries
DECODE_TILE = 1 << 22

SIM_RESULT_KEYS = ('n', 'rate_nats', 'trials', 'correct', 'p_c_hat', 'std_err',
                   'measured_exponent', 'seed')


@dataclass(frozen=True, eq=False)
class Codebook:
    """
    M codewords of length n, one per row

    Every row satisfies ||x||^2 <= n * gamma.
    """
    n: int
    codewords: np.ndarray
    gamma: float
    rescaled: int = 0

    @property
    def size(self):
        return self.codewords.shape[0]

    @property
    def rate(self):
        """ln(M)/n in nats"""
        return math.log(self.size) / self.n

    @property
    def powers(self):
        """Per-letter power ||x||^2 / n of every codeword"""
        return np.einsum('ij,ij->i', self.codewords, self.codewords) / self.n

    def power_stats(self):
        powers = self.powers
        return {
            'codewords': self.size,
            'fraction_rescaled': self.rescaled / self.size,
            'mean_power': float(powers.mean()),
            'max_normalised_power': float(powers.max() / self.gamma),
        }


def codebook_size(n, R):
    """M = ceil(e^{nR}), with a relative guard so e^{ln k} stays k"""
    return max(1, math.ceil(math.exp(n * R) * (1.0 - 1e-12)))


def generate_random_codebook(n, R, theta, pb, seed, settings=None):
    """
    Draw ceil(e^{nR}) codewords with i.i.d. N(0, theta) letters and shrink
    any codeword whose power exceeds gamma back onto the sphere ||x||^2 = n gamma.
    """
    settings = settings or get_settings()

    if n < 1:
        raise DomainError(f"block length must be >= 1, got {n}")
    if n > settings.max_block_length:
        raise SizeError(f"block length {n} exceeds cap {settings.max_block_length}")
    if R < 0:
        raise DomainError(f"rate must be nonnegative, got {R}")
    if theta < 0 or theta > pb.gamma:
        raise DomainError(f"theta must lie in [0, gamma={pb.gamma}], got {theta}")
    if n * R > math.log(settings.max_codewords) + 1e-12:
        raise SizeError(f"e^(nR) = e^{n * R:.3f} codewords exceeds cap {settings.max_codewords}")

    M = codebook_size(n, R)
    if M > settings.max_codewords:
        raise SizeError(f"{M} codewords exceeds cap {settings.max_codewords}")

    rng = np.random.default_rng(seed)
    codewords = rng.normal(0.0, math.sqrt(theta), size=(M, n))

    budget = n * pb.gamma
    energy = np.einsum('ij,ij->i', codewords, codewords)
    over = energy > budget
    # Land strictly inside the sphere so rounding never breaks the power invariant
    scale = np.ones(M)
    scale[over] = np.sqrt(budget / energy[over]) * (1.0 - 1e-12)
    codewords *= scale[:, None]

    cb = Codebook(n=n, codewords=codewords, gamma=pb.gamma, rescaled=int(over.sum()))
    logger.debug(f"Codebook n={n} M={M}: {cb.power_stats()}")
    return cb


# ============================================================================
# DECODING AND SIMULATION
# ============================================================================

def nearest_codeword(cb, y):
    """
    Minimum Euclidean distance decoder; ties go to the lowest index

    ||y - c||^2 = ||y||^2 - 2 y.c + ||c||^2 and ||y||^2 is common to a row.
    """
    y = np.atleast_2d(y)
    energy = np.einsum('ij,ij->i', cb.codewords, cb.codewords)
    chunk = max(1, DECODE_TILE // max(len(y), 1))

    best_dist = np.full(len(y), np.inf)
    best_index = np.zeros(len(y), dtype=np.int64)

    for start in range(0, cb.size, chunk):
        block = cb.codewords[start:start + chunk]
        dist = energy[start:start + chunk][None, :] - 2.0 * (y @ block.T)
        local = np.argmin(dist, axis=1)
        local_dist = dist[np.arange(len(y)), local]
        better = local_dist < best_dist
        best_dist[better] = local_dist[better]
        best_index[better] = local[better] + start

    return best_index


def _block_stream(seed, block):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _count_block(cb, gain, noise_var, seed, block, count):
    """Correct decisions among `count` trials of one block; Y = gain * X + noise"""
    rng = _block_stream(seed, block)
    messages = rng.integers(0, cb.size, size=count)
    noise = rng.standard_normal((count, cb.n))
    if cb.size == 1:
        return count

    y = gain * cb.codewords[messages] + math.sqrt(noise_var) * noise
    decoded = nearest_codeword(cb, y)
    return int(np.count_nonzero(decoded == messages))


def _count_correct(cb, gain, noise_var, trials, seed, settings):
    """
    Trials are split into fixed-size blocks, each with its own stream keyed by
    (seed, block index), so the count does not depend on the worker count.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if trials > settings.max_trials:
        raise SizeError(f"{trials} trials exceeds cap {settings.max_trials}")

    size = settings.sim_block_size
    blocks = [(b, min(size, trials - b * size)) for b in range(math.ceil(trials / size))]

    def run(job):
        block, count = job
        correct = _count_block(cb, gain, noise_var, seed, block, count)
        logger.debug(f"block {block}: {correct}/{count} correct")
        return correct

    with ThreadPoolExecutor(max_workers=settings.workers) as pool:
        return sum(pool.map(run, blocks))


@dataclass(frozen=True)
class SimResult:
    n: int
    rate_nats: float
    trials: int
    correct: int
    seed: int

    @property
    def p_c_hat(self):
        return self.correct / self.trials

    @property
    def std_err(self):
        p = self.p_c_hat
        return math.sqrt(p * (1.0 - p) / self.trials)

    @property
    def measured_exponent(self):
        """-(1/n) ln p_c_hat; infinite when no trial decoded correctly"""
        if self.correct == 0:
            return math.inf
        return -math.log(self.p_c_hat) / self.n

    @property
    def exponent_std_err(self):
        """Delta-method standard error of measured_exponent"""
        if self.correct == 0:
            return math.inf
        return self.std_err / (self.n * self.p_c_hat)

    def to_dict(self):
        exponent = self.measured_exponent
        values = {
            'n': self.n,
            'rate_nats': self.rate_nats,
            'trials': self.trials,
            'correct': self.correct,
            'p_c_hat': self.p_c_hat,
            'std_err': self.std_err,
            'measured_exponent': None if math.isinf(exponent) else exponent,
            'seed': self.seed,
        }
        return {key: values[key] for key in SIM_RESULT_KEYS}

    def to_json(self):
        return json.dumps(self.to_dict())


def simulate_correct_probability(cb, ch, trials, seed, settings=None):
    """Monte Carlo estimate of the average correct probability P_c over the AWGN channel"""
    settings = settings or get_settings()
    correct = _count_correct(cb, 1.0, ch.noise_variance, trials, seed, settings)
    result = SimResult(n=cb.n, rate_nats=cb.rate, trials=trials, correct=correct, seed=seed)
    logger.info(f"Simulated n={cb.n} M={cb.size}: {correct}/{trials} correct "
                f"(p_c={result.p_c_hat:.6g})")
    return result


# ============================================================================
# DIRECT PART
# ============================================================================

def direct_part_bound(D, n, delta):
    """
    P_c >= exp{-n [D/(1-delta) + eta_n(delta)]},
    eta_n(delta) = h(1-delta) / (n (1-delta))
    """
    if not 0.0 <= delta < 0.5:
        raise DomainError(f"delta must lie in [0, 1/2), got {delta}")
    if D < 0:
        raise DomainError(f"divergence must be nonnegative, got {D}")
    if n < 1:
        raise DomainError(f"block length must be >= 1, got {n}")
    keep = 1.0 - delta
    return math.exp(-n * D / keep - binary_entropy(keep) / keep)


def two_point_divergence(alpha, beta):
    """d(beta || alpha) between the two-point laws (beta, 1-beta) and (alpha, 1-alpha)"""
    for name, p in (('alpha', alpha), ('beta', beta)):
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"{name} must lie in [0, 1], got {p}")
    return float(rel_entr(beta, alpha) + rel_entr(1.0 - beta, 1.0 - alpha))


@dataclass(frozen=True)
class ChangeOfMeasure:
    """
    nD >= d(beta || alpha) >= -h(beta) - beta ln alpha

    alpha: correct probability under the true channel
    beta:  correct probability under the test channel, same code and decoder
    """
    alpha_hat: float
    beta_hat: float
    alpha_std_err: float
    beta_std_err: float
    lhs: float
    rhs_chain: tuple
    slack: float

    @property
    def holds(self):
        log_sum, lower = self.rhs_chain
        return self.lhs + self.slack >= log_sum and log_sum >= lower - 1e-12

    def to_dict(self):
        return {
            'alpha_hat': self.alpha_hat,
            'beta_hat': self.beta_hat,
            'alpha_std_err': self.alpha_std_err,
            'beta_std_err': self.beta_std_err,
            'n_divergence': self.lhs,
            'log_sum': self.rhs_chain[0],
            'lower': self.rhs_chain[1],
            'slack': self.slack,
        }


def change_of_measure_diagnostic(cb, tc, ch, trials, seed, settings=None, sigmas=3.0):
    """
    Estimate alpha and beta with common random numbers and check the chain

    Both channels see the same messages and the same standard normal draws,
    so a test channel equal to W gives alpha_hat == beta_hat exactly.
    """
    settings = settings or get_settings()

    alpha_correct = _count_correct(cb, 1.0, ch.noise_variance, trials, seed, settings)
    beta_correct = _count_correct(cb, tc.alpha, tc.xi, trials, seed, settings)
    a = alpha_correct / trials
    b = beta_correct / trials

    if a in (0.0, 1.0):
        raise DegenerateEstimateError(f"alpha_hat = {a} after {trials} trials")

    se_a = math.sqrt(a * (1.0 - a) / trials)
    se_b = math.sqrt(b * (1.0 - b) / trials)

    theta_bar = float(cb.powers.mean())
    lhs = cb.n * gaussian_conditional_divergence(GaussianInputLaw(theta_bar), tc, ch)
    log_sum = two_point_divergence(a, b)
    lower = -binary_entropy(b) - b * math.log(a)

    # Delta-method error of d(b || a)
    d_da = -b / a + (1.0 - b) / (1.0 - a)
    d_db = 0.0 if b in (0.0, 1.0) else math.log(b / a) - math.log((1.0 - b) / (1.0 - a))
    slack = sigmas * math.hypot(d_da * se_a, d_db * se_b)

    diag = ChangeOfMeasure(alpha_hat=a, beta_hat=b, alpha_std_err=se_a, beta_std_err=se_b,
                           lhs=lhs, rhs_chain=(log_sum, lower), slack=slack)
    logger.debug(f"Change of measure: {diag.to_dict()}")

    if not diag.holds:
        raise IdentityViolation('change-of-measure',
                                f"nD={lhs:.6g} < d(beta||alpha)={log_sum:.6g} "
                                f"beyond {sigmas} standard errors")
    return diag
