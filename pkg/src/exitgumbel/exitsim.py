"""Small-noise exit-time simulation for the linear-drift diffusion.

The model is dX = beta*X dt + epsilon dW on an interval around the
unstable equilibrium at 0, started at x0 = -epsilon*a, run to the first
boundary exit. Exits through the right end oppose the drift and become
exponentially rare as epsilon shrinks; this module provides

* exact-transition and Euler-Maruyama integrators (exit at grid times),
* rejection sampling of right-conditioned exits, reproducible for any
  worker count,
* the pathwise exit-time construction driven by a realization of the
  exponentially discounted noise integral, and
* the closed-form limit law of the normalized exit time together with a
  truncated-Gaussian sampler for it.

All simulations run in units of the noise amplitude (Y = X/epsilon),
which makes the path for epsilon' = c*epsilon exactly c times the path
for epsilon under shared noise.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .distributions import gaussian_log_tail, gaussian_tail
from .errors import BudgetExceeded, GuardExceeded
from .stats import RngStream, as_generator

__all__ = [
    "LinearDriftModel",
    "ExitProblem",
    "ExitRecord",
    "NoiseRealization",
    "ConditionedSample",
    "simulate_exit_exact",
    "simulate_exit_euler",
    "simulate_path",
    "sample_conditioned_exits",
    "sample_noise",
    "duhamel_exit_time",
    "replay_exit_from_noise",
    "limit_normalized_time",
    "truncated_gaussian",
    "limit_law_sample",
    "limit_law_cdf",
    "right_exit_probability",
]

# Horizon rule for noise realizations: run until exp(-beta*T) <= this, at
# which point the remaining variance of the discounted integral is
# negligible and the terminal value stands in for the infinite-horizon one.
_NOISE_DECAY_TARGET = 1e-9

_FOLLOWUP_CHUNK = 2048
_MAX_CHUNK = 65536
_BLOCK_ATTEMPTS = 2048


@dataclass(frozen=True)
class LinearDriftModel:
    """Linear drift b(x) = beta*x with slope beta > 0 (units 1/time)."""

    beta: float

    def __post_init__(self) -> None:
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")


@dataclass(frozen=True)
class ExitProblem:
    """One conditioned-exit experiment.

    Start point is -epsilon*a, strictly inside (left, 0). The guard
    horizon caps simulated time; exits happen almost surely well before
    the default guard of centering + 40/beta.
    """

    model: LinearDriftModel
    epsilon: float
    a: float
    left: float = -1.0
    right: float = 1.0
    step: float = 1e-3
    guard_horizon: Optional[float] = None

    def __post_init__(self) -> None:
        if not (self.epsilon > 0.0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise ValueError(f"a must be positive, got {self.a}")
        if not (self.left < 0.0 < self.right):
            raise ValueError("domain must satisfy left < 0 < right")
        if not (self.left < -self.epsilon * self.a < 0.0):
            raise ValueError(
                f"start -epsilon*a = {-self.epsilon * self.a} must lie strictly "
                f"inside ({self.left}, 0)"
            )
        if not (0.0 < self.step <= 1e-2):
            raise ValueError(f"step must be in (0, 1e-2], got {self.step}")
        beta = self.model.beta
        minimum_guard = self.centering_time + 20.0 / beta
        if self.guard_horizon is None:
            object.__setattr__(self, "guard_horizon", self.centering_time + 40.0 / beta)
        elif self.guard_horizon < minimum_guard:
            raise ValueError(
                f"guard_horizon {self.guard_horizon} is below the minimum "
                f"{minimum_guard} = centering + 20/beta"
            )

    @property
    def centering_time(self) -> float:
        """(1/beta) * ln(1/epsilon), the deterministic part of the exit time."""
        return math.log(1.0 / self.epsilon) / self.model.beta

    @property
    def guard_steps(self) -> int:
        return int(math.ceil(self.guard_horizon / self.step))


@dataclass(frozen=True)
class ExitRecord:
    """Outcome of one simulated exit."""

    tau: float
    side: str
    normalized_time: float
    steps_taken: int

    def __post_init__(self) -> None:
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        if not (self.tau > 0.0):
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class NoiseRealization:
    """Discretized exponentially discounted noise integral on [0, T].

    `values[k]` approximates the integral of exp(-beta*s) dW over [0, t_k];
    the grid is long enough that the terminal value is an adequate proxy
    for the infinite-horizon limit (exp(-beta*T) <= 1e-9).
    """

    beta: float
    times: np.ndarray
    values: np.ndarray
    limit_value: float
    sup_abs: float

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 2:
            raise ValueError("times and values must be equal-length 1-d arrays")
        if times[0] != 0.0 or values[0] != 0.0:
            raise ValueError("grid and integral must start at 0")
        steps = np.diff(times)
        if not np.all(steps > 0):
            raise ValueError("times must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("times must be uniformly spaced")
        if self.beta * times[-1] < math.log(1.0 / _NOISE_DECAY_TARGET):
            raise ValueError(
                f"horizon too short: need exp(-beta*T) <= {_NOISE_DECAY_TARGET}"
            )
        if self.sup_abs < abs(self.limit_value):
            raise ValueError("sup_abs must dominate |limit_value|")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class ConditionedSample:
    """Right-exit records kept by rejection, in attempt order."""

    records: tuple
    attempt_indices: tuple
    attempts: int

    @property
    def acceptance_rate(self) -> float:
        return len(self.records) / self.attempts

    def normalized_times(self) -> np.ndarray:
        return np.asarray([r.normalized_time for r in self.records], dtype=float)


@lru_cache(maxsize=64)
def _power_arrays(growth: float, size: int):
    """g^(k+1) and g^-(j+1) for one chunk; cached read-only."""
    lg = math.log(growth)
    exponents = np.arange(1, size + 1, dtype=float) * lg
    pos = np.exp(exponents)
    neg = np.exp(-exponents)
    pos.setflags(write=False)
    neg.setflags(write=False)
    return pos, neg


def _chunk_schedule(problem: ExitProblem, growth: float):
    """First chunk sized to reach the typical exit depth in one pass."""
    lg = math.log(growth)
    max_chunk = max(16, min(_MAX_CHUNK, int(30.0 / lg)))
    target_time = max(problem.step, problem.centering_time + 2.0 / problem.model.beta)
    first = min(max_chunk, int(target_time / problem.step) + 16)
    return first, min(_FOLLOWUP_CHUNK, max_chunk)


def _run_linear_exit(
    problem: ExitProblem,
    growth: float,
    noise_scale: float,
    draw: Callable[[int], np.ndarray],
) -> ExitRecord:
    """Shared chunked driver for both integrators, in Y = X/epsilon units.

    The per-step recursion Y <- growth*Y + noise_scale*xi is evaluated in
    closed form over each chunk: Y_k = g^k * (Y_0 + s * sum_j g^-(j) xi_j),
    identical to stepping in exact arithmetic.
    """
    eps = problem.epsilon
    y_left = problem.left / eps
    y_right = problem.right / eps
    h = problem.step
    centering = problem.centering_time

    first, followup = _chunk_schedule(problem, growth)
    remaining = problem.guard_steps
    steps_done = 0
    y = -problem.a
    chunk = first
    while remaining > 0:
        size = min(chunk, remaining)
        xi = draw(size)
        if xi.size == 0:
            break
        size = xi.size
        pos, neg = _power_arrays(growth, size)
        cum = np.cumsum(neg[:size] * xi)
        ys = pos[:size] * (y + noise_scale * cum)
        hit = (ys >= y_right) | (ys <= y_left)
        if hit.any():
            k = int(np.argmax(hit))
            steps = steps_done + k + 1
            tau = steps * h
            side = "right" if ys[k] >= y_right else "left"
            return ExitRecord(
                tau=tau,
                side=side,
                normalized_time=tau - centering,
                steps_taken=steps,
            )
        y = float(ys[-1])
        steps_done += size
        remaining -= size
        chunk = followup
    raise GuardExceeded(
        f"no exit within guard horizon {problem.guard_horizon} "
        f"({problem.guard_steps} steps)"
    )


def _exact_coefficients(problem: ExitProblem):
    beta, h = problem.model.beta, problem.step
    growth = math.exp(beta * h)
    noise_scale = math.sqrt(math.expm1(2.0 * beta * h) / (2.0 * beta))
    return growth, noise_scale


def _euler_coefficients(problem: ExitProblem):
    beta, h = problem.model.beta, problem.step
    return 1.0 + beta * h, math.sqrt(h)


def simulate_exit_exact(problem: ExitProblem, rng) -> ExitRecord:
    """Simulate one exit with the exact Gaussian transition of the linear SDE.

    Steps X(t+h) = e^(beta h) X(t) + epsilon*sqrt((e^(2 beta h)-1)/(2 beta))*xi
    and stops at the first grid time with X outside (left, right). Raises
    GuardExceeded if no exit occurs before the guard horizon.
    """
    gen = as_generator(rng)
    growth, scale = _exact_coefficients(problem)
    return _run_linear_exit(problem, growth, scale, gen.standard_normal)


def simulate_exit_euler(problem: ExitProblem, rng) -> ExitRecord:
    """Euler-Maruyama baseline: X(t+h) = X + beta*X*h + epsilon*sqrt(h)*xi.

    Same contract as `simulate_exit_exact`, with O(h) weak bias; kept for
    cross-validation of the exact-step integrator.
    """
    gen = as_generator(rng)
    growth, scale = _euler_coefficients(problem)
    return _run_linear_exit(problem, growth, scale, gen.standard_normal)


def simulate_path(problem: ExitProblem, rng, n_steps: int) -> np.ndarray:
    """Exact-transition path of X at grid times 0..n_steps*h, not stopped
    at the boundary. Diagnostic surface for law and coupling checks."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    gen = as_generator(rng)
    growth, scale = _exact_coefficients(problem)
    lg = math.log(growth)
    max_chunk = max(16, min(_MAX_CHUNK, int(30.0 / lg)))
    out = np.empty(n_steps + 1, dtype=float)
    out[0] = -problem.a
    y = -problem.a
    done = 0
    while done < n_steps:
        size = min(max_chunk, n_steps - done)
        xi = gen.standard_normal(size)
        pos, neg = _power_arrays(growth, size)
        cum = np.cumsum(neg[:size] * xi)
        ys = pos[:size] * (y + scale * cum)
        out[done + 1 : done + 1 + size] = ys
        y = float(ys[-1])
        done += size
    return problem.epsilon * out


def sample_noise(
    beta: float,
    step: float,
    rng,
    horizon: Optional[float] = None,
) -> NoiseRealization:
    """Draw one realization of the discounted noise integral.

    Increments over [t, t+h] are centered Gaussians with the exact
    variance (e^(-2 beta t) - e^(-2 beta (t+h)))/(2 beta), so the values
    have the exact joint law at the grid times. Default horizon satisfies
    exp(-beta*T) <= 1e-9.
    """
    if beta <= 0.0 or step <= 0.0:
        raise ValueError("beta and step must be positive")
    if horizon is None:
        n = int(math.ceil(math.log(1.0 / _NOISE_DECAY_TARGET) / (beta * step))) + 1
    else:
        n = int(math.ceil(horizon / step))
    gen = as_generator(rng)
    times = np.arange(n + 1, dtype=float) * step
    base = math.sqrt(-math.expm1(-2.0 * beta * step) / (2.0 * beta))
    stds = base * np.exp(-beta * times[:-1])
    increments = stds * gen.standard_normal(n)
    values = np.concatenate([[0.0], np.cumsum(increments)])
    return NoiseRealization(
        beta=beta,
        times=times,
        values=values,
        limit_value=float(values[-1]),
        sup_abs=float(np.max(np.abs(values))),
    )


def duhamel_exit_time(noise: NoiseRealization, problem: ExitProblem) -> ExitRecord:
    """Exit time read off the pathwise representation of the solution.

    The solution factorizes as X(t) = epsilon*e^(beta t)*(-a + I_t) with
    I the discounted noise integral, so the exit is the first grid time
    where epsilon*e^(beta t)*|-a + I_t| reaches 1 and the side is the sign
    of -a + I_t there. Alternative computation from the same noise, not a
    new simulation.
    """
    if noise.beta != problem.model.beta:
        raise ValueError("noise and problem disagree on beta")
    shifted = -problem.a + noise.values
    path = problem.epsilon * np.exp(noise.beta * noise.times) * shifted
    hit = (path >= problem.right) | (path <= problem.left)
    hit[0] = False
    if not hit.any():
        raise GuardExceeded("no boundary crossing on the noise grid")
    k = int(np.argmax(hit))
    tau = float(noise.times[k])
    return ExitRecord(
        tau=tau,
        side="right" if shifted[k] >= 0.0 else "left",
        normalized_time=tau - problem.centering_time,
        steps_taken=k,
    )


def replay_exit_from_noise(problem: ExitProblem, noise: NoiseRealization) -> ExitRecord:
    """Run the exact-step integrator on the increments of a stored noise
    realization, for pathwise comparison with `duhamel_exit_time`."""
    if noise.beta != problem.model.beta:
        raise ValueError("noise and problem disagree on beta")
    if abs(noise.step - problem.step) > 1e-12 * problem.step:
        raise ValueError("noise grid step must match the problem step")
    beta, h = noise.beta, noise.step
    base = math.sqrt(-math.expm1(-2.0 * beta * h) / (2.0 * beta))
    stds = base * np.exp(-beta * noise.times[:-1])
    xi = np.diff(noise.values) / stds
    cursor = 0

    def draw(size: int) -> np.ndarray:
        nonlocal cursor
        chunk = xi[cursor : cursor + size]
        cursor += chunk.size
        return chunk

    growth, scale = _exact_coefficients(problem)
    return _run_linear_exit(problem, growth, scale, draw)


def limit_normalized_time(noise: NoiseRealization, a: float) -> float:
    """Almost-sure limit of the normalized exit time for this noise:
    -(1/beta)*ln|-a + I_infinity|."""
    gap = abs(-a + noise.limit_value)
    if gap == 0.0:
        raise ValueError("noise limit coincides with a; limit undefined")
    return -math.log(gap) / noise.beta


def _truncated_gaussian_batch(r: float, gen: np.random.Generator, size: int) -> np.ndarray:
    out = np.empty(size, dtype=float)
    filled = 0
    if r < 1.0:
        # Plain rejection from the untruncated Gaussian; acceptance is
        # tail(r) >= tail(1) ~ 0.159 on this branch.
        accept_rate = max(gaussian_tail(r), 1e-3)
        while filled < size:
            need = size - filled
            m = min(1_000_000, int(need / accept_rate * 1.25) + 16)
            draws = gen.standard_normal(m)
            kept = draws[draws > r]
            take = min(kept.size, need)
            out[filled : filled + take] = kept[:take]
            filled += take
        return out
    # Shifted-exponential proposal (acceptance stays bounded away from 0
    # as r grows, where plain rejection collapses like tail(r)).
    alpha = 0.5 * (r + math.sqrt(r * r + 4.0))
    while filled < size:
        need = size - filled
        m = min(1_000_000, int(need * 1.8) + 16)
        z = r + gen.standard_exponential(m) / alpha
        log_accept = -0.5 * (z - alpha) ** 2
        u = gen.random(m)
        kept = z[np.log(u) <= log_accept]
        take = min(kept.size, need)
        out[filled : filled + take] = kept[:take]
        filled += take
    return out


def truncated_gaussian(r: float, rng, size: Optional[int] = None):
    """Draw from the standard Gaussian conditioned on exceeding r.

    Returns a float when size is None, else an ndarray of that length.
    """
    gen = as_generator(rng)
    if size is None:
        return float(_truncated_gaussian_batch(r, gen, 1)[0])
    if size < 0:
        raise ValueError("size must be >= 0")
    return _truncated_gaussian_batch(r, gen, size)


def _limit_law_parameters(beta: float, a: float):
    if beta <= 0.0 or a <= 0.0:
        raise ValueError("beta and a must be positive")
    return a * math.sqrt(2.0 * beta)


def limit_law_sample(beta: float, a: float, rng, size: Optional[int] = None):
    """Sample the limit law of the right-conditioned normalized exit time:
    -(1/beta)*ln(N - r) + ln(2 beta)/(2 beta) with N Gaussian given N > r,
    r = a*sqrt(2 beta)."""
    r = _limit_law_parameters(beta, a)
    n = truncated_gaussian(r, rng, size)
    shift = math.log(2.0 * beta) / (2.0 * beta)
    if size is None:
        return -math.log(n - r) / beta + shift
    return -np.log(n - r) / beta + shift


def limit_law_cdf(beta: float, a: float, x: float) -> float:
    """Distribution function of the limit law at x."""
    r = _limit_law_parameters(beta, a)
    if beta * x < -690.0:
        return 0.0
    arg = r + math.sqrt(2.0 * beta) * math.exp(-beta * x)
    if arg > 300.0:
        return 0.0
    return math.exp(gaussian_log_tail(arg) - gaussian_log_tail(r))


def right_exit_probability(beta: float, a: float) -> float:
    """Small-noise limit of the right-exit probability: tail(a*sqrt(2 beta))."""
    r = _limit_law_parameters(beta, a)
    return gaussian_tail(r)


def _conditioned_block(args):
    problem, stream, start, stop = args
    hits = []
    for attempt in range(start, stop):
        record = simulate_exit_exact(problem, stream.substream(attempt))
        if record.side == "right":
            hits.append(
                (attempt, record.tau, record.normalized_time, record.steps_taken)
            )
    return hits


def _finalize(hit_rows, n_accept, attempts_cap):
    records = []
    indices = []
    for attempt, tau, normalized, steps in hit_rows[:n_accept]:
        records.append(
            ExitRecord(tau=tau, side="right", normalized_time=normalized, steps_taken=steps)
        )
        indices.append(attempt)
    attempts = indices[-1] + 1 if len(indices) == n_accept else attempts_cap
    return ConditionedSample(
        records=tuple(records), attempt_indices=tuple(indices), attempts=attempts
    )


def sample_conditioned_exits(
    problem: ExitProblem,
    n_accept: int,
    rng,
    budget: int = 10**9,
    workers: int = 1,
) -> ConditionedSample:
    """Rejection-sample right-exit records until n_accept are kept.

    The noise for attempt i depends only on (stream, i), and accepted
    records are returned in attempt order, so the result is identical for
    every worker count. Raises BudgetExceeded when the attempt cap is (or
    is projected to be) insufficient, which signals that the right exit is
    too rare for rejection and the limit-law sampler should be used.
    """
    if n_accept < 1:
        raise ValueError(f"n_accept must be >= 1, got {n_accept}")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if isinstance(rng, np.random.Generator):
        raise TypeError("conditioned sampling needs an RngStream (or seed), not a Generator")
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))

    p_limit = right_exit_probability(problem.model.beta, problem.a)
    projected = math.inf if p_limit <= 0.0 else n_accept / p_limit
    if projected > budget:
        raise BudgetExceeded(
            f"projected attempts ~{projected:.3g} exceed budget {budget} "
            f"(limit acceptance rate {p_limit:.3g}); use limit_law_sample instead"
        )

    if workers <= 1:
        hits = []
        attempts = 0
        while len(hits) < n_accept:
            if attempts >= budget:
                raise BudgetExceeded(
                    f"budget {budget} exhausted with {len(hits)} acceptances"
                )
            record = simulate_exit_exact(problem, stream.substream(attempts))
            if record.side == "right":
                hits.append(
                    (attempts, record.tau, record.normalized_time, record.steps_taken)
                )
            attempts += 1
        return _finalize(hits, n_accept, attempts)

    hits = []
    next_block = 0
    max_blocks = int(math.ceil(budget / _BLOCK_ATTEMPTS))
    estimate = int(math.ceil((n_accept + 4.0 * math.sqrt(n_accept) + 16.0) / p_limit))
    wave_blocks = max(workers, int(math.ceil(estimate / _BLOCK_ATTEMPTS)))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        while len(hits) < n_accept:
            if next_block >= max_blocks:
                raise BudgetExceeded(
                    f"budget {budget} exhausted with {len(hits)} acceptances"
                )
            wave = range(next_block, min(next_block + wave_blocks, max_blocks))
            tasks = [
                (
                    problem,
                    stream,
                    b * _BLOCK_ATTEMPTS,
                    min((b + 1) * _BLOCK_ATTEMPTS, budget),
                )
                for b in wave
            ]
            for block_hits in pool.map(_conditioned_block, tasks):
                hits.extend(block_hits)
            next_block = wave.stop
            wave_blocks = max(workers, wave_blocks // 2)
    return _finalize(hits, n_accept, next_block * _BLOCK_ATTEMPTS)
