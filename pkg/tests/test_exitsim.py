"""Exit-time simulation: integrators, conditioning, pathwise coupling,
and the closed-form limit law."""
import math

import numpy as np
import pytest

from exitgumbel import (
    BudgetExceeded,
    EmpiricalSample,
    ExitProblem,
    GuardExceeded,
    LinearDriftModel,
    NoiseRealization,
    RngStream,
    duhamel_exit_time,
    gaussian_cdf,
    ks_one_sample,
    ks_two_sample,
    limit_law_cdf,
    limit_law_sample,
    limit_normalized_time,
    log_residual_density,
    replay_exit_from_noise,
    right_exit_probability,
    sample_conditioned_exits,
    sample_noise,
    simulate_exit_euler,
    simulate_exit_exact,
    simulate_path,
    truncated_gaussian,
)

BETA1 = LinearDriftModel(beta=1.0)


def _problem(**kw):
    defaults = dict(model=BETA1, epsilon=0.01, a=1.0, step=1e-3)
    defaults.update(kw)
    return ExitProblem(**defaults)


class TestExitProblem:
    def test_start_inside_domain_required(self):
        with pytest.raises(ValueError):
            _problem(epsilon=0.5, a=2.0)  # start at -1.0, on the boundary
        with pytest.raises(ValueError):
            _problem(epsilon=0.5, a=3.0)  # start outside
        with pytest.raises(ValueError):
            _problem(a=-1.0)

    def test_step_cap(self):
        with pytest.raises(ValueError):
            _problem(step=0.02)
        with pytest.raises(ValueError):
            _problem(step=0.0)

    def test_guard_default_and_minimum(self):
        p = _problem()
        assert p.guard_horizon == pytest.approx(math.log(100.0) + 40.0, rel=1e-12)
        with pytest.raises(ValueError):
            _problem(guard_horizon=math.log(100.0) + 10.0)

    def test_centering(self):
        p = _problem(epsilon=0.001)
        assert p.centering_time == pytest.approx(math.log(1000.0), rel=1e-12)


class TestIntegrators:
    def test_exact_deterministic(self):
        p = _problem()
        a = simulate_exit_exact(p, RngStream(99).substream(3))
        b = simulate_exit_exact(p, RngStream(99).substream(3))
        assert a == b

    def test_euler_deterministic(self):
        p = _problem()
        a = simulate_exit_euler(p, RngStream(99).substream(3))
        b = simulate_exit_euler(p, RngStream(99).substream(3))
        assert a == b

    def test_record_consistency(self):
        p = _problem()
        rec = simulate_exit_exact(p, RngStream(1).substream(0))
        assert rec.side in ("left", "right")
        assert rec.tau == pytest.approx(rec.steps_taken * p.step, rel=1e-12)
        assert rec.normalized_time == pytest.approx(rec.tau - p.centering_time, rel=1e-9)
        assert rec.tau <= p.guard_horizon

    def test_start_near_left_boundary_exits_left_fast(self):
        # boundary of validity: -epsilon*a just inside the left endpoint
        p = _problem(epsilon=0.999, a=1.0)
        rec = simulate_exit_exact(p, RngStream(4).substream(0))
        assert rec.side == "left"
        assert rec.tau <= 0.05

    def test_normalized_time_stabilizes_as_epsilon_shrinks(self):
        # same substream -> same driving noise in Y units; only the exit
        # threshold moves, so the normalized time settles pathwise
        times = []
        for eps in (1e-1, 1e-2, 1e-3, 1e-4):
            rec = simulate_exit_exact(_problem(epsilon=eps), RngStream(5).substream(2))
            times.append(rec.normalized_time)
        diffs = [abs(a - b) for a, b in zip(times, times[1:])]
        assert diffs[-1] <= 0.02
        assert diffs[-1] <= diffs[0]

    def test_right_exit_fraction_matches_limit(self):
        p = _problem()
        stream = RngStream(2024)
        n = 30_000
        hits = sum(
            simulate_exit_exact(p, stream.substream(i)).side == "right" for i in range(n)
        )
        want = right_exit_probability(1.0, 1.0)
        se = math.sqrt(want * (1.0 - want) / n)
        assert abs(hits / n - want) <= 3.0 * se

    def test_scale_coupling_exact_identity(self):
        # identical noise: the path for c*epsilon is c times the path
        p1 = _problem(epsilon=0.002)
        p3 = _problem(epsilon=0.006)
        x1 = simulate_path(p1, RngStream(8).substream(0), 100)
        x3 = simulate_path(p3, RngStream(8).substream(0), 100)
        assert np.max(np.abs(x3 - 3.0 * x1)) <= 1e-12

    def test_marginal_law_of_exact_step(self):
        # exact transition: X(t) is Gaussian with known mean/variance for
        # any step size; moment-match at t = 1 over 1e5 replicas
        beta, eps, a = 0.7, 0.02, 1.5
        p = ExitProblem(model=LinearDriftModel(beta), epsilon=eps, a=a, step=1e-2)
        stream = RngStream(21)
        n = 100_000
        vals = np.fromiter(
            (simulate_path(p, stream.substream(i), 100)[-1] for i in range(n)),
            dtype=float,
            count=n,
        )
        mean_t = -eps * a * math.exp(beta)
        var_t = eps * eps * math.expm1(2.0 * beta) / (2.0 * beta)
        assert abs(vals.mean() - mean_t) <= 4.0 * math.sqrt(var_t / n)
        assert abs(vals.var() - var_t) <= 4.0 * var_t * math.sqrt(2.0 / n)

    def test_exact_vs_euler_same_law(self):
        p = _problem()
        ex = [
            simulate_exit_exact(p, RngStream(42, 1).substream(i)).normalized_time
            for i in range(10_000)
        ]
        eu = [
            simulate_exit_euler(p, RngStream(42, 2).substream(i)).normalized_time
            for i in range(10_000)
        ]
        ks = ks_two_sample(EmpiricalSample.from_values(ex), EmpiricalSample.from_values(eu))
        assert ks <= 0.03

    def test_euler_step_refinement_approaches_exact(self):
        # common random numbers across step sizes
        def rate(simulate, h):
            p = ExitProblem(model=BETA1, epsilon=0.05, a=1.0, step=h)
            stream = RngStream(7, 3)
            n = 10_000
            return (
                sum(simulate(p, stream.substream(i)).side == "right" for i in range(n)) / n
            )

        reference = rate(simulate_exit_exact, 1e-3)
        coarse = rate(simulate_exit_euler, 8e-3)
        fine = rate(simulate_exit_euler, 4e-3)
        assert abs(fine - reference) < abs(coarse - reference)


class TestNoise:
    def test_shape_and_invariants(self):
        noise = sample_noise(1.0, 1e-3, RngStream(7).substream(0))
        assert noise.values[0] == 0.0
        assert noise.sup_abs >= abs(noise.limit_value)
        assert math.exp(-noise.beta * noise.times[-1]) <= 1e-9
        assert noise.step == pytest.approx(1e-3, rel=1e-12)

    def test_horizon_validation(self):
        with pytest.raises(ValueError):
            NoiseRealization(
                beta=1.0,
                times=np.linspace(0.0, 5.0, 501),
                values=np.zeros(501),
                limit_value=0.0,
                sup_abs=0.0,
            )

    def test_limit_value_variance(self):
        # infinite-horizon limit is centered Gaussian with variance 1/(2*beta)
        beta = 1.0
        vals = np.array(
            [
                sample_noise(beta, 1e-3, RngStream(30).substream(i)).limit_value
                for i in range(500)
            ]
        )
        target = 1.0 / (2.0 * beta)
        assert abs(vals.mean()) <= 4.0 * math.sqrt(target / 500)
        assert abs(vals.var() - target) <= 4.0 * target * math.sqrt(2.0 / 500)


def _subcritical_noise(beta=1.0, step=1e-2, a=1.0, epsilon=0.01):
    # synthetic realization whose gap to a shrinks like exp(-beta*t), so
    # epsilon*exp(beta*t)*|-a + I_t| stays below 1 on the whole grid and
    # the crossing never happens
    n = int(math.ceil(math.log(1e9) / (beta * step))) + 2
    times = np.arange(n + 1) * step
    gap = np.minimum(a, (0.5 / epsilon) * np.exp(-beta * times))
    values = a - gap
    return NoiseRealization(
        beta=beta,
        times=times,
        values=values,
        limit_value=float(values[-1]),
        sup_abs=float(np.max(np.abs(values))),
    )


class TestPathwiseCoupling:
    def test_duhamel_matches_replay_exactly(self):
        # both read the same discrete identity, so exit times coincide to
        # within one step even at knife edges
        p = _problem(step=1e-4)
        mismatches = 0
        for i in range(50):
            noise = sample_noise(1.0, 1e-4, RngStream(70).substream(i))
            d = duhamel_exit_time(noise, p)
            r = replay_exit_from_noise(p, noise)
            assert abs(d.tau - r.tau) <= 2.0 * p.step
            mismatches += d.side != r.side
        assert mismatches == 0

    def test_sides_agree_when_gap_is_clear(self):
        p = _problem()
        checked = 0
        i = 0
        while checked < 1000:
            noise = sample_noise(1.0, 1e-3, RngStream(71).substream(i))
            i += 1
            if abs(-p.a + noise.limit_value) <= 0.1:
                continue
            d = duhamel_exit_time(noise, p)
            r = replay_exit_from_noise(p, noise)
            assert d.side == r.side
            expected = "right" if -p.a + noise.limit_value > 0 else "left"
            assert d.side == expected
            checked += 1

    def test_normalized_time_converges_to_noise_limit(self):
        for i in range(10):
            noise = sample_noise(1.0, 1e-3, RngStream(72).substream(i))
            if abs(-1.0 + noise.limit_value) <= 0.1:
                continue
            target = limit_normalized_time(noise, 1.0)
            errs = [
                abs(duhamel_exit_time(noise, _problem(epsilon=eps)).normalized_time - target)
                for eps in (1e-1, 1e-3)
            ]
            assert errs[1] <= errs[0]
            assert errs[1] <= 0.05

    def test_guard_exceeded_when_gap_vanishes(self):
        noise = _subcritical_noise()
        p = ExitProblem(model=BETA1, epsilon=0.01, a=1.0, step=1e-2)
        with pytest.raises(GuardExceeded):
            duhamel_exit_time(noise, p)
        with pytest.raises(GuardExceeded):
            replay_exit_from_noise(p, noise)

    def test_parameter_mismatch_rejected(self):
        noise = sample_noise(1.0, 1e-3, RngStream(73).substream(0))
        bad_beta = ExitProblem(model=LinearDriftModel(2.0), epsilon=0.01, a=1.0, step=1e-3)
        with pytest.raises(ValueError):
            duhamel_exit_time(noise, bad_beta)
        bad_step = _problem(step=5e-3)
        with pytest.raises(ValueError):
            replay_exit_from_noise(bad_step, noise)


class TestConditionedSampling:
    def test_rejects_bad_arguments(self):
        p = _problem()
        with pytest.raises(ValueError):
            sample_conditioned_exits(p, 0, RngStream(1))
        with pytest.raises(TypeError):
            sample_conditioned_exits(p, 1, RngStream(1).generator())

    def test_keeps_only_right_exits_in_attempt_order(self):
        p = _problem()
        cs = sample_conditioned_exits(p, 40, RngStream(42))
        assert len(cs.records) == 40
        assert all(r.side == "right" for r in cs.records)
        assert list(cs.attempt_indices) == sorted(cs.attempt_indices)
        assert cs.attempts == cs.attempt_indices[-1] + 1
        assert 0.0 < cs.acceptance_rate < 1.0

    def test_deterministic_rerun(self):
        p = _problem()
        a = sample_conditioned_exits(p, 25, RngStream(11))
        b = sample_conditioned_exits(p, 25, RngStream(11))
        assert a == b

    def test_worker_count_invariance(self):
        p = _problem()
        serial = sample_conditioned_exits(p, 30, RngStream(17), workers=1)
        parallel = sample_conditioned_exits(p, 30, RngStream(17), workers=2)
        assert serial == parallel

    def test_budget_projection_raises_early(self):
        # a*sqrt(2*beta) ~ 6: limit acceptance ~1e-9, hopeless for rejection
        p = ExitProblem(model=BETA1, epsilon=1e-4, a=4.25, step=1e-3)
        with pytest.raises(BudgetExceeded):
            sample_conditioned_exits(p, 10, RngStream(1))
        with pytest.raises(BudgetExceeded):
            sample_conditioned_exits(_problem(), 1000, RngStream(1), budget=500)

    def test_acceptance_rate_near_limit(self):
        p = _problem()
        cs = sample_conditioned_exits(p, 400, RngStream(42))
        want = right_exit_probability(1.0, 1.0)
        se = math.sqrt(want * (1.0 - want) / cs.attempts)
        assert abs(cs.acceptance_rate - want) <= 3.0 * se


class TestTruncatedGaussian:
    def test_support(self):
        for r in (-10.0, 0.5, 2.0, 5.0):
            draws = truncated_gaussian(r, RngStream(50), size=2000)
            assert np.all(draws > r)

    def test_scalar_mode(self):
        v = truncated_gaussian(3.0, RngStream(51))
        assert isinstance(v, float) and v > 3.0

    def test_deterministic(self):
        a = truncated_gaussian(1.5, RngStream(52), size=100)
        b = truncated_gaussian(1.5, RngStream(52), size=100)
        assert np.array_equal(a, b)

    def test_mean_at_r2(self):
        # oracle: pdf(2)/tail(2), cross-checked by quadrature offline
        draws = truncated_gaussian(2.0, RngStream(53), size=1_000_000)
        want = 2.3732155328228408673
        sd = math.sqrt(1.0 + 2.0 * want - want * want)
        assert abs(draws.mean() - want) <= 3.0 * sd / 1000.0

    def test_vacuous_truncation_matches_gaussian(self):
        draws = truncated_gaussian(-10.0, RngStream(5), size=100_000)
        s = EmpiricalSample.from_values(draws)
        assert ks_one_sample(s, gaussian_cdf) <= 0.005


class TestLimitLaw:
    def test_sampler_matches_cdf(self):
        draws = limit_law_sample(1.0, 1.0, RngStream(11), size=100_000)
        s = EmpiricalSample.from_values(draws)
        assert ks_one_sample(s, lambda x: limit_law_cdf(1.0, 1.0, x)) <= 0.005

    def test_all_samples_finite(self):
        draws = limit_law_sample(0.5, 2.0, RngStream(54), size=50_000)
        assert np.all(np.isfinite(draws))

    def test_additive_constant_vanishes_at_half_beta(self):
        # ln(2*beta) = 0 at beta = 1/2: the sample is exactly -2*ln(N - r)
        r = 2.0 * math.sqrt(2.0 * 0.5)
        raw = truncated_gaussian(r, RngStream(55), size=1000)
        want = -2.0 * np.log(raw - r)
        got = limit_law_sample(0.5, 2.0, RngStream(55), size=1000)
        assert np.allclose(got, want, rtol=1e-12, atol=0.0)

    def test_cdf_is_valid(self):
        xs = np.linspace(-3.0, 25.0, 200)
        vals = [limit_law_cdf(1.0, 1.0, x) for x in xs]
        assert all(0.0 <= v <= 1.0 for v in vals)
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        assert limit_law_cdf(1.0, 1.0, -200.0) == 0.0
        assert limit_law_cdf(1.0, 1.0, 60.0) == pytest.approx(1.0, rel=1e-9)

    def test_cdf_derivative_matches_density(self):
        # chain rule: the limit-law density is beta * p(r, beta*x - ln(2 beta)/2)
        beta, a = 1.0, 1.0
        r = a * math.sqrt(2.0 * beta)
        h = 1e-5
        for x in np.linspace(-1.0, 6.0, 29):
            fd = (limit_law_cdf(beta, a, x + h) - limit_law_cdf(beta, a, x - h)) / (2.0 * h)
            dens = beta * log_residual_density(r, beta * x - 0.5 * math.log(2.0 * beta))
            assert abs(fd - dens) <= 1e-6

    def test_median_bisection_vs_monte_carlo(self):
        beta, a = 1.0, 1.0
        lo, hi = -5.0, 30.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if limit_law_cdf(beta, a, mid) < 0.5:
                lo = mid
            else:
                hi = mid
        median = 0.5 * (lo + hi)
        assert median == pytest.approx(1.4126350425433338157, abs=1e-9)
        draws = limit_law_sample(beta, a, RngStream(13), size=100_000)
        assert abs(float(np.median(draws)) - median) <= 0.01

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            limit_law_cdf(0.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            limit_law_sample(1.0, -1.0, RngStream(1))
