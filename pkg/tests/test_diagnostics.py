import numpy as np
import pytest

from conformist import (
    NOT_APPLICABLE,
    OSCILLATING_CORE,
    UNDECIDED,
    DistributionSpec,
    Outcome,
    RunConfig,
    Trajectory,
    batch_run,
    check_monotone,
    check_rejection,
    check_sandwich,
    count_crossings,
    run,
    supermartingale_drift,
)
from conformist.engine import crossing_count


def fake_trajectory(F, D, mu, config=None, min_dist=None, changed=None):
    """Hand-built trajectory for negative controls."""
    F = np.asarray(F, dtype=float)
    n = len(F)
    D = np.asarray(D, dtype=float)
    mu = np.asarray(mu, dtype=float).reshape(n, -1)
    if config is None:
        config = RunConfig(
            N=6, K=1, dim=mu.shape[1],
            dist=DistributionSpec("UniformCube", mu.shape[1]),
            seed=0, max_steps=n,
        )
    changed = np.zeros(n, bool) if changed is None else np.asarray(changed, bool)
    rejected = ~changed
    rejected[0] = False
    if min_dist is None:
        min_dist = np.full(n, np.inf)
    return Trajectory(
        config=config,
        F=F,
        D=D,
        mu=mu,
        core_changed=changed,
        rejected=rejected,
        min_sample_dist=np.asarray(min_dist, dtype=float),
        tie_count=np.ones(n, np.int64),
        final_core=np.zeros((config.N - config.K, config.dim)),
        stop_code=0,
        outcome=Outcome(UNDECIDED, None, {}),
        initial_points_unverified=False,
    )


def uniform_run(seed=3, steps=3000, **kw):
    cfg = RunConfig(
        N=6, K=1, dim=1, dist=DistributionSpec("UniformCube", 1),
        seed=seed, max_steps=steps, **kw,
    )
    return run(cfg)


class TestCheckMonotone:
    def test_conforming_run_clean(self):
        assert check_monotone(uniform_run()) == []

    def test_injected_increase_caught(self):
        traj = fake_trajectory(
            F=[1.0, 0.5, 0.8, 0.1],
            D=[1.0, 0.9, 0.9, 0.4],
            mu=[0.0, 0.0, 0.0, 0.0],
        )
        assert check_monotone(traj) == [1]

    def test_slack_tolerates_rounding(self):
        traj = fake_trajectory(
            F=[1.0, 1.0 + 5e-10],
            D=[1.0, 1.0],
            mu=[0.0, 0.0],
        )
        assert check_monotone(traj) == []


class TestCheckSandwich:
    def test_conforming_run_clean(self):
        assert check_sandwich(uniform_run(seed=4)) == []

    def test_range_above_upper_bound_caught(self):
        # D > sqrt(2F) is impossible for a real configuration
        traj = fake_trajectory(F=[0.5, 0.5], D=[1.0, 3.0], mu=[0.0, 0.0])
        assert 1 in check_sandwich(traj)

    def test_range_below_lower_bound_caught(self):
        # D < sqrt(2F/(N-K-1)) with N-K-1 = 4
        traj = fake_trajectory(F=[8.0], D=[1.0], mu=[0.0])
        assert check_sandwich(traj) == [0]

    def test_step_bound_caught(self):
        # D(t+1) > sqrt(2 F(t)) violates the one-step range bound
        traj = fake_trajectory(F=[0.02, 0.02], D=[0.15, 0.5], mu=[0.0, 0.0])
        assert 1 in check_sandwich(traj)


class TestCheckRejection:
    def test_heavy_tail_triggers_no_violations(self):
        cfg = RunConfig(
            N=5, K=1, dim=1, dist=DistributionSpec("Cauchy", 1),
            seed=6, max_steps=10_000,
        )
        result = check_rejection(run(cfg))
        assert result is not NOT_APPLICABLE
        triggers, violations = result
        assert triggers > 0
        assert violations == 0

    def test_bounded_law_triggers_once_tight(self):
        triggers, violations = check_rejection(uniform_run(seed=7, steps=20_000))
        assert triggers > 0
        assert violations == 0

    def test_not_applicable_when_2k_not_below_n(self):
        cfg = RunConfig(
            N=4, K=2, dim=1, dist=DistributionSpec("Bernoulli", 1, {"p": 0.5}),
            seed=8, max_steps=100,
        )
        assert check_rejection(run(cfg)) is NOT_APPLICABLE

    def test_fabricated_violation_detected(self):
        # a trigger step (distant samples) marked as core_changed
        traj = fake_trajectory(
            F=[0.5, 0.4],
            D=[1.0, 0.9],
            mu=[0.0, 0.0],
            min_dist=[np.inf, 10.0],
            changed=[False, True],
        )
        assert check_rejection(traj) == (1, 1)


class TestDrift:
    def test_zero_c_reduces_to_monotone_sqrt(self):
        traj = uniform_run(seed=9)
        report = supermartingale_drift(traj, c=0.0, r_plus=0.0)
        deltas = np.diff(np.sqrt(traj.F))
        assert report.mean_delta_h == pytest.approx(float(deltas.mean()))
        assert report.mean_delta_h <= 0.0
        assert report.n_transitions == len(traj) - 1

    def test_constant_trajectory_zero_drift(self):
        traj = fake_trajectory(F=[0.0] * 5, D=[0.0] * 5, mu=[1.0] * 5)
        report = supermartingale_drift(traj, c=0.01, r_plus=0.0)
        assert report.mean_delta_h == 0.0
        assert report.stderr == 0.0

    def test_wrong_regime(self):
        cfg = RunConfig(
            N=6, K=2, dim=1, dist=DistributionSpec("UniformCube", 1),
            seed=10, max_steps=200,
        )
        assert supermartingale_drift(run(cfg), 0.01, 0.0) is NOT_APPLICABLE
        cfg2 = RunConfig(
            N=6, K=1, dim=2, dist=DistributionSpec("UniformCube", 2),
            seed=10, max_steps=200,
        )
        assert supermartingale_drift(run(cfg2), 0.01, 0.0) is NOT_APPLICABLE

    def test_gaussian_batch_nonpositive_drift(self):
        # Monte Carlo surrogate: over 100 seeds of 1e5 steps the mean
        # one-step drift at c=0.01 should not exceed twice its standard
        # error in at least 95 of them
        cfg = RunConfig(
            N=5, K=1, dim=1, dist=DistributionSpec("Gaussian", 1),
            seed=11, max_steps=100_000,
        )
        ok = 0
        n_seeds = 100
        for rep in range(n_seeds):
            report = supermartingale_drift(run(cfg, replica=rep), c=0.01, r_plus=0.0)
            if report.mean_delta_h <= 2.0 * report.stderr:
                ok += 1
        assert ok >= 95


class TestCrossings:
    def test_monotone_series_at_most_one(self):
        traj = fake_trajectory(
            F=np.linspace(1, 0.5, 50),
            D=np.sqrt(np.linspace(2, 1, 50)),
            mu=np.linspace(-1, 1, 50),
        )
        assert count_crossings(traj, -0.5, 0.5) == 1

    def test_bernoulli_many_crossings(self):
        cfg = RunConfig(
            N=4, K=2, dim=1, dist=DistributionSpec("Bernoulli", 1, {"p": 0.5}),
            seed=12, max_steps=10_000,
        )
        assert count_crossings(run(cfg), 0.25, 0.75) >= 50

    def test_hysteresis_ignores_boundary_jitter(self):
        series = np.array([0.3, 0.45, 0.55, 0.45, 0.55, 0.3, 0.45])
        assert crossing_count(series, 0.4, 0.6) == 0
        # full traversals still count
        series2 = np.array([0.3, 0.7, 0.3, 0.7])
        assert crossing_count(series2, 0.4, 0.6) == 3

    def test_thinning_invariance(self):
        cfg = RunConfig(
            N=4, K=2, dim=1, dist=DistributionSpec("Bernoulli", 1, {"p": 0.5}),
            seed=13, max_steps=5000,
        )
        traj = run(cfg)
        a, b = 0.25, 0.75
        full = count_crossings(traj, a, b)
        series = traj.mu[:, 0]
        outside = (series <= a) | (series >= b)
        thinned = series[outside]  # keeps every threshold-straddling step
        assert crossing_count(thinned, a, b) == full

    def test_converged_run_quiet_after_burn_in(self):
        traj = uniform_run(seed=14, steps=20_000)
        series = traj.mu[:, 0]
        settled = series[len(series) // 2 :]
        phi = settled[-1]
        # an interval strictly away from the settle point sees no crossings
        a, b = phi + 0.05, phi + 0.15
        assert crossing_count(settled, a, b) == 0

    def test_validation(self):
        traj = uniform_run(seed=15, steps=100)
        with pytest.raises(ValueError):
            count_crossings(traj, 0.5, 0.5)
        cfg2 = RunConfig(
            N=5, K=1, dim=2, dist=DistributionSpec("UniformCube", 2),
            seed=16, max_steps=50,
        )
        with pytest.raises(ValueError):
            count_crossings(run(cfg2), 0.0, 1.0)


class TestBatchRun:
    def test_bernoulli_batch_counts(self):
        cfg = RunConfig(
            N=4, K=2, dim=1, dist=DistributionSpec("Bernoulli", 1, {"p": 0.5}),
            seed=17, max_steps=3000,
        )
        summary = batch_run(cfg, 6)
        assert summary.n_runs == 6
        assert sum(summary.outcome_counts.values()) == 6
        assert summary.outcome_counts[OSCILLATING_CORE] == 6
        assert summary.violation_counts["monotone"] == 0
        assert summary.violation_counts["sandwich"] == 0
        assert summary.violation_counts["rejection_triggers"] is None
        # F hits zero immediately: a two-atom pool always contains a pair
        assert summary.mean_time_to_tol_f == 0.0

    def test_reproducible(self):
        cfg = RunConfig(
            N=5, K=1, dim=1, dist=DistributionSpec("UniformCube", 1),
            seed=18, max_steps=500,
        )
        a = batch_run(cfg, 4)
        b = batch_run(cfg, 4)
        assert a == b

    def test_jobs_match_serial(self):
        cfg = RunConfig(
            N=5, K=1, dim=1, dist=DistributionSpec("UniformCube", 1),
            seed=19, max_steps=300,
        )
        serial = batch_run(cfg, 4, jobs=1)
        parallel = batch_run(cfg, 4, jobs=2)
        assert serial == parallel

    def test_explicit_seed_list(self):
        cfg = RunConfig(
            N=5, K=1, dim=1, dist=DistributionSpec("UniformCube", 1),
            seed=20, max_steps=300,
        )
        summary = batch_run(cfg, 3, seeds=[5, 9, 22])
        assert summary.replicas == (5, 9, 22)
        assert [r["replica"] for r in summary.runs] == [5, 9, 22]

    def test_f_quantiles_nonincreasing(self):
        cfg = RunConfig(
            N=6, K=1, dim=2, dist=DistributionSpec("UniformCube", 2),
            seed=21, max_steps=2000,
        )
        summary = batch_run(cfg, 5)
        medians = [row["median"] for row in summary.f_quantiles_at_checkpoints]
        assert medians == sorted(medians, reverse=True)
        assert [row["t"] for row in summary.f_quantiles_at_checkpoints] == [1, 10, 100, 1000, 2000]

    def test_rejects_bad_args(self):
        cfg = RunConfig(
            N=5, K=1, dim=1, dist=DistributionSpec("UniformCube", 1),
            seed=22, max_steps=10,
        )
        with pytest.raises(ValueError):
            batch_run(cfg, 0)
        with pytest.raises(ValueError):
            batch_run(cfg, 3, seeds=[1, 2])
