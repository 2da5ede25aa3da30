from itertools import combinations

import numpy as np
import pytest

from conformist import (
    CONVERGED_TO_POINT,
    DIVERGED,
    OSCILLATING_CORE,
    UNDECIDED,
    BadInitial,
    DistributionSpec,
    InvalidK,
    Outcome,
    PointConfiguration,
    RunConfig,
    classify,
    config_from_json,
    energy,
    init_state,
    run,
    step,
    stream_for,
)
from conftest import FIVE_POINTS


def uniform_cfg(**kw):
    base = dict(
        N=6,
        K=1,
        dim=1,
        dist=DistributionSpec("UniformCube", 1),
        seed=101,
        max_steps=2000,
    )
    base.update(kw)
    return RunConfig(**base)


def bernoulli_cfg(**kw):
    base = dict(
        N=4,
        K=2,
        dim=1,
        dist=DistributionSpec("Bernoulli", 1, {"p": 0.5}),
        seed=55,
        max_steps=10_000,
    )
    base.update(kw)
    return RunConfig(**base)


class TestRunConfig:
    def test_k_range_enforced(self):
        with pytest.raises(InvalidK):
            uniform_cfg(K=5)
        with pytest.raises(InvalidK):
            uniform_cfg(N=2, K=1)

    def test_2k_equal_n_allowed_but_flagged(self):
        cfg = bernoulli_cfg()
        assert not cfg.assumption_2k_lt_n
        assert uniform_cfg().assumption_2k_lt_n

    def test_dim_mismatch(self):
        with pytest.raises(BadInitial):
            uniform_cfg(dim=2)

    def test_initial_points_shape_checked(self):
        with pytest.raises(BadInitial):
            uniform_cfg(initial_points=((0.0,),) * 5)
        with pytest.raises(BadInitial):
            uniform_cfg(initial_points=((0.0, 1.0),) * 6)

    def test_json_roundtrip(self):
        cfg = uniform_cfg(initial_points=((0.0,), (0.1,), (0.2,), (0.3,), (0.4,), (0.5,)))
        assert config_from_json(cfg.to_json_dict()) == cfg


class TestInitState:
    def test_explicit_points_verbatim(self):
        cfg = RunConfig(
            N=5,
            K=3,
            dim=1,
            dist=DistributionSpec("Gaussian", 1),
            seed=1,
            max_steps=10,
            initial_points=tuple((v,) for v in FIVE_POINTS),
        )
        state = init_state(cfg, stream_for(1, 0))
        assert state.points[:, 0].tolist() == list(FIVE_POINTS)

    def test_sampled_points_in_support(self):
        cfg = bernoulli_cfg(N=5, K=1)
        state = init_state(cfg, stream_for(2, 0))
        assert state.n == 5
        assert set(np.unique(state.points)) <= {0.0, 1.0}

    def test_uniform_cube_3d(self):
        cfg = RunConfig(
            N=8, K=1, dim=3, dist=DistributionSpec("UniformCube", 3), seed=3, max_steps=10
        )
        state = init_state(cfg, stream_for(3, 0))
        assert state.points.shape == (8, 3)
        assert ((state.points >= 0) & (state.points < 1)).all()


class TestStep:
    def test_distant_sample_rejected(self):
        # core (0, 0.1, 0.2): D = 0.2 and the rejection threshold is
        # D * sqrt(N-K-1) = 0.2 * sqrt(2) ~ 0.283; a sample at 10 is far
        # beyond it and must be thrown away
        far = DistributionSpec("FiniteDiscrete", 1, {"values": [10.0], "weights": [1.0]})
        cfg = RunConfig(N=4, K=1, dim=1, dist=far, seed=4, max_steps=10)
        state = PointConfiguration([0.0, 0.1, 0.2, 5.0])
        new_state, rec = step(state, cfg, stream_for(4, 0), current_core=(0, 1, 2), t=1)
        assert rec.all_samples_rejected
        assert not rec.core_changed
        assert rec.min_sample_core_dist == pytest.approx(9.8)
        # brute force over the 4 removals of the new pool
        pool = new_state.points
        energies = {
            rem: energy(PointConfiguration(np.delete(pool, rem, axis=0)))
            for rem in range(4)
        }
        assert min(energies, key=energies.get) == 3
        assert rec.F == pytest.approx(energies[3])

    def test_pool_convention(self):
        cfg = uniform_cfg(N=5, max_steps=10)
        state = PointConfiguration([0.0, 0.1, 0.2, 0.3, 0.9])
        gen = stream_for(5, 0)
        new_state, rec = step(state, cfg, gen, current_core=(0, 1, 2, 3), t=1)
        # rows: previous core in kept order, then the fresh draw
        assert new_state.points[:4, 0].tolist() == [0.0, 0.1, 0.2, 0.3]
        assert new_state.n == 5

    def test_identical_pool_keeps_zero_energy(self):
        atom = DistributionSpec("FiniteDiscrete", 1, {"values": [2.0], "weights": [1.0]})
        cfg = RunConfig(N=4, K=1, dim=1, dist=atom, seed=6, max_steps=10)
        state = PointConfiguration([2.0, 2.0, 2.0, 2.0])
        _, rec = step(state, cfg, stream_for(6, 0), current_core=(0, 1, 2), t=1)
        assert rec.F == 0.0
        assert rec.tie_count == 4

    def test_chained_steps_match_run_on_atomic_law(self):
        # exact-tie reservoir draws must line up between the jitted loop
        # and the library path, so a two-atom chain agrees bit for bit;
        # the kept pair is recovered from mu' (both kept points equal it)
        cfg = bernoulli_cfg(max_steps=60, seed=29)
        traj = run(cfg)
        gen = stream_for(cfg.seed, 0)
        state = init_state(cfg, gen)
        from conformist import select_core

        sel = select_core(state, cfg.K, gen)
        assert sel.core_energy == traj.F[0]
        kept = sel.kept
        for t in range(1, len(traj)):
            state, rec = step(state, cfg, gen, current_core=kept, t=t)
            assert rec.F == traj.F[t]
            assert rec.mu_core[0] == traj.mu[t, 0]
            assert rec.all_samples_rejected == bool(traj.rejected[t])
            assert rec.tie_count == traj.tie_count[t]
            assert rec.F == 0.0
            matching = [
                i for i in range(cfg.N) if state.points[i, 0] == rec.mu_core[0]
            ]
            kept = tuple(matching[:2])

    def test_chained_steps_match_run(self):
        cfg = uniform_cfg(N=5, max_steps=40, seed=17)
        traj = run(cfg)
        gen = stream_for(cfg.seed, 0)
        state = init_state(cfg, gen)
        from conformist import select_core

        sel = select_core(state, cfg.K, gen)
        assert sel.core_energy == pytest.approx(traj.F[0], abs=1e-12)
        core = sel.kept
        for t in range(1, 41):
            state, rec = step(state, cfg, gen, current_core=core, t=t)
            assert rec.F == pytest.approx(traj.F[t], rel=1e-12, abs=1e-12)
            assert rec.D == pytest.approx(traj.D[t], rel=1e-12, abs=1e-12)
            core = tuple(range(cfg.N - cfg.K)) if rec.all_samples_rejected else None
            if core is None:
                # fresh sample accepted: kept rows of the new pool are not
                # simply the first N-K, so recover them from the pool order
                m = cfg.N - cfg.K
                sel = None
                for rem in combinations(range(cfg.N), cfg.K):
                    kept = tuple(i for i in range(cfg.N) if i not in rem)
                    e = energy(state.subset(kept))
                    if sel is None or e < sel[0]:
                        sel = (e, kept)
                core = sel[1]


class TestRun:
    def test_five_point_first_record(self):
        cfg = RunConfig(
            N=5,
            K=3,
            dim=1,
            dist=DistributionSpec("Gaussian", 1),
            seed=7,
            max_steps=5,
            initial_points=tuple((v,) for v in FIVE_POINTS),
        )
        traj = run(cfg)
        rec = traj.record(0)
        assert rec.F == pytest.approx(0.5, abs=1e-12)
        assert rec.D == pytest.approx(1.0)
        assert rec.mu_core[0] == pytest.approx(28.5)
        assert traj.initial_points_unverified

    def test_degenerate_start_converges_immediately_with_empty_window(self):
        atom = DistributionSpec("FiniteDiscrete", 1, {"values": [3.0], "weights": [1.0]})
        cfg = RunConfig(
            N=5, K=1, dim=1, dist=atom, seed=8, max_steps=100,
            initial_points=((3.0,),) * 5, move_window=0,
        )
        traj = run(cfg)
        assert len(traj) == 1
        assert traj.outcome.kind == CONVERGED_TO_POINT
        assert traj.outcome.phi[0] == pytest.approx(3.0)

    def test_degenerate_start_waits_for_full_window(self):
        atom = DistributionSpec("FiniteDiscrete", 1, {"values": [3.0], "weights": [1.0]})
        cfg = RunConfig(
            N=5, K=1, dim=1, dist=atom, seed=9, max_steps=100,
            initial_points=((3.0,),) * 5, move_window=20,
        )
        traj = run(cfg)
        assert len(traj) == 21
        assert traj.outcome.kind == CONVERGED_TO_POINT
        assert traj.outcome.evidence["steps"] == 20

    def test_bernoulli_oscillates(self):
        traj = run(bernoulli_cfg())
        assert traj.outcome.kind == OSCILLATING_CORE
        assert traj.outcome.evidence["crossings"] >= 50
        # the core barycenter only ever sits on the atoms
        assert set(np.unique(traj.mu)) <= {0.0, 1.0}

    def test_reproducible_bit_identical(self):
        cfg = uniform_cfg(seed=123, max_steps=500)
        a = run(cfg)
        b = run(cfg)
        assert np.array_equal(a.F, b.F)
        assert np.array_equal(a.D, b.D)
        assert np.array_equal(a.mu, b.mu)
        assert np.array_equal(a.tie_count, b.tie_count)
        assert np.array_equal(a.final_core, b.final_core)
        assert a.outcome.kind == b.outcome.kind

    def test_replicas_differ(self):
        cfg = uniform_cfg(seed=123, max_steps=200)
        a = run(cfg, replica=0)
        b = run(cfg, replica=1)
        assert not np.array_equal(a.F, b.F)

    def test_prefix_property(self):
        # a shorter budget yields a prefix of the longer run's records
        long = run(uniform_cfg(seed=31, max_steps=300))
        short = run(uniform_cfg(seed=31, max_steps=120))
        n = len(short)
        assert np.array_equal(short.F, long.F[:n])
        assert np.array_equal(short.mu, long.mu[:n])

    def test_divergence_radius(self):
        far = DistributionSpec("FiniteDiscrete", 1, {"values": [5.0e6], "weights": [1.0]})
        cfg = RunConfig(N=5, K=1, dim=1, dist=far, seed=10, max_steps=50)
        traj = run(cfg)
        assert traj.outcome.kind == DIVERGED
        assert len(traj) == 1

    def test_final_core_matches_records(self):
        cfg = uniform_cfg(seed=77, max_steps=400)
        traj = run(cfg)
        core_cfg = PointConfiguration(traj.final_core)
        assert energy(core_cfg) == pytest.approx(float(traj.F[-1]), rel=1e-9, abs=1e-12)
        assert traj.final_core.shape == (cfg.N - cfg.K, cfg.dim)


class TestOtherLaws:
    def test_product_law_run_clean(self):
        spec = DistributionSpec(
            "ProductOfOneDim",
            2,
            {
                "components": [
                    DistributionSpec("Cauchy", 1),
                    DistributionSpec("UniformCube", 1),
                ]
            },
        )
        cfg = RunConfig(N=5, K=1, dim=2, dist=spec, seed=61, max_steps=3000)
        traj = run(cfg)
        from conformist import check_monotone, check_rejection, check_sandwich

        assert check_monotone(traj) == []
        assert check_sandwich(traj) == []
        triggers, violations = check_rejection(traj)
        assert violations == 0

    def test_mixture_law_run_deterministic(self):
        spec = DistributionSpec(
            "Mixture",
            1,
            {
                "weights": [0.5, 0.5],
                "components": [
                    DistributionSpec("Gaussian", 1, {"mean": -4.0, "sd": 0.2}),
                    DistributionSpec("Gaussian", 1, {"mean": 4.0, "sd": 0.2}),
                ],
            },
        )
        cfg = RunConfig(N=6, K=2, dim=1, dist=spec, seed=62, max_steps=2000)
        a = run(cfg)
        b = run(cfg)
        assert np.array_equal(a.F, b.F)
        from conformist import check_monotone

        assert check_monotone(a) == []

    def test_records_iteration(self):
        traj = run(uniform_cfg(N=5, max_steps=20, seed=63))
        recs = list(traj.records())
        assert len(recs) == len(traj)
        assert [r.t for r in recs] == list(range(len(traj)))
        assert not recs[0].core_changed
        assert all(r.F >= 0 and r.D >= 0 and r.tie_count >= 1 for r in recs)


class TestClassify:
    def test_threshold_override(self):
        traj = run(bernoulli_cfg(max_steps=3000))
        assert classify(traj).kind == OSCILLATING_CORE
        assert classify(traj, {"osc_min_crossings": 10**9}).kind == UNDECIDED

    def test_tol_f_override(self):
        cfg = uniform_cfg(seed=41, max_steps=3000, move_window=100)
        traj = run(cfg)
        assert traj.outcome.kind == UNDECIDED
        # an absurdly loose energy bar flips the end state to converged
        loose = classify(traj, {"tol_F": 10.0, "tol_move": 10.0, "move_window": 100})
        assert loose.kind == CONVERGED_TO_POINT

    def test_outcome_phi_consistency(self):
        with pytest.raises(ValueError):
            Outcome(CONVERGED_TO_POINT, None, {})
        with pytest.raises(ValueError):
            Outcome(UNDECIDED, np.zeros(1), {})
        with pytest.raises(ValueError):
            Outcome("Weird", None, {})

    def test_evidence_fields(self):
        traj = run(uniform_cfg(seed=51, max_steps=300))
        ev = traj.outcome.evidence
        for key in ("final_F", "final_D", "final_origin_distance", "core_changes", "crossings", "steps"):
            assert key in ev
        assert ev["steps"] == len(traj) - 1
