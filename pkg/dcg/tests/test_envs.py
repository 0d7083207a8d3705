import numpy as np
from django.test import SimpleTestCase

from dcg.envs import (
    DUTY_CYCLE_UNI, POINT_OMNI, POINT_TRAP_OMNI, TRAP_WALLS, env_reset, env_step,
    extract_descriptor, make_env_spec, rollout, rollout_batch,
)
from dcg.exceptions import EpisodeFinishedError, IncompleteEpisodeError
from dcg.nn import TANH_SCALED, MlpArch, mlp_forward, mlp_init


def crosses_wall(start, end):
    for x1, y1, x2, y2 in TRAP_WALLS:
        if x1 == x2:
            lo, hi = sorted((start[0], end[0]))
            if lo <= x1 <= hi and min(y1, y2) <= start[1] <= max(y1, y2):
                return True
        else:
            lo, hi = sorted((start[1], end[1]))
            if lo <= y1 <= hi and min(x1, x2) <= start[0] <= max(x1, x2):
                return True
    return False


def substep_oracle(start, end, substeps=10_000):
    """Last sub-step position reached before entering a wall."""
    position = np.asarray(start, dtype=np.float64)
    for k in range(1, substeps + 1):
        candidate = start + (end - start) * k / substeps
        if crosses_wall(position, candidate):
            return position
        position = candidate
    return position


def segments_intersect(p, q, a, b):
    """Row-wise test whether segments ``p[i] -> q[i]`` touch the segment ``a -> b``."""
    def orient(u, v, w):
        return np.sign((v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1])
                       - (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0]))

    return (orient(p, q, a) * orient(p, q, b) <= 0) & (orient(a, b, p) * orient(a, b, q) <= 0)


class EnvResetTests(SimpleTestCase):
    def test_point_starts_in_the_middle(self):
        spec = make_env_spec(POINT_OMNI)
        state = env_reset(spec)
        np.testing.assert_array_equal(state.position, [[0.5, 0.5]])
        np.testing.assert_array_equal(state.observation, [[0.5, 0.5, 0.0]])

    def test_reset_is_repeatable(self):
        spec = make_env_spec(POINT_TRAP_OMNI)
        np.testing.assert_array_equal(env_reset(spec).observation, env_reset(spec).observation)

    def test_duty_cycle_starts_at_zero(self):
        spec = make_env_spec(DUTY_CYCLE_UNI)
        state = env_reset(spec, batch_size=3)
        np.testing.assert_array_equal(state.position, np.zeros((3, 1)))
        np.testing.assert_array_equal(state.duty, np.zeros((3, 2)))
        self.assertEqual(state.observation.shape, (3, spec.state_dim))


class EnvStepTests(SimpleTestCase):
    def setUp(self):
        self.spec = make_env_spec(POINT_OMNI)

    def test_zero_action_earns_full_energy_bonus(self):
        _, reward = env_step(self.spec, env_reset(self.spec), np.zeros(2))
        self.assertEqual(reward, 1.5)

    def test_action_at_bound_earns_base_reward(self):
        _, reward = env_step(self.spec, env_reset(self.spec), np.array([1.0, -1.0]))
        self.assertAlmostEqual(reward, 1.0, places=12)

    def test_actions_are_clipped(self):
        state, reward = env_step(self.spec, env_reset(self.spec), np.array([5.0, 0.0]))
        np.testing.assert_allclose(state.position, [[0.51, 0.5]], rtol=1e-12)
        self.assertAlmostEqual(reward, 1.25, places=12)

    def test_stepping_past_the_horizon_raises(self):
        spec = make_env_spec(POINT_OMNI, episode_length=2)
        state = env_reset(spec)
        for _ in range(2):
            state, _ = env_step(spec, state, np.zeros(2))
        with self.assertRaises(EpisodeFinishedError):
            env_step(spec, state, np.zeros(2))

    def test_wall_stops_motion_on_the_near_side(self):
        spec = make_env_spec(POINT_TRAP_OMNI, dt=0.05)
        rng = np.random.default_rng(0)
        checked = 0
        for _ in range(200):
            start = np.array([rng.uniform(0.5, 0.62), rng.uniform(0.36, 0.64)])
            action = rng.uniform(-1.0, 1.0, size=2)
            end = np.clip(start + spec.dt * action, 0.0, 1.0)
            if not crosses_wall(start, end):
                continue
            state = env_reset(spec)
            state.position = start[None, :]
            state, _ = env_step(spec, state, action)
            position = state.position[0]
            self.assertLess(position[0], 0.62, msg=f"start {start} action {action} -> {position}")
            self.assertGreater(position[1], 0.35, msg=f"start {start} action {action} -> {position}")
            self.assertLess(position[1], 0.65, msg=f"start {start} action {action} -> {position}")
            np.testing.assert_allclose(position, substep_oracle(start, end), atol=2e-4)
            checked += 1
        self.assertGreater(checked, 10)

    def test_trap_blocks_straight_run(self):
        spec = make_env_spec(POINT_TRAP_OMNI)
        result = rollout(spec, lambda s: np.array([1.0, 0.0]))
        self.assertLess(result.descriptor[0], 0.62)
        self.assertGreater(result.descriptor[0], 0.61)
        self.assertEqual(result.descriptor[1], 0.5)

    def test_random_rollouts_never_pass_through_a_wall(self):
        spec = make_env_spec(POINT_TRAP_OMNI, dt=0.05)
        rng = np.random.default_rng(4)
        n = 64

        def random_policy(observations):
            actions = rng.uniform(-1.0, 1.0, size=(n, 2))
            actions[:n // 2, 0] = np.abs(actions[:n // 2, 0])
            return actions

        result = rollout_batch(spec, random_policy, n)
        starts = result.observations[..., :2].reshape(-1, 2)
        ends = result.next_observations[..., :2].reshape(-1, 2)
        for x1, y1, x2, y2 in TRAP_WALLS:
            hits = segments_intersect(starts, ends, np.array([x1, y1]), np.array([x2, y2]))
            self.assertFalse(hits.any(), msg=f"wall {(x1, y1, x2, y2)}: {starts[hits][:3]} -> {ends[hits][:3]}")
        # episodes pushed towards +x stay on the near side of the back wall
        self.assertTrue(np.all(result.descriptors[:n // 2, 0] < 0.62), msg=f"{result.descriptors[:n // 2]}")


class ExtractDescriptorTests(SimpleTestCase):
    def test_motionless_point_stays_in_the_middle(self):
        spec = make_env_spec(POINT_OMNI)
        result = rollout(spec, lambda s: np.zeros(2))
        np.testing.assert_array_equal(result.descriptor, [0.5, 0.5])

    def test_always_positive_duty_cycle(self):
        spec = make_env_spec(DUTY_CYCLE_UNI)
        result = rollout(spec, lambda s: np.array([0.3, 0.7]))
        np.testing.assert_array_equal(result.descriptor, [1.0, 1.0])

    def test_random_actions_match_hand_folded_accumulation(self):
        rng = np.random.default_rng(5)
        for name in (POINT_OMNI, DUTY_CYCLE_UNI):
            spec = make_env_spec(name, episode_length=30)
            actions = rng.uniform(-1.2, 1.2, size=(30, 2))
            state = env_reset(spec)
            position = np.array([0.5, 0.5])
            duty = np.zeros(2)
            for a in actions:
                state, _ = env_step(spec, state, a)
                clipped = np.clip(a, -1.0, 1.0)
                position = np.clip(position + spec.dt * clipped, 0.0, 1.0)
                duty += clipped > 0
            expected = position if name == POINT_OMNI else duty / 30
            np.testing.assert_allclose(extract_descriptor(spec, state)[0], expected, rtol=1e-12)

    def test_incomplete_episode_raises(self):
        spec = make_env_spec(POINT_OMNI)
        with self.assertRaises(IncompleteEpisodeError):
            extract_descriptor(spec, env_reset(spec))


class RolloutTests(SimpleTestCase):
    def test_zero_policy_fitness(self):
        spec = make_env_spec(POINT_OMNI)
        result = rollout(spec, lambda s: np.zeros(2))
        self.assertEqual(result.fitness, 150.0)
        np.testing.assert_array_equal(result.descriptor, [0.5, 0.5])
        self.assertEqual(result.observations.shape, (100, 3))
        self.assertEqual(len(result.transitions()), 100)

    def test_fitness_lower_bound(self):
        rng = np.random.default_rng(1)
        for name in (POINT_OMNI, POINT_TRAP_OMNI, DUTY_CYCLE_UNI):
            spec = make_env_spec(name)
            arch = MlpArch((spec.state_dim, 8, spec.action_dim), TANH_SCALED)
            genotypes = rng.normal(size=(6, arch.param_count)) * 3
            result = rollout_batch(
                spec, lambda obs: mlp_forward(arch, genotypes, obs[:, None, :])[:, 0, :], 6
            )
            self.assertTrue(np.all(result.fitness >= spec.episode_length), msg=f"{name}: {result.fitness}")
            self.assertTrue(np.all(result.fitness <= spec.episode_length * spec.max_reward))

    def test_rollout_is_deterministic(self):
        spec = make_env_spec(POINT_TRAP_OMNI)
        arch = MlpArch((3, 16, 2), TANH_SCALED)
        params = mlp_init(arch, 9)
        first = rollout(spec, lambda s: mlp_forward(arch, params, s))
        second = rollout(spec, lambda s: mlp_forward(arch, params, s))
        self.assertEqual(first.fitness, second.fitness)
        np.testing.assert_array_equal(first.descriptor, second.descriptor)
        np.testing.assert_array_equal(first.actions, second.actions)

    def test_batch_matches_single_rollouts(self):
        spec = make_env_spec(DUTY_CYCLE_UNI, episode_length=20)
        arch = MlpArch((4, 8, 2), TANH_SCALED)
        genotypes = np.stack([mlp_init(arch, s) for s in range(3)])
        batch = rollout_batch(spec, lambda obs: mlp_forward(arch, genotypes, obs[:, None, :])[:, 0, :], 3)
        for i in range(3):
            single = rollout(spec, lambda s: mlp_forward(arch, genotypes[i], s))
            self.assertAlmostEqual(batch.fitness[i], single.fitness, places=10)
            np.testing.assert_allclose(batch.descriptors[i], single.descriptor, rtol=1e-12)

    def test_transitions_carry_target_descriptor(self):
        spec = make_env_spec(POINT_OMNI, episode_length=5)
        result = rollout_batch(spec, lambda obs: np.zeros((2, 2)), 2)
        transitions = result.transitions(target_descriptors=np.array([[0.1, 0.2], [0.3, 0.4]]))
        self.assertEqual(len(transitions), 10)
        np.testing.assert_array_equal(transitions.target_descriptors[:5], np.tile([0.1, 0.2], (5, 1)))
        np.testing.assert_array_equal(transitions.descriptors, np.full((10, 2), 0.5))
        self.assertFalse(transitions.dones.any())
