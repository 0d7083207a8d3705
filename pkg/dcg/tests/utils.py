"""Shared fixtures for the dcg test-suite."""
import numpy as np

from dcg.nn import AdamState, layer_views
from dcg.rl import ActorCritic, Network, Transitions


def make_transitions(n, state_dim=2, action_dim=1, descriptor_dim=2, rng=None, **columns):
    """Random transitions; keyword columns override the generated ones."""
    rng = rng or np.random.default_rng(0)
    values = {
        'states': rng.normal(size=(n, state_dim)),
        'actions': rng.uniform(-1, 1, size=(n, action_dim)),
        'rewards': rng.uniform(1, 1.5, size=n),
        'next_states': rng.normal(size=(n, state_dim)),
        'dones': np.zeros(n, dtype=bool),
        'descriptors': rng.random((n, descriptor_dim)),
        'target_descriptors': rng.random((n, descriptor_dim)),
    }
    values.update(columns)
    return Transitions(**values)


def fixed_network(arch, params, lr=1e-3):
    params = np.asarray(params, dtype=np.float64)
    return Network(arch, params.copy(), params.copy(), AdamState.zeros_like(params, lr))


def embed_descriptor_columns(std_arch, std_params, cond_arch):
    """Conditioned parameters that ignore the trailing descriptor inputs."""
    cond_params = np.zeros(cond_arch.param_count)
    for (w_std, b_std), (w_cond, b_cond) in zip(layer_views(std_arch, std_params),
                                                layer_views(cond_arch, cond_params)):
        w_cond[:, :w_std.shape[1]] = w_std
        b_cond[:] = b_std
    return cond_params


def project_descriptor_columns(std_arch, cond_arch, cond_params):
    std_params = np.zeros(std_arch.param_count)
    for (w_std, b_std), (w_cond, b_cond) in zip(layer_views(std_arch, std_params),
                                                layer_views(cond_arch, cond_params)):
        w_std[:] = w_cond[:, :w_std.shape[1]]
        b_std[:] = b_cond
    return std_params


def conditioned_copy(std_ac, cfg):
    """A conditioned actor-critic computing exactly what ``std_ac`` computes."""
    cond = ActorCritic.create(
        std_ac.state_dim, std_ac.action_dim, std_ac.descriptor_dim, cfg,
        actor_hidden=std_ac.actor.arch.layer_sizes[1:-1],
        critic_hidden=std_ac.critic1.arch.layer_sizes[1:-1],
        action_bound=std_ac.action_bound, conditioned=True,
    )
    for std_net, cond_net in zip(std_ac.networks, cond.networks):
        cond_net.params = embed_descriptor_columns(std_net.arch, std_net.params, cond_net.arch)
        cond_net.target = embed_descriptor_columns(std_net.arch, std_net.target, cond_net.arch)
    return cond
