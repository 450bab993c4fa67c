"""fluxlab: a desk-scale lab for flow-based navigation policies.

A 2D dynamic-crowd benchmark (Markov-FSM pedestrians, A* global planning,
heading-fan local avoidance), four generative trajectory heads (regression /
DDPM / CFM / rectified flow) with critic-guided candidate selection, and a
two-stage imitation -> GRPO training curriculum, all on a small numpy MLP
substrate with exact hand-rolled gradients.
"""

__version__ = "0.1.0"

from .episodes import EpisodeSpec, Task, gen_episodes
from .metrics import MetricsReport, compute_spl
from .policy import FlowConfig, HeadKind, ModelHandle
from .scenes import Scene, gen_scene, load_scenes, save_scenes, structured_eval_scenes
from .world import Outcome, WorldState, step_world

__all__ = [
    "__version__",
    "EpisodeSpec", "Task", "gen_episodes",
    "MetricsReport", "compute_spl",
    "FlowConfig", "HeadKind", "ModelHandle",
    "Scene", "gen_scene", "load_scenes", "save_scenes", "structured_eval_scenes",
    "Outcome", "WorldState", "step_world",
]