import time

import numpy as np
import pytest

from sandshape import dataset, learner
from sandshape.sandfield import RenderConfig, ToolFootprint

# the desk-scale corpus + model shared by the learner tests and the
# acceptance suite; parameters are frozen so results are reproducible
DEMO_SEED = 123
DEMO_COUNT = 55
FRAMES_PER_DEMO = 14
TRAIN_SEED = 0
TRAIN_EPISODES = 12_000

DESK_TOOL = ToolFootprint(15, 20)
DESK_RENDER = RenderConfig(h_max=3.0)


@pytest.fixture(scope="session")
def desk_times():
    return {}


@pytest.fixture(scope="session")
def desk_demos(desk_times):
    t0 = time.perf_counter()
    rng = np.random.default_rng(DEMO_SEED)
    demos = dataset.synthesize_demos(
        DEMO_COUNT, rng, width=320, height=240,
        tool=DESK_TOOL, render_cfg=DESK_RENDER, frames_per_demo=FRAMES_PER_DEMO,
    )
    desk_times["synthesize"] = time.perf_counter() - t0
    return demos


@pytest.fixture(scope="session")
def desk_triplets(desk_demos, desk_times):
    t0 = time.perf_counter()
    triplets = dataset.mine_demos(desk_demos)
    desk_times["mine"] = time.perf_counter() - t0
    return triplets


@pytest.fixture(scope="session")
def desk_model(desk_triplets, desk_times):
    t0 = time.perf_counter()
    config = learner.TrainConfig(episodes=TRAIN_EPISODES, seed=TRAIN_SEED)
    model, report = learner.train(desk_triplets, config)
    desk_times["train"] = time.perf_counter() - t0
    return model, report
