import sys

import numpy as np
import pytest

from semnet.tensor import Tensor


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def randt(rng):
    def make(*shape, requires_grad=False, low=None, high=None):
        if low is not None:
            data = rng.uniform(low, high, size=shape)
        else:
            data = rng.standard_normal(shape)
        return Tensor(data, requires_grad=requires_grad)
    return make


OVERFIT_STEPS = 2000


@pytest.fixture(scope="session")
def overfit_run():
    """Tiny 2-stage model trained on one smooth 32x32 image with a 25% rectangle hole."""
    import time

    from semnet.blocks import SemNetConfig
    from semnet.masks import MaskSpec, generate_mask
    from semnet.train import TrainState, train_step

    yy, xx = np.mgrid[0:32, 0:32] / 31
    image = np.stack([0.5 + 0.4 * np.sin(3 * xx + yy), 0.5 + 0.3 * np.cos(2 * yy - xx), 0.3 + 0.5 * xx * yy])
    mask = generate_mask(MaskSpec("rectangles", (0.24, 0.26), seed=3), 32, 32)[None]
    state = TrainState.create(SemNetConfig.for_stages(2, base_channels=8), seed=0, lr=2e-4)
    batch = (image[None], mask[None])
    start = time.perf_counter()
    losses = [train_step(state, batch)[1] for _ in range(OVERFIT_STEPS)]
    return {"state": state, "image": image, "mask": mask, "losses": losses,
            "seconds": time.perf_counter() - start}


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key])
