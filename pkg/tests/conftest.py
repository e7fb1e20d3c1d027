import numpy as np
import pytest

from armkit.arm_model import open_arms_chain


@pytest.fixture(scope="session")
def chain():
    return open_arms_chain()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240831)


def random_chain(rng, n_joints=None):
    """Random valid chain for oracle comparisons (arbitrary axes/offsets)."""
    from armkit.arm_model import JointSpec, KinematicChain
    from armkit.geometry import Transform, quat_normalize

    if n_joints is None:
        n_joints = int(rng.integers(2, 8))
    joints = []
    for i in range(n_joints):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        lo = -float(rng.uniform(0.3, 3.0))
        hi = float(rng.uniform(0.3, 3.0))
        off = Transform(rng.uniform(-0.3, 0.3, size=3),
                        quat_normalize(rng.normal(size=4)))
        joints.append(JointSpec(f"j{i}", axis, lo, hi, offset=off))
    base = Transform(rng.uniform(-0.2, 0.2, size=3), quat_normalize(rng.normal(size=4)))
    tool = Transform(rng.uniform(-0.2, 0.2, size=3), quat_normalize(rng.normal(size=4)))
    return KinematicChain(joints, base=base, tool=tool)
