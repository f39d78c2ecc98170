import numpy as np
import pytest

from physiosynth.bvh import Joint, MotionClip, Skeleton

MINIMAL_BVH = """HIERARCHY
ROOT Hips
{
  OFFSET 0.0 0.0 0.0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Chest
  {
    OFFSET 0.0 10.0 0.0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0.0 5.0 0.0
    }
  }
}
MOTION
Frames: 1
Frame Time: 0.008333
1.0 2.0 3.0 10.0 20.0 30.0 -5.0 0.5 45.0
"""


def chain_skeleton(n_joints: int = 3, order=("Zrotation", "Xrotation", "Yrotation")) -> Skeleton:
    joints = [Joint("root", np.zeros(3),
                    ("Xposition", "Yposition", "Zposition") + tuple(order), -1)]
    for k in range(1, n_joints):
        joints.append(Joint(f"j{k}", np.array([0.0, 1.0, 0.0]), tuple(order), k - 1))
    return Skeleton(joints)


def random_clip(rng, n_frames: int = 64, n_joints: int = 3, frame_time: float = 1 / 120,
                scale: float = 20.0) -> MotionClip:
    sk = chain_skeleton(n_joints)
    frames = rng.normal(0.0, scale, size=(n_frames, sk.channel_count))
    return MotionClip(sk, frame_time, frames)


@pytest.fixture
def minimal_bvh_text():
    return MINIMAL_BVH


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def trained(tmp_path_factory):
    """Shipped synthetic sets plus all three models, built through the CLI once
    per session. ``train_seconds`` times make-data and the three trainings."""
    import time
    from types import SimpleNamespace

    from physiosynth import cli, pipeline

    root = tmp_path_factory.mktemp("trained")
    data, wdir = root / "data", root / "w"
    start = time.perf_counter()
    assert cli.main(["make-data", "--out", str(data), "--seed", "0"]) == 0
    for task in pipeline.TASKS:
        assert cli.main(["train", "--task", task, "--data", str(data / f"{task}.csv"),
                         "--out", str(wdir / f"{task}.json"), "--seed", "0"]) == 0
    elapsed = time.perf_counter() - start
    return SimpleNamespace(data_dir=data, weights_dir=wdir, train_seconds=elapsed,
                           weights=pipeline.load_weight_set(wdir),
                           table=pipeline.load_direction_table(),
                           coords=pipeline.load_emotion_coords())
