"""Shared test inputs."""
import numpy as np

from qpmomentum import config
from qpmomentum.potential import PotentialSpec
from qpmomentum.quasilattice import Frequency, GrowthSchedule

SQRT2 = Frequency.sqrt2()
SCHEDULE = GrowthSchedule(1, 1, 2, r_max=2)
COSINE = {((1, 0), (0, 0)): 1.0, ((-1, 0), (0, 0)): 1.0}
TWO_FREQ = {
    ((1, 0), (0, 0)): 1.0, ((-1, 0), (0, 0)): 1.0, ((0, 1), (0, 0)): 1.0, ((0, -1), (0, 0)): 1.0,
    ((0, 0), (1, 0)): 0.5, ((0, 0), (-1, 0)): 0.5, ((0, 0), (0, 1)): 0.5, ((0, 0), (0, -1)): 0.5,
}


def shipped_spec() -> PotentialSpec:
    return config.sample_config().potential


def cosine_spec(g: float = 0.05, l: int = 2) -> PotentialSpec:
    return PotentialSpec(SQRT2, l, 2, {k: complex(v) for k, v in COSINE.items()}, g)


def spec_from(coeffs: dict, g: float = 0.05, l: int = 2, Q: int = 2) -> PotentialSpec:
    return PotentialSpec(SQRT2, l, Q, {k: complex(v) for k, v in coeffs.items()}, g)


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def annulus_points(seed: int, n: int, r0: float, r1: float) -> np.ndarray:
    g = rng(seed)
    r = np.sqrt(r0 ** 2 + g.random(n) * (r1 ** 2 - r0 ** 2))
    t = 2 * np.pi * g.random(n)
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
