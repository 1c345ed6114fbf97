import numpy as np
import pytest

from dosekit import Grid3, GridGeometry, PhantomSpec, StructureMask, generate_phantom


@pytest.fixture(scope="session")
def phantom32():
    """One shared 32^3 phantom case."""
    return generate_phantom(PhantomSpec(seed=3))


@pytest.fixture(scope="session")
def phantom16():
    """Small case for fast model tests."""
    return generate_phantom(PhantomSpec(seed=11, dims=(16, 16, 16)))


def random_instance(seed, shape=(10, 10, 10), lo=0.0, hi=70.0, mask_p=0.5, role="PTV"):
    """Seeded random dose grid + mask on a unit-ish geometry."""
    rng = np.random.default_rng(seed)
    geom = GridGeometry(shape, (8.0, 8.0, 8.0))
    dose = rng.uniform(lo, hi, size=shape)
    bits = rng.random(shape) < mask_p
    if not bits.any():
        bits[0, 0, 0] = True
    return Grid3(geom, dose, "Gy"), StructureMask(geom, bits, "s0", role)
