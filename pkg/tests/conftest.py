import numpy as np
import pytest

from graspsim.scene import EpisodeConfig, catalog_by_id, load_catalog


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def catalog_map(catalog):
    return catalog_by_id(catalog)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


def make_config(level=1, object_id="tomato_soup_can", seed=0, **kw):
    return EpisodeConfig(level=level, object_id=object_id, seed=seed, **kw)
