import pytest
from hypothesis import settings

from greenbench.world import default_world

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def world():
    return default_world()


@pytest.fixture(scope="session")
def world_sectors(world):
    return world.with_scenario(terrain_change=True)
