import pytest

from ventcelfem import unit_disk
from ventcelfem.cli import MeshCache


@pytest.fixture(scope="session")
def disk():
    return unit_disk()


@pytest.fixture(scope="session")
def cache(disk):
    """Shared mesh cache so expensive meshes are built once per session."""
    return MeshCache(disk)
