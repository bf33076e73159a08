import pytest

from eigenmeasure.cartan import AmbientGroup, CartanParams
from eigenmeasure.cli import load_problem
from eigenmeasure.config import SPECS_DIR
from eigenmeasure.modarith import MatMod
from eigenmeasure.subgroup import SubgroupSpec, close


def full(ambient: AmbientGroup, level: int = 1):
    return close(SubgroupSpec(ambient, level))


def generated(ambient: AmbientGroup, level: int, *rows):
    gens = tuple(MatMod.from_ints(r, ambient.ell, level) for r in rows)
    return close(SubgroupSpec(ambient, level, gens))


def cartan(c: int, d: int, ell: int) -> AmbientGroup:
    return AmbientGroup.cartan(CartanParams(c, d), ell)


def normalizer(c: int, d: int, ell: int) -> AmbientGroup:
    return AmbientGroup.normalizer(CartanParams(c, d), ell)


@pytest.fixture
def example_group():
    """Index 8, level 2 subgroup of GL2(Z_2)."""
    return generated(AmbientGroup.gl2(2), 2, [[3, 3], [0, 1]], [[1, 1], [3, 0]])


@pytest.fixture
def spec_file():
    def load(name: str) -> SubgroupSpec:
        return load_problem(SPECS_DIR / f"{name}.json")
    return load
