import numpy as np
import pytest

from eigenmeasure.cartan import AmbientGroup, CartanParams, ambient_order, in_cartan, split_diagonalize
from eigenmeasure.errors import PreconditionError, ResourceError, SpecError
from eigenmeasure.modarith import MatMod
from eigenmeasure.subgroup import (FiniteSubgroup, SubgroupSpec, close, coset_split, enumerate_ambient,
                                   index_and_level, lift_group, reduce_group, smaller_level_exists,
                                   transfer_to_split)

from .conftest import cartan, full, generated, normalizer


def test_full_gl2_mod_2():
    G = full(AmbientGroup.gl2(2))
    assert G.order == 6
    assert G.contains(MatMod.from_ints([[0, 1], [1, 1]], 2, 1))
    assert all(M.is_invertible() for M in G.matrices())


def test_example_group_has_index_8(example_group):
    assert example_group.order == 12
    assert index_and_level(example_group) == (8, 2)
    assert not smaller_level_exists(example_group)


def test_trivial_group():
    G = generated(cartan(0, 1, 3), 1, [[1, 0], [0, 1]])
    assert G.order == 1
    assert index_and_level(G) == (4, 1)


@pytest.mark.parametrize("ambient, n", [
    (AmbientGroup.gl2(2), 2),
    (AmbientGroup.gl2(3), 1),
    (cartan(0, 1, 3), 2),
    (cartan(0, 2, 3), 2),
    (cartan(0, 3, 3), 2),
    (cartan(1, 1, 2), 3),
    (normalizer(0, 2, 5), 1),
    (normalizer(0, 1, 2), 2),
])
def test_enumeration_matches_ambient_order(ambient, n):
    assert len(enumerate_ambient(ambient, n)) == ambient_order(ambient, n)
    assert full(ambient, n).order == ambient_order(ambient, n)


def test_lifting_counts(example_group):
    assert lift_group(full(AmbientGroup.gl2(2)), 2) == full(AmbientGroup.gl2(2), 2)
    trivial = generated(cartan(0, 1, 3), 1, [[1, 0], [0, 1]])
    assert lift_group(trivial, 2).order == 9
    lifted = lift_group(example_group, 3)
    assert lifted.order == 192
    assert index_and_level(lifted)[0] == 8
    assert reduce_group(lifted, 2) == example_group


def test_lifted_normalizer_keeps_cosets():
    G = generated(normalizer(0, 2, 3), 1, [[0, 1], [1, 0]], [[2, 0], [0, 2]])
    assert G.order == 4
    lifted = lift_group(G, 2)
    assert lifted.order == 4 * 9
    split = coset_split(lifted)
    assert len(split.in_cartan) == len(split.in_complement) == 18


def test_close_is_idempotent(example_group):
    amb = example_group.ambient
    again = close(SubgroupSpec(amb, 2, tuple(example_group.matrices())))
    assert again == example_group


def test_smaller_level_of_full_group():
    assert smaller_level_exists(full(AmbientGroup.gl2(2), 2))
    assert not smaller_level_exists(full(AmbientGroup.gl2(2), 1))


def test_coset_split_of_full_normalizer():
    G = full(normalizer(0, 3, 3), 2)
    split = coset_split(G)
    assert len(split.in_cartan) == 54
    assert len(split.in_complement) == 54
    assert not split.inside_cartan


def test_coset_split_inside_cartan():
    G = generated(normalizer(0, 2, 3), 1, [[2, 0], [0, 2]], [[0, 2], [1, 0]])
    assert coset_split(G).inside_cartan
    with pytest.raises(PreconditionError):
        coset_split(full(AmbientGroup.gl2(2)))


def test_spec_validation():
    with pytest.raises(SpecError):
        SubgroupSpec(cartan(0, 1, 3), 1, (MatMod.from_ints([[0, 1], [1, 1]], 3, 1),))
    with pytest.raises(SpecError):
        SubgroupSpec(AmbientGroup.gl2(3), 1, (MatMod.from_ints([[3, 0], [0, 1]], 3, 1),))
    with pytest.raises(SpecError):
        SubgroupSpec(AmbientGroup.gl2(3), 2, (MatMod.identity(3, 1),))
    with pytest.raises(SpecError):
        SubgroupSpec(normalizer(0, 1, 2), 1)


def test_budget_guard():
    with pytest.raises(ResourceError) as info:
        close(SubgroupSpec(AmbientGroup.gl2(3), 2, budget=1000))
    assert info.value.modulus_exp == 2
    G = full(AmbientGroup.gl2(2))
    small = FiniteSubgroup(G.prec, G.ambient, G.elements, budget=100)
    with pytest.raises(ResourceError):
        lift_group(small, 3)


def test_transfer_odd_square():
    G = full(cartan(0, 9, 3))
    image, da, db = transfer_to_split(G, CartanParams(0, 9))
    assert (da, db) == (1, 2)
    assert image.prec == 2
    assert image.ambient == cartan(0, 1, 3)
    assert image.order == 18
    assert np.all(image.elements[:, 1] == image.elements[:, 2])


def test_transfer_two_adic():
    G = full(cartan(0, 1, 2), 2)
    image, da, db = transfer_to_split(G, CartanParams(0, 1))
    assert (da, db) == (1, 2)
    assert image.ambient == cartan(1, 0, 2)
    assert image.prec == 3
    assert image.order == ambient_order(cartan(1, 0, 2), 3)
    split = CartanParams(1, 0)
    for M in image.matrices():
        assert in_cartan(M, split)
        D = split_diagonalize(M, split)
        assert D.packed[0] % 2 == D.packed[3] % 2 == 1


def test_transfer_needs_a_square():
    with pytest.raises(PreconditionError):
        transfer_to_split(full(cartan(0, 3, 3)), CartanParams(0, 3))
