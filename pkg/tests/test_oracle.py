import pytest

from eigenmeasure.config import SPECS_DIR
from eigenmeasure.measure import family, total_mass, verify_family
from eigenmeasure.subgroup import close

from .conftest import cartan, full

# (a_max, b_max) per problem file; the largest modulus scanned is ell**(a_max + b_max + 1)
RANGES = {
    "gl2_l2": (2, 2),
    "gl2_l2_index8": (2, 2),
    "gl2_l3": (1, 1),
    "gl2_l3_borel": (1, 1),
    "split_l5": (1, 2),
    "ramified_l5": (1, 2),
}
DEFAULT_RANGE = (2, 3)

SPEC_NAMES = sorted(p.stem for p in SPECS_DIR.glob("*.json"))


def test_every_spec_has_a_sweep():
    assert len(SPEC_NAMES) >= 20
    assert set(RANGES) <= set(SPEC_NAMES)


@pytest.mark.parametrize("name", SPEC_NAMES)
def test_family_matches_direct_counts(spec_file, name):
    G = close(spec_file(name))
    fam = family(G)
    assert total_mass(fam) == 1
    a_max, b_max = RANGES.get(name, DEFAULT_RANGE)
    mismatches = [(r.a, r.b, r.expected, r.observed) for r in verify_family(fam, G, a_max, b_max)
                  if not r.passed]
    assert mismatches == []


@pytest.mark.parametrize("ambient, a_max, b_max", [
    (cartan(0, 9, 3), 1, 4),
    (cartan(0, 18, 3), 1, 4),
    (cartan(0, 4, 2), 1, 6),
    (cartan(0, 25, 5), 0, 3),
])
def test_transfer_region_matches_direct_counts(ambient, a_max, b_max):
    G = full(ambient)
    assert all(r.passed for r in verify_family(family(G), G, a_max, b_max))
