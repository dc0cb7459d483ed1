import numpy as np
import pytest

from qclattice.lattice import (
    CO,
    LI,
    CapacityError,
    Configuration,
    ConfigurationError,
    as_matrix,
    enumerate_all,
    flip_site,
    from_species,
    hamming_distance,
    li_fraction,
)


def test_parse_signs_and_species_agree():
    a = Configuration.parse("+--+")
    b = Configuration.parse("CoLiLiCo")
    assert a == b == Configuration((CO, LI, LI, CO))
    assert a.to_signs() == "+--+"
    assert a.to_species() == "CoLiLiCo"


@pytest.mark.parametrize("text", ["", "+x-", "CoFe", "C"])
def test_parse_rejects_garbage(text):
    with pytest.raises(ConfigurationError):
        Configuration.parse(text)


def test_only_plus_minus_one_allowed():
    with pytest.raises(ConfigurationError):
        Configuration((1, 0, -1))
    with pytest.raises(ConfigurationError):
        from_species([])


def test_li_fraction():
    assert li_fraction(Configuration.parse("----")) == 1.0
    assert li_fraction(Configuration.parse("++++")) == 0.0
    assert li_fraction(Configuration.parse("+-+-")) == 0.5


def test_enumerate_all_counts_and_order():
    cs = enumerate_all(3)
    assert len(cs) == 8 and len(set(cs)) == 8
    assert cs[0].to_signs() == "---" and cs[-1].to_signs() == "+++"
    with pytest.raises(CapacityError):
        enumerate_all(21)


def test_flip_and_hamming():
    c = Configuration.parse("+-+-")
    d = flip_site(c, 1)
    assert d.to_signs() == "+++-"
    assert hamming_distance(c, d) == 1
    assert hamming_distance(c, c) == 0
    with pytest.raises(IndexError):
        flip_site(c, 4)
    with pytest.raises(ConfigurationError):
        hamming_distance(c, Configuration.parse("++"))


def test_as_matrix():
    m = as_matrix([Configuration.parse("+-"), Configuration.parse("-+")])
    np.testing.assert_array_equal(m, [[1.0, -1.0], [-1.0, 1.0]])
    assert m.dtype == np.float64
