import numpy as np

from lentparticle.rng import (
    DOMAIN_ATOMS,
    DOMAIN_PATH,
    DOMAIN_RHO,
    path_seed,
    stream,
)


def test_same_address_same_draws():
    a = stream(123, DOMAIN_ATOMS, 4).standard_normal(16)
    b = stream(123, DOMAIN_ATOMS, 4).standard_normal(16)
    assert np.array_equal(a, b)


def test_distinct_domains_decorrelated():
    a = stream(123, DOMAIN_ATOMS).standard_normal(1000)
    b = stream(123, DOMAIN_RHO).standard_normal(1000)
    assert not np.array_equal(a, b)
    # crude decorrelation check, not a statistical proof
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1


def test_distinct_indices_decorrelated():
    a = stream(7, DOMAIN_RHO, 0).standard_normal(1000)
    b = stream(7, DOMAIN_RHO, 1).standard_normal(1000)
    assert not np.array_equal(a, b)


def test_subindex_separates_streams():
    a = stream(7, DOMAIN_RHO, 3, 0).standard_normal(8)
    b = stream(7, DOMAIN_RHO, 3, 1).standard_normal(8)
    assert not np.array_equal(a, b)


def test_path_seed_deterministic_and_spread():
    seeds = [path_seed(99, p) for p in range(64)]
    assert seeds == [path_seed(99, p) for p in range(64)]
    assert len(set(seeds)) == 64
    assert all(0 <= s < 2 ** 63 for s in seeds)


def test_seed_changes_everything():
    a = stream(1, DOMAIN_PATH).standard_normal(32)
    b = stream(2, DOMAIN_PATH).standard_normal(32)
    assert not np.array_equal(a, b)
