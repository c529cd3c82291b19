from __future__ import annotations

import numpy as np
import pytest

from randslack.features import InputX, SyntheticFeatureMap
from randslack.structures import (
    AffineGrid,
    Kind,
    OneHotBit,
    StructureSpace,
)


@pytest.fixture(scope="session")
def tree4():
    return StructureSpace(Kind.SPANNING_TREE, 4, OneHotBit(144))


@pytest.fixture(scope="session")
def tree3():
    return StructureSpace(Kind.SPANNING_TREE, 3, OneHotBit(36))


@pytest.fixture(scope="session")
def dag4():
    return StructureSpace(Kind.DAG, 4, OneHotBit(36), b=2)


@pytest.fixture(scope="session")
def set93():
    return StructureSpace(Kind.CARD_SET, 9, OneHotBit(81), b=3)


@pytest.fixture(scope="session")
def set42():
    return StructureSpace(Kind.CARD_SET, 4, OneHotBit(16), b=2)


@pytest.fixture(scope="session")
def perm3():
    return StructureSpace(Kind.PERMUTATION, 3, OneHotBit(9))


@pytest.fixture(scope="session")
def perm4_grid():
    return StructureSpace(Kind.PERMUTATION, 4, AffineGrid())


def random_bits(featmap: SyntheticFeatureMap, rng: np.random.Generator) -> InputX:
    return InputX(bits=rng.integers(0, 2, featmap.dim).astype(np.float64))
