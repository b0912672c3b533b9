import os
import sys

import pytest

SRC = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src")
if SRC not in sys.path:
    sys.path.insert(0, SRC)

from engine_config import EngineSettings  # noqa: E402
from storage.database import InvariantDatabase  # noqa: E402

ORACLE_SEEDS = [11, 23]


def all_matchings(n):
    """Every perfect matching of n slots as a pairing tuple"""
    def extend(pairing):
        try:
            first = pairing.index(-1)
        except ValueError:
            yield tuple(pairing)
            return
        for other in range(first + 1, n):
            if pairing[other] == -1:
                pairing[first], pairing[other] = other, first
                yield from extend(pairing)
                pairing[first] = pairing[other] = -1

    yield from extend([-1] * n)


@pytest.fixture
def settings(tmp_path):
    return EngineSettings(db_path=str(tmp_path / "db"))


@pytest.fixture(scope="session")
def small_db(tmp_path_factory):
    """Database of every case up to order 4 (dual cases up to order 2)"""
    root = tmp_path_factory.mktemp("db4")
    db = InvariantDatabase(str(root), EngineSettings(db_path=str(root)))
    db.build(4)
    return db
