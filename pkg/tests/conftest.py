import numpy as np
import pytest

from longfuse import CombinedSample, GroupTag, Unit
from longfuse.schema import SampleSchema


def binary_schema() -> SampleSchema:
    return SampleSchema(
        group_column="g",
        treatment_column="w",
        secondary_column="s",
        primary_column="y",
        covariates=(),
        secondary_discrete=True,
    )


def build_binary_sample(observational, experimental) -> CombinedSample:
    """observational: iterable of (w, s, y); experimental: iterable of (w, s)."""
    units = [
        Unit(GroupTag.OBSERVATIONAL, w, (), float(s), float(y))
        for w, s, y in observational
    ]
    units += [Unit(GroupTag.EXPERIMENTAL, w, (), float(s)) for w, s in experimental]
    return CombinedSample.from_units(units, binary_schema())


@pytest.fixture
def hand_fixture() -> CombinedSample:
    """Four observational units where primary equals secondary, and four
    experimental units whose treated arm has an even secondary split."""
    return build_binary_sample(
        observational=[(1, 1, 1), (1, 0, 0), (0, 1, 1), (0, 0, 0)],
        experimental=[(1, 1), (1, 0), (0, 0), (0, 0)],
    )


def random_binary_sample(rng: np.random.Generator, max_cell: int = 50) -> CombinedSample:
    """Random valid binary sample: every observational (treatment, secondary)
    cell is nonempty so imputation preconditions always hold."""
    observational = []
    for w in (0, 1):
        for s in (0, 1):
            n = int(rng.integers(1, max_cell + 1))
            p = rng.random()
            for y in rng.binomial(1, p, size=n):
                observational.append((w, s, int(y)))
    experimental = []
    for w in (0, 1):
        n = int(rng.integers(1, max_cell + 1))
        p = rng.random()
        for s in rng.binomial(1, p, size=n):
            experimental.append((w, int(s)))
    return build_binary_sample(observational, experimental)
