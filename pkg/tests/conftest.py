import numpy as np
import pytest

from elate import TimeFrame

NAN = float("nan")


@pytest.fixture
def simple_frame() -> TimeFrame:
    """Ten rows, two numeric inputs (one with a NaN), a categorical, a target."""
    return TimeFrame(
        timestamps=np.arange(10, dtype=np.int64),
        columns={
            "price": np.array([10.0, 11.0, 9.5, NAN, 12.0, 12.5, 11.0, 13.0, 14.0, 13.5]),
            "volume": np.array([5.0, 3.0, 4.0, 6.0, 2.0, 7.0, 8.0, 1.0, 9.0, 4.5]),
            "region": np.array(
                ["n", "s", "n", "s", "n", "s", "n", "s", "n", "s"], dtype=object
            ),
            "demand": np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]),
        },
        target_name="demand",
        horizon=1,
    )


@pytest.fixture
def schema(simple_frame) -> dict[str, str]:
    return simple_frame.feature_schema()
