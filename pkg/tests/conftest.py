import numpy as np
import pytest

from windbridge.pipeline import build_model_doc, charge_model_from_doc
from windbridge.power import (
    DEFAULT_TURBINE,
    PowerSeries,
    RampPolicy,
    apply_ramp_limit,
    generate_synthetic_wind,
    wind_to_power,
)
from windbridge.segmentation import estimate_kernel, extract_segments

LIMIT = 0.02
CAPACITY = DEFAULT_TURBINE.rated_capacity


@pytest.fixture(scope="session")
def corrected_series():
    """20k hours of synthetic wind power, ramp-corrected at 1% of capacity."""
    speeds = generate_synthetic_wind(20_000, 2.0, 8.0, 0.9, seed=42)
    series = PowerSeries(generated=wind_to_power(speeds, DEFAULT_TURBINE))
    return apply_ramp_limit(series, RampPolicy(limit=LIMIT), capacity=CAPACITY)


@pytest.fixture(scope="session")
def renewal_data(corrected_series):
    points, segments = extract_segments(corrected_series)
    return points, segments


@pytest.fixture(scope="session")
def fitted_kernel(renewal_data):
    points, _ = renewal_data
    return estimate_kernel(points)


@pytest.fixture(scope="session")
def fitted_model(renewal_data):
    _, segments = renewal_data
    doc = build_model_doc(
        segments, limit=LIMIT, capacity=CAPACITY,
        group_rng=lambda i, j, x: np.random.default_rng((7, i + 2, j + 2, x)),
    )
    return charge_model_from_doc(doc)
