import numpy as np
import pytest
from hypothesis import strategies as st

from crfkit.cloud import PointCloud
from crfkit.geom import quaternion_to_matrix

# (criterion, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_cloud(rng, n=64, normals=True, scale=(1.0, 0.7, 0.4)) -> PointCloud:
    pts = rng.standard_normal((n, 3)) * np.asarray(scale)
    if not normals:
        return PointCloud(pts)
    nrm = rng.standard_normal((n, 3))
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    return PointCloud(pts, nrm)


# hypothesis strategies ------------------------------------------------------

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)
angles = st.floats(min_value=-4 * np.pi, max_value=4 * np.pi, allow_nan=False)


@st.composite
def rotations(draw):
    q = draw(st.tuples(finite, finite, finite, finite).filter(lambda t: np.linalg.norm(t) > 1e-3))
    return quaternion_to_matrix(q)


@st.composite
def generic_queries(draw):
    """Points safely away from the origin and from the z-axis."""
    v = draw(vec3.filter(lambda v: np.linalg.norm(v) > 1e-2 and np.hypot(v[0], v[1]) > 1e-2 * np.linalg.norm(v)))
    return v
