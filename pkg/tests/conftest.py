import json
from pathlib import Path

import numpy as np
import pytest

from plapsys import barriers as bar
from plapsys.mesh import DomainSpec
from plapsys.problem import ProblemParams

FIXTURES = Path(__file__).parent / "fixtures"

UNIT = DomainSpec.interval(0.0, 1.0)

# theta > 0, symmetric under u <-> v
REFERENCE = ProblemParams(p=2, q=2, alpha1=-0.5, beta1=0.5, alpha2=0.5, beta2=-0.5, lam=1.0, gamma=2.0)
# theta = 0 with (c) and (c2)
HOMOGENEOUS = ProblemParams(p=2, q=2, alpha1=-0.5, beta1=1.5, alpha2=1.5, beta2=-0.5, lam=1.0, gamma=2.0)


@pytest.fixture(scope="session")
def eigen_oracle():
    return json.loads((FIXTURES / "eigen_oracle.json").read_text())


@pytest.fixture(scope="session")
def collocation_oracle():
    data = json.loads((FIXTURES / "collocation_oracle.json").read_text())
    data["samples"] = np.array(data["samples"])
    return data


@pytest.fixture(scope="session")
def reference_setup():
    return bar.prepare(REFERENCE, UNIT, 256)


@pytest.fixture(scope="session")
def reference_certified(reference_setup):
    C, cert = bar.select_C(reference_setup, REFERENCE.lam)
    return C, cert, bar.barriers_for(reference_setup, C)


@pytest.fixture(scope="session")
def homogeneous_setup():
    return bar.prepare(HOMOGENEOUS, UNIT, 256)


def sample(mesh, values, xs):
    return np.interp(xs, mesh.x, values)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
