import numpy as np
import pytest

from inmux.linear import analyze_instance
from inmux.model import PlantParams
from inmux.steady import find_input_instances

# Values the benchmark is expected to reproduce (3-decimal prints of the
# exact roots below).
SETPOINT = np.array([0.49, 0.37])
PRINTED_INSTANCES = np.array([
    [0.914, 0.580],
    [1.043, 0.333],
    [1.07, 0.674],
])

# Exact roots of the default model, frozen from an independent damped-Newton
# multistart (numpy-only script, separate from the package solver path).
EXACT_INSTANCES = np.array([
    [0.914371328210017, 0.5799498510704028],
    [1.0431910076835114, 0.33263800693989426],
    [1.074640335822305, 0.6745214623941161],
])


@pytest.fixture(scope="session")
def params():
    return PlantParams()


@pytest.fixture(scope="session")
def instances(params):
    inst = find_input_instances(params, SETPOINT)
    assert len(inst) == 3
    return inst


@pytest.fixture(scope="session")
def u_instances(instances):
    return instances.u_array()


@pytest.fixture(scope="session")
def analyses(params, instances):
    return [analyze_instance(params, q.u, q.x) for q in instances.instances]
