import numpy as np
import pytest

from lesionlab.evaluation import PipelineParams
from lesionlab.grid import LabelSource
from lesionlab.synth import PhantomSpec, derive_dpath_lesion, generate_phantom


@pytest.fixture(scope="session")
def cohort42():
    """Seed-42 default cohort of 40 phantoms with the derived lesion label."""
    spec = PhantomSpec(master_seed=42, n_patients=40)
    params = PipelineParams()
    cases = []
    for i in range(spec.n_patients):
        case = generate_phantom(spec, i)
        case.labels[LabelSource.DPATH_LESION] = derive_dpath_lesion(case, params)
        cases.append(case)
    return cases


@pytest.fixture()
def rng():
    return np.random.default_rng(20240799)
