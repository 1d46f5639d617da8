import numpy as np


def random_density(rng, d=2):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = a @ a.conj().T
    return m / np.trace(m).real


def random_unit(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


#: Pass/fail lines collected by the acceptance module, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []
