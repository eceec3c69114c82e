import numpy as np
import pytest

from xaudit.data import Dataset
from xaudit.models import LayerSpec, MlpModel


def random_mlp(seed, d=4, hidden=6, out=3, activation="sigmoid", task="classification",
               bias=True, scale=1.5):
    rng = np.random.default_rng(seed)
    w1 = rng.normal(scale=scale, size=(hidden, d))
    w2 = rng.normal(scale=scale, size=(out, hidden))
    b1 = rng.normal(size=hidden) if bias else np.zeros(hidden)
    b2 = rng.normal(size=out) if bias else np.zeros(out)
    last = "softmax" if task == "classification" else "identity"
    return MlpModel((LayerSpec(w1, b1, activation), LayerSpec(w2, b2, last)), task)


def linear_model(w, b=0.0):
    w = np.asarray(w, dtype=float)
    return MlpModel((LayerSpec(w[None, :], np.array([b]), "identity"),), "regression")


def central_fd(fn, x, h=1e-4):
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


@pytest.fixture
def blobs():
    from xaudit.data import synth_2d
    return synth_2d("blobs", 200, 0.0, seed=3)


@pytest.fixture
def xor_data():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(400, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
    return Dataset(X, y)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
