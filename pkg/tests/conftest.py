import numpy as np
import pytest

from latentgeo.datasets.core import Dataset, ImageSequence

ACCEPTANCE_LINES: list[str] = []


class LinearAngleModel:
    """Hand-built model: images are ``v + (t / 180) u``, codes are ``(t / 180) d``.

    The encoder projects onto ``u`` and the decoder inverts that projection, so
    linear interpolation of codes reproduces the middle image exactly.
    """

    domain = "image"

    def __init__(self, size=16, latent_dim=5, seed=0):
        rng = np.random.default_rng(seed)
        self.u = rng.uniform(-0.5, 0.5, (size, size))
        self.v = rng.uniform(-0.4, 0.4, (size, size))
        self.d = rng.standard_normal(latent_dim)
        self.latent_dim = latent_dim

    def render(self, t):
        return self.v + (t / 180.0) * self.u

    def encode_map(self, x):
        x = np.asarray(x)
        s = ((x - self.v) * self.u).sum(axis=(-2, -1)) / (self.u * self.u).sum()
        return np.multiply.outer(s, self.d)

    def decode(self, z):
        z = np.asarray(z)
        s = z @ self.d / (self.d @ self.d)
        return self.v + np.multiply.outer(s, self.u)


def linear_dataset(model, n_objects=3, n_angles=15, seed=0):
    rng = np.random.default_rng(seed)
    seqs = []
    for oid in range(n_objects):
        t = np.sort(rng.choice(np.arange(0, 181), n_angles, replace=False)).astype(float)
        seqs.append(ImageSequence(oid, oid, t, np.stack([model.render(a) for a in t])))
    idx = np.arange(n_angles)
    splits = {s.object_id: {"train": idx[:0], "val": idx[:0], "test": idx} for s in seqs}
    return Dataset("image", seqs, splits)


@pytest.fixture(scope="session")
def linear_fixture():
    m = LinearAngleModel()
    return m, linear_dataset(m)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    status = "PASS" if rep.passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
