import numpy as np
import pytest

from fracmass import PolyCurve, Perturbation, sample_smooth_curve


def segment_fixture(n=33):
    return sample_smooth_curve("segment", {"length": 1.0}, n)


def arc_fixture(n=40):
    t = np.linspace(0.25 * np.pi, 1.25 * np.pi, n)
    return PolyCurve(np.column_stack([np.cos(t), np.sin(t)]))


def perturbed_circle_fixture(n=64):
    t = 2 * np.pi * np.arange(n) / n
    r = 1.0 + 0.1 * np.cos(3 * t)
    return PolyCurve(np.column_stack([r * np.cos(t), r * np.sin(t)]), closed=True)


FIXTURES = {"segment": segment_fixture, "arc": arc_fixture,
            "perturbed_circle": perturbed_circle_fixture}


def random_perturbation(c, rng, modes=4, amplitude=0.1):
    """Random smooth field: a few sine (open) or Fourier (closed) modes in arc length."""
    a, b = c.edges()
    u = np.concatenate([[0.0], np.cumsum(np.linalg.norm(b - a, axis=1))])[: len(c)]
    u /= c.length()
    h = np.zeros_like(c.vertices)
    for k in range(1, modes + 1):
        if c.closed:
            prof = np.cos(2 * np.pi * k * u + rng.uniform(0, 2 * np.pi))
        else:
            prof = np.sin(np.pi * k * u)
        h += prof[:, None] * rng.normal(size=c.dim)[None, :] / k
    if not c.closed:
        h[0] = h[-1] = 0.0
    return Perturbation(c, amplitude * h)


ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store a one-line verdict for the acceptance summary."""
    def _record(number, passed, detail):
        ACCEPTANCE[number] = (passed, detail)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
