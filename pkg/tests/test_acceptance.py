"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary, then asserts the same condition.  Criteria 6 and 8 run through
the command-line interface so that criterion 11 can rerun them and
compare the written files byte for byte.
"""

import csv
import json
import math
import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from fracmass import (FracParams, PolyCurve, SegmentCurrent, SpectralConfig, boundary,
                      curl_bump_2d, curve_to_current, curves_to_current, first_variation, fd_first_variation,
                      field_riesz_energy, fractional_curvature, fractional_mass, fractional_perimeter_mc,
                      indicator_spectral_mass, io, richardson, sample_smooth_curve,
                      spectral_mass, transform)
from fracmass.cli import main
from fracmass.perimeter import l_shape, square

from conftest import FIXTURES, random_perturbation

S = 0.5

SMIRNOV_CONFIG = """\
# 2-D curl bump, acceptance schedule
field = curl_bump_2d
amplitude = 0.02
center = (0.5, 0.5)
radius = 0.5
eps = (0.2, 0.1, 0.05)
delta = (1e-3, 1e-4, 1e-5)
rho = 1e-3
s = 0.5
ms_samples = 4000000
# diagnostic quadrature: about 2e-8 relative to the default rule
quad_order = 6
near_ratio = 1.0
far_tol = 1e-6
"""


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(x) for x in r] for r in rows[1:]]


@contextmanager
def inside(d):
    # run with relative paths so the config echoed into outputs is location-free
    prev = os.getcwd()
    os.chdir(d)
    try:
        yield
    finally:
        os.chdir(prev)


def run_perimeter_cli(out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    with inside(out_dir):
        for name, region in (("square", square()), ("l_shape", l_shape())):
            src = f"{name}_region.json"
            io.region_to_json(region, src)
            dst = f"{name}_perimeter.json"
            code = main(["perimeter", src, "--s", str(S), "--n", str(10**7), "--seed", "0",
                         "--out", dst])
            assert code == 0
            results[name] = json.loads(Path(dst).read_text())["result"]
    return results


def run_smirnov_cli(out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    with inside(out_dir):
        Path("bump.cfg").write_text(SMIRNOV_CONFIG)
        assert main(["approximate", "bump.cfg", "--seed", "0", "--out", "run"]) == 0
    return out_dir / "run"


@pytest.fixture(scope="module")
def perimeter_run(tmp_path_factory):
    t0 = time.perf_counter()
    d = tmp_path_factory.mktemp("perimeter_a")
    res = run_perimeter_cli(d)
    return d, res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def smirnov_run(tmp_path_factory):
    t0 = time.perf_counter()
    d = run_smirnov_cli(tmp_path_factory.mktemp("smirnov_a"))
    return d, time.perf_counter() - t0


def test_criterion_01_segment_closed_form(record, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    t0 = time.perf_counter()
    src = tmp_path / "segment.json"
    io.curves_to_json([PolyCurve([[0.0, 0.0], [1.0, 0.0]])], src)
    worst = 0.0
    for s in (0.3, 0.5, 0.7):
        exact = 2.0 / ((1 - s) * (2 - s))
        assert main(["mass", str(src), "--s", str(s), "--json", "--out", str(tmp_path / "e.json")]) == 0
        val = json.loads(capsys.readouterr().out)["result"]["value"]
        forced = fractional_mass(curve_to_current(PolyCurve([[0, 0], [1, 0]])), FracParams(s),
                                 force_quad=True)
        worst = max(worst, abs(val - exact) / exact, abs(forced - exact) / exact)
    dt = time.perf_counter() - t0
    ok = record(1, worst < 1e-6 and dt < 1.0,
                f"max rel err {worst:.2e} (analytic and forced quadrature), {dt:.2f} s")
    assert ok


def test_criterion_02_length_limit(record):
    t0 = time.perf_counter()
    mu = curve_to_current(sample_smooth_curve("circle", {"r": 1.0}, 2048))
    s_vals = [0.9, 0.99, 0.999]
    vals = [(1 - s) * fractional_mass(mu, FracParams(s)) for s in s_vals]
    limit = richardson(s_vals, vals)
    err = abs(limit - 4 * math.pi) / (4 * math.pi)
    dt = time.perf_counter() - t0
    ok = record(2, err < 0.01 and dt < 120,
                f"extrapolated {limit:.6f} vs 4pi, rel err {err:.2e}, {dt:.1f} s")
    assert ok


def test_criterion_03_curvature_limit(record):
    t0 = time.perf_counter()
    c = sample_smooth_curve("circle", {"r": 1.0}, 2048)
    s_vals = [0.9, 0.99, 0.999]
    ks = [fractional_curvature(c, 0, s, check=False) for s in s_vals]
    # -gamma''(u) = gamma(u) = e1 at u = 0
    angle = max(abs(math.atan2(k[1], k[0])) for k in ks)
    limit = richardson(s_vals, [(1 - s) * np.linalg.norm(k) for s, k in zip(s_vals, ks)])
    dt = time.perf_counter() - t0
    ok = record(3, abs(limit - 1) < 0.01 and angle < 1e-3 and dt < 60,
                f"extrapolated |k| {limit:.7f}, direction err {angle:.1e} rad, {dt:.1f} s")
    assert ok


def test_criterion_04_first_variation(record):
    t0 = time.perf_counter()
    worst, literal = {}, {}
    for name, make in sorted(FIXTURES.items()):
        c = make()
        rng = np.random.default_rng(2024)
        mass = fractional_mass(curve_to_current(c), FracParams(S))
        worst[name] = literal[name] = 0.0
        for _ in range(10):
            h = random_perturbation(c, rng)
            fv = first_variation(c, h, S)
            fd = fd_first_variation(c, h, S)
            # a central difference resolves values only down to eps^(1/3) of the
            # derivative's natural size; the segment's exact variation is 0
            floor = np.finfo(float).eps ** (1 / 3) * mass * np.abs(h.values).max() / c.length()
            worst[name] = max(worst[name], abs(fv - fd) / max(abs(fd), floor))
            literal[name] = max(literal[name], abs(fv - fd) / (abs(fd) + 1e-12))
    dt = time.perf_counter() - t0
    top = max(worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    ok = record(4, top < 1e-3 and dt < 120,
                f"max rel err {top:.1e} ({detail}); without the FD noise floor the segment "
                f"gives {literal['segment']:.2f} (0 vs noise), {dt:.1f} s")
    assert ok


def test_criterion_05_spectral_identity(record):
    t0 = time.perf_counter()
    out = []
    circle = curve_to_current(sample_smooth_curve("circle", {"r": 1.0}, 128))
    # regular 128-gon: |F mu|^2 only has angular modes that are multiples of 128,
    # so a fixed odd ring of 257 nodes aliases nothing below mode 32896
    circle_cfg = SpectralConfig(angular_nodes=257, adaptive_angular=False)
    sq = curve_to_current(square().outer)
    for name, mu, cfg in (("circle", circle, circle_cfg), ("square", sq, SpectralConfig())):
        direct = fractional_mass(mu, FracParams(S))
        e0 = abs(spectral_mass(mu, S, cfg) - direct) / direct
        e1 = abs(spectral_mass(mu, S, cfg.widened(10.0)) - direct) / direct
        out.append((name, e0, e1))
    dt = time.perf_counter() - t0
    ok = all(e0 < 0.05 and e1 <= 0.5 * e0 for _, e0, e1 in out) and dt < 120
    detail = "; ".join(f"{n} {e0:.2%} -> {e1:.2%} widened" for n, e0, e1 in out)
    ok = record(5, ok, f"{detail}, {dt:.1f} s")
    assert ok


def test_criterion_06_perimeter_equivalence(record, perimeter_run):
    _, res, dt = perimeter_run
    parts, ok = [], dt < 180
    for name, r in res.items():
        mc, sig, direct = S * S * r["P_s_mc"], S * S * r["P_s_mc_se"], S * S * r["P_s_boundary"]
        diff = abs(mc - direct)
        ok &= diff < 3 * sig + 0.01 * direct
        parts.append(f"{name} |diff| {diff:.2e} vs bound {3 * sig + 0.01 * direct:.2e}")
    ok = record(6, ok, "; ".join(parts) + f", {dt:.1f} s")
    assert ok


def test_criterion_07_indicator_spectral(record, perimeter_run):
    _, res, _ = perimeter_run
    t0 = time.perf_counter()
    fourier = indicator_spectral_mass(square(), S)
    mc = S * S * res["square"]["P_s_mc"]
    sig = S * S * res["square"]["P_s_mc_se"]
    dt = time.perf_counter() - t0
    diff = abs(fourier - mc)
    ok = record(7, diff < 0.05 * mc + 3 * sig and dt < 120,
                f"spectral {fourier:.4f} vs s^2 P_MC {mc:.4f} ({(fourier - mc) / mc:+.2%}), {dt:.1f} s")
    assert ok


def decreasing(xs):
    return all(b < a for a, b in zip(xs, xs[1:]))


def test_criterion_08_smirnov(record, smirnov_run):
    run, dt = smirnov_run
    header, rows = read_csv(run / "diagnostics.csv")
    col = {h: i for i, h in enumerate(header)}
    closed = True
    for k in range(len(rows)):
        mu = io.read_current(run / f"current_{k}.json")
        loops = io.read_curves(run / f"loops_{k}.json")
        closed &= boundary(mu, 0.0).is_empty() and all(c.closed for c in loops)
        closed &= sum(len(c) for c in loops) == len(mu)
    mass = [abs(r[col["mass_mu"]] - r[col["mass_psi"]]) / r[col["mass_psi"]] for r in rows]
    pair = [r[col["pairing_err_max"]] for r in rows]
    ms = [abs(r[col["Ms_mu"]] - r[col["Ms_psi"]]) / r[col["Ms_psi"]] for r in rows]
    # standard error of the field energy at the final level
    _, sig = field_riesz_energy(curl_bump_2d(amplitude=0.02), S, 4 * 10**6, 0)
    rel_sig = sig / rows[-1][col["Ms_psi"]]
    checks = {
        "a": closed,
        "b": decreasing(mass) and mass[-1] < 0.05,
        "c": decreasing(pair) and pair[-1] < 0.05,
        "d": decreasing(ms) and ms[-1] < 0.10 + 3 * rel_sig,
    }
    fmt = lambda xs: "/".join(f"{x:.4f}" for x in xs)
    ok = record(8, all(checks.values()) and dt < 900,
                f"closed {closed}; mass {fmt(mass)}; pairing {fmt(pair)}; Ms {fmt(ms)} "
                f"(sigma {rel_sig:.2%}); {dt:.0f} s")
    assert ok


def random_polygon(rng, n):
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    r = rng.uniform(0.5, 1.5, n)
    return PolyCurve(np.column_stack([r * np.cos(ang), r * np.sin(ang)]) + rng.normal(size=2),
                     closed=True, weight=rng.uniform(0.5, 2.0))


def test_criterion_09_quadratic_form(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    p = FracParams(S)
    worst_par = worst_rev = 0.0
    for _ in range(20):
        a = curve_to_current(random_polygon(rng, int(rng.integers(3, 9))))
        b = curve_to_current(random_polygon(rng, int(rng.integers(3, 9))))
        neg_b = SegmentCurrent(b.starts, b.ends, -b.weights)
        Ma, Mb = fractional_mass(a, p), fractional_mass(b, p)
        lhs = fractional_mass(a + b, p) + fractional_mass(a + neg_b, p)
        worst_par = max(worst_par, abs(lhs - 2 * (Ma + Mb)) / (2 * (Ma + Mb)))
        rev = SegmentCurrent(a.ends, a.starts, a.weights)
        worst_rev = max(worst_rev, abs(fractional_mass(rev, p) - Ma) / Ma)
    dt = time.perf_counter() - t0
    ok = record(9, max(worst_par, worst_rev) < 1e-6 and dt < 60,
                f"parallelogram {worst_par:.1e}, reversal {worst_rev:.1e}, {dt:.1f} s")
    assert ok


def test_criterion_10_scaling(record):
    t0 = time.perf_counter()
    lam, s = 2.0, S
    mu = curve_to_current(sample_smooth_curve("ellipse", {"a": 1.0, "b": 0.6}, 128))
    r_curve = fractional_mass(transform(mu, lam), FracParams(s)) / fractional_mass(mu, FracParams(s))
    e_curve = abs(r_curve / lam ** (2 - s) - 1)
    bd = curves_to_current(l_shape().curves())
    r_bd = fractional_mass(transform(bd, lam), FracParams(s)) / fractional_mass(bd, FracParams(s))
    e_bd = abs(r_bd / lam ** (2 - s) - 1)
    a, ea = fractional_perimeter_mc(square(), s, 10**6, seed=10)
    b, eb = fractional_perimeter_mc(square(lam), s, 10**6, seed=11)
    k = lam ** (2 - s)
    z = abs(b - k * a) / math.hypot(eb, k * ea)
    dt = time.perf_counter() - t0
    ok = record(10, e_curve < 1e-4 and e_bd < 1e-4 and z < 3 and dt < 60,
                f"curve {e_curve:.1e}, boundary {e_bd:.1e}, MC perimeter {z:.2f} sigma, {dt:.1f} s")
    assert ok


def files_of(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(Path(root).rglob("*"))
            if p.is_file() and p.name != "runtime.csv"}


def test_criterion_11_determinism(record, perimeter_run, smirnov_run, tmp_path):
    d6, _, _ = perimeter_run
    d8, _ = smirnov_run
    run_perimeter_cli(tmp_path / "p")
    again8 = run_smirnov_cli(tmp_path / "s")
    a6, b6 = files_of(d6), files_of(tmp_path / "p")
    a8, b8 = files_of(d8), files_of(again8)
    same = a6 == b6 and a8 == b8 and len(a6) > 0 and len(a8) > 0
    ok = record(11, same, f"{len(a6) + len(a8)} output files compared byte for byte "
                          f"(runtime.csv excluded: wall-clock only)")
    assert ok
