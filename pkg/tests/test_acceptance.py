"""End-to-end acceptance checks, one test per criterion.

Run ``pytest -m acceptance`` for this file alone; the terminal summary prints
one pass/fail line per criterion.
"""
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from qbound.entropic import PartitionSpec, entropy, multipartite_mi, multipartite_qcmi
from qbound.spectra import OscillatorModel, bd_ratio, f_bar, f_hat_star, oscillator_f, solve_gibbs
from qbound.tensor import QuantumState, SystemLayout
from qbound.witness import (
    INEQUALITIES,
    SampleConfig,
    audit_ok,
    ghz_witness,
    inequality_suite,
    suite_failed,
    tightness_sweep,
    verify_many,
    verify_suite,
    write_csv,
)

pytestmark = pytest.mark.acceptance

SEED = 20240101
COUNT = 1000
OSC = OscillatorModel((1.0,))
LN2 = np.log(2)

# CSV text and audit events shared between criteria
CSV = {}
AUDIT = {"energy": [], "tightness": []}


def min_slack(records):
    return min(r.slack for r in records)


# ---------------------------------------------------------------- criterion 2-5 runners


def run_chain(threads=1):
    cfg = SampleConfig(SEED, SystemLayout.from_dims([2, 2, 2, 2]), count=500)
    return inequality_suite("chain_direct", cfg, threads=threads)


def run_inequalities(threads=1):
    out = {}
    for name in INEQUALITIES:
        if name == "chain_direct":
            continue
        dims = [2, 2, 2, 2] if name == "delta_ub" else [2, 2, 2]
        out[name] = inequality_suite(name, SampleConfig(SEED, SystemLayout.from_dims(dims), count=COUNT),
                                     threads=threads)
    return out


FINITE_CONFIGS = [
    ("mi", [2, 2], 2),
    ("mi", [2, 2, 2], 3),
    ("qcmi", [2, 2, 2], 1),
    ("qcmi", [2, 2, 2], 2),
    ("qcmi", [2, 2, 2, 2], 2),
    ("qcmi", [2, 2, 2, 2], 3),
    ("delta", [2, 2, 2, 2], 2),
]
FINITE_EPS = (0.01, 0.1, 0.5, 1.0)


def run_finite(threads=1, channel=False, configs=FINITE_CONFIGS):
    out = {}
    for char, dims, m in configs:
        layout = SystemLayout.from_dims(dims, constrained=m)
        for eps in FINITE_EPS:
            cfg = SampleConfig(SEED, layout, eps, count=COUNT)
            out[(char, len(dims), m, eps)] = verify_suite(char, "finite", cfg, channel=channel, threads=threads)
    return out


ENERGY_VARIANTS = [("sqrt", None), ("sqrt-osc", None)] + [
    (v, t) for v in ("two-step", "oscillator") for t in (0.5, 1.0, "optimize")
]


def run_energy(threads=1, audit=None):
    out = {}
    layout = SystemLayout.from_dims([64, 64])
    for eps in (0.02, 0.1):
        cfg = SampleConfig(SEED, layout, eps, energy=2.0, count=COUNT)
        out[eps] = verify_many("mi", ENERGY_VARIANTS, cfg, spectrum=OSC, threads=threads, audit=audit)
    return out


# ---------------------------------------------------------------- criteria


def test_criterion_01_entropic_exactness():
    """entropy(I/d), MI(GHZ), QCMI(GHZ3) exact within 1e-10 in under 1 s"""
    start = time.perf_counter()
    errs = []
    for d in (2, 3, 8, 64):
        lay = SystemLayout.from_dims([d])
        errs.append(abs(entropy(QuantumState(lay, np.eye(d) / d)) - np.log(d)))
    for n, d in ((2, 2), (3, 2), (2, 8), (3, 4), (4, 3)):
        errs.append(abs(multipartite_mi(ghz_witness(n, d)) - n * np.log(d)))
    ghz3 = ghz_witness(3, 2)
    labels = ghz3.layout.labels
    part = PartitionSpec(((labels[0],), (labels[1],)), (labels[2],))
    errs.append(abs(multipartite_qcmi(ghz3, part) - LN2))
    elapsed = time.perf_counter() - start
    assert max(errs) < 1e-10
    assert elapsed < 1.0


def test_criterion_02_chain_vs_direct():
    """chain and direct QCMI agree within 1e-8 on 500 four-party states in under 30 s"""
    start = time.perf_counter()
    recs = run_chain()
    elapsed = time.perf_counter() - start
    CSV[2] = write_csv(recs)
    assert len(recs) == 500
    assert max(r.lhs for r in recs) < 1e-8
    assert elapsed < 30


def test_criterion_03_inequality_suites():
    """seven entropy-inequality families hold with slack >= -1e-9 on 1000 samples each in under 5 min"""
    start = time.perf_counter()
    suites = run_inequalities()
    elapsed = time.perf_counter() - start
    CSV[3] = "".join(write_csv(recs) for recs in suites.values())
    for name, recs in suites.items():
        assert len({r.meta["index"] for r in recs}) == COUNT, name
        assert min_slack(recs) >= -1e-9, name
    assert elapsed < 300


def test_criterion_04_finite_bounds():
    """MI, QCMI and Delta finite-dimensional bounds hold on 1000 pairs per configuration in under 10 min"""
    start = time.perf_counter()
    suites = run_finite()
    elapsed = time.perf_counter() - start
    CSV[4] = "".join(write_csv(recs) for recs in suites.values())
    for key, recs in suites.items():
        assert len(recs) == COUNT, key
        assert min_slack(recs) >= -1e-9, key
        assert all(r.eps_measured <= r.eps_target for r in recs), key
    assert elapsed < 600


def test_criterion_05_energy_bounds():
    """sqrt and two-step bounds hold on 64-level oscillator pairs at E = 2"""
    suites = run_energy(audit=AUDIT["energy"])
    CSV[5] = "".join(write_csv(recs) for recs in suites.values())
    for eps, recs in suites.items():
        assert len(recs) == COUNT * len(ENERGY_VARIANTS)
        variants = {r.variant for r in recs}
        assert {"sqrt", "sqrt-osc", "two-step", "oscillator"} <= variants
        assert min_slack(recs) >= -1e-9, eps
        ts = {r.t for r in recs if r.variant == "two-step"}
        assert {0.5, 1.0} < ts


def _gibbs_oracle(levels, energy):
    # independent bisection on the truncated ladder E_k = k + 1/2
    ev = np.arange(levels) + 0.5

    def mean_gap(lam):
        w = np.exp(-lam * (ev - ev[0]))
        return w @ ev / w.sum() - energy

    lam = brentq(mean_gap, 1e-6, 50.0, xtol=1e-15, rtol=1e-15)
    p = np.exp(-lam * (ev - ev[0]))
    p /= p.sum()
    nz = p[p > 0]
    return lam, float(-(nz * np.log(nz)).sum())


def test_criterion_06_gibbs_reproduction():
    """oscillator Gibbs point at E = 1.5 and F-bar dominance on a 50-point grid"""
    lam_ref, ent_ref = _gibbs_oracle(200, 1.5)
    p = solve_gibbs(OSC.spectrum(200), 1.5)
    assert abs(p.lam - lam_ref) < 1e-8 and abs(p.entropy - ent_ref) < 1e-8
    assert abs(p.lam - LN2) < 1e-8 and abs(p.entropy - 2 * LN2) < 1e-8
    spec = OSC.spectrum(2048)
    grid = np.linspace(0.01, 50, 50)
    numeric = f_bar(spec, grid)
    closed = np.array([oscillator_f(OSC, e) for e in grid])
    assert np.all(numeric <= closed + 1e-12)


def test_criterion_07_fhat_properties():
    """F-hat* dominates F-bar, is nondecreasing, F-hat*/sqrt(E) nonincreasing; BD ratio within 5% of 2"""
    spec = OSC.spectrum(2048)
    grid = np.geomspace(1e-3, 10, 100)
    fh = f_hat_star(spec, grid)
    assert np.all(fh >= f_bar(spec, grid) - 1e-12)
    assert np.all(np.diff(fh) >= 0)
    assert np.all(np.diff(fh / np.sqrt(grid)) <= 1e-12)
    assert abs(bd_ratio(spec, grid[-1]) - 2.0) < 0.05 * 2.0


def test_criterion_08_tightness():
    """GHZ ratio >= 0.74 at d = 64 and increasing; energy-axis ratio increasing over E in {1,2,4,8}"""
    dims = [2, 4, 8, 16, 32, 64]
    rows = tightness_sweep("mi", "dimension", dims, 1.0)
    ratios = np.array([r.ratio for r in rows])
    assert np.all(np.diff(ratios) > 0)
    assert ratios[-1] >= 0.74
    rows = tightness_sweep("mi", "energy", [1.0, 2.0, 4.0, 8.0], 0.1, audit=AUDIT["tightness"])
    ratios = np.array([r.ratio for r in rows])
    assert np.all(np.diff(ratios) > 0)
    assert all(r.t is not None for r in rows)


def test_criterion_09_channel_preservation():
    """MI finite suites pass after random local channels with the pre-channel bound"""
    configs = [c for c in FINITE_CONFIGS if c[0] == "mi"]
    plain = run_finite(configs=configs)
    chan = run_finite(channel=True, configs=configs)
    for key, recs in chan.items():
        assert not suite_failed(recs), key
        assert min_slack(recs) >= -1e-9, key
        assert [r.rhs for r in recs] == [r.rhs for r in plain[key]]
        assert all(r.variant == "finite+channel" for r in recs)


def test_criterion_10_truncation_machinery():
    """tail-weight, retained-mass, gentle-measurement and truncated-energy checks hold on every truncation event from criteria 5 and 8"""
    events = AUDIT["energy"] + AUDIT["tightness"]
    assert AUDIT["energy"] and AUDIT["tightness"], "criteria 5 and 8 must run first"
    checks = {e["check"] for e in events}
    assert {"tail-weight", "retained-mass", "gentle-measurement", "truncated-energy"} <= checks
    bad = [e for e in events if e["lhs"] > e["rhs"] + 1e-9]
    assert not bad, bad[:3]
    assert audit_ok(events)


def test_criterion_11_determinism():
    """criteria 2-5 rerun with the same master seed (and four threads) give byte-identical CSV"""
    assert set(CSV) == {2, 3, 4, 5}, "criteria 2-5 must run first"
    assert write_csv(run_chain(threads=4)) == CSV[2]
    assert "".join(write_csv(r) for r in run_inequalities(threads=4).values()) == CSV[3]
    assert "".join(write_csv(r) for r in run_finite(threads=4).values()) == CSV[4]
    assert "".join(write_csv(r) for r in run_energy(threads=4).values()) == CSV[5]
