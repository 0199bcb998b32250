"""Random and constructed test states, and suites that check bounds against them.

Every sample ``i`` of a run with master seed ``s`` draws from its own generator
seeded by ``SeedSequence([s, i])``, so results do not depend on evaluation order
or worker count.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import bounds as B
from .entropic import (
    PartitionSpec,
    _EntropyTable,
    _qcmi_chain,
    _qcmi_direct,
    binary_entropy,
    delta_ei,
    delta_ei_direct,
    entropy,
    multipartite_mi,
)
from .errors import ConvergenceError, DimensionError
from .spectra import OscillatorModel, SpectrumModel, solve_gibbs, tail_fraction
from .tensor import (
    MAX_STRUCTURED_DIM,
    QuantumState,
    SystemLayout,
    TruncationSpec,
    apply_local_channel,
    diagonal_state,
    local_energies,
    marginal_diagonal,
    mix,
    project,
    random_local_channel,
    trace_distance,
    trace_norm_difference,
)

SLACK_TOL = 1e-9
CHAIN_TOL = 1e-8
MAX_RETRIES = 20
CSV_COLUMNS = ("characteristic", "variant", "n", "m", "dims", "eps_target", "eps_measured",
               "energy", "t", "lhs", "rhs", "slack", "seed")


@dataclass(frozen=True)
class SampleConfig:
    seed: int
    layout: SystemLayout
    eps: float = 0.0
    energy: float | None = None
    count: int = 1
    rank: int | None = None

    def __post_init__(self):
        if not 0 <= self.eps <= 1:
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass
class VerifyRecord:
    characteristic: str
    variant: str
    n: int
    m: int | None
    dims: tuple[int, ...]
    eps_target: float | None
    eps_measured: float | None
    energy: float | None
    t: float | None
    lhs: float
    rhs: float
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def ok(self) -> bool:
        return self.slack >= -SLACK_TOL

    def row(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)

        return [self.characteristic, self.variant, str(self.n), fmt(self.m),
                "x".join(str(d) for d in self.dims), fmt(self.eps_target), fmt(self.eps_measured),
                fmt(self.energy), fmt(self.t), fmt(float(self.lhs)), fmt(float(self.rhs)),
                fmt(float(self.slack)), str(self.seed)]


def write_csv(records: Sequence[VerifyRecord], out=None) -> str:
    """Write records with the fixed column set; returns the CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w", newline="") as fh:
                fh.write(text)
    return text


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def sample_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1, np.uint64)[0])


def sample_rng(master: int, index: int) -> np.random.Generator:
    return np.random.default_rng(sample_seed(master, index))


def _ginibre(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    return (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))) / np.sqrt(2)


def _normalized(layout: SystemLayout, f: np.ndarray) -> QuantumState:
    return QuantumState(layout, factor=f / np.linalg.norm(f), check=False)


def sample_state(cfg: SampleConfig, rng: np.random.Generator | None = None,
                 rank: int | None = None) -> QuantumState:
    """Hilbert-Schmidt random state: ``G G^dagger / Tr`` for a complex Ginibre ``N x k`` matrix.

    ``k = N`` (the default) is the marginal of a uniformly random pure state on
    the doubled space; smaller ``k`` gives the induced measure of rank ``k``.
    """
    if rng is None:
        rng = sample_rng(cfg.seed, 0)
    n = cfg.layout.total_dim
    k = rank or cfg.rank or n
    return _normalized(cfg.layout, _ginibre(rng, n, min(k, n)))


def random_pure_state(layout: SystemLayout, rng: np.random.Generator) -> QuantumState:
    return _normalized(layout, _ginibre(rng, layout.total_dim, 1))


def _orthogonal_pair(layout: SystemLayout, rng: np.random.Generator, rank: int):
    """Two mixed states with orthogonal supports (trace distance 1)."""
    n = layout.total_dim
    r = max(1, min(rank, n // 2))
    q, _ = np.linalg.qr(_ginibre(rng, n, 2 * r))
    w1, w2 = rng.dirichlet(np.ones(r)), rng.dirichlet(np.ones(r))
    a = QuantumState(layout, factor=q[:, :r] * np.sqrt(w1), check=False)
    b = QuantumState(layout, factor=q[:, r:] * np.sqrt(w2), check=False)
    return a, b


def pure_pair_at_distance(layout: SystemLayout, eps: float, rng: np.random.Generator):
    """Pure ``psi`` and ``phi`` with ``|<psi|phi>|^2 = 1 - eps^2`` (trace distance ``eps``)."""
    n = layout.total_dim
    psi = _ginibre(rng, n, 1).ravel()
    psi /= np.linalg.norm(psi)
    perp = _ginibre(rng, n, 1).ravel()
    perp -= np.vdot(psi, perp) * psi
    perp /= np.linalg.norm(perp)
    phi = np.sqrt(1 - eps**2) * psi + eps * perp
    return QuantumState.from_vector(layout, psi), QuantumState.from_vector(layout, phi, normalize=True)


def segment_point(a: QuantumState, b: QuantumState, eps: float, dist: float | None = None):
    """Point ``k a + (1-k) b`` at trace distance ``eps`` from ``b``.

    Trace distance is exactly linear along the segment, so ``k = eps / ||a-b||``
    is the solution; the measured distance is returned alongside.
    """
    if dist is None:
        dist = trace_distance(a, b)
    k = min(1.0, eps / dist)
    point = a if k == 1.0 else mix([a, b], [k, 1 - k])
    measured = trace_distance(point, b)
    # rounding can leave the measured distance a few ulps above eps
    for _ in range(5):
        if measured <= eps or k >= 1.0:
            break
        k *= eps / measured * (1 - 1e-12)
        point = mix([a, b], [k, 1 - k])
        measured = trace_distance(point, b)
    return point, measured


def energy_constrained_state(cfg: SampleConfig, spectra: Sequence, rng: np.random.Generator | None = None,
                             rank: int | None = None) -> QuantumState:
    """Random low-rank state whose constrained parties carry total mean energy at most ``m E``.

    A Ginibre sample is first shaped with a random thermal profile (inverse
    temperature in [0.3, 1.5]) on the constrained factors, then mixed with the
    ground state ``|0...0>`` at the smallest weight that meets the budget.
    """
    if cfg.energy is None:
        raise ValueError("energy_constrained_state needs cfg.energy")
    if rng is None:
        rng = sample_rng(cfg.seed, 0)
    layout = cfg.layout
    m = layout.constrained
    spectra = [np.asarray(getattr(s, "eigenvalues", s), dtype=float) for s in spectra][:m]
    if len(spectra) < m:
        raise DimensionError(f"need spectra for {m} constrained factors")
    dims = layout.dims
    for k in range(m):
        if len(spectra[k]) < dims[k]:
            raise DimensionError(f"spectrum {k} has fewer levels than factor dimension {dims[k]}")
    budget = m * cfg.energy
    e_ground = sum(float(s[0]) for s in spectra)
    if budget < e_ground - 1e-12:
        raise ValueError(f"budget {budget} below the ground energy {e_ground}")
    n = layout.total_dim
    k = min(rank or cfg.rank or 4, n)
    beta = rng.uniform(0.3, 1.5)
    shape = np.ones(1)
    for i, d in enumerate(dims):
        w = np.exp(-0.5 * beta * (spectra[i][:d] - spectra[i][0])) if i < m else np.ones(d)
        shape = np.kron(shape, w)
    f = _ginibre(rng, n, k) * shape[:, None]
    raw = _normalized(layout, f)
    e_raw = sum(local_energies(raw, spectra))
    ground = np.zeros((n, 1), dtype=complex)
    ground[0, 0] = 1.0
    if e_raw <= budget:
        return raw
    w = (e_raw - budget) / (e_raw - e_ground)
    w = min(1.0, w * (1 + 1e-12))
    return QuantumState(layout, factor=np.hstack([np.sqrt(1 - w) * raw.factor, np.sqrt(w) * ground]),
                        check=False)


def pair_at_distance(cfg: SampleConfig, rng: np.random.Generator | None = None,
                     spectra: Sequence | None = None):
    """``(rho, sigma)`` with trace distance in ``[0.9 eps, eps]``.

    Endpoints are drawn as Hilbert-Schmidt states, then (if they are too close)
    as pure states, then as states with orthogonal supports.  With ``spectra``
    both endpoints are energy-constrained and the pair stays within budget.
    """
    if rng is None:
        rng = sample_rng(cfg.seed, 0)
    eps = cfg.eps
    if spectra is not None:
        draw = lambda: energy_constrained_state(cfg, spectra, rng)
    else:
        draw = lambda: sample_state(cfg, rng)
    if eps == 0:
        rho = draw()
        return rho, rho
    for attempt in range(MAX_RETRIES):
        if spectra is not None or attempt == 0:
            a, b = draw(), draw()
        elif attempt == 1:
            a, b = random_pure_state(cfg.layout, rng), random_pure_state(cfg.layout, rng)
        else:
            a, b = _orthogonal_pair(cfg.layout, rng, cfg.rank or cfg.layout.total_dim)
        dist = trace_distance(a, b)
        if dist >= eps - 1e-12:
            rho, _ = segment_point(a, b, eps, dist)
            return rho, b
    raise ConvergenceError(f"could not reach trace distance {eps} after {MAX_RETRIES} draws")


# --------------------------------------------------------------------------
# witnesses
# --------------------------------------------------------------------------


def ghz_witness(n: int, d: int, max_dim: int = MAX_STRUCTURED_DIM) -> QuantumState:
    """``sum_i |i...i> / sqrt(d)`` on ``n`` parties of dimension ``d``."""
    if n < 2 or d < 2:
        raise ValueError("GHZ witness needs n >= 2 and d >= 2")
    total = d**n
    if total > max_dim:
        raise DimensionError(f"GHZ dimension {total} exceeds the configured maximum {max_dim}")
    layout = SystemLayout.from_dims([d] * n)
    stride = sum(d**j for j in range(n))
    vec = np.zeros(total, dtype=complex)
    vec[np.arange(d) * stride] = 1 / np.sqrt(d)
    return QuantumState.from_vector(layout, vec)


def gibbs_witnesses(n: int, spec: SpectrumModel, energy: float):
    """Product Gibbs state and the pure state with Gibbs marginals.

    ``rho1 = gamma(E)^{(x)n}`` (zero mutual information) and
    ``rho2 = |psi><psi|`` with ``psi = sum_i sqrt(p_i) |i...i>`` (every marginal is
    ``gamma(E)``, mutual information ``n F_H(E)``).
    """
    point = solve_gibbs(spec, energy)
    p = point.probabilities
    L = len(p)
    layout = SystemLayout.from_dims([L] * n)
    probs = np.ones(1)
    for _ in range(n):
        probs = np.kron(probs, p)
    rho1 = diagonal_state(layout, probs)
    stride = sum(L**j for j in range(n))
    vec = np.zeros(L**n, dtype=complex)
    vec[np.arange(L) * stride] = np.sqrt(p)
    rho2 = QuantumState.from_vector(layout, vec)
    return rho1, rho2


# --------------------------------------------------------------------------
# truncation audit
# --------------------------------------------------------------------------


def cutoff_for_t(spec: SpectrumModel, m: int, e_bar: float, x: float, t: float) -> tuple[int, bool]:
    """Smallest ``d`` with ``E_d - E_0 >= m E_bar / (x t)^2``; flag is False if the spectrum is too short."""
    shifted = spec.shifted()
    d0 = spec.ground_multiplicity
    target = m * e_bar / (x * t) ** 2
    if shifted[d0] >= target:
        return d0, True
    idx = int(np.searchsorted(shifted, target, side="left"))
    if idx >= len(shifted):
        return len(shifted) - 1, False
    return max(idx, d0), True


def truncation_audit(state: QuantumState, spectra: Sequence[SpectrumModel], energy: float,
                     cutoffs: Sequence[int], label: str = "") -> list[dict]:
    """Check the truncation inequalities for one energy-constrained state.

    For each cutoff ``d`` (levels kept per constrained factor) the events are:
    ``tail-weight`` per factor (tail weight vs ``(E_k - E_0)/(E_d - E_0)``),
    ``retained-mass`` (``Tr Q_d w >= 1 - m E_bar / E_bar_d``), ``gentle-measurement``
    (``||w - w_d||_1 <= 2 sqrt(Tr (I - Q_d) w)``) and, when ``E_bar_d > m E_bar``,
    ``truncated-energy`` (energy of the renormalised truncation within ``m E``).
    """
    m = state.layout.constrained
    spec = spectra[0]
    e0 = spec.ground_energy
    e_bar = energy - e0
    levels = [np.asarray(s.eigenvalues) for s in spectra[:m]]
    energies = local_energies(state, levels)
    events = []
    for d in cutoffs:
        if not 1 <= d < min(len(s) for s in spectra[:m]) or d > min(state.layout.dims[:m]):
            continue
        e_bar_d = spec.eigenvalues[d] - e0
        for k in range(m):
            tail = float(np.sum(marginal_diagonal(state, k)[d:]))
            events.append(dict(check="tail-weight", d=d, factor=k, lhs=tail,
                               rhs=tail_fraction(spectra[k], energies[k], d), label=label))
        trunc = TruncationSpec.uniform(d, m)
        mask = trunc.mask(state.layout)
        projected, mass = project(state, mask)
        discarded = float(np.sum(state.diagonal()[~mask]))
        events.append(dict(check="retained-mass", d=d, lhs=1 - m * e_bar / e_bar_d, rhs=mass, label=label))
        if mass <= 0:
            continue
        if projected.kind == "factor":
            w_d = QuantumState(state.layout, factor=projected.factor / np.sqrt(mass), check=False)
        elif projected.kind == "dense":
            w_d = QuantumState(state.layout, projected.matrix / mass, check=False)
        else:
            w_d = QuantumState(state.layout, projected.to_sparse() / mass, check=False)
        norm = trace_norm_difference(state, w_d)
        events.append(dict(check="gentle-measurement", d=d, lhs=norm, rhs=2 * np.sqrt(max(0.0, discarded)),
                           label=label))
        if e_bar_d > m * e_bar:
            e_trunc = sum(local_energies(w_d, levels))
            events.append(dict(check="truncated-energy", d=d, lhs=e_trunc, rhs=m * energy, label=label))
    return events


def cutoff_events(spec: SpectrumModel, m: int, energy: float, x: float, t: float) -> list[dict]:
    """The two-sided cutoff choice ``m E_bar / E_bar_d <= (x t)^2 <= m E_bar / E_bar_{d-1}``."""
    e_bar = energy - spec.ground_energy
    d, in_range = cutoff_for_t(spec, m, e_bar, x, t)
    shifted = spec.shifted()
    if not in_range:
        return [dict(check="cutoff-clamped", d=d, lhs=0.0, rhs=0.0, label=f"x={x!r},t={t!r}")]
    target = (x * t) ** 2
    out = [dict(check="cutoff-choice", d=d, lhs=m * e_bar / shifted[d], rhs=target, label=f"x={x!r},t={t!r}")]
    if d > spec.ground_multiplicity:
        out.append(dict(check="cutoff-choice", d=d, lhs=target, rhs=m * e_bar / shifted[d - 1],
                        label=f"x={x!r},t={t!r}"))
    return out


def audit_ok(events: Sequence[dict]) -> bool:
    return all(e["lhs"] <= e["rhs"] + SLACK_TOL for e in events)


# --------------------------------------------------------------------------
# verification suites
# --------------------------------------------------------------------------

CHARACTERISTICS = ("mi", "qcmi", "delta", "sq", "csq", "ei")
PURE_ONLY = ("sq", "csq", "ei")
ENERGY_VARIANTS = ("sqrt", "sqrt-osc", "two-step", "oscillator")


def _roles(characteristic: str, layout: SystemLayout):
    """Party count ``n`` and the functional ``state -> (value, gap)`` for a layout."""
    labels = layout.labels
    if characteristic in ("mi",) + PURE_ONLY:
        part = PartitionSpec(tuple((lab,) for lab in labels))
        return len(labels), lambda s: (multipartite_mi(s, part), 0.0)
    if characteristic == "qcmi":
        if len(labels) < 3:
            raise DimensionError("QCMI suites need at least two parties plus a conditioning factor")
        groups, cond = [(lab,) for lab in labels[:-1]], (labels[-1],)

        def qcmi(s):
            chain = _qcmi_chain(_EntropyTable(s), groups, cond)
            direct = _qcmi_direct(_EntropyTable(s), groups, cond)
            return chain, abs(chain - direct)

        return len(labels) - 1, qcmi
    if characteristic == "delta":
        if len(labels) % 2 or len(labels) < 4:
            raise DimensionError("delta suites need 2n factors (A_1..A_n, A'_1..A'_n)")
        n = len(labels) // 2
        pairs = list(zip(labels[:n], labels[n:]))

        def delta(s):
            v = delta_ei(s, pairs)
            return v, abs(v - delta_ei_direct(s, pairs))

        return n, delta
    raise ValueError(f"characteristic must be one of {CHARACTERISTICS}")


def _descriptor(characteristic: str, n: int, m: int) -> B.ClassDescriptor:
    if characteristic == "ei" and m != n:
        raise ValueError("the E_I bound is only defined with m = n")
    return B.lookup(characteristic, n, m)


def _rhs_for(characteristic, variant, cfg, n, m, spectrum, t):
    """Bound value for one (variant, t); computed once per suite."""
    desc = _descriptor(characteristic, n, m)
    if variant == "finite":
        dim = int(np.prod(cfg.layout.dims[:m], dtype=object))
        return B.cb_finite(desc, cfg.eps, dim)
    if variant not in ENERGY_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if spectrum is None or cfg.energy is None:
        raise ValueError(f"variant {variant} needs a spectrum and cfg.energy")
    if variant in ("sqrt-osc", "oscillator"):
        if not isinstance(spectrum, OscillatorModel):
            raise ValueError(f"variant {variant} needs an OscillatorModel")
        model = spectrum
    else:
        # the sampled system is the finite truncation itself
        model = spectrum
        if isinstance(model, OscillatorModel):
            model = SpectrumModel(model.spectrum(cfg.layout.dims[0]).eigenvalues)
    spec = B.BoundSpec(desc, cfg.eps, cfg.energy, t, model)
    if variant in ("sqrt", "sqrt-osc"):
        return B.cb_energy_sqrt(spec)
    if t is None:
        raise ValueError(f"variant {variant} needs t")
    if variant == "two-step":
        return B.vb_two_step(spec)
    return B.cb_oscillator(spec)


def verify_many(characteristic: str, variants: Sequence[tuple[str, float | str | None]],
                cfg: SampleConfig, *, spectrum=None, channel: bool = False, threads: int = 1,
                audit: list | None = None, cutoffs: Sequence[int] = (4, 8, 16, 32)) -> list[VerifyRecord]:
    """Run one sample set against several (variant, t) bound choices.

    Records come out grouped by sample index, then by variant order.  With
    ``channel=True`` both states of each pair pass through a random local
    channel (isometry with a 2-dimensional environment per factor) before the
    LHS is evaluated, while the RHS stays the pre-channel value.
    """
    characteristic = characteristic.lower()
    layout = cfg.layout
    n, fn = _roles(characteristic, layout)
    m = layout.constrained
    if characteristic == "delta":
        m = n
    energy_mode = any(v != "finite" for v, _ in variants)
    spectra = None
    if energy_mode:
        if spectrum is None or cfg.energy is None:
            raise ValueError("energy-constrained variants need a spectrum and cfg.energy")
        base = spectrum
        if isinstance(base, OscillatorModel):
            base = base.spectrum(max(layout.dims[:m]))
        spectra = [SpectrumModel(base.eigenvalues[: layout.dims[k]]) for k in range(m)]
    if characteristic in PURE_ONLY and channel:
        raise ValueError(f"{characteristic} suites cover pure states only; channels would mix them")
    rhs = [(v, t, _rhs_for(characteristic, v, cfg, n, m, spectrum, t)) for v, t in variants]
    events_needed = audit is not None and energy_mode
    dims = layout.dims

    def one(i: int):
        seed = sample_seed(cfg.seed, i)
        rng = np.random.default_rng(seed)
        if characteristic in PURE_ONLY:
            rho, sigma = pure_pair_at_distance(layout, cfg.eps, rng)
        else:
            rho, sigma = pair_at_distance(cfg, rng, spectra)
        measured = trace_distance(rho, sigma)
        meta = {"index": i}
        events = []
        if events_needed:
            for tag, s in (("rho", rho), ("sigma", sigma)):
                events += truncation_audit(s, spectra, cfg.energy, cutoffs, label=f"{i}:{tag}")
                meta[f"energy_{tag}"] = sum(local_energies(s, spectra))
        if channel:
            chan = random_local_channel(rng, dims)
            rho, sigma = apply_local_channel(chan, rho), apply_local_channel(chan, sigma)
        (fr, gr), (fs, gs) = fn(rho), fn(sigma)
        meta["chain_gap"] = max(gr, gs)
        lhs = abs(fr - fs)
        recs = []
        for v, t, val in rhs:
            name = v + ("+channel" if channel else "")
            recs.append(VerifyRecord(characteristic, name, n, m, dims, cfg.eps, measured, cfg.energy,
                                     val.t, lhs, val.total, seed, dict(meta)))
        return recs, events

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(cfg.count)))
    else:
        results = [one(i) for i in range(cfg.count)]
    records = [r for recs, _ in results for r in recs]
    if audit is not None:
        for _, events in results:
            audit.extend(events)
        if energy_mode:
            for v, t, val in rhs:
                if v in ("two-step", "oscillator") and val.t is not None and cfg.eps > 0:
                    audit.extend(cutoff_events(spectra[0], m, cfg.energy, val.eps_used, val.t))
    return records


def verify_suite(characteristic: str, variant: str, cfg: SampleConfig, *, spectrum=None,
                 t: float | str | None = None, channel: bool = False, threads: int = 1,
                 audit: list | None = None) -> list[VerifyRecord]:
    """Sample ``cfg.count`` pairs at distance ``cfg.eps`` and compare ``|f(rho) - f(sigma)|`` to the bound."""
    return verify_many(characteristic, [(variant, t)], cfg, spectrum=spectrum, channel=channel,
                       threads=threads, audit=audit)


def suite_failed(records: Sequence[VerifyRecord]) -> bool:
    return any(not r.ok for r in records)


# --------------------------------------------------------------------------
# entropy-inequality suites
# --------------------------------------------------------------------------

INEQUALITIES = ("concavity_gap", "mi_mixing", "qcmi_mixing", "cmi_ub", "mi_ub",
                "qcmi_ub_1", "qcmi_ub_2", "delta_ub", "chain_direct")


def _random_state(layout: SystemLayout, rng: np.random.Generator) -> QuantumState:
    rank = int(rng.integers(1, layout.total_dim + 1))
    return _normalized(layout, _ginibre(rng, layout.total_dim, rank))


def _inequality_records(name: str, layout: SystemLayout, rng, seed: int) -> list[tuple]:
    """``(variant, lhs, rhs, meta)`` tuples for one random sample."""
    labels = layout.labels
    parties = [(lab,) for lab in labels]
    if name in ("concavity_gap", "mi_mixing", "qcmi_mixing"):
        rho, sigma = _random_state(layout, rng), _random_state(layout, rng)
        p = float(rng.uniform(0.0, 1.0))
        mixed = mix([rho, sigma], [p, 1 - p])
        h2 = binary_entropy(p)
        if name == "concavity_gap":
            f = entropy
            lower, upper = 0.0, h2
        elif name == "mi_mixing":
            f = lambda s: multipartite_mi(s, PartitionSpec(tuple(parties)))
            lower, upper = -h2, (len(parties) - 1) * h2
        else:
            groups, cond = parties[:-1], labels[-1:]
            f = lambda s: _qcmi_chain(_EntropyTable(s), groups, cond)
            lower, upper = -h2, (len(groups) - 1) * h2
        defect = f(mixed) - p * f(rho) - (1 - p) * f(sigma)
        meta = {"p": p}
        return [("lower", lower, defect, meta), ("upper", defect, upper, meta)]
    state = _random_state(layout, rng)
    h = _EntropyTable(state)
    if name == "cmi_ub":
        a, b, c = parties[0], parties[1], labels[2:]
        value = h.cmi(a, b, c)
        return [("upper", value, 2 * min(h(a), h(b), h(a, c), h(b, c)), {})]
    if name == "mi_ub":
        value = sum(h(g) for g in parties) - h(*parties)
        return [("upper", value, sum(h(g) for g in parties), {})]
    if name in ("qcmi_ub_1", "qcmi_ub_2"):
        groups, cond = parties[:-1], labels[-1:]
        value = _qcmi_chain(h, groups, cond)
        n = len(groups)
        if name == "qcmi_ub_1":
            rhs = 2 * sum(h(g) for g in groups[:-1])
        else:
            rhs = 2 * (n - 1) / n * sum(h(g) for g in groups)
        return [("upper", value, rhs, {})]
    if name == "delta_ub":
        n = len(labels) // 2
        pairs = list(zip(labels[:n], labels[n:]))
        value = delta_ei(state, pairs)
        return [("upper", value, 2 * sum(h((lab,)) for lab in labels[:n]), {}),
                ("lower", 0.0, value, {})]
    if name == "chain_direct":
        groups, cond = parties[:-1], labels[-1:]
        gap = abs(_qcmi_chain(h, groups, cond) - _qcmi_direct(_EntropyTable(state), groups, cond))
        return [("equality", gap, CHAIN_TOL, {})]
    raise ValueError(f"unknown inequality {name!r}; expected one of {INEQUALITIES}")


def inequality_suite(name: str, cfg: SampleConfig, threads: int = 1) -> list[VerifyRecord]:
    """Check an entropy inequality on ``cfg.count`` random states (random ranks).

    Layout conventions: the last factor is the conditioning system for the
    QCMI inequalities; ``cmi_ub`` reads the factors as ``A, B, C...``;
    ``delta_ub`` reads ``2n`` factors as ``A_1..A_n, A'_1..A'_n``.
    """
    layout = cfg.layout

    def one(i: int):
        seed = sample_seed(cfg.seed, i)
        rng = np.random.default_rng(seed)
        out = []
        for variant, lhs, rhs, meta in _inequality_records(name, layout, rng, seed):
            out.append(VerifyRecord(name, variant, len(layout), None, layout.dims, None, None, None,
                                    None, float(lhs), float(rhs), seed, dict(meta, index=i)))
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(cfg.count)))
    else:
        results = [one(i) for i in range(cfg.count)]
    return [r for recs in results for r in recs]


# --------------------------------------------------------------------------
# tightness sweeps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TightnessRow:
    axis: str
    value: float
    eps: float
    lhs: float
    rhs: float
    t: float | None = None

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else float("nan")


def _product_partner(n: int, d: int) -> QuantumState:
    """Product basis state ``|0,1,0,1,...>``, orthogonal to the GHZ witness."""
    layout = SystemLayout.from_dims([d] * n)
    vec = np.zeros(d**n, dtype=complex)
    vec[int(np.ravel_multi_index(tuple(k % 2 for k in range(n)), [d] * n))] = 1.0
    return QuantumState.from_vector(layout, vec)


def tightness_sweep(characteristic: str, axis: str, grid: Sequence[float], eps: float, *,
                    n: int = 2, spectrum: SpectrumModel | OscillatorModel | None = None,
                    levels: int = 256, t: float | str = "optimize",
                    audit: list | None = None, cutoffs: Sequence[int] = (4, 8, 16, 32, 64, 128)
                    ) -> list[TightnessRow]:
    """Ratios ``LHS/RHS`` of the MI bound along a dimension or energy grid.

    Dimension axis: GHZ witness mixed towards an orthogonal product state so the
    pair sits at trace distance ``eps``; RHS is the finite-dimensional bound.
    Energy axis: the pure Gibbs-marginal witness mixed towards the product Gibbs
    state at distance ``eps``; RHS is the oscillator two-step bound at ``t``.
    """
    if characteristic.lower() != "mi":
        raise ValueError("tightness sweeps are defined for mutual information")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    rows = []
    part = lambda s: PartitionSpec.parties(s)
    if axis == "dimension":
        for d in grid:
            d = int(d)
            ghz, prod = ghz_witness(n, d), _product_partner(n, d)
            rho, measured = segment_point(ghz, prod, eps, 1.0)
            lhs = multipartite_mi(rho, part(rho)) - multipartite_mi(prod, part(prod))
            rhs = B.bound_for("mi", "finite", n=n, dims=[d] * n, eps=eps)
            rows.append(TightnessRow("dimension", float(d), eps, lhs, rhs.total))
        return rows
    if axis != "energy":
        raise ValueError("axis must be 'dimension' or 'energy'")
    model = spectrum or OscillatorModel((1.0,))
    if not isinstance(model, OscillatorModel):
        raise ValueError("energy sweeps use the oscillator envelope; pass an OscillatorModel")
    spec = model.spectrum(levels)
    desc = B.lookup("mi", n, n)
    for energy in grid:
        rho1, rho2 = gibbs_witnesses(n, spec, energy)
        rho, measured = segment_point(rho2, rho1, eps)
        lhs = multipartite_mi(rho, part(rho)) - multipartite_mi(rho1, part(rho1))
        rhs = B.cb_oscillator(B.BoundSpec(desc, eps, float(energy), t, model))
        rows.append(TightnessRow("energy", float(energy), eps, lhs, rhs.total, rhs.t))
        if audit is not None:
            parts = [SpectrumModel(spec.eigenvalues)] * n
            for tag, s in (("rho", rho), ("rho1", rho1), ("rho2", rho2)):
                audit.extend(truncation_audit(s, parts, float(energy), cutoffs, label=f"E={energy}:{tag}"))
            audit.extend(cutoff_events(parts[0], n, float(energy), rhs.eps_used, rhs.t))
    return rows
