"""Continuity-bound right-hand sides and the characteristic/class catalogue.

A characteristic is described by a :class:`ClassDescriptor`: a class tag
(``"L"`` for the mixing-defect classes, ``"N1"``/``"N2"``/``"N3"`` for the
extension-infimum classes), the constants ``C`` (marginal-entropy growth) and
``D`` (mixing defect), and the counts ``m`` (constrained parties) and ``n``
(all parties).  ``N`` classes evaluate every bound at
``delta = sqrt(eps (2 - eps))`` instead of ``eps``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .entropic import g_func
from .errors import DimensionError, TruncationError
from .spectra import (
    OscillatorModel,
    SpectrumModel,
    composite_spectrum,
    f_bar,
    f_hat_star,
    oscillator_f,
)

CLASS_TAGS = ("L", "N1", "N2", "N3")
T_GRID_POINTS = 256
T_MIN = 1e-4
COMPOSITE_LEVELS = 4096


@dataclass(frozen=True)
class ClassDescriptor:
    tag: str
    C: float
    D: float
    m: int
    n: int
    split: tuple[float, float, float, float] | None = None  # (c_minus, c_plus, a, b)

    def __post_init__(self):
        if self.tag not in CLASS_TAGS:
            raise ValueError(f"class tag must be one of {CLASS_TAGS}, got {self.tag!r}")
        if self.C < 0 or self.D < 0:
            raise ValueError("class constants must be nonnegative")
        if not 1 <= self.m <= self.n:
            raise ValueError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if self.split is not None:
            cm, cp, a, b = self.split
            if abs(cm + cp - self.C) > 1e-12 or abs(a + b - self.D) > 1e-12:
                raise ValueError("split constants must add up to C and D")

    @property
    def is_n_class(self) -> bool:
        return self.tag != "L"

    def distance(self, eps: float) -> float:
        """Effective distance: ``eps`` or ``sqrt(eps (2 - eps))``."""
        return float(np.sqrt(eps * (2 - eps))) if self.is_n_class else float(eps)


def catalog(n: int = 2) -> list[tuple[str, ClassDescriptor]]:
    """Class memberships of the supported characteristics for ``n`` parties."""
    if n < 2:
        raise ValueError("catalogue needs n >= 2")
    L, N1, N2, N3 = CLASS_TAGS
    return [
        ("entropy", ClassDescriptor(L, 1, 1, 1, 1, (0, 1, 0, 1))),
        ("conditional_entropy", ClassDescriptor(L, 2, 1, 1, 2, (1, 1, 0, 1))),
        ("discord_a1_given_a2", ClassDescriptor(L, 2, 2, 1, 2)),
        ("discord_a2_given_a1", ClassDescriptor(L, 1, 2, 1, 2)),
        ("mi", ClassDescriptor(L, 1, n, n, n, (0, 1, 1, n - 1))),
        ("mi", ClassDescriptor(L, 2, n, n - 1, n, (0, 2, 1, n - 1))),
        ("qcmi", ClassDescriptor(L, 2, n, n - 1, n, (0, 2, 1, n - 1))),
        ("qcmi", ClassDescriptor(L, 2 - 2 / n, n, n, n, (0, 2 - 2 / n, 1, n - 1))),
        ("sq", ClassDescriptor(N1, 2, n, n - 1, n)),
        ("sq", ClassDescriptor(N1, 2 - 2 / n, n, n, n)),
        ("csq", ClassDescriptor(N2, 2, n, n - 1, n)),
        ("csq", ClassDescriptor(N2, 2 - 2 / n, n, n, n)),
        ("sq_bipartite", ClassDescriptor(N1, 1, 1, 1, 2)),
        ("csq_bipartite", ClassDescriptor(N2, 1, 1, 1, 2)),
        ("eof", ClassDescriptor(N3, 1, 1, 1, 2)),
        ("delta", ClassDescriptor(L, 2, n + 1, n, 2 * n, (0, 2, 1, n))),
        ("ei", ClassDescriptor(N1, 2, n + 1, n, n)),
    ]


def lookup(characteristic: str, n: int, m: int | None = None) -> ClassDescriptor:
    """Descriptor for ``characteristic`` with ``m`` constrained parties (default: largest available)."""
    found = [d for name, d in catalog(n) if name == characteristic]
    if not found:
        names = sorted({name for name, _ in catalog(n)})
        raise ValueError(f"unknown characteristic {characteristic!r}; known: {names}")
    if m is None:
        return max(found, key=lambda d: d.m)
    for d in found:
        if d.m == m:
            return d
    raise ValueError(f"{characteristic} has no bound with m={m} for n={n} "
                     f"(available m: {sorted(d.m for d in found)})")


@dataclass(frozen=True, eq=False)
class BoundSpec:
    """Parameters of an energy-constrained bound.

    ``energy`` is the per-party budget ``E`` in the spectrum's units (absolute,
    not shifted).  ``model`` is a single Hamiltonian shared by the constrained
    parties, or a list of per-party spectra (then the composite form is used).
    ``t`` is a number in ``(0, 1/x)`` or ``"optimize"``.  ``fhat`` optionally
    overrides the entropy envelope; it is called with shifted energies.
    """

    descriptor: ClassDescriptor
    eps: float
    energy: float | None = None
    t: float | str | None = None
    model: SpectrumModel | OscillatorModel | Sequence[SpectrumModel] | None = None
    fhat: Callable | None = None
    composite: bool = False

    def __post_init__(self):
        if not np.isfinite(self.eps) or self.eps < 0:
            raise ValueError(f"eps must be a finite nonnegative number, got {self.eps}")

    @property
    def parts(self) -> list[SpectrumModel] | None:
        if isinstance(self.model, (list, tuple)):
            return list(self.model)
        return None

    @property
    def ground_energy(self) -> float:
        if self.parts is not None:
            return sum(p.ground_energy for p in self.parts) / len(self.parts)
        return self.model.ground_energy

    @property
    def energy_bar(self) -> float:
        """``E - E_0`` (per party; composite: ``E - E_0^{A^m}/m``)."""
        if self.energy is None or self.model is None:
            raise ValueError("energy-constrained bounds need both an energy budget and a model")
        e_bar = self.energy - self.ground_energy
        if e_bar < 0:
            raise ValueError(f"energy {self.energy} below the ground energy {self.ground_energy}")
        return float(e_bar)


@dataclass(frozen=True)
class BoundValue:
    total: float
    terms: dict = field(default_factory=dict)
    eps_used: float = 0.0
    t: float | None = None


def _zero(x: float, t=None) -> BoundValue:
    return BoundValue(0.0, {}, x, t)


def _value(terms: dict, x: float, t=None) -> BoundValue:
    terms = {k: float(v) for k, v in terms.items()}
    return BoundValue(float(sum(terms.values())), terms, x, t)


# --------------------------------------------------------------------------
# finite-dimensional bound
# --------------------------------------------------------------------------


def cb_finite(desc: ClassDescriptor, eps: float, dim_constrained: int) -> BoundValue:
    """``C x ln(dim) + D g(x)`` with ``x = eps`` or ``delta``."""
    if not 0 <= eps <= 1:
        raise ValueError(f"finite-dimensional bound needs eps in [0, 1], got {eps}")
    if dim_constrained < 1:
        raise DimensionError("dimension must be >= 1")
    x = desc.distance(eps)
    if eps == 0:
        return _zero(x)
    return _value({"dim": desc.C * x * np.log(dim_constrained), "g": desc.D * g_func(x)}, x)


# --------------------------------------------------------------------------
# energy-constrained bounds
# --------------------------------------------------------------------------


def _oscillator_fbar(model: OscillatorModel):
    return lambda e: oscillator_f(model, e, barred=True)


def _sqrt_function(spec: BoundSpec, x: float):
    """Envelope used by the sqrt bound and whether it allows ``x > 1``."""
    if spec.fhat is not None:
        return spec.fhat, True
    model = spec.model
    if isinstance(model, OscillatorModel):
        return _oscillator_fbar(model), True
    if x > 1:
        return (lambda e: f_hat_star(model, e)), True
    return (lambda e: f_bar(model, e)), False


def cb_energy_sqrt(spec: BoundSpec) -> BoundValue:
    """``C sqrt(2x) F(m E_bar / x) + D g(sqrt(2x))``.

    ``F`` is the entropy function of the joint constrained system; with a single
    shared Hamiltonian it is replaced by ``m F_A(E_bar / x)`` unless
    ``spec.composite`` asks for the explicit composite spectrum.  By default the
    numeric ``F-bar`` is used for spectra and the closed form for oscillators.
    """
    desc = spec.descriptor
    if spec.model is None or spec.energy is None:
        raise ValueError("sqrt bound needs an energy model and budget")
    eps = spec.eps
    if desc.is_n_class and eps > 1:
        raise ValueError("N-class bounds need eps <= 1")
    x = desc.distance(eps)
    if eps == 0:
        return _zero(x)
    m, e_bar = desc.m, spec.energy_bar
    parts = spec.parts
    if parts is not None or spec.composite:
        if isinstance(spec.model, OscillatorModel):
            raise ValueError("composite form needs explicit spectra")
        parts = parts or [spec.model] * m
        if len(parts) != m:
            raise DimensionError(f"need {m} spectra for the constrained parties, got {len(parts)}")
        # keep the whole product spectrum when it is small
        full = int(np.prod([len(p) for p in parts], dtype=float))
        joint = composite_spectrum(parts, min(full, max(COMPOSITE_LEVELS, *(len(p) for p in parts))))
        if x > 1 and spec.fhat is None:
            fn = lambda e: f_hat_star(joint, e)
        else:
            fn = spec.fhat or (lambda e: f_bar(joint, e))
        energy_term = desc.C * np.sqrt(2 * x) * fn(m * e_bar / x)
    else:
        fn, allows_large = _sqrt_function(spec, x)
        if x > 1 and not allows_large:
            raise ValueError("eps > 1 needs an envelope F with F(E)/sqrt(E) nonincreasing")
        energy_term = desc.C * m * np.sqrt(2 * x) * fn(e_bar / x)
    return _value({"energy": energy_term, "g": desc.D * g_func(np.sqrt(2 * x))}, x)


def _two_step_fhat(spec: BoundSpec):
    if spec.fhat is not None:
        return spec.fhat
    model = spec.model
    if isinstance(model, OscillatorModel):
        return _oscillator_fbar(model)
    if isinstance(model, SpectrumModel):
        return lambda e: f_hat_star(model, e)
    raise ValueError("two-step bound needs a single shared Hamiltonian")


def _check_two_step(spec: BoundSpec) -> float:
    desc = spec.descriptor
    if spec.model is None or spec.energy is None:
        raise ValueError("two-step bound needs an energy model and budget")
    if spec.eps > 1:
        raise ValueError(f"two-step bound needs eps <= 1, got {spec.eps}")
    return desc.distance(spec.eps)


def _two_step_terms(desc, x, t, e_bar, fhat):
    """Term arrays of the two-step bound for an array of ``t``."""
    t = np.asarray(t, dtype=float)
    m, C, D = desc.m, desc.C, desc.D
    a = x + x**2 * t**2
    b = np.sqrt(2 * x * t)
    return {
        "energy_1": C * m * a * fhat(m * e_bar / (x**2 * t**2)),
        "energy_2": C * m * 2 * b * fhat(e_bar / (x * t)),
        "g_1": D * g_func(a),
        "g_2": D * 2 * g_func(b),
    }


def _check_t(t, x):
    if t is None or isinstance(t, str):
        raise ValueError("a numeric t is required (use optimize_t to optimise)")
    if not 0 < t < 1 / x:
        raise ValueError(f"t must lie in (0, {1 / x:.6g}), got {t}")


def vb_two_step(spec: BoundSpec) -> BoundValue:
    """Two-step bound ``Cm[(x + x^2 t^2) F(mE/(x t)^2) + 2 sqrt(2xt) F(E/(xt))] + D[...]``."""
    x = _check_two_step(spec)
    if spec.eps == 0:
        return _zero(x, spec.t if not isinstance(spec.t, str) else None)
    if spec.t == "optimize":
        return optimize_t(spec)[1]
    _check_t(spec.t, x)
    terms = _two_step_terms(spec.descriptor, x, spec.t, spec.energy_bar, _two_step_fhat(spec))
    return _value(terms, x, float(spec.t))


def cb_oscillator(spec: BoundSpec) -> BoundValue:
    """Two-step bound written out for the ``l``-mode oscillator envelope."""
    model = spec.model
    if not isinstance(model, OscillatorModel):
        raise ValueError("oscillator bound needs an OscillatorModel")
    x = _check_two_step(spec)
    if spec.eps == 0:
        return _zero(x, spec.t if not isinstance(spec.t, str) else None)
    if spec.t == "optimize":
        return optimize_t(spec, oscillator=True)[1]
    _check_t(spec.t, x)
    return _value(_oscillator_terms(spec, x, spec.t), x, float(spec.t))


def _oscillator_terms(spec, x, t):
    desc, model = spec.descriptor, spec.model
    m, C, D = desc.m, desc.C, desc.D
    ell, e0, e_star = model.modes, model.ground_energy, model.e_star
    e_bar = spec.energy_bar
    t = np.asarray(t, dtype=float)
    scale = np.exp(-1.0) * ell * e_star
    a = x + x**2 * t**2
    b = np.sqrt(2 * x * t)
    return {
        "energy_1": C * m * a * ell * np.log((m * e_bar / (x * t) ** 2 + 2 * e0) / scale),
        "energy_2": 2 * C * m * b * ell * np.log((e_bar / (x * t) + 2 * e0) / scale),
        "g_1": D * g_func(a),
        "g_2": D * 2 * g_func(b),
    }


def _total(terms) -> np.ndarray:
    return sum(np.asarray(v, dtype=float) for v in terms.values())


def optimize_t(spec: BoundSpec, oscillator: bool = False,
               points: int = T_GRID_POINTS) -> tuple[float, BoundValue]:
    """Minimise the two-step bound over ``t``.

    A log grid of ``points`` nodes on ``[1e-4, (1 - 1e-6)/x]`` (plus ``t = x`` and
    ``t = x^2``) is scanned; the best node's bracket is refined by golden section.
    The bound is not assumed unimodal, so the refinement only ever improves on
    the grid minimum.
    """
    x = _check_two_step(spec)
    if spec.eps == 0:
        return 1.0, _zero(x, 1.0)
    e_bar = spec.energy_bar
    if oscillator:
        terms_at = lambda t: _oscillator_terms(spec, x, t)
    else:
        fhat = _two_step_fhat(spec)
        terms_at = lambda t: _two_step_terms(spec.descriptor, x, t, e_bar, fhat)
    upper = (1 - 1e-6) / x
    lower = min(T_MIN, upper / 10)
    model = spec.model
    if spec.fhat is None and isinstance(model, SpectrumModel) and model.truncated:
        # keep both envelope arguments inside the range the truncation represents
        limit = model.tail_energy_limit - model.ground_energy
        m = spec.descriptor.m
        t_min = max(np.sqrt(m * e_bar / limit) / x, e_bar / (x * limit)) * (1 + 1e-6)
        if t_min >= upper:
            raise TruncationError(f"spectrum of {len(model)} levels too short for eps={spec.eps}")
        lower = max(lower, t_min)
    grid = np.geomspace(lower, upper, points)
    extra = [v for v in (x, x**2) if lower < v < upper]
    grid = np.unique(np.concatenate([grid, extra]))
    values = _total(terms_at(grid))
    k = int(np.argmin(values))
    best_t, best_v = float(grid[k]), float(values[k])
    a = np.log(grid[max(k - 1, 0)])
    b = np.log(grid[min(k + 1, len(grid) - 1)])
    r = (np.sqrt(5) - 1) / 2
    f = lambda s: float(_total(terms_at(np.exp(s))))
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(80):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = f(d)
        if b - a < 1e-10:
            break
    for s, v in ((c, fc), (d, fd)):
        if v < best_v:
            best_t, best_v = float(np.exp(s)), v
    terms = terms_at(best_t)
    return best_t, _value(terms, x, best_t)


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

CHARACTERISTICS = ("mi", "qcmi", "sq", "csq", "ei", "delta")
VARIANTS = ("finite", "sqrt", "two-step", "oscillator")


def bound_for(characteristic: str, variant: str, *, n: int, eps: float, m: int | None = None,
              dims: Sequence[int] | None = None, energy: float | None = None,
              model=None, t: float | str | None = None, fhat: Callable | None = None) -> BoundValue:
    """RHS of the continuity bound for one characteristic.

    ``dims`` lists the dimensions of the constrained parties ``A_1..A_m`` (extra
    entries are ignored).  For ``sq``/``csq``/``ei`` the value bounds twice the
    difference of the entanglement measure.  ``t="optimize"`` minimises over t.
    """
    characteristic = characteristic.lower()
    if characteristic not in CHARACTERISTICS:
        raise ValueError(f"characteristic must be one of {CHARACTERISTICS}")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if characteristic == "ei" and m is not None and m != n:
        raise ValueError("the E_I bound is only defined with m = n")
    desc = lookup(characteristic, n, m)
    if variant == "finite":
        if dims is None or len(dims) < desc.m:
            raise DimensionError(f"finite bound needs the dimensions of the {desc.m} constrained parties")
        return cb_finite(desc, eps, int(np.prod(list(dims)[: desc.m], dtype=object)))
    spec = BoundSpec(desc, eps, energy, t, model, fhat)
    if variant == "sqrt":
        return cb_energy_sqrt(spec)
    if t is None:
        raise ValueError(f"{variant} bound needs t (a number or 'optimize')")
    if variant == "two-step":
        return vb_two_step(spec)
    return cb_oscillator(spec)


def with_eps(spec: BoundSpec, eps: float) -> BoundSpec:
    return replace(spec, eps=eps)
