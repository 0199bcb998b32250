"""Hamiltonian spectra, Gibbs states and the energy-entropy functions.

A Hamiltonian is represented by its sorted eigenvalues.  ``truncated=True``
marks the list as the low end of an infinite spectrum: every Gibbs evaluation
then checks that the top retained level carries negligible weight.  With
``truncated=False`` the list is the whole (finite) Hamiltonian.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, TruncationError

DEFAULT_LEVELS = 512
TAIL_TOL = 1e-10
ENERGY_TOL = 1e-12
GROUND_TOL = 1e-12
FHAT_POINTS = 2048
FHAT_SPAN = 1e6


@dataclass(frozen=True, eq=False)
class SpectrumModel:
    eigenvalues: np.ndarray
    truncated: bool = False

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float).ravel()
        if ev.size < 2:
            raise ValueError("a spectrum needs at least two levels")
        if np.any(np.diff(ev) < 0):
            raise ValueError("eigenvalues must be sorted nondecreasing")
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_multiplicity(self) -> int:
        return int(np.sum(self.eigenvalues - self.eigenvalues[0] <= GROUND_TOL))

    @property
    def ceiling(self) -> float:
        """Mean energy of the uniform (infinite-temperature) state."""
        return float(self.eigenvalues.mean())

    def __len__(self):
        return self.eigenvalues.size

    def shifted(self) -> np.ndarray:
        return self.eigenvalues - self.eigenvalues[0]

    @property
    def tail_energy_limit(self) -> float:
        """Largest mean energy whose Gibbs state keeps the top level below the tail tolerance."""
        if not self.truncated:
            return self.ceiling
        return _tail_limit(self.shifted()) + self.ground_energy


@dataclass(frozen=True)
class OscillatorModel:
    """``l`` independent harmonic modes with frequencies ``omega_i`` (hbar = 1)."""

    frequencies: tuple[float, ...]

    def __post_init__(self):
        freqs = tuple(float(w) for w in np.atleast_1d(self.frequencies))
        if not freqs or any(w <= 0 for w in freqs):
            raise ValueError("oscillator needs at least one positive frequency")
        object.__setattr__(self, "frequencies", freqs)

    @property
    def modes(self) -> int:
        return len(self.frequencies)

    @property
    def ground_energy(self) -> float:
        return 0.5 * sum(self.frequencies)

    @property
    def e_star(self) -> float:
        return float(np.exp(np.mean(np.log(self.frequencies))))

    def spectrum(self, levels: int = DEFAULT_LEVELS) -> SpectrumModel:
        parts = [SpectrumModel(w * (np.arange(levels) + 0.5), truncated=True) for w in self.frequencies]
        if len(parts) == 1:
            return parts[0]
        return composite_spectrum(parts, levels)


@dataclass(frozen=True, eq=False)
class GibbsPoint:
    energy: float
    lam: float
    entropy: float
    probabilities: np.ndarray = field(repr=False)


# --------------------------------------------------------------------------
# Gibbs solving
# --------------------------------------------------------------------------


def _moments(e: np.ndarray, lam: np.ndarray):
    """Mean shifted energy, log partition function and top-level weight."""
    w = np.exp(-np.outer(lam, e))
    z = w.sum(axis=1)
    mean = (w @ e) / z
    return mean, np.log(z), w[:, -1] / z


def _solve_lambda(e: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``lam >= 0`` with Gibbs mean shifted energy ``x`` (vectorised).

    The mean energy is decreasing in ``lam``; the bracket ``[0, hi]`` is found by
    doubling and then shrunk with Newton steps, falling back to bisection
    whenever a step leaves the bracket.
    """
    lo = np.zeros_like(x)
    hi = np.ones_like(x)
    for _ in range(2000):
        mean, _, _ = _moments(e, hi)
        grow = mean > x
        if not grow.any():
            break
        hi = np.where(grow, 2 * hi, hi)
        lo = np.where(grow, hi / 2, lo)
    else:
        raise ConvergenceError("could not bracket the Gibbs parameter")
    lam = 0.5 * (lo + hi)
    tol = np.maximum(ENERGY_TOL, 1e-15 * x)
    for _ in range(200):
        w = np.exp(-np.outer(lam, e))
        z = w.sum(axis=1)
        mean = (w @ e) / z
        var = np.maximum((w @ e**2) / z - mean**2, 1e-300)
        gap = mean - x
        done = (np.abs(gap) <= tol) | (hi - lo <= 4e-16 * hi)
        if done.all():
            break
        lo = np.where(gap > 0, lam, lo)
        hi = np.where(gap > 0, hi, lam)
        step = lam + gap / var
        inside = (step > lo) & (step < hi)
        lam = np.where(done, lam, np.where(inside, step, 0.5 * (lo + hi)))
    else:
        raise ConvergenceError("Gibbs parameter search did not converge")
    return lam


def _tail_limit(e: np.ndarray) -> float:
    """Shifted mean energy at which the top level weight equals ``TAIL_TOL``."""
    lo, hi = 0.0, 1.0
    if 1.0 / e.size <= TAIL_TOL:
        return float(e.mean())
    while _moments(e, np.array([hi]))[2][0] > TAIL_TOL:
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _moments(e, np.array([mid]))[2][0] > TAIL_TOL:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return float(_moments(e, np.array([hi]))[0][0])


def _gibbs_arrays(spec: SpectrumModel, energies: np.ndarray):
    """``(lam, entropy)`` arrays for absolute energies strictly inside the solvable range."""
    e = spec.shifted()
    x = energies - spec.ground_energy
    lam = _solve_lambda(e, x)
    mean, log_z, top = _moments(e, lam)
    if spec.truncated and np.any(top > TAIL_TOL):
        bad = energies[np.argmax(top)]
        raise TruncationError(
            f"Gibbs tail weight {top.max():.2e} exceeds {TAIL_TOL:.0e} at E={bad:g}; "
            f"use more than {len(spec)} levels")
    return lam, lam * mean + log_z


def solve_gibbs(spec: SpectrumModel, energy: float) -> GibbsPoint:
    """Gibbs state of mean energy ``energy``: parameter ``lam``, entropy ``F_H(E)``, populations."""
    energy = float(energy)
    e0 = spec.ground_energy
    mult = spec.ground_multiplicity
    if energy < e0 - ENERGY_TOL:
        raise ValueError(f"energy {energy} below the ground energy {e0}")
    if energy <= e0 + ENERGY_TOL:
        probs = np.where(spec.shifted() <= GROUND_TOL, 1.0 / mult, 0.0)
        return GibbsPoint(energy, float("inf"), float(np.log(mult)), probs)
    ceiling = spec.ceiling
    if spec.truncated and energy > spec.tail_energy_limit:
        raise TruncationError(
            f"energy {energy} needs more than {len(spec)} levels (limit {spec.tail_energy_limit:.6g})")
    if energy >= ceiling:
        if energy - ceiling > ENERGY_TOL * max(1.0, abs(ceiling)):
            raise ValueError(f"energy {energy} above the spectrum's maximal mean energy {ceiling}")
        n = len(spec)
        return GibbsPoint(energy, 0.0, float(np.log(n)), np.full(n, 1.0 / n))
    lam, ent = _gibbs_arrays(spec, np.array([energy]))
    w = np.exp(-lam[0] * spec.shifted())
    return GibbsPoint(energy, float(lam[0]), float(ent[0]), w / w.sum())


def max_entropy(spec: SpectrumModel, energy) -> np.ndarray | float:
    """``F_H(E)``: the largest entropy among states with mean energy at most ``E`` (vectorised)."""
    arr = np.atleast_1d(np.asarray(energy, dtype=float))
    e0 = spec.ground_energy
    if np.any(arr < e0 - ENERGY_TOL):
        raise ValueError(f"energy below the ground energy {e0}")
    out = np.full(arr.shape, np.log(spec.ground_multiplicity))
    ceiling = spec.ceiling
    if spec.truncated:
        limit = spec.tail_energy_limit
        if np.any(arr > limit):
            raise TruncationError(
                f"energy {arr.max():g} needs more than {len(spec)} levels (limit {limit:.6g})")
    top = arr >= ceiling
    out[top] = np.log(len(spec))
    inner = (arr > e0 + ENERGY_TOL) & ~top
    if inner.any():
        out[inner] = _gibbs_arrays(spec, arr[inner])[1]
    return float(out[0]) if np.ndim(energy) == 0 else out


def f_bar(spec: SpectrumModel, energy):
    """``F_H(E + E_0)`` for ``E >= 0``."""
    arr = np.asarray(energy, dtype=float)
    if np.any(arr < 0):
        raise ValueError("F-bar is defined for E >= 0")
    return max_entropy(spec, arr + spec.ground_energy)


def oscillator_f(model: OscillatorModel, energy, barred: bool = True):
    """Closed-form upper bound ``l ln((E + c)/(l E_*)) + l`` for the oscillator entropy.

    ``c = 2 E_0`` for the shifted (barred) function, ``c = E_0`` otherwise.
    """
    arr = np.asarray(energy, dtype=float)
    shift = 2 * model.ground_energy if barred else model.ground_energy
    if barred and np.any(arr < 0):
        raise ValueError("barred oscillator function is defined for E >= 0")
    if np.any(arr + shift <= 0):
        raise ValueError("oscillator function needs E + E_0 > 0")
    ell = model.modes
    return ell * np.log((arr + shift) / (ell * model.e_star)) + ell


def _golden_max(fun, a: float, b: float, iters: int = 60) -> float:
    r = (np.sqrt(5) - 1) / 2
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = fun(d)
        if b - a <= 1e-12 * b:
            break
    return max(fc, fd)


def f_hat_star(spec: SpectrumModel, energy, points: int = FHAT_POINTS, span: float = FHAT_SPAN):
    """Minimal concave-type envelope ``sqrt(E) * sup_{E' >= E} F-bar(E')/sqrt(E')``.

    The supremum is taken on a log grid of ``points`` nodes per ``span`` (shared by
    all requested energies) with golden-section refinement near the grid maximiser.
    For truncated spectra the horizon stops at the last energy the truncation can
    represent; a maximiser pinned at that horizon raises :class:`ConvergenceError`.
    """
    arr = np.atleast_1d(np.asarray(energy, dtype=float))
    if np.any(arr <= 0):
        raise ValueError("F-hat* needs E > 0")
    horizon = span * arr.max()
    capped = False
    if spec.truncated:
        limit = spec.tail_energy_limit - spec.ground_energy
        if limit < horizon:
            horizon, capped = limit * (1 - 1e-9), True
        if arr.max() > horizon:
            raise TruncationError(f"energy {arr.max():g} beyond the truncation's range {horizon:.6g}")
    lo = arr.min()
    decades = max(np.log10(horizon / lo), 1e-12)
    n = max(int(np.ceil(points * decades / np.log10(span))), points)
    grid = np.unique(np.concatenate([np.geomspace(lo, horizon, n), arr]))
    ratio = f_bar(spec, grid) / np.sqrt(grid)
    suffix = np.maximum.accumulate(ratio[::-1])[::-1]
    where = np.searchsorted(grid, arr)
    out = np.empty_like(arr)
    ratio_at = lambda x: float(f_bar(spec, x)) / np.sqrt(x)
    refined: dict[int, float] = {}
    for i, (e, j) in enumerate(zip(arr, where)):
        best = suffix[j]
        k = j + int(np.argmax(ratio[j:] >= best))
        if k == len(grid) - 1 and capped and ratio[k] > ratio[j]:
            raise ConvergenceError(
                f"F-hat* supremum at E={e:g} sits on the truncation horizon; use more levels")
        if k > j:
            if k not in refined:
                right = grid[min(k + 1, len(grid) - 1)]
                refined[k] = _golden_max(ratio_at, grid[k - 1], right)
            # the bracket may reach below E, where the ratio is not part of the sup
            best = max(best, refined[k]) if grid[k - 1] >= e else best
        out[i] = np.sqrt(e) * best
    return float(out[0]) if np.ndim(energy) == 0 else out


def crossover_energy(spec: SpectrumModel, grid, rtol: float = 1e-9) -> float | None:
    """First grid energy from which ``F-bar(E)/sqrt(E)`` is nonincreasing to the end of the grid."""
    grid = np.sort(np.asarray(grid, dtype=float))
    ratio = f_bar(spec, grid) / np.sqrt(grid)
    ok = np.diff(ratio) <= rtol * np.abs(ratio[:-1])
    tail_ok = np.logical_and.accumulate(ok[::-1])[::-1]
    idx = np.flatnonzero(np.append(tail_ok, True))
    return float(grid[idx[0]]) if idx.size else None


# --------------------------------------------------------------------------
# energy functions as values
# --------------------------------------------------------------------------

TAGS = ("F", "F_bar", "F_hat_star", "F_osc", "F_bar_osc")


@dataclass(frozen=True, eq=False)
class EnergyFunction:
    """One of the energy-entropy functions, bound to its model.

    ``F``/``F_bar``/``F_hat_star`` are numeric (an oscillator model is expanded to
    ``levels`` levels); ``F_osc``/``F_bar_osc`` are the oscillator closed forms.
    """

    tag: str
    model: SpectrumModel | OscillatorModel
    levels: int = DEFAULT_LEVELS

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown energy function tag {self.tag!r}; expected one of {TAGS}")
        if self.tag in ("F_osc", "F_bar_osc") and not isinstance(self.model, OscillatorModel):
            raise TypeError("closed-form oscillator functions need an OscillatorModel")

    @property
    def spectrum(self) -> SpectrumModel:
        if isinstance(self.model, OscillatorModel):
            return self.model.spectrum(self.levels)
        return self.model

    def __call__(self, energy):
        return energy_entropy(self, energy)


def energy_entropy(fn: EnergyFunction, energy):
    if fn.tag == "F_osc":
        return oscillator_f(fn.model, energy, barred=False)
    if fn.tag == "F_bar_osc":
        return oscillator_f(fn.model, energy, barred=True)
    if np.any(np.asarray(energy) < 0):
        raise ValueError("energy must be nonnegative")
    spec = fn.spectrum
    if fn.tag == "F":
        return max_entropy(spec, energy)
    if fn.tag == "F_bar":
        return f_bar(spec, energy)
    return f_hat_star(spec, energy)


# --------------------------------------------------------------------------
# spectrum algebra
# --------------------------------------------------------------------------


def composite_spectrum(parts: Sequence[SpectrumModel], cap: int = DEFAULT_LEVELS) -> SpectrumModel:
    """Lowest ``cap`` levels of ``H_1 x I x ... + ... + I x ... x H_m``."""
    if not parts:
        raise ValueError("composite_spectrum needs at least one part")
    levels = np.asarray(parts[0].eigenvalues[:cap])
    trimmed = parts[0].truncated or len(parts[0]) > cap
    for part in parts[1:]:
        other = part.eigenvalues[:cap]
        sums = np.add.outer(levels, other).ravel()
        trimmed = trimmed or part.truncated or len(part) > cap or sums.size > cap
        levels = np.sort(sums)[:cap]
    return SpectrumModel(levels, truncated=trimmed)


def tail_fraction(spec: SpectrumModel, energy: float, cutoff: int) -> float:
    """Bound ``(E - E_0)/(E_d - E_0)`` on the weight above the ``cutoff`` lowest levels."""
    if not 1 <= cutoff < len(spec):
        raise ValueError(f"cutoff {cutoff} outside [1, {len(spec) - 1}]")
    e0 = spec.ground_energy
    e_d = spec.eigenvalues[cutoff]
    if e_d - e0 <= GROUND_TOL:
        raise ValueError("cutoff level is degenerate with the ground energy")
    return max(0.0, (energy - e0) / (e_d - e0))


def bd_ratio(spec: SpectrumModel, energy) -> np.ndarray | float:
    """``N_up(E)/N_down(E)`` with sums over level pairs ``E_k + E_j <= E``."""
    ev = spec.eigenvalues
    prefix = np.concatenate([[0.0], np.cumsum(ev)])
    arr = np.atleast_1d(np.asarray(energy, dtype=float))
    out = np.empty_like(arr)
    for i, e in enumerate(arr):
        counts = np.searchsorted(ev, e - ev, side="right")
        up = np.dot(ev**2, counts)
        down = np.dot(ev, prefix[counts])
        out[i] = up / down if down > 0 else np.nan
    return float(out[0]) if np.ndim(energy) == 0 else out


def load_spectrum(source) -> SpectrumModel | OscillatorModel:
    """Read ``{"eigenvalues": [...], "truncated": bool}`` or ``{"oscillator": {"modes", "frequencies"}}``."""
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            data = json.load(fh)
    else:
        data = source
    if not isinstance(data, dict):
        raise ValueError("spectrum file must hold a JSON object")
    if "oscillator" in data:
        osc = data["oscillator"]
        freqs = osc.get("frequencies")
        if freqs is None:
            raise ValueError("oscillator entry needs 'frequencies'")
        freqs = [float(w) for w in np.atleast_1d(freqs)]
        modes = int(osc.get("modes", len(freqs)))
        if len(freqs) == 1 and modes > 1:
            freqs = freqs * modes
        if len(freqs) != modes:
            raise ValueError(f"oscillator declares {modes} modes but lists {len(freqs)} frequencies")
        return OscillatorModel(tuple(freqs))
    if "eigenvalues" in data:
        return SpectrumModel(np.sort(np.asarray(data["eigenvalues"], dtype=float)),
                             truncated=bool(data.get("truncated", False)))
    raise ValueError("spectrum file needs an 'eigenvalues' or 'oscillator' entry")
