"""Eigen-decomposition of the anharmonic Hamiltonian
H0 = (P² + Q²)/2 + c1·Q³ + c2·Q⁴ on a truncated Fock space.

Exact (dense diagonalization of the truncation) and low-order
Rayleigh-Schrödinger energies are both provided.  The perturbative branch is
computed from Q³/Q⁴ matrix elements, never from hard-coded coefficient
tables, so closed forms can serve as independent oracles in tests.

A diagonalization keeps two cutoffs: ``cutoff_raw`` is the matrix dimension
actually diagonalized, ``cutoff_kept`` the block later used for gate design.
The default raw dimension is max(4·kept, 32); the anharmonic terms couple at
most ±4 Fock levels, so a 4x margin makes kept-block truncation error
negligible for the coefficient sizes this package targets.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fock import momentum_op, position_op
from .serialize import matrix_from_json, matrix_to_json


class MetastableWarning(UserWarning):
    """The requested potential is not bounded below; the truncated spectrum
    is still returned (it approximates the metastable well)."""


PERTURBATIVE_COEFF_MAX = 0.1  # validity guard for the perturbative branch


def default_raw_dim(kept: int) -> int:
    return max(4 * kept, 32)


def build_h0(c1: float, c2: float, cutoff: int) -> np.ndarray:
    """Assemble (P² + Q²)/2 + c1·Q³ + c2·Q⁴ at the given truncation."""
    if cutoff < 4:
        raise ValueError("cutoff must be >= 4 (quartic term needs reach)")
    if c2 < 0 or (c1 != 0 and c2 == 0):
        warnings.warn(
            "potential unbounded below (c2 < 0 or pure cubic tilt); "
            "treating the truncated well as metastable",
            MetastableWarning,
            stacklevel=2,
        )
    q = position_op(cutoff)
    p = momentum_op(cutoff)
    q2 = q @ q
    return 0.5 * (p @ p + q2) + c1 * (q2 @ q) + c2 * (q2 @ q2)


@dataclass(frozen=True)
class Spectrum:
    """Eigen-data of a diagonalized Hamiltonian with cutoff provenance.

    ``energies`` is the full ascending spectrum of the raw truncation;
    ``modes`` holds the eigenvectors as columns (Fock basis, unitary).
    ``kept_energies`` is the block used downstream for gate design.
    """

    energies: np.ndarray
    modes: np.ndarray
    cutoff_raw: int
    cutoff_kept: int
    c1: float
    c2: float

    @property
    def kept_energies(self) -> np.ndarray:
        return self.energies[: self.cutoff_kept]

    def validate(self, tol: float = 1e-10) -> None:
        if self.energies.shape != (self.cutoff_raw,):
            raise ValueError("energies length != cutoff_raw")
        if self.modes.shape != (self.cutoff_raw, self.cutoff_raw):
            raise ValueError("modes must be square of size cutoff_raw")
        if not (1 <= self.cutoff_kept <= self.cutoff_raw):
            raise ValueError("cutoff_kept must lie in [1, cutoff_raw]")
        if np.any(np.diff(self.energies) < -tol):
            raise ValueError("energies not ascending")
        gram = self.modes.conj().T @ self.modes
        if np.max(np.abs(gram - np.eye(self.cutoff_raw))) > tol:
            raise ValueError("modes not unitary within tolerance")

    def to_json(self) -> dict:
        return {
            "energies": [float(e) for e in self.energies],
            "modes": matrix_to_json(self.modes),
            "cutoff_raw": self.cutoff_raw,
            "cutoff_kept": self.cutoff_kept,
            "c1": self.c1,
            "c2": self.c2,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Spectrum":
        spec = cls(
            energies=np.asarray(obj["energies"], dtype=float),
            modes=matrix_from_json(obj["modes"]),
            cutoff_raw=int(obj["cutoff_raw"]),
            cutoff_kept=int(obj["cutoff_kept"]),
            c1=float(obj["c1"]),
            c2=float(obj["c2"]),
        )
        spec.validate(tol=1e-8)
        return spec


def _fix_phases(v: np.ndarray) -> np.ndarray:
    # Make the largest-magnitude component of each column real positive so
    # eigenvectors (hence gates) are reproducible across LAPACK builds.
    idx = np.argmax(np.abs(v), axis=0)
    piv = v[idx, np.arange(v.shape[1])]
    phase = piv / np.abs(piv)
    return v * phase.conj()


def diagonalize(h: np.ndarray, kept: int, c1: float = 0.0, c2: float = 0.0) -> Spectrum:
    """Diagonalize a Hermitian matrix, keeping ``kept`` levels for design.

    Rejects non-Hermitian input; eigenvector phases follow the
    largest-component-real-positive convention.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"Hamiltonian must be square, got {h.shape}")
    m = h.shape[0]
    if not (1 <= kept <= m):
        raise ValueError(f"kept={kept} outside [1, {m}]")
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - h.conj().T)) > 1e-10 * scale:
        raise ValueError("Hamiltonian is not Hermitian within 1e-10")
    w, v = np.linalg.eigh(h)
    return Spectrum(w, _fix_phases(v), m, kept, float(c1), float(c2))


def compute_spectrum(
    c1: float,
    c2: float,
    kept: int,
    raw_dim: int | None = None,
    basis: str = "exact",
) -> Spectrum:
    """Build and decompose H0: ``basis="exact"`` diagonalizes the truncation,
    ``basis="pt"`` uses perturbative energies with zeroth-order modes."""
    raw = default_raw_dim(kept) if raw_dim is None else int(raw_dim)
    if raw < kept:
        raise ValueError("raw_dim must be >= kept")
    if basis == "exact":
        return diagonalize(build_h0(c1, c2, raw), kept, c1, c2)
    if basis == "pt":
        energies = perturbative_energies(c1, c2, raw - 1)
        if np.any(np.diff(energies) <= 0):
            raise ValueError(
                "perturbative energies not ascending at this raw_dim; "
                "reduce raw_dim or the coefficients"
            )
        return Spectrum(energies, np.eye(raw, dtype=complex), raw, kept, c1, c2)
    raise ValueError(f"unknown basis {basis!r} (expected 'exact' or 'pt')")


def perturbative_energies(
    c1: float, c2: float, n_max: int, cutoff: int | None = None
) -> np.ndarray:
    """Rayleigh-Schrödinger energies E_n for n = 0..n_max.

    First order in c2 plus second order in c1:

        E_n = (n + 1/2) + c2·<n|Q⁴|n> + c1²·sum_{m≠n} |<m|Q³|n>|²/(n−m)

    Mixed c1·c2 and all higher orders are excluded.  Both corrections are
    evaluated from truncated operator matrices; the cutoff only needs to
    clear the ±3/±4 level reach of the matrix elements.
    """
    if abs(c1) > PERTURBATIVE_COEFF_MAX or abs(c2) > PERTURBATIVE_COEFF_MAX:
        raise ValueError(
            f"|c1|, |c2| must be <= {PERTURBATIVE_COEFF_MAX} for the "
            "perturbative branch"
        )
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    m = max(n_max + 8, 12) if cutoff is None else int(cutoff)
    if m < n_max + 5:
        raise ValueError("cutoff too small for the requested levels")
    q = position_op(m)
    q2 = q @ q
    q3 = q2 @ q
    q4 = q2 @ q2
    ns = np.arange(n_max + 1)
    e = ns + 0.5
    e = e + c2 * np.real(np.diagonal(q4))[: n_max + 1]
    second = np.zeros(n_max + 1)
    for n in ns:
        amps = np.abs(q3[:, n]) ** 2
        denom = n - np.arange(m, dtype=float)
        denom[n] = np.inf
        second[n] = np.sum(amps / denom)
    return e + c1**2 * second
