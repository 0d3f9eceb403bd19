"""TPCP maps from joint unitaries: partial trace, Kraus/Choi forms, and
pulse design against a target channel.

A channel here arises by evolving system ⊗ ancilla jointly and tracing out
the ancilla (the unobserved sector).  The ancilla stands in for whatever
degrees of freedom are averaged over: it carries a free diagonal
Hamiltonian diag(0, ω_a, 2ω_a, ...) and couples to the system through
g·(Q ⊗ Q_anc), with Q_anc the ancilla's position-like tridiagonal
operator; the drive b(t) acts on the system position only (Q ⊗ I).

Channel comparison uses the Frobenius distance between Choi matrices.
Because the first-order gate is affine in the drive coefficients, the Choi
matrix is quadratic in them and the distance objective quartic; the design
routine therefore uses derivative-free coordinate descent with shrinking
steps, exploiting the affine gate structure for fast candidate evaluation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import dyson
from .dyson import ControlPulse
from .fock import is_psd, is_unitary, momentum_op, position_op
from .gate_synth import design_matrix
from .serialize import matrix_from_json, matrix_to_json
from .spectrum import Spectrum, diagonalize


@dataclass(frozen=True)
class QuantumChannel:
    """Kraus form of a completely positive map."""

    kraus: tuple
    d_in: int
    d_out: int

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise ValueError("need at least one Kraus operator")
        for k in ops:
            if k.shape != (self.d_out, self.d_in):
                raise ValueError(
                    f"Kraus shape {k.shape} != ({self.d_out}, {self.d_in})"
                )
        object.__setattr__(self, "kraus", ops)

    def tp_defect(self) -> float:
        """max|sum K†K − I|; zero for a trace-preserving map."""
        s = sum(k.conj().T @ k for k in self.kraus)
        return float(np.max(np.abs(s - np.eye(self.d_in))))

    def cp_defect(self) -> float:
        """max(0, −min eigenvalue of the Choi matrix); zero for a CP map."""
        w = np.linalg.eigvalsh(choi(self))
        return float(max(0.0, -w.min()))

    def validate(self, tol: float = 1e-10) -> None:
        if self.tp_defect() > tol:
            raise ValueError(f"trace preservation violated beyond {tol:g}")
        if self.cp_defect() > tol:
            raise ValueError(f"complete positivity violated beyond {tol:g}")

    def to_json(self) -> dict:
        return {
            "d_in": self.d_in,
            "d_out": self.d_out,
            "kraus": [matrix_to_json(k) for k in self.kraus],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QuantumChannel":
        return cls(
            kraus=tuple(matrix_from_json(k) for k in obj["kraus"]),
            d_in=int(obj["d_in"]),
            d_out=int(obj["d_out"]),
        )


def partial_trace(rho: np.ndarray, dims: tuple[int, int], which: str = "anc") -> np.ndarray:
    """Trace out one tensor factor of a (d_sys·d_anc)-dimensional operator.

    ``which="anc"`` keeps the system factor, ``which="sys"`` keeps the
    ancilla.  The operation is total (any square matrix of the right size);
    a warning is emitted if the input is far from a density matrix.
    """
    d_sys, d_anc = dims
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (d_sys * d_anc, d_sys * d_anc):
        raise ValueError(f"shape {rho.shape} does not factor as {d_sys}x{d_anc}")
    _warn_if_not_state(rho)
    r4 = rho.reshape(d_sys, d_anc, d_sys, d_anc)
    if which == "anc":
        return np.einsum("iaja->ij", r4)
    if which == "sys":
        return np.einsum("iaib->ab", r4)
    raise ValueError(f"which must be 'sys' or 'anc', got {which!r}")


def _warn_if_not_state(rho, tol=1e-6):
    herm = np.max(np.abs(rho - rho.conj().T))
    tr = abs(np.trace(rho) - 1.0)
    if herm > tol or tr > tol or not is_psd(rho, tol):
        warnings.warn(
            f"input is not a normalized state (hermiticity defect {herm:.2e}, "
            f"trace defect {tr:.2e}); tracing anyway",
            stacklevel=3,
        )


def kraus_from_unitary(
    u: np.ndarray,
    anc_state: np.ndarray,
    d_anc: int | None = None,
    utol: float | None = 1e-8,
) -> QuantumChannel:
    """Channel obtained by conjugating with a joint unitary and tracing the
    ancilla prepared in ``anc_state``: K_i = (I ⊗ <i|) U (I ⊗ |anc>).

    ``utol=None`` skips the unitarity check; use it for approximately
    unitary gates, whose TP defect is then reported instead of hidden.
    """
    u = np.asarray(u, dtype=complex)
    anc_state = np.asarray(anc_state, dtype=complex).reshape(-1)
    d_anc = anc_state.size if d_anc is None else int(d_anc)
    if anc_state.size != d_anc:
        raise ValueError("ancilla state length != ancilla dimension")
    if abs(np.linalg.norm(anc_state) - 1.0) > 1e-8:
        raise ValueError("ancilla state must be normalized")
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] % d_anc:
        raise ValueError(f"operator shape {u.shape} does not factor over d_anc={d_anc}")
    if utol is not None and not is_unitary(u, tol=utol):
        raise ValueError(f"joint operator is not unitary to {utol:g}")
    d_sys = u.shape[0] // d_anc
    u4 = u.reshape(d_sys, d_anc, d_sys, d_anc)
    ops = tuple(
        np.einsum("xyb,b->xy", u4[:, i, :, :], anc_state) for i in range(d_anc)
    )
    return QuantumChannel(kraus=ops, d_in=d_sys, d_out=d_sys)


def apply_channel(ch: QuantumChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ch.d_in, ch.d_in):
        raise ValueError(f"state shape {rho.shape} != input dim {ch.d_in}")
    out = np.zeros((ch.d_out, ch.d_out), dtype=complex)
    for k in ch.kraus:
        out += k @ rho @ k.conj().T
    return out


def choi(ch: QuantumChannel) -> np.ndarray:
    """Choi matrix J = sum_ij |i><j| ⊗ Φ(|i><j|); trace d_in, PSD iff CP."""
    j = np.zeros((ch.d_in * ch.d_out, ch.d_in * ch.d_out), dtype=complex)
    for k in ch.kraus:
        v = k.T.reshape(-1)  # composite index (input i, output x), row-major
        j += np.outer(v, v.conj())
    return j


def channel_distance(ch1: QuantumChannel, ch2: QuantumChannel) -> float:
    """Frobenius distance between Choi matrices."""
    if (ch1.d_in, ch1.d_out) != (ch2.d_in, ch2.d_out):
        raise ValueError("channel dimensions differ")
    return float(np.linalg.norm(choi(ch1) - choi(ch2)))


@dataclass(frozen=True)
class JointSystem:
    """System ⊗ ancilla model used for channel design.

    The system factor is the driven anharmonic mode truncated at the gate
    dimension itself: the joint model is treated as a concrete finite
    system, not as a further truncation of something larger.
    """

    sys_dim: int
    anc_dim: int
    anc_freq: float = 1.3
    coupling: float = 0.1
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        if self.sys_dim < 2 or self.anc_dim < 1:
            raise ValueError("need sys_dim >= 2 and anc_dim >= 1")

    @property
    def dim(self) -> int:
        return self.sys_dim * self.anc_dim

    def hamiltonian(self) -> np.ndarray:
        q = position_op(self.sys_dim)
        p = momentum_op(self.sys_dim)
        q2 = q @ q
        h_sys = 0.5 * (p @ p + q2) + self.c1 * (q2 @ q) + self.c2 * (q2 @ q2)
        h_anc = np.diag(self.anc_freq * np.arange(self.anc_dim)).astype(complex)
        h = np.kron(h_sys, np.eye(self.anc_dim)) + np.kron(np.eye(self.sys_dim), h_anc)
        if self.anc_dim > 1:
            h = h + self.coupling * np.kron(q, position_op(self.anc_dim))
        return h

    def control_op(self) -> np.ndarray:
        return np.kron(position_op(self.sys_dim), np.eye(self.anc_dim))

    def spectrum(self) -> Spectrum:
        # Keep every level: the joint model is exact at its own dimension.
        return diagonalize(self.hamiltonian(), kept=self.dim, c1=self.c1, c2=self.c2)

    def ground_ancilla(self) -> np.ndarray:
        v = np.zeros(self.anc_dim, dtype=complex)
        v[0] = 1.0
        return v


def dyson_channel(
    joint: JointSystem, pulse: ControlPulse, anc_state: np.ndarray | None = None
) -> QuantumChannel:
    """Channel realized by the first-order joint gate followed by tracing
    out the ancilla.  The gate is only approximately unitary, so the
    returned channel carries a TP defect of the same order; inspect it via
    ``tp_defect`` rather than expecting exact trace preservation."""
    spec = joint.spectrum()
    anc = joint.ground_ancilla() if anc_state is None else np.asarray(anc_state, dtype=complex)
    u_eig = dyson.dyson_gate(spec, pulse, control=joint.control_op())
    u_prod = spec.modes @ u_eig @ spec.modes.conj().T
    return kraus_from_unitary(u_prod, anc, d_anc=joint.anc_dim, utol=None)


@dataclass
class ChannelSynthesisReport:
    pulse: ControlPulse
    distance: float
    tp_defect: float
    cp_defect: float
    energy: float
    multiplier: float
    converged: bool
    n_evaluations: int

    def to_json(self) -> dict:
        return {
            "pulse": self.pulse.to_json(),
            "distance": self.distance,
            "tp_defect": self.tp_defect,
            "cp_defect": self.cp_defect,
            "energy": self.energy,
            "multiplier": self.multiplier,
            "converged": self.converged,
            "n_evaluations": self.n_evaluations,
        }


def synthesize_channel(
    target_choi: np.ndarray,
    joint: JointSystem,
    anc_state: np.ndarray | None,
    horizon: float,
    n_harmonics: int,
    lam: float = 0.0,
    step0: float = 0.25,
    step_tol: float = 1e-9,
    max_sweeps: int = 2000,
) -> tuple[ControlPulse, ChannelSynthesisReport]:
    """Coordinate descent on |Choi(β) − target|_F² + λ·energy(β) from β = 0.

    Candidate gates are assembled from the precomputed affine structure
    vec U(β) = vec U0 + A β, so each evaluation costs a few small matrix
    products.  ``converged`` is False when the sweep budget ran out before
    the step size shrank below ``step_tol``.
    """
    target_choi = np.asarray(target_choi, dtype=complex)
    d = joint.sys_dim
    if target_choi.shape != (d * d, d * d):
        raise ValueError(f"target Choi shape {target_choi.shape} != ({d*d}, {d*d})")
    spec = joint.spectrum()
    ctrl = joint.control_op()
    anc = joint.ground_ancilla() if anc_state is None else np.asarray(anc_state, dtype=complex)
    if abs(np.linalg.norm(anc) - 1.0) > 1e-8:
        raise ValueError("ancilla state must be normalized")

    a = design_matrix(spec, horizon, n_harmonics, control=ctrl)
    u0_vec = dyson.u0(spec, horizon).reshape(-1)
    v = spec.modes
    dim = joint.dim
    n_params = 2 * n_harmonics + 1
    w_energy = np.full(n_params, 0.5 * horizon)
    w_energy[0] = horizon

    def channel_of(beta):
        u_prod = v @ (u0_vec + a @ beta).reshape(dim, dim) @ v.conj().T
        return kraus_from_unitary(u_prod, anc, d_anc=joint.anc_dim, utol=None)

    evals = 0

    def objective(beta):
        nonlocal evals
        evals += 1
        dist = np.linalg.norm(choi(channel_of(beta)) - target_choi)
        return dist * dist + lam * float(beta @ (w_energy * beta)), dist

    # equalize coordinate sensitivities (columns of A differ in norm)
    col_norms = np.linalg.norm(a, axis=0)
    scale = 1.0 / np.maximum(col_norms, 1e-12)
    scale /= scale.max()

    beta = np.zeros(n_params)
    f_best, dist_best = objective(beta)
    step = step0
    sweeps = 0
    while step >= step_tol and sweeps < max_sweeps:
        sweeps += 1
        improved = False
        for j in range(n_params):
            for sgn in (1.0, -1.0):
                cand = beta.copy()
                cand[j] += sgn * step * scale[j]
                f_cand, dist_cand = objective(cand)
                moved = False
                walk = 0
                # walk while the direction keeps paying (capped so the cost
                # per sweep stays bounded when the step is already tiny)
                while f_cand < f_best and walk < 30:
                    beta, f_best, dist_best = cand, f_cand, dist_cand
                    moved = improved = True
                    walk += 1
                    cand = beta.copy()
                    cand[j] += sgn * step * scale[j]
                    f_cand, dist_cand = objective(cand)
                if moved:
                    break
        if not improved:
            step *= 0.5
    converged = step < step_tol

    pulse = ControlPulse(horizon, beta)
    ch = channel_of(beta)
    report = ChannelSynthesisReport(
        pulse=pulse,
        distance=float(dist_best),
        tp_defect=ch.tp_defect(),
        cp_defect=ch.cp_defect(),
        energy=pulse.energy(),
        multiplier=float(lam),
        converged=converged,
        n_evaluations=evals,
    )
    return pulse, report
