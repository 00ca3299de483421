"""Approximate reconstruction by linear inversion with SVD truncation.

When the accessible subspace is larger than the model dimension one wants to
fit, plain inversion of the Gram matrix fails.  Instead, a large *trial* set
of preparation/measurement sequences is measured, the trial Gram matrix is
decomposed as ``U g^t V = diag(s_1 >= s_2 >= ...)``, and the reconstruction
keeps only the subspace of the ``d`` largest singular values:

    g = diag(s_1, ..., s_d),      O~(chi) = D U O~^t(chi) V D^T,

with ``D`` the d x d^t selector.  From there the gauge-fixed error model is
built exactly as in :mod:`corrtomo.tomography`.  The singular spectrum itself
is the diagnostic for choosing ``d``: each well-separated cluster of values
counts the dimensions the device actually explores.

``gauge_fit_to_ideal`` removes the residual gauge freedom by choosing the
output frame that brings the reconstructed gate matrices as close as possible
to the ideal gates, which makes reconstructed and ideal matrices directly
comparable entry by entry.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from .noise import DEFAULT_GATE_LABELS
from .ptm import ideal_qubit_ptms, ideal_seven_ptms, reduced_frame
from .tomography import ErrorModel, FiducialSet, TomographyData, collect_data

__all__ = [
    "TrialSpec",
    "TruncationResult",
    "GaugeFitResult",
    "trial_sequences",
    "collect_trial_data",
    "svd_truncate",
    "singular_spectrum",
    "lim_reconstruct",
    "gauge_fit_to_ideal",
]

DEFAULT_SELECTION_SEED = 20260808

GateSeq = tuple[str, ...]


@dataclass(frozen=True)
class TrialSpec:
    """Trial sequences probing the device beyond the target model dimension."""

    d_trial: int
    sequences: tuple[GateSeq, ...]
    selection_seed: int | None

    def __post_init__(self) -> None:
        seqs = tuple(tuple(s) for s in self.sequences)
        if not seqs or seqs[0] != ():
            raise ValueError("the first trial sequence must be empty")
        if len(seqs) != self.d_trial:
            raise ValueError(f"d_trial = {self.d_trial} does not match {len(seqs)} sequences")
        object.__setattr__(self, "sequences", seqs)

    def fiducials(self) -> FiducialSet:
        """Trial fiducials: states from the sequences, observables from their reverses."""
        return FiducialSet(
            prep_sequences=self.sequences,
            meas_sequences=tuple(tuple(reversed(s)) for s in self.sequences),
        )


def _all_sequences(length: int, labels: Sequence[str]) -> list[GateSeq]:
    if length == 0:
        return [()]
    out: list[GateSeq] = []
    for prefix in _all_sequences(length - 1, labels):
        for l in labels:
            out.append(prefix + (l,))
    return out


def trial_sequences(
    preset: str,
    seed: int | None = DEFAULT_SELECTION_SEED,
    sequences: Sequence[Sequence[str]] | None = None,
    gate_labels: Sequence[str] = DEFAULT_GATE_LABELS,
) -> TrialSpec:
    """Standard trial sets.

    * ``"d4"``: the four sequences (), (H), (H,S), (H,S,H) that already span
      a bare qubit.
    * ``"d7"``: every sequence of length 0..5 plus four seeded random picks
      per length 6..20, 123 sequences in total; long sequences let slow
      environment directions show up in the spectrum.
    * ``"custom"``: caller-provided ``sequences`` (first must be empty).
    """
    if preset == "d4":
        seqs: list[GateSeq] = [(), ("H",), ("H", "S"), ("H", "S", "H")]
    elif preset == "d7":
        seqs = []
        for n in range(6):
            seqs.extend(_all_sequences(n, gate_labels))
        gen = np.random.default_rng(seed)
        base = len(gate_labels)
        for n in range(6, 21):
            codes = gen.choice(base**n, size=4, replace=False)
            for code in sorted(int(c) for c in codes):
                digits = []
                for _ in range(n):
                    digits.append(gate_labels[code % base])
                    code //= base
                seqs.append(tuple(digits))
    elif preset == "custom":
        if sequences is None:
            raise ValueError("custom preset requires explicit sequences")
        seqs = [tuple(s) for s in sequences]
    else:
        raise ValueError(f"unknown preset {preset!r}; expected d4, d7 or custom")
    return TrialSpec(d_trial=len(seqs), sequences=tuple(seqs), selection_seed=seed)


def collect_trial_data(
    model,
    trial: TrialSpec,
    shots: int | None = None,
    seed: int | None = None,
) -> TomographyData:
    """Measure the trial Gram matrix and per-gate trial matrices."""
    data = collect_data(model, trial.fiducials(), shots=shots, seed=seed)
    data.provenance["trial_seed"] = trial.selection_seed
    data.provenance["d_trial"] = trial.d_trial
    return data


@dataclass
class TruncationResult:
    """SVD factors of the trial Gram matrix and the truncated data matrices.

    ``u`` and ``v`` are the orthogonal factors in the convention
    ``u @ g_trial @ v = diag(singular_values)``; ``d`` is the kept dimension.
    ``g_col0``/``g_row0`` keep the first column/row of the trial Gram matrix,
    from which the truncated state and readout vectors are derived.
    """

    u: np.ndarray
    v: np.ndarray
    singular_values: np.ndarray
    d: int
    g_trunc: np.ndarray
    gate_mats_trunc: dict[str, np.ndarray]
    g_col0: np.ndarray
    g_row0: np.ndarray
    provenance: dict = field(default_factory=dict)


def singular_spectrum(g_trial: np.ndarray) -> np.ndarray:
    """Singular values of the trial Gram matrix in descending order."""
    return np.linalg.svd(np.asarray(g_trial, dtype=float), compute_uv=False)


def svd_truncate(
    g_trial: np.ndarray,
    gate_mats_trial: Mapping[str, np.ndarray],
    d: int,
    rank_rtol: float = 1e-12,
) -> TruncationResult:
    """Keep the subspace of the d largest singular values of the trial Gram matrix.

    Sign/permutation freedom of the SVD is fixed by making the largest-magnitude
    entry of every left singular vector positive, so results are deterministic
    across linear-algebra backends.  Requesting ``d`` beyond the numerical
    rank triggers a warning carrying the spectrum.
    """
    g_trial = np.asarray(g_trial, dtype=float)
    d_trial = g_trial.shape[0]
    if g_trial.shape != (d_trial, d_trial):
        raise ValueError(f"trial Gram matrix must be square, got {g_trial.shape}")
    if not 1 <= d <= d_trial:
        raise ValueError(f"kept dimension d = {d} must be in 1 .. {d_trial}")
    u_np, s, vh = np.linalg.svd(g_trial)
    # deterministic sign convention
    for j in range(d_trial):
        col = u_np[:, j]
        pivot = np.argmax(np.abs(col))
        if col[pivot] < 0.0:
            u_np[:, j] = -col
            vh[j, :] = -vh[j, :]
    if s[0] > 0.0 and d > np.count_nonzero(s > rank_rtol * s[0]):
        warnings.warn(
            f"kept dimension d = {d} exceeds the numerical rank "
            f"{np.count_nonzero(s > rank_rtol * s[0])}; spectrum: {s}",
            RuntimeWarning,
            stacklevel=2,
        )
    u = u_np.T
    v = vh.T
    gate_mats_trunc = {
        label: (u @ np.asarray(mat, dtype=float) @ v)[:d, :d] for label, mat in gate_mats_trial.items()
    }
    return TruncationResult(
        u=u,
        v=v,
        singular_values=s,
        d=d,
        g_trunc=np.diag(s[:d]),
        gate_mats_trunc=gate_mats_trunc,
        g_col0=g_trial[:, 0].copy(),
        g_row0=g_trial[0, :].copy(),
    )


RHO_FORMULA_TOL = 1e-10


def lim_reconstruct(truncation: TruncationResult, m_hat_in: np.ndarray | None = None) -> ErrorModel:
    """Gauge-fixed error model from truncated data.

    The truncated state vector has two algebraically equal expressions (via
    the right singular vectors and via the first Gram column); both are
    evaluated and must agree to RHO_FORMULA_TOL, which guards against a
    truncation inconsistent with the data.
    """
    d = truncation.d
    if m_hat_in is None:
        m_hat_in = np.eye(d)
    m_hat_in = np.asarray(m_hat_in, dtype=float)
    if m_hat_in.shape != (d, d):
        raise ValueError(f"gauge matrix must be {d} x {d}, got {m_hat_in.shape}")
    s_kept = np.diag(truncation.g_trunc)
    if np.any(s_kept <= 0.0):
        raise np.linalg.LinAlgError("truncated Gram matrix is singular; reduce d")
    m_in_inv = np.linalg.inv(m_hat_in)
    m_hat_out = truncation.g_trunc @ m_in_inv
    m_out_inv = m_hat_in @ np.diag(1.0 / s_kept)
    state_a = m_hat_in @ truncation.v[0, :d]
    state_b = m_out_inv @ (truncation.u @ truncation.g_col0)[:d]
    dev = np.max(np.abs(state_a - state_b))
    if dev > RHO_FORMULA_TOL * max(1.0, np.max(np.abs(state_a))):
        raise np.linalg.LinAlgError(
            f"the two state-vector expressions disagree by {dev:.3e}; truncation inconsistent with data"
        )
    dual = (truncation.g_row0 @ truncation.v)[:d] @ m_in_inv
    gates = {label: m_out_inv @ mat @ m_in_inv for label, mat in truncation.gate_mats_trunc.items()}
    return ErrorModel(
        state=state_a,
        dual=dual,
        gates=gates,
        gauge={
            "m_hat_in": m_hat_in,
            "d": d,
            "singular_values": truncation.singular_values,
            "state_formula_dev": dev,
        },
    )


@dataclass
class GaugeFitResult:
    """Outcome of the gauge optimization toward the ideal gate matrices."""

    m_hat_out: np.ndarray
    objective: float
    error_model: ErrorModel
    n_evaluations: int
    converged: bool


#: Depolarizing rates of the synthetic reference model used to seed the d = 7
#: gauge optimization.  Exactly noiseless dynamics never leaves a 4-dimensional
#: subspace, so a rank-7 starting frame needs two distinct (small) rates; the
#: optimizer is insensitive to their precise values.
REFERENCE_RATES = (1e-3, 1e-2)


def _reference_trial_duals(trial: TrialSpec, d: int, gate_labels: Sequence[str]) -> np.ndarray:
    """Rows of effective reference observables for each trial sequence (d^t x d).

    For d = 4 the reference is the ideal qubit gate set.  For d = 7 it is a
    near-ideal two-point model whose two depolarizing scales make the rows
    span the full reduced space.
    """
    if d == 4:
        ptms = ideal_qubit_ptms()
        q0 = np.array([0.5, 0.0, 0.0, 0.5])
    elif d == 7:
        frame = reduced_frame(np.array([0.5, 0.5]))
        ideal = ideal_qubit_ptms()
        ptms = {}
        for label in gate_labels:
            block = np.zeros((8, 8))
            for lam, eps in enumerate(REFERENCE_RATES):
                block[4 * lam : 4 * lam + 4, 4 * lam : 4 * lam + 4] = (
                    np.diag([1.0, 1.0 - eps, 1.0 - eps, 1.0 - eps]) @ ideal[label]
                )
            ptms[label] = frame.T @ block @ frame
        q_block = np.array([0.5, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5])
        q0 = q_block @ frame
    else:
        raise ValueError(f"no reference frame for d = {d}; supply an explicit initial gauge")
    rows = np.empty((trial.d_trial, d))
    for k, seq in enumerate(trial.sequences):
        q = q0
        for label in seq:
            q = q @ ptms[label]
        rows[k, :] = q
    return rows


def gauge_fit_to_ideal(
    truncation: TruncationResult,
    ideal_ptms: Mapping[str, np.ndarray] | None = None,
    trial: TrialSpec | None = None,
    m_hat_out0: np.ndarray | None = None,
    max_nfev: int = 20000,
) -> GaugeFitResult:
    """Choose the output gauge minimising the distance to the ideal gates.

    Minimises ``sum_G || M_out_hat^-1 O~(G) M_in_hat^-1 - ideal(G) ||_F^2``
    over the d^2 entries of ``M_out_hat``, with ``M_in_hat = M_out_hat^-1 g``.
    The starting point maps the truncated data frame onto the ideal frame
    (built from ``trial``), so noiseless data sits at a zero-objective fixed
    point; pass ``m_hat_out0`` to start elsewhere.  Deterministic; when the
    optimizer hits its evaluation budget, the best point so far is returned
    with ``converged=False``.
    """
    d = truncation.d
    if ideal_ptms is None:
        ideal_ptms = ideal_qubit_ptms() if d == 4 else ideal_seven_ptms(0.5)
    labels = sorted(truncation.gate_mats_trunc.keys())
    for label in labels:
        if ideal_ptms[label].shape != (d, d):
            raise ValueError(f"ideal matrix for {label!r} has wrong shape {ideal_ptms[label].shape}")
    if m_hat_out0 is None:
        if trial is None:
            raise ValueError("need the trial spec (or an explicit m_hat_out0) to build the initial gauge")
        ref_rows = _reference_trial_duals(trial, d, labels)
        m_hat_out0 = (truncation.u @ ref_rows)[:d, :]
    g_inv = np.diag(1.0 / np.diag(truncation.g_trunc))

    def reconstructed(m_hat_out: np.ndarray) -> dict[str, np.ndarray]:
        m_out_inv = np.linalg.inv(m_hat_out)
        return {
            label: m_out_inv @ truncation.gate_mats_trunc[label] @ g_inv @ m_hat_out for label in labels
        }

    def residual(x: np.ndarray) -> np.ndarray:
        m_hat_out = x.reshape(d, d)
        if not np.isfinite(np.linalg.cond(m_hat_out)) or np.linalg.cond(m_hat_out) > 1e12:
            return np.full(len(labels) * d * d, 1e6)
        recon = reconstructed(m_hat_out)
        return np.concatenate([(recon[label] - ideal_ptms[label]).ravel() for label in labels])

    result = least_squares(residual, m_hat_out0.ravel(), method="trf", max_nfev=max_nfev, xtol=1e-14, ftol=1e-14, gtol=1e-14)
    m_hat_out = result.x.reshape(d, d)
    m_hat_in = np.linalg.solve(m_hat_out, truncation.g_trunc)
    model = lim_reconstruct(truncation, m_hat_in=m_hat_in)
    converged = bool(result.status > 0 and result.nfev < max_nfev)
    if not converged:
        warnings.warn(
            f"gauge optimization stopped at its evaluation budget (objective {2 * result.cost:.3e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return GaugeFitResult(
        m_hat_out=m_hat_out,
        objective=float(2.0 * result.cost),
        error_model=model,
        n_evaluations=int(result.nfev),
        converged=converged,
    )
