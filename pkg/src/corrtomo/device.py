"""Gate-sequence execution on block noise models.

The "device" is a model from :mod:`corrtomo.noise`.  A circuit is an ordered
list of gate labels applied to ``|0><0|`` with the model's environment
attached; the measured quantity is the probability of reading ``|0>`` at the
end.  State preparation and measurement are error free.

Exact mode returns the weighted average over the environment; sampled mode
draws a binomial with a seeded generator.  Models whose environment variable
is frozen within a circuit are evolved one environment point at a time (a
vectorized path that scales to dense quadrature grids); models with genuine
transitions use the assembled block matrices.

The survival experiment draws uniformly random gate sequences and keeps only
those whose ideal action returns ``|0>`` up to a global phase, so the ideal
survival probability is one and any decay is attributable to noise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .ptm import GATE_UNITARIES

__all__ = [
    "Circuit",
    "MeasurementRecord",
    "RejectionSamplingError",
    "run_circuit",
    "collect_records",
    "random_identity_sequences",
    "survival_curve",
    "analytic_survival",
    "ideal_output_state",
    "returns_to_zero",
]

MEAN_SLACK = 1e-9


@dataclass(frozen=True)
class Circuit:
    """Ordered gate sequence; ``gates[0]`` is applied first."""

    gates: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[str]:
        return iter(self.gates)


@dataclass(frozen=True)
class MeasurementRecord:
    """One circuit with its measured mean and variance.

    ``shots is None`` marks an exact record (variance zero).  Sampled records
    carry the smoothed binomial variance estimate, which is strictly positive.
    """

    circuit: Circuit
    mean: float
    variance: float
    shots: int | None = None

    def __post_init__(self) -> None:
        if self.shots is None:
            if self.variance != 0.0:
                raise ValueError("exact records must have zero variance")
        elif self.variance <= 0.0:
            raise ValueError("sampled records must have positive variance")


class RejectionSamplingError(RuntimeError):
    """Raised when too few identity-equivalent sequences are found."""

    def __init__(self, message: str, accepted: int, tried: int) -> None:
        super().__init__(message)
        self.accepted = accepted
        self.tried = tried


def _as_circuit(circuit: Circuit | Sequence[str]) -> Circuit:
    return circuit if isinstance(circuit, Circuit) else Circuit(tuple(circuit))


def exact_mean(model, circuit: Circuit | Sequence[str]) -> float:
    """Exact readout probability of a circuit on the model."""
    circuit = _as_circuit(circuit)
    m = model.m
    if model.identity_transitions:
        # frozen environment: evolve all points at once, (m, 4) state stack
        v = np.zeros((m, 4))
        v[:, 0] = model.weights
        v[:, 3] = model.weights
        for label in circuit:
            if label not in model.sys_ptms:
                raise KeyError(f"unknown gate label {label!r}")
            v = np.einsum("mij,mj->mi", model.sys_ptms[label], v)
        mean = 0.5 * float(np.sum(v[:, 0] + v[:, 3]))
    else:
        v = model.rho_vec()
        for label in circuit:
            v = model.gate_block(label) @ v
        mean = float(model.dual_vec() @ v)
    if not -MEAN_SLACK <= mean <= 1.0 + MEAN_SLACK:
        raise ValueError(f"model produced mean {mean!r} outside [0, 1]; the model is inconsistent")
    return mean


def run_circuit(
    model,
    circuit: Circuit | Sequence[str],
    shots: int | None = None,
    rng: np.random.Generator | int | None = None,
) -> MeasurementRecord:
    """Execute one circuit; exact mean or a binomial sample of it.

    The initial state is |0><0| with the model's environment distribution and
    the readout is the |0> probability.  With ``shots`` given, the mean is
    ``Binomial(shots, p) / shots`` drawn from ``rng`` (a Generator or a seed)
    and the variance is the smoothed estimate ptilde (1 - ptilde) / shots
    with ptilde = (k + 1) / (shots + 2).
    """
    circuit = _as_circuit(circuit)
    mean = exact_mean(model, circuit)
    if shots is None:
        return MeasurementRecord(circuit=circuit, mean=mean, variance=0.0, shots=None)
    if shots <= 0:
        raise ValueError(f"shots must be positive, got {shots}")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    k = int(gen.binomial(shots, min(max(mean, 0.0), 1.0)))
    smoothed = (k + 1.0) / (shots + 2.0)
    return MeasurementRecord(
        circuit=circuit,
        mean=k / shots,
        variance=smoothed * (1.0 - smoothed) / shots,
        shots=shots,
    )


def collect_records(
    model,
    circuits: Iterable[Circuit | Sequence[str]],
    shots: int | None = None,
    seed: int | None = None,
) -> list[MeasurementRecord]:
    """Run a batch of circuits with one seeded generator shared in order."""
    gen = np.random.default_rng(seed)
    return [run_circuit(model, c, shots=shots, rng=gen) for c in circuits]


def ideal_output_state(gates: Sequence[str]) -> np.ndarray:
    """State vector produced by the noiseless gates applied to |0>."""
    psi = np.array([1.0, 0.0], dtype=complex)
    for label in gates:
        psi = GATE_UNITARIES[label] @ psi
    return psi


def returns_to_zero(gates: Sequence[str], tol: float = 1e-9) -> bool:
    """True when the ideal action maps |0> back to |0> up to a global phase."""
    psi = ideal_output_state(gates)
    return abs(psi[0]) >= 1.0 - tol


def random_identity_sequences(
    n_gates: int,
    count: int,
    seed: int | np.random.Generator | np.random.SeedSequence | None = None,
    gate_labels: Sequence[str] = ("H", "S"),
    max_tries_per_circuit: int = 1000,
) -> list[Circuit]:
    """Uniformly random length-``n_gates`` sequences whose ideal action fixes |0>.

    Rejection sampling with a deterministic generator: gates are drawn
    uniformly and a sequence is kept iff the noiseless circuit returns |0>
    up to phase.  Raises RejectionSamplingError with acceptance statistics if
    the cap of ``count * max_tries_per_circuit`` draws is exhausted.
    """
    if n_gates < 0:
        raise ValueError(f"n_gates must be nonnegative, got {n_gates}")
    gen = np.random.default_rng(seed)
    labels = tuple(gate_labels)
    if n_gates == 0:
        return [Circuit(()) for _ in range(count)]
    accepted: list[Circuit] = []
    tried = 0
    cap = count * max_tries_per_circuit
    while len(accepted) < count:
        if tried >= cap:
            raise RejectionSamplingError(
                f"accepted {len(accepted)}/{count} sequences of length {n_gates} "
                f"after {tried} draws (acceptance rate {len(accepted) / tried:.4f})",
                accepted=len(accepted),
                tried=tried,
            )
        draw = gen.integers(0, len(labels), size=n_gates)
        tried += 1
        gates = tuple(labels[i] for i in draw)
        if returns_to_zero(gates):
            accepted.append(Circuit(gates))
    return accepted


def survival_curve(
    model,
    n_gates_list: Sequence[int],
    circuits_per_point: int = 200,
    shots: int | None = None,
    seed: int | None = 0,
    threads: int | None = None,
) -> list[dict]:
    """Mean |0> probability of random identity-equivalent circuits per length.

    Returns one row per entry of ``n_gates_list`` with keys ``n_gates``,
    ``mean``, ``stderr``, ``circuits``, ``shots``, ``seed``.  Circuits are
    drawn from per-length seeds spawned off ``seed``; with ``threads`` the
    per-circuit runs are evaluated concurrently but always reduced in index
    order, so the output is independent of the degree of parallelism.
    """
    if len(n_gates_list) == 0:
        raise ValueError("n_gates_list must be nonempty")
    if circuits_per_point <= 0:
        raise ValueError("circuits_per_point must be positive")
    root = np.random.SeedSequence(seed)
    per_point = root.spawn(len(n_gates_list))
    rows: list[dict] = []
    for n_gates, seq in zip(n_gates_list, per_point):
        draw_seed, shot_seed = seq.spawn(2)
        circuits = random_identity_sequences(
            int(n_gates), circuits_per_point, seed=np.random.default_rng(draw_seed)
        )
        shot_rngs = [np.random.default_rng(s) for s in shot_seed.spawn(len(circuits))]

        def one(idx: int) -> float:
            return run_circuit(model, circuits[idx], shots=shots, rng=shot_rngs[idx]).mean

        if threads and threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                means = list(pool.map(one, range(len(circuits))))
        else:
            means = [one(i) for i in range(len(circuits))]
        arr = np.asarray(means)
        rows.append(
            {
                "n_gates": int(n_gates),
                "mean": float(arr.mean()),
                "stderr": float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0,
                "circuits": int(arr.size),
                "shots": shots,
                "seed": seed,
            }
        )
    return rows


def analytic_survival(n_gates: int, sigma: float) -> float:
    """Closed-form survival for maximal noise strength (eta = 1).

    Each gate at frozen drift value lambda multiplies the traceless part by
    exp(-lambda^2); averaging the resulting (1 + exp(-N lambda^2)) / 2 over
    the Gaussian gives (1 + (1 + 2 N sigma^2)^(-1/2)) / 2.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if n_gates < 0:
        raise ValueError(f"n_gates must be nonnegative, got {n_gates}")
    return 0.5 * (1.0 + (1.0 + 2.0 * n_gates * sigma * sigma) ** -0.5)
