"""Maximum-likelihood reconstruction of a parametric correlated-error model.

The model family: the environment variable takes ``L`` values with weights
``p(lam)``; each gate acts as its ideal unitary followed by depolarizing
noise with a rate ``eps[gate](lam)`` that depends on the environment value,
which is frozen over a circuit.  State and readout are error free.

Fitting minimises the Gaussian negative log-likelihood

    sum_m (Cbar_m(x) - C_m)^2 / sigma_m^2

over the weights and rates, with exact-mean records assigned a configurable
variance floor.  The optimizer is a deterministic multi-start Nelder-Mead
simplex over an unconstrained parametrization (weights through softmax,
rates through a logistic map), and the winning start is chosen by
(objective, start index), so results are reproducible and independent of
evaluation order; a deterministic least-squares pass then sharpens the
winner along the nearly degenerate weight/rate trough.  Fits are
canonicalized by ascending first-gate rate to remove the label permutation
symmetry.

Because depolarizing noise commutes with the ideal gates, a circuit's
predicted mean only depends on its ideal output and its per-gate counts;
``fit`` exploits this closed form to evaluate the likelihood for all records
at once (it is checked against the generic block evaluation in the tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares, minimize
from scipy.special import expit

from .device import Circuit, MeasurementRecord
from .ptm import ideal_qubit_ptms, reduced_frame
from .tomography import ErrorModel

__all__ = [
    "ParamModel",
    "OptimizerConfig",
    "FitResult",
    "model_predict",
    "negative_log_likelihood",
    "fit",
    "induced_error_model",
    "records_from_tomography",
]

DEFAULT_SIGMA_FLOOR = 1e-3
RATE_CLAMP = 1e-12


@dataclass(frozen=True)
class ParamModel:
    """Weights and per-gate depolarizing rates over a finite environment.

    ``eps[gate]`` is an array of rates, one per environment value, aligned
    with ``p``.
    """

    labels: tuple[int, ...]
    p: np.ndarray
    eps: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must be nonnegative and sum to 1, got {p}")
        object.__setattr__(self, "p", p)
        eps = {g: np.asarray(v, dtype=float) for g, v in self.eps.items()}
        for g, v in eps.items():
            if v.shape != p.shape:
                raise ValueError(f"rates for gate {g!r} have shape {v.shape}, expected {p.shape}")
            if np.any(v < -1e-12) or np.any(v > 1.0 + 1e-12):
                raise ValueError(f"rates for gate {g!r} must lie in [0, 1], got {v}")
        object.__setattr__(self, "eps", eps)
        if len(self.labels) != p.size:
            raise ValueError("labels and weights must have the same length")

    @property
    def m(self) -> int:
        return self.p.size

    @property
    def gate_labels(self) -> tuple[str, ...]:
        return tuple(sorted(self.eps.keys()))

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "p": self.p.tolist(),
            "eps": {g: v.tolist() for g, v in self.eps.items()},
        }


def model_predict(param_model: ParamModel, circuit: Circuit | Sequence[str]) -> float:
    """Predicted |0> probability of a circuit: block-diagonal evaluation.

    Folds the 4x4 transfer matrices gate by gate independently at every
    environment value, then averages with the weights.
    """
    gates = circuit.gates if isinstance(circuit, Circuit) else tuple(circuit)
    ideal = ideal_qubit_ptms()
    total = 0.0
    for lam in range(param_model.m):
        v = np.array([1.0, 0.0, 0.0, 1.0])
        for label in gates:
            if label not in param_model.eps:
                raise KeyError(f"unknown gate label {label!r}")
            eps = param_model.eps[label][lam]
            v = np.diag([1.0, 1.0 - eps, 1.0 - eps, 1.0 - eps]) @ (ideal[label] @ v)
        total += param_model.p[lam] * 0.5 * (v[0] + v[3])
    return float(total)


def _record_features(
    records: Sequence[MeasurementRecord],
    gate_labels: tuple[str, ...],
    sigma_floor: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-record ideal outcome, gate counts, means and variances.

    The ideal outcome is 2 C_ideal - 1, the Bloch z component of the
    noiseless circuit output, computed by folding the ideal transfer
    matrices once per record.
    """
    ideal = ideal_qubit_ptms()
    n = len(records)
    z_ideal = np.empty(n)
    counts = np.zeros((n, len(gate_labels)))
    means = np.empty(n)
    variances = np.empty(n)
    index = {g: j for j, g in enumerate(gate_labels)}
    rotations = [np.ascontiguousarray(ideal[g][1:, 1:]) for g in gate_labels]
    for i, rec in enumerate(records):
        v = np.array([0.0, 0.0, 1.0])
        for label in rec.circuit:
            if label not in index:
                raise KeyError(f"record uses gate {label!r} outside the fitted gate set {gate_labels}")
            j = index[label]
            counts[i, j] += 1.0
            v = rotations[j] @ v
        z_ideal[i] = v[2]
        means[i] = rec.mean
        variances[i] = max(rec.variance, sigma_floor**2)
    return z_ideal, counts, means, variances


class _SufficientStatistics:
    """Grouped form of the weighted least-squares objective.

    Records sharing (gate counts, ideal outcome) predict the same mean, so
    the objective collapses exactly to ``sum_g A_g Cbar_g^2 - 2 B_g Cbar_g
    + D_g`` with three scalars per group, independent of the group sizes or
    the per-record variances.
    """

    def __init__(
        self,
        records: Sequence[MeasurementRecord],
        gate_labels: tuple[str, ...],
        sigma_floor: float,
    ) -> None:
        z_ideal, counts, means, variances = _record_features(records, gate_labels, sigma_floor)
        keys = np.concatenate([counts, z_ideal[:, None]], axis=1)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        inv_var = 1.0 / variances
        n_groups = uniq.shape[0]
        self.counts = uniq[:, :-1]
        self.z_ideal = uniq[:, -1]
        self.a = np.bincount(inverse, weights=inv_var, minlength=n_groups)
        b = np.bincount(inverse, weights=means * inv_var, minlength=n_groups)
        self.mu = b / self.a
        # within-group scatter, accumulated around the group means so the
        # objective is an explicit sum of nonnegative terms
        self.spread = float(np.sum((means - self.mu[inverse]) ** 2 * inv_var))
        self.n_records = len(records)

    def objective(self, p: np.ndarray, rates: np.ndarray) -> float:
        pred = _fast_predictions(p, rates, self.z_ideal, self.counts)
        return float(self.a @ (pred - self.mu) ** 2 + self.spread)


def _fast_predictions(
    p: np.ndarray,
    rates: np.ndarray,
    z_ideal: np.ndarray,
    counts: np.ndarray,
) -> np.ndarray:
    """Vectorized means: 0.5 (1 + z_ideal * sum_lam p_lam prod_G (1-eps)^n_G)."""
    log1m = np.log1p(-np.clip(rates, 0.0, 1.0 - RATE_CLAMP))  # (n_gates, m)
    damping = np.exp(counts @ log1m)  # (n_records, m)
    return 0.5 * (1.0 + z_ideal * (damping @ p))


def negative_log_likelihood(
    param_model: ParamModel,
    records: Sequence[MeasurementRecord],
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
) -> float:
    """Sum of squared residuals weighted by the per-record variances.

    Exact records (zero variance) use the floor; sampled records use the
    larger of their variance estimate and the floor.
    """
    if not records:
        raise ValueError("need at least one record")
    if sigma_floor <= 0.0:
        raise ValueError("sigma_floor must be positive (records may carry zero variance)")
    gate_labels = param_model.gate_labels
    stats = _SufficientStatistics(records, gate_labels, sigma_floor)
    rates = np.stack([param_model.eps[g] for g in gate_labels])
    return stats.objective(param_model.p, rates)


@dataclass(frozen=True)
class OptimizerConfig:
    n_starts: int = 16
    max_evaluations: int = 6000
    xatol: float = 1e-9
    fatol: float = 1e-9
    sigma_floor: float = DEFAULT_SIGMA_FLOOR
    rate_scale: float = 0.01  # typical rate magnitude used to seed starts


@dataclass
class FitResult:
    param_model: ParamModel
    error_model: ErrorModel
    nll: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", False))

    def to_json(self) -> dict:
        return {
            "param_model": self.param_model.to_json(),
            "error_model": self.error_model.to_json(),
            "nll": self.nll,
            "diagnostics": {
                k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.diagnostics.items()
            },
        }


def _softmax(u: np.ndarray) -> np.ndarray:
    z = np.concatenate(([0.0], u))
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _sigmoid(v: np.ndarray) -> np.ndarray:
    return expit(v)


def _logit(p: float) -> float:
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return float(np.log(p / (1.0 - p)))


def _unpack(x: np.ndarray, m: int, n_gates: int) -> tuple[np.ndarray, np.ndarray]:
    p = _softmax(x[: m - 1]) if m > 1 else np.array([1.0])
    rates = _sigmoid(x[m - 1 :]).reshape(n_gates, m)
    return p, rates


def fit(
    records: Sequence[MeasurementRecord],
    l_size: int,
    optimizer_config: OptimizerConfig | None = None,
    seed: int = 0,
    gate_labels: Sequence[str] | None = None,
) -> FitResult:
    """Fit weights and per-gate rates to measured circuit means.

    Deterministic multi-start simplex minimisation of the weighted squared
    residuals.  The first start uses equal weights and a common small rate;
    the remaining starts are drawn from the seeded generator.  Starts run
    independently; the winner is the lowest objective with ties broken by
    start index, then finished by a deterministic least-squares polish.  The
    fitted model is canonicalized by ascending first-gate rate and exported
    both as a ParamModel and as the equivalent reduced-space ErrorModel.

    Records should cover circuits long enough for the slow environment
    directions to matter (lengths of order tens for weak noise); otherwise
    the weights are poorly identified.
    """
    cfg = optimizer_config or OptimizerConfig()
    if l_size < 1:
        raise ValueError(f"l_size must be >= 1, got {l_size}")
    if not records:
        raise ValueError("need at least one record")
    if gate_labels is None:
        gate_labels = tuple(sorted({g for rec in records for g in rec.circuit})) or ("H", "S")
    gate_labels = tuple(gate_labels)
    stats = _SufficientStatistics(records, gate_labels, cfg.sigma_floor)
    m = l_size
    n_gates = len(gate_labels)

    def objective(x: np.ndarray) -> float:
        p, rates = _unpack(x, m, n_gates)
        return stats.objective(p, rates)

    gen = np.random.default_rng(seed)
    base_rate_logit = _logit(cfg.rate_scale)
    starts = [np.concatenate([np.zeros(m - 1), np.full(n_gates * m, base_rate_logit)])]
    for _ in range(cfg.n_starts - 1):
        w = gen.normal(0.0, 1.0, size=m - 1)
        v = gen.normal(base_rate_logit, 2.0, size=n_gates * m)
        starts.append(np.concatenate([w, v]))

    def simplex(x0: np.ndarray, xatol: float, fatol: float):
        return minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": cfg.max_evaluations,
                "maxfev": cfg.max_evaluations,
                "xatol": xatol,
                "fatol": fatol,
            },
        )

    results = [simplex(x0, cfg.xatol, cfg.fatol) for x0 in starts]
    order = sorted(range(len(results)), key=lambda i: (results[i].fun, i))
    best = results[order[0]]
    # The simplex finds the right basin but crawls along the nearly degenerate
    # weight/rate trough; a Levenberg-Marquardt pass on the (exactly
    # least-squares) objective finishes the job deterministically.
    sqrt_a = np.sqrt(stats.a)

    def residuals(x: np.ndarray) -> np.ndarray:
        p, rates = _unpack(x, m, n_gates)
        pred = _fast_predictions(p, rates, stats.z_ideal, stats.counts)
        return sqrt_a * (pred - stats.mu)

    polish = least_squares(residuals, best.x, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    best_x, best_fun = best.x, float(best.fun)
    if np.isfinite(polish.cost) and objective(polish.x) <= best_fun:
        best_x, best_fun = polish.x, float(objective(polish.x))
    converged = bool(any(r.success for r in results) or polish.status > 0)

    p, rates = _unpack(best_x, m, n_gates)
    # canonical order: ascending rate of the first gate label
    order_lam = np.argsort(rates[0, :], kind="stable")
    p = p[order_lam]
    rates = rates[:, order_lam]
    param_model = ParamModel(
        labels=tuple(range(1, m + 1)),
        p=p,
        eps={g: rates[j, :] for j, g in enumerate(gate_labels)},
    )
    error_model = induced_error_model(param_model)
    return FitResult(
        param_model=param_model,
        error_model=error_model,
        nll=best_fun,
        diagnostics={
            "converged": converged,
            "start_objectives": np.array([r.fun for r in results]),
            "winner": int(order[0]),
            "n_evaluations": int(sum(r.nfev for r in results) + polish.nfev),
            "n_records": len(records),
            "sigma_floor": cfg.sigma_floor,
            "seed": seed,
        },
    )


def records_from_tomography(data) -> list[MeasurementRecord]:
    """Flatten tomography data into per-circuit records for likelihood fitting.

    Every Gram entry corresponds to the circuit (preparation fiducial i,
    measurement fiducial k) and every gate-matrix entry to the same pair
    with the gate interposed; the measured value is the record mean.  Exact
    data yield exact records, sampled data carry the binomial variance
    estimate.
    """
    shots = data.provenance.get("shots")
    fids = data.fiducials
    records: list[MeasurementRecord] = []

    def add(mean: float, gates: tuple[str, ...]) -> None:
        mean = float(mean)
        if shots is None:
            records.append(MeasurementRecord(Circuit(gates), mean, 0.0, None))
        else:
            smoothed = (mean * shots + 1.0) / (shots + 2.0)
            records.append(
                MeasurementRecord(Circuit(gates), mean, smoothed * (1.0 - smoothed) / shots, shots)
            )

    for k, meas in enumerate(fids.meas_sequences):
        for i, prep in enumerate(fids.prep_sequences):
            add(data.gram[k, i], prep + meas)
            for label, mat in data.gate_mats.items():
                add(mat[k, i], prep + (label,) + meas)
    return records


def induced_error_model(param_model: ParamModel) -> ErrorModel:
    """Equivalent error model on the reduced (3m + 1)-dimensional space.

    The block dynamics of the parametric family keeps the reachable subspace
    spanned by the weighted identity profile and the per-value X, Y, Z slots,
    so projecting the block matrices onto that frame loses nothing: the
    induced model predicts identically to the parametric one.
    """
    m = param_model.m
    frame = reduced_frame(param_model.p)
    ideal = ideal_qubit_ptms()
    gates = {}
    for label in param_model.gate_labels:
        block = np.zeros((4 * m, 4 * m))
        for lam in range(m):
            eps = param_model.eps[label][lam]
            block[4 * lam : 4 * lam + 4, 4 * lam : 4 * lam + 4] = (
                np.diag([1.0, 1.0 - eps, 1.0 - eps, 1.0 - eps]) @ ideal[label]
            )
        gates[label] = frame.T @ block @ frame
    rho = np.zeros(4 * m)
    rho[0::4] = param_model.p
    rho[3::4] = param_model.p
    dual = np.zeros(4 * m)
    dual[0::4] = 0.5
    dual[3::4] = 0.5
    return ErrorModel(
        state=frame.T @ rho,
        dual=dual @ frame,
        gates=gates,
        gauge={"parametric": param_model.to_json()},
    )
