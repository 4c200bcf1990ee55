"""Rate sweeps, two-point hypothesis constructions, and threshold probes.

The two-point constructions produce explicit parameter pairs whose triple
laws are nearly indistinguishable at sample size n: for each target
component (phi1/phi3 jointly, phi2, psi1, psi2) the pair is separated by
roughly c / (sqrt(n) * box-dependent factors) while matching the moment
coordinates that would otherwise dominate the statistical distance — in
particular the phi1_phi3 and phi2 pairs share the value of r(phi) exactly.
Sweeps drive the estimator across a grid of sample sizes and fit log-log
slopes of median losses; threshold probes run likelihood-ratio tests on
the constructed pairs to locate the learnability frontier empirically.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFitError, FrontierError, InfeasiblePairError, ValidationError
from .estimator import LossRecord, SearchConfig, losses, min_distance_fit
from .filter_kl import kl_estimate, loglik_batch
from .params import (
    ConstraintBox,
    PhiPsiParams,
    fallback_direction,
    phipsi_to_theta,
    sample_phipsi,
)
from .simulate import derive_seed, empirical_triple_law, sample_paths
from .triple_law import r_of_phi, rho

PAIR_KINDS = ("phi1_phi3", "phi2", "psi1", "psi2")


@dataclass(frozen=True)
class SweepConfig:
    """A rate sweep: one box, a grid of sample sizes, replicated estimation."""

    box: ConstraintBox
    n_grid: tuple
    replicas: int
    master_seed: int
    target: str = "loss_phi2"
    output_path: str | None = None
    resample_truths: bool = False
    search: SearchConfig = field(default_factory=SearchConfig)

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])) or not grid:
            raise ValidationError("n_grid must be nonempty and strictly increasing")
        object.__setattr__(self, "n_grid", grid)


@dataclass(frozen=True, eq=False)
class HypothesisPair:
    """Two nearly indistinguishable parameters with their separation record."""

    a: PhiPsiParams
    b: PhiPsiParams
    kind: str
    R: float
    S: float
    separation: LossRecord
    rho_ab: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "R": self.R,
                "S": self.S,
                "rho": self.rho_ab,
                "a": json.loads(self.a.to_json()),
                "b": json.loads(self.b.to_json()),
                "separation": {
                    "phi1": self.separation.phi1,
                    "phi2": self.separation.phi2,
                    "phi3": self.separation.phi3,
                    "psi1": self.separation.psi1,
                    "psi2": self.separation.psi2,
                },
            }
        )


def _witness_psi(K: int):
    return np.full(K, 1.0 / K), fallback_direction(K)


def _member(phi, psi1, psi2, kind: str) -> PhiPsiParams:
    try:
        return PhiPsiParams(
            phi1=float(phi[0]), phi2=float(phi[1]), phi3=float(phi[2]),
            psi1=psi1, psi2=psi2,
        )
    except ValidationError as exc:
        raise InfeasiblePairError(f"{kind} construction invalid: {exc}") from exc


def lower_bound_pair(kind: str, n: int, box: ConstraintBox, c: float) -> HypothesisPair:
    """Build the two-point pair of the given kind at sample size n.

    Feasibility inequalities are checked and never silently clipped:
    R <= delta <= 1/6 for phi1_phi3, R <= epsilon <= 1/3 for phi2,
    K > 2 for psi2, plus the compatibility condition on zeta.
    """
    if kind not in PAIR_KINDS:
        raise ValidationError(f"unknown pair kind {kind!r}")
    if n < 1:
        raise ValidationError("n must be >= 1")
    if c < 0:
        raise ValidationError("c must be >= 0")
    if not box.compatibility_ok:
        raise InfeasiblePairError(
            f"zeta={box.zeta} exceeds compatibility bound {box.compatibility_bound}"
        )
    d, e, z = box.delta, box.epsilon, box.zeta
    psi1, psi2 = _witness_psi(box.K)
    root_n = math.sqrt(n)
    S = 0.0

    if kind == "phi1_phi3":
        if d > 1.0 / 6.0 + 1e-15:
            raise InfeasiblePairError(f"need delta <= 1/6, got {d}")
        R = c / (e * e * z**3 * root_n)
        if R > d + 1e-15:
            raise InfeasiblePairError(f"need R <= delta: R={R}, delta={d}")
        S = (2.0 - 6.0 * d - R) * R / (6.0 * d - 9.0 * d * d)
        a = _member((1.0 - 3.0 * d, e, z * math.sqrt(1.0 + S)), psi1, psi2, kind)
        b = _member((1.0 - 3.0 * d - R, e, z), psi1, psi2, kind)
    elif kind == "phi2":
        if e > 1.0 / 3.0 + 1e-15:
            raise InfeasiblePairError(f"need epsilon <= 1/3, got {e}")
        R = c / (d * e * z * z * root_n)
        if R > e + 1e-15:
            raise InfeasiblePairError(f"need R <= epsilon: R={R}, epsilon={e}")
        a = _member((1.0 - 3.0 * d, e, z * math.sqrt(1.0 + R / e)), psi1, psi2, kind)
        b = _member((1.0 - 3.0 * d, e + R, z), psi1, psi2, kind)
    elif kind == "psi1":
        R = c / root_n
        a = _member((0.0, e, z), psi1, psi2, kind)
        b = _member((0.0, e, z), psi1 + R * psi2, psi2, kind)
    else:  # psi2
        if box.K <= 2:
            raise InfeasiblePairError("psi2 construction requires K > 2")
        R = c / (root_n * d * e * z * z)
        if R >= 2.0:
            raise InfeasiblePairError(f"need R < 2, got R={R}")
        h = np.zeros(box.K)
        h[0] = 1.0 / math.sqrt(2.0)
        h[2] = -1.0 / math.sqrt(2.0)
        alpha = R / (2.0 - R)
        tilde = (psi2 + alpha * h) / (1.0 + alpha)
        tilde = tilde / np.linalg.norm(tilde)
        a = _member((1.0 - 3.0 * d, e, z), psi1, psi2, kind)
        b = _member((1.0 - 3.0 * d, e, z), psi1, tilde, kind)

    if kind in ("phi1_phi3", "phi2"):
        gap = abs(r_of_phi(a.phi) - r_of_phi(b.phi))
        if gap > 1e-12:
            raise InfeasiblePairError(f"r-equality violated by {gap:.3e}")
    return HypothesisPair(
        a=a, b=b, kind=kind, R=R, S=S,
        separation=losses(b, a), rho_ab=rho(a, b),
    )


SWEEP_COLUMNS = (
    "n", "replica", "seed", "delta", "epsilon", "zeta", "L", "K",
    "loss_phi1", "loss_phi2", "loss_phi3", "loss_psi1", "loss_psi2",
    "loss_pq", "loss_f", "objective", "wall_ms", "error",
)


def rate_sweep(cfg: SweepConfig):
    """Run the estimator over the (n, replica) grid; returns row dicts.

    The truth is fixed per sweep by default (drawn once from the box);
    ``resample_truths`` draws a new truth per replica instead.  Rows are
    deterministic given the master seed; failures fill the error column
    and the sweep continues.
    """
    box = cfg.box
    truth = sample_phipsi(box, derive_seed(cfg.master_seed, 0))
    rows = []
    for n in cfg.n_grid:
        for rep in range(cfg.replicas):
            if cfg.resample_truths:
                truth_r = sample_phipsi(box, derive_seed(cfg.master_seed, 1, rep))
            else:
                truth_r = truth
            seed_int = int(derive_seed(cfg.master_seed, n, rep).generate_state(1)[0])
            row = {
                "n": n, "replica": rep, "seed": seed_int,
                "delta": box.delta, "epsilon": box.epsilon, "zeta": box.zeta,
                "L": box.L, "K": box.K, "error": "",
            }
            t0 = time.perf_counter()
            try:
                theta = phipsi_to_theta(truth_r)
                path = sample_paths(theta, n, 1, seed_int)
                phat = empirical_triple_law(path.observed[0], box.K)
                fit = min_distance_fit(phat, box, cfg.search)
                rec = losses(fit.estimate, truth_r)
                row.update(
                    loss_phi1=rec.phi1, loss_phi2=rec.phi2, loss_phi3=rec.phi3,
                    loss_psi1=rec.psi1, loss_psi2=rec.psi2,
                    loss_pq=rec.pq, loss_f=rec.f, objective=fit.objective,
                )
            except FrontierError as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
                for col in SWEEP_COLUMNS[8:16]:
                    row[col] = math.nan
            row["wall_ms"] = (time.perf_counter() - t0) * 1000.0
            rows.append(row)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(sweep_rows_to_csv(rows))
    return rows


def sweep_rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: row.get(k, "") for k in SWEEP_COLUMNS})
    return buf.getvalue()


def slope_fit(rows, column: str):
    """OLS fit of log(median loss) against log(n); returns (slope, intercept, R^2)."""
    by_n = {}
    for row in rows:
        val = row.get(column)
        if val is None or isinstance(val, str) or not math.isfinite(val):
            continue
        by_n.setdefault(row["n"], []).append(float(val))
    points = []
    for n, vals in sorted(by_n.items()):
        med = float(np.median(vals))
        if med > 0.0:
            points.append((math.log(n), math.log(med)))
    if len(points) < 2:
        raise DegenerateFitError(
            f"need >= 2 usable sample sizes for {column}, got {len(points)}"
        )
    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), float(intercept), r2


@dataclass(frozen=True)
class ThresholdProbe:
    """Distinguishability record for one constructed pair at one sample size."""

    kind: str
    n: int
    c: float
    rho_ab: float
    kl_mean: float
    kl_stderr: float
    test_error: float
    separation: LossRecord


def threshold_probe(
    kind: str, box: ConstraintBox, n: int, c: float, replicas: int, seed
) -> ThresholdProbe:
    """Likelihood-ratio testing on a constructed pair.

    Samples ``replicas`` paths under each hypothesis, classifies each path
    by the sign of the log-likelihood ratio (exact ties broken by a fair
    coin), and reports the average error rate together with the MC KL
    estimate between the two path laws.
    """
    if replicas < 2:
        raise ValidationError("replicas must be >= 2")
    pair = lower_bound_pair(kind, n, box, c)
    kl = kl_estimate(pair.a, pair.b, n, replicas, derive_seed(seed, 0))
    rng = np.random.default_rng(derive_seed(seed, 3))
    errors = 0
    for label, truth in ((0, pair.a), (1, pair.b)):
        paths = sample_paths(phipsi_to_theta(truth), n, replicas, derive_seed(seed, 1 + label))
        la = loglik_batch(pair.a, paths.observed)
        lb = loglik_batch(pair.b, paths.observed)
        diff = la - lb
        pick_b = (diff < 0) | ((diff == 0) & (rng.random(replicas) < 0.5))
        errors += int(np.sum(pick_b != bool(label)))
    return ThresholdProbe(
        kind=kind, n=n, c=c, rho_ab=pair.rho_ab,
        kl_mean=kl.mean, kl_stderr=kl.stderr,
        test_error=errors / (2.0 * replicas),
        separation=pair.separation,
    )


__all__ = [
    "PAIR_KINDS",
    "SWEEP_COLUMNS",
    "SweepConfig",
    "HypothesisPair",
    "ThresholdProbe",
    "lower_bound_pair",
    "rate_sweep",
    "sweep_rows_to_csv",
    "slope_fit",
    "threshold_probe",
]
