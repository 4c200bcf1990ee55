"""Law of three consecutive observations and associated moment geometry.

The K x K x K tensor of probabilities of ``(Y_1, Y_2, Y_3)`` identifies the
two-state model up to label switching.  In frontier coordinates the tensor
decomposes as

    psi1^3 + r (psi2 psi2 psi1 + psi1 psi2 psi2)
           + phi2 r psi2 psi1 psi2 - phi1 phi2 phi3 r psi2 psi2 psi2

with r = r(phi) = (1 - phi1^2) phi2 phi3^2 / 4.  The coefficient vector
m = (r, phi2 r, phi1 phi2 phi3 r) is invertible back to phi wherever
r != 0, and a max-of-five-terms pseudo-distance ``rho`` built from m and
psi is equivalent (up to constants) to the Euclidean distance between
triple-law tensors.  This module provides both directions, the distance,
a numerical probe of the equivalence constants, and the structural factors
of the pointwise moduli of continuity.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProbeError, NonInvertibleMomentError, ValidationError
from .params import (
    ConstraintBox,
    PhiPsiParams,
    ThetaParams,
    sample_phipsi,
    stationary_dist,
    switch_labels,
)

MASS_TOL = 1e-12
ENTRY_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class TripleLaw:
    """Joint law of three consecutive observations as a dense K^3 tensor."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=float)
        if arr.ndim != 3 or len(set(arr.shape)) != 1:
            raise ValidationError(f"probs must be a K x K x K tensor, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("probs contains non-finite entries")
        if np.any(arr < -ENTRY_TOL):
            raise ValidationError(f"probs has a negative entry: min={arr.min()}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def n_symbols(self) -> int:
        return self.probs.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.probs.sum())

    def distance(self, other: "TripleLaw") -> float:
        """Euclidean (Frobenius) distance between the two tensors."""
        return float(np.linalg.norm(self.probs - other.probs))

    def to_csv(self) -> str:
        """Rows (a, b, c, prob) with 1-based symbol indices, row-major order."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "b", "c", "prob"])
        K = self.n_symbols
        for a in range(K):
            for b in range(K):
                for c in range(K):
                    w.writerow([a + 1, b + 1, c + 1, repr(float(self.probs[a, b, c]))])
        return buf.getvalue()

    def to_json(self) -> str:
        """Flat row-major (a-major) array of the K^3 probabilities."""
        return json.dumps(self.probs.ravel().tolist())

    @classmethod
    def from_json(cls, text: str) -> "TripleLaw":
        flat = np.asarray(json.loads(text), dtype=float)
        K = round(flat.size ** (1 / 3))
        if K**3 != flat.size:
            raise ValidationError(f"array length {flat.size} is not a cube")
        return cls(probs=flat.reshape(K, K, K))


@dataclass(frozen=True)
class MomentVector:
    """Coefficients m = (r, phi2 r, phi1 phi2 phi3 r) of the triple law."""

    m1: float
    m2: float
    m3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.m1, self.m2, self.m3])


def r_of_phi(phi) -> float:
    """r(phi) = (1 - phi1^2) phi2 phi3^2 / 4; vanishes exactly on the i.i.d. set."""
    phi1, phi2, phi3 = phi
    return 0.25 * (1.0 - phi1 * phi1) * phi2 * phi3 * phi3


def m_of_phi(phi) -> MomentVector:
    phi1, phi2, phi3 = phi
    r = r_of_phi(phi)
    return MomentVector(m1=r, m2=phi2 * r, m3=phi1 * phi2 * phi3 * r)


def phi_of_m(m: MomentVector) -> np.ndarray:
    """Invert m back to (phi1, phi2, phi3); requires m1 != 0 and m2 > 0.

    The discriminant 4 m1^2 m2 + m3^2 is nonnegative on the image of
    m_of_phi, and the inverse is exact there.
    """
    if m.m1 == 0.0 or m.m2 <= 0.0:
        raise NonInvertibleMomentError(
            f"moment vector not invertible: m1={m.m1}, m2={m.m2}"
        )
    disc = 4.0 * m.m1 * m.m1 * m.m2 + m.m3 * m.m3
    if disc <= 0.0:
        raise NonInvertibleMomentError(f"nonpositive discriminant {disc}")
    root = math.sqrt(disc)
    return np.array([m.m3 / root, m.m2 / m.m1, root / m.m2])


def triple_law_theta(theta: ThetaParams) -> TripleLaw:
    """Triple law in native coordinates.

    p3 = pi(0) g (x) f0 (x) g + pi(1) h (x) f1 (x) h with
    g = (1-p) f0 + p f1 and h = q f0 + (1-q) f1.
    """
    pi = stationary_dist(theta.p, theta.q)
    g = (1.0 - theta.p) * theta.f0 + theta.p * theta.f1
    h = theta.q * theta.f0 + (1.0 - theta.q) * theta.f1
    t = pi[0] * np.einsum("a,b,c->abc", g, theta.f0, g) + pi[1] * np.einsum(
        "a,b,c->abc", h, theta.f1, h
    )
    return TripleLaw(probs=t)


def triple_law_phipsi(pp: PhiPsiParams) -> TripleLaw:
    """Triple law in frontier coordinates via the rank-one expansion."""
    r = r_of_phi((pp.phi1, pp.phi2, pp.phi3))
    a, b = pp.psi1, pp.psi2
    t = (
        np.einsum("a,b,c->abc", a, a, a)
        + r * (np.einsum("a,b,c->abc", b, b, a) + np.einsum("a,b,c->abc", a, b, b))
        + pp.phi2 * r * np.einsum("a,b,c->abc", b, a, b)
        - pp.phi1 * pp.phi2 * pp.phi3 * r * np.einsum("a,b,c->abc", b, b, b)
    )
    return TripleLaw(probs=t)


def _sign(x: float) -> float:
    return 1.0 if x >= 0.0 else -1.0


def rho(a: PhiPsiParams, b: PhiPsiParams) -> float:
    """Max-of-five pseudo-distance, invariant under label switching.

    The third moment and the psi2 direction enter with the sign of
    <psi2, psi2~> (sign(0) = +1), which absorbs the switch symmetry.
    """
    ma = m_of_phi((a.phi1, a.phi2, a.phi3))
    mb = m_of_phi((b.phi1, b.phi2, b.phi3))
    s = _sign(float(np.dot(a.psi2, b.psi2)))
    terms = (
        abs(ma.m1 - mb.m1),
        abs(ma.m2 - mb.m2),
        abs(ma.m3 - s * mb.m3),
        float(np.linalg.norm(a.psi1 - b.psi1)),
        max(abs(ma.m1), abs(mb.m1)) * float(np.linalg.norm(a.psi2 - s * b.psi2)),
    )
    return max(terms)


@dataclass(frozen=True)
class RatioProbeSummary:
    """Empirical range of ||Delta p3|| / rho over randomly sampled pairs."""

    min_ratio: float
    max_ratio: float
    pairs_used: int
    pairs_skipped: int

    @property
    def spread(self) -> float:
        return self.max_ratio / self.min_ratio


def equivalence_ratio_probe(
    box: ConstraintBox, pair_count: int, seed
) -> RatioProbeSummary:
    """Probe the constants in the two-sided comparison of rho with the tensor norm.

    Pairs with rho = 0 (e.g. label-switched copies) are skipped; if every
    pair degenerates a DegenerateProbeError is raised.
    """
    if pair_count < 1:
        raise ValidationError("pair_count must be >= 1")
    ratios = []
    skipped = 0
    for i in range(pair_count):
        x = sample_phipsi(box, [seed, 2 * i])
        y = sample_phipsi(box, [seed, 2 * i + 1])
        d = rho(x, y)
        if d == 0.0:
            skipped += 1
            continue
        ratios.append(triple_law_phipsi(x).distance(triple_law_phipsi(y)) / d)
    if not ratios:
        raise DegenerateProbeError("all sampled pairs had rho = 0")
    return RatioProbeSummary(
        min_ratio=min(ratios),
        max_ratio=max(ratios),
        pairs_used=len(ratios),
        pairs_skipped=skipped,
    )


@dataclass(frozen=True)
class ModulusBounds:
    """Structural factors of the pointwise moduli of continuity.

    Unspecified multiplicative constants are normalized out: ``applicable_*``
    flags the smallness condition on eta and ``omega_*`` the rate factor.
    Calibrating constants against simulations is an experiment, not a
    return value.
    """

    applicable_1: bool
    applicable_2: bool
    applicable_3: bool
    omega_1: float
    omega_2: float
    omega_3: float


def modulus_bounds(phi, eta: float) -> ModulusBounds:
    if not (0.0 <= eta <= 1.0):
        raise ValidationError(f"eta must lie in [0, 1]: {eta}")
    phi1, phi2, phi3 = phi
    s = 1.0 - phi1 * phi1
    if eta == 0.0:
        return ModulusBounds(False, False, False, 0.0, 0.0, 0.0)
    gate_13 = s * phi2 * phi2 * phi3**3
    gate_2 = s * abs(phi2) * phi3 * phi3

    def rate(den: float) -> float:
        return eta / den if den > 0.0 else math.inf

    return ModulusBounds(
        applicable_1=eta < gate_13,
        applicable_2=eta < gate_2,
        applicable_3=eta < gate_13,
        omega_1=rate(phi2 * phi2 * phi3**3),
        omega_2=rate(s * abs(phi2) * phi3 * phi3),
        omega_3=rate(s * phi2 * phi2 * phi3 * phi3),
    )


__all__ = [
    "TripleLaw",
    "MomentVector",
    "RatioProbeSummary",
    "ModulusBounds",
    "r_of_phi",
    "m_of_phi",
    "phi_of_m",
    "triple_law_theta",
    "triple_law_phipsi",
    "rho",
    "equivalence_ratio_probe",
    "modulus_bounds",
    "switch_labels",
]
