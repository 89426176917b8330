"""Parameter-regime classification of 3x3 interaction matrices.

The tabulated classes 19-25 are strict sign patterns on the six off-diagonal
differences alpha_ij = a_ii - a_ji combined with strict inequalities on the
three invasion sums built from beta_ij = (a_jj - a_ij)/(a_ii a_jj - a_ij a_ji).
A matrix belongs to a class when some relabeling (permutation) of the three
species satisfies every inequality strictly.  Margins within a degeneracy
band are refused, never rounded.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .models import CompetitiveMap

__all__ = [
    "AlphaBeta",
    "ClassificationResult",
    "ClassifyError",
    "DegenerateDenominatorError",
    "TieOnBoundaryError",
    "OUT_OF_TABULATED_RANGE",
    "CLASS_RULES",
    "compute_alpha_beta",
    "classify_table1",
    "classify_and_analyze",
]

OUT_OF_TABULATED_RANGE = "out_of_tabulated_range"
DEGENERACY_BAND = 1e-10


class ClassifyError(RuntimeError):
    pass


class DegenerateDenominatorError(ClassifyError):
    """Some 2x2 block a_ii a_jj - a_ij a_ji vanishes; beta is undefined."""


class TieOnBoundaryError(ClassifyError):
    """Some decisive margin sits inside the degeneracy band; classification
    would not be stable under perturbation, so it is refused."""


@dataclass(frozen=True)
class AlphaBeta:
    """Off-diagonal tables alpha_ij = a_ii - a_ji and
    beta_ij = (a_jj - a_ij)/(a_ii a_jj - a_ij a_ji); diagonals are NaN."""

    alpha: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class ClassificationResult:
    class_id: int | str
    permutation: tuple[int, int, int]
    alpha_beta: AlphaBeta
    margins: dict[str, float] = field(default_factory=dict)

    @property
    def tabulated(self) -> bool:
        return isinstance(self.class_id, int)


# Sign pattern order: (alpha_12, alpha_13, alpha_21, alpha_23, alpha_31, alpha_32).
# Sum conditions compare a_12 b_23 + a_13 b_32 ("inv1"), a_21 b_13 + a_23 b_31
# ("inv2"), a_31 b_12 + a_32 b_21 ("inv3") against 1.
CLASS_RULES: dict[int, dict] = {
    19: {"signs": (+1, +1, -1, -1, -1, -1), "sums": {"inv1": "<"}},
    20: {"signs": (-1, -1, -1, -1, +1, -1), "sums": {"inv1": "<", "inv3": "<"}},
    21: {"signs": (-1, -1, -1, +1, -1, +1), "sums": {"inv1": ">", "inv2": "<", "inv3": "<"}},
    22: {"signs": (+1, +1, -1, -1, +1, -1), "sums": {"inv1": "<", "inv2": ">"}},
    23: {"signs": (+1, +1, +1, +1, -1, -1), "sums": {"inv3": ">"}},
    24: {"signs": (+1, +1, +1, +1, -1, +1), "sums": {"inv1": ">", "inv3": ">"}},
    25: {"signs": (+1, +1, +1, -1, +1, -1), "sums": {"inv1": "<", "inv2": ">", "inv3": ">"}},
}

_ALPHA_PAIRS = ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1))


def compute_alpha_beta(A: np.ndarray) -> AlphaBeta:
    """Exact alpha/beta tables for a positive 3x3 matrix."""
    A = np.asarray(A, dtype=float)
    if A.shape != (3, 3):
        raise ValueError("classification is defined for 3x3 matrices")
    if np.any(A <= 0):
        raise ValueError("interaction matrix must be entrywise positive")
    alpha = np.full((3, 3), np.nan)
    beta = np.full((3, 3), np.nan)
    scale = float(np.max(A)) ** 2
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            alpha[i, j] = A[i, i] - A[j, i]
            den = A[i, i] * A[j, j] - A[i, j] * A[j, i]
            if abs(den) < 1e-12 * scale:
                raise DegenerateDenominatorError(
                    f"a_{i+1}{i+1} a_{j+1}{j+1} - a_{i+1}{j+1} a_{j+1}{i+1} vanishes"
                )
            beta[i, j] = (A[j, j] - A[i, j]) / den
    return AlphaBeta(alpha=alpha, beta=beta)


def _invasion_sums(A: np.ndarray, ab: AlphaBeta) -> dict[str, float]:
    b = ab.beta
    return {
        "inv1": A[0, 1] * b[1, 2] + A[0, 2] * b[2, 1],
        "inv2": A[1, 0] * b[0, 2] + A[1, 2] * b[2, 0],
        "inv3": A[2, 0] * b[0, 1] + A[2, 1] * b[1, 0],
    }


def _margins_for(A: np.ndarray, ab: AlphaBeta, rules: dict) -> dict[str, float]:
    """Signed slack of every inequality in the class; positive = satisfied."""
    margins: dict[str, float] = {}
    for sign, (i, j) in zip(rules["signs"], _ALPHA_PAIRS):
        margins[f"alpha_{i+1}{j+1}"] = sign * ab.alpha[i, j]
    sums = _invasion_sums(A, ab)
    for key, rel in rules["sums"].items():
        margins[key] = (1.0 - sums[key]) if rel == "<" else (sums[key] - 1.0)
    return margins


def classify_table1(A: np.ndarray, band: float = DEGENERACY_BAND) -> ClassificationResult:
    """Scan the six relabelings in lexicographic order against the seven
    tabulated classes; return the first strict match.

    Raises TieOnBoundaryError when any candidate's verdict depends on a
    margin inside the degeneracy band, and DegenerateDenominatorError when
    beta is undefined.  Matrices matching no tabulated class come back with
    class_id OUT_OF_TABULATED_RANGE and the identity permutation's sign
    pattern to aid a manual lookup.
    """
    A = np.asarray(A, dtype=float)
    scale = max(1.0, float(np.max(np.abs(A))))
    alpha_band = band * scale  # alpha margins scale with A, sum margins are dimensionless
    ambiguous: list[tuple[int, tuple[int, ...]]] = []
    for perm in permutations(range(3)):
        P = A[np.ix_(perm, perm)]
        ab = compute_alpha_beta(P)
        for class_id, rules in CLASS_RULES.items():
            margins = _margins_for(P, ab, rules)
            decided = []
            for key, val in margins.items():
                b = alpha_band if key.startswith("alpha") else band
                decided.append(1 if val > b else (-1 if val < -b else 0))
            if all(d > 0 for d in decided):
                if ambiguous:
                    # an earlier candidate could flip to a match under a
                    # band-sized perturbation, changing the verdict
                    raise TieOnBoundaryError(
                        f"candidates {ambiguous} sit on the boundary ahead of a "
                        f"clean match for class {class_id}; refusing to classify"
                    )
                return ClassificationResult(class_id, tuple(perm), ab, margins)
            if all(d >= 0 for d in decided) and any(d == 0 for d in decided):
                ambiguous.append((class_id, perm))
    if ambiguous:
        raise TieOnBoundaryError(
            f"margins within {band:g} of zero for candidates {ambiguous}; refusing to classify"
        )
    identity_ab = compute_alpha_beta(A)
    sign_pattern = {
        f"alpha_{i+1}{j+1}": float(np.sign(identity_ab.alpha[i, j])) for i, j in _ALPHA_PAIRS
    }
    return ClassificationResult(OUT_OF_TABULATED_RANGE, (0, 1, 2), identity_ab, sign_pattern)


def classify_and_analyze(m: CompetitiveMap) -> dict:
    """Join the Table-1 classification with the interior fixed-point record
    and the existence verdicts; inconsistencies between the regime and the
    computed spectrum are reported as warnings, never corrected."""
    from .analysis import NoInteriorFixedPointError, SType, find_interior_fixed_point
    from .existence import ricker_condition, verify_existence

    if m.params is None:
        raise ValueError("classification applies to builtin parameterized maps")
    result = classify_table1(m.params.A)
    warnings: list[str] = []
    interior = None
    try:
        interior = find_interior_fixed_point(m)
    except NoInteriorFixedPointError:
        warnings.append("no interior fixed point; classes 19-25 expect a unique one")
    existence = verify_existence(m)
    if not existence.passed:
        warnings.append("existence checks (A1)-(A3) failed; carrying simplex unverified")
    if m.kind == "ricker":
        rc = ricker_condition(m.params)
        if not rc.passed:
            warnings.append(
                "Ricker closed-form condition fails; carrying simplex unverified"
            )
    if result.tabulated and interior is not None:
        if interior.index != -1:
            warnings.append(f"expected index -1 in class {result.class_id}, got {interior.index}")
        if interior.s_type != SType.SADDLE:
            warnings.append(f"expected a saddle on S, got {interior.s_type}")
        mods = np.abs(interior.eigenvalues)
        expected = (
            interior.c1_holds
            and mods.shape[0] == 3
            and mods[0] < mods[1] < 1.0 < mods[2]
        )
        if not expected:
            warnings.append(f"eigenvalue moduli {mods} do not follow 0 < mu < l1 < 1 < l2")
    return {
        "classification": result,
        "interior": interior,
        "existence": existence,
        "warnings": warnings,
    }
