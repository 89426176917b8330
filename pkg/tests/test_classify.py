"""Table-based classification of 3x3 interaction matrices."""
from __future__ import annotations

from itertools import permutations

import numpy as np
import pytest

from csimplex.classify import (
    DegenerateDenominatorError,
    OUT_OF_TABULATED_RANGE,
    TieOnBoundaryError,
    classify_and_analyze,
    classify_table1,
    compute_alpha_beta,
)
from csimplex.models import ParameterSet, make_ricker
from conftest import A_CLASS19, build_model


def brute_force_matches(A: np.ndarray) -> list[tuple[int, tuple[int, ...]]]:
    """Independent oracle: literal transcription of the seven inequality
    systems, evaluated for every relabeling with no early exit."""
    rules = {
        19: ([("12", 1), ("13", 1), ("21", -1), ("23", -1), ("31", -1), ("32", -1)],
             [("s1", -1)]),
        20: ([("12", -1), ("13", -1), ("21", -1), ("23", -1), ("31", 1), ("32", -1)],
             [("s1", -1), ("s3", -1)]),
        21: ([("12", -1), ("13", -1), ("21", -1), ("23", 1), ("31", -1), ("32", 1)],
             [("s1", 1), ("s2", -1), ("s3", -1)]),
        22: ([("12", 1), ("13", 1), ("21", -1), ("23", -1), ("31", 1), ("32", -1)],
             [("s1", -1), ("s2", 1)]),
        23: ([("12", 1), ("13", 1), ("21", 1), ("23", 1), ("31", -1), ("32", -1)],
             [("s3", 1)]),
        24: ([("12", 1), ("13", 1), ("21", 1), ("23", 1), ("31", -1), ("32", 1)],
             [("s1", 1), ("s3", 1)]),
        25: ([("12", 1), ("13", 1), ("21", 1), ("23", -1), ("31", 1), ("32", -1)],
             [("s1", -1), ("s2", 1), ("s3", 1)]),
    }
    matches = []
    for perm in permutations(range(3)):
        P = A[np.ix_(perm, perm)]
        alpha = {}
        beta = {}
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                alpha[f"{i+1}{j+1}"] = P[i, i] - P[j, i]
                beta[f"{i+1}{j+1}"] = (P[j, j] - P[i, j]) / (
                    P[i, i] * P[j, j] - P[i, j] * P[j, i]
                )
        sums = {
            "s1": P[0, 1] * beta["23"] + P[0, 2] * beta["32"],
            "s2": P[1, 0] * beta["13"] + P[1, 2] * beta["31"],
            "s3": P[2, 0] * beta["12"] + P[2, 1] * beta["21"],
        }
        for cid, (alpha_rules, sum_rules) in rules.items():
            ok = all(sign * alpha[key] > 0 for key, sign in alpha_rules)
            ok = ok and all(sign * (sums[key] - 1.0) > 0 for key, sign in sum_rules)
            if ok:
                matches.append((cid, perm))
    return matches


class TestAlphaBeta:
    def test_reference_values(self):
        ab = compute_alpha_beta(A_CLASS19)
        assert ab.alpha[0, 1] == pytest.approx(0.5)
        assert ab.alpha[0, 2] == pytest.approx(0.5)
        assert ab.alpha[1, 0] == pytest.approx(-0.2)
        assert ab.alpha[1, 2] == pytest.approx(-1.0)
        assert ab.alpha[2, 0] == pytest.approx(-0.2)
        assert ab.alpha[2, 1] == pytest.approx(-1.0)
        assert ab.beta[1, 2] == pytest.approx(1.0 / 3.0)
        assert ab.beta[2, 1] == pytest.approx(1.0 / 3.0)

    def test_all_equal_matrix_degenerate(self):
        with pytest.raises(DegenerateDenominatorError):
            compute_alpha_beta(np.ones((3, 3)))

    def test_relabeling_permutes_tables(self):
        rng = np.random.default_rng(1)
        A = rng.uniform(0.5, 2.0, (3, 3))
        ab = compute_alpha_beta(A)
        perm = (2, 0, 1)
        ab_p = compute_alpha_beta(A[np.ix_(perm, perm)])
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                assert ab_p.alpha[i, j] == pytest.approx(ab.alpha[perm[i], perm[j]])
                assert ab_p.beta[i, j] == pytest.approx(ab.beta[perm[i], perm[j]])


class TestClassify:
    def test_reference_is_class_19_identity(self):
        res = classify_table1(A_CLASS19)
        assert res.class_id == 19
        assert res.permutation == (0, 1, 2)
        assert res.margins["inv1"] == pytest.approx(0.2, abs=1e-12)

    def test_agrees_with_brute_force(self):
        rng = np.random.default_rng(41)
        seen = 0
        for _ in range(400):
            A = rng.uniform(0.2, 3.0, (3, 3))
            matches = brute_force_matches(A)
            try:
                res = classify_table1(A)
            except (DegenerateDenominatorError, TieOnBoundaryError):
                continue
            if res.tabulated:
                seen += 1
                assert (res.class_id, res.permutation) in matches
                assert all(cid == res.class_id for cid, _ in matches)
            else:
                assert not matches
        assert seen > 20

    def test_no_double_match_within_permutation(self):
        rng = np.random.default_rng(43)
        for _ in range(300):
            A = rng.uniform(0.2, 3.0, (3, 3))
            try:
                matches = brute_force_matches(A)
            except ZeroDivisionError:
                continue
            per_perm: dict[tuple, list[int]] = {}
            for cid, perm in matches:
                per_perm.setdefault(perm, []).append(cid)
            for cids in per_perm.values():
                assert len(cids) == 1

    def test_permutation_invariance(self):
        rng = np.random.default_rng(47)
        count = 0
        while count < 100:
            A = rng.uniform(0.2, 3.0, (3, 3))
            try:
                res = classify_table1(A)
            except (DegenerateDenominatorError, TieOnBoundaryError):
                continue
            count += 1
            perm = tuple(rng.permutation(3))
            res_p = classify_table1(A[np.ix_(perm, perm)])
            assert res_p.class_id == res.class_id

    def test_scale_invariance(self):
        res = classify_table1(A_CLASS19)
        for c in (0.01, 0.5, 7.0, 300.0):
            assert classify_table1(c * A_CLASS19).class_id == res.class_id

    def test_all_equal_refused(self):
        with pytest.raises(DegenerateDenominatorError):
            classify_table1(np.full((3, 3), 2.5))

    def test_boundary_tie_refused(self):
        A = A_CLASS19.copy()
        A[1, 0] = A[0, 0]  # forces alpha_12 = 0 exactly
        with pytest.raises(TieOnBoundaryError):
            classify_table1(A)

    def test_out_of_tabulated_range_reports_signs(self):
        # mutualistic-looking column dominance matches no tabulated class
        A = np.array([[1.0, 0.2, 0.2], [0.2, 1.0, 0.2], [0.2, 0.2, 1.0]])
        res = classify_table1(A)
        assert res.class_id == OUT_OF_TABULATED_RANGE
        assert not res.tabulated
        assert set(res.margins) == {
            "alpha_12", "alpha_13", "alpha_21", "alpha_23", "alpha_31", "alpha_32",
        }


class TestClassifyAndAnalyze:
    def test_reference_joined_report(self):
        rep = classify_and_analyze(build_model("leslie_gower", A_CLASS19))
        assert rep["classification"].class_id == 19
        assert rep["interior"].index == -1
        assert rep["warnings"] == []

    def test_ricker_in_condition_same_class(self):
        rep = classify_and_analyze(build_model("ricker", A_CLASS19))
        assert rep["classification"].class_id == 19
        assert rep["interior"].index == -1
        assert rep["warnings"] == []

    def test_ricker_violating_condition_warns(self):
        m = make_ricker(ParameterSet(r=np.full(3, 5.0), A=A_CLASS19))
        rep = classify_and_analyze(m)
        assert rep["classification"].class_id == 19
        assert any("unverified" in w for w in rep["warnings"])
