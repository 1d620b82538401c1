from __future__ import annotations

import json

import pytest
from pydantic import ValidationError

from plapmax.schemas import (
    SCHEMA_VERSION,
    AutonomousDocument,
    BranchSnapshot,
    BranchSnapshots,
    EigenDocument,
    EigenReport,
    IntervalReport,
    Normalization,
    PiconeReport,
    Sign,
    SignClass,
    TerminationReason,
    Verdict,
    WeightRegime,
)


def _eigen_document(lam: float = 9.87) -> EigenDocument:
    return EigenDocument(
        lam=lam,
        normalization=Normalization.WEIGHTED,
        sign_class=SignClass.POSITIVE_WEIGHT_SIDE,
        iterations=12,
        residual_norm=1e-9,
        u=[0.0, 1.0, 0.0],
    )


class TestEnums:
    def test_sign_factor_and_label(self):
        assert Sign.PLUS.factor == 1.0
        assert Sign.MINUS.factor == -1.0
        assert Sign.MINUS.label == "minus"

    def test_verdict_values(self):
        assert [v.value for v in Verdict] == [
            "Positive",
            "Negative",
            "SignChanging",
            "Zero",
            "Diverged",
        ]

    def test_termination_reasons(self):
        assert TerminationReason("max_norm") is TerminationReason.MAX_NORM
        with pytest.raises(ValueError):
            TerminationReason("converged")


class TestEigenDocuments:
    def test_lambda_alias_on_output(self):
        data = json.loads(_eigen_document().model_dump_json(by_alias=True))
        assert data["lambda"] == 9.87
        assert "lam" not in data

    def test_report_versioned(self):
        report = EigenReport(
            regime=WeightRegime.NONNEGATIVE, p=2.0, node_count=3, lambda_plus=_eigen_document()
        )
        data = json.loads(report.model_dump_json(by_alias=True))
        assert data["schema_version"] == SCHEMA_VERSION
        assert data["lambda_minus"] is None
        assert data["solver_stats"]["total_solves"] == 0

    def test_rejects_unknown_sign_class(self):
        with pytest.raises(ValidationError):
            EigenDocument(
                lam=1.0,
                normalization="weighted",
                sign_class="both_sides",
                iterations=1,
                residual_norm=0.0,
                u=[],
            )


class TestBranchDocuments:
    def test_snapshot_alias(self):
        snapshots = BranchSnapshots(
            sigma=Sign.MINUS,
            every=5,
            snapshots=[BranchSnapshot(index=0, arclength=0.0, lam=9.8, norm=1e-3, u=[0.0])],
        )
        data = json.loads(snapshots.model_dump_json(by_alias=True))
        assert data["sigma"] == "-"
        assert data["snapshots"][0]["lambda"] == 9.8

    def test_autonomous_document_optional_fields(self):
        doc = AutonomousDocument(lam=1.0, sigma=Sign.PLUS, found=False)
        assert doc.verdict is None
        assert doc.residual_norm is None


class TestReports:
    def test_interval_report_defaults(self):
        report = IntervalReport(
            status="consistent",
            regime=WeightRegime.SIGN_CHANGING,
            load_sign=Sign.PLUS,
            expected_verdict=Verdict.POSITIVE,
            grid_spacing=0.5,
            contiguous=True,
            tolerance=0.5,
        )
        assert report.block is None
        assert report.notes == []

    def test_picone_report_counts_failures(self):
        report = PiconeReport(
            p=2.0,
            trials=10,
            eps=1e-6,
            min_gap=0.0,
            all_nonnegative=True,
            equality_gap=1e-12,
            max_tolerance=1e-10,
        )
        assert report.failures == 0
        assert report.schema_version == SCHEMA_VERSION
