"""Tests for data loading and screening."""

import os

import numpy as np
import pytest

from bmie.ingest import (
    MIN_AT_BATS,
    BattingRecord,
    DataError,
    ExpressionMatrix,
    PlayerSplit,
    load_batting,
    load_expression,
    select_period,
)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
BATTING = os.path.join(FIXTURES, "batting.csv")
EXPRESSION = os.path.join(FIXTURES, "expression.tsv")


class TestLoadBattingFixture:
    def test_row_count_and_types(self):
        records = load_batting(BATTING)
        assert len(records) == 158
        assert all(isinstance(r, BattingRecord) for r in records)
        assert all(r.at_bats >= r.hits >= 0 for r in records)

    def test_pitcher_flag_parsed(self):
        records = load_batting(BATTING)
        pitchers = {r.player_id for r in records if r.is_pitcher}
        assert pitchers == {"P025"}


class TestLoadBattingEdgeCases:
    def _write(self, tmp_path, text, name="batting.csv"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            load_batting(str(tmp_path / "nope.csv"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataError, match="empty"):
            load_batting(self._write(tmp_path, ""))

    def test_wrong_header(self, tmp_path):
        text = "name,month,hits,at_bats,is_pitcher\nP1,1,10,30,0\n"
        with pytest.raises(DataError, match="header"):
            load_batting(self._write(tmp_path, text))

    def test_header_case_insensitive(self, tmp_path):
        text = "Player_ID,Month,Hits,At_Bats,Is_Pitcher\nP1,1,10,30,0\nP1,2,12,40,0\n"
        assert len(load_batting(self._write(tmp_path, text))) == 2

    def test_malformed_rows_warn_with_line_number(self, tmp_path):
        text = (
            "player_id,month,hits,at_bats,is_pitcher\n"
            "P1,1,10,30,0\n"
            "P1,x,10,30,0\n"       # non-integer month     (line 3)
            "P1,2,31,30,0\n"       # hits > at_bats        (line 4)
            "P1,0,10,30,0\n"       # month below 1         (line 5)
            "P1,3,10,30,0\n"
        )
        with pytest.warns(UserWarning) as rec:
            records = load_batting(self._write(tmp_path, text))
        assert len(records) == 2
        messages = [str(w.message) for w in rec]
        assert any("line 3" in m for m in messages)
        assert any("line 4" in m for m in messages)
        assert any("line 5" in m for m in messages)

    def test_blank_rows_skipped_silently(self, tmp_path):
        text = "player_id,month,hits,at_bats,is_pitcher\nP1,1,10,30,0\n\n , , , , \nP1,2,9,28,0\n"
        records = load_batting(self._write(tmp_path, text))
        assert len(records) == 2

    def test_missing_pitcher_column_warns_and_keeps_row(self, tmp_path):
        text = "player_id,month,hits,at_bats,is_pitcher\nP1,1,10,30\nP1,2,9,28,0\n"
        with pytest.warns(UserWarning, match="no is_pitcher column"):
            records = load_batting(self._write(tmp_path, text))
        assert len(records) == 2
        assert not records[0].is_pitcher

    def test_empty_pitcher_value_warns_and_defaults_false(self, tmp_path):
        text = "player_id,month,hits,at_bats,is_pitcher\nP1,1,10,30,\n"
        with pytest.warns(UserWarning, match="assuming not a pitcher"):
            records = load_batting(self._write(tmp_path, text))
        assert not records[0].is_pitcher

    def test_bad_pitcher_token_skips_row(self, tmp_path):
        text = "player_id,month,hits,at_bats,is_pitcher\nP1,1,10,30,maybe\nP1,2,9,28,0\n"
        with pytest.warns(UserWarning, match="is_pitcher"):
            records = load_batting(self._write(tmp_path, text))
        assert len(records) == 1

    def test_all_rows_malformed(self, tmp_path):
        text = "player_id,month,hits,at_bats,is_pitcher\nP1,x,10,30,0\n"
        with pytest.warns(UserWarning):
            with pytest.raises(DataError, match="no usable rows"):
                load_batting(self._write(tmp_path, text))


class TestSelectPeriod:
    def test_fixture_screening(self):
        records = load_batting(BATTING)
        splits = select_period(records, 1)
        ids = [s.player_id for s in splits]
        assert len(splits) == 24
        assert ids == sorted(ids)
        # Pitcher and the two small-sample players are screened out.
        assert "P025" not in ids   # pitcher
        assert "P026" not in ids   # too few first-period at-bats
        assert "P027" not in ids   # too few remaining at-bats

    def test_totals_match_raw_records(self):
        records = load_batting(BATTING)
        splits = select_period(records, 2)
        one = {s.player_id: s for s in splits}["P003"]
        raw = [r for r in records if r.player_id == "P003"]
        assert one.hits_first == sum(r.hits for r in raw if r.month <= 2)
        assert one.at_bats_first == sum(r.at_bats for r in raw if r.month <= 2)
        assert one.hits_rest == sum(r.hits for r in raw if r.month > 2)
        assert one.at_bats_rest == sum(r.at_bats for r in raw if r.month > 2)

    def test_min_at_bats_boundary(self):
        recs = [
            BattingRecord("A", 1, 3, MIN_AT_BATS, False),
            BattingRecord("A", 2, 3, MIN_AT_BATS, False),
            BattingRecord("B", 1, 3, MIN_AT_BATS - 1, False),
            BattingRecord("B", 2, 3, MIN_AT_BATS, False),
        ]
        splits = select_period(recs, 1)
        assert [s.player_id for s in splits] == ["A"]

    def test_all_months_in_first_period_screens_everyone(self):
        recs = [BattingRecord("A", 1, 5, 30, False)]
        assert select_period(recs, 6) == []

    def test_bad_period(self):
        with pytest.raises(ValueError):
            select_period([], 0)

    def test_result_type(self):
        records = load_batting(BATTING)
        assert all(isinstance(s, PlayerSplit) for s in select_period(records, 1))


class TestLoadExpressionFixture:
    def test_shape_and_groups(self):
        mat = load_expression(EXPRESSION, group_split=5)
        assert isinstance(mat, ExpressionMatrix)
        assert len(mat.genes) == 40
        assert len(mat.samples) == 10
        assert mat.values.shape == (40, 10)
        assert mat.group1.shape == (40, 5)
        assert mat.group2.shape == (40, 5)
        assert np.isfinite(mat.values).all()

    def test_gene_labels(self):
        mat = load_expression(EXPRESSION, group_split=5)
        assert mat.genes[0] == "G001"
        assert mat.genes[-1] == "G040"


class TestLoadExpressionEdgeCases:
    def _write(self, tmp_path, text, name="expr.txt"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    def test_comma_delimited_variant(self, tmp_path):
        text = "gene,S1,S2,S3\nG1,1.0,2.0,3.0\nG2,4.0,5.0,6.0\n"
        mat = load_expression(self._write(tmp_path, text), group_split=1)
        assert mat.values.shape == (2, 3)
        assert mat.group1.shape == (2, 1)

    def test_ragged_row_rejected_with_name(self, tmp_path):
        text = "gene\tS1\tS2\nG1\t1.0\t2.0\nG2\t1.0\n"
        with pytest.raises(DataError, match="'G2'"):
            load_expression(self._write(tmp_path, text), group_split=1)

    def test_non_numeric_rejected_with_name(self, tmp_path):
        text = "gene\tS1\tS2\nG1\t1.0\tNA\n"
        with pytest.raises(DataError, match="'G1'"):
            load_expression(self._write(tmp_path, text), group_split=1)

    def test_non_finite_rejected(self, tmp_path):
        text = "gene\tS1\tS2\nG1\t1.0\tinf\n"
        with pytest.raises(DataError, match="non-finite"):
            load_expression(self._write(tmp_path, text), group_split=1)

    def test_too_few_samples(self, tmp_path):
        text = "gene\tS1\nG1\t1.0\n"
        with pytest.raises(DataError, match="at least 2"):
            load_expression(self._write(tmp_path, text), group_split=1)

    def test_no_gene_rows(self, tmp_path):
        text = "gene\tS1\tS2\n"
        with pytest.raises(DataError, match="no gene rows"):
            load_expression(self._write(tmp_path, text), group_split=1)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            load_expression(str(tmp_path / "nope.tsv"), group_split=1)

    @pytest.mark.parametrize("split", [0, 10, 15])
    def test_bad_group_split(self, split):
        with pytest.raises(DataError, match="group_split"):
            load_expression(EXPRESSION, group_split=split)
