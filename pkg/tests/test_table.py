import pytest

from ofdclean.table import (
    CellRef,
    ColumnStats,
    ConfigError,
    DataError,
    DatasetConfig,
    Table,
    column_stats,
    load_csv,
    write_csv,
)

NUM_AB = DatasetConfig(column_types={"a": "number"})


class TestLoadCsv:
    def test_empty_field_becomes_null(self):
        table = load_csv("a,b\n1,\n", NUM_AB)
        assert table.cell(0, "b") is None
        assert table.cell(0, "a") == "1"

    def test_whitespace_only_field_becomes_null(self):
        table = load_csv("a,b\n1,   \n", NUM_AB)
        assert table.cell(0, "b") is None

    def test_ragged_row(self):
        with pytest.raises(DataError, match="row 0"):
            load_csv("a,b\nx\n", DatasetConfig())

    def test_bad_number_reports_cell(self):
        with pytest.raises(DataError, match=r"\(1, a\)"):
            load_csv("a\n5\nnope\n", NUM_AB)

    def test_bad_timestamp_reports_cell(self):
        config = DatasetConfig(column_types={"ts": "timestamp"})
        load_csv("ts\n2023-01-01T10:00:00\n", config)
        with pytest.raises(DataError, match=r"\(0, ts\)"):
            load_csv("ts\n2023-01-01 10:00\n", config)

    def test_missing_header(self):
        with pytest.raises(DataError, match="header"):
            load_csv("", DatasetConfig())

    def test_shape(self):
        rows = "\n".join(f"{i},x" for i in range(10))
        table = load_csv("a,b\n" + rows + "\n", NUM_AB)
        assert table.shape == (10, 2)

    def test_unknown_column_type_rejected(self):
        with pytest.raises(ConfigError):
            DatasetConfig(column_types={"a": "decimal"})


class TestWriteCsv:
    def test_round_trip(self):
        source = 'a,b\n1,x\n2.5,"quoted, comma"\n,\n'
        table = load_csv(source, NUM_AB)
        assert load_csv(write_csv(table), NUM_AB) == table

    def test_null_cell_becomes_empty_field(self):
        table = Table((("a", "text"), ("b", "text")), ((None, "x"),))
        assert write_csv(table) == "a,b\n,x\n"
        # a lone empty field is quoted so the row is not a blank line
        single = Table((("a", "text"),), ((None,),))
        assert write_csv(single) == 'a\n""\n'
        assert load_csv(write_csv(single), DatasetConfig()) == single

    def test_comma_value_is_quoted(self):
        table = Table((("a", "text"),), (("x,y",),))
        assert write_csv(table) == 'a\n"x,y"\n'

    def test_quote_escaping_round_trips(self):
        table = Table((("a", "text"),), (('say "hi"',),))
        assert load_csv(write_csv(table), DatasetConfig()) == table


class TestCellAccess:
    TABLE = load_csv("a,b\n1,x\n2,y\n", NUM_AB)

    def test_addressing_is_total(self):
        for row in range(2):
            for column in ("a", "b"):
                assert self.TABLE.cell(row, column) is not None

    def test_number_view(self):
        assert self.TABLE.number(0, "a") == 1.0

    def test_missing_column(self):
        with pytest.raises(ConfigError):
            self.TABLE.cell(0, "zzz")

    def test_with_cells_leaves_input_unchanged(self):
        updated = self.TABLE.with_cells({CellRef(0, "b"): "z", CellRef(1, "a"): None})
        assert updated.cell(0, "b") == "z"
        assert updated.cell(1, "a") is None
        assert self.TABLE.cell(0, "b") == "x"
        assert self.TABLE.cell(1, "a") == "2"


class TestColumnStats:
    def test_most_frequent(self):
        table = load_csv("c\na\na\nb\n", DatasetConfig())
        assert column_stats(table, "c").most_frequent == "a"

    def test_tie_breaks_lexicographically(self):
        table = load_csv("c\nb\na\n", DatasetConfig())
        assert column_stats(table, "c").most_frequent == "a"

    def test_median_is_lower_middle(self):
        table = load_csv("n\n3\n1\n2\n4\n", DatasetConfig(column_types={"n": "number"}))
        stats = column_stats(table, "n")
        assert stats.median == 2
        assert stats.minimum == 1
        assert stats.maximum == 4

    def test_all_null_column_unavailable(self):
        table = load_csv("c\n\n\n", DatasetConfig())
        assert column_stats(table, "c") == ColumnStats(available=False)

    def test_nulls_excluded(self):
        table = load_csv("n\n5\n\n7\n", DatasetConfig(column_types={"n": "number"}))
        stats = column_stats(table, "n")
        assert stats.median == 5
        assert stats.maximum == 7
