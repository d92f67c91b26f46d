"""Tabular ingest tests: manifest, KPI tables, roster, and the join.

Every malformed input is exercised with the exact raw text that should
appear back in the report, so a data problem can always be traced to
the offending cell.
"""

import pytest

from circity.ingest import (
    CAPACITY_KEY,
    SchemaError,
    load_dataset,
    read_kpi_table,
    read_manifest,
    read_roster,
)
from circity.model import default_registry


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# ---- 1) Manifest ----


class TestManifest:
    def test_paths_resolve_relative_to_manifest(self, tmp_path):
        sub = tmp_path / "data"
        sub.mkdir()
        manifest = _write(sub / "manifest.csv", "kpi,path\nD1,tables/d1.csv\n")
        entries = read_manifest(manifest)
        assert entries == {"D1": sub / "tables" / "d1.csv"}

    def test_duplicate_kpi_rejected(self, tmp_path):
        manifest = _write(tmp_path / "m.csv", "kpi,path\nD1,a.csv\nD1,b.csv\n")
        with pytest.raises(SchemaError, match="D1"):
            read_manifest(manifest)

    def test_missing_column_rejected(self, tmp_path):
        manifest = _write(tmp_path / "m.csv", "kpi,file\nD1,a.csv\n")
        with pytest.raises(SchemaError, match="path"):
            read_manifest(manifest)

    def test_blank_rows_skipped(self, tmp_path):
        manifest = _write(tmp_path / "m.csv", "kpi,path\n\nW3,w3.csv\n")
        assert list(read_manifest(manifest)) == ["W3"]


# ---- 2) KPI tables ----


class TestKpiTable:
    def test_plain_values(self, tmp_path):
        table = read_kpi_table(_write(tmp_path / "t.csv", "id,value\nA,0.5\nB,1\n"), "D3")
        assert table.values == {"A": 0.5, "B": 1.0}
        assert table.issues == ()

    def test_decimal_comma_parsed(self, tmp_path):
        table = read_kpi_table(_write(tmp_path / "t.csv", "id,value\nA,\"1,5\"\n"), "W1")
        assert table.values == {"A": 1.5}

    def test_unparseable_value_becomes_missing_with_warning(self, tmp_path):
        table = read_kpi_table(_write(tmp_path / "t.csv", "id,value\nA,abc\nB,2\n"), "W1")
        assert "A" not in table.values
        assert table.values["B"] == 2.0
        warn = [i for i in table.issues if i.severity == "warning"]
        assert len(warn) == 1
        assert "abc" in warn[0].message  # raw text is traceable
        assert warn[0].municipality_id == "A"

    def test_empty_cell_becomes_missing_with_warning(self, tmp_path):
        table = read_kpi_table(_write(tmp_path / "t.csv", "id,value\nA,\n"), "D3")
        assert table.values == {}
        assert len(table.issues) == 1

    def test_duplicate_id_keeps_first_and_reports_error(self, tmp_path):
        table = read_kpi_table(
            _write(tmp_path / "t.csv", "id,value\nA,1\nA,2\n"), "D1"
        )
        assert table.values == {"A": 1.0}
        errors = [i for i in table.issues if i.severity == "error"]
        assert len(errors) == 1
        assert "duplicate" in errors[0].message

    def test_missing_value_column_rejected_by_name(self, tmp_path):
        with pytest.raises(SchemaError, match="value"):
            read_kpi_table(_write(tmp_path / "t.csv", "id,score\nA,1\n"), "D1")

    def test_missing_id_column_rejected_by_name(self, tmp_path):
        with pytest.raises(SchemaError, match="id"):
            read_kpi_table(_write(tmp_path / "t.csv", "code,value\nA,1\n"), "D1")

    def test_custom_value_column(self, tmp_path):
        table = read_kpi_table(
            _write(tmp_path / "c.csv", "id,renewable_capacity_kw\nA,330\n"),
            CAPACITY_KEY,
            value_column="renewable_capacity_kw",
        )
        assert table.values == {"A": 330.0}


# ---- 3) Roster ----


ROSTER_HEADER = "id,name,region,population,land_area_km2,households\n"


class TestRoster:
    def test_roundtrip(self, tmp_path):
        records = read_roster(
            _write(
                tmp_path / "r.csv",
                ROSTER_HEADER + "IT1,Alpha,North,1000,12.5,420\nIT2,Beta,South,500,3.0,\n",
            )
        )
        assert [r.municipality_id for r in records] == ["IT1", "IT2"]
        assert records[0].population == 1000
        assert records[0].households == 420
        assert records[1].households is None
        assert records[1].land_area_km2 == 3.0

    def test_households_column_optional(self, tmp_path):
        records = read_roster(
            _write(
                tmp_path / "r.csv",
                "id,name,region,population,land_area_km2\nIT1,Alpha,North,10,1.0\n",
            )
        )
        assert records[0].households is None

    def test_malformed_population_rejected(self, tmp_path):
        with pytest.raises(SchemaError, match="population"):
            read_roster(_write(tmp_path / "r.csv", ROSTER_HEADER + "IT1,A,N,many,1.0,\n"))

    def test_fractional_population_rejected(self, tmp_path):
        with pytest.raises(SchemaError, match="population"):
            read_roster(_write(tmp_path / "r.csv", ROSTER_HEADER + "IT1,A,N,10.5,1.0,\n"))

    def test_nonpositive_land_area_rejected(self, tmp_path):
        with pytest.raises(SchemaError, match="land_area"):
            read_roster(_write(tmp_path / "r.csv", ROSTER_HEADER + "IT1,A,N,10,0,\n"))

    def test_duplicate_id_rejected(self, tmp_path):
        with pytest.raises(SchemaError, match="IT1"):
            read_roster(
                _write(
                    tmp_path / "r.csv",
                    ROSTER_HEADER + "IT1,A,N,10,1.0,\nIT1,B,S,20,2.0,\n",
                )
            )

    def test_missing_column_rejected(self, tmp_path):
        with pytest.raises(SchemaError, match="region"):
            read_roster(
                _write(
                    tmp_path / "r.csv",
                    "id,name,population,land_area_km2\nIT1,A,10,1.0\n",
                )
            )


# ---- 4) Join ----


def _project(tmp_path, tables, roster_rows, manifest_extra=""):
    """Lay out a manifest + KPI tables + roster under tmp_path."""
    lines = ["kpi,path"]
    for kpi, body in tables.items():
        name = f"{kpi}.csv"
        _write(tmp_path / name, body)
        lines.append(f"{kpi},{name}")
    manifest = _write(tmp_path / "manifest.csv", "\n".join(lines) + "\n" + manifest_extra)
    roster = _write(tmp_path / "roster.csv", ROSTER_HEADER + roster_rows)
    return manifest, roster


class TestLoadDataset:
    def test_values_joined_onto_roster(self, tmp_path):
        manifest, roster = _project(
            tmp_path,
            {"D1": "id,value\nIT1,1\nIT2,0\n", "D3": "id,value\nIT1,0.4\n"},
            "IT1,Alpha,North,1000,10.0,\nIT2,Beta,South,500,5.0,\n",
        )
        dataset, report = load_dataset(manifest, roster)
        by_id = {r.municipality_id: r for r in dataset.records}
        assert by_id["IT1"].value("D1") == 1.0
        assert by_id["IT1"].value("D3") == 0.4
        assert by_id["IT2"].value("D3") is None
        assert report.coverage["D1"] == 2
        assert report.coverage["D3"] == 1
        assert report.coverage["W2"] == 0

    def test_unknown_manifest_kpi_rejected(self, tmp_path):
        manifest, roster = _project(
            tmp_path, {"X9": "id,value\nIT1,1\n"}, "IT1,A,N,10,1.0,\n"
        )
        with pytest.raises(SchemaError, match="X9"):
            load_dataset(manifest, roster)

    def test_unknown_municipality_row_warned_and_ignored(self, tmp_path):
        manifest, roster = _project(
            tmp_path, {"D1": "id,value\nIT1,1\nZZ9,1\n"}, "IT1,A,N,10,1.0,\n"
        )
        dataset, report = load_dataset(manifest, roster)
        assert any("ZZ9" in w.message for w in report.warnings())
        assert report.coverage["D1"] == 1

    @pytest.mark.parametrize(
        "kpi,bad,reason",
        [
            ("D1", "0.5", "binary"),
            ("D3", "1.2", "percentage"),
            ("D4", "2.5", "levels"),
            ("D4", "9", "levels"),
            ("W1", "-3", "number"),
        ],
    )
    def test_out_of_range_value_dropped_with_error(self, tmp_path, kpi, bad, reason):
        manifest, roster = _project(
            tmp_path, {kpi: f"id,value\nIT1,{bad}\n"}, "IT1,A,N,10,1.0,\n"
        )
        dataset, report = load_dataset(manifest, roster)
        assert dataset.records[0].value(kpi) is None
        errors = [i for i in report.errors() if i.municipality_id == "IT1"]
        assert len(errors) == 1
        assert bad in errors[0].message
        assert report.coverage[kpi] == 0

    def test_capacity_derives_self_sufficiency(self, tmp_path):
        manifest, roster = _project(
            tmp_path,
            {CAPACITY_KEY: "id,renewable_capacity_kw\nIT1,330\nIT2,330\n"},
            "IT1,A,N,10,1.0,100\nIT2,B,S,10,1.0,200\n",
        )
        dataset, report = load_dataset(manifest, roster)
        by_id = {r.municipality_id: r for r in dataset.records}
        assert by_id["IT1"].value("ECR3") == 1.0  # 330 / (100 * 3.3), exactly
        assert by_id["IT2"].value("ECR3") == 0.5
        assert report.coverage["ECR3"] == 2

    def test_capacity_without_households_warns_and_stays_missing(self, tmp_path):
        manifest, roster = _project(
            tmp_path,
            {CAPACITY_KEY: "id,renewable_capacity_kw\nIT1,330\n"},
            "IT1,A,N,10,1.0,\n",
        )
        dataset, report = load_dataset(manifest, roster)
        assert dataset.records[0].value("ECR3") is None
        assert any("households" in w.message for w in report.warnings())

    def test_direct_value_wins_over_capacity(self, tmp_path):
        manifest, roster = _project(
            tmp_path,
            {
                "ECR3": "id,value\nIT1,0.8\n",
                CAPACITY_KEY: "id,renewable_capacity_kw\nIT1,330\nIT2,660\n",
            },
            "IT1,A,N,10,1.0,100\nIT2,B,S,10,1.0,100\n",
        )
        dataset, _ = load_dataset(manifest, roster)
        by_id = {r.municipality_id: r for r in dataset.records}
        assert by_id["IT1"].value("ECR3") == 0.8  # direct table entry wins
        assert by_id["IT2"].value("ECR3") == 2.0  # derived where absent

    def test_geo_fills_only_kpis_absent_from_manifest(self, tmp_path):
        manifest, roster = _project(
            tmp_path,
            {"M1": "id,value\nIT1,250\n"},
            "IT1,A,N,10,1.0,\n",
        )
        geo = {"IT1": {"M1": 900.0, "M2": 3.0, "M3": None, "M4": 1.0}}
        dataset, report = load_dataset(manifest, roster, geo_values=geo)
        rec = dataset.records[0]
        assert rec.value("M1") == 250.0  # manifest-provided table wins
        assert rec.value("M2") == 3.0
        assert rec.value("M3") is None  # None stays missing
        assert rec.value("M4") == 1.0
        assert report.coverage["M4"] == 1

    def test_negative_capacity_reported_not_raised(self, tmp_path):
        manifest, roster = _project(
            tmp_path,
            {CAPACITY_KEY: "id,renewable_capacity_kw\nIT1,-5\n"},
            "IT1,A,N,10,1.0,100\n",
        )
        dataset, report = load_dataset(manifest, roster)
        assert dataset.records[0].value("ECR3") is None
        assert len(report.errors()) == 1

    def test_missing_table_file_rejected(self, tmp_path):
        roster = _write(tmp_path / "roster.csv", ROSTER_HEADER + "IT1,A,N,10,1.0,\n")
        manifest = _write(tmp_path / "manifest.csv", "kpi,path\nD1,nope.csv\n")
        with pytest.raises(SchemaError, match="nope.csv"):
            load_dataset(manifest, roster)

    def test_report_clean_on_good_data(self, tmp_path):
        manifest, roster = _project(
            tmp_path,
            {"D1": "id,value\nIT1,1\n", "W2": "id,value\nIT1,0.55\n"},
            "IT1,A,N,10,1.0,\n",
        )
        dataset, report = load_dataset(manifest, roster)
        assert report.ok()
        assert dataset.registry == default_registry().kpis
