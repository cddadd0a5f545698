"""CLI behavior: the four subcommands and the exit-code contract.

Everything runs in-process through main(argv); 0 success, 1 usage,
2 input validation, 3 internal error.
"""

import json

import pytest

from conftest import DATA_DIR
from qdmr2sql.cli import main

CORPUS = DATA_DIR / "corpus.jsonl"
EMBEDDINGS = DATA_DIR / "mini_glove.txt"


def batch_args(db_dir, **extra):
    args = {
        "--examples": str(CORPUS),
        "--db-dir": str(db_dir),
        "--embeddings": str(EMBEDDINGS),
    }
    args.update(extra)
    return [x for pair in args.items() for x in pair]


class TestUsageErrors:
    def test_no_arguments(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_required_flag(self, capsys):
        assert main(["synth", "--examples", "x.jsonl"]) == 1
        err = capsys.readouterr().err
        assert "--db-dir" in err

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "synth" in capsys.readouterr().out


class TestSynth:
    def test_full_pipeline(self, db_dir, tmp_path, capsys):
        pairs = tmp_path / "pairs.jsonl"
        report = tmp_path / "report.json"
        code = main(
            ["synth"]
            + batch_args(db_dir)
            + ["--out-pairs", str(pairs), "--out-report", str(report)]
        )
        assert code == 0
        line = capsys.readouterr().out.strip()
        assert line == (
            f"synthesized 23/27 examples (85.2%), 0 rejected; pairs -> {pairs}"
        )

        assert len(pairs.read_text().splitlines()) == 23
        failures = tmp_path / "pairs.failures.jsonl"
        assert len(failures.read_text().splitlines()) == 4
        # No rejects, so no rejects file.
        assert not (tmp_path / "pairs.rejects.jsonl").exists()

        doc = json.loads(report.read_text())
        assert doc["total"]["synthesized"] == 23
        assert doc["total"]["coverage"] == 85.2

    def test_rejected_lines_get_their_own_file(self, db_dir, tmp_path, capsys):
        corpus = tmp_path / "tiny.jsonl"
        corpus.write_text(
            '{"id": "ok", "dataset": "d", "db_id": "products", '
            '"question": "how many kinds?", '
            '"qdmr": "return product types; return the number of #1", '
            '"answer": 3}\n'
            "this line is garbage\n"
        )
        pairs = tmp_path / "out.jsonl"
        report = tmp_path / "report.json"
        code = main(
            ["synth", "--examples", str(corpus), "--db-dir", str(db_dir),
             "--embeddings", str(EMBEDDINGS),
             "--out-pairs", str(pairs), "--out-report", str(report)]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "synthesized 1/1 examples (100.0%), 1 rejected" in out
        rejects = [
            json.loads(l)
            for l in (tmp_path / "out.rejects.jsonl").read_text().splitlines()
        ]
        assert rejects[0]["line"] == 2

    def test_missing_examples_file(self, db_dir, tmp_path, capsys):
        code = main(
            ["synth", "--examples", str(tmp_path / "none.jsonl"),
             "--db-dir", str(db_dir), "--embeddings", str(EMBEDDINGS),
             "--out-pairs", str(tmp_path / "p.jsonl"),
             "--out-report", str(tmp_path / "r.json")]
        )
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_unwritable_report_is_internal(self, db_dir, tmp_path, capsys):
        code = main(
            ["synth"]
            + batch_args(db_dir)
            + ["--out-pairs", str(tmp_path / "p.jsonl"),
               "--out-report", str(tmp_path / "no" / "dir" / "r.json")]
        )
        assert code == 3
        assert capsys.readouterr().err.startswith("internal error:")


class TestCoverage:
    def test_report_only(self, db_dir, tmp_path, capsys):
        out = tmp_path / "cov.json"
        code = main(["coverage"] + batch_args(db_dir) + ["--out", str(out)])
        assert code == 0
        line = capsys.readouterr().out.strip()
        assert line == f"coverage 85.2% (23/27); report -> {out}"
        doc = json.loads(out.read_text())
        assert doc["non_empty"]["total"]["coverage"] == 88.5

    def test_matches_synth_report_byte_for_byte(self, db_dir, tmp_path):
        synth_report = tmp_path / "synth.json"
        cov_report = tmp_path / "cov.json"
        main(
            ["synth"]
            + batch_args(db_dir)
            + ["--out-pairs", str(tmp_path / "p.jsonl"),
               "--out-report", str(synth_report)]
        )
        main(["coverage"] + batch_args(db_dir) + ["--out", str(cov_report)])
        assert synth_report.read_bytes() == cov_report.read_bytes()


class TestMap:
    def test_prints_sql_without_executing(self, ship_death_db, capsys):
        code = main(
            ["map", "--qdmr", "return ships; return the name of #1",
             "--schema", str(ship_death_db)]
        )
        assert code == 0
        # Without embeddings the first assignment is lemma-tier order,
        # which puts death.caused_by_ship_id ahead of ship.id for "ships".
        assert capsys.readouterr().out == (
            "SELECT ship.name FROM ship, death "
            "WHERE death.caused_by_ship_id = ship.id "
            "AND death.caused_by_ship_id IN "
            "( SELECT death.caused_by_ship_id FROM death )\n"
        )

    def test_explicit_assignment(self, ship_death_db, capsys):
        assignment = json.dumps(
            {"1:ships": "ship.tonnage", "2:the name of": "ship.name"}
        )
        code = main(
            ["map", "--qdmr", "return ships; return the name of #1",
             "--schema", str(ship_death_db), "--assignment", assignment]
        )
        assert code == 0
        assert capsys.readouterr().out == (
            "SELECT ship.name FROM ship WHERE ship.tonnage IN "
            "( SELECT ship.tonnage FROM ship )\n"
        )

    def test_json_schema_source(self, tmp_path, capsys):
        doc = {
            "tables": {
                "ship": {
                    "id": "INTEGER",
                    "name": "TEXT",
                    "ship_type": "TEXT",
                    "tonnage": "INTEGER",
                }
            },
            "foreign_keys": {},
        }
        schema_file = tmp_path / "ship.json"
        schema_file.write_text(json.dumps(doc))
        code = main(["map", "--qdmr", "return ships", "--schema", str(schema_file)])
        assert code == 0
        assert capsys.readouterr().out == "SELECT ship.id FROM ship\n"

    def test_bad_decomposition(self, ship_death_db, capsys):
        code = main(["map", "--qdmr", "return #3", "--schema", str(ship_death_db)])
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_bad_assignment_json(self, ship_death_db, capsys):
        code = main(
            ["map", "--qdmr", "return ships", "--schema", str(ship_death_db),
             "--assignment", "{not json"]
        )
        assert code == 2
        assert "--assignment" in capsys.readouterr().err


class TestLink:
    def test_ranked_candidates(self, ship_death_db, capsys):
        code = main(
            ["link", "--phrase", "ships", "--schema", str(ship_death_db),
             "--embeddings", str(EMBEDDINGS), "--top-k", "3"]
        )
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines == [
            "0\ttier=2\tsim=0.8000\tship.id",
            "1\ttier=2\tsim=0.5954\tship.name",
            "2\ttier=2\tsim=0.5000\tship.ship_type",
        ]

    def test_missing_embeddings_file(self, ship_death_db, tmp_path, capsys):
        code = main(
            ["link", "--phrase", "ships", "--schema", str(ship_death_db),
             "--embeddings", str(tmp_path / "none.txt")]
        )
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")
