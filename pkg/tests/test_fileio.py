import json

import numpy as np
import pytest

from adaptive_sddp.fileio import (
    CONFIG_ENV,
    ConfigError,
    InstanceParseError,
    VersionError,
    config_document,
    format_instance,
    lattices_equal,
    load_config,
    log_paths,
    parse_instance,
    read_instance,
    read_log_table,
    write_instance,
    write_log,
)
from adaptive_sddp.hydro import HydroConfig
from adaptive_sddp.lattice import SolverConfig
from adaptive_sddp.progress import LOG_COLUMNS, ProgressLog
from adaptive_sddp.variants import VariantSpec, run_variant
from conftest import random_lattice


def test_round_trip_thousand_random_instances():
    rng = np.random.default_rng(0)
    for i in range(1000):
        lat = random_lattice(
            rng,
            T=int(rng.integers(2, 4)),
            K=int(rng.integers(1, 4)),
            n=int(rng.integers(4, 7)),
            uniform=bool(i % 2),
            random_B=bool(i % 3 == 0),
        )
        assert lattices_equal(parse_instance(format_instance(lat)), lat)


def test_round_trip_file_and_sparse_encoding(tmp_path, reference_lattice):
    path = tmp_path / "ref.mslp"
    write_instance(reference_lattice, path)
    text = path.read_text()
    assert text.startswith("mslp-v1\n")
    assert "sparse" in text
    assert lattices_equal(read_instance(path), reference_lattice)


def test_truncated_file_names_offset(reference_lattice):
    text = format_instance(reference_lattice)
    cut = text[: len(text) // 2]
    with pytest.raises(InstanceParseError) as err:
        parse_instance(cut)
    assert "offset" in str(err.value)
    assert err.value.offset == len(cut)


def test_bad_token_position():
    text = "mslp-v1\nhorizon 2\nstage 1 vars x rows 1\n"
    with pytest.raises(InstanceParseError) as err:
        parse_instance(text)
    assert (err.value.line, err.value.column) == (3, 14)
    assert err.value.offset == text.index("x")


def test_unknown_version():
    with pytest.raises(VersionError):
        parse_instance("mslp-v9\nhorizon 2\n")


def test_comments_are_ignored(reference_lattice):
    text = "# a comment\n" + format_instance(reference_lattice).replace("\nhorizon", "  # trailing\nhorizon", 1)
    assert lattices_equal(parse_instance(text), reference_lattice)


def test_empty_log(tmp_path):
    log = ProgressLog("sddp-qp", 0, 12.5)
    paths = write_log(log, tmp_path / "run.csv")
    assert paths["table"].read_text().strip() == ",".join(LOG_COLUMNS)
    summary = json.loads(paths["summary"].read_text())
    assert summary["final_lower_bound"] == 12.5 and summary["iterations"] == 0


def test_log_contents(tmp_path, reference_lattice):
    log = run_variant(VariantSpec("apqp", SolverConfig(max_iterations=6)), reference_lattice)
    paths = write_log(log, tmp_path / "run.csv")
    rows = read_log_table(paths["table"])
    assert len(rows) == 6
    assert [float(r["lower_bound"]) for r in rows] == log.lower_bounds
    assert rows[0]["partition_sizes"].count(";") == 1
    cuts = json.loads(paths["cuts"].read_text())
    assert len(cuts) == len(log.engine.all_cuts())
    assert set(log_paths(tmp_path / "run.csv")) == {"table", "summary", "cuts"}


def test_config_document_round_trip(tmp_path, monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    doc = config_document(SolverConfig(stall_window=7, importance_threshold=float("inf")), "apep", HydroConfig(horizon=5))
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    cfg = load_config(p)
    assert cfg["solver"].stall_window == 7
    assert cfg["solver"].importance_threshold == float("inf")
    assert cfg["variant"] == "apep"
    assert cfg["hydro"].horizon == 5


def test_env_var_overrides_config_path(tmp_path, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    a.write_text(json.dumps({"solver": {"stall_window": 3}}))
    b.write_text(json.dumps({"solver": {"stall_window": 9}}))
    monkeypatch.setenv(CONFIG_ENV, str(b))
    assert load_config(a)["solver"].stall_window == 9


def test_config_errors(tmp_path, monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"solver": {"stall_windw": 3}}))
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
