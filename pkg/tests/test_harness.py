import pytest

from lab.harness import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, run_from_path
from lab.reporting import read_results
from lab.settings import TOOL_NAME


@pytest.fixture
def census_config(write_config, tmp_path):
    def make(extra="", levels="1", mu="inf"):
        return write_config(
            f"""
            [experiment]
            name = census
            output = {tmp_path / "census.csv"}
            progress = false
            {extra}

            [census]
            levels = {levels}
            mu = {mu}
            """,
            name="census.ini",
        )

    return make


def _read(path):
    with open(path, "rb") as file:
        return file.read()


def test_membership_census_at_level_one(census_config, tmp_path):
    assert run_from_path(census_config()) == EXIT_OK
    header, table = read_results(str(tmp_path / "census.csv"))
    assert header["tool"] == TOOL_NAME
    assert header["experiment"] == "census"
    assert table["count"].tolist() == [4]
    assert table.columns[:7].tolist() == ["j", "mu", "count", "log3_density", "bound", "algorithm", "wall_seconds"]


def test_negative_mu_is_a_config_error(census_config, caplog):
    assert run_from_path(census_config(mu="-1")) == EXIT_CONFIG
    assert "mu" in caplog.text


def test_duplicate_key_is_a_config_error(write_config):
    path = write_config("[experiment]\nname = census\nseed = 1\nseed = 2\n")
    assert run_from_path(path) == EXIT_CONFIG


def test_checkpoint_from_another_config_is_refused(census_config, tmp_path):
    checkpoint = tmp_path / "census.checkpoint"
    checkpoint.write_text("# config_hash: 0123456789abcdef\n1 inf 4 2\n")
    path = census_config(extra=f"checkpoint = {checkpoint}")
    assert run_from_path(path) == EXIT_CONFIG


def test_empty_checkpoint_means_a_full_run(census_config, tmp_path):
    checkpoint = tmp_path / "census.checkpoint"
    checkpoint.write_text("")
    assert run_from_path(census_config(extra=f"checkpoint = {checkpoint}")) == EXIT_OK
    _, table = read_results(str(tmp_path / "census.csv"))
    assert table["count"].tolist() == [4]
    assert checkpoint.read_text().startswith("# config_hash: ")


def test_resume_reproduces_the_full_run(census_config, tmp_path):
    checkpoint = tmp_path / "census.checkpoint"
    path = census_config(extra=f"checkpoint = {checkpoint}", levels="1..2", mu="2, inf")
    assert run_from_path(path) == EXIT_OK
    full = _read(tmp_path / "census.csv")

    lines = checkpoint.read_text().splitlines()
    checkpoint.write_text("\n".join(lines[: len(lines) // 2]) + "\n")
    (tmp_path / "census.csv").unlink()
    assert run_from_path(path, resume_run=True) == EXIT_OK
    assert _read(tmp_path / "census.csv") == full


def test_resume_needs_a_checkpoint(census_config):
    assert run_from_path(census_config(), resume_run=True) == EXIT_CONFIG


def test_percolation_root_only(write_config, tmp_path):
    out = tmp_path / "trees.csv"
    path = write_config(
        f"""
        [experiment]
        name = percolate
        output = {out}
        progress = false

        [percolate]
        mode = trees
        depth = 0
        trials = 1
        """
    )
    assert run_from_path(path) == EXIT_OK
    _, table = read_results(str(out))
    assert len(table) == 1
    assert table["survivors"].tolist() == [1]


def test_summary_of_one_tree_is_a_runtime_error(write_config, tmp_path):
    path = write_config(
        f"""
        [experiment]
        name = percolate
        output = {tmp_path / "summary.csv"}
        progress = false

        [percolate]
        mode = summary
        depth = 2
        trials = 1
        """
    )
    assert run_from_path(path) == EXIT_RUNTIME


@pytest.mark.parametrize("process", ["iid_circle", "iid_cantor", "mixed:triadic"])
def test_output_does_not_depend_on_thread_count(write_config, tmp_path, process):
    outputs = []
    for threads in (1, 4):
        out = tmp_path / f"cover-{threads}.csv"
        path = write_config(
            f"""
            [experiment]
            name = cover
            seed = 99
            threads = {threads}
            output = {out}
            progress = false

            [cover]
            experiment = scale_census
            process = {process}
            radii = {"enum:P" if process.startswith("mixed") else "power:1"}
            nu = 2
            levels = 2..4
            trials = 150
            """,
            name=f"cover-{threads}.ini",
        )
        assert run_from_path(path) == EXIT_OK
        outputs.append(_read(out))
    assert outputs[0] == outputs[1]


def test_exponent_run_writes_witnesses(write_config, tmp_path):
    out = tmp_path / "lsv.csv"
    path = write_config(
        f"""
        [experiment]
        name = exponent
        output = {out}
        progress = false
        excel_report = {tmp_path / "lsv.xlsx"}

        [exponent]
        kind = lsv
        mu = 3
        J = 4
        """
    )
    assert run_from_path(path) == EXIT_OK
    _, table = read_results(str(out))
    assert table["j"].tolist() == [1, 2, 3, 4]
    assert (tmp_path / "lsv.xlsx").exists()


def test_gauge_series_run(write_config, tmp_path):
    out = tmp_path / "series.csv"
    path = write_config(
        f"""
        [experiment]
        name = gauge
        output = {out}
        progress = false

        [gauge]
        kind = series
        g = r^0.2
        radii = power:2
        N = 1000
        """
    )
    assert run_from_path(path) == EXIT_OK
    _, table = read_results(str(out))
    assert table["N"].tolist() == [1, 10, 100, 1000]
    assert set(table["verdict"]) == {"converges"}
