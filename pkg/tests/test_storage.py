"""Tests for observation repositories, result writers and the container."""
import json
import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from core.container import Container, get_repository
from core.errors import DataError, IngestError
from storage.models import BinSpec, FitConfig, SiteObservation, UrnParams
from storage.tsv_repository import TSVObservationRepository, ingest_tsv
from storage.writers import ResultWriter, dumps_json


class TestModels:
    def test_urn_needs_a_ball(self):
        with pytest.raises(ValidationError):
            UrnParams(u=0, v=0, p_w=0.1, p_b=0.1)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1])
    def test_rates_open_interval(self, p):
        with pytest.raises(ValidationError):
            UrnParams(u=1, v=1, p_w=p, p_b=0.1)

    def test_swapped(self, small_params):
        swapped = small_params.swapped()
        assert (swapped.u, swapped.v, swapped.p_w, swapped.p_b) == (1, 1, 0.3, 0.1)
        assert small_params.lam == pytest.approx(0.6)

    def test_params_are_hashable(self, small_params):
        assert {small_params: 1}[UrnParams(u=1, v=1, p_w=0.1, p_b=0.3)] == 1

    def test_bins(self):
        bins = BinSpec(lo=0.0, hi=0.002, count=100)
        assert bins.width == pytest.approx(2e-5)
        assert bins.edges.size == 101
        assert bins.centers[0] == pytest.approx(1e-5)
        with pytest.raises(ValidationError):
            BinSpec(lo=1.0, hi=1.0)

    def test_alt_count_bounded_by_depth(self):
        with pytest.raises(ValidationError):
            SiteObservation(sample_id="A", site=1, depth=3, alt_count=4, strand_bias=0.0)

    def test_fit_config_ranges(self):
        with pytest.raises(ValidationError):
            FitConfig(search_range=(-4.0, -8.0))
        with pytest.raises(ValidationError):
            FitConfig(search_range=(-2.0, 0.5))
        with pytest.raises(ValidationError):
            FitConfig(n=100, k=100)


class TestTSVRepository:
    async def test_loads_rows(self, write_tsv):
        path = write_tsv(
            [("GJ-1", 23403, 4210, 3, 1.7), ("GJ-1", 23404, 0, 0, 0.0)],
            preamble="# per-site read counts",
        )
        observations = await TSVObservationRepository(path).load()
        assert len(observations) == 2
        assert observations[0].frequency == pytest.approx(3 / 4210)
        assert observations[1].frequency is None

    async def test_reports_every_bad_row(self, write_tsv):
        path = write_tsv(
            [
                ("GJ-1", 1, 100, 1, 0.5),
                ("GJ-1", 2, 10, 11, 0.5),
                ("GJ-1", "x", 100, 1, 0.5),
                ("GJ-1", 4, 100, 1, -1),
            ]
        )
        with pytest.raises(IngestError) as info:
            await TSVObservationRepository(path).load()
        assert [e.line for e in info.value.errors] == [3, 4, 5]

    async def test_line_numbers_skip_comments(self, write_tsv, tmp_path):
        path = tmp_path / "commented.tsv"
        path.write_text(
            "# header comment\n"
            "sample_id\tsite\tdepth\talt_count\tstrand_bias\n"
            "\n"
            "# note\n"
            "A\t1\t5\t9\t0.1\n",
            encoding="utf-8",
        )
        with pytest.raises(IngestError) as info:
            await TSVObservationRepository(path).load()
        assert info.value.errors[0].line == 5

    async def test_missing_column(self, tmp_path):
        path = tmp_path / "cols.tsv"
        path.write_text("sample_id\tsite\tdepth\talt_count\nA\t1\t5\t1\n", encoding="utf-8")
        with pytest.raises(DataError, match="strand_bias"):
            await TSVObservationRepository(path).load()

    async def test_header_only(self, write_tsv):
        assert await TSVObservationRepository(write_tsv([])).load() == []

    async def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("# nothing\n", encoding="utf-8")
        with pytest.raises(DataError, match="header"):
            await TSVObservationRepository(path).load()

    async def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            await TSVObservationRepository(tmp_path / "absent.tsv").load()


class TestWriter:
    def test_csv_keeps_full_precision(self, tmp_path):
        writer = ResultWriter(tmp_path / "out")
        values = np.array([1 / 3, math.pi * 1e-7, 2.0])
        writer.write_csv("table.csv", {"x": np.arange(3), "value": values})
        frame = writer.read_csv("table.csv")
        assert list(frame.columns) == ["x", "value"]
        np.testing.assert_array_equal(frame["value"].to_numpy(), values)

    def test_csv_from_rows(self, tmp_path):
        writer = ResultWriter(tmp_path)
        writer.write_csv("rows.csv", [{"a": 1.5, "b": float("nan")}])
        frame = pd.read_csv(tmp_path / "rows.csv")
        assert frame["a"][0] == 1.5
        assert math.isnan(frame["b"][0])

    def test_json_cleans_numpy(self, tmp_path):
        writer = ResultWriter(tmp_path, float_digits=3)
        writer.write_json("r.json", {"v": np.float64(1 / 3), "arr": np.array([1, 2]), "bad": math.inf})
        payload = json.loads((tmp_path / "r.json").read_text())
        assert payload == {"v": 0.333, "arr": [1, 2], "bad": None}

    def test_dumps_json(self):
        assert json.loads(dumps_json({"x": np.int64(4)})) == {"x": 4}


class TestContainer:
    def test_cache_is_shared(self):
        assert Container.get_approx_cache() is Container.get_approx_cache()

    def test_reset(self):
        cache = Container.get_approx_cache()
        Container.reset()
        assert Container.get_approx_cache() is not cache

    def test_repository_by_suffix(self, tmp_path):
        assert isinstance(get_repository(tmp_path / "obs.tsv"), TSVObservationRepository)
        with pytest.raises(DataError):
            get_repository(tmp_path / "obs.xlsx")

    def test_writer_creates_directory(self, tmp_path):
        writer = Container.get_writer(tmp_path / "nested" / "dir")
        assert writer.out_dir.is_dir()


def test_ingest_tsv(write_tsv):
    path = write_tsv([("A", 1, 10, 1, 0.0), ("A", 2, 10, 2, 0.0), ("B", 1, 20, 0, 3.5)])
    observations = ingest_tsv(path)
    assert [o.sample_id for o in observations] == ["A", "A", "B"]
    assert observations[2].strand_bias == 3.5
