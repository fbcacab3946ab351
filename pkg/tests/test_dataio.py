import datetime as dt
import json

import jsonschema
import numpy as np
import pytest

from oracles import random_posterior
from spghmm.dataio import (
    MODEL_SCHEMA,
    PrecipDataset,
    block_dataset,
    daily_dataset,
    load_long_csv,
    load_model,
    load_wide_csv,
    make_blocks,
    read_states_csv,
    save_model,
    write_json,
    write_locations,
    write_long_csv,
    write_states_csv,
    write_trace_csv,
)
from spghmm.errors import DataError
from spghmm.model import ModelDims, default_priors
from spghmm.vbem import FitTrace


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLongCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = daily_dataset(np.round(rng.exponential(3, (20, 3)), 3) * (rng.random((20, 3)) > 0.4), location_ids=["a", "b", "c"])
        write_long_csv(ds, tmp_path / "data.csv")
        back = load_long_csv(tmp_path / "data.csv")
        np.testing.assert_array_equal(back.values, ds.values)
        np.testing.assert_array_equal(back.dates, ds.dates)
        assert back.location_ids == ["a", "b", "c"]

    def test_locations_beside(self, tmp_path):
        ds = PrecipDataset(np.ones((2, 2)), ["2001-07-01", "2001-07-02"], ["x", "y"], lat=np.array([39.1, 38.2]), lon=np.array([-76.5, -77.0]))
        write_long_csv(ds, tmp_path / "data.csv")
        write_locations(ds, tmp_path / "locations.csv")
        back = load_long_csv(tmp_path / "data.csv")
        np.testing.assert_array_equal(back.lat, [39.1, 38.2])
        assert back.location_ids == ["x", "y"]

    def test_location_order_from_file(self, tmp_path):
        write(tmp_path / "locations.csv", "location_id,lat,lon\nB,1,2\nA,3,4\n")
        write(tmp_path / "data.csv", "date,location_id,precip_mm\n2000-01-01,A,1\n2000-01-01,B,2\n")
        ds = load_long_csv(tmp_path / "data.csv")
        assert ds.location_ids == ["B", "A"]
        np.testing.assert_array_equal(ds.values, [[2.0, 1.0]])

    def test_threshold(self, tmp_path):
        write(tmp_path / "data.csv", "date,location_id,precip_mm\n2000-01-01,A,0.05\n2000-01-02,A,0.2\n")
        ds = load_long_csv(tmp_path / "data.csv", dryness_threshold=0.1)
        np.testing.assert_array_equal(ds.values[:, 0], [0.0, 0.2])

    @pytest.mark.parametrize(
        "body,needle",
        [
            ("2000-01-01,A,1\n2000-01-01,A,2\n", ":3: duplicate"),
            ("2000-01-01,A,-1\n", ":2: negative"),
            ("2000-13-01,A,1\n", ":2: bad ISO date"),
            ("2000-01-01,A,wet\n", ":2: bad precipitation"),
            ("2000-01-01,A,1\n2000-01-01,B,1\n2000-01-02,A,1\n", "missing record for date 2000-01-02 location B"),
            ("2000-01-01,A\n", ":2: expected 3 fields"),
        ],
    )
    def test_errors_name_the_line(self, tmp_path, body, needle):
        p = write(tmp_path / "data.csv", "date,location_id,precip_mm\n" + body)
        with pytest.raises(DataError, match=needle):
            load_long_csv(p)

    def test_unknown_location(self, tmp_path):
        write(tmp_path / "locations.csv", "location_id,lat,lon\nA,1,2\n")
        p = write(tmp_path / "data.csv", "date,location_id,precip_mm\n2000-01-01,Z,1\n")
        with pytest.raises(DataError, match="unknown location id 'Z'"):
            load_long_csv(p)

    def test_bad_header(self, tmp_path):
        p = write(tmp_path / "data.csv", "day,loc,mm\n")
        with pytest.raises(DataError, match=":1:"):
            load_long_csv(p)


class TestWideCsv:
    def test_read(self, tmp_path):
        p = write(tmp_path / "w.csv", "date,A,B\n2000-01-02,0,3.5\n2000-01-01,1,0\n")
        ds = load_wide_csv(p)
        np.testing.assert_array_equal(ds.values, [[1, 0], [0, 3.5]])
        assert ds.location_ids == ["A", "B"]

    def test_negative(self, tmp_path):
        p = write(tmp_path / "w.csv", "date,A\n2000-01-01,-2\n")
        with pytest.raises(DataError):
            load_wide_csv(p)


class TestBlocks:
    def seasonal(self, years=(2001, 2002), drop=None):
        dates = []
        for y in years:
            d = np.arange(np.datetime64(f"{y}-06-25"), np.datetime64(f"{y}-10-05"))
            dates.append(d)
        dates = np.concatenate(dates)
        if drop is not None:
            dates = dates[dates != np.datetime64(drop)]
        vals = np.arange(len(dates), dtype=float)[:, None]
        return PrecipDataset(vals, dates, ["A"])

    def test_season_window(self):
        out = make_blocks(self.seasonal())
        assert out.lengths == [92, 92]
        assert [b.block_id for b in out.blocks] == [2001, 2002]
        assert out.dates[0] == np.datetime64("2001-07-01") and out.dates[-1] == np.datetime64("2002-09-30")

    def test_incomplete_year_named(self):
        with pytest.raises(DataError, match="2002 \\(91 of 92 days\\)"):
            make_blocks(self.seasonal(drop="2002-08-15"))

    def test_block_dataset(self):
        ds = block_dataset(np.zeros((180, 2)), 2, 90)
        assert ds.lengths == [90, 90]
        assert ds.dates[90] == np.datetime64("2001-07-01")
        assert ds.block_ids[0] == 2000 and ds.block_ids[-1] == 2001

    def test_unequal_blocks_rejected(self):
        from spghmm.dataio import Block

        with pytest.raises(DataError):
            PrecipDataset(np.zeros((5, 1)), np.arange(np.datetime64("2000-01-01"), np.datetime64("2000-01-06")), ["A"], blocks=[Block(0, 0, 2), Block(1, 2, 3)])


class TestModelFile:
    def fitted(self):
        rng = np.random.default_rng(1)
        post = random_posterior(rng, 3, 2, 2)
        prior = default_priors(ModelDims(K=3, L=2, M=2))
        trace = FitTrace()
        trace.record(-10.5, "svb", 0.5)
        trace.record(-9.25)
        trace.converged = True
        trace.iterations_run = 1
        return post, prior, trace

    def test_bit_exact_round_trip(self, tmp_path):
        post, prior, trace = self.fitted()
        dims = ModelDims(K=3, L=2, M=2, T=180, N=2, D=90)
        save_model(post, prior, dims, trace, tmp_path / "m.json", seed=4, state_order=[2, 0, 1], location_ids=["a", "b"])
        m = load_model(tmp_path / "m.json")
        assert m.posterior.equals(post) and m.prior.equals(prior)
        assert m.dims == dims
        assert m.trace.elbo == trace.elbo and m.trace.converged
        assert np.isnan(m.trace.step[1]) and m.trace.step[0] == 0.5
        assert m.state_order == [2, 0, 1] and m.seed == 4 and m.location_ids == ["a", "b"]

    def test_schema(self, tmp_path):
        post, prior, trace = self.fitted()
        save_model(post, prior, ModelDims(K=3, L=2, M=2), trace, tmp_path / "m.json", extra={"blocking": "year"})
        jsonschema.validate(json.loads((tmp_path / "m.json").read_text()), MODEL_SCHEMA)

    def test_version_mismatch(self, tmp_path):
        post, prior, trace = self.fitted()
        save_model(post, prior, ModelDims(K=3, L=2, M=2), trace, tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        doc["model_version"] = 99
        (tmp_path / "m.json").write_text(json.dumps(doc))
        with pytest.raises(DataError, match="model_version"):
            load_model(tmp_path / "m.json")

    def test_shape_mismatch(self, tmp_path):
        post, prior, trace = self.fitted()
        save_model(post, prior, ModelDims(K=3, L=2, M=2), trace, tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        doc["dims"]["L"] = 3
        (tmp_path / "m.json").write_text(json.dumps(doc))
        with pytest.raises(DataError):
            load_model(tmp_path / "m.json")

    def test_not_a_model(self, tmp_path):
        write(tmp_path / "x.json", "[1, 2]")
        with pytest.raises(DataError):
            load_model(tmp_path / "x.json")


class TestOutputs:
    def test_states_one_based(self, tmp_path):
        dates = np.arange(np.datetime64("2000-07-01"), np.datetime64("2000-07-04"))
        write_states_csv(dates, [2000] * 3, [0, 2, 1], tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_text().splitlines()[1] == "2000-07-01,2000,1"
        d, b, s = read_states_csv(tmp_path / "s.csv")
        np.testing.assert_array_equal(s, [0, 2, 1])
        np.testing.assert_array_equal(d, dates)

    def test_trace_csv(self, tmp_path):
        t = FitTrace()
        t.record(-3.0)
        t.record(-2.0)
        write_trace_csv(t, tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "iteration,phase,step,elbo,delta"
        assert lines[2] == "1,cavi,,-2.0,1.0"

    def test_json_nan_is_null(self, tmp_path):
        write_json({"x": np.array([1.0, np.nan]), "n": np.int64(3)}, tmp_path / "o.json")
        assert json.loads((tmp_path / "o.json").read_text()) == {"x": [1.0, None], "n": 3}

    def test_daily_dataset_dates(self):
        ds = daily_dataset(np.zeros((3, 1)), start=dt.date(2010, 12, 31))
        assert str(ds.dates[1]) == "2011-01-01"
