import math

import numpy as np
import pytest

from intercens.dataio import (
    RawSurvivalRecord,
    config_hash,
    format_number,
    intervalize_right_censored,
    load_ovarian,
    ovarian_path,
    parse_number,
    read_dataset,
    read_raw_records,
    write_dataset,
)
from intercens.model import CensorKind, Dataset, Observation

from conftest import random_mixed_dataset


class TestNumbers:
    def test_infinity_round_trip(self):
        assert format_number(math.inf) == "Inf"
        assert parse_number("Inf") == math.inf

    def test_float_round_trip(self, rng):
        for x in rng.uniform(-1e6, 1e6, 200):
            assert parse_number(format_number(float(x))) == float(x)

    def test_negative_zero_normalized(self):
        assert format_number(-0.0) == "0.0"


class TestRoundTrip:
    def test_dataset_identical_after_write_read(self, tmp_path, rng):
        data = random_mixed_dataset(rng, n=25, p=2)
        path = tmp_path / "data.csv"
        write_dataset(data, path)
        assert read_dataset(path) == data

    def test_round_trip_preserves_kinds_and_infinities(self, tmp_path):
        data = Dataset(
            (
                Observation(1.0, 3.0, (), CensorKind.LEFT),
                Observation(0.0, 4.0),
                Observation(2.5, math.inf),
                Observation(5.0, 5.0),
                Observation(1.5, 2.5),
            )
        )
        path = tmp_path / "mixed.csv"
        write_dataset(data, path)
        loaded = read_dataset(path)
        assert loaded == data
        assert loaded.observations[0].kind is CensorKind.LEFT
        assert loaded.observations[0].left == 1.0

    def test_byte_identical_rewrites(self, tmp_path, rng):
        data = random_mixed_dataset(rng, n=10)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_dataset(data, a)
        write_dataset(data, b)
        assert a.read_bytes() == b.read_bytes()

    def test_missing_cens_column_classified(self, tmp_path):
        path = tmp_path / "min.csv"
        path.write_text("left,right\n0.0,3.0\n2.0,Inf\n1.0,4.0\n")
        data = read_dataset(path)
        kinds = [obs.kind for obs in data.observations]
        assert kinds == [CensorKind.LEFT, CensorKind.RIGHT, CensorKind.INTERVAL]

    def test_bad_row_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("left,right,cens\n0.0,3.0,left\n5.0,3.0,interval\n")
        with pytest.raises(ValueError, match=":3"):
            read_dataset(path)


class TestOvarianFixture:
    def test_shape(self, ovarian):
        assert ovarian.n == 26
        assert ovarian.covariate_names == ("age", "rx2")

    def test_censoring_mix(self, ovarian):
        counts = {}
        for obs in ovarian.observations:
            counts[obs.kind] = counts.get(obs.kind, 0) + 1
        assert counts[CensorKind.LEFT] == 1
        assert counts[CensorKind.INTERVAL] == 11
        assert counts[CensorKind.RIGHT] == 14

    def test_known_quirks_preserved_verbatim(self, ovarian):
        # Row 1 is labelled left-censored with a stored left endpoint of 1;
        # the last row has an event indicator but a right-censoring label.
        first = ovarian.observations[0]
        assert first.kind is CensorKind.LEFT and first.left == 1.0
        last = ovarian.observations[-1]
        assert last.kind is CensorKind.RIGHT and last.left == 12.0

    def test_rx2_indicator(self, ovarian):
        values = {obs.covariates[1] for obs in ovarian.observations}
        assert values == {0.0, 1.0}


class TestIntervalize:
    def test_reference_event_row(self):
        records = [RawSurvivalRecord(115.0, 1, (74.49,))]
        data = intervalize_right_censored(records, 3.0, ("age",))
        obs = data.observations[0]
        assert (obs.left, obs.right, obs.kind) == (3.0, 6.0, CensorKind.INTERVAL)

    def test_reference_censored_row(self):
        records = [RawSurvivalRecord(421.0, 0, ())]
        data = intervalize_right_censored(records, 3.0)
        obs = data.observations[0]
        assert (obs.left, obs.right, obs.kind) == (12.0, math.inf, CensorKind.RIGHT)

    def test_early_event_left_censored(self):
        records = [RawSurvivalRecord(59.0, 1, ())]
        data = intervalize_right_censored(records, 3.0)
        obs = data.observations[0]
        assert (obs.left, obs.right, obs.kind) == (0.0, 3.0, CensorKind.LEFT)

    def test_event_time_always_inside_window(self, rng):
        records = [
            RawSurvivalRecord(float(rng.uniform(1, 1500)), 1, ()) for _ in range(300)
        ]
        data = intervalize_right_censored(records, 3.0)
        for record, obs in zip(records, data.observations):
            months = record.time_days / 30.4375
            lo, hi = obs.effective_bounds()
            assert lo < months <= hi

    def test_nonpositive_time_rejected_with_warning(self):
        records = [RawSurvivalRecord(-5.0, 1, ()), RawSurvivalRecord(100.0, 1, ())]
        with pytest.warns(UserWarning, match="rejected"):
            data = intervalize_right_censored(records, 3.0)
        assert data.n == 1

    def test_raw_reader_on_fixture(self):
        records, names = read_raw_records(ovarian_path(), covariates=["age", "rx"])
        assert len(records) == 26
        assert names == ("age", "rx")
        data = intervalize_right_censored(records, 3.0, names)
        assert data.n == 26
        # The fixture's appendix-derived windows match the intervalizer for
        # every row except the three documented discrepancies (the left row
        # stored with left=1, one event row labelled right-censored, and two
        # late censored rows whose source grid was capped).
        fixture = read_dataset(ovarian_path(), covariates=["age", "rx"])
        agree = sum(
            o1.left == o2.left and o1.right == o2.right and o1.kind == o2.kind
            for o1, o2 in zip(data.observations, fixture.observations)
        )
        assert agree == 26 - 4


def test_config_hash_changes_with_content():
    a = {"seed": 1, "family": "weibull"}
    b = {"seed": 2, "family": "weibull"}
    assert config_hash(a) != config_hash(b)
    assert config_hash(a) == config_hash({"family": "weibull", "seed": 1})
