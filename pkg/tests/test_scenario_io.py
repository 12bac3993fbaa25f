import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavetrace import SimConfig, SingleGaussian, SumCentered, SumPaired, preset, run
from wavetrace.oracles import compare_intensity, oracle_field
from wavetrace.scenario_io import (
    PROFILE_HEADER,
    TRAJECTORY_HEADER,
    ConfigError,
    RunBundle,
    Scenario,
    file_checksum,
    load_config,
    profiles_of,
    read_trajectories,
    serialize_config,
    write_bundle,
    write_profiles,
    write_summary,
    write_trajectories,
)

EPS = 1.65e-4


@pytest.fixture(scope="module")
def short_record():
    return run(SimConfig(n_rays=41, z_final=400.0, record_every=100), preset("fig2").spec)


def csv_rows(text):
    return [line.split(",") for line in text.strip().splitlines()]


class TestLoadConfig:
    def test_preset_defaults(self):
        sc = load_config("preset = fig8\n")
        assert sc.spec == SumCentered(a=0, b=1, q=1, m=1, xc=2.5)
        assert sc.config.epsilon == 1.65e-4
        assert sc.config.n_rays == SimConfig().n_rays
        assert sc.preset == "fig8"

    def test_epsilon_zero_rejected_with_line(self):
        with pytest.raises(ConfigError) as info:
            load_config("preset = gaussian\n# comment\nepsilon = 0\n")
        assert info.value.line == 3
        assert "epsilon" in str(info.value)

    def test_explicit_matches_preset(self):
        text = """
        profile.kind = centered   # Gaussian comb
        profile.a = 0
        profile.b = 1
        profile.q = 1.68
        profile.m = 2
        profile.xc = 0.31
        epsilon = 1.65e-4
        """
        explicit = load_config(text)
        named = load_config("preset = fig2")
        assert explicit.spec == named.spec
        cfg = SimConfig(**{**named.config.as_dict(), "half_span": None})
        assert explicit.config.resolve(explicit.spec) == cfg.resolve(named.spec)
        assert explicit.resolved().config == named.resolved().config

    @pytest.mark.parametrize(
        "text,line,fragment",
        [
            ("preset = gaussian\ncolour = red\n", 2, "unknown key"),
            ("preset = gaussian\nn_rays = many\n", 2, "n_rays"),
            ("preset = gaussian\nn_rays = 10.5\n", 2, "integer"),
            ("preset = fig2\nprofile.q = 2\n", 2, "mutually exclusive"),
            ("preset = gaussian\nepsilon = 1e-4\nepsilon = 2e-4\n", 3, "duplicate"),
            ("preset = gaussian\njust words\n", 2, "key = value"),
            ("preset = fig9\n", 1, "fig8"),
            ("profile.kind = centered\nprofile.a = 1\n", 1, "needs"),
            ("profile.kind = gaussian\nprofile.q = 1\n", 2, "does not apply"),
            ("profile.kind = paired\nprofile.q = -1\nprofile.m = 1\nprofile.xc = 1\nprofile.x1 = 0.1\n",
             5, "q must be positive"),
            ("preset = gaussian\nwave_potential_enabled = maybe\n", 2, "boolean"),
            ("preset = gaussian\ndt = -1\n", 2, "dt"),
            ("preset = gaussian\nl2_threshold = -0.1\n", 2, "non-negative"),
        ],
    )
    def test_errors_carry_line_numbers(self, text, line, fragment):
        with pytest.raises(ConfigError) as info:
            load_config(text)
        assert info.value.line == line
        assert fragment in str(info.value)

    def test_missing_profile(self):
        with pytest.raises(ConfigError, match="no profile"):
            load_config("epsilon = 1e-4\n")

    def test_overrides_applied_and_validated(self):
        sc = load_config("preset = gaussian\n", ["epsilon=2.0625e-4", "n_rays = 201"])
        assert sc.config.epsilon == 2.0625e-4
        assert sc.config.n_rays == 201
        with pytest.raises(ConfigError) as info:
            load_config("preset = gaussian\n", ["n_rays=5"])
        assert "override 1" in str(info.value)

    def test_override_switches_profile_source(self):
        sc = load_config("preset = fig2\n", ["preset=fig8"])
        assert sc.spec == preset("fig8").spec
        sc = load_config(
            "preset = fig2\n",
            ["profile.kind=paired", "profile.q=2", "profile.m=1", "profile.xc=1", "profile.x1=0.2"],
        )
        assert sc.spec == SumPaired(q=2, m=1, xc=1, x1=0.2)
        assert sc.preset is None

    def test_thresholds(self):
        sc = load_config("preset = fig5\nl2_threshold = 0.05\n")
        assert sc.l2_threshold == 0.05
        assert sc.fringe_threshold == 0.10


configs = st.builds(
    SimConfig,
    epsilon=st.floats(1e-6, 0.5),
    n_rays=st.integers(7, 5000),
    half_span=st.one_of(st.none(), st.floats(0.1, 50)),
    dt=st.one_of(st.none(), st.floats(1e-3, 10)),
    z_final=st.one_of(st.none(), st.floats(0, 1e6)),
    record_every=st.one_of(st.none(), st.integers(1, 10**6)),
    wave_potential_enabled=st.booleans(),
    r_floor=st.floats(1e-14, 0.5),
    step_control=st.sampled_from(["stability", "fixed"]),
)
profiles = st.one_of(
    st.just(SingleGaussian()),
    st.builds(SumCentered, a=st.floats(0.1, 2), b=st.floats(0, 2), q=st.floats(0.1, 5),
              m=st.integers(0, 4), xc=st.floats(0, 4)),
    st.builds(SumPaired, q=st.floats(0.1, 5), m=st.integers(0, 4), xc=st.floats(0, 4),
              x1=st.floats(0, 2)),
)


class TestSerialize:
    @settings(max_examples=80, deadline=None)
    @given(cfg=configs, spec=profiles, l2=st.floats(0, 1), fringe=st.floats(0, 1))
    def test_round_trip(self, cfg, spec, l2, fringe):
        sc = Scenario(cfg, spec, None, l2, fringe)
        back = load_config(serialize_config(sc))
        assert back.config == cfg
        assert back.spec == spec
        assert back.l2_threshold == l2
        assert back.fringe_threshold == fringe
        assert serialize_config(back) == serialize_config(sc)

    def test_preset_round_trip_resolved(self):
        sc = load_config("preset = fig5").resolved()
        back = load_config(serialize_config(sc))
        assert back.config == sc.config
        assert back.preset == "fig5"


class TestTrajectories:
    def test_seed_only(self):
        rec = run(SimConfig(n_rays=7, z_final=0.0), SingleGaussian())
        rec.snapshots[0] = rec.snapshots[0]
        buf = io.StringIO()
        write_trajectories(rec, buf)
        rows = csv_rows(buf.getvalue())
        assert tuple(rows[0]) == TRAJECTORY_HEADER
        assert len(rows) == 1 + 7
        for r in rows[1:]:
            assert (float(r[1]), float(r[4]), float(r[5])) == (0.0, 0.0, 1.0)

    def test_three_ray_seed(self):
        # A record trimmed to three rays, as the format allows any ray count.
        rec = run(SimConfig(n_rays=7, z_final=0.0), SingleGaussian())
        wf = rec.snapshots[0].copy()
        for name in ("x", "z", "px", "r", "g"):
            setattr(wf, name, getattr(wf, name)[2:5])
        rec.snapshots = [wf]
        buf = io.StringIO()
        write_trajectories(rec, buf)
        rows = csv_rows(buf.getvalue())[1:]
        assert len(rows) == 3
        assert all(r[1] == "0" and r[4] == "0" and r[5] == "1" for r in rows)

    def test_row_count_and_order(self, short_record):
        buf = io.StringIO()
        write_trajectories(short_record, buf)
        rows = csv_rows(buf.getvalue())[1:]
        n = short_record.config.n_rays
        assert len(rows) == len(short_record.snapshots) * n
        assert [int(r[0]) for r in rows[: 2 * n]] == list(range(n)) * 2
        times = [float(r[1]) for r in rows[::n]]
        assert times == list(short_record.times())

    def test_bit_exact_round_trip(self, short_record):
        buf = io.StringIO()
        write_trajectories(short_record, buf)
        buf.seek(0)
        data = read_trajectories(buf)
        assert np.array_equal(data["t"], short_record.times())
        for name in ("x", "z", "px", "pz", "r", "g"):
            assert np.array_equal(data[name], short_record.series(name)), name

    def test_empty_record_rejected(self, short_record):
        empty = type(short_record)(config=short_record.config, spec=short_record.spec)
        with pytest.raises(ValueError):
            write_trajectories(empty, io.StringIO())

    def test_deterministic_files(self, tmp_path):
        cfg = SimConfig(n_rays=61, z_final=300.0, record_every=50)
        paths = []
        for k in range(2):
            p = tmp_path / f"t{k}.csv"
            write_trajectories(run(cfg, preset("fig5").spec), p)
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()


class TestProfiles:
    def test_identical_columns(self):
        x = np.linspace(-2, 2, 9)
        i = np.exp(-2 * x**2)
        buf = io.StringIO()
        write_profiles((x, i), (x, i), (x, 4 * x**2 - 2), (x, 4 * x**2 - 2), buf)
        rows = csv_rows(buf.getvalue())
        assert tuple(rows[0]) == PROFILE_HEADER
        for r in rows[1:]:
            assert r[1] == r[2]
            assert r[3] == r[4]

    def test_resampled_to_initial_abscissae(self):
        x0 = np.linspace(-1, 1, 5)
        xf = np.linspace(-2, 2, 9)
        buf = io.StringIO()
        write_profiles((x0, np.ones(5)), (xf, 3 * xf + 10), (x0, x0), (xf, xf), buf)
        rows = np.array(csv_rows(buf.getvalue())[1:], dtype=float)
        np.testing.assert_allclose(rows[:, 0], x0)
        np.testing.assert_allclose(rows[:, 2], 3 * x0 + 10, rtol=1e-15)
        np.testing.assert_allclose(rows[:, 4], x0, rtol=1e-15)

    def test_empty_final_rejected(self):
        x = np.linspace(-1, 1, 5)
        with pytest.raises(ValueError):
            write_profiles((x, x), (np.empty(0), np.empty(0)), (x, x), (x, x), io.StringIO())

    def test_fig2_columns_track_oracle(self):
        rec = run(SimConfig(z_final=2 * math.pi / EPS), preset("fig2").spec)
        buf = io.StringIO()
        write_profiles(*profiles_of(rec), buf)
        data = np.array(csv_rows(buf.getvalue())[1:], dtype=float)
        x0 = rec.initial.x
        np.testing.assert_array_equal(data[:, 0], x0)
        np.testing.assert_allclose(data[:, 1], rec.initial.r**2, rtol=1e-15)
        field0 = oracle_field(preset("fig2").spec, EPS, 0.0)
        assert compare_intensity(x0, data[:, 1], field0)["l2_error"] < 1e-4
        fieldz = oracle_field(preset("fig2").spec, EPS, float(np.median(rec.final.z)))
        inside = np.abs(x0) <= rec.final.x[-1]
        m = compare_intensity(rec.final.x, rec.final.r**2, fieldz)
        assert m["l2_error"] < 0.1
        assert np.all(data[inside, 2] >= 0)


class TestSummary:
    def test_without_metrics(self, short_record):
        buf = io.StringIO()
        write_summary(short_record, None, buf)
        d = json.loads(buf.getvalue())
        assert "l2_error" not in d
        assert d["steps"] == short_record.steps
        assert d["termination"] == "z_final reached"
        assert list(d)[:3] == ["config", "profile", "steps"]

    def test_with_metrics(self, short_record):
        wf = short_record.final
        field = oracle_field(short_record.spec, EPS, float(np.median(wf.z)))
        buf = io.StringIO()
        write_summary(short_record, compare_intensity(wf.x, wf.r**2, field), buf)
        d = json.loads(buf.getvalue())
        assert "l2_error" in d
        assert isinstance(d["ray_maxima"], list)

    def test_reruns_differ_only_in_wall_time(self):
        cfg = SimConfig(n_rays=41, z_final=300.0)
        texts = []
        for _ in range(2):
            buf = io.StringIO()
            write_summary(run(cfg, SingleGaussian()), None, buf)
            d = json.loads(buf.getvalue())
            d.pop("wall_time")
            texts.append(d)
        assert texts[0] == texts[1]


class TestBundle:
    def test_manifest(self, tmp_path, short_record):
        sc = load_config("preset = fig2\nn_rays = 41\nz_final = 400\nrecord_every = 100\n")
        bundle = write_bundle(short_record, sc, tmp_path)
        for name in bundle.files:
            assert (tmp_path / name).exists()
        assert bundle.trajectory_sha256 == file_checksum(tmp_path / "trajectories.csv")
        again = RunBundle.from_json((tmp_path / "manifest.json").read_text())
        assert again == bundle
        assert load_config(again.config_text).config == short_record.config
