import pytest
from hypothesis import given
from hypothesis import strategies as st

from indocr.latency import (
    DEFAULT_GROUPS,
    LatencyParams,
    TimingTrace,
    TokenProfile,
    estimate_params,
    load_profiles,
    project_latency,
    project_tokens,
    projection_table,
    summarize_latency,
)

PARAMS = LatencyParams(ttft=0.125, inter_token=0.004)

# published rows: tokens for 200 words, and projected seconds
PUBLISHED_TOKENS = {"bn": 1174.8, "hi": 951.4, "kn": 2242.2, "ml": 2514.0, "mr": 1292.4,
                  "or": 2334.2, "pa": 1387.2, "ta": 1873.6, "te": 2646.6, "en": 280.0}
PUBLISHED_SECONDS = {"bn": 4.9, "hi": 4.0, "kn": 9.2, "ml": 10.3, "mr": 5.3,
                   "or": 9.5, "pa": 5.7, "ta": 7.7, "te": 10.8, "en": 1.3}


class TestProjection:
    def test_english_tokens(self):
        assert project_tokens(200, TokenProfile("en", 1.4)) == pytest.approx(280.0)

    def test_zero_words(self):
        assert project_tokens(0, TokenProfile("te", 13.2)) == 0.0

    def test_telugu_tokens_near_published(self):
        t = project_tokens(200, TokenProfile("te", 13.2))
        assert t == pytest.approx(2640.0)
        assert abs(t - 2646.6) / 2646.6 < 0.003

    def test_latency_no_tokens(self):
        assert project_latency(0, PARAMS) == 0.125

    def test_latency_hindi(self):
        s = project_latency(951.4, PARAMS)
        assert s == pytest.approx(3.9306)
        assert abs(s - 4.0) <= 0.15

    def test_latency_telugu(self):
        s = project_latency(2646.6, PARAMS)
        assert s == pytest.approx(10.7114)
        assert abs(s - 10.8) <= 0.15

    @pytest.mark.parametrize("lang", list(PUBLISHED_TOKENS))
    def test_published_token_counts_reproduce_published_latency(self, lang):
        assert abs(project_latency(PUBLISHED_TOKENS[lang], PARAMS) - PUBLISHED_SECONDS[lang]) <= 0.15

    @given(st.floats(0, 1e5), st.floats(0, 1e5))
    def test_affine(self, a, b):
        p = LatencyParams(0.125, 0.004)
        diff = project_latency(a + b, p) - project_latency(b, p)
        assert diff == pytest.approx(a * p.inter_token, rel=1e-9, abs=1e-9)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            project_tokens(-1, TokenProfile("en", 1.4))
        with pytest.raises(ValueError):
            project_latency(-1, PARAMS)

    def test_param_invariants(self):
        with pytest.raises(ValueError):
            LatencyParams(-0.1, 0.004)
        with pytest.raises(ValueError):
            LatencyParams(0.1, 0.0)
        with pytest.raises(ValueError):
            TokenProfile("en", 0)


class TestProfiles:
    def test_bundled(self):
        profiles = load_profiles()
        assert [p.language for p in profiles] == list(PUBLISHED_TOKENS)
        assert all(p.source == "published_table" for p in profiles)
        assert {p.language: p.tokens_per_word for p in profiles}["te"] == 13.2

    def test_bundled_ratios_match_published_tokens(self):
        # published ratios agree with token counts / 200 to one display step;
        # mr is published as 6.4 although 1292.4 / 200 = 6.462
        for p in load_profiles():
            assert abs(p.tokens_per_word - PUBLISHED_TOKENS[p.language] / 200) < 0.1

    def test_custom_file(self, tmp_path):
        f = tmp_path / "p.tsv"
        f.write_text("language\ttokens_per_word\nxx\t2.5\n")
        (p,) = load_profiles(f)
        assert (p.language, p.tokens_per_word, p.source) == ("xx", 2.5, "measured")

    def test_bad_header(self, tmp_path):
        f = tmp_path / "p.tsv"
        f.write_text("lang\tratio\nxx\t2.5\n")
        with pytest.raises(ValueError):
            load_profiles(f)

    def test_table_order(self):
        rows = projection_table(load_profiles(), PARAMS, 200)
        assert [r[0] for r in rows] == list(PUBLISHED_TOKENS)


class TestEstimate:
    def test_single_trace(self):
        p = estimate_params([TimingTrace(0.0, 0.125, 0.925, 201)])
        assert p.ttft == pytest.approx(0.125)
        assert p.inter_token == pytest.approx(0.004)

    def test_duplicate_traces(self):
        t = TimingTrace(0.0, 0.125, 0.925, 201)
        one, two = estimate_params([t]), estimate_params([t, t])
        assert two.ttft == pytest.approx(one.ttft)
        assert two.inter_token == pytest.approx(one.inter_token)

    def test_ttft_mean(self):
        p = estimate_params([TimingTrace(0, 0.1, 0.5, 5), TimingTrace(0, 0.2, 0.6, 5)])
        assert p.ttft == pytest.approx(0.15)

    def test_single_token_rejected(self):
        with pytest.raises(ValueError, match="undefined"):
            estimate_params([TimingTrace(0, 0.1, 0.1, 1)])

    def test_trace_ordering(self):
        with pytest.raises(ValueError):
            TimingTrace(0.0, 0.2, 0.1, 3)

    @given(st.floats(0, 2), st.floats(1e-4, 0.05), st.integers(2, 3000), st.floats(0, 1e4))
    def test_recovers_synthesized(self, ttft, tau, n, t0):
        trace = TimingTrace(t0, t0 + ttft, t0 + ttft + (n - 1) * tau, n)
        p = estimate_params([trace])
        assert p.ttft == pytest.approx(ttft, abs=1e-9)
        assert p.inter_token == pytest.approx(tau, rel=1e-9, abs=1e-12)


class TestSummarize:
    def test_single_group(self):
        (s,) = summarize_latency([("en", 3.10)] * 4, DEFAULT_GROUPS)
        assert (s.group, s.n) == ("English", 4)
        assert s.mean_seconds == pytest.approx(3.10)

    def test_one_per_group(self):
        out = summarize_latency([("en", 1.0), ("hi", 2.0), ("te", 3.0)], DEFAULT_GROUPS)
        assert [(s.group, s.mean_seconds) for s in out] == [("English", 1.0), ("Hindi", 2.0), ("Others", 3.0)]

    def test_ten_records_hand_average(self):
        recs = [("en", 1.0), ("en", 2.0), ("hi", 4.0), ("hi", 6.0), ("hi", 8.0),
                ("te", 10.0), ("ml", 12.0), ("bn", 2.0), ("ta", 3.0), ("or", 3.0)]
        out = {s.group: s for s in summarize_latency(recs, DEFAULT_GROUPS)}
        assert out["English"].mean_seconds == pytest.approx(1.5)
        assert out["Hindi"].mean_seconds == pytest.approx(6.0)
        assert out["Others"].mean_seconds == pytest.approx(6.0)
        assert sum(s.n for s in out.values()) == 10

    def test_order_configurable(self):
        out = summarize_latency([("en", 1.0), ("hi", 2.0)], DEFAULT_GROUPS, order=["Hindi", "English"])
        assert [s.group for s in out] == ["Hindi", "English"]

    def test_unmapped_language(self):
        with pytest.raises(KeyError, match="xx"):
            summarize_latency([("xx", 1.0)], DEFAULT_GROUPS)
