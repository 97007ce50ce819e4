import io

import pytest
from PIL import Image

from infodig.errors import GatewayError
from infodig.gateway import (
    ModelProfile,
    SamplingParams,
    complete,
    describe_image,
    parse_tool_blocks,
)


def png_bytes(size=(1, 1), color="white") -> bytes:
    img = Image.new("RGB", size, color)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def scripted(script, role="teacher", variant=0):
    return ModelProfile(role=role, endpoint="scripted", script=script, variant=variant)


CTX = [{"role": "user", "content": "find the fare"}]


class TestComplete:
    def test_temperature_zero_is_deterministic(self):
        profile = scripted([{"match": "fare", "response": "42"}])
        first = complete(profile, CTX, SamplingParams(temperature=0.0, group_size=1))
        second = complete(profile, CTX, SamplingParams(temperature=0.0, group_size=1))
        assert [t.text for t in first] == [t.text for t in second] == ["42"]

    def test_group_of_four_returns_four_turns(self):
        profile = scripted([{"match": "fare", "variants": ["a", "b", "c", "d"]}])
        turns = complete(profile, CTX, SamplingParams(temperature=0.4, group_size=4))
        assert len(turns) == 4
        assert [t.text for t in turns] == ["a", "b", "c", "d"]

    def test_group_size_contract_across_sizes(self):
        profile = scripted([{"match": "", "response": "x"}])
        for g in (1, 2, 3, 5, 8):
            turns = complete(profile, CTX, SamplingParams(temperature=0.4, group_size=g))
            assert len(turns) == g

    def test_scripted_tool_calls_match_fixture(self):
        script = [{
            "match": "fare",
            "response": 'searching\n```tool\n{"tool": "search", "args": {"query_list": ["x"], "top_k": 3}}\n```',
        }]
        turn = complete(scripted(script), CTX, SamplingParams())[0]
        assert len(turn.parsed_tool_calls) == 1
        call = turn.parsed_tool_calls[0]
        assert call.tool_name == "search"
        assert call.arguments == {"query_list": ["x"], "top_k": 3}
        assert not turn.parse_warning

    def test_malformed_tool_block_flags_warning(self):
        script = [{"match": "fare", "response": '```tool\n{"tool": broken\n```'}]
        turn = complete(scripted(script), CTX, SamplingParams())[0]
        assert turn.parsed_tool_calls == ()
        assert turn.parse_warning

    def test_empty_context_rejected(self):
        with pytest.raises(GatewayError):
            complete(scripted([{"match": "", "response": "x"}]), [], SamplingParams())

    def test_no_matching_entry_raises(self):
        with pytest.raises(GatewayError):
            complete(scripted([{"match": "nope", "response": "x"}]), CTX, SamplingParams())

    def test_max_uses_advances_the_script(self):
        profile = scripted([
            {"match": "fare", "response": "first", "max_uses": 1},
            {"match": "fare", "response": "second"},
        ])
        client = profile.client()
        assert client.complete(CTX, SamplingParams())[0].text == "first"
        assert client.complete(CTX, SamplingParams())[0].text == "second"
        assert client.complete(CTX, SamplingParams())[0].text == "second"

    def test_extract_template_reads_the_message(self):
        profile = scripted([{"match": "found", "response": "{{extract:fare ([0-9.]+)}}"}])
        ctx = [{"role": "user", "content": "3 flights found. best fare 12.50 today"}]
        assert complete(profile, ctx, SamplingParams())[0].text == "12.50"

    def test_variant_selection_for_grouped_runs(self):
        profile = scripted([{"match": "fare", "variants": ["right", "wrong"]}], variant=1)
        turn = complete(profile, CTX, SamplingParams(temperature=0.4, group_size=1))[0]
        assert turn.text == "wrong"
        # temperature 0 pins variant 0 regardless
        turn = complete(profile, CTX, SamplingParams(temperature=0.0, group_size=1))[0]
        assert turn.text == "right"

    def test_scripted_profile_requires_script(self):
        with pytest.raises(GatewayError):
            ModelProfile(role="teacher", endpoint="scripted")


class TestParseToolBlocks:
    def test_multiple_blocks(self):
        text = (
            '```tool\n{"tool": "a", "args": {}}\n```\nthen\n'
            '```tool\n{"tool": "b", "args": {"x": 1}}\n```'
        )
        calls, warn = parse_tool_blocks(text)
        assert [c.tool_name for c in calls] == ["a", "b"]
        assert not warn

    def test_plain_text_has_no_calls(self):
        calls, warn = parse_tool_blocks("just an answer")
        assert calls == () and not warn


class TestDescribeImage:
    def test_scripted_fixture_by_hash(self):
        import hashlib

        png = png_bytes()
        script = {"by_image_sha256": {hashlib.sha256(png).hexdigest(): "a tiny square"}}
        profile = ModelProfile(role="vision", endpoint="scripted", script=script)
        assert describe_image(profile, png, "describe") == "a tiny square"

    def test_prompt_fallback_keyed_fixture(self):
        script = {"by_prompt": [{"match": "chart", "response": "bars: 12, 30, 7"}]}
        profile = ModelProfile(role="vision", endpoint="scripted", script=script)
        assert describe_image(profile, png_bytes(), "describe the chart page") == "bars: 12, 30, 7"

    def test_role_mismatch_rejected(self):
        profile = ModelProfile(role="judge", endpoint="scripted", script=[])
        with pytest.raises(GatewayError):
            describe_image(profile, png_bytes(), "x")

    def test_non_image_bytes_rejected(self):
        profile = ModelProfile(role="vision", endpoint="scripted", script={})
        with pytest.raises(GatewayError):
            describe_image(profile, b"definitely text", "x")
        with pytest.raises(GatewayError):
            describe_image(profile, b"", "x")
