from hypothesis import given, settings
from hypothesis import strategies as st

from infodig.forge import retention_probability
from infodig.protocol import Step, ToolCall, ToolResult, Trajectory, append_step, dump_trajectory
from infodig.reader import DocumentText, iter_chunks
from infodig.searcher import SearchHit, accumulate_indexed
from infodig.suffix import registrable_domain
from infodig.textnorm import contains_answer, normalize_answer

label = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789", min_size=1, max_size=8)


@given(st.text(max_size=200))
def test_normalize_is_idempotent(text):
    once = normalize_answer(text)
    assert normalize_answer(once) == once


@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=60))
def test_answers_contain_themselves(answer):
    from infodig.textnorm import normalize_compact

    if normalize_compact(answer):  # punctuation-only answers have no compact form
        assert contains_answer(f"prefix {answer} suffix", answer)


@given(st.text(min_size=0, max_size=500), st.integers(min_value=1, max_value=64))
def test_chunking_partitions_text(text, window):
    doc = DocumentText(file_id="f" * 64, units=((0, text),) if text else (), char_total=len(text))
    chunks = list(iter_chunks(doc, window))
    assert "".join(chunks) == doc.full_text()
    assert all(len(c) <= window for c in chunks)


@given(st.lists(label, min_size=1, max_size=6), st.data())
def test_accumulate_is_idempotent(names, data):
    hits = [SearchHit(title=n, link=f"http://{n}.example/p", snippet=f"about {n}", position=i + 1)
            for i, n in enumerate(names)]
    crawl_subset = data.draw(st.lists(st.sampled_from(hits), max_size=len(hits), unique_by=lambda h: h.link))
    from infodig.searcher import CrawlResult

    crawls = [CrawlResult(url=h.link, fetched_at=0.0, text=f"page {h.title}", outlinks=(), status=200)
              for h in crawl_subset]
    once = accumulate_indexed(hits, crawls, queries=["q"])
    twice = accumulate_indexed(list(once.hits), list(once.crawls), queries=list(once.queries))
    assert twice == once
    assert len(once.provenance) == len(once.hits) + len(once.crawls)


@given(st.integers(min_value=1, max_value=16))
def test_retention_probability_bounds_and_monotonicity(group_size):
    probs = [retention_probability(k, group_size) for k in range(1, group_size + 1)]
    assert all(0 < p <= 1 for p in probs)
    assert probs == sorted(probs, reverse=True)
    assert probs[0] == 1.0  # hardest bucket always kept


@given(st.lists(label, min_size=1, max_size=4))
def test_registrable_domain_is_idempotent(labels):
    host = ".".join(labels + ["com"])
    root = registrable_domain(host)
    assert registrable_domain(root) == root
    assert host.endswith(root)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.text(max_size=30), st.integers(0, 3)), min_size=1, max_size=8))
def test_trajectory_steps_serialize_append_only(specs):
    traj = Trajectory(owner="planner", ref="t")
    prefixes = []
    for i, (thought, n_calls) in enumerate(specs):
        calls = tuple(ToolCall("search", {"k": j}) for j in range(n_calls))
        results = tuple(ToolResult("ok", j) for j in range(n_calls))
        append_step(traj, Step(i, thought, calls, results))
        traj.terminated_reason = "budget_exhausted"
        lines = dump_trajectory(traj).splitlines()[:-1]  # drop the end record
        traj.terminated_reason = None
        assert lines[: len(prefixes)] == prefixes
        prefixes = lines
