"""Deterministic offline providers for the --mock-providers mode.

The pipeline generator recognizes the instruction phrase of each built-in
prompt template and derives its output from the prompt content alone, so the
whole ingest/augment/enrich/serve flow runs offline and reproducibly: the
same inputs always produce byte-identical stores.
"""

from __future__ import annotations

import re

from .chunking import split_sentences
from .providers import MockEmbedder, MockGenerator, parse_qa_pairs

_QUESTION_RE = re.compile(r"QUESTION:\s*(.+)", re.DOTALL)
_PASSAGE_RE = re.compile(r"PASSAGE:\s*(.+)", re.DOTALL)
_DOCUMENT_RE = re.compile(r"DOCUMENT:\s*(.+)", re.DOTALL)
_COUNT_RE = re.compile(r"Write (\d+) different paraphrases")


def _section(pattern: re.Pattern, prompt: str) -> str:
    match = pattern.search(prompt)
    return match.group(1).strip() if match else prompt.strip()


def _first_sentence(text: str) -> str:
    return split_sentences(text)[0]


def _context(prompt: str) -> str:
    document = _section(_DOCUMENT_RE, prompt)
    return f"General overview: {_first_sentence(document)}"


def _rewrite(prompt: str) -> str:
    # Identity rewrite keeps the pipeline deterministic and auditable.
    return _section(_PASSAGE_RE, prompt)


def _condense(prompt: str) -> str:
    return _first_sentence(_section(_PASSAGE_RE, prompt))


def _qa_pairs(prompt: str) -> str:
    passage = _section(_PASSAGE_RE, prompt)
    sentences = split_sentences(passage)[:3]
    lines = []
    for sentence in sentences:
        topic = " ".join(sentence.split()[:6]).rstrip(".,;:")
        lines.append(f"Q: What should I know about {topic}?")
        lines.append(f"A: {sentence}")
    return "\n".join(lines)


def _expand(prompt: str) -> str:
    pairs = parse_qa_pairs(prompt)
    if not pairs:
        return ""
    question, answer = pairs[-1]
    base = question.rstrip("?")
    return (
        f"Q: Could you explain: {base}?\nA: {answer}\n"
        f"Q: Where can I find details about {base.lower()}?\nA: {answer}"
    )


def _paraphrases(prompt: str) -> str:
    question = _section(_QUESTION_RE, prompt)
    count_match = _COUNT_RE.search(prompt)
    count = int(count_match.group(1)) if count_match else 3
    base = question.rstrip("?")
    variants = [
        f"Can you tell me {base[:1].lower()}{base[1:]}?",
        f"I would like to know {base[:1].lower()}{base[1:]}.",
        f"{base}, please?",
    ]
    variants += [f"{base} (asked another way, take {i})?" for i in range(4, count + 1)]
    return "\n".join(variants[:count])


def _chat_answer(prompt: str) -> str:
    context = _section(_PASSAGE_RE, prompt) if "PASSAGE:" in prompt else prompt
    if "CONTEXT:" in prompt:
        body = prompt.split("CONTEXT:", 1)[1]
        body = body.split("QUESTION:", 1)[0]
        first = next((ln.strip() for ln in body.splitlines() if ln.strip()), "")
        return f"Based on the available documents: {first}"
    return f"I do not have a vetted answer for this. You asked: {_first_sentence(context)}"


def pipeline_generator() -> MockGenerator:
    """Generator whose rules cover every built-in pipeline and chat prompt."""
    return MockGenerator(
        rules=[
            ("describe its overall context", _context),
            ("Rewrite the passage below", _rewrite),
            ("Condense the following passage", _condense),
            ("Extract question-answer pairs", _qa_pairs),
            ("additional related question-answer pairs", _expand),
            ("different paraphrases of the question", _paraphrases),
        ],
        default=_chat_answer,
    )


def mock_embedder(dimension: int = 64, seed: int = 0) -> MockEmbedder:
    return MockEmbedder(dimension=dimension, seed=seed)
