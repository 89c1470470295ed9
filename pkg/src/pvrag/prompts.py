"""Prompt templates, assertion construction, and completion parsing.

Every string here is part of the engine's external behavior: prompts are
golden-file tested byte for byte, so any edit is a breaking change. All
line endings are "\n".
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import MalformedPrompt, Unparseable

INSTRUCTION = (
    "You are asked to answer the following question with a single word: "
    "YES or NO. Base your answer strictly on the RAG Results provided below. "
    "After your YES or NO answer, briefly explain your reasoning using the "
    "information from the RAG Results. Do not infer or speculate beyond the "
    "information provided. Question:\n\n"
)

# The no-retrieval variant: the same instruction with the two retrieval
# references dropped, so the four pipelines differ only in what they retrieve.
BASELINE_INSTRUCTION = (
    "You are asked to answer the following question with a single word: "
    "YES or NO. After your YES or NO answer, briefly explain your reasoning. "
    "Do not infer or speculate beyond the information provided. Question:\n\n"
)

QUESTION_TEMPLATE = "Is {se} an adverse effect of {drug}?"

_RAG_POSITIVE = (
    "Yes, the side effect {se} is listed as an adverse effect, "
    "adverse reaction or side effect of the drug {drug}"
)
_RAG_NEGATIVE = (
    "No, the side effect {se} is not listed as an adverse effect, "
    "adverse reaction or side effect of the drug {drug}"
)
_GRAPH_POSITIVE = "{drug} is known to be associated with {se} as a side effect"
_GRAPH_NEGATIVE = "{drug} is not known to be associated with {se} as a side effect"


def build_question(se_name: str, drug_name: str) -> str:
    return QUESTION_TEMPLATE.format(se=se_name, drug=drug_name)


def build_assertion(
    associated: bool, pipeline: str, drug_name: str, se_name: str
) -> str:
    """The retrieval-summary sentence appended to the prompt.

    Graph assertions start a sentence, so the drug name is capitalized
    there; rag assertions embed both names mid-sentence unchanged.
    """
    if pipeline == "graphrag":
        template = _GRAPH_POSITIVE if associated else _GRAPH_NEGATIVE
        return template.format(drug=_capitalize(drug_name), se=se_name)
    template = _RAG_POSITIVE if associated else _RAG_NEGATIVE
    return template.format(drug=drug_name, se=se_name)


def _capitalize(name: str) -> str:
    return name[:1].upper() + name[1:] if name else name


def build_modified_prompt(question: str, assertion: str) -> str:
    """Instruction, question, and assertion concatenated byte-exactly."""
    if not question or not assertion:
        raise ValueError("question and assertion must be nonempty")
    return INSTRUCTION + question + assertion


def build_baseline_prompt(question: str) -> str:
    if not question:
        raise ValueError("question must be nonempty")
    return BASELINE_INSTRUCTION + question


@dataclass(frozen=True)
class ParsedCompletion:
    decision: str  # "YES" | "NO"
    explanation: str


def parse_yes_no(completion: str) -> ParsedCompletion:
    """Read the leading YES/NO token; anything else is a contract breach.

    Leading whitespace and punctuation are skipped, the first word is
    matched case-insensitively, and the rest of the completion is kept as
    the explanation. Completions that lead with neither token raise
    Unparseable instead of being coerced to NO.
    """
    m = re.match(r"[^\w]*(\w+)", completion or "")
    if m is None:
        raise Unparseable(completion or "")
    word = m.group(1).upper()
    if word not in ("YES", "NO"):
        raise Unparseable(completion)
    explanation = completion[m.end(1) :].lstrip(" \t,.:;!—-")
    return ParsedCompletion(decision=word, explanation=explanation)


# --- assertion classification (used by the deterministic backend) -----------

_RAG_RE = re.compile(
    r"(?s).*(?P<lead>Yes|No), the side effect (?P<se>.+?) is "
    r"(?P<neg>not )?listed as an adverse effect, adverse reaction or side "
    r"effect of the drug (?P<drug>.+)"
)
_GRAPH_RE = re.compile(
    r"(?s).*\?(?P<drug>.+?) is (?P<neg>not )?known to be associated with "
    r"(?P<se>.+) as a side effect"
)


@dataclass(frozen=True)
class ClassifiedAssertion:
    positive: bool
    assertion: str


def classify_assertion(prompt: str) -> ClassifiedAssertion | None:
    """Find the trailing assertion of a retrieval prompt, if any.

    Returns None when no template matches; raises MalformedPrompt when a
    rag template matches but its Yes/No lead contradicts its not-clause.
    """
    m = _RAG_RE.fullmatch(prompt)
    if m is not None:
        positive_lead = m.group("lead") == "Yes"
        negated = m.group("neg") is not None
        if positive_lead == negated:
            raise MalformedPrompt(
                "assertion lead and negation disagree: "
                + prompt[m.start("lead") :][:120]
            )
        return ClassifiedAssertion(
            positive=positive_lead, assertion=prompt[m.start("lead") :]
        )
    m = _GRAPH_RE.fullmatch(prompt)
    if m is not None:
        return ClassifiedAssertion(
            positive=m.group("neg") is None, assertion=prompt[m.start("drug") :]
        )
    return None
