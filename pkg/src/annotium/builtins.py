"""Built-in processing components.

Four small native components exercise the platform end to end: a plain
tokenizer, an HTML-aware tokenizer that fences markup off from text, a
sentence splitter working over token annotations, and a lexicon-driven
part-of-speech tagger that leaves HTML tokens untagged so downstream
linguistic queries see only real text.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Any, Iterator, Mapping, Optional, Union

from annotium.components import (
    ComponentDescriptor,
    ComponentKind,
    Condition,
    ParameterSpec,
    ParamKind,
    Registry,
)
from annotium.model import Attribute, AttributeValue, Document

TOKEN = "token"
SENTENCE = "sentence"
TYPE_ATTR = "type"
POS_ATTR = "pos"
CONSTITUENTS_ATTR = "constituents"

# Token classes: word tokens by casing, digit runs, punctuation, markup.
EFW = "EFW"  # capitalized word
ELW = "ELW"  # lowercase word
EAW = "EAW"  # any other casing
NUM = "NUM"
PUNC = "PUNC"
HTML = "HTML"

SENTENCE_TERMINATORS = {".", "!", "?"}

_ENTITY = re.compile(r"&(?:[A-Za-z][A-Za-z0-9]*|#[0-9]+|#[xX][0-9A-Fa-f]+);")
_TAG_OPENERS = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ/!?")


class LexiconLoadError(Exception):
    """The lexicon file is unreadable or malformed."""


class Lexicon:
    """Case-sensitive surface-form -> tag map loaded from a two-column TSV."""

    def __init__(self, entries: Mapping[str, str]) -> None:
        self._entries = dict(entries)

    def get(self, surface: str) -> Optional[str]:
        return self._entries.get(surface)

    def __len__(self) -> int:
        return len(self._entries)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Lexicon":
        entries: dict[str, str] = {}
        try:
            lines = Path(path).read_text("utf-8").splitlines()
        except OSError as exc:
            raise LexiconLoadError(f"cannot read lexicon {path}: {exc}") from exc
        for lineno, line in enumerate(lines, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise LexiconLoadError(f"{path}:{lineno}: expected 'surface<TAB>tag'")
            surface, tag = parts[0], parts[1].strip()
            if not tag:
                raise LexiconLoadError(f"{path}:{lineno}: empty tag")
            if surface in entries:
                raise LexiconLoadError(f"{path}:{lineno}: duplicate surface form {surface!r}")
            entries[surface] = tag
        return cls(entries)


def _word_class(word: str) -> str:
    if word.islower():
        return ELW
    if word[0].isupper() and (len(word) == 1 or word[1:].islower()):
        return EFW
    return EAW


def _scan_plain(text: str, offset: int = 0) -> Iterator[tuple[int, int, str]]:
    """Yield (start, end, class) token triples over a text segment.

    Maximal alphabetic runs become word tokens, maximal digit runs NUM,
    every other non-whitespace character a single PUNC token.
    """
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isalpha():
            j = i + 1
            while j < n and text[j].isalpha():
                j += 1
            yield (offset + i, offset + j, _word_class(text[i:j]))
            i = j
        elif ch.isdecimal():
            j = i + 1
            while j < n and text[j].isdecimal():
                j += 1
            yield (offset + i, offset + j, NUM)
            i = j
        else:
            yield (offset + i, offset + i + 1, PUNC)
            i += 1


def _scan_markup(text: str) -> list[tuple[int, int]]:
    """Find [start, end) regions of HTML markup: tags, comments, entities.

    Lenient by design: a ``<`` that does not open a tag or comment (no
    closing ``>``, or not followed by a tag-starting character) is left for
    the plain scanner, which emits it as PUNC.
    """
    regions: list[tuple[int, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "<":
            if text.startswith("<!--", i):
                close = text.find("-->", i + 4)
                if close != -1:
                    regions.append((i, close + 3))
                    i = close + 3
                    continue
            elif i + 1 < n and text[i + 1] in _TAG_OPENERS:
                close = text.find(">", i + 1)
                if close != -1:
                    regions.append((i, close + 1))
                    i = close + 1
                    continue
            i += 1
        elif ch == "&":
            match = _ENTITY.match(text, i)
            if match:
                regions.append((i, match.end()))
                i = match.end()
            else:
                i += 1
        else:
            i += 1
    return regions


def tokenize(doc: Document) -> list[int]:
    """Add one token annotation per non-whitespace run; returns new ids."""
    return [
        doc.add_annotation(TOKEN, [(start, end)], [Attribute.string(TYPE_ATTR, cls)])
        for start, end, cls in _scan_plain(doc.text)
    ]


def tokenize_html(doc: Document) -> list[int]:
    """Tokenize like :func:`tokenize` but emit markup regions as HTML tokens.

    Tags, comments and character entities become single tokens of class
    HTML; everything between them is tokenized by the plain rules.
    """
    text = doc.text
    tokens: list[tuple[int, int, str]] = []
    cursor = 0
    for start, end in _scan_markup(text):
        tokens.extend(_scan_plain(text[cursor:start], cursor))
        tokens.append((start, end, HTML))
        cursor = end
    tokens.extend(_scan_plain(text[cursor:], cursor))
    return [
        doc.add_annotation(TOKEN, [(start, end)], [Attribute.string(TYPE_ATTR, cls)])
        for start, end, cls in tokens
    ]


def _token_text(doc: Document, token) -> str:
    return "".join(doc.text[s.start : s.end] for s in token.spans)


def split_sentences(doc: Document) -> list[int]:
    """Group tokens into sentences ending at '.', '!' or '?' PUNC tokens.

    Each sentence annotation spans its first to last constituent token and
    lists the member token ids in its ``constituents`` attribute.
    """
    added: list[int] = []
    current: list = []

    def flush() -> None:
        if not current:
            return
        span = (current[0].spans[0].start, current[-1].spans[-1].end)
        attrs = [Attribute.ref_set(CONSTITUENTS_ATTR, [t.id for t in current])]
        added.append(doc.add_annotation(SENTENCE, [span], attrs))
        current.clear()

    for token in doc.select_by_type(TOKEN):
        current.append(token)
        is_punc = token.get_attribute(TYPE_ATTR) == AttributeValue.string(PUNC)
        if is_punc and _token_text(doc, token) in SENTENCE_TERMINATORS:
            flush()
    flush()
    return added


def pos_tag(doc: Document, lexicon: Lexicon) -> list[int]:
    """Write a ``pos`` attribute on every non-HTML token; returns their ids.

    Tagging order: exact lexicon lookup of the token text, then the token's
    own text for PUNC tokens, then the catch-all "NN". HTML tokens are never
    tagged, which keeps pos queries blind to markup.
    """
    tagged: list[int] = []
    for token in doc.select_by_type(TOKEN):
        token_class = token.get_attribute(TYPE_ATTR)
        if token_class == AttributeValue.string(HTML):
            continue
        surface = _token_text(doc, token)
        tag = lexicon.get(surface)
        if tag is None:
            tag = surface if token_class == AttributeValue.string(PUNC) else "NN"
        token.put_attribute(Attribute.string(POS_ATTR, tag))
        tagged.append(token.id)
    return tagged


# ---------------------------------------------------------------------------
# Component descriptors and registration

TOKENIZER = ComponentDescriptor(
    name="tokenizer",
    kind=ComponentKind.NATIVE,
    post=(Condition(TOKEN), Condition(TOKEN, TYPE_ATTR)),
    viewers=("highlights",),
)

HTML_TOKENIZER = ComponentDescriptor(
    name="html_tokenizer",
    kind=ComponentKind.NATIVE,
    post=(Condition(TOKEN), Condition(TOKEN, TYPE_ATTR)),
    viewers=("highlights",),
)

SENTENCE_SPLITTER = ComponentDescriptor(
    name="sentence_splitter",
    kind=ComponentKind.NATIVE,
    pre=(Condition(TOKEN),),
    post=(Condition(SENTENCE), Condition(SENTENCE, CONSTITUENTS_ATTR)),
    viewers=("highlights", "outline"),
)

# The tagger itself only reads tokens, but the descriptor also asks for
# sentences so that pipelines order it after the splitter.
POS_TAGGER = ComponentDescriptor(
    name="pos_tagger",
    kind=ComponentKind.NATIVE,
    pre=(Condition(TOKEN), Condition(SENTENCE)),
    post=(Condition(TOKEN, POS_ATTR),),
    params=(ParameterSpec("lexicon", ParamKind.PATH, required=True),),
    viewers=("highlights", "attributes"),
)


def _run_tokenizer(doc: Document, params: Mapping[str, Any]) -> None:
    tokenize(doc)


def _run_html_tokenizer(doc: Document, params: Mapping[str, Any]) -> None:
    tokenize_html(doc)


def _run_sentence_splitter(doc: Document, params: Mapping[str, Any]) -> None:
    split_sentences(doc)


def _run_pos_tagger(doc: Document, params: Mapping[str, Any]) -> None:
    pos_tag(doc, Lexicon.load(params["lexicon"]))


def register_builtins(registry: Registry) -> Registry:
    """Register the four built-in components; returns the registry."""
    registry.register(TOKENIZER, _run_tokenizer)
    registry.register(HTML_TOKENIZER, _run_html_tokenizer)
    registry.register(SENTENCE_SPLITTER, _run_sentence_splitter)
    registry.register(POS_TAGGER, _run_pos_tagger)
    return registry


def builtin_registry() -> Registry:
    """A fresh registry pre-loaded with the built-in components."""
    return register_builtins(Registry())
