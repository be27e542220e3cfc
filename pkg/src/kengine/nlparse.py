"""Template grammar: chat utterances become query trees or robot commands.

The grammar is deliberately small and deterministic (see docs/grammar.md).
Questions compile to nested reasoning calls; imperatives become commands
whose references are resolved against the grounded scene, asking back when
a reference is ambiguous.  Adjectives in front of the head noun become
state filters, an infinitive ("something to drink") becomes an action
filter, and a trailing "in/on <place>" becomes a location filter.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass, field, replace

from .kg.graph import KnowledgeGraph
from .sal import CallTree, eval_call_tree

ARTICLES = {"the", "a", "an", "please"}
_PUNCT = re.compile(r"[?!.,;:]+")

TEMPLATES = [
    "where is <object>",
    "where is something to <action>",
    "how many <object> are in <location>",
    "what is on <location>",
    "go to <object>",
    "bring <object> to <location>",
    "grab <object>",
    "put <object> on <location>",
    "open <object>",
    "close <object>",
    "switch on <object>",
    "switch off <object>",
    "look at <object>",
]


def tokenize(text: str) -> list[str]:
    cleaned = _PUNCT.sub(" ", text.lower())
    return [t for t in cleaned.split() if t not in ARTICLES]


# ----------------------------------------------------------------------
# parse results
# ----------------------------------------------------------------------

@dataclass
class NounPhrase:
    head: str                     # lemma of the head noun (singularized)
    states: list[str] = field(default_factory=list)
    action: str | None = None     # from "... to <verb>"
    location: "NounPhrase | None" = None  # from "... in/on <place>"
    span: tuple[int, int] = (0, 0)  # token range in the normalized utterance

    def to_tree(self) -> CallTree:
        args: dict = {"object": self.head}
        if self.action:
            args["action"] = self.action
        if self.location:
            args["location"] = self.location.head
        if self.states:
            args["state"] = self.states[0]
        tree = CallTree(function="get_stm_objects", args=args)
        for state in self.states[1:]:
            tree = CallTree(function="get_stm_objects",
                            args={"object": tree, "state": state})
        return tree


@dataclass
class Question:
    tree: CallTree


@dataclass
class Command:
    verb: str                       # matches the simulator's verb table
    object: NounPhrase
    dest: NounPhrase | None = None


@dataclass
class ClarificationReply:
    instance_id: str


@dataclass
class Unparseable:
    reason: str
    hint: str | None = None
    templates: tuple[str, ...] = tuple(TEMPLATES)


ParseResult = Question | Command | ClarificationReply | Unparseable


# ----------------------------------------------------------------------
# dialogue state
# ----------------------------------------------------------------------

@dataclass
class Candidate:
    instance_id: str
    feature: str  # distinguishing room lemma, or the bare id as fallback


@dataclass
class PendingClarification:
    command: Command
    slot: str                      # which reference is ambiguous: object | dest
    candidates: list[Candidate]
    resolved: dict[str, str]       # slots already resolved to instance ids
    question: str


@dataclass
class DialogueState:
    pending: PendingClarification | None = None

    def clear(self) -> None:
        self.pending = None


# ----------------------------------------------------------------------
# reference resolution
# ----------------------------------------------------------------------

@dataclass
class Unique:
    instance_id: str


@dataclass
class Ambiguous:
    ref: NounPhrase
    candidates: list[Candidate]


@dataclass
class NoMatch:
    reason: str


Resolution = Unique | Ambiguous | NoMatch


def resolve_reference(ref: NounPhrase, graph: KnowledgeGraph) -> Resolution:
    """Ground a noun phrase in the scene via the reasoning engine."""
    try:
        ids, _ = eval_call_tree(graph, ref.to_tree())
    except Exception as exc:
        return NoMatch(reason=getattr(exc, "message", str(exc)))
    ids = sorted(ids)
    if not ids:
        return NoMatch(reason=f"nothing in the scene matches {ref.head!r}")
    if len(ids) == 1:
        return Unique(instance_id=ids[0])
    candidates = []
    for iid in ids:
        chain = graph.containment_chain(iid)
        room = chain[-1][0] if chain else iid
        candidates.append(Candidate(instance_id=iid,
                                    feature=graph.display_lemma(room)))
    features = [c.feature for c in candidates]
    if len(set(features)) != len(features):
        candidates = [Candidate(instance_id=c.instance_id, feature=c.instance_id)
                      for c in candidates]
    return Ambiguous(ref=ref, candidates=candidates)


def render_clarification(ambiguous: Ambiguous, command: Command, slot: str,
                         resolved: dict[str, str]) -> tuple[str, PendingClarification]:
    """Phrase the disambiguation question and the state to interpret the reply."""
    head = ambiguous.ref.head
    features = [c.feature for c in ambiguous.candidates]
    if features and features[0] == ambiguous.candidates[0].instance_id:
        listing = " or ".join(features)
        question = f"Which {head} do you mean: {listing}?"
    else:
        listing = " or the ".join(features)
        question = f"Do you mean the {head} in the {listing}?"
    pending = PendingClarification(
        command=command, slot=slot, candidates=list(ambiguous.candidates),
        resolved=dict(resolved), question=question)
    return question, pending


# ----------------------------------------------------------------------
# the parser
# ----------------------------------------------------------------------

class Parser:
    """Stateless template parser; the lemma lexicon (for multi-word heads)
    is fixed at construction, so parsing is pure in (utterance, dialogue)."""

    def __init__(self, lexicon: set[str]):
        self.lexicon = set(lexicon)

    @classmethod
    def from_graph(cls, graph: KnowledgeGraph) -> "Parser":
        lemmas = {lemma for cid in graph.concept_ids()
                  for lemma in graph.concept(cid).lemmas}
        return cls(lemmas)

    # -- helpers ---------------------------------------------------------

    def _singular(self, token: str) -> str | None:
        if token in self.lexicon:
            return token
        if token.endswith("es") and token[:-2] in self.lexicon:
            return token[:-2]
        if token.endswith("s") and token[:-1] in self.lexicon:
            return token[:-1]
        return None

    def _match_head(self, tokens: list[str]) -> tuple[str, int] | None:
        """Longest lexicon suffix of the tokens; returns (lemma, start index)."""
        for width in range(min(3, len(tokens)), 0, -1):
            start = len(tokens) - width
            phrase = tokens[start:]
            joined = " ".join(phrase)
            lemma = self._singular(joined)
            if lemma is not None:
                return lemma, start
            if width > 1:
                tail = self._singular(phrase[-1])
                if tail is not None:
                    head = " ".join(phrase[:-1] + [tail])
                    if head in self.lexicon:
                        return head, start
        return None

    def _noun_phrase(self, tokens: list[str], offset: int) -> NounPhrase | None:
        if not tokens:
            return None
        action = None
        location = None
        if "to" in tokens:
            k = tokens.index("to")
            action = " ".join(tokens[k + 1:]) or None
            tokens = tokens[:k]
        for prep in ("in", "on"):
            if prep in tokens:
                k = tokens.index(prep)
                loc_tokens = tokens[k + 1:]
                if loc_tokens:
                    location = self._noun_phrase(loc_tokens, offset + k + 1)
                    tokens = tokens[:k]
                break
        if not tokens:
            return None
        match = self._match_head(tokens)
        if match is None:
            head, start = tokens[-1], len(tokens) - 1
        else:
            head, start = match
        return NounPhrase(
            head=head, states=tokens[:start], action=action, location=location,
            span=(offset, offset + len(tokens)))

    # -- templates --------------------------------------------------------

    def _questions(self, tokens: list[str]) -> Question | None:
        if len(tokens) > 2 and tokens[0] == "where" and tokens[1] in ("is", "are"):
            np = self._noun_phrase(tokens[2:], 2)
            if np:
                return Question(tree=CallTree(
                    function="get_stm_locations", args={"object": np.to_tree()}))
        if (len(tokens) > 4 and tokens[:2] == ["how", "many"]):
            rest = tokens[2:]
            for link in ("are", "is"):
                if link in rest:
                    k = rest.index(link)
                    np = self._noun_phrase(rest[:k], 2)
                    after = rest[k + 1:]
                    if after and after[0] == "there":
                        after = after[1:]
                    if np and len(after) > 1 and after[0] in ("in", "on"):
                        loc = self._noun_phrase(after[1:], 0)
                        if loc:
                            args: dict = {"object": np.head, "location": loc.head}
                            if np.states:
                                args["state"] = np.states[0]
                            if np.action:
                                args["action"] = np.action
                            return Question(tree=CallTree(
                                function="get_count", args=args))
        if (len(tokens) > 3 and tokens[0] == "what" and tokens[1] in ("is", "are")
                and tokens[2] in ("in", "on")):
            loc = self._noun_phrase(tokens[3:], 3)
            if loc:
                return Question(tree=CallTree(
                    function="get_stm_objects",
                    args={"object": "something", "location": loc.head}))
        return None

    _VERB_PREFIXES = [
        (("go", "to"), "go", False),
        (("walk", "to"), "go", False),
        (("bring",), "bring", True),
        (("grab",), "grab", False),
        (("take",), "grab", False),
        (("pick", "up"), "grab", False),
        (("put",), "put", True),
        (("open",), "open", False),
        (("close",), "close", False),
        (("switch", "on"), "switch on", False),
        (("switch", "off"), "switch off", False),
        (("turn", "on"), "switch on", False),
        (("turn", "off"), "switch off", False),
        (("look", "at"), "look at", False),
    ]

    def _commands(self, tokens: list[str]) -> Command | None:
        for prefix, verb, has_dest in self._VERB_PREFIXES:
            n = len(prefix)
            if len(tokens) <= n or tuple(tokens[:n]) != prefix:
                continue
            rest = tokens[n:]
            if has_dest:
                seps = ["to"] if verb == "bring" else ["on", "in"]
                for sep in seps:
                    if sep in rest:
                        k = rest.index(sep)
                        obj = self._noun_phrase(rest[:k], n)
                        dest = self._noun_phrase(rest[k + 1:], n + k + 1)
                        if obj and dest:
                            return Command(verb=verb, object=obj, dest=dest)
                return None
            np = self._noun_phrase(rest, n)
            if np:
                return Command(verb=verb, object=np)
        return None

    def _clarification(self, tokens: list[str],
                       pending: PendingClarification) -> ClarificationReply | None:
        matches = []
        for candidate in pending.candidates:
            feature = tokenize(candidate.feature) or [candidate.feature]
            width = len(feature)
            for k in range(len(tokens) - width + 1):
                if tokens[k:k + width] == feature:
                    matches.append(candidate)
                    break
        if len(matches) == 1:
            return ClarificationReply(instance_id=matches[0].instance_id)
        return None

    # -- entry point -------------------------------------------------------

    def parse(self, text: str, dialogue: DialogueState | None = None) -> ParseResult:
        """Total: any input yields a result, worst case Unparseable with the
        closest matching template as a hint."""
        tokens = tokenize(text)
        if not tokens:
            return Unparseable(reason="empty utterance")
        result = self._questions(tokens) or self._commands(tokens)
        if result is not None:
            return result
        if dialogue is not None and dialogue.pending is not None:
            reply = self._clarification(tokens, dialogue.pending)
            if reply is not None:
                return reply
        close = difflib.get_close_matches(
            " ".join(tokens), TEMPLATES, n=1, cutoff=0.0)
        return Unparseable(
            reason=f"no template matches {text.strip()!r}",
            hint=close[0] if close else None)
