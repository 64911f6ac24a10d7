"""Message-sequence construction for both prompting methodologies.

The zero-example mode sends only the system instruction and the input. The
example mode interleaves k demonstration turns (user scenario, assistant
label) between the two, which pins the expected output format without any
weight updates.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable

from .errors import EmptyInput, InsufficientBank
from .model import Label, LabeledPhrase

# The instruction text is a versioned constant. Golden tests pin it;
# changing a single byte is a breaking change for downstream transcripts.
SYSTEM_PROMPT_BARE = (
    "You are a medical triage assistant. Decide whether the situation "
    "described in the user's message is a medical emergency or not.\n"
    "Answer with exactly one word: \"emergency\" if the situation needs "
    "immediate medical intervention, or \"non_emergency\" if it does not. "
    "Do not add explanations, punctuation, or any other text."
)

_GUIDELINES = (
    "\n\nClassification criteria:\n"
    "- emergency: unconsciousness, absent or failing breathing, severe chest "
    "pain, signs of stroke, uncontrolled bleeding, anaphylaxis, major trauma, "
    "overdose, or stated intent of self-harm.\n"
    "- emergency: rapid deterioration of an existing condition.\n"
    "- non_emergency: medication refills, appointment scheduling, mild or "
    "long-standing symptoms, administrative questions, routine follow-ups.\n"
    "- If the message is ambiguous, prefer \"emergency\"; missing a true "
    "emergency is the costlier mistake."
)

SYSTEM_PROMPT_WITH_GUIDELINES = SYSTEM_PROMPT_BARE + _GUIDELINES

PROMPT_VARIANTS = ("bare", "with_guidelines")


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")

    def to_wire(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class PromptSpec:
    """System instruction plus how many demonstration examples to attach."""

    system_text: str = SYSTEM_PROMPT_BARE
    k_examples: int = 0
    selection_seed: int = 0

    def __post_init__(self):
        if self.k_examples < 0:
            raise ValueError("k_examples must be non-negative")


@dataclass(frozen=True)
class ExampleBank:
    """Per-class pools of demonstration phrases.

    Phrases assigned to the test split must never enter a bank; use
    ``from_phrases`` to build one from a dataset and get that filter for
    free.
    """

    emergency: tuple[LabeledPhrase, ...] = ()
    non_emergency: tuple[LabeledPhrase, ...] = ()

    def __post_init__(self):
        for phrase in self.emergency:
            if phrase.label is not Label.EMERGENCY:
                raise ValueError(f"mislabeled phrase in emergency pool: {phrase.text!r}")
        for phrase in self.non_emergency:
            if phrase.label is not Label.NON_EMERGENCY:
                raise ValueError(
                    f"mislabeled phrase in non-emergency pool: {phrase.text!r}"
                )
        texts = [p.text for p in self.emergency + self.non_emergency]
        if len(texts) != len(set(texts)):
            raise ValueError("duplicate phrase text in example bank")

    @classmethod
    def from_phrases(cls, phrases: Iterable[LabeledPhrase]) -> "ExampleBank":
        """Build a bank from dataset phrases, excluding the test split."""
        emergency = []
        non_emergency = []
        for phrase in phrases:
            if phrase.split == "test":
                continue
            if phrase.label is Label.EMERGENCY:
                emergency.append(phrase)
            else:
                non_emergency.append(phrase)
        return cls(emergency=tuple(emergency), non_emergency=tuple(non_emergency))


def render_system_prompt(variant: str = "bare") -> str:
    """Return the built-in instruction text for the chosen variant."""
    if variant == "bare":
        return SYSTEM_PROMPT_BARE
    if variant == "with_guidelines":
        return SYSTEM_PROMPT_WITH_GUIDELINES
    raise ValueError(f"unknown prompt variant {variant!r}")


def select_examples(
    bank: ExampleBank, k: int, seed: int
) -> list[LabeledPhrase]:
    """Pick k demonstration phrases, alternating labels, emergency first.

    Odd k gives the extra slot to the emergency class. Selection is a
    seeded shuffle of each class pool followed by taking the head, so a
    fixed (bank, k, seed) always yields the same sequence.
    """
    need_e = (k + 1) // 2
    need_n = k // 2
    if len(bank.emergency) < need_e:
        raise InsufficientBank(Label.EMERGENCY, need_e, len(bank.emergency))
    if len(bank.non_emergency) < need_n:
        raise InsufficientBank(Label.NON_EMERGENCY, need_n, len(bank.non_emergency))
    rng = random.Random(seed)
    pool_e = list(bank.emergency)
    pool_n = list(bank.non_emergency)
    rng.shuffle(pool_e)
    rng.shuffle(pool_n)
    picked_e = pool_e[:need_e]
    picked_n = pool_n[:need_n]
    selected: list[LabeledPhrase] = []
    for i in range(k):
        if i % 2 == 0:
            selected.append(picked_e[i // 2])
        else:
            selected.append(picked_n[i // 2])
    return selected


def build_messages(
    spec: PromptSpec, bank: ExampleBank, input_text: str
) -> list[ChatMessage]:
    """Render the full message sequence for one classification request.

    Layout: system instruction, then one user/assistant turn per selected
    example, then the input as the final user message. Total length is
    always 2 * k_examples + 2.
    """
    if not input_text.strip():
        raise EmptyInput("classification input must be non-empty")
    messages = [ChatMessage(role="system", content=spec.system_text)]
    for example in select_examples(bank, spec.k_examples, spec.selection_seed):
        messages.append(ChatMessage(role="user", content=example.text))
        messages.append(ChatMessage(role="assistant", content=example.label.value))
    messages.append(ChatMessage(role="user", content=input_text))
    return messages
