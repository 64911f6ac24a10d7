from __future__ import annotations

import hashlib

import pytest

from triagegate.errors import EmptyInput, InsufficientBank
from triagegate.fixtures import EMERGENCY_CORPUS, NON_EMERGENCY_CORPUS
from triagegate.model import Label
from triagegate.prompting import (
    SYSTEM_PROMPT_BARE,
    SYSTEM_PROMPT_WITH_GUIDELINES,
    ChatMessage,
    ExampleBank,
    PromptSpec,
    build_messages,
    render_system_prompt,
    select_examples,
)

from .conftest import phrase

E, N = Label.EMERGENCY, Label.NON_EMERGENCY


def make_bank(n_emergency: int, n_non_emergency: int) -> ExampleBank:
    return ExampleBank(
        emergency=tuple(
            phrase(f"emergency case {i}", E) for i in range(n_emergency)
        ),
        non_emergency=tuple(
            phrase(f"routine case {i}", N) for i in range(n_non_emergency)
        ),
    )


class TestSystemPrompt:
    def test_bare_names_both_labels(self):
        text = render_system_prompt("bare")
        assert "emergency" in text
        assert "non_emergency" in text

    def test_guidelines_extend_bare(self):
        assert render_system_prompt("with_guidelines").startswith(
            render_system_prompt("bare")
        )

    def test_no_example_scenarios_inside(self):
        for variant in ("bare", "with_guidelines"):
            text = render_system_prompt(variant)
            for example in EMERGENCY_CORPUS + NON_EMERGENCY_CORPUS:
                assert example not in text

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            render_system_prompt("verbose")

    def test_text_is_versioned(self):
        # Golden hashes: the exact instruction text is part of the contract.
        digests = {
            "bare": hashlib.sha256(SYSTEM_PROMPT_BARE.encode()).hexdigest(),
            "with_guidelines": hashlib.sha256(
                SYSTEM_PROMPT_WITH_GUIDELINES.encode()
            ).hexdigest(),
        }
        assert digests == {
            "bare": "2862a0d0a4f46d6a085bc262c1e650108190f0e5d832192a4b860c1fbd81b203",
            "with_guidelines": "3f8d9c17d29f1083f7ef9ea7beef3f552d5fc05ab72e3320ad94de15c5c2244d",
        }


class TestChatMessage:
    def test_rejects_unknown_role(self):
        with pytest.raises(ValueError):
            ChatMessage(role="tool", content="x")

    def test_rejects_empty_content(self):
        with pytest.raises(ValueError):
            ChatMessage(role="user", content="")


class TestSelectExamples:
    def test_zero_examples(self):
        assert select_examples(make_bank(0, 0), 0, seed=1) == []

    def test_ten_from_six_six_alternates(self):
        selected = select_examples(make_bank(6, 6), 10, seed=3)
        assert len(selected) == 10
        labels = [p.label for p in selected]
        assert labels == [E, N] * 5

    def test_insufficient_emergency_side(self):
        with pytest.raises(InsufficientBank) as info:
            select_examples(make_bank(4, 6), 10, seed=0)
        assert info.value.label is E
        assert info.value.needed == 5
        assert info.value.available == 4

    def test_odd_k_biases_emergency(self):
        selected = select_examples(make_bank(8, 8), 7, seed=5)
        labels = [p.label for p in selected]
        assert labels.count(E) == 4
        assert labels.count(N) == 3
        assert labels[0] is E

    def test_deterministic_per_seed(self):
        bank = make_bank(9, 9)
        assert select_examples(bank, 8, seed=11) == select_examples(bank, 8, seed=11)

    def test_seed_changes_selection(self):
        bank = make_bank(30, 30)
        picks = {tuple(p.text for p in select_examples(bank, 6, seed=s)) for s in range(8)}
        assert len(picks) > 1


class TestBuildMessages:
    def test_zero_shot_is_two_messages(self, tiny_bank):
        spec = PromptSpec(k_examples=0)
        messages = build_messages(spec, tiny_bank, "sprained ankle")
        assert [m.role for m in messages] == ["system", "user"]
        assert messages[0].content == SYSTEM_PROMPT_BARE
        assert messages[1].content == "sprained ankle"

    def test_ten_examples_is_22_messages(self, tiny_bank):
        spec = PromptSpec(k_examples=10, selection_seed=7)
        messages = build_messages(spec, tiny_bank, "what is this")
        assert len(messages) == 22
        assert messages[1].role == "user"
        assert messages[2].role == "assistant"
        assert messages[2].content == "emergency"
        assert messages[-1] == ChatMessage(role="user", content="what is this")

    def test_roles_follow_pattern(self, tiny_bank):
        spec = PromptSpec(k_examples=6, selection_seed=2)
        messages = build_messages(spec, tiny_bank, "input")
        roles = [m.role for m in messages]
        assert roles == ["system"] + ["user", "assistant"] * 6 + ["user"]

    def test_example_turns_echo_serialized_labels(self, tiny_bank):
        spec = PromptSpec(k_examples=8, selection_seed=2)
        messages = build_messages(spec, tiny_bank, "input")
        for reply in messages[2:-1:2]:
            assert reply.content in ("emergency", "non_emergency")

    def test_byte_identical_across_calls(self, tiny_bank):
        spec = PromptSpec(k_examples=10, selection_seed=99)
        first = build_messages(spec, tiny_bank, "chest discomfort")
        second = build_messages(spec, tiny_bank, "chest discomfort")
        assert first == second

    def test_empty_input_rejected_with_examples_intact(self, tiny_bank):
        with pytest.raises(EmptyInput):
            build_messages(PromptSpec(k_examples=0), tiny_bank, "   ")

    def test_length_law_and_balance(self, tiny_bank):
        for k in range(0, 13):
            for seed in (0, 1, 17):
                spec = PromptSpec(k_examples=k, selection_seed=seed)
                messages = build_messages(spec, tiny_bank, "x")
                assert len(messages) == 2 * k + 2
                labels = [m.content for m in messages[2:-1:2]]
                assert labels.count("emergency") == (k + 1) // 2
                assert labels.count("non_emergency") == k // 2


class TestExampleBank:
    def test_mislabeled_pool_rejected(self):
        with pytest.raises(ValueError):
            ExampleBank(emergency=(phrase("x", N),))

    def test_duplicate_text_rejected(self):
        with pytest.raises(ValueError):
            ExampleBank(
                emergency=(phrase("same", E),),
                non_emergency=(phrase("same", N),),
            )

    def test_from_phrases_excludes_test_split(self, tiny_dataset):
        bank = ExampleBank.from_phrases(tiny_dataset)
        test_texts = {p.text for p in tiny_dataset if p.split == "test"}
        bank_texts = {p.text for p in bank.emergency + bank.non_emergency}
        assert not bank_texts & test_texts
        assert len(bank.emergency) == 6
        assert len(bank.non_emergency) == 6

    def test_no_test_phrase_ever_selected(self, tiny_dataset):
        bank = ExampleBank.from_phrases(tiny_dataset)
        test_texts = {p.text for p in tiny_dataset if p.split == "test"}
        for seed in range(50):
            selected = select_examples(bank, 9, seed=seed)
            assert not {p.text for p in selected} & test_texts
