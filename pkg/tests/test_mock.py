from __future__ import annotations

import json

import pytest
import requests

from triagegate.client import BackendConfig, classify_text, send_chat
from triagegate.errors import PortInUse
from triagegate.mock import (
    GIBBERISH_REPLY,
    IDENTITY_PROFILE,
    ErrorProfile,
    MockBackendServer,
    ground_truth_lookup,
    load_profile_file,
    mock_reply,
    run_mock_server,
    save_profile,
)
from triagegate.model import Label
from triagegate.prompting import ChatMessage, ExampleBank, PromptSpec

from .conftest import phrase, tiny_phrases

E, N = Label.EMERGENCY, Label.NON_EMERGENCY

SYSTEM = ChatMessage(role="system", content="classify")


def messages_for(text: str) -> list[ChatMessage]:
    return [SYSTEM, ChatMessage(role="user", content=text)]


class TestErrorProfile:
    def test_flip_sets_must_be_disjoint(self):
        with pytest.raises(ValueError):
            ErrorProfile(
                name="bad",
                flip_emergency=frozenset({1}),
                flip_non_emergency=frozenset({1}),
            )

    def test_unparseable_disjoint_from_flips(self):
        with pytest.raises(ValueError):
            ErrorProfile(
                name="bad",
                flip_emergency=frozenset({2}),
                unparseable=frozenset({2}),
            )

    def test_negative_delay_rejected(self):
        with pytest.raises(ValueError):
            ErrorProfile(name="bad", injected_delay_s=-1)

    def test_json_round_trip(self, tmp_path):
        profile = ErrorProfile(
            name="x",
            flip_emergency=frozenset({3, 1}),
            flip_non_emergency=frozenset({9}),
            unparseable=frozenset({5}),
            injected_delay_s=0.25,
        )
        path = tmp_path / "x.json"
        save_profile(profile, path)
        assert load_profile_file(path) == profile
        # serialized index lists are sorted for stable files
        payload = json.loads(path.read_text())
        assert payload["flip_emergency"] == [1, 3]


class TestMockReply:
    @pytest.fixture
    def lookup(self):
        return ground_truth_lookup(tiny_phrases())

    def test_identity_echoes_truth(self, lookup):
        assert mock_reply(messages_for("test emergency scenario 0"), IDENTITY_PROFILE, lookup) == "emergency"
        assert mock_reply(messages_for("train routine scenario 1"), IDENTITY_PROFILE, lookup) == "non_emergency"

    def test_flipped_emergency_answers_wrong(self, lookup):
        index = lookup["test emergency scenario 1"][1]
        profile = ErrorProfile(name="f", flip_emergency=frozenset({index}))
        assert mock_reply(messages_for("test emergency scenario 1"), profile, lookup) == "non_emergency"

    def test_flip_set_only_affects_matching_class(self, lookup):
        index = lookup["test routine scenario 1"][1]
        profile = ErrorProfile(name="f", flip_emergency=frozenset({index}))
        assert mock_reply(messages_for("test routine scenario 1"), profile, lookup) == "non_emergency"

    def test_unparseable_index_garbles(self, lookup):
        index = lookup["test emergency scenario 2"][1]
        profile = ErrorProfile(name="g", unparseable=frozenset({index}))
        assert mock_reply(messages_for("test emergency scenario 2"), profile, lookup) == GIBBERISH_REPLY

    def test_unknown_phrase_defaults_to_non_emergency(self, lookup):
        assert mock_reply(messages_for("never seen before"), IDENTITY_PROFILE, lookup) == "non_emergency"

    def test_last_message_must_be_user(self, lookup):
        with pytest.raises(ValueError):
            mock_reply([SYSTEM], IDENTITY_PROFILE, lookup)

    def test_duplicate_dataset_texts_rejected(self):
        with pytest.raises(ValueError):
            ground_truth_lookup([phrase("same", E), phrase("same", N)])


class TestMockServer:
    def test_identity_profile_classifies_all_correct(self, mock_server_factory):
        dataset = tiny_phrases()
        server = mock_server_factory(IDENTITY_PROFILE, dataset)
        bank = ExampleBank.from_phrases(dataset)
        config = BackendConfig(base_url=server.base_url)
        test_phrases = [p for p in dataset if p.split == "test"]
        for p in test_phrases:
            label, _ = classify_text(p.text, PromptSpec(k_examples=2), bank, config)
            assert label is p.label

    def test_wire_shape_satisfies_plain_client(self, mock_server_factory):
        # The production client speaks to the mock with no special casing.
        dataset = tiny_phrases()
        server = mock_server_factory(IDENTITY_PROFILE, dataset)
        reply = send_chat(
            messages_for("test routine scenario 0"),
            BackendConfig(base_url=server.base_url, model_id="anything"),
        )
        assert reply.raw_text == "non_emergency"
        assert reply.model_echo == "anything"

    def test_port_in_use(self, mock_server_factory):
        dataset = tiny_phrases()
        first = mock_server_factory(IDENTITY_PROFILE, dataset)
        with pytest.raises(PortInUse):
            run_mock_server(IDENTITY_PROFILE, dataset, port=first.port)

    def test_injected_delay_floors_latency(self, mock_server_factory):
        dataset = tiny_phrases()
        server = mock_server_factory(IDENTITY_PROFILE.with_delay(0.05), dataset)
        reply = send_chat(
            messages_for("test emergency scenario 0"),
            BackendConfig(base_url=server.base_url),
        )
        assert reply.latency_s >= 0.05

    def test_unknown_route_404(self, mock_server_factory):
        server = mock_server_factory(IDENTITY_PROFILE, tiny_phrases())
        response = requests.post(f"{server.base_url}/v1/other", json={})
        assert response.status_code == 404

    def test_invalid_request_400(self, mock_server_factory):
        server = mock_server_factory(IDENTITY_PROFILE, tiny_phrases())
        response = requests.post(
            f"{server.base_url}/v1/chat/completions",
            data=b"{broken",
            headers={"Content-Type": "application/json"},
        )
        assert response.status_code == 400

    def test_keyed_profile_selects_by_message_count(self, mock_server_factory):
        dataset = tiny_phrases()
        lookup = ground_truth_lookup(dataset)
        target = "test emergency scenario 0"
        index = lookup[target][1]
        flip_at_k2 = ErrorProfile(name="k2", flip_emergency=frozenset({index}))
        server = mock_server_factory({2: flip_at_k2}, dataset)
        bank = ExampleBank.from_phrases(dataset)
        config = BackendConfig(base_url=server.base_url)

        label_k0, _ = classify_text(target, PromptSpec(k_examples=0), bank, config)
        label_k2, _ = classify_text(target, PromptSpec(k_examples=2), bank, config)
        assert label_k0 is E  # unkeyed k falls back to identity
        assert label_k2 is N  # keyed profile flips it

    def test_induced_matrix_matches_flip_counts(self, mock_server_factory):
        # tp = E - |flip_e|, fn = |flip_e|, fp = |flip_n|, tn = N - |flip_n|
        dataset = tiny_phrases()
        lookup = ground_truth_lookup(dataset)
        test_e = [p for p in dataset if p.split == "test" and p.label is E]
        test_n = [p for p in dataset if p.split == "test" and p.label is N]
        profile = ErrorProfile(
            name="law",
            flip_emergency=frozenset({lookup[test_e[0].text][1]}),
            flip_non_emergency=frozenset(
                {lookup[test_n[0].text][1], lookup[test_n[2].text][1]}
            ),
        )
        server = mock_server_factory(profile, dataset)
        bank = ExampleBank.from_phrases(dataset)
        config = BackendConfig(base_url=server.base_url)
        from triagegate.model import confusion_from_pairs

        pairs = []
        for p in test_e + test_n:
            label, _ = classify_text(p.text, PromptSpec(k_examples=2), bank, config)
            pairs.append((p.label, label))
        matrix = confusion_from_pairs(pairs)
        assert (matrix.tp, matrix.fn, matrix.fp, matrix.tn) == (3, 1, 2, 2)

    def test_two_runs_are_identical(self, mock_server_factory):
        dataset = tiny_phrases()
        server = mock_server_factory(IDENTITY_PROFILE, dataset)
        bank = ExampleBank.from_phrases(dataset)
        config = BackendConfig(base_url=server.base_url)

        def one_run():
            return [
                classify_text(p.text, PromptSpec(k_examples=2), bank, config)[0]
                for p in dataset
                if p.split == "test"
            ]

        assert one_run() == one_run()
