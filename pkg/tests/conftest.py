from __future__ import annotations

import pytest

from triagegate.dataset import save_phrases
from triagegate.mock import MockBackendServer
from triagegate.model import Label, LabeledPhrase
from triagegate.prompting import ExampleBank

E, N = Label.EMERGENCY, Label.NON_EMERGENCY


def phrase(text, label, source="curated", round=0, split=None):
    return LabeledPhrase(text=text, label=label, source=source, round=round, split=split)


def tiny_phrases() -> list[LabeledPhrase]:
    """Six train phrases per class plus four test phrases per class."""
    train = []
    for i in range(6):
        train.append(phrase(f"train emergency scenario {i}", E, split="train"))
        train.append(phrase(f"train routine scenario {i}", N, split="train"))
    test = []
    for i in range(4):
        test.append(
            phrase(f"test emergency scenario {i}", E, "generated", 1, split="test")
        )
        test.append(
            phrase(f"test routine scenario {i}", N, "generated", 1, split="test")
        )
    return train + test


@pytest.fixture
def tiny_dataset() -> list[LabeledPhrase]:
    return tiny_phrases()


@pytest.fixture
def tiny_dataset_path(tmp_path, tiny_dataset):
    path = tmp_path / "tiny.jsonl"
    save_phrases(path, tiny_dataset)
    return path


@pytest.fixture
def tiny_bank(tiny_dataset) -> ExampleBank:
    return ExampleBank.from_phrases(tiny_dataset)


@pytest.fixture
def mock_server_factory():
    """Start mock backends on ephemeral ports and stop them on teardown."""
    servers: list[MockBackendServer] = []

    def start(profile, dataset) -> MockBackendServer:
        server = MockBackendServer(profile, dataset, port=0).start()
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.shutdown()
