"""Bundled corpus, synthetic evaluation fixture, and built-in error profiles.

The starter corpus is a small hand-written, balanced phrase set. The
1000-phrase evaluation fixture is synthetic: it is generated by templating
the corpus cores with context prefixes (25 cores x 20 prefixes per class)
and is marked source=generated throughout. Everything here is deterministic;
the copies under data/ are frozen and golden tests pin regeneration to them.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import Mapping, Sequence, Union

from .dataset import load_phrases, save_phrases
from .mock import ErrorProfile, IDENTITY_PROFILE, load_profile_file, save_profile
from .model import Label, LabeledPhrase

DATA_DIR = Path(__file__).parent / "data"

EMERGENCY_CORPUS = (
    "Patient is unconscious and not breathing",
    "Severe chest pain spreading to the left arm and jaw",
    "Heavy bleeding from a leg wound that will not stop with pressure",
    "Sudden facial drooping and slurred speech started minutes ago",
    "Child swallowed a handful of sleeping pills",
    "Throat is swelling shut after a bee sting",
    "Seizure lasting more than five minutes and still convulsing",
    "Fell from a ladder and now cannot move his legs",
    "Coughing up large amounts of blood",
    "Severe burns across the chest and face from a kitchen fire",
    "Diabetic found unresponsive with no glucagon on hand",
    "Newborn is turning blue around the lips and struggling to breathe",
    "Sudden worst headache of her life with vomiting and confusion",
    "Gunshot wound to the abdomen with heavy bleeding",
    "Choking on food and cannot speak or cough",
    "Suspected overdose with shallow and slowing breathing",
    "Crushing chest pressure with cold sweats and nausea",
    "Severe allergic reaction with hives and difficulty breathing",
    "Patient says he is about to end his life tonight",
    "Car accident victim is trapped and losing consciousness",
    "Vomiting bright red blood repeatedly this morning",
    "High fever with a stiff neck and a spreading purple rash",
    "Electric shock from a power tool and now disoriented",
    "Water broke at 28 weeks and contractions are two minutes apart",
)

NON_EMERGENCY_CORPUS = (
    "Requesting a refill of my regular blood pressure medication",
    "Mild seasonal allergies with a runny nose and sneezing",
    "Scheduling a routine follow-up visit for next month",
    "Small paper cut on my finger that has already stopped bleeding",
    "Question about whether to take vitamins with or without food",
    "Slight soreness after yesterday's flu shot",
    "Ingrown toenail that has been bothering me for a week",
    "Looking for advice on moisturizer for dry skin",
    "Mild lower back ache after gardening over the weekend",
    "Need a copy of my immunization records for school enrollment",
    "Occasional heartburn after eating spicy meals",
    "Asking about the clinic's weekend opening hours",
    "A mosquito bite that is itchy but not spreading",
    "Wants to discuss switching to a generic version of a prescription",
    "Mild tension headache that improves with rest",
    "Routine blood pressure check came back slightly elevated last month",
    "Child has a runny nose but is eating and playing normally",
    "Billing question about last month's copay",
    "Stubbed toe yesterday with a bruise but walking fine",
    "Requesting a referral to a dermatologist for a mole check",
    "Dry cough lingering after a cold two weeks ago with no fever",
    "Interested in getting a flu shot before winter",
    "Knee feels stiff in the mornings but loosens up quickly",
    "Asking whether an expired ibuprofen bottle is still safe to use",
)

_EXTRA_CORES = {
    Label.EMERGENCY: "sudden severe abdominal pain with fainting and a rigid belly",
    Label.NON_EMERGENCY: "general question about recommended daily water intake",
}

CONTEXT_PREFIXES = (
    "Caller reports:",
    "Triage note:",
    "Message received:",
    "Family member says:",
    "Telehealth chat:",
    "Front desk relay:",
    "Patient writes:",
    "Home visit note:",
    "Incoming text:",
    "Nurse line summary:",
    "Voicemail transcript:",
    "Follow-up line:",
    "Portal message:",
    "Neighbor called in:",
    "School nurse reports:",
    "On-call log entry:",
    "Answering service note:",
    "Chat transcript:",
    "Intake form comment:",
    "Caregiver update:",
)

# Per-profile (emergency flips, non-emergency flips) over the 1000-phrase
# test split. The k=8 / k=20 profiles target accuracies 0.991 and 0.977
# (9 and 23 errors), all placed on the non-emergency side like the other
# 3b profile's error pattern.
PROFILE_FLIP_COUNTS: dict[str, tuple[int, int]] = {
    "identity": (0, 0),
    "7b": (2, 1),
    "3b-k10": (0, 4),
    "3b-k8": (0, 9),
    "3b-k20": (0, 23),
    "1b": (0, 356),
}

BUILTIN_PROFILE_NAMES = tuple(PROFILE_FLIP_COUNTS)

# One mock can replay the per-k fixtures of a sweep by keying on the example
# count inferred from each request.
SWEEP_PROFILE_BY_K = {8: "3b-k8", 10: "3b-k10", 20: "3b-k20"}
SWEEP_PROFILE_NAME = "3b-sweep"


def _lower_first(text: str) -> str:
    return text[0].lower() + text[1:]


def starter_corpus() -> list[LabeledPhrase]:
    """The hand-written curated phrases, balanced across both classes."""
    phrases = [
        LabeledPhrase(text=text, label=Label.EMERGENCY) for text in EMERGENCY_CORPUS
    ]
    phrases += [
        LabeledPhrase(text=text, label=Label.NON_EMERGENCY)
        for text in NON_EMERGENCY_CORPUS
    ]
    return phrases


def _synthetic_class(label: Label, corpus: Sequence[str]) -> list[LabeledPhrase]:
    cores = [_lower_first(text) for text in corpus] + [_EXTRA_CORES[label]]
    phrases = []
    for core in cores:
        for prefix in CONTEXT_PREFIXES:
            phrases.append(
                LabeledPhrase(
                    text=f"{prefix} {core}",
                    label=label,
                    source="generated",
                    round=1,
                    split="test",
                )
            )
    return phrases


def build_fixture_dataset() -> list[LabeledPhrase]:
    """Corpus as the train split plus 500+500 synthetic test phrases."""
    corpus = [
        LabeledPhrase(
            text=p.text, label=p.label, source=p.source, round=p.round, split="train"
        )
        for p in starter_corpus()
    ]
    synthetic = _synthetic_class(Label.EMERGENCY, EMERGENCY_CORPUS)
    synthetic += _synthetic_class(Label.NON_EMERGENCY, NON_EMERGENCY_CORPUS)
    return corpus + synthetic


def build_profile(
    name: str, dataset: Sequence[LabeledPhrase] | None = None
) -> ErrorProfile:
    """Construct a built-in profile against a dataset's test split.

    Which specific phrases get flipped is a seeded sample over the test
    positions of the relevant class; the seed is derived from the profile
    name, so regeneration always reproduces the shipped files.
    """
    if name not in PROFILE_FLIP_COUNTS:
        raise ValueError(f"unknown profile {name!r}, expected one of {BUILTIN_PROFILE_NAMES}")
    if dataset is None:
        dataset = build_fixture_dataset()
    flips_e, flips_n = PROFILE_FLIP_COUNTS[name]
    positions = {Label.EMERGENCY: [], Label.NON_EMERGENCY: []}
    for index, phrase in enumerate(dataset):
        if phrase.split == "test":
            positions[phrase.label].append(index)
    rng = random.Random(f"profile:{name}")
    flip_e = rng.sample(positions[Label.EMERGENCY], flips_e)
    flip_n = rng.sample(positions[Label.NON_EMERGENCY], flips_n)
    return ErrorProfile(
        name=name,
        flip_emergency=frozenset(flip_e),
        flip_non_emergency=frozenset(flip_n),
    )


def corpus_path() -> Path:
    return DATA_DIR / "corpus.jsonl"


def fixture_dataset_path() -> Path:
    return DATA_DIR / "fixture_1000.jsonl"


def profile_path(name: str) -> Path:
    return DATA_DIR / "profiles" / f"{name}.json"


def load_builtin_profile(name: str) -> ErrorProfile:
    return load_profile_file(profile_path(name))


def resolve_profile(
    spec: str,
) -> Union[ErrorProfile, Mapping[int, ErrorProfile]]:
    """Turn a CLI profile argument into a profile.

    Accepts a built-in name, the keyed sweep alias, or a path to a profile
    JSON file.
    """
    if spec == "identity":
        return IDENTITY_PROFILE
    if spec == SWEEP_PROFILE_NAME:
        return {k: load_builtin_profile(name) for k, name in SWEEP_PROFILE_BY_K.items()}
    if spec in PROFILE_FLIP_COUNTS:
        return load_builtin_profile(spec)
    path = Path(spec)
    if path.exists():
        return load_profile_file(path)
    raise ValueError(
        f"unknown profile {spec!r}: not a built-in name "
        f"({', '.join(BUILTIN_PROFILE_NAMES)}, {SWEEP_PROFILE_NAME}) or a file"
    )


def write_fixture_files(out_dir: str | Path) -> list[Path]:
    """Regenerate corpus, fixture dataset and all profile files."""
    out_dir = Path(out_dir)
    (out_dir / "profiles").mkdir(parents=True, exist_ok=True)
    written = []

    corpus_file = out_dir / "corpus.jsonl"
    save_phrases(corpus_file, starter_corpus())
    written.append(corpus_file)

    dataset = build_fixture_dataset()
    fixture_file = out_dir / "fixture_1000.jsonl"
    save_phrases(fixture_file, dataset)
    written.append(fixture_file)

    for name in BUILTIN_PROFILE_NAMES:
        profile_file = out_dir / "profiles" / f"{name}.json"
        save_profile(build_profile(name, dataset), profile_file)
        written.append(profile_file)
    return written


def load_fixture_dataset() -> list[LabeledPhrase]:
    return load_phrases(fixture_dataset_path())
