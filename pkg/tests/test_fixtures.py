from __future__ import annotations

import pytest

from triagegate.dataset import check_balance, deduplicate, load_phrases, normalize_text
from triagegate.fixtures import (
    BUILTIN_PROFILE_NAMES,
    PROFILE_FLIP_COUNTS,
    SWEEP_PROFILE_BY_K,
    build_fixture_dataset,
    build_profile,
    corpus_path,
    fixture_dataset_path,
    load_builtin_profile,
    profile_path,
    resolve_profile,
    starter_corpus,
    write_fixture_files,
)
from triagegate.mock import ErrorProfile
from triagegate.model import Label

E, N = Label.EMERGENCY, Label.NON_EMERGENCY


@pytest.fixture(scope="module")
def dataset():
    return build_fixture_dataset()


class TestStarterCorpus:
    def test_balanced_and_big_enough(self):
        report = check_balance(starter_corpus())
        assert report.emergency == report.non_emergency
        assert report.emergency + report.non_emergency >= 40

    def test_no_duplicates_under_normalization(self):
        corpus = starter_corpus()
        _, removed = deduplicate(corpus)
        assert removed == 0

    def test_all_curated_round_zero(self):
        assert all(p.source == "curated" and p.round == 0 for p in starter_corpus())


class TestFixtureDataset:
    def test_test_split_is_balanced_thousand(self, dataset):
        test = [p for p in dataset if p.split == "test"]
        assert len(test) == 1000
        assert sum(1 for p in test if p.label is E) == 500

    def test_synthetic_phrases_marked_generated(self, dataset):
        for p in dataset:
            if p.split == "test":
                assert p.source == "generated"
                assert p.round == 1
            else:
                assert p.split == "train"
                assert p.source == "curated"

    def test_texts_unique_even_normalized(self, dataset):
        keys = [normalize_text(p.text) for p in dataset]
        assert len(keys) == len(set(keys))

    def test_train_split_feeds_the_bank(self, dataset):
        train = [p for p in dataset if p.split == "train"]
        assert sum(1 for p in train if p.label is E) >= 10
        assert sum(1 for p in train if p.label is N) >= 10


class TestProfiles:
    def test_flip_counts_match_profile_contracts(self, dataset):
        # 7b: 2 missed emergencies, 1 false alarm; 3b-k10: 4 false alarms;
        # 1b: 356 false alarms; k8/k20 place 9 and 23 errors.
        for name, (flips_e, flips_n) in PROFILE_FLIP_COUNTS.items():
            profile = build_profile(name, dataset)
            assert len(profile.flip_emergency) == flips_e, name
            assert len(profile.flip_non_emergency) == flips_n, name
            assert not profile.unparseable

    def test_flips_point_at_test_phrases_of_right_class(self, dataset):
        for name in BUILTIN_PROFILE_NAMES:
            profile = build_profile(name, dataset)
            for index in profile.flip_emergency:
                assert dataset[index].label is E
                assert dataset[index].split == "test"
            for index in profile.flip_non_emergency:
                assert dataset[index].label is N
                assert dataset[index].split == "test"

    def test_build_is_deterministic(self, dataset):
        assert build_profile("7b", dataset) == build_profile("7b", dataset)

    def test_packaged_profiles_match_regeneration(self, dataset):
        for name in BUILTIN_PROFILE_NAMES:
            assert load_builtin_profile(name) == build_profile(name, dataset)


class TestFrozenFiles:
    def test_regeneration_is_byte_identical(self, tmp_path):
        # The shipped data files are the frozen outputs of the generator.
        written = write_fixture_files(tmp_path)
        packaged = [corpus_path(), fixture_dataset_path()] + [
            profile_path(name) for name in BUILTIN_PROFILE_NAMES
        ]
        assert len(written) == len(packaged)
        for fresh, frozen in zip(written, packaged):
            assert fresh.read_bytes() == frozen.read_bytes(), frozen.name

    def test_packaged_fixture_loads(self):
        dataset = load_phrases(fixture_dataset_path())
        assert len(dataset) == len(build_fixture_dataset())


class TestResolveProfile:
    def test_builtin_names(self):
        for name in BUILTIN_PROFILE_NAMES:
            assert isinstance(resolve_profile(name), ErrorProfile)

    def test_sweep_alias_is_keyed(self):
        keyed = resolve_profile("3b-sweep")
        assert set(keyed) == set(SWEEP_PROFILE_BY_K)
        assert keyed[10] == load_builtin_profile("3b-k10")

    def test_path_argument(self, tmp_path):
        from triagegate.mock import save_profile

        path = tmp_path / "custom.json"
        save_profile(ErrorProfile(name="custom"), path)
        assert resolve_profile(str(path)) == ErrorProfile(name="custom")

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            resolve_profile("13b")
