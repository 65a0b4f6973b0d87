import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecgpipe.dataset import (TEST, TRAIN_VAL, DatasetManifest, SplitSpec,
                             balance, build_manifest, check_manifest, class_counts,
                             exclude_noisy, read_id_list, split)
from ecgpipe.errors import DomainError, FormatError
from ecgpipe.records import CLASSES, EcgRecord, write_record
from partition import check_partition, make_entries

MERGED_PROFILE = {"AF": 2000, "IAVB": 1700, "SB": 1800, "SNR": 1672, "STach": 1900}


@pytest.fixture(scope="module")
def profile_split():
    kept = balance(make_entries(MERGED_PROFILE), seed=7)
    return kept, split(kept, SplitSpec(0.2, 10, seed=7))


def test_profile_balance(profile_split):
    kept, _ = profile_split
    assert class_counts(kept) == {c.value: 1672 for c in CLASSES}
    assert len(kept) == 8360


def test_profile_split_counts(profile_split):
    _, entries = profile_split
    test = [e for e in entries if e.split == TEST]
    tv = [e for e in entries if e.split == TRAIN_VAL]
    assert len(test) == 1672 and len(tv) == 6688
    per_class_test = Counter(e.label for e in test)
    assert sorted(per_class_test.values()) == [334, 334, 334, 335, 335]
    folds = Counter(e.fold for e in tv)
    assert sorted(folds.values()) == [668] * 2 + [669] * 8
    for c in CLASSES:
        sizes = Counter(e.fold for e in tv if e.label is c)
        assert len(sizes) == 10 and max(sizes.values()) - min(sizes.values()) <= 1


def test_equal_counts_identity():
    entries = make_entries({c.value: 5 for c in CLASSES})
    assert balance(entries, 3) == entries


def test_balance_seeded():
    entries = make_entries({"AF": 30, "IAVB": 12, "SB": 20, "SNR": 15, "STach": 40})
    a, b = balance(entries, 11), balance(entries, 11)
    assert a == b
    assert {e.record_id for e in a} != {e.record_id for e in balance(entries, 12)}


def test_balance_empty_class_named():
    entries = make_entries({"AF": 3, "IAVB": 3, "SB": 3, "SNR": 3})
    with pytest.raises(DomainError, match="STach"):
        balance(entries, 0)


def test_split_requires_balance_and_enough_records():
    with pytest.raises(DomainError):
        split(make_entries({"AF": 4, "IAVB": 3, "SB": 3, "SNR": 3, "STach": 3}), SplitSpec())
    with pytest.raises(DomainError):
        split(make_entries({c.value: 9 for c in CLASSES}), SplitSpec(0.2, 10))


def test_split_spec_validation():
    for kw in (dict(test_fraction=0.0), dict(test_fraction=1.0), dict(n_folds=1)):
        with pytest.raises(DomainError):
            SplitSpec(**kw)


def test_exclude_examples():
    entries = make_entries({"AF": 2, "IAVB": 2, "SB": 2, "SNR": 2, "STach": 2})
    ids = [entries[0].record_id, entries[3].record_id, entries[7].record_id]
    out = exclude_noisy(entries, ids)
    assert sum(not e.excluded for e in out) == 7
    assert exclude_noisy(entries, []) == entries
    assert exclude_noisy(out, ids) == out
    with pytest.raises(DomainError, match="nope"):
        exclude_noisy(entries, ["nope"])


def test_excluded_records_never_split():
    entries = make_entries({c.value: 30 for c in CLASSES})
    entries = exclude_noisy(entries, ["AF_00000", "SB_00004", "SB_00005"])
    out = split(balance(entries, 0), SplitSpec(0.2, 5, 0))
    dead = [e for e in out if e.excluded]
    assert len(dead) == 3 and all(e.split is None and e.fold is None for e in dead)
    assert set(class_counts(out).values()) == {28}


def test_id_list(tmp_path):
    (tmp_path / "ids.txt").write_text("a\n\n# skip\nb  # noisy baseline\n")
    assert read_id_list(tmp_path / "ids.txt") == ["a", "b"]


def test_manifest_roundtrip(tmp_path, profile_split):
    _, entries = profile_split
    m = DatasetManifest(entries, 7, MERGED_PROFILE, {c.value: 1672 for c in CLASSES},
                        SplitSpec(0.2, 10, 7))
    m.save(tmp_path / "m.json")
    back = DatasetManifest.load(tmp_path / "m.json")
    assert back.entries == m.entries and back.split_spec == m.split_spec
    assert back.n_folds == 10
    check_manifest(back)
    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(FormatError):
        DatasetManifest.load(tmp_path / "bad.json")


def test_build_manifest(tmp_path):
    for i, cls in enumerate(["AF", "SB", "SB"]):
        sub = tmp_path / ("cpsc" if i < 2 else "ptb")
        sub.mkdir(exist_ok=True)
        write_record(EcgRecord(f"r{i}", 500, np.zeros((12, 4)), label=cls), sub / f"r{i}")
    write_record(EcgRecord("nolabel", 500, np.zeros((12, 4))), tmp_path / "nolabel")
    m = build_manifest(tmp_path)
    assert [(e.record_id, e.label.value, e.source_corpus) for e in m.entries] == [
        ("r0", "AF", "cpsc"), ("r1", "SB", "cpsc"), ("r2", "SB", "ptb")]


# -- properties ------------------------------------------------------------

@st.composite
def manifests(draw):
    counts = {c.value: draw(st.integers(22, 60)) for c in CLASSES}
    entries = make_entries(counts, prefix=draw(st.sampled_from(["", "x-", "rec/"])))
    n_ex = draw(st.integers(0, 5))
    ids = draw(st.permutations([e.record_id for e in entries]))[:n_ex]
    entries = exclude_noisy(entries, ids)
    spec = SplitSpec(draw(st.sampled_from([0.1, 0.2, 0.25, 0.3])),
                     draw(st.integers(2, 10)), draw(st.integers(0, 2**63)))
    return entries, spec


@settings(max_examples=150, deadline=None)
@given(manifests())
def test_partition_property(case):
    entries, spec = case
    out = split(balance(entries, spec.seed), spec)
    check_partition(entries, out, spec)
    check_manifest(DatasetManifest(out))


@settings(max_examples=60, deadline=None)
@given(manifests(), st.randoms(use_true_random=False))
def test_determinism_property(case, rnd):
    entries, spec = case
    first = split(balance(entries, spec.seed), spec)
    shuffled = list(entries)
    rnd.shuffle(shuffled)
    second = split(balance(shuffled, spec.seed), spec)
    key = lambda e: e.record_id  # noqa: E731
    assert sorted(first, key=key) == sorted(second, key=key)
    assert json.dumps([e.to_dict() for e in first]) == json.dumps(
        [e.to_dict() for e in split(balance(entries, spec.seed), spec)])
