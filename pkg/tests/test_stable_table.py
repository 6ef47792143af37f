import itertools
import random

import pytest
from hypothesis import settings, strategies as st
from hypothesis.stateful import RuleBasedStateMachine, invariant, precondition, rule

from conftest import serial_dictatorship
from hids.errors import DuplicateKey, NotFound, PayloadTooLarge, TableFull
from hids.keys import KeyRecord
from hids.policies import BlockGroupLocalityPolicy, HashPriorityPolicy, ModuloPolicy
from hids.stable_table import RECORD_HEADER, StableTable

POLICIES = [HashPriorityPolicy(7), BlockGroupLocalityPolicy(7, 1), BlockGroupLocalityPolicy(2, 4)]


def build(policy, keys, payload_size=0):
    table = StableTable(policy, payload_size)
    for k in keys:
        table.insert(k)
    return table


def test_insert_into_empty_table_is_one_write():
    p = ModuloPolicy(3)
    table = StableTable(p)
    stats = table.insert(KeyRecord.for_int(1))
    assert table.layout() == [None, 1, None]
    assert stats.bucket_writes == 1 and stats.displacements == 0


def test_colliding_pair_lands_identically_in_both_orders():
    p = HashPriorityPolicy(3)
    # Two keys sharing rank-0 bucket 0.
    pool = [KeyRecord.for_int(v) for v in range(200)]
    a, b = [k for k in pool if p.bucket_at(k, 0) == 0][:2]
    if b.order > a.order:
        a, b = b, a
    ab, ba = build(p, [a, b]), build(p, [b, a])
    assert ab.serialize() == ba.serialize()
    assert ab.slots[0][0] == a
    assert ab.search(b) == p.bucket_at(b, 1)


@pytest.mark.parametrize("policy", POLICIES, ids=repr)
def test_all_orders_of_four_keys_agree(policy, six_keys):
    keys = six_keys[:4]
    reps = {build(policy, perm).serialize() for perm in itertools.permutations(keys)}
    assert len(reps) == 1
    assert build(policy, keys).slots == [
        None if k is None else (k, b"") for k in serial_dictatorship(policy, keys)
    ]


@pytest.mark.parametrize("policy", POLICIES, ids=repr)
def test_layout_matches_serial_dictatorship_oracle(policy):
    rng = random.Random(1)
    for _ in range(200):
        keys = [KeyRecord.derive(b"/r%d" % rng.randrange(4), rng.randrange(50)) for _ in range(rng.randrange(1, 8))]
        keys = list(dict.fromkeys(keys))
        rng.shuffle(keys)
        table = build(policy, keys)
        assert [s and s[0] for s in table.slots] == serial_dictatorship(policy, keys)


@pytest.mark.parametrize("policy", POLICIES, ids=repr)
def test_proposals_walk_each_list_in_rank_order(policy, six_keys):
    table = StableTable(policy)
    for k in six_keys:
        trace = []
        table.insert(k, on_probe=lambda key, rank, b: trace.append((key, rank, b)))
        last = {}
        for key, rank, b in trace:
            assert b == policy.bucket_at(key, rank)
            assert rank > last.get(key, -1)
            last[key] = rank
        assert trace[0][:2] == (k, 0)


@pytest.mark.parametrize("policy", POLICIES, ids=repr)
def test_search(policy, six_keys):
    table = build(policy, six_keys[:5])
    for k in six_keys[:5]:
        b = table.search(k)
        assert table.slots[b][0] == k
    assert table.search(six_keys[5]) is None
    empty = StableTable(policy)
    assert empty.locate(six_keys[0]) == (None, 1)


def test_absent_search_stops_early():
    # Oracle: a linear scan always needs C probes to prove absence.
    p = HashPriorityPolicy(11)
    rng = random.Random(5)
    early = 0
    for _ in range(300):
        keys = [KeyRecord.for_int(rng.randrange(10**6)) for _ in range(6)]
        keys = list(dict.fromkeys(keys))
        table = build(p, keys[:-1])
        probe = keys[-1]
        occupant = table.slots[p.bucket_at(probe, 0)]
        if occupant is not None and p.bucket_prefers(0, probe, occupant[0]) is probe:
            bucket, probes = table.locate(probe)
            assert bucket is None and probes == 1
            early += 1
        bucket, probes = table.locate(probe)
        assert bucket is None
        assert probes <= p.capacity
        assert all(s is None or s[0] != probe for s in table.slots)
    assert early > 0


def test_duplicate_and_full():
    p = ModuloPolicy(2)
    table = build(p, [KeyRecord.for_int(1)])
    with pytest.raises(DuplicateKey):
        table.insert(KeyRecord.for_int(1))
    table.insert(KeyRecord.for_int(2))
    with pytest.raises(TableFull):
        table.insert(KeyRecord.for_int(3))
    with pytest.raises(NotFound):
        table.delete(KeyRecord.for_int(3))


def test_delete_only_key_restores_empty_bytes():
    p = HashPriorityPolicy(5)
    table = StableTable(p, payload_size=8)
    empty = table.serialize()
    k = KeyRecord.derive(b"/x", 0)
    table.insert(k, b"secret!!")
    table.delete(k)
    assert table.serialize() == empty == bytes(5 * (RECORD_HEADER.size + 8))


def test_delete_relocates_like_the_figure():
    p = ModuloPolicy(3)
    table = build(p, [KeyRecord.for_int(v) for v in (1, 3, 6)])
    assert table.layout() == [3, 1, 6]
    stats = table.delete(KeyRecord.for_int(3))
    assert table.layout() == [6, 1, None]
    assert stats.relocations == 1 and stats.bucket_writes == 2
    assert table.serialize() == build(p, [KeyRecord.for_int(v) for v in (1, 6)]).serialize()


@pytest.mark.parametrize("policy", POLICIES + [ModuloPolicy(7)], ids=repr)
def test_delete_equals_fresh_build_for_every_subset(policy, six_keys):
    for r in range(1, 7):
        for subset in itertools.combinations(six_keys, r):
            full = build(policy, subset)
            for victim in subset:
                t = full.copy()
                t.delete(victim)
                rest = [k for k in subset if k != victim]
                assert t.serialize() == build(policy, rest).serialize()
                assert t.blocking_pair() is None


@pytest.mark.parametrize("policy", POLICIES, ids=repr)
def test_insert_and_delete_are_inverse(policy, six_keys):
    for r in range(0, 6):
        for subset in itertools.combinations(six_keys[:5], r):
            base = build(policy, subset)
            for k in six_keys:
                t = base.copy()
                if k in subset:
                    t.delete(k)
                    t.insert(k)
                else:
                    t.insert(k)
                    t.delete(k)
                assert t.serialize() == base.serialize()


def test_serialize_is_injective_over_all_subsets(six_keys):
    p = HashPriorityPolicy(7)
    seen = {}
    for mask in range(64):
        subset = [k for i, k in enumerate(six_keys) if mask >> i & 1]
        rep = build(p, subset).serialize()
        assert rep not in seen
        seen[rep] = mask
    assert build(p, []).serialize() == bytes(7 * RECORD_HEADER.size)


def test_payloads_round_trip_through_bytes(six_keys):
    p = BlockGroupLocalityPolicy(2, 4)
    table = StableTable(p, payload_size=6)
    for i, k in enumerate(six_keys):
        table.insert(k, b"p%d" % i)
    with pytest.raises(PayloadTooLarge):
        table.update(six_keys[0], b"toolong!")
    table.update(six_keys[0], b"fresh")
    again = StableTable.from_bytes(p, table.serialize(), payload_size=6)
    assert again == table
    assert again.get(six_keys[0]) == b"fresh"
    assert again.count == 6


def test_cost_rises_with_load():
    p = HashPriorityPolicy(256)
    rng = random.Random(2)
    means = []
    table = StableTable(p)
    for target in (0.3, 0.6, 0.9):
        while table.load_factor < target:
            table.insert(KeyRecord.for_int(rng.randrange(10**9)))
        samples = []
        for _ in range(200):
            k = KeyRecord.for_int(rng.randrange(10**9, 2 * 10**9))
            samples.append(table.insert(k).bucket_writes)
            table.delete(k)
        means.append(sum(samples) / len(samples))
    assert means == sorted(means)
    assert means[2] > 3 * means[0]


UNIVERSE = [KeyRecord.derive(b"/m%d" % (i % 2), i // 2, seed=11) for i in range(8)]


class StableTableMachine(RuleBasedStateMachine):
    """Random interleavings against a plain set model and the layout oracle."""

    def __init__(self):
        super().__init__()
        self.policy = BlockGroupLocalityPolicy(3, 3)
        self.table = StableTable(self.policy, payload_size=4)
        self.model = {}

    @precondition(lambda self: len(self.model) < 8)
    @rule(i=st.integers(0, 7), payload=st.binary(max_size=4))
    def insert(self, i, payload):
        k = UNIVERSE[i]
        if k in self.model:
            with pytest.raises(DuplicateKey):
                self.table.insert(k, payload)
        else:
            self.table.insert(k, payload)
            self.model[k] = payload

    @rule(i=st.integers(0, 7))
    def delete(self, i):
        k = UNIVERSE[i]
        if k in self.model:
            self.table.delete(k)
            del self.model[k]
        else:
            with pytest.raises(NotFound):
                self.table.delete(k)

    @invariant()
    def matches_model(self):
        assert self.table.count == len(self.model)
        for k, payload in self.model.items():
            assert self.table.get(k) == payload

    @invariant()
    def stable_and_canonical(self):
        assert self.table.blocking_pair() is None
        fresh = StableTable(self.policy, payload_size=4)
        for k, payload in sorted(self.model.items(), key=lambda kv: kv[0].logical_bucket):
            fresh.insert(k, payload)
        assert fresh.serialize() == self.table.serialize()


TestStableTableMachine = StableTableMachine.TestCase
TestStableTableMachine.settings = settings(max_examples=60, stateful_step_count=30, deadline=None)
