import pytest

from hids.keys import KeyRecord


def serial_dictatorship(policy, keys):
    """Independent layout oracle.

    Every bucket ranks keys by the same total order, so the unique stable
    matching gives each key, from most to least preferred, its favourite
    bucket among those still free.
    """
    slots = [None] * policy.capacity
    remaining = list(keys)
    while remaining:
        best = remaining[0]
        for k in remaining[1:]:
            if policy.bucket_prefers(0, k, best) is k:
                best = k
        remaining.remove(best)
        for b in policy.preference_list(best):
            if slots[b] is None:
                slots[b] = best
                break
    return slots


@pytest.fixture
def six_keys():
    # Three files, two logical buckets each, so block-group homes collide.
    return [KeyRecord.derive(b"/f%d" % (i % 3), i // 3, seed=7) for i in range(6)]


def pytest_terminal_summary(terminalreporter):
    import sys

    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
