"""Executable Delta history independence games."""

from .adt import Adt, FsAdt, SetAdt
from .delta import LAST_K, OAHI, PHI_NULL, SHI, SHI_STAR, WHI, Delta, by_name
from .runner import (
    CONTAINED_IN,
    CONTAINS,
    EQUAL,
    INCOMPARABLE,
    GameReport,
    admitted_tuples,
    compare_deltas,
    is_canonical,
    memory_representations,
    play_game,
)
from .whi import AppendToy, RandomSlotToy, run_whi_statistical
