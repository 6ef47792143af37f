"""History-independent hash tables, block store and journal."""

from .block_store import BATCHED, WRITE_THROUGH, BlockStore, Geometry
from .dahi_table import DahiTable, LinearProbeBaseline
from .errors import HidsError
from .journal import JournaledStore, recover
from .keys import KeyRecord, hash64
from .policies import BlockGroupLocalityPolicy, HashPriorityPolicy, ModuloPolicy, make_policy
from .stable_table import StableTable

__version__ = "0.1.0"
