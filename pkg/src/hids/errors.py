"""Exception hierarchy shared by the tables, the block store and the journal."""


class HidsError(Exception):
    """Base class for every error raised by this package."""


class TableFull(HidsError):
    """No free slot is left; the table never resizes."""


class DuplicateKey(HidsError):
    pass


class NotFound(HidsError, KeyError):
    pass


class RankOutOfRange(HidsError, IndexError):
    pass


class PayloadTooLarge(HidsError, ValueError):
    pass


class BadGeometry(HidsError, ValueError):
    pass


class NoSpace(HidsError):
    """The bucket or inode table cannot take the keys a write needs."""


class PathTooLong(HidsError, ValueError):
    pass


class ReadBeyondEof(HidsError):
    pass


class BadHandle(HidsError):
    pass


class CorruptImage(HidsError):
    pass


class CorruptJournal(HidsError):
    pass


class OversizeOp(HidsError, ValueError):
    pass


class ExplosionGuard(HidsError):
    """Enumeration would evaluate more sequence pairs than the configured budget."""
