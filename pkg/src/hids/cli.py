"""Command line front end: ``hids <command> ...``.

Exit status: 0 success, 1 game violation, 2 bad usage or geometry,
3 game budget exceeded, 4 I/O or image error.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Iterable, Iterator, Sequence
from typing import Optional

from .bench import format_rows, parse_loads, run_bench
from .block_store import BATCHED, WRITE_THROUGH, BlockStore, Geometry, _is_zero
from .errors import (
    BadGeometry,
    CorruptImage,
    CorruptJournal,
    ExplosionGuard,
    HidsError,
    NoSpace,
    NotFound,
    OversizeOp,
    PathTooLong,
    ReadBeyondEof,
)
from .games import by_name, play_game
from .games.structures import (
    BASELINE_UNIVERSE,
    FsStructure,
    JournaledFsStructure,
    baseline_structure,
    dahi_structure,
    fs_adt,
    set_adt,
    stable_structure,
)
from .journal import JournaledStore, recover

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_BUDGET, EXIT_IO = 0, 1, 2, 3, 4

JOURNAL_MODES = {"batched": BATCHED, "write-through": WRITE_THROUGH}


def _hex(text: str) -> int:
    return int(text, 16)


def _path(text: str) -> bytes:
    return text.encode("utf-8", "surrogateescape")


# image helpers

def _open_image(image: str):
    """Load an image; journaled images are recovered and wrapped."""
    store = BlockStore.load(image)
    if store.geometry.journal_slots:
        recover(store)
        return store, JournaledStore(store)
    return store, store


def hexdump_lines(chunks: Iterable[bytes], width: int = 16) -> Iterator[str]:
    """``hexdump -C`` style lines; runs of all-zero lines collapse to ``*``."""
    offset = 0
    carry = b""
    skipping = False
    for chunk in chunks:
        data = carry + chunk if carry else chunk
        usable = len(data) - len(data) % width
        if usable and _is_zero(data[:usable]):
            if not skipping:
                yield "*"
                skipping = True
            offset += usable
        else:
            for i in range(0, usable, width):
                line = data[i : i + width]
                if _is_zero(line):
                    if not skipping:
                        yield "*"
                        skipping = True
                else:
                    skipping = False
                    yield _hex_line(offset + i, line)
            offset += usable
        carry = data[usable:]
    if carry:
        yield _hex_line(offset, carry)
        offset += len(carry)
    yield f"{offset:08x}"


def _hex_line(offset: int, line: bytes) -> str:
    left = " ".join(f"{b:02x}" for b in line[:8])
    right = " ".join(f"{b:02x}" for b in line[8:])
    text = "".join(chr(b) if 32 <= b < 127 else "." for b in line)
    return f"{offset:08x}  {left:<23}  {right:<23}  |{text}|"


# commands

def cmd_mkfs(args) -> int:
    geo = Geometry(
        block_size=args.block_size,
        blocks_per_bucket=args.blocks_per_bucket,
        group_count=args.groups,
        buckets_per_group=args.buckets_per_group,
        inode_slots_per_group=args.inode_slots,
        seed=args.seed,
        policy_id=args.policy,
        journal_slots=args.journal_slots,
        journal_mode=JOURNAL_MODES[args.journal_mode],
    )
    store = BlockStore(geo)
    store.save(args.image)
    print(store.digest())
    return EXIT_OK


def cmd_write(args) -> int:
    if (args.data is None) == (args.input is None):
        print("error: give exactly one of --data or --input", file=sys.stderr)
        return EXIT_USAGE
    if args.input is not None:
        with open(args.input, "rb") as f:
            data = f.read()
    else:
        data = _path(args.data)
    store, fs = _open_image(args.image)
    if data:
        n = fs.write(_path(args.path), args.offset, data)
    else:
        n = fs.create(_path(args.path))
    store.save(args.image)
    print(n)
    return EXIT_OK


def cmd_read(args) -> int:
    _, fs = _open_image(args.image)
    path = _path(args.path)
    length = args.length
    if length is None:
        view = fs.view() if isinstance(fs, JournaledStore) else fs
        length = max(0, view.inode(path).file_size - args.offset)
    data = fs.read(path, args.offset, length)
    if args.output:
        with open(args.output, "wb") as f:
            f.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    return EXIT_OK


def cmd_rm(args) -> int:
    store, fs = _open_image(args.image)
    path = _path(args.path)
    if not fs.exists(path):
        raise NotFound(path)
    fs.delete(path)
    store.save(args.image)
    return EXIT_OK


def cmd_inspect(args) -> int:
    store = BlockStore.load(args.image)
    if args.hexdump:
        for line in hexdump_lines(store.iter_chunks()):
            print(line)
    else:
        print(store.layout_map())
    return EXIT_OK


def cmd_digest(args) -> int:
    print(BlockStore.load(args.image).digest())
    return EXIT_OK


def _game_target(structure: str, mode: str, k: int, after_flush: bool):
    if structure == "stable":
        return set_adt(), stable_structure(7)
    if structure == "dahi":
        return set_adt(), dahi_structure(7)
    if structure == "baseline":
        return set_adt(BASELINE_UNIVERSE), baseline_structure(3)
    if structure == "jhi" or (structure == "fs" and mode == "lastk"):
        return fs_adt(), JournaledFsStructure(k, WRITE_THROUGH, after_flush=after_flush)
    if structure == "batched":
        return fs_adt(), JournaledFsStructure(k, BATCHED, after_flush=after_flush)
    return fs_adt(), FsStructure()


def cmd_game(args) -> int:
    adt, dut = _game_target(args.structure, args.mode, args.k, args.after_flush)
    delta = by_name(args.mode, args.k)
    report = play_game(
        adt,
        dut,
        delta,
        args.max_len,
        start_len=args.start_len,
        budget=args.budget,
        max_violations=args.max_violations,
        compress=not args.literal,
    )
    for line in report.lines(getattr(dut, "describe", None)):
        print(line)
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_bench(args) -> int:
    rows = run_bench(parse_loads(args.loads), args.trials, args.mode, args.capacity, args.seed, args.probes)
    print(format_rows(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hids", description="History-independent block store tools.")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mkfs", help="create an empty image")
    m.add_argument("--image", required=True)
    m.add_argument("--groups", type=int, default=8)
    m.add_argument("--buckets-per-group", type=int, default=4)
    m.add_argument("--block-size", type=int, default=4096)
    m.add_argument("--blocks-per-bucket", type=int, default=5120)
    m.add_argument("--inode-slots", type=int, default=8, help="inode slots per group")
    m.add_argument("--policy", type=int, default=2, help="1 hash priority, 2 block group, 3 linear probe, 4 delete agnostic")
    m.add_argument("--seed", type=_hex, default=0, help="hash seed in hex")
    m.add_argument("--journal-slots", type=int, default=0)
    m.add_argument("--journal-mode", choices=sorted(JOURNAL_MODES), default="batched")
    m.set_defaults(func=cmd_mkfs)

    w = sub.add_parser("write", help="write bytes into a file")
    w.add_argument("--image", required=True)
    w.add_argument("--path", required=True)
    w.add_argument("--offset", type=int, default=0)
    w.add_argument("--data", help="literal text to write")
    w.add_argument("--input", help="file whose bytes are written")
    w.set_defaults(func=cmd_write)

    r = sub.add_parser("read", help="read bytes from a file")
    r.add_argument("--image", required=True)
    r.add_argument("--path", required=True)
    r.add_argument("--offset", type=int, default=0)
    r.add_argument("--length", type=int, help="default: to end of file")
    r.add_argument("--output", help="write here instead of standard output")
    r.set_defaults(func=cmd_read)

    d = sub.add_parser("rm", help="delete a file")
    d.add_argument("--image", required=True)
    d.add_argument("--path", required=True)
    d.set_defaults(func=cmd_rm)

    i = sub.add_parser("inspect", help="print the bucket and inode layout")
    i.add_argument("--image", required=True)
    i.add_argument("--hexdump", action="store_true", help="dump non-zero image bytes instead")
    i.set_defaults(func=cmd_inspect)

    g = sub.add_parser("digest", help="print the SHA-256 of the image")
    g.add_argument("--image", required=True)
    g.set_defaults(func=cmd_digest)

    gm = sub.add_parser("game", help="run an exhaustive history independence game")
    gm.add_argument("--mode", choices=["shi", "whi", "oahi", "oahi-literal", "lastk", "phinull", "shistar"], default="shi")
    gm.add_argument("--structure", choices=["stable", "dahi", "baseline", "fs", "jhi", "batched"], default="stable")
    gm.add_argument("--max-len", type=int, default=4)
    gm.add_argument("--k", type=int, default=2, help="window for lastk and journal size")
    gm.add_argument("--start-len", type=int, help="default: max-len // 2")
    gm.add_argument("--budget", type=int, default=10**6)
    gm.add_argument("--max-violations", type=int)
    gm.add_argument("--after-flush", action="store_true", help="adversary sees journaled images only after a flush")
    gm.add_argument("--literal", action="store_true", help="enumerate every sequence instead of summaries")
    gm.set_defaults(func=cmd_game)

    b = sub.add_parser("bench", help="bucket writes per operation against load factor")
    b.add_argument("--loads", default="0.1..0.9")
    b.add_argument("--trials", type=int, default=50)
    b.add_argument("--mode", choices=["shi", "dahi"], default="shi")
    b.add_argument("--capacity", type=int, default=1024)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--probes", type=int, default=10, help="measured operations per trial and load")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # Reader went away (``| head``); stay quiet like other Unix tools.
        sys.stdout = None
        return EXIT_OK
    except (BadGeometry, PathTooLong, OversizeOp) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExplosionGuard as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (OSError, CorruptImage, CorruptJournal, NotFound, NoSpace, ReadBeyondEof) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (HidsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
