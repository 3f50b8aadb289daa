"""Command-line interface.

Exit codes: 0 success, 2 invalid arguments, 3 I/O / format / manifest
problems, 4 internal invariant violation, 5 a statistical gate failed.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import analysis
from .errors import (
    GeometryMismatchError,
    ImageFormatError,
    InsufficientSharesError,
    ManifestError,
    SeedFormatError,
)
from .raster_io import (
    load_image,
    manifest_path_for,
    read_manifest,
    save_image,
    write_manifest,
)
from .rng import DeterministicRandomnessWarning, RandomnessContext, parse_seed
from .scheme import SplitRequest, combine, split_n

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INTERNAL = 4
EXIT_GATE = 5

_DETERMINISTIC_NOTE = ("warning: deterministic mode (--seed); anyone holding the seed can "
                       "regenerate the random values, use only for tests and demos")


class UsageError(Exception):
    pass


def _err(msg):
    print(f"shadowshare: {msg}", file=sys.stderr)


def _seed(text):
    try:
        return parse_seed(text)
    except SeedFormatError as exc:
        raise UsageError(str(exc)) from None


def _load(path):
    try:
        return load_image(path)
    except FileNotFoundError:
        raise ImageFormatError(f"{path}: no such file") from None
    except OSError as exc:
        raise ImageFormatError(f"{path}: {exc.strerror or exc}") from None


# -- split ---------------------------------------------------------------------------

def _populate(out_dir: Path, files: dict[str, callable]):
    """Write every file or none.

    A missing ``out_dir`` is built as a sibling temp dir and renamed into
    place; an existing one receives files staged in a hidden temp dir.
    """
    out_dir = out_dir.resolve()
    fresh = not out_dir.exists()
    parent = out_dir.parent if fresh else out_dir
    parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".shadowshare-", dir=parent))
    moved = []
    try:
        for name, write in files.items():
            write(stage / name)
        if fresh:
            os.rename(stage, out_dir)
            return
        for name in files:
            os.replace(stage / name, out_dir / name)
            moved.append(out_dir / name)
    except BaseException:
        for p in moved:
            p.unlink(missing_ok=True)
        raise
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def cmd_split(args) -> int:
    if args.shares < 2:
        raise UsageError(f"--shares must be at least 2, got {args.shares}")
    if args.seed is not None:
        ctx = RandomnessContext.deterministic(_seed(args.seed))
        print(_DETERMINISTIC_NOTE, file=sys.stderr)
    else:
        ctx = RandomnessContext.os_entropy()
    try:
        source = _load(args.input)
        shares = split_n(SplitRequest(source, args.shares, ctx, link_shares=args.link))
    finally:
        ctx.wipe()
    args._context = ctx  # exposed for the wipe contract tests

    if combine(shares.shares) != source:
        _err("internal error: shares do not XOR back to the source")
        return EXIT_INTERNAL

    files = {}
    for img, m in zip(shares.shares, shares.manifests):
        name = f"share_{m.share_index}.png"
        files[name] = lambda p, img=img: save_image(img, p)
        files[manifest_path_for(name).name] = lambda p, m=m: write_manifest(m, p)
    try:
        _populate(Path(args.out_dir), files)
    finally:
        for img in shares.shares:
            img.samples.fill(0)
    print(f"wrote {args.shares} shares to {args.out_dir}")
    return EXIT_OK


# -- combine ---------------------------------------------------------------------------

def _check_manifests(paths, images):
    """Validate sidecars where they exist; returns the number found."""
    found = []
    for path, img in zip(paths, images):
        mp = manifest_path_for(path)
        if mp.exists():
            m = read_manifest(mp)
            m.check_image(img, str(path))
            found.append((path, m))
    if not found:
        return 0
    if len(found) != len(paths):
        missing = [str(p) for p in paths if p not in {f for f, _ in found}]
        _err(f"warning: no manifest for {', '.join(missing)}")
    first_path, first = found[0]
    seen = {}
    for path, m in found:
        if m.total_shares != len(paths):
            raise ManifestError(
                f"{path}: manifest says {m.total_shares} shares but {len(paths)} were given")
        if m.group_id != first.group_id:
            raise ManifestError(f"{path}: group_id differs from {first_path}")
        if m.share_index in seen:
            raise ManifestError(f"{path}: share_index {m.share_index} repeats {seen[m.share_index]}")
        seen[m.share_index] = path
    return len(found)


def cmd_combine(args) -> int:
    paths = [Path(p) for p in args.shares]
    if len(paths) < 2:
        raise UsageError(f"combine needs at least 2 share files, got {len(paths)}")
    images = [_load(p) for p in paths]
    try:
        restored = combine(images, names=[str(p) for p in paths])
    except GeometryMismatchError as exc:
        raise ImageFormatError(str(exc)) from None
    if not _check_manifests(paths, images):
        _err("warning: no manifests found; combining bare images without validation")
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    _populate(out.parent, {out.name: lambda p: save_image(restored, p)})
    print(f"restored {restored.width}x{restored.height} image to {out}")
    return EXIT_OK


# -- analyze ---------------------------------------------------------------------------

def _write_report(path, doc: dict, csv_text: str):
    path = Path(path)
    path.write_text(analysis.dumps_report(doc), encoding="utf-8")
    path.with_suffix(".csv").write_text(csv_text, encoding="utf-8")


def cmd_analyze(args) -> int:
    if args.trials < 1:
        raise UsageError(f"--trials must be at least 1, got {args.trials}")
    img = _load(args.image)
    balance = analysis.bit_balance(img)
    print(balance.format_table())
    doc = {"image": str(args.image), "bit_balance": balance.to_dict()}
    csv_text = balance.to_csv()
    ok = balance.passes

    if args.other is not None:
        other = _load(args.other)
        if other.geometry != img.geometry:
            raise ImageFormatError(f"{args.other}: geometry {other.geometry} differs from {img.geometry}")
        seed = None
        if args.seed is not None:
            seed = _seed(args.seed)
            print(_DETERMINISTIC_NOTE, file=sys.stderr)
        rep = analysis.share_indistinguishability(img, other, args.trials, seed=seed)
        print()
        print(rep.format_table())
        doc["indistinguishability"] = rep.to_dict()
        csv_text += "\n" + rep.to_csv()
        ok = ok and rep.passes

    if args.report:
        _write_report(args.report, doc, csv_text)
    if not ok:
        _err("one or more statistical gates failed at significance 0.001")
        return EXIT_GATE
    return EXIT_OK


# -- attack-demo -----------------------------------------------------------------------

def cmd_attack_demo(args) -> int:
    seed = _seed(args.seed)
    print(_DETERMINISTIC_NOTE, file=sys.stderr)
    src = _load(args.input)
    res = analysis.attack_comparison(src, seed, args.held, args.knows_which)
    scheme, naive = res["scheme"], res["naive"]
    print("known-RNG attacker holding one share")
    print(scheme.format_line())
    print(naive.format_line())
    ratio = res["ratio"]
    print(f"fraction ratio (scheme / naive): {ratio:.4f}" if ratio is not None
          else "fraction ratio (scheme / naive): n/a")
    if args.report:
        doc = {"scheme": scheme.to_dict(), "naive": naive.to_dict(), "ratio": ratio}
        Path(args.report).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if not (scheme.sound and naive.sound):
        _err("internal error: the attacker asserted a wrong bit")
        return EXIT_INTERNAL
    return EXIT_OK


# -- plumbing --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shadowshare",
        description="Split colour images into XOR shadow shares and restore them bit-exactly.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("split", help="split an image into N shadow images")
    p.add_argument("input")
    p.add_argument("--shares", "-n", type=int, default=2, help="number of shares (>= 2)")
    p.add_argument("--out-dir", "-d", required=True)
    p.add_argument("--seed", metavar="HEX64",
                   help="deterministic mode from a 64-hex-character seed (tests and demos only)")
    p.add_argument("--link", action="store_true", help="record a random group id in every manifest")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("combine", help="XOR shares back into the original")
    p.add_argument("shares", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("analyze", help="bit-plane balance and source indistinguishability")
    p.add_argument("image")
    p.add_argument("other", nargs="?", help="second source for the indistinguishability test")
    p.add_argument("--report", metavar="OUT", help="write JSON report here and CSV beside it")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", metavar="HEX64", help="deterministic trials from this seed")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("attack-demo", help="known-RNG attack against the scheme and a naive XOR pad")
    p.add_argument("input")
    p.add_argument("--seed", metavar="HEX64", required=True)
    p.add_argument("--held", choices=("first", "second"), default="first")
    p.add_argument("--knows-which", action="store_true",
                   help="attacker also knows which shadow image it holds")
    p.add_argument("--report", metavar="OUT")
    p.set_defaults(func=cmd_attack_demo)
    return parser


def run(argv=None) -> tuple[int, argparse.Namespace | None]:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (exc.code if isinstance(exc.code, int) else EXIT_USAGE), None
    warnings.simplefilter("ignore", DeterministicRandomnessWarning)
    try:
        code = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _err(str(exc))
        code = EXIT_USAGE
    except InsufficientSharesError as exc:
        _err(str(exc))
        code = EXIT_USAGE
    except (ImageFormatError, ManifestError, GeometryMismatchError, OSError) as exc:
        _err(str(exc))
        code = EXIT_IO
    except (AssertionError, np.AxisError) as exc:
        _err(f"internal error: {exc}")
        code = EXIT_INTERNAL
    return code, args


def main(argv=None) -> int:
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
