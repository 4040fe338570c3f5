"""Write the bundled example systems (and optionally a random one) as JSON.

Usage::

    python3 scripts/make_systems.py [outdir] [--random SEED]
"""
import argparse
import json
from pathlib import Path

from khsys.cli import serialize_system
from khsys.generators import four_two_extension, identity_extension, random_extension, skew_torus


def write(ext, path: Path):
    path.write_text(json.dumps(serialize_system(ext), indent=2, sort_keys=True) + "\n")
    print(f"wrote {path} ({len(ext.top.space)} top atoms)")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir", nargs="?", default=str(Path(__file__).resolve().parent.parent / "systems"))
    ap.add_argument("--skew-n", type=int, default=6)
    ap.add_argument("--random", type=int, default=None, metavar="SEED")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    write(skew_torus(args.skew_n), out / f"skew{args.skew_n}.json")
    write(identity_extension(3), out / "identity3.json")
    write(four_two_extension(), out / "four_two.json")
    if args.random is not None:
        write(random_extension(args.random), out / f"random{args.random}.json")


if __name__ == "__main__":
    main()
