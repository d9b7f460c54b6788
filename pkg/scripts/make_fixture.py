"""Write the procedural two-clip fixture dataset to a directory."""
import argparse
from pathlib import Path

from occlusim.fixtures import make_fixture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("root", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    manifest = make_fixture(args.root, args.seed)
    for clip_id, entry in manifest.items():
        print(f"{clip_id}: {entry['action_class']} -> {args.root / entry['frames']}")
    print(f"manifest: {args.root / 'manifest.json'}")


if __name__ == "__main__":
    main()
