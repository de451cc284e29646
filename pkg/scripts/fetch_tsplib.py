#!/usr/bin/env python3
"""Fetch the benchmark ATSP instances from public TSPLIB mirrors into data/.

The repo ships only br17; this script downloads the remaining five files
(ftv33, ftv35, ftv38, p43, ry48p), verifies each one (header parses, the
matrix has DIMENSION^2 entries, asymmetric instances have an asymmetry
witness), and drops them next to br17.atsp.  Run it from anywhere:

    python scripts/fetch_tsplib.py [--force]
"""
from __future__ import annotations

import argparse
import gzip
import sys
import urllib.request
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from qtabu.tsplib import parse_instance

DATA_DIR = Path(__file__).resolve().parents[1] / "data"

# DIMENSION header values of the published instances
EXPECTED_DIMENSION = {
    "br17": 17,
    "ftv33": 34,
    "ftv35": 36,
    "ftv38": 39,
    "p43": 43,
    "ry48p": 48,
}

MIRRORS = (
    "http://comopt.ifi.uni-heidelberg.de/software/TSPLIB95/atsp/{name}.atsp.gz",
    "https://raw.githubusercontent.com/mastqe/tsplib/master/{name}.atsp",
)


def fetch(name: str) -> str:
    last_error: Exception | None = None
    for template in MIRRORS:
        url = template.format(name=name)
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                blob = resp.read()
            if url.endswith(".gz"):
                blob = gzip.decompress(blob)
            return blob.decode("utf-8", errors="replace")
        except Exception as exc:  # noqa: BLE001 - try the next mirror
            last_error = exc
            print(f"  {url}: {exc}")
    raise RuntimeError(f"all mirrors failed for {name}: {last_error}")


def verify(name: str, text: str) -> None:
    inst = parse_instance(text)
    expected = EXPECTED_DIMENSION[name]
    if inst.n != expected:
        raise RuntimeError(f"{name}: DIMENSION {inst.n} != expected {expected}")
    off = ~np.eye(inst.n, dtype=bool)
    if not (np.asarray(inst.costs != inst.costs.T) & off).any():
        raise RuntimeError(f"{name}: no asymmetry witness found")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--force", action="store_true",
                        help="re-download files that already exist")
    args = parser.parse_args()
    DATA_DIR.mkdir(exist_ok=True)
    failures = 0
    for name in EXPECTED_DIMENSION:
        target = DATA_DIR / f"{name}.atsp"
        if target.exists() and not args.force:
            print(f"{name}: already present, skipping")
            continue
        print(f"{name}: downloading ...")
        try:
            text = fetch(name)
            verify(name, text)
        except RuntimeError as exc:
            print(f"{name}: FAILED - {exc}")
            failures += 1
            continue
        target.write_text(text)
        print(f"{name}: wrote {target}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
