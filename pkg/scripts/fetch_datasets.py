#!/usr/bin/env python3
"""Download the tabular benchmark files listed in the dataset descriptors.

Usage: python scripts/fetch_datasets.py [--data-dir data] [dataset ...]

Balance-scale is also available offline via
``unimodal-ordinal data generate balance-scale``.
"""

import argparse
import hashlib
import sys
import urllib.request
from pathlib import Path

from unimodal_ordinal.data import available_datasets, get_descriptor


def fetch(dataset_id, data_dir, timeout=30):
    d = get_descriptor(dataset_id)
    target = Path(data_dir) / d.filename
    if target.is_file():
        return target, "present"
    with urllib.request.urlopen(d.url, timeout=timeout) as resp:
        payload = resp.read()
    digest = hashlib.sha256(payload).hexdigest()
    if d.sha256 and d.sha256 != digest:
        raise RuntimeError(f"{dataset_id}: checksum mismatch ({digest})")
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(payload)
    return target, f"downloaded, sha256 {digest}"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("datasets", nargs="*", default=available_datasets())
    ap.add_argument("--data-dir", default="data")
    args = ap.parse_args(argv)
    status = 0
    for name in args.datasets:
        try:
            path, note = fetch(name, args.data_dir)
            print(f"{name}: {path} ({note})")
        except Exception as exc:
            print(f"{name}: failed: {exc}", file=sys.stderr)
            status = 1
    return status


if __name__ == "__main__":
    sys.exit(main())
