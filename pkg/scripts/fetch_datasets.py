#!/usr/bin/env python3
"""Download the cora and citeseer citation benchmarks into data/.

Both ship as public .tgz archives holding a <name>.content file (one node
per line: id, a 0/1 word vector, a label string) and a <name>.cites edge
list. The loader in gnnattack.graphdata reads those two files directly, so
this script just fetches, verifies, and unpacks them:

    python3 scripts/fetch_datasets.py            # both datasets
    python3 scripts/fetch_datasets.py cora       # one of them

Needs outbound network access. On an offline machine, run it elsewhere and
copy data/<name>/ across; every test that wants these files skips with this
instruction when they are missing.
"""

import argparse
import hashlib
import io
import sys
import tarfile
import urllib.error
import urllib.request
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

ARCHIVES = {
    "cora": "https://linqs-data.soe.ucsc.edu/public/lbc/cora.tgz",
    "citeseer": "https://linqs-data.soe.ucsc.edu/public/lbc/citeseer.tgz",
}


def fetch(name: str) -> int:
    url = ARCHIVES[name]
    dest = DATA_DIR / name
    content = dest / f"{name}.content"
    cites = dest / f"{name}.cites"
    if content.exists() and cites.exists():
        print(f"{name}: already present at {dest}")
        return 0

    print(f"{name}: downloading {url}")
    try:
        with urllib.request.urlopen(url, timeout=60) as response:
            blob = response.read()
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        print(f"{name}: download failed ({exc}). Run this script on a machine "
              f"with network access and copy {dest}/ over.", file=sys.stderr)
        return 1
    print(f"{name}: {len(blob)} bytes, sha256 {hashlib.sha256(blob).hexdigest()}")

    dest.mkdir(parents=True, exist_ok=True)
    wanted = {f"{name}.content": content, f"{name}.cites": cites}
    found = set()
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as archive:
        for member in archive.getmembers():
            basename = Path(member.name).name
            if basename in wanted and member.isfile():
                payload = archive.extractfile(member).read()
                wanted[basename].write_bytes(payload)
                found.add(basename)
    missing = set(wanted) - found
    if missing:
        print(f"{name}: archive did not contain {sorted(missing)}", file=sys.stderr)
        return 1
    lines = content.read_text().count("\n")
    print(f"{name}: unpacked {content.name} ({lines} nodes) and {cites.name}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("names", nargs="*", metavar="NAME",
                        help="datasets to fetch: cora, citeseer (default: both)")
    args = parser.parse_args(argv)
    names = args.names or list(ARCHIVES)
    unknown = [n for n in names if n not in ARCHIVES]
    if unknown:
        parser.error(f"unknown dataset(s) {unknown}; pick from {list(ARCHIVES)}")
    return max(fetch(name) for name in names)


if __name__ == "__main__":
    sys.exit(main())
