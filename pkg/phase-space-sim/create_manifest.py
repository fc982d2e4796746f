#!/usr/bin/env python3
"""
Create the manifest for a simulation output directory
"""

import argparse
import hashlib
import os
import platform
import re
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import scipy

MANIFEST_NAME = "manifest.txt"

FILE_PATTERNS = [
    (r'^trajectory_(\d+)\.tsv$', 'trajectory'),
    (r'^record_(\d+)\.tsv$', 'record'),
    (r'^husimi_t([0-9.]+)\.tsv$', 'husimi'),
    (r'^ensemble_moments\.tsv$', 'ensemble'),
    (r'^classical\.tsv$', 'classical'),
    (r'^poincare\.tsv$', 'poincare'),
    (r'^povm_samples\.tsv$', 'povm'),
    (r'^lindblad_moments\.tsv$', 'lindblad'),
    (r'^trace_distance\.tsv$', 'trace_distance'),
]


def parse_filename(filename: str) -> Dict[str, Any]:
    """Classify an output file by name; `key` is the trajectory index or snapshot time."""
    for pattern, kind in FILE_PATTERNS:
        match = re.match(pattern, filename)
        if match:
            key = match.group(1) if match.groups() else None
            return {'filename': filename, 'kind': kind, 'key': key}
    return {'filename': filename, 'kind': 'other', 'key': None}


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def config_digest(config_text: str) -> str:
    return hashlib.sha256(config_text.encode('utf-8')).hexdigest()


def version_info() -> Dict[str, str]:
    return {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
    }


def _sort_key(entry: Dict[str, Any]):
    key = entry['key']
    try:
        numeric = float(key) if key is not None else -1.0
    except ValueError:
        numeric = -1.0
    return (entry['kind'], numeric, entry['filename'])


def collect_entries(output_dir: Path) -> List[Dict[str, Any]]:
    entries = []
    for path in output_dir.iterdir():
        if not path.is_file() or path.name == MANIFEST_NAME or path.name.startswith('.'):
            continue
        entry = parse_filename(path.name)
        entry['sha256'] = file_digest(path)
        entry['bytes'] = path.stat().st_size
        entries.append(entry)
    entries.sort(key=_sort_key)
    return entries


def generate_manifest_text(
    entries: List[Dict[str, Any]], metadata: Dict[str, Any]
) -> str:
    """Render the manifest: `key = value` metadata, then one line per file."""
    lines = []
    for key in sorted(metadata):
        lines.append(f"{key} = {metadata[key]}")
    for name, version in version_info().items():
        lines.append(f"version.{name} = {version}")
    lines.append(f"files = {len(entries)}")
    lines.append("")
    lines.append("sha256\tbytes\tkind\tfile")
    for entry in entries:
        lines.append(
            f"{entry['sha256']}\t{entry['bytes']}\t{entry['kind']}\t{entry['filename']}"
        )
    return "\n".join(lines) + "\n"


def write_manifest(output_dir: Path, metadata: Dict[str, Any]) -> Path:
    """Digest every file in output_dir and write the manifest with write-then-rename."""
    output_dir = Path(output_dir)
    entries = collect_entries(output_dir)
    text = generate_manifest_text(entries, metadata)
    manifest_path = output_dir / MANIFEST_NAME
    tmp_path = output_dir / f".{MANIFEST_NAME}.tmp"
    with open(tmp_path, 'w', encoding='utf-8') as f:
        f.write(text)
    os.replace(tmp_path, manifest_path)
    return manifest_path


def read_manifest(path: Path) -> Dict[str, Any]:
    """Parse a manifest back into its metadata and file digests."""
    metadata: Dict[str, str] = {}
    files: Dict[str, str] = {}
    in_files = False
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            line = line.rstrip('\n')
            if not line:
                in_files = True
                continue
            if in_files:
                if line.startswith('sha256\t'):
                    continue
                digest, _, _, name = line.split('\t')
                files[name] = digest
            else:
                key, _, value = line.partition(' = ')
                metadata[key] = value
    return {'metadata': metadata, 'files': files}


def verify_manifest(output_dir: Path) -> List[str]:
    """Names of files whose digest no longer matches (or that went missing)."""
    output_dir = Path(output_dir)
    manifest = read_manifest(output_dir / MANIFEST_NAME)
    mismatched = []
    for name, digest in manifest['files'].items():
        path = output_dir / name
        if not path.exists() or file_digest(path) != digest:
            mismatched.append(name)
    return mismatched


def main(argv: Optional[List[str]] = None):
    parser = argparse.ArgumentParser(
        description="Write or verify the manifest of a simulation output directory"
    )
    parser.add_argument("output_dir", help="Simulation output directory")
    parser.add_argument(
        "--verify", "-v", action="store_true", help="Check digests instead of writing"
    )
    args = parser.parse_args(argv)
    output_dir = Path(args.output_dir)

    if not output_dir.exists():
        print(f"Error: Output directory '{output_dir}' does not exist.")
        return 1

    if args.verify:
        mismatched = verify_manifest(output_dir)
        if mismatched:
            print(f"✗ {len(mismatched)} file(s) do not match the manifest:")
            for name in mismatched:
                print(f"   • {name}")
            return 1
        print("✓ All files match the manifest")
        return 0

    previous = {}
    manifest_path = output_dir / MANIFEST_NAME
    if manifest_path.exists():
        previous = read_manifest(manifest_path)['metadata']
    metadata = {
        k: v for k, v in previous.items() if not k.startswith('version.') and k != 'files'
    }
    try:
        path = write_manifest(output_dir, metadata)
        print(f"✓ Generated {path.name} for {output_dir}")
    except IOError as e:
        print(f"✗ Error writing {MANIFEST_NAME}: {e}")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
