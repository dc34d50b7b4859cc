"""Superstep manifests: enough state to resume a run after a crash."""

from __future__ import annotations

import json
import os
import shutil
from pathlib import Path

from .._errors import InputError, IntegrityError
from .records import file_checksum, verify_file

MANIFEST = "manifest.json"
FORMAT = 1


class Checkpoint:
    def __init__(self, root, enabled=True):
        self.root = Path(root)
        self.enabled = enabled
        self.path = self.root / MANIFEST

    def exists(self):
        return self.path.exists()

    def save(self, state: dict, files):
        if not self.enabled:
            return
        listing = {}
        for f in files:
            rel = os.path.relpath(f, self.root)
            listing[rel] = file_checksum(f)
        doc = {"format": FORMAT, "state": state, "files": listing}
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path)

    def load(self, verify=True) -> dict:
        try:
            with open(self.path) as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise IntegrityError(f"{self.path}: unreadable manifest ({exc})") from None
        if doc.get("format") != FORMAT:
            raise InputError(f"{self.path}: unsupported manifest format")
        if verify:
            for rel, checksum in doc["files"].items():
                f = self.root / rel
                if not f.exists():
                    raise IntegrityError(f"{f}: listed in manifest but missing")
                verify_file(f)
                if file_checksum(f) != checksum:
                    raise IntegrityError(f"{f}: checksum differs from manifest")
        state = doc["state"]
        state["_files"] = list(doc["files"])
        return state

    def prune(self, keep=()):
        """Delete everything not listed in the manifest (debris of an unfinished superstep)."""
        listed = {os.path.normpath(self.root / rel) for rel in self.load(verify=False)["_files"]}
        listed |= {os.path.normpath(p) for p in keep}
        listed.add(os.path.normpath(self.path))
        for entry in self.root.rglob("*"):
            if entry.is_file() and os.path.normpath(entry) not in listed:
                entry.unlink()


def fresh_dir(root: Path):
    """Empty ``root`` for a new run; refuse to clear a directory that is not a run."""
    if root.exists():
        if any(root.iterdir()) and not (root / MANIFEST).exists():
            raise InputError(f"{root} is not empty and holds no run manifest")
        shutil.rmtree(root)
    root.mkdir(parents=True)
