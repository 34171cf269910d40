"""Benchmark corpus of MiniSol contracts with ground-truth labels."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

from .minisol import ContractProgram, parse_file

LABELS = ("exploitable", "safe")


@dataclass(frozen=True)
class CorpusEntry:
    file: str
    label: str
    expected_class: Optional[str]
    notes: str
    path: str = ""

    @property
    def name(self) -> str:
        return os.path.splitext(os.path.basename(self.file))[0]

    @property
    def exploitable(self) -> bool:
        return self.label == "exploitable"

    def reason(self) -> str:
        """First comment line of the source: what makes it (un)safe."""
        with open(self.path) as fh:
            for line in fh:
                line = line.strip()
                if line.startswith("//"):
                    return line[2:].strip()
        return ""


def corpus_dir() -> str:
    env = os.environ.get("ORACLEFUZZ_CORPUS")
    if env:
        return env
    here = os.path.dirname(os.path.abspath(__file__))
    for cand in (os.path.join(here, "corpus"),
                 os.path.join(here, os.pardir, os.pardir, "corpus")):
        if os.path.isfile(os.path.join(cand, "manifest")):
            return os.path.normpath(cand)
    return os.path.join(os.getcwd(), "corpus")


def read_manifest(path: str) -> list:
    base = os.path.dirname(path)
    entries = []
    with open(path) as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"{path}:{n}: expected 4 fields")
            file, label, cls, anchor = parts
            if label not in LABELS:
                raise ValueError(f"{path}:{n}: unknown label {label!r}")
            if (label == "exploitable") == (cls == "none"):
                raise ValueError(f"{path}:{n}: class does not fit label")
            entries.append(CorpusEntry(file, label, None if cls == "none" else cls,
                                       anchor, os.path.join(base, file)))
    return entries


def list_corpus(directory: Optional[str] = None) -> list:
    return read_manifest(os.path.join(directory or corpus_dir(), "manifest"))


def get_entry(name: str, directory: Optional[str] = None) -> CorpusEntry:
    for e in list_corpus(directory):
        if e.name == name or e.file == name:
            return e
    raise KeyError(name)


def load_contract(entry) -> ContractProgram:
    path = entry.path if isinstance(entry, CorpusEntry) else str(entry)
    return parse_file(path)


def decoys(directory: Optional[str] = None) -> list:
    """Extra .msol files in the corpus directory that are not benchmark
    entries (used to test bookkeeping identification)."""
    d = directory or corpus_dir()
    listed = {e.file for e in list_corpus(d)}
    return sorted(os.path.join(d, f) for f in os.listdir(d)
                  if f.endswith(".msol") and f not in listed)
