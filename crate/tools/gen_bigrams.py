#!/usr/bin/env python3
"""Regenerates the character-bigram count table used by prompt screening.

Text is lowercased, every run of non-letters becomes one space, and counts
are taken over the 27-symbol alphabet a-z plus space.

    python3 tools/gen_bigrams.py > crates/core/data/guards/bigrams.tsv
"""
import re
import sys
from collections import Counter
from pathlib import Path

SAMPLE = Path(__file__).resolve().parent.parent / "crates/core/data/guards/english_sample.txt"


def normalize(text):
    return " " + re.sub(r"[^a-z]+", " ", text.lower()).strip() + " "


def main():
    text = normalize(SAMPLE.read_text(encoding="utf-8"))
    counts = Counter(zip(text, text[1:]))
    out = sys.stdout
    out.write("# bigram\tcount\n")
    for (a, b), n in sorted(counts.items()):
        out.write(f"{a.replace(' ', '_')}{b.replace(' ', '_')}\t{n}\n")


if __name__ == "__main__":
    main()
