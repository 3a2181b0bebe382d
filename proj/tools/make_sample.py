#!/usr/bin/env python3
"""Writes the bundled 1,000-sentence sample used by the span-count sweep.

Sentences come from a small phrase grammar so that multi-word expressions
recur often enough to enter a frequency-thresholded dictionary. The output
is fully determined by the seed.
"""

import argparse
import random

SUBJECTS = [
    "the new york times", "the united states", "the prime minister", "the city council",
    "a local reporter", "the research team", "my younger brother", "the world health organization",
    "the football club", "the board of directors", "our next door neighbour", "the supreme court",
    "a group of students", "the national museum", "the european union", "the police department",
]
VERBS = [
    "announced", "rejected", "discussed", "reported on", "took part in", "paid attention to",
    "carried out", "looked into", "set up", "called off", "signed", "published",
]
OBJECTS = [
    "a new policy", "the annual report", "the climate change agreement", "a press conference",
    "the first round", "the peace talks", "a public hearing", "the trade deal",
    "the science fair", "a long term plan", "the world cup final", "the health care reform",
    "an open letter", "the election results", "the local elections", "a new study",
]
TAILS = [
    "on monday", "last week", "in the morning", "at the end of the year", "for the first time",
    "in new york city", "after a long debate", "as soon as possible", "in the united kingdom",
    "earlier this month", "by a wide margin", "in front of the crowd", "",
]
OPENERS = ["", "", "", "however ,", "on the other hand ,", "according to officials ,",
           "in addition ,", "as a result ,"]
FILLER = ["quietly", "finally", "again", "openly", "reluctantly", "eventually"]


def sentence(rng: random.Random) -> str:
    parts = [rng.choice(OPENERS), rng.choice(SUBJECTS)]
    if rng.random() < 0.3:
        parts.append(rng.choice(FILLER))
    parts += [rng.choice(VERBS), rng.choice(OBJECTS), rng.choice(TAILS)]
    text = " ".join(p for p in parts if p)
    text = text[0].upper() + text[1:]
    return text + rng.choice([".", ".", ".", "!", "?"])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/sample.txt")
    ap.add_argument("--sentences", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        for _ in range(args.sentences):
            f.write(sentence(rng) + "\n")


if __name__ == "__main__":
    main()
