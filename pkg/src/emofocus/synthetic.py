"""Synthetic benchmark generator with known cause slots.

Each example is a templated situation whose emotion is conveyed only by
cause nouns drawn from a per-emotion lexicon.  Feeling words, frames, tail
sentences, and a pool of neutral object nouns are shared across emotions,
so the cause slots are the only class-informative positions.  Tails echo
either a cause noun or the neutral noun of the text, which teaches echo
patterns to n-gram speakers and gives generated responses contested noun
slots: a speaker that merely prefers rare context words will echo the
neutral noun, while one steered toward the cause words will echo those.

The default seed makes every derived artifact reproducible without any
external data.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .errors import UsageError
from .evaluation import EmoCauseExample

STOCK_EMOTIONS = (
    "joyful",
    "sad",
    "angry",
    "afraid",
    "surprised",
    "disgusted",
    "proud",
    "grateful",
)

CAUSE_LEXICON: dict[str, tuple[str, ...]] = {
    "joyful": (
        "gift", "party", "wedding", "puppy", "bonus", "reunion",
        "sunshine", "festival", "cake", "melody", "garden", "friend",
    ),
    "sad": (
        "funeral", "goodbye", "breakup", "silence", "farewell", "ruins",
        "drizzle", "casket", "obituary", "winter", "shadows", "letter",
    ),
    "angry": (
        "insult", "scam", "betrayal", "traffic", "thief", "liar",
        "vandal", "dent", "lawsuit", "spam", "gridlock", "cheat",
    ),
    "afraid": (
        "storm", "spider", "darkness", "siren", "stranger", "cliff",
        "snake", "basement", "growl", "fog", "alley", "earthquake",
    ),
    "surprised": (
        "twist", "jackpot", "visitor", "telegram", "confetti", "windfall",
        "comet", "riddle", "magician", "fireworks", "parade", "letter",
    ),
    "disgusted": (
        "mold", "roach", "garbage", "slime", "stench", "sewage",
        "maggot", "grease", "gunk", "fungus", "odor", "sludge",
    ),
    "proud": (
        "diploma", "medal", "trophy", "promotion", "graduation", "recital",
        "scholarship", "podium", "ribbon", "summit", "masterpiece", "milestone",
    ),
    "grateful": (
        "favor", "rescue", "donation", "kindness", "shelter", "blessing",
        "helper", "casserole", "bouquet", "loan", "mentor", "friend",
    ),
}

NEUTRAL_NOUNS = (
    "chair", "spoon", "window", "ladder", "bucket", "carpet", "kettle",
    "drawer", "fence", "lantern", "shelf", "napkin", "pencil", "doormat",
    "teapot", "stool", "curtain", "basket", "mirror", "candle", "wallet",
    "pillow", "clock", "hanger", "broom", "saucer", "vase", "tray",
    "cabinet", "doorknob", "railing", "awning", "mailbox", "bench",
    "gutter", "hinge", "plank", "tarp", "crate", "stapler", "folder",
    "binder", "mug", "coaster", "ottoman", "rug", "sill", "peg",
)

FEELING_WORDS = ("overwhelmed", "speechless", "shaken", "moved", "stirred")

TIME_PHRASES = (
    ("yesterday",),
    ("today",),
    ("recently",),
    ("last", "night"),
)

# Tail templates.  "N" echoes the text's neutral noun.  Cause nouns appear
# exactly once, in the situation, so replacing them removes them from a
# distractor completely; the neutral noun recurs through echo tails and is
# therefore the strongest copy candidate for any speaker that merely
# prefers frequent context words.
TAILS = (
    (("well", "that", "N", "sat", "in", "the", "corner", "."), "neutral", 0.225),
    (("well", "that", "N", "stayed", "right", "there", "."), "neutral", 0.225),
    (("well", "it", "was", "quite", "a", "day", "."), "generic", 0.275),
    (("well", "i", "keep", "thinking", "about", "it", "."), "generic", 0.275),
)

N_TAIL_WEIGHTS = ((1, 0.15), (2, 0.25), (3, 0.60))

# Situation frames: "C" cause slot, "N" neutral slot, "ADJ" feeling word,
# "TIME" time phrase.  Noun connectors are deliberately varied so that no
# "<noun> and the <noun>" bigram cycle dominates greedy continuations.
FRAMES = (
    ("i", "felt", "so", "ADJ", "because", "of", "the", "C", "with", "the",
     "C", "near", "the", "N", "TIME", "."),
    ("the", "C", "and", "the", "C", "left", "me", "ADJ", "by", "the", "N",
     "TIME", "."),
    ("TIME", "i", "was", "ADJ", "about", "the", "C", "near", "the", "N",
     "under", "the", "C", "."),
    ("honestly", "the", "C", "by", "the", "N", "made", "me", "ADJ", "and",
     "then", "came", "the", "C", "."),
    ("i", "was", "ADJ", "when", "the", "C", "with", "the", "C", "plus",
     "the", "C", "appeared", "by", "the", "N", "."),
)


def emotion_labels(n_emotions: int) -> tuple[str, ...]:
    """First n stock labels; synthesized labels beyond the stock eight."""
    if n_emotions < 2:
        raise UsageError("need at least two emotions")
    labels = list(STOCK_EMOTIONS[:n_emotions])
    for j in range(len(STOCK_EMOTIONS), n_emotions):
        labels.append(f"emotion{j}")
    return tuple(labels)


def _lexicon(labels: tuple[str, ...]) -> dict[str, tuple[str, ...]]:
    lex = {}
    for j, label in enumerate(labels):
        if label in CAUSE_LEXICON:
            lex[label] = CAUSE_LEXICON[label]
        else:
            lex[label] = tuple(
                f"cause{j}{chr(ord('a') + m)}" for m in range(12)
            )
    return lex


@dataclass(frozen=True)
class SynthExample:
    emotion: str
    tokens: tuple[str, ...]
    cause_indices: tuple[int, ...]

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def to_emocause(self) -> EmoCauseExample:
        return EmoCauseExample(
            emotion=self.emotion,
            tokens=self.tokens,
            cause_indices=self.cause_indices,
        )

    def to_dict(self) -> dict:
        return {
            "emotion": self.emotion,
            "text": self.text,
            "tokens": list(self.tokens),
            "cause_indices": list(self.cause_indices),
        }


def _build_example(
    emotion: str, lexicon: dict, rng: random.Random
) -> SynthExample:
    frame = FRAMES[rng.randrange(len(FRAMES))]
    n_slots = sum(1 for tok in frame if tok == "C")
    nouns = rng.sample(lexicon[emotion], n_slots)
    neutral = rng.choice(NEUTRAL_NOUNS)
    adj = rng.choice(FEELING_WORDS)
    time = rng.choice(TIME_PHRASES)

    tokens: list[str] = []
    causes: list[int] = []
    it = iter(nouns)
    for tok in frame:
        if tok == "C":
            causes.append(len(tokens))
            tokens.append(next(it))
        elif tok == "N":
            tokens.append(neutral)
        elif tok == "ADJ":
            tokens.append(adj)
        elif tok == "TIME":
            tokens.extend(time)
        else:
            tokens.append(tok)

    n_tails = rng.choices(
        [n for n, _ in N_TAIL_WEIGHTS], weights=[w for _, w in N_TAIL_WEIGHTS]
    )[0]
    tail_weights = [w for _, _, w in TAILS]
    for _ in range(n_tails):
        idx = rng.choices(range(len(TAILS)), weights=tail_weights)[0]
        for tok in TAILS[idx][0]:
            tokens.append(neutral if tok == "N" else tok)

    return SynthExample(
        emotion=emotion,
        tokens=tuple(tokens),
        cause_indices=tuple(sorted(causes)),
    )


def generate_benchmark(
    n_emotions: int = 8, n_sentences: int = 4000, seed: int = 0
) -> list[SynthExample]:
    """Deterministic corpus with evenly distributed emotions."""
    if n_sentences < 1:
        raise UsageError("need at least one sentence")
    labels = emotion_labels(n_emotions)
    lexicon = _lexicon(labels)
    rng = random.Random(seed)
    return [
        _build_example(labels[i % len(labels)], lexicon, rng)
        for i in range(n_sentences)
    ]


def write_benchmark(examples: list[SynthExample], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_dict(), sort_keys=True) + "\n")


def train_eval_split(
    examples: list[SynthExample], held_out_fraction: float = 0.1
) -> tuple[list[SynthExample], list[SynthExample]]:
    """First (1 - f) of the corpus for training, the tail for evaluation."""
    if not 0.0 < held_out_fraction < 1.0:
        raise UsageError("held_out_fraction must be in (0, 1)")
    cut = int(round(len(examples) * (1.0 - held_out_fraction)))
    cut = max(1, min(cut, len(examples) - 1))
    return examples[:cut], examples[cut:]
