"""Generates the bundled synthetic corpus and its derived test fixtures.

    python3 tools/make_fixture.py

Outputs are deterministic for a given seed. Emotion utterances carry
label-specific vocabulary so a small head can learn them, and each gold
span covers the event phrase inside its cause utterance.
"""

import json
import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parent.parent
SPEAKERS = ["Chandler", "Monica", "Ross", "Rachel", "Joey", "Phoebe"]

EVENTS = [
    "got the head chef job",
    "lost the apartment keys",
    "broke the coffee machine",
    "won two tickets to the game",
    "forgot the anniversary dinner",
    "adopted a tiny duck",
    "moved to Paris for work",
    "burned the Thanksgiving turkey",
    "found a spider in the bathtub",
    "opened a new café downtown",
    "failed the driving test",
    "saw a ghost in the hallway",
]
OPENERS = ["So I", "Guess what, I", "Yesterday I", "You know, I", "Okay, so I", "Honestly I"]
CLOSERS = ["", " this morning", " last night", " at the office", " again"]
NEUTRAL = [
    "Where is the remote",
    "Can you pass the salt",
    "We should get some coffee",
    "What time is it",
    "I will be right back",
    "Did anyone call",
]
REACTIONS = {
    "joy": ["That is wonderful news", "Yay I am so happy for you", "This is amazing"],
    "surprise": ["Wait what really", "No way seriously", "Whoa I did not expect that"],
    "anger": ["Are you kidding me", "That makes me so mad", "Unbelievable how could you"],
    "sadness": ["Oh no that is so sad", "I feel terrible about it", "That breaks my heart"],
    "disgust": ["Ew that is gross", "Yuck I cannot look", "That is disgusting"],
    "fear": ["I am so scared now", "That is terrifying", "Please make it stop I am afraid"],
}


def make_conversation(rng, index):
    n = rng.randint(3, 8)
    utts, pairs = [], []
    event_slots = []
    for i in range(1, n + 1):
        speaker = rng.choice(SPEAKERS)
        emotional = event_slots and rng.random() < 0.5
        if emotional:
            emotion = rng.choice(sorted(REACTIONS))
            text = rng.choice(REACTIONS[emotion])
            k = min(len(event_slots), rng.choice([1, 1, 2]))
            for j, span in sorted(rng.sample(event_slots, k)):
                pairs.append({"emotion_utt_id": i, "cause_utt_id": j,
                              "emotion": emotion, "span": span})
            if rng.random() < 0.15:
                # The reaction also causes itself.
                pairs.append({"emotion_utt_id": i, "cause_utt_id": i,
                              "emotion": emotion, "span": [0, len(text)]})
        elif rng.random() < 0.6:
            emotion = "neutral"
            event = rng.choice(EVENTS)
            opener = rng.choice(OPENERS)
            text = f"{opener} {event}{rng.choice(CLOSERS)}"
            start = len(opener) + 1
            event_slots.append((i, [start, start + len(event)]))
        else:
            emotion = "neutral"
            text = rng.choice(NEUTRAL)
        utts.append({"utterance_id": i, "speaker": speaker, "text": text, "emotion": emotion})
    pairs.sort(key=lambda p: (p["emotion_utt_id"], p["cause_utt_id"]))
    return {"conversation_id": f"syn_{index:02d}", "utterances": utts, "pairs": pairs}


def dump(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8")


def main():
    rng = random.Random(20)
    corpus = {"conversations": [make_conversation(rng, i) for i in range(20)]}
    dump(ROOT / "data" / "synthetic20.json", corpus)

    gold_predictions = {"predictions": [
        dict(p, conversation_id=c["conversation_id"])
        for c in corpus["conversations"] for p in c["pairs"]]}
    dump(ROOT / "tests" / "data" / "synthetic20_gold_predictions.json", gold_predictions)

    dangling = {"conversations": [{
        "conversation_id": "dangling",
        "utterances": [
            {"utterance_id": 1, "speaker": "Ross", "text": "We were on a break",
             "emotion": "neutral"},
            {"utterance_id": 2, "speaker": "Rachel", "text": "Are you kidding me",
             "emotion": "anger"}],
        "pairs": [{"emotion_utt_id": 2, "cause_utt_id": 7, "emotion": "anger", "span": None}]}]}
    dump(ROOT / "tests" / "data" / "dangling_pair.json", dangling)
    (ROOT / "tests" / "data" / "empty.json").write_text("")


if __name__ == "__main__":
    main()
