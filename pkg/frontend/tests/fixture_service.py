"""Fixture service for the scripted UI lifecycle test: a small deterministic
corpus-backed engine served on the port given as argv[1]."""

import json
import sys

import uvicorn

from hyperscope.config import EngineConfig
from hyperscope.engine import bundle_from_corpus_text
from hyperscope.predictor import FineTuneConfig, TrainConfig
from hyperscope.service import ServiceState, create_app

TOPICS = {
    "market": ["market", "price"],
    "shipping": ["shipment", "harbor"],
    "codes": ["cipher", "key"],
    "meetup": ["meeting", "venue"],
}

TOPIC_WORDS = list(TOPICS.values())


def build_corpus() -> str:
    lines = []
    doc = 0
    for year in (2015, 2016, 2017, 2018):
        for author in range(12):
            for t, words in enumerate(TOPIC_WORDS):
                # author a talks about topic t iff they share a residue class,
                # drifting one topic every two years
                if (author + year // 2) % 4 != t:
                    continue
                doc += 1
                lines.append(json.dumps({
                    "id": f"d{doc}",
                    "author": f"user-{author:02d}",
                    "timestamp": f"{year}-0{1 + doc % 9}-10T12:00:00Z",
                    "text": f"note {doc}: the {words[0]} and the {words[1]} again",
                    "category": f"forum-{author % 3}",
                }))
    return "\n".join(lines)


def main() -> None:
    port = int(sys.argv[1])
    config = EngineConfig(
        train=TrainConfig(epochs=120, seed=0, supervision_fraction=0.1),
        fine_tune=FineTuneConfig(steps=25),
        roll_steps=10,
    )
    bundle = bundle_from_corpus_text(build_corpus(), json.dumps(TOPICS), config.binning)
    state = ServiceState(bundle, config, seed=7)
    uvicorn.run(create_app(state), host="127.0.0.1", port=port, log_level="error")


if __name__ == "__main__":
    main()
