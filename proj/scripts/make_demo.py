#!/usr/bin/env python3
# Copyright 2026 The evalign Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the small demo corpus under data/demo/ (deterministic)."""

import json
import pathlib
import random

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "demo"

# (id, query, golds, relevant passages, distractors)
QUERIES = [
    ("q01", "Who designed the Eiffel Tower?", ["Gustave Eiffel"],
     ["The Eiffel Tower was designed by the engineering firm of Gustave Eiffel. "
      "It was built for the 1889 World's Fair in Paris.",
      "Construction of the tower took two years, two months and five days."],
     ["The Louvre is the world's most visited museum.",
      "Paris hosted the Summer Olympics in 1900 and 1924."]),
    ("q02", "What is the capital of Australia?", ["Canberra"],
     ["Canberra is the capital city of Australia. It was selected as a "
      "compromise between Sydney and Melbourne.",
      "The city was designed by Walter Burley Griffin and Marion Mahony Griffin."],
     ["Sydney is the largest city in Australia.",
      "The Great Barrier Reef lies off the coast of Queensland."]),
    ("q03", "Which element has the chemical symbol Fe?", ["iron"],
     ["Iron is a chemical element with the symbol Fe and atomic number 26.",
      "It is the most common element on Earth by mass."],
     ["Gold has the symbol Au.", "Copper is an excellent conductor of heat."]),
    ("q04", "Who wrote the novel Pride and Prejudice?", ["Jane Austen", "Austen"],
     ["Pride and Prejudice is an 1813 novel of manners written by Jane Austen.",
      "The novel follows the character development of Elizabeth Bennet."],
     ["Charlotte Bronte wrote Jane Eyre.",
      "Charles Dickens published Great Expectations in 1861."]),
    ("q05", "In what year did the Apollo 11 mission land on the Moon?", ["1969"],
     ["Apollo 11 was the American spaceflight that first landed humans on the "
      "Moon, on July 20, 1969.",
      "Commander Neil Armstrong and pilot Buzz Aldrin landed the lunar module Eagle."],
     ["The Space Shuttle first flew in 1981.",
      "Sputnik 1 was launched by the Soviet Union in 1957."]),
    ("q06", "What is the largest planet in the Solar System?", ["Jupiter"],
     ["Jupiter is the fifth planet from the Sun and the largest in the Solar System.",
      "It is a gas giant with a mass more than two and a half times that of all "
      "the other planets combined."],
     ["Saturn is known for its prominent ring system.",
      "Mars is often called the Red Planet."]),
    ("q07", "Who painted the Mona Lisa?", ["Leonardo da Vinci", "Leonardo"],
     ["The Mona Lisa is a half-length portrait painting by the Italian artist "
      "Leonardo da Vinci.",
      "It has been described as the best known work of art in the world."],
     ["Michelangelo painted the ceiling of the Sistine Chapel.",
      "Raphael painted The School of Athens."]),
    ("q08", "What is the boiling point of water at sea level in Celsius?",
     ["100 degrees", "100"],
     ["At sea level, water boils at 100 degrees Celsius.",
      "The boiling point decreases as altitude increases because air pressure drops."],
     ["Water freezes at 0 degrees Celsius.",
      "The Kelvin scale starts at absolute zero."]),
    ("q09", "Which ocean is the largest?", ["Pacific Ocean", "Pacific"],
     ["The Pacific Ocean is the largest and deepest of Earth's five oceanic divisions.",
      "It extends from the Arctic Ocean in the north to the Southern Ocean in the south."],
     ["The Atlantic Ocean separates the Americas from Europe and Africa.",
      "The Indian Ocean is the third largest ocean."]),
    ("q10", "Who developed the theory of general relativity?", ["Albert Einstein", "Einstein"],
     ["General relativity is the geometric theory of gravitation published by "
      "Albert Einstein in 1915.",
      "It generalizes special relativity and refines Newton's law of universal gravitation."],
     ["Isaac Newton formulated the laws of motion.",
      "Niels Bohr developed a model of the atom."]),
    ("q11", "What is the longest river in South America?", ["Amazon River", "Amazon"],
     ["The Amazon River in South America is the largest river by discharge volume "
      "and the longest river on the continent.",
      "It flows through Peru, Colombia and Brazil before reaching the Atlantic."],
     ["The Nile flows through northeastern Africa.",
      "The Parana River is the second longest in South America."]),
    ("q12", "How many legs does a spider have?", ["eight", "8"],
     ["Spiders are arachnids with eight legs and two body segments.",
      "Unlike insects, spiders do not have antennae."],
     ["Insects have six legs.", "Crustaceans include crabs and lobsters."]),
]


def samples_for(query, golds, passages, distractors, rng):
    """Ten sampled evidence strings with deliberate near-duplicates."""
    first, second = passages
    sentences = [s.strip() for s in first.split(". ") if s.strip()]
    key = sentences[0].rstrip(".") + "."
    out = [
        key,                                    # faithful, concise
        key.upper().rstrip(".") + "!",          # duplicate up to case/punct
        first,                                  # full passage
        first + " " + second,                   # everything
        golds[0],                               # bare answer
        second,                                 # relevant but no answer
        distractors[0],                         # unsupported
        key,                                    # exact duplicate
        "I think " + golds[0] + " is the answer to: " + query,  # chatty
        key.replace(".", "") + " " + distractors[1],  # padded
    ]
    return out


def whitespace_count(text):
    return len(text.split())


def main():
    rng = random.Random(7)
    OUT.mkdir(parents=True, exist_ok=True)
    records, sample_sets, responses = [], [], []
    for qid, query, golds, passages, distractors in QUERIES:
        records.append({
            "id": qid,
            "query": query,
            "gold_answers": golds,
            "relevant_passages": passages,
            "distractor_passages": distractors,
        })
        sample_sets.append({
            "query_id": qid,
            "candidates": samples_for(query, golds, passages, distractors, rng),
        })
        # A fixed generator output per query; every fourth one misses.
        if int(qid[1:]) % 4 == 0:
            output = "I am not sure about that."
        else:
            output = "The answer is " + golds[0] + "."
        responses.append({
            "query_id": qid,
            "output": output,
            "token_count": whitespace_count(output),
            "counter_name": "whitespace",
        })

    def dump(name, rows):
        with open(OUT / name, "w", encoding="utf-8") as f:
            for r in rows:
                f.write(json.dumps(r, ensure_ascii=False) + "\n")

    dump("records.jsonl", records)
    dump("samples.jsonl", sample_sets)
    dump("responses.jsonl", responses)
    pool = sorted({d for r in records for d in r["distractor_passages"]})
    dump("distractors.jsonl", [{"text": t} for t in pool])
    config = {
        "records": "records.jsonl",
        "samples": "samples.jsonl",
        "responses": "responses.jsonl",
        "work_dir": "run",
        "dedup": {"n": 2, "threshold": 0.8, "word_level": True},
        "experts": {"faithfulness": "proxy", "helpfulness": "proxy",
                    "conciseness": "proxy"},
        "tau": 1.0,
        "tau_grid": [0.2, 0.5, 1.0, 2.0, 5.0],
        "beta": 0.1,
        "loss_form": "log-ratio",
        "epochs": 200,
        "learning_rate": 0.5,
        "seed": 7,
        "ablations": {"no_dedup": False, "uniform_weights": False,
                      "no_lambda": False},
        "workers": 2,
        "counter": "whitespace",
    }
    with open(OUT / "config.json", "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
