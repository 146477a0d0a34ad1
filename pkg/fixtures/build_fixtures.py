"""Regenerate the offline fixture corpora used by tests, demos and the README.

    python3 fixtures/build_fixtures.py

Every model answer is a substring rule (see ``FixtureBackend``); every
retrieval answer is a substring rule on the query. Markers such as
``britannica.com/place/Paris`` only occur in fixture inputs, never in the
prompt templates, so each rule fires for exactly one stage input.
"""

import json
from pathlib import Path

HERE = Path(__file__).resolve().parent


def dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", "utf-8")


def j(obj) -> str:
    return json.dumps(obj, ensure_ascii=False)


# -- single-claim corpus ------------------------------------------------------

PARIS = "Paris is the capital of Germany and it has the Eiffel Tower."
PARIS_NARRATIVE = (
    "As of 2024-05-01, Paris is the capital of France, not Germany; the capital of Germany is Berlin. "
    "SOURCE: https://www.britannica.com/place/Paris\n"
    "The Eiffel Tower, completed in 1889, stands on the Champ de Mars in Paris. "
    "SOURCE: https://www.toureiffel.paris/en"
)
TOWER = "The Eiffel Tower is located in Paris."
TOWER_NARRATIVE = (
    "The Eiffel Tower is located in Paris, on the Champ de Mars (checked 2024-05-02). "
    "SOURCE: https://www.toureiffel.paris/en/the-monument"
)
MEXICO = 'Mexico is on a "red alert" with children being targeted for kidnapping so their organs can be harvested.'
MEXICO_NARRATIVE = (
    "Former President Donald Trump announced via Twitter on October 2, 2020, that he and then-First Lady "
    "Melania Trump had tested positive for Covid-19. The announcement, made just over a month before the "
    "presidential election, followed reports that his close aide Hope Hicks had also contracted the virus. "
    "SOURCE: https://www.bbc.com/news/world-us-canada-54390312"
)
DIALOGUE = (
    "[A1]: Do you like Michael Jackson?\n"
    "[B1]: I do. He wrote Dancing on the Dream which is one of my favorite songs.\n"
    "[A2]: Yes, he was very talented."
)
DIALOGUE_EVIDENCE = (
    "Michael Jackson wrote a book of poetry titled Dancing the Dream, published in 1992. It is not a song."
)

PARIS_VERDICTS = {
    "subclaims": [
        {"text": "Paris is the capital of Germany.", "label": "false",
         "justification": "The evidence states Paris is the capital of France, not Germany."},
        {"text": "Paris has the Eiffel Tower.", "label": "true",
         "justification": "The evidence confirms the Eiffel Tower is located in Paris."},
    ]
}
PARIS_JUSTIFICATION = (
    "The claim has a factual error in the part where it says that Paris is the capital of Germany, as Paris is "
    "the capital of France (https://www.britannica.com/place/Paris). The subclaim that Paris has the Eiffel Tower "
    "is supported (https://www.toureiffel.paris/en). The corrected version of this claim is "
    "'Paris is the capital of France and it has the Eiffel Tower.'"
)

llm_rules = [
    # segmentation
    {"template": "segment", "contains": f"Text: {PARIS}",
     "response": j({"subclaims": ["Paris is the capital of Germany.", "Paris has the Eiffel Tower."]})},
    {"template": "segment", "contains": f"Text: {TOWER}", "response": j([TOWER])},
    {"template": "segment", "contains": "Text: Mexico is on a",
     "response": "Sub_Claims:\n" + j(["Mexico is on a \"red alert\".",
                                      "Children in Mexico are being targeted for kidnapping.",
                                      "Kidnapped children in Mexico have their organs harvested."])},
    {"template": "segment", "contains": "Text: [A1]: Do you like Michael Jackson?",
     "response": j(["Michael Jackson wrote Dancing on the Dream.", "Dancing on the Dream is a song."])},
    # primary sources
    {"template": "primary_sources", "contains": "Paris is the capital of Germany and it has",
     "response": j({"sources": [{"source": "Official portal of the French government", "justification": "states the capital"},
                                {"source": "Official Eiffel Tower operator website", "justification": "operates the monument"}]})},
    {"template": "primary_sources", "contains": TOWER,
     "response": j(["Official Eiffel Tower operator website"])},
    {"template": "primary_sources", "contains": "Mexico is on a",
     "response": j(["Mexican Attorney General's Office", "U.S. State Department travel advisories"])},
    # fact checking (keyed on evidence markers)
    {"template": "fact_check", "contains": "britannica.com/place/Paris", "response": j(PARIS_VERDICTS)},
    {"template": "fact_check", "contains": "toureiffel.paris/en/the-monument",
     "response": j({"subclaims": [{"text": TOWER, "label": "true",
                                   "justification": "The evidence states the tower is in Paris."}]})},
    {"template": "fact_check", "contains": "Hope Hicks",
     "response": j({"subclaims": [
         {"text": t, "label": "unverifiable", "justification": "The evidence is about Donald Trump's Covid-19 diagnosis and is unrelated."}
         for t in ["Mexico is on a \"red alert\".", "Children in Mexico are being targeted for kidnapping.",
                   "Kidnapped children in Mexico have their organs harvested."]]})},
    {"template": "fact_check", "contains": "book of poetry titled Dancing the Dream",
     "response": j({"subclaims": [
         {"text": "Michael Jackson wrote Dancing on the Dream.", "label": "true",
          "justification": "The evidence says he wrote Dancing the Dream."},
         {"text": "Dancing on the Dream is a song.", "label": "false",
          "justification": "The evidence says Dancing the Dream is a book of poetry, not a song."}]})},
    # justification
    {"template": "justify", "contains": "britannica.com/place/Paris", "response": j({"justification": PARIS_JUSTIFICATION})},
    {"template": "justify", "contains": "toureiffel.paris/en/the-monument",
     "response": j({"justification": "Every subclaim is supported: the Eiffel Tower is located in Paris."})},
    {"template": "justify", "contains": "Hope Hicks",
     "response": j({"justification": "The claim is entirely unsupported by the provided evidence. All subclaims are labeled "
                                     "'unverifiable' because the evidence focuses solely on Donald Trump's Covid-19 diagnosis "
                                     "(https://www.bbc.com/news/world-us-canada-54390312)."})},
    {"template": "justify", "contains": "book of poetry titled Dancing the Dream",
     "response": j({"justification": "The dialogue calls Dancing on the Dream a song, but the evidence describes "
                                     "Dancing the Dream as a book of poetry published in 1992. The corrected version is "
                                     "'Michael Jackson wrote Dancing the Dream, a book of poetry.'"})},
    # revision (only the unverifiable claim ever falls below the threshold)
    {"template": "revise", "contains": "Donald Trump's Covid-19",
     "response": "The available evidence concerns Donald Trump's Covid-19 diagnosis and says nothing about Mexico, "
                 "so no subclaim can be confirmed or refuted (https://www.bbc.com/news/world-us-canada-54390312)."},
    # judging
    {"template": "judge", "contains": "britannica.com/place/Paris",
     "response": j({"error_detection": 2, "error_detection_rationale": "The Germany error is pointed out.",
                    "error_correction": 2, "error_correction_rationale": "France is given as the correction.",
                    "links_relevant": True, "links_supportive": True, "links_rationale": "Both links back the text."})},
    {"template": "judge", "contains": "the Eiffel Tower is located in Paris.",
     "response": j({"error_detection": 0, "error_detection_rationale": "The claim is true.",
                    "error_correction": 0, "error_correction_rationale": "Nothing to correct.",
                    "links_relevant": False, "links_supportive": False, "links_rationale": "No links cited."})},
    {"template": "judge", "contains": "a book of poetry published in 1992",
     "response": j({"error_detection": 2, "error_detection_rationale": "The song error is pointed out.",
                    "error_correction": 2, "error_correction_rationale": "It is corrected to a book of poetry.",
                    "links_relevant": False, "links_supportive": False, "links_rationale": "No links cited."})},
    {"template": "judge", "contains": "Covid-19",
     "response": j({"error_detection": 0, "error_detection_rationale": "No error in the claim is identified; the evidence is unrelated.",
                    "error_correction": 0, "error_correction_rationale": "No correction is offered.",
                    "links_relevant": False, "links_supportive": False,
                    "links_rationale": "The working link is about an unrelated event."})},
]

retrieval_rules = [
    {"contains": "capital of Germany", "narrative": PARIS_NARRATIVE},
    {"contains": TOWER, "narrative": TOWER_NARRATIVE},
    {"contains": "Mexico", "narrative": MEXICO_NARRATIVE},
]

dump(HERE / "claims" / "llm" / "rules.json", llm_rules)
dump(HERE / "claims" / "retrieval" / "rules.json", retrieval_rules)
dump(HERE / "claims" / "config.json", {
    "models": {"default": "gemma-fixture"},
    "backends": {"gemma-fixture": {"type": "fixture", "directory": "llm"}},
    "retrieval": {"default": {"type": "fixture", "directory": "retrieval"}},
    "prober": {"type": "static", "statuses": {
        "https://www.britannica.com/place/Paris": 200,
        "https://www.toureiffel.paris/en": 200,
        "https://www.toureiffel.paris/en/the-monument": 200,
        "https://www.bbc.com/news/world-us-canada-54390312": 200,
    }},
})
(HERE / "claims" / "paris.txt").write_text(PARIS + "\n", "utf-8")
(HERE / "claims" / "tower.txt").write_text(TOWER + "\n", "utf-8")
(HERE / "claims" / "mexico.txt").write_text(MEXICO + "\n", "utf-8")
dump(HERE / "claims" / "dialogue.json", {"id": "diahalu-mj", "text": DIALOGUE, "evidence": DIALOGUE_EVIDENCE})
dump(HERE / "claims" / "paris_verdicts.json", PARIS_VERDICTS)
dump(HERE / "claims" / "paris_justification.json",
     {"text": PARIS_JUSTIFICATION, "cited_urls": ["https://www.britannica.com/place/Paris", "https://www.toureiffel.paris/en"]})


# -- benchmark corpus: six claims judged on their own evidence ---------------------

BENCH = [
    # (id, claim, gold, model verdict)
    ("b1", "The Danube flows through Vienna.", "true", "true"),
    ("b2", "The Danube flows through Rome.", "false", "false"),
    ("b3", "Mount Fuji is in Chile.", "false", "false"),
    ("b4", "Lake Baikal is in Russia.", "true", "true"),
    ("b5", "Oslo is the capital of Denmark.", "false", "true"),
    ("b6", "The Nile flows into the Mediterranean.", "true", "unverifiable"),
]
bench_rules = []
(HERE / "bench").mkdir(exist_ok=True)
with open(HERE / "bench" / "dataset.jsonl", "w", encoding="utf-8") as fh:
    for rid, claim, gold, verdict in BENCH:
        marker = f"[evidence {rid}]"
        fh.write(j({"id": rid, "claim": claim, "label": gold, "evidence": f"{marker} Reference notes about: {claim}"}) + "\n")
        bench_rules.append({"template": "segment", "contains": f"Text: {claim}", "response": j([claim])})
        bench_rules.append({"template": "fact_check", "contains": marker,
                            "response": j({"subclaims": [{"text": claim, "label": verdict, "justification": f"Per {marker}."}]})})
dump(HERE / "bench" / "llm" / "rules.json", bench_rules)
dump(HERE / "bench" / "config.json", {
    "models": {"default": "gemma-fixture"},
    "backends": {"gemma-fixture": {"type": "fixture", "directory": "llm"}},
})


# -- cleaning corpus: ten records, three models ----------------------------------------

# per record: gold label and the three model verdicts
CLEAN = [
    ("c01", "true", ("true", "true", "true")),
    ("c02", "true", ("false", "false", "false")),       # unanimous disagreement -> removed
    ("c03", "false", ("false", "false", "false")),
    ("c04", "false", ("false", "true", "false")),
    ("c05", "true", ("false", "false", "unverifiable")),
    ("c06", "unverifiable", ("unverifiable", "unverifiable", "unverifiable")),
    ("c07", "false", ("true", "true", "true")),          # unanimous disagreement -> removed
    ("c08", "true", ("true", "unverifiable", "true")),
    ("c09", "false", ("unverifiable", "false", "false")),
    ("c10", "true", ("true", "true", "true")),
]
MODELS = ("gemma-fixture", "llama-fixture", "qwen-fixture")
clean_rules = []
(HERE / "clean").mkdir(exist_ok=True)
with open(HERE / "clean" / "dataset.jsonl", "w", encoding="utf-8") as fh:
    for rid, gold, verdicts in CLEAN:
        claim = f"Record {rid} states a checkable fact."
        marker = f"[evidence {rid}]"
        fh.write(j({"id": rid, "claim": claim, "label": gold, "evidence": f"{marker} Dataset evidence for {rid}.",
                    "updated_evidence": f"Updated reporting for {rid}."}) + "\n")
        clean_rules.append({"template": "segment", "contains": f"Text: {claim}", "response": j([claim])})
        for model, verdict in zip(MODELS, verdicts):
            clean_rules.append({"template": "fact_check", "model": model, "contains": marker,
                                "response": j({"subclaims": [{"text": claim, "label": verdict, "justification": "Scripted."}]})})
for model, choice in zip(MODELS, ("evidence_2", "evidence_2", "evidence_1")):
    clean_rules.append({"template": "compare", "model": model,
                        "response": j({"better_evidence": choice, "reason_category": "more_updated_information",
                                       "reason": "Scripted preference."})})
dump(HERE / "clean" / "llm" / "rules.json", clean_rules)
dump(HERE / "clean" / "config.json", {
    "models": {"default": "gemma-fixture"},
    "backends": {m: {"type": "fixture", "directory": "llm"} for m in MODELS},
})
print("fixtures written under", HERE)
