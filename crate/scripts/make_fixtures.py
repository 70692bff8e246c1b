#!/usr/bin/env python3
"""Builds the Project 1 replay recordings in fixtures/recordings/p1/.

Each recording scripts one model: the generation reply with its measured
latency, the three agents' score sheets for every technique, and embeddings
for the project text and each story description. Story vectors are placed at
a chosen angle to the project vector so the mean cosine is known exactly.

The script checks its own output with an independent implementation of the
scoring rules before writing anything.

    python3 scripts/make_fixtures.py
"""

import json
import math
import random
from fractions import Fraction
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DIM = 32
AGENTS = ["product_owner", "senior_developer", "quality_assurance"]


def story(title, role, activity, goal, *criteria):
    return {"title": title, "role": role, "activity": activity, "goal": goal,
            "acceptance_criteria": list(criteria)}


R = "researcher"
E = "engineer on the programme"
V = "visitor to the site"

# (epic, stories) per model. Titles the ranking checks refer to are listed in PINS.
BACKLOGS = {
    "gpt-3.5-turbo": [
        ("Analysis", [story("Data Analysis", R, "to ask how the programme data was analysed", "I can judge the methods", "The answer names the analysis method and its source page")]),
        ("Findings", [story("Research Findings", R, "to list the main research findings", "I can reuse them in my own work", "Each finding links to the wiki page it came from")]),
        ("Funding", [story("Funding", "programme manager", "to see who funds each work package", "I can report to sponsors", "The assistant lists funders with their work packages")]),
        ("Industry Impact", [story("Industry Impact", "industry partner", "to ask how results apply to my machines", "I can plan pilots", "Answers mention at least one practical application")]),
        ("Objectives", [story("Project Objectives", V, "to read the programme objectives", "I understand its scope", "The objectives answer matches the wiki overview page")]),
        ("Data Collection", [story("Data Collection", R, "to know how measurement data was collected", "I can trust the results", "The answer describes the collection setup")]),
        ("Knowledge Base", [story("Wiki Ingestion", E, "to import all wiki pages into the vector database", "the assistant can search them", "Every public wiki page is stored with its URL")]),
        ("User Interface", [story("Chat Interface", V, "to type questions in a chat window", "using the assistant feels familiar", "A reply appears below the question within ten seconds")]),
        ("History", [story("Conversation Log", R, "to reopen earlier conversations", "I can continue where I stopped", "Past conversations are listed by date")]),
        ("Trust", [story("Source References", R, "to see the sources behind each answer", "I can verify it", "Each answer shows at least one source link")]),
        ("Delivery", [story("Prototype Release", "programme manager", "to have a working prototype by early August 2024", "we can demo it to partners", "The prototype is reachable on the internal network")]),
    ],
    "gpt-4o": [
        ("Project Knowledge", [
            story("Main Objectives", V, "to ask what the programme aims to achieve", "I understand its purpose", "The answer summarises the objectives from the wiki"),
            story("Key Findings", R, "to get the key findings of the programme", "I can cite them", "Findings are listed with their source pages"),
            story("Practical Applications", "industry partner", "to learn where the results apply in practice", "I can evaluate adoption", "The answer gives at least two application areas"),
        ]),
        ("Data Pipeline", [
            story("Wiki Scraping", E, "to scrape the programme wiki on a schedule", "the content stays current", "New wiki pages appear in the index within a day"),
            story("Data Integration", E, "to merge wiki text and attachments into one corpus", "answers draw on all material", "Attachments are indexed together with their parent page"),
            story("Vector Database", E, "to store text chunks as vectors", "the assistant can retrieve relevant passages", "A query returns the five closest chunks"),
        ]),
        ("Backend", [
            story("Backend Development", E, "to build the answering service", "the frontend has an API to call", "The service answers a question over HTTP"),
            story("Retrieval API", E, "to expose a search endpoint", "other tools can reuse the index", "The endpoint returns ranked passages as JSON"),
            story("Answer Generation", R, "to receive answers grounded in retrieved passages", "the answers are accurate", "Every answer cites the passages it used"),
        ]),
        ("Frontend", [
            story("UI/UX Design", V, "to use an interface that resembles popular chat tools", "I need no training", "The layout passes a review with three programme members"),
            story("Chat Window", V, "to send questions and read answers in one window", "the conversation is easy to follow", "Messages are shown in the order they were sent"),
            story("Conversation Log", R, "to browse my previous conversations", "I can find an earlier answer", "Conversations are searchable by keyword"),
        ]),
        ("Quality", [
            story("Source Citation", R, "to open the source of each statement", "I can check it", "Citations link to the exact wiki page"),
            story("Answer Accuracy", "programme manager", "to measure how often answers are correct", "we can improve the assistant", "A test set of questions is scored each release"),
            story("Feedback Collection", V, "to rate an answer", "the team learns what to fix", "Ratings are stored with the question and answer"),
        ]),
        ("Delivery", [
            story("Prototype Deployment", "programme manager", "to deploy the prototype by early August 2024", "partners can try it", "The prototype runs on the programme server"),
            story("Usage Monitoring", E, "to see usage statistics", "we can plan capacity", "A dashboard shows daily question counts"),
            story("Documentation", E, "to document setup and operation", "others can maintain the system", "The README covers installation and updates"),
        ]),
    ],
    "llama3-70b-8192": [
        ("Conversation", [
            story("Interact with AI", V, "to ask the assistant questions in plain language", "I get answers about the programme quickly", "An answer is returned within ten seconds"),
            story("Pre-select Prompts", V, "to pick from suggested starter questions", "I know what I can ask", "At least five suggested questions are shown"),
        ]),
        ("Data", [
            story("Scrape Wiki", E, "to collect every page of the programme wiki", "the assistant has complete content", "The scraper reports the number of pages collected"),
            story("Embed Data", E, "to convert wiki text into embeddings", "it can be searched by meaning", "Each stored chunk has an embedding vector"),
        ]),
        ("Deployment", [story("Deploy MVP", "programme manager", "to deploy a minimum viable product", "users can start testing", "The MVP is reachable from the programme network")]),
        ("History", [story("Chat History", R, "to keep a log of my conversations", "I can revisit answers", "The log lists conversations by date")]),
        ("Trust", [story("Cite Sources", R, "to see which pages an answer used", "I can verify it", "Each answer shows its source pages")]),
    ],
    "mixtral-8x7b-32768": [
        ("Overview", [story("Project Overview", V, "to read a short overview of the programme", "I understand it in a minute", "The overview is under two hundred words")]),
        ("Findings", [story("Key Findings", R, "to get the key findings", "I can use them in reports", "Each finding names its source")]),
        ("Funding", [story("Funding", "programme manager", "to see funding sources and amounts", "I can answer sponsor questions", "Funders are listed with amounts")]),
        ("Citations", [story("Source Citation", R, "to see the source of every answer", "I can check the facts", "Answers include links to wiki pages")]),
        ("Data Collection", [story("Data Collection", R, "to know how data was gathered", "I can assess its quality", "The answer describes instruments and sites")]),
        ("Applications", [story("Practical Applications", "industry partner", "to learn how results can be applied", "I can plan adoption", "The answer lists application areas")]),
        ("Interface", [story("Chat Interface", V, "to chat with the assistant in a browser", "no installation is needed", "The chat page loads in a current browser")]),
        ("Search", [story("Vector Search", E, "to search wiki content by meaning", "relevant passages are found", "A query returns ranked passages")]),
        ("Launch", [story("Prototype Launch", "programme manager", "to launch the prototype in August 2024", "partners can try it", "The prototype is available to partners")]),
    ],
}

LATENCY = {"gpt-3.5-turbo": 5.90, "gpt-4o": 16.00, "llama3-70b-8192": 3.23, "mixtral-8x7b-32768": 1.88}
SIMILARITY = {"gpt-3.5-turbo": 0.57, "gpt-4o": 0.44, "llama3-70b-8192": 0.38, "mixtral-8x7b-32768": 0.36}

# Base sheet values by story title. Pinned titles keep these values on every
# sheet; the others are shuffled per agent.
DOLLARS = {
    "gpt-3.5-turbo": {"Data Analysis": 20, "Research Findings": 20, "rest": [12, 10, 9, 8, 7, 6, 4, 3, 1]},
    "gpt-4o": {"Main Objectives": 12, "Key Findings": 12, "Practical Applications": 12,
               "rest": [10, 9, 8, 7, 6, 5, 4, 4, 3, 2, 2, 1, 1, 1, 1]},
    "llama3-70b-8192": {"Interact with AI": 30, "rest": [20, 15, 12, 10, 8, 5]},
    "mixtral-8x7b-32768": {"Project Overview": 20, "Key Findings": 20, "rest": [15, 12, 10, 9, 7, 4, 3]},
}
WSJF_REST = [(6, 5, 4, 3), (5, 5, 3, 4), (4, 4, 4, 3), (7, 3, 2, 5), (3, 4, 2, 3), (5, 2, 3, 4),
             (2, 3, 3, 3), (4, 3, 2, 6), (3, 2, 2, 4), (2, 2, 1, 3), (3, 3, 3, 5), (2, 1, 2, 4),
             (4, 2, 2, 5), (1, 2, 2, 3), (3, 1, 1, 4), (2, 2, 2, 6)]
WSJF = {
    "gpt-3.5-turbo": {"Funding": (9, 9, 8, 2)},
    "gpt-4o": {"Main Objectives": (8, 8, 8, 2), "UI/UX Design": (9, 8, 7, 2)},
    "llama3-70b-8192": {"Interact with AI": (9, 9, 9, 2)},
    "mixtral-8x7b-32768": {"Funding": (10, 9, 9, 2), "Project Overview": (9, 8, 7, 2)},
}
AHP = {
    "gpt-3.5-turbo": {"Industry Impact": 9, "Funding": 9},
    "gpt-4o": {"Data Integration": 9, "Backend Development": 8},
    "llama3-70b-8192": {"Deploy MVP": 9, "Embed Data": 8},
    "mixtral-8x7b-32768": {"Project Overview": 9, "Source Citation": 8},
}
AHP_REST = [7, 6, 6, 5, 4, 4, 3, 3, 2, 2, 1, 5, 3, 2, 1, 4]

# Expected average ranks of the pinned stories, best first.
EXPECTED = {
    "gpt-3.5-turbo": {"100dollar": {"Data Analysis": "1.5", "Research Findings": "1.5"},
                      "wsjf": {"Funding": "1"},
                      "ahp": {"Industry Impact": "1.5", "Funding": "1.5"}},
    "gpt-4o": {"100dollar": {"Main Objectives": "2", "Key Findings": "2", "Practical Applications": "2"},
               "wsjf": {"Main Objectives": "1.5", "UI/UX Design": "1.5"},
               "ahp": {"Data Integration": "1", "Backend Development": "2"}},
    "llama3-70b-8192": {"100dollar": {"Interact with AI": "1"},
                        "wsjf": {"Interact with AI": "1"},
                        "ahp": {"Deploy MVP": "1", "Embed Data": "2"}},
    "mixtral-8x7b-32768": {"100dollar": {"Project Overview": "1.5", "Key Findings": "1.5"},
                           "wsjf": {"Funding": "1", "Project Overview": "2"},
                           "ahp": {"Project Overview": "1", "Source Citation": "2"}},
}

LABEL = {"100dollar": "HundredDollar", "wsjf": "WSJF", "ahp": "AHP"}


def description(s):
    goal = s["goal"].strip().rstrip(".")
    return f"As a {s['role'].strip()}, I want {s['activity'].strip()}, so that {goal}."


def project_body(path):
    text = path.read_text(encoding="utf-8")
    first, _, rest = text.partition("\n")
    return rest.strip() if first.startswith("# ") else text.strip()


def sheet_values(model, technique, titles, rng):
    """Per-agent {title: value} maps."""
    if technique == "100dollar":
        pins = {k: v for k, v in DOLLARS[model].items() if k != "rest"}
        rest = DOLLARS[model]["rest"]
    elif technique == "wsjf":
        pins = WSJF[model]
        rest = WSJF_REST
    else:
        pins = AHP[model]
        rest = AHP_REST
    others = [t for t in titles if t not in pins]
    out = []
    for _ in AGENTS:
        values = list(rest[: len(others)])
        rng.shuffle(values)
        sheet = dict(pins)
        sheet.update(zip(others, values))
        out.append(sheet)
    return out


def average_ranks(keys):
    """Descending average ranks over exact keys."""
    order = sorted(keys, key=lambda t: -keys[t])
    ranks, i = {}, 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and keys[order[j + 1]] == keys[order[i]]:
            j += 1
        for t in order[i : j + 1]:
            ranks[t] = Fraction(i + 1 + j + 1, 2)
        i = j + 1
    return ranks


def aggregate(technique, sheets, titles):
    k = len(sheets)
    if technique == "wsjf":
        out = {}
        for t in titles:
            comps = [sum(Fraction(s[t][c]) for s in sheets) / k for c in range(4)]
            out[t] = (comps[0] + comps[1] + comps[2]) / comps[3]
        return out
    return {t: sum(Fraction(s[t]) for s in sheets) / k for t in titles}


def fmt(rank):
    return str(rank.numerator) if rank.denominator == 1 else f"{float(rank):g}"


def unit(v):
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def embeddings(body, stories, target, rng):
    e0 = [1.0] + [0.0] * (DIM - 1)
    n = len(stories)
    spread = min(0.2, 0.9 - target, target - 0.05)
    cosines = [target + spread * (2 * i / (n - 1) - 1) for i in range(n)] if n > 1 else [target]
    rng.shuffle(cosines)
    out = {body: e0}
    for s, c in zip(stories, cosines):
        u = unit([0.0] + [rng.gauss(0, 1) for _ in range(DIM - 1)])
        s_perp = math.sqrt(1 - c * c)
        out[description(s)] = [round(c * a + s_perp * b, 10) for a, b in zip(e0, u)]
    return out


def cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


def build(model, body, seed):
    rng = random.Random(seed)
    epics = BACKLOGS[model]
    stories = [s for _, group in epics for s in group]
    titles = [s["title"] for s in stories]
    ids = {t: f"US-{i + 1:03d}" for i, t in enumerate(titles)}
    payload = {"epics": [{"name": name, "stories": group} for name, group in epics]}
    reply = (
        "Here are the epics and user stories for the project.\n\n```json\n"
        + json.dumps(payload, indent=2, ensure_ascii=False)
        + "\n```"
    )
    rules = [{"task": "generation", "reply": reply, "latency_secs": LATENCY[model]}]
    for technique in ["100dollar", "wsjf", "ahp"]:
        sheets = sheet_values(model, technique, titles, rng)
        ranks = average_ranks(aggregate(technique, sheets, titles))
        for title, want in EXPECTED[model][technique].items():
            got = fmt(ranks[title])
            assert got == want, f"{model} {technique} {title}: rank {got}, expected {want}"
        pinned = set(EXPECTED[model][technique])
        best_other = min(r for t, r in ranks.items() if t not in pinned)
        assert best_other > max(ranks[t] for t in pinned), f"{model} {technique}: pinned stories not on top"
        for agent, sheet in zip(AGENTS, sheets):
            scores = []
            for t in titles:
                v = sheet[t]
                value = (
                    {"cod_value": v[0], "time_criticality": v[1], "risk_reduction": v[2], "job_size": v[3]}
                    if technique == "wsjf" else v
                )
                scores.append({"story_id": ids[t], "value": value, "justification": f"{t} scored from the {agent.replace('_', ' ')} view"})
            if technique == "100dollar":
                assert sum(sheet.values()) == 100
            rules.append({
                "agent": agent,
                "task": "prioritization",
                "technique": LABEL[technique],
                "reply": "```json\n" + json.dumps({"scores": scores}, indent=2) + "\n```",
            })
    vectors = embeddings(body, stories, SIMILARITY[model], rng)
    mean = sum(cosine(vectors[description(s)], vectors[body]) for s in stories) / len(stories)
    assert abs(mean - SIMILARITY[model]) < 1e-6, (model, mean)
    assert len({e for e, _ in epics}) == len(epics)
    return {"models": {model: {"rules": rules, "embeddings": vectors}}}


def main():
    body = project_body(ROOT / "fixtures" / "projects" / "p1.md")
    out_dir = ROOT / "fixtures" / "recordings" / "p1"
    out_dir.mkdir(parents=True, exist_ok=True)
    for seed, model in enumerate(BACKLOGS, start=1):
        recording = build(model, body, seed)
        path = out_dir / f"{model}.json"
        path.write_text(json.dumps(recording, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
        n = sum(len(g) for _, g in BACKLOGS[model])
        print(f"{path.relative_to(ROOT)}: {len(BACKLOGS[model])} epics, {n} stories")


if __name__ == "__main__":
    main()
