"""Seeded synthetic benchmark generators.

The canonical small link-prediction benchmarks are not redistributable here,
so the repo bundles two structurally similar stand-ins generated by this
module (see data/README.md):

  * a kinship-style KG: a simulated multi-family genealogy with 26 kin
    relations over 104 people, subsampled to 4006/200/155 train/valid/test;
  * a nations-style KG: 14 countries in three geopolitical blocs with 56
    dyadic relations whose densities depend on bloc structure, subsampled to
    1592/199/200.

Both are rule-governed (kin algebra / bloc alignment), so embedding models
fit them the way they fit the real benchmarks. Generation is deterministic
for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kg import KnowledgeGraph, Triple

# -- kinship-style genealogy ---------------------------------------------------

KIN_RELATIONS = (
    "father", "mother", "son", "daughter", "husband", "wife",
    "brother", "sister", "grandfather", "grandmother", "grandson",
    "granddaughter", "uncle", "aunt", "nephew", "niece",
    "cousin_m", "cousin_f",
    "father_in_law", "mother_in_law", "son_in_law", "daughter_in_law",
    "brother_in_law", "sister_in_law",
    "great_grandfather", "great_grandmother",
)

_MALE_NAMES = (
    "aldric", "berin", "cormac", "dagan", "edric", "faelan", "garvin", "hollis",
    "ivor", "jarek", "kelvan", "lorcan", "marek", "nolan", "osric", "petran",
    "quill", "rordan", "severn", "tomas", "ulric", "varek", "wystan", "yorath",
)
_FEMALE_NAMES = (
    "adela", "brynn", "ceridwen", "delia", "elswyth", "fiona", "gwenna", "haldis",
    "isolde", "jesra", "katrin", "liesel", "maren", "nerys", "odile", "petra",
    "quenna", "rosalind", "sabine", "tamsin", "una", "verena", "wilda", "ysmay",
)
_SURNAMES = ("varen", "okoro", "lindqvist", "abreu", "castellan", "mbeki", "horvat", "senna")


@dataclass
class _Person:
    idx: int
    name: str
    male: bool
    mother: int | None = None
    father: int | None = None
    spouse: int | None = None
    children: list[int] = field(default_factory=list)


class _Genealogy:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.people: list[_Person] = []
        self._name_counter: dict[str, int] = {}

    def _fresh_name(self, male: bool, surname: str) -> str:
        pool = _MALE_NAMES if male else _FEMALE_NAMES
        base = f"{pool[self.rng.integers(len(pool))]}_{surname}"
        n = self._name_counter.get(base, 0)
        self._name_counter[base] = n + 1
        return base if n == 0 else f"{base}{n + 1}"

    def add(self, male: bool, surname: str, mother=None, father=None) -> int:
        idx = len(self.people)
        self.people.append(_Person(idx, self._fresh_name(male, surname), male, mother, father))
        if mother is not None:
            self.people[mother].children.append(idx)
        if father is not None:
            self.people[father].children.append(idx)
        return idx

    def marry(self, a: int, b: int):
        self.people[a].spouse = b
        self.people[b].spouse = a

    # relation helpers ------------------------------------------------------

    def parents(self, i) -> list[int]:
        p = self.people[i]
        return [x for x in (p.father, p.mother) if x is not None]

    def siblings(self, i) -> list[int]:
        out = set()
        for par in self.parents(i):
            out.update(self.people[par].children)
        out.discard(i)
        return sorted(out)


def _grow_population(rng: np.random.Generator, n_founding: int, generations: int) -> _Genealogy:
    gen = _Genealogy(rng)
    current: list[int] = []
    for f in range(n_founding):
        surname = _SURNAMES[f % len(_SURNAMES)]
        h = gen.add(True, surname)
        w = gen.add(False, surname)
        gen.marry(h, w)
        current.append(h)
    for _ in range(generations - 1):
        # children of every married couple in the current generation
        next_gen: list[int] = []
        for h in current:
            w = gen.people[h].spouse
            if w is None:
                continue
            surname = gen.people[h].name.split("_")[1]
            father = h if gen.people[h].male else w
            mother = w if gen.people[h].male else h
            for _k in range(int(rng.integers(4, 7))):
                male = bool(rng.integers(2))
                kid = gen.add(male, surname, mother=mother, father=father)
                next_gen.append(kid)
        # cross-family marriages within the new generation (greedy, no siblings)
        males = [i for i in next_gen if gen.people[i].male]
        females = [i for i in next_gen if not gen.people[i].male]
        rng.shuffle(males)
        rng.shuffle(females)
        free = list(females)
        for m in males:
            match = next((f for f in free if not set(gen.parents(m)) & set(gen.parents(f))), None)
            if match is not None:
                gen.marry(m, match)
                free.remove(match)
        current = [i for i in next_gen if gen.people[i].spouse is not None and gen.people[i].male]
    return gen


def _kin_facts(gen: _Genealogy) -> set[tuple[int, str, int]]:
    """All true kin triples ⟨s, rel, o⟩ read as 's is the rel of o'."""
    facts: set[tuple[int, str, int]] = set()
    ppl = gen.people

    def grandparents(i):
        return [g for p in gen.parents(i) for g in gen.parents(p)]

    def great_grandparents(i):
        return [g for p in gen.parents(i) for g in grandparents(p)]

    for o in range(len(ppl)):
        for p in gen.parents(o):
            facts.add((p, "father" if ppl[p].male else "mother", o))
            facts.add((o, "son" if ppl[o].male else "daughter", p))
        sp = ppl[o].spouse
        if sp is not None:
            facts.add((sp, "husband" if ppl[sp].male else "wife", o))
        for s in gen.siblings(o):
            facts.add((s, "brother" if ppl[s].male else "sister", o))
        for g in grandparents(o):
            facts.add((g, "grandfather" if ppl[g].male else "grandmother", o))
            facts.add((o, "grandson" if ppl[o].male else "granddaughter", g))
        for g in great_grandparents(o):
            facts.add((g, "great_grandfather" if ppl[g].male else "great_grandmother", o))
        for p in gen.parents(o):
            for u in gen.siblings(p):
                facts.add((u, "uncle" if ppl[u].male else "aunt", o))
                facts.add((o, "nephew" if ppl[o].male else "niece", u))
        # first cousins: children of a parent's sibling
        for p in gen.parents(o):
            for u in gen.siblings(p):
                for c in ppl[u].children:
                    if c != o:
                        facts.add((c, "cousin_m" if ppl[c].male else "cousin_f", o))
        # in-laws through the spouse
        if sp is not None:
            for p in gen.parents(sp):
                facts.add((p, "father_in_law" if ppl[p].male else "mother_in_law", o))
                facts.add((o, "son_in_law" if ppl[o].male else "daughter_in_law", p))
            for s in gen.siblings(sp):
                facts.add((s, "brother_in_law" if ppl[s].male else "sister_in_law", o))
        for s in gen.siblings(o):
            ssp = ppl[s].spouse
            if ssp is not None:
                facts.add((ssp, "brother_in_law" if ppl[ssp].male else "sister_in_law", o))
    return facts


def make_kinship_graph(
    seed: int = 20240,
    n_people: int = 104,
    split_sizes: tuple[int, int, int] = (4006, 200, 155),
) -> KnowledgeGraph:
    rng = np.random.default_rng(seed)
    gen = _grow_population(rng, n_founding=5, generations=4)
    # prune childless leaves (unmarried first) until the population target is met
    while len(gen.people) > n_people:
        leaves = [
            p.idx for p in gen.people
            if not p.children and (p.father is not None or p.mother is not None)
        ]
        if not leaves:
            raise RuntimeError("cannot prune population down to target size")
        unmarried = [i for i in leaves if gen.people[i].spouse is None]
        pool = unmarried or leaves
        drop = pool[rng.integers(len(pool))]
        sp = gen.people[drop].spouse
        if sp is not None:
            gen.people[sp].spouse = None
        gen.people[drop].spouse = None
        gen.people[drop].children = []
        for q in gen.people:
            if drop in q.children:
                q.children.remove(drop)
        # compact indices
        keep = [p for p in gen.people if p.idx != drop]
        remap = {p.idx: i for i, p in enumerate(keep)}
        for i, p in enumerate(keep):
            p.idx = i
            p.mother = remap.get(p.mother) if p.mother is not None else None
            p.father = remap.get(p.father) if p.father is not None else None
            p.spouse = remap.get(p.spouse) if p.spouse is not None else None
            p.children = [remap[c] for c in p.children]
        gen.people = keep
    if len(gen.people) < n_people:
        raise RuntimeError(f"population too small: {len(gen.people)} < {n_people}")

    facts = _kin_facts(gen)
    entity_names = tuple(p.name for p in gen.people)
    return _assemble_graph(
        "kinship-synth", entity_names, KIN_RELATIONS, facts, split_sizes, rng
    )


# -- nations-style bloc world ---------------------------------------------------

_COUNTRIES = (
    "avaria", "borland", "cestria", "doria", "elandia", "fenwick", "gortland",
    "helvia", "istran", "jorvia", "kestara", "lumen", "morvania", "norvik",
)

_NATION_RELATIONS: tuple[tuple[str, str], ...] = tuple(
    [(n, "conflict") for n in (
        "accuses", "embargoes", "expels_envoys", "border_incident", "threatens",
        "severs_ties", "raids", "protests_against", "seizes_assets",
        "jams_broadcasts", "denounces", "blockades")]
    + [(n, "alliance") for n in (
        "defense_pact", "joint_exercise", "arms_transfer", "intel_sharing",
        "treaty_partner", "alliance_member", "military_aid", "staff_exchange")]
    + [(n, "trade") for n in (
        "exports_goods", "imports_goods", "grants_loans", "economic_aid",
        "trade_pact", "invests_in", "sells_commodities", "buys_machinery",
        "development_fund", "customs_union")]
    + [(n, "diplomacy") for n in (
        "embassy_in", "consulate_in", "official_visits", "recognizes",
        "intergov_member", "un_covote", "cultural_pact", "sister_cities",
        "sends_envoys", "hosts_summit")]
    + [(n, "culture") for n in (
        "student_exchange", "tourism_to", "emigration_to", "book_translations",
        "press_agreement", "academic_links", "sports_matches", "airline_route")]
    + [(n, "infrastructure") for n in (
        "mail_volume", "telegraph_links", "broadcast_agreements", "shipping_lanes",
        "phone_circuits", "rail_links", "flight_agreements", "ferry_routes")]
)

# per category: weights over the planted feature dims
# (own-bloc affinities b0,b1,b2; union memberships b01,b02,b12)
_CATEGORY_PATTERNS = {
    "conflict": {"b01": 2.4, "b0": -2.2, "b1": -2.2, "b2": -0.6},
    "alliance": {"b0": 2.4, "b1": 2.4, "b2": 2.4, "b01": -1.2},
    "trade": {"b0": 1.6, "b1": 1.6, "b2": 1.6, "b02": 0.9, "b12": 0.9},
    "diplomacy": {"b01": 0.8, "b02": 0.8, "b12": 0.8},
    "culture": {"b0": 1.4, "b1": 1.4, "b2": 1.4, "b12": 0.8},
    "infrastructure": {"b02": 1.2, "b12": 1.2, "b0": 0.8, "b1": 0.8, "b2": 0.8},
}
_FEATURE_DIMS = ("b0", "b1", "b2", "b01", "b02", "b12")


def make_nations_graph(
    seed: int = 77,
    split_sizes: tuple[int, int, int] = (1592, 199, 200),
) -> KnowledgeGraph:
    """Bloc-structured dyadic world planted in a low-rank multiplicative
    model: countries carry bloc-membership features plus idiosyncratic
    coordinates, each relation is a weight pattern over those features, and
    facts are the top-scoring country pairs per relation (with mild sampling
    noise). Every relation receives a similar number of facts so all
    embeddings are comparably supported, and the planted rank keeps the data
    realizable by the models trained on it."""
    rng = np.random.default_rng(seed)
    n = len(_COUNTRIES)
    bloc = np.array([0] * 5 + [1] * 5 + [2] * 4)
    n_idio = 2
    d_star = len(_FEATURE_DIMS) + n_idio
    feat = {name: i for i, name in enumerate(_FEATURE_DIMS)}

    E = np.zeros((n, d_star))
    for i in range(n):
        b = bloc[i]
        E[i, feat[f"b{b}"]] = 1.0
        for union in ("b01", "b02", "b12"):
            if str(b) in union[1:]:
                E[i, feat[union]] = 1.0
    E[:, len(_FEATURE_DIMS):] = rng.normal(0.0, 0.7, size=(n, n_idio))

    pairs = [(s, o) for s in range(n) for o in range(n) if s != o]
    P = np.array([E[s] * E[o] for s, o in pairs])  # multiplicative pair features
    total_needed = sum(split_sizes)
    per_rel = int(np.ceil(total_needed / len(_NATION_RELATIONS)))

    facts: set[tuple[int, str, int]] = set()
    for rel, cat in _NATION_RELATIONS:
        r_vec = np.zeros(d_star)
        for name, w in _CATEGORY_PATTERNS[cat].items():
            r_vec[feat[name]] = w
        r_vec += rng.normal(0.0, 0.5, size=d_star)  # relation-specific flavor
        scores = P @ r_vec + rng.gumbel(0.0, 0.45, size=len(pairs))
        count = int(rng.integers(per_rel - 2, per_rel + 5))
        for k in np.argsort(-scores)[:count]:
            s, o = pairs[k]
            facts.add((s, rel, o))
    rel_names = tuple(r for r, _ in _NATION_RELATIONS)
    return _assemble_graph("nations-synth", _COUNTRIES, rel_names, facts, split_sizes, rng)


# -- split assembly -------------------------------------------------------------


def _assemble_graph(name, entity_names, relation_names, facts, split_sizes, rng) -> KnowledgeGraph:
    """Subsample facts to the target size, split, and fix train coverage so
    every entity and relation occurs in the train split."""
    rel_index = {r: i for i, r in enumerate(relation_names)}
    triples = sorted(Triple(s, rel_index[r], o) for s, r, o in facts)
    n_train, n_valid, n_test = split_sizes
    total = n_train + n_valid + n_test
    if len(triples) < total:
        raise RuntimeError(f"{name}: only {len(triples)} facts generated, need {total}")
    order = rng.permutation(len(triples))
    chosen = [triples[i] for i in order[:total]]
    train = chosen[:n_train]
    valid = chosen[n_train : n_train + n_valid]
    test = chosen[n_train + n_valid :]
    spare = [triples[i] for i in order[total:]]

    def coverage_gap(split):
        ents = {t.s for t in split} | {t.o for t in split}
        rels = {t.r for t in split}
        missing_e = set(range(len(entity_names))) - ents
        missing_r = set(range(len(relation_names))) - rels
        return missing_e, missing_r

    # swap facts from spare/valid/test into train until coverage holds
    for _ in range(200):
        missing_e, missing_r = coverage_gap(train)
        if not missing_e and not missing_r:
            break
        pools = [spare, valid, test]
        fixed = False
        for pool in pools:
            for j, t in enumerate(pool):
                if t.s in missing_e or t.o in missing_e or t.r in missing_r:
                    # move t into train, push a redundant train fact out
                    for k in range(len(train) - 1, -1, -1):
                        cand = train[k]
                        rest_e = {x.s for x in train if x != cand} | {x.o for x in train if x != cand}
                        rest_r = {x.r for x in train if x != cand}
                        if cand.s in rest_e and cand.o in rest_e and cand.r in rest_r:
                            train[k] = t
                            pool[j] = cand
                            fixed = True
                            break
                if fixed:
                    break
            if fixed:
                break
        if not fixed:
            raise RuntimeError(f"{name}: unable to repair train coverage")
    missing_e, missing_r = coverage_gap(train)
    if missing_e or missing_r:
        raise RuntimeError(f"{name}: train coverage incomplete after repair")

    return KnowledgeGraph(
        tuple(entity_names),
        tuple(relation_names),
        tuple(train),
        tuple(valid),
        tuple(test),
        name=name,
    )


# -- tiny graphs for oracle experiments -----------------------------------------


def make_toy_graph(
    seed: int = 5,
    n_entities: int = 5,
    n_relations: int = 3,
    density: float = 0.45,
) -> KnowledgeGraph:
    """Small dense random KG; every entity and relation appears in train."""
    rng = np.random.default_rng(seed)
    triples = [
        Triple(s, r, o)
        for s in range(n_entities)
        for r in range(n_relations)
        for o in range(n_entities)
        if s != o and rng.random() < density
    ]
    rng.shuffle(triples)
    ents = tuple(f"e{i}" for i in range(n_entities))
    rels = tuple(f"r{j}" for j in range(n_relations))
    ent_seen = {t.s for t in triples} | {t.o for t in triples}
    rel_seen = {t.r for t in triples}
    if len(ent_seen) < n_entities or len(rel_seen) < n_relations:
        return make_toy_graph(seed + 1, n_entities, n_relations, density)
    n_test = max(2, len(triples) // 10)
    return KnowledgeGraph(
        ents, rels,
        tuple(triples[: -2 * n_test]),
        tuple(triples[-2 * n_test : -n_test]),
        tuple(triples[-n_test:]),
        name=f"toy{n_entities}x{n_relations}",
    )


def make_chain_graph(n: int = 8) -> KnowledgeGraph:
    """Deterministic transitive chain: r(i, i+1) and r(i, i+2) facts."""
    rels = ("linked",)
    triples = [Triple(i, 0, i + 1) for i in range(n - 1)]
    triples += [Triple(i, 0, i + 2) for i in range(n - 2)]
    ents = tuple(f"n{i}" for i in range(n))
    return KnowledgeGraph(ents, rels, tuple(triples), (triples[0],), (triples[1],), name="chain")
