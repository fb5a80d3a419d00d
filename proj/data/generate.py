#!/usr/bin/env python3
"""Regenerates the bundled sample data under data/.

Everything is deterministic; rerunning overwrites the committed files with
identical content.
"""

import itertools
import os
import random
from collections import defaultdict

HERE = os.path.dirname(os.path.abspath(__file__))
SEED = 20151

COUNTRIES = [
    "czech republic", "france", "germany", "spain", "italy", "japan", "china", "brazil",
    "mexico", "canada", "egypt", "india", "peru", "chile", "greece", "norway", "sweden",
    "poland", "turkey", "kenya", "portugal", "argentina", "south korea", "new zealand",
]
HOLIDAYS = ["nochebuena", "christmas", "halloween", "easter", "diwali", "hanukkah", "thanksgiving", "ramadan"]
PEOPLE = [
    "barack obama", "albert einstein", "marie curie", "pablo picasso", "frida kahlo", "nelson mandela",
    "isaac newton", "jane austen", "leo tolstoy", "ada lovelace", "bob marley", "charles darwin",
]


def write(rel, lines):
    path = os.path.join(HERE, rel)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")


def np_entity(name):
    words = name.split()
    if len(words) == 1:
        return "(NP (NNP %s))" % words[0]
    return "(NP %s)" % " ".join("(NNP %s)" % w for w in words)


def np_possessive(name):
    return "(NP %s (POS 's))" % " ".join("(NNP %s)" % w for w in name.split())


def leaves(tree):
    out = []
    toks = tree.replace("(", " ( ").replace(")", " ) ").split()
    for i, t in enumerate(toks):
        if t not in "()" and toks[i - 1] != "(":
            out.append(t)
    return out


# ---------------------------------------------------------------------------
# Treebank templates. Each family maps an entity to its question variants.

def lang_family(c):
    e = np_entity(c)
    return [
        "(SBARQ (WHNP (WDT what) (NN language)) (SQ (VBP do) (NP (NNS people) (PP (IN in) %s)) (VP (VB speak))))" % e,
        "(SBARQ (WHNP (WDT what) (NN language)) (SQ (VBP do) (NP (NNS citizens) (PP (IN in) %s)) (VP (VB speak))))" % e,
        "(SBARQ (WHNP (WDT what) (NN language)) (SQ (VBP do) (NP (NP (DT the) (NNS people)) (PP (IN of) %s)) (VP (VB speak))))" % e,
        "(SBARQ (WHNP (WP what)) (SQ (VBZ is) (NP (NP (DT the) (JJ official) (NN language)) (PP (IN of) %s))))" % e,
        "(SBARQ (WHNP (WDT which) (NN language)) (SQ (VBZ is) (VP (VBN spoken) (PP (IN in) %s))))" % e,
        "(SBARQ (WHNP (WDT what) (NN language)) (SQ (VBZ is) (VP (VBN spoken) (PP (IN in) %s))))" % e,
    ]


def capital_family(c):
    e = np_entity(c)
    return [
        "(SBARQ (WHNP (WP what)) (SQ (VBZ is) (NP (NP (DT the) (NN capital)) (PP (IN of) %s))))" % e,
        "(SBARQ (WHNP (WP what)) (SQ (VBZ is) (NP (NP (DT the) (NN capital) (NN city)) (PP (IN of) %s))))" % e,
        "(SBARQ (WHNP (WDT which) (NN city)) (SQ (VBZ is) (NP (NP (DT the) (NN capital)) (PP (IN of) %s))))" % e,
        "(SBARQ (WHNP (WDT what) (NN city)) (SQ (VBZ is) (NP (NP (DT the) (NN capital)) (PP (IN of) %s))))" % e,
    ]


def currency_family(c):
    e = np_entity(c)
    return [
        "(SBARQ (WHNP (WDT what) (NN currency)) (SQ (VBZ does) %s (VP (VB use))))" % e,
        "(SBARQ (WHNP (WP what)) (SQ (VBZ is) (NP (NP (DT the) (NN currency)) (PP (IN of) %s))))" % e,
        "(SBARQ (WHNP (WDT what) (NN money)) (SQ (VBZ is) (VP (VBN used) (PP (IN in) %s))))" % e,
        "(SBARQ (WHNP (WDT which) (NN currency)) (SQ (VBZ is) (VP (VBN used) (PP (IN in) %s))))" % e,
    ]


def leader_family(c):
    e = np_entity(c)
    return [
        "(SBARQ (WHNP (WP who)) (SQ (VBZ is) (NP (NP (DT the) (NN president)) (PP (IN of) %s))))" % e,
        "(SBARQ (WHNP (WP who)) (SQ (VBZ is) (NP (NP (DT the) (NN leader)) (PP (IN of) %s))))" % e,
        "(SBARQ (WHNP (WP who)) (SQ (VP (VBZ leads) %s)))" % e,
        "(SBARQ (WHNP (WP who)) (SQ (VP (VBZ runs) %s)))" % e,
    ]


def holiday_family(h):
    e = np_entity(h)
    return [
        "(SBARQ (WHNP (WP what) (NN day)) (SQ (AUX is) %s))" % e,
        "(SBARQ (WHADVP (WRB when)) (SQ (AUX is) %s))" % e,
        "(SBARQ (WHADVP (WRB when)) (SQ (SQ (AUX is) %s) (VP (VBN celebrated))))" % e,
        "(SBARQ (WHNP (WP what) (NN date)) (SQ (AUX is) %s))" % e,
    ]


def birth_family(p):
    e = np_entity(p)
    return [
        "(SBARQ (WHADVP (WRB where)) (SQ (VBD was) %s (VP (VBN born))))" % e,
        "(SBARQ (WHADVP (WRB where)) (SQ (VBZ is) %s (PP (IN from))))" % e,
        "(SBARQ (WHNP (WP what)) (SQ (VBZ is) (NP (NP (DT the) (NN birthplace)) (PP (IN of) %s))))" % e,
        "(SBARQ (WHNP (WDT what) (NN city)) (SQ (VBD was) %s (VP (VBN born) (PP (IN in)))))" % e,
    ]


def job_family(p):
    e = np_entity(p)
    return [
        "(SBARQ (WHNP (WP what)) (SQ (VBD did) %s (VP (VB do))))" % e,
        "(SBARQ (WHNP (WP what)) (SQ (VBD was) (NP (NP (DT the) (NN profession)) (PP (IN of) %s))))" % e,
        "(SBARQ (WHNP (WP what)) (SQ (VBD was) (NP %s (NN job))))" % np_possessive(p),
        "(SBARQ (WHNP (WP what)) (SQ (VBZ is) %s (VP (VBN known) (PP (IN for)))))" % e,
    ]


FAMILIES = [
    ("lang", COUNTRIES, lang_family),
    ("capital", COUNTRIES, capital_family),
    ("currency", COUNTRIES, currency_family),
    ("leader", COUNTRIES, leader_family),
    ("holiday", HOLIDAYS, holiday_family),
    ("birth", PEOPLE, birth_family),
    ("job", PEOPLE, job_family),
]

# Sentences that must land in the training split.
PINNED = {
    "what language do people in czech republic speak",
    "what day is nochebuena",
    "when is nochebuena",
    "when is nochebuena celebrated",
}

SYNONYMS = {
    ("people", "citizens"), ("what", "which"), ("day", "date"), ("city", "capital"),
    ("currency", "money"), ("president", "leader"), ("leads", "runs"), ("profession", "job"),
    ("spoken", "speak"), ("used", "use"), ("birthplace", "born"),
}


def align(a, b):
    """Greedy token alignment: identical words first, then known synonyms."""
    used = set()
    pairs = []
    for i, w in enumerate(a):
        for j, v in enumerate(b):
            if j not in used and v == w:
                pairs.append((i, j))
                used.add(j)
                break
    done = {i for i, _ in pairs}
    for i, w in enumerate(a):
        if i in done:
            continue
        for j, v in enumerate(b):
            if j not in used and ((w, v) in SYNONYMS or (v, w) in SYNONYMS):
                pairs.append((i, j))
                used.add(j)
                break
    return sorted(pairs)


def build_treebank(rng):
    items = []
    for fam, ents, fn in FAMILIES:
        for ent in ents:
            for vi, tree in enumerate(fn(ent)):
                items.append((fam, ent, vi, tree))
    rng.shuffle(items)
    pinned = [it for it in items if " ".join(leaves(it[3])) in PINNED]
    rest = [it for it in items if " ".join(leaves(it[3])) not in PINNED]
    train = pinned + rest[: 500 - len(pinned)]
    pool = rest[500 - len(pinned):]
    seen = {e for _, e, _, _ in train}
    heldout = [it for it in pool if it[1] in seen][:50]
    assert len(train) == 500 and len(heldout) == 50
    rng.shuffle(train)
    return train, heldout


def build_alignments(train):
    groups = defaultdict(list)
    for qid, (fam, ent, _, tree) in enumerate(train):
        groups[(fam, ent)].append((qid, leaves(tree)))
    lines = []
    for key in sorted(groups):
        for (qa, ta), (qb, tb) in itertools.combinations(groups[key], 2):
            pairs = align(ta, tb)
            lines.append("%d\t%d\t%s" % (qa, qb, ",".join("%d-%d" % p for p in pairs)))
    return lines


# ---------------------------------------------------------------------------
# Paraphrase rule database

RULE_PAIRS = [
    ("people", "citizens", 4.2), ("the people", "the citizens", 3.9), ("people", "the population", 2.7),
    ("what", "which", 3.1), ("what language", "which language", 3.5), ("language", "tongue", 1.4),
    ("speak", "use", 1.2), ("is spoken", "is used", 1.9), ("spoken", "used", 1.7),
    ("official language", "national language", 2.2), ("capital", "capital city", 3.3),
    ("which city", "what city", 3.4), ("city", "town", 2.0), ("president", "leader", 3.2),
    ("leads", "runs", 3.0), ("leads", "governs", 2.6), ("currency", "money", 3.6),
    ("what currency", "which currency", 3.5), ("what money", "what currency", 3.0),
    ("day", "date", 3.7), ("what day", "when", 3.4), ("what date", "when", 3.3),
    ("what day", "what date", 3.1), ("born", "raised", 1.3), ("birthplace", "hometown", 2.5),
    ("profession", "job", 3.8), ("known for", "famous for", 3.2), ("what did", "what was", 1.1),
    ("is", "was", 0.8), ("was", "is", 0.8), ("where", "what city", 1.6), ("from", "born in", 1.0),
    ("the leader", "the president", 3.2), ("who leads", "who runs", 3.1), ("celebrated", "observed", 2.4),
    ("in", "of", 0.9), ("of", "in", 0.9), ("do people", "do citizens", 3.6), ("the capital", "the capital city", 3.3),
    ("is used", "is spoken", 1.9),
]

NOISE_WORDS = ["folks", "nation", "dialect", "talk", "coin", "cash", "boss", "chief", "metropolis",
               "occupation", "career", "holiday", "festival", "origin", "homeland", "ruler", "head",
               "inhabitants", "residents", "populace", "vernacular", "idiom", "tender", "mayor", "township"]
NOISE_SOURCES = ["people", "language", "speak", "currency", "money", "leader", "city", "capital",
                 "profession", "job", "day", "born", "president", "celebrated", "known"]


def build_rule_db(rng):
    rules = {}
    for s, t, score in RULE_PAIRS:
        rules[(s, t)] = score
        rules.setdefault((t, s), round(score * 0.9, 2))
    combos = [(s, w) for s in NOISE_SOURCES for w in NOISE_WORDS]
    rng.shuffle(combos)
    for s, w in combos:
        if len(rules) >= 200:
            break
        rules.setdefault((s, w), round(rng.uniform(0.1, 1.0), 2))
    assert len(rules) == 200
    return ["%s\t%s\t%.2f" % (s, t, sc) for (s, t), sc in sorted(rules.items())]


# ---------------------------------------------------------------------------
# Classifier pairs

def rewrite_once(tokens, rng):
    """Applies one high-scoring rule rewrite; None when nothing matches."""
    text = " " + " ".join(tokens) + " "
    options = [(s, t) for s, t, sc in RULE_PAIRS if sc >= 2.0 and (" " + s + " ") in text]
    if not options:
        return None
    s, t = rng.choice(options)
    return text.replace(" " + s + " ", " " + t + " ", 1).split()


def build_pairs(rng, questions, n, n_pos):
    by_key = defaultdict(list)
    for fam, ent, toks in questions:
        by_key[(fam, ent)].append(toks)
    pos, neg = [], []
    while len(pos) < n_pos:
        fam, ent, toks = rng.choice(questions)
        if rng.random() < 0.6:
            cand = rewrite_once(toks, rng)
        else:
            sibs = [t for t in by_key[(fam, ent)] if t != toks]
            cand = rng.choice(sibs) if sibs else None
        if cand and cand != toks:
            pos.append((toks, cand, 1))
    all_ents = sorted({e for _, e, _ in questions})
    while len(neg) < n - n_pos:
        fam, ent, toks = rng.choice(questions)
        kind = rng.randrange(5)
        cand = None
        if kind == 0:  # entity swapped
            other = rng.choice([e for e in all_ents if e != ent])
            cand = " ".join(toks).replace(ent, other).split()
        elif kind == 1:  # different intent, same entity
            sibs = [t for (f, e), ts in by_key.items() if e == ent and f != fam for t in ts]
            cand = rng.choice(sibs) if sibs else None
        elif kind == 2:  # scrambled
            cand = toks[:]
            rng.shuffle(cand)
        elif kind == 3:  # truncated
            k = max(1, len(toks) // 2)
            cand = toks[:k]
        else:  # unrelated
            cand = rng.choice(questions)[2]
        if cand and cand != toks:
            neg.append((toks, cand, 0))
    pairs = pos + neg
    rng.shuffle(pairs)
    return ["%s\t%s\t%d" % (" ".join(a), " ".join(b), y) for a, b, y in pairs]


# ---------------------------------------------------------------------------
# Toy knowledge base and question/graph suite

KB_COUNTRIES = [
    # surface, id, language, capital, other city, currency
    ("czech republic", "CzechRepublic", "CzechLanguage", "Prague", "Brno", "CzechKoruna"),
    ("france", "France", "FrenchLanguage", "Paris", "Lyon", "Euro"),
    ("germany", "Germany", "GermanLanguage", "Berlin", "Munich", "Euro"),
    ("spain", "Spain", "SpanishLanguage", "Madrid", "Barcelona", "Euro"),
    ("italy", "Italy", "ItalianLanguage", "Rome", "Milan", "Euro"),
    ("japan", "Japan", "JapaneseLanguage", "Tokyo", "Osaka", "Yen"),
    ("poland", "Poland", "PolishLanguage", "Warsaw", "Krakow", "Zloty"),
    ("greece", "Greece", "GreekLanguage", "Athens", "Thessaloniki", "Euro"),
    ("sweden", "Sweden", "SwedishLanguage", "Stockholm", "Gothenburg", "SwedishKrona"),
    ("norway", "Norway", "NorwegianLanguage", "Oslo", "Bergen", "NorwegianKrone"),
    ("brazil", "Brazil", "PortugueseLanguage", "Brasilia", "SaoPaulo", "Real"),
    ("portugal", "Portugal", "PortugueseLanguage", "Lisbon", "Porto", "Euro"),
    ("egypt", "Egypt", "ArabicLanguage", "Cairo", "Alexandria", "EgyptianPound"),
    ("turkey", "Turkey", "TurkishLanguage", "Ankara", "Istanbul", "TurkishLira"),
]
KB_PEOPLE = [
    ("albert einstein", "AlbertEinstein", "Germany"),
    ("marie curie", "MarieCurie", "Poland"),
    ("pablo picasso", "PabloPicasso", "Spain"),
    ("leo tolstoy", "LeoTolstoy", "Russia"),
    ("frida kahlo", "FridaKahlo", "Mexico"),
    ("isaac newton", "IsaacNewton", "UnitedKingdom"),
    ("jane austen", "JaneAusten", "UnitedKingdom"),
    ("nelson mandela", "NelsonMandela", "SouthAfrica"),
]

R_LANG = "location.country.official_language"
R_CAP = "location.country.capital"
R_CUR = "location.country.currency_used"
R_CONTAINS = "location.location.contains"
R_NAT = "people.person.nationality"


def build_kb():
    triples, types = set(), set()
    for _, cid, lang, cap, other, cur in KB_COUNTRIES:
        triples |= {(cid, R_LANG, lang), (cid, R_CAP, cap), (cid, R_CUR, cur),
                    (cid, R_CONTAINS, cap), (cid, R_CONTAINS, other)}
        types |= {(cid, "location.country"), (lang, "language.human_language"),
                  (cap, "location.citytown"), (other, "location.citytown"), (cur, "finance.currency")}
    for _, pid, nat in KB_PEOPLE:
        triples.add((pid, R_NAT, nat))
        types |= {(pid, "people.person"), (nat, "location.country")}
    lines = ["\t".join(t) for t in sorted(triples)]
    lines += ["TYPE\t%s\t%s" % t for t in sorted(types)]
    return lines


def graph_lang_original(surface):
    return ["PARAPHRASE what language do people in %s speak" % surface, "SCORE 1",
            "ENTITY c %s" % surface, "TYPE p people", "TYPE x language target",
            "EVENT e1", "EDGE e1 p speak.arg1", "EDGE e1 x speak.arg2",
            "EVENT e2", "EDGE e2 p in.arg1", "EDGE e2 c in.arg2"]


def graph_lang_para(surface):
    return ["PARAPHRASE what is the official language of %s" % surface, "SCORE 0.82",
            "ENTITY c %s" % surface, "TYPE x language target",
            "EVENT e1", "EDGE e1 x official.language.arg1", "EDGE e1 c official.language.of.arg2"]


def graph_lang_para_noisy(surface):
    return ["PARAPHRASE what language do citizens in %s speak" % surface, "SCORE 0.64",
            "ENTITY c %s" % surface, "TYPE p citizens", "TYPE x language target",
            "EVENT e1", "EDGE e1 p speak.arg1", "EDGE e1 x speak.arg2",
            "EVENT e2", "EDGE e2 p in.arg1", "EDGE e2 c in.arg2"]


def graph_cap_original(surface):
    return ["PARAPHRASE what is the capital of %s" % surface, "SCORE 1",
            "ENTITY c %s" % surface, "TYPE x capital target",
            "EVENT e1", "EDGE e1 x capital.arg1", "EDGE e1 c capital.of.arg2"]


def graph_cap_para(surface):
    return ["PARAPHRASE which city is the capital of %s" % surface, "SCORE 0.77",
            "ENTITY c %s" % surface, "TYPE x city target",
            "EVENT e1", "EDGE e1 x capital.arg1", "EDGE e1 c capital.of.arg2"]


def graph_cur_original(surface):
    return ["PARAPHRASE what money do people in %s pay with" % surface, "SCORE 1",
            "ENTITY c %s" % surface, "TYPE p people", "TYPE x money target",
            "EVENT e1", "EDGE e1 p pay.with.arg1", "EDGE e1 x pay.with.arg2",
            "EVENT e2", "EDGE e2 p in.arg1", "EDGE e2 c in.arg2"]


def graph_cur_para(surface):
    return ["PARAPHRASE what currency is used in %s" % surface, "SCORE 0.71",
            "ENTITY c %s" % surface, "TYPE x currency target",
            "EVENT e1", "EDGE e1 x used.arg1", "EDGE e1 c used.in.arg2"]


def graph_nat_original(surface):
    return ["PARAPHRASE where is %s from" % surface, "SCORE 1",
            "ENTITY p %s" % surface, "TARGET x",
            "EVENT e1", "EDGE e1 p from.arg1", "EDGE e1 x from.arg2"]


def graph_nat_para(surface):
    return ["PARAPHRASE what is the nationality of %s" % surface, "SCORE 0.69",
            "ENTITY p %s" % surface, "TARGET x",
            "EVENT e1", "EDGE e1 x nationality.arg1", "EDGE e1 p nationality.of.arg2"]


def build_semparse(rng):
    files = {}
    questions = []
    for surface, cid, lang, cap, _, cur in KB_COUNTRIES:
        slug = cid.lower()
        files["graphs/%s_lang_orig.graph" % slug] = graph_lang_original(surface)
        files["graphs/%s_lang_para.graph" % slug] = graph_lang_para(surface)
        files["graphs/%s_lang_para2.graph" % slug] = graph_lang_para_noisy(surface)
        questions.append(("lang", "what language do people in %s speak" % surface,
                          ["%s_lang_orig" % slug, "%s_lang_para" % slug, "%s_lang_para2" % slug], [lang]))
        files["graphs/%s_cap_orig.graph" % slug] = graph_cap_original(surface)
        files["graphs/%s_cap_para.graph" % slug] = graph_cap_para(surface)
        questions.append(("cap", "what is the capital of %s" % surface,
                          ["%s_cap_orig" % slug, "%s_cap_para" % slug], [cap]))
        files["graphs/%s_cur_orig.graph" % slug] = graph_cur_original(surface)
        files["graphs/%s_cur_para.graph" % slug] = graph_cur_para(surface)
        questions.append(("cur", "what money do people in %s pay with" % surface,
                          ["%s_cur_orig" % slug, "%s_cur_para" % slug], [cur]))
    for surface, pid, nat in KB_PEOPLE:
        slug = pid.lower()
        files["graphs/%s_nat_orig.graph" % slug] = graph_nat_original(surface)
        files["graphs/%s_nat_para.graph" % slug] = graph_nat_para(surface)
        questions.append(("nat", "where is %s from" % surface,
                          ["%s_nat_orig" % slug, "%s_nat_para" % slug], [nat]))

    # Stratified split: roughly a third of each family is held out.
    train, test = [], []
    by_fam = defaultdict(list)
    for q in questions:
        by_fam[q[0]].append(q)
    for fam in sorted(by_fam):
        qs = by_fam[fam][:]
        rng.shuffle(qs)
        k = max(1, len(qs) // 3)
        test += qs[:k]
        train += qs[k:]
    # The worked example stays in training.
    fig = [q for q in test if q[1] == "what language do people in czech republic speak"]
    for q in fig:
        test.remove(q)
        train.insert(0, q)

    def qa_lines(qs):
        return ["%s\t%s\t%s" % (text, ",".join("graphs/%s.graph" % g for g in graphs), "|".join(ans))
                for _, text, graphs, ans in qs]

    entities = ["%s\t%s" % (s, cid) for s, cid, *_ in KB_COUNTRIES]
    entities += ["%s\t%s" % (s, pid) for s, pid, _ in KB_PEOPLE]
    # One ambiguous mention; the dictionary rank decides.
    entities.append("georgia\tGeorgiaCountry")
    entities.append("georgia\tGeorgiaState")
    return files, qa_lines(train), qa_lines(test), entities


# ---------------------------------------------------------------------------
# Fixtures

FIGURE1_RULES = [
    ("people", "citizens", 3.0), ("people", "human beings", 2.5), ("people", "people 's", 1.5),
    ("people", "the population", 2.0), ("people", "members of the public", 1.8),
    ("speak", "is speaking", 2.2),
]

# The three hybrid trees of the nochebuena example, plus one tree where
# "when" is tagged NN with the same paraphrase state as "day".
FIGURE2_TREES = [
    "(SBARQ-33-403 (WHNP-7-291 (WP-7-254 what) (NN-45-142 day)) (SQ-8-925 (AUX-22-300 is) (NN-41-854 nochebuena)))",
    "(SBARQ-30-403 (WRB-42-707 when) (SQ-8-709 (AUX-12-300 is) (NN-41-854 nochebuena)))",
    "(SBARQ-24-403 (WRB-42-707 when) (SQ-17-709 (SQ-15-931 (AUX-29-300 is) (NN-30-854 nochebuena)) (JJ-18-579 celebrated)))",
    "(SBARQ-33-403 (NN-3-142 when) (SQ-8-925 (AUX-22-300 is) (NN-41-854 nochebuena)))",
]


def parse_bracketed(s):
    toks = s.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def node():
        nonlocal pos
        assert toks[pos] == "("
        pos += 1
        label = toks[pos]
        pos += 1
        kids = []
        while toks[pos] != ")":
            if toks[pos] == "(":
                kids.append(node())
            else:
                kids.append(toks[pos])
                pos += 1
        pos += 1
        return label, kids

    return node()


def split_label(label):
    sym, h1, h2 = label.rsplit("-", 2)
    return sym, "%s:%s" % (h1, h2)


def figure2_grammar():
    roots, bins, lexs = defaultdict(int), defaultdict(int), defaultdict(int)
    for t in FIGURE2_TREES:
        tree = parse_bracketed(t)
        roots[split_label(tree[0])] += 1
        stack = [tree]
        while stack:
            label, kids = stack.pop()
            p = split_label(label)
            if len(kids) == 1 and isinstance(kids[0], str):
                lexs[(p, kids[0])] += 1
            else:
                l, r = kids
                bins[(p, split_label(l[0]), split_label(r[0]))] += 1
                stack += [l, r]
    totals = defaultdict(int)
    for (p, _, _), n in bins.items():
        totals[p] += n
    for (p, _), n in lexs.items():
        totals[p] += n
    nroot = sum(roots.values())
    words = {w for (_, w) in lexs}

    def prob(n, d):
        return repr(n / d)

    out = ["LPCFG v1 layers=2 m1=46 m2=1000 binarization=right-at vocab=%d" % len(words)]
    out += sorted("ROOT\t%s\t%s\t%s" % (s, h, prob(n, nroot)) for (s, h), n in roots.items())
    out += sorted("BIN\t%s\t%s\t%s\t%s\t%s\t%s\t%s" % (p[0], p[1], l[0], l[1], r[0], r[1], prob(n, totals[p]))
                  for (p, l, r), n in bins.items())
    out += sorted("LEX\t%s\t%s\t%s\t%s" % (p[0], p[1], w, prob(n, totals[p])) for (p, w), n in lexs.items())
    return out


def main():
    rng = random.Random(SEED)
    train, heldout = build_treebank(rng)
    write("treebank/train.trees", [t for *_, t in train])
    write("treebank/heldout.trees", [t for *_, t in heldout])
    write("treebank/heldout.txt", [" ".join(leaves(t)) for *_, t in heldout])
    write("treebank/alignments.tsv", build_alignments(train))

    write("rules/rules200.tsv", build_rule_db(random.Random(SEED + 1)))
    gaz = sorted({"%s\tentity" % e for e in COUNTRIES + HOLIDAYS + PEOPLE})
    write("gazetteer.tsv", gaz)

    qs = [(f, e, leaves(t)) for f, e, _, t in train]
    write("classifier/train.tsv", build_pairs(random.Random(SEED + 2), qs, 1000, 154))
    write("classifier/test.tsv", build_pairs(random.Random(SEED + 3), qs, 500, 77))

    files, qa_train, qa_test, ents = build_semparse(random.Random(SEED + 4))
    write("semparse/kb.tsv", build_kb())
    for name, lines in sorted(files.items()):
        write("semparse/" + name, lines)
    write("semparse/qa_train.tsv", qa_train)
    write("semparse/qa_test.tsv", qa_test)
    write("semparse/entities.tsv", ents)

    write("fixtures/figure1_rules.tsv", ["%s\t%s\t%.1f" % r for r in FIGURE1_RULES])
    write("fixtures/figure2_trees.txt", FIGURE2_TREES)
    write("fixtures/figure2.lpcfg", figure2_grammar())


if __name__ == "__main__":
    main()
