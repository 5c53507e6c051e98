#!/usr/bin/env python3
"""Regenerates the bundled toy lexicon and synthetic corpora under crates/core/data.

Everything is written in SLP1. The output is deterministic for a fixed seed.

    python3 scripts/gen_demo_data.py
"""

import os
import random

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "data")

CASES = ["NOM", "ACC", "INS", "DAT", "ABL", "GEN", "LOC", "VOC"]
NUMBERS = ["SG", "DU", "PL"]

MASC_A = [
    ["aH", "O", "AH"], ["am", "O", "An"], ["ena", "AByAm", "EH"], ["Aya", "AByAm", "eByaH"],
    ["At", "AByAm", "eByaH"], ["asya", "ayoH", "AnAm"], ["e", "ayoH", "ezu"], ["a", "O", "AH"],
]
NEUT_A = [
    ["am", "e", "Ani"], ["am", "e", "Ani"], ["ena", "AByAm", "EH"], ["Aya", "AByAm", "eByaH"],
    ["At", "AByAm", "eByaH"], ["asya", "ayoH", "AnAm"], ["e", "ayoH", "ezu"], ["a", "e", "Ani"],
]
FEM_AA = [
    ["A", "e", "AH"], ["Am", "e", "AH"], ["ayA", "AByAm", "ABiH"], ["AyE", "AByAm", "AByaH"],
    ["AyAH", "AByAm", "AByaH"], ["AyAH", "ayoH", "AnAm"], ["AyAm", "ayoH", "Asu"], ["e", "e", "AH"],
]

MASC_NOUNS = [
    "deva", "rAma", "nara", "nAga", "dAsa", "putra", "vfkza", "aSva", "gaja", "Sizya",
    "AcArya", "janaka", "bAla", "loka", "sUrya", "candra", "kfzRa", "arjuna", "meGa", "parvata",
    "samudra", "grAma", "mArga", "hasta", "kAla", "nfpa", "vIra", "siMha", "ambara",
]
NEUT_NOUNS = [
    "Pala", "vana", "bala", "jala", "puzpa", "pustaka", "Sastra", "mitra", "gfha", "nagara",
    "ambara", "netra", "muKa", "SarIra", "vastra", "kzetra", "Dana", "jYAna", "satya",
]
FEM_NOUNS = [
    "latA", "bAlA", "mAlA", "kanyA", "vidyA", "senA", "SAlA", "kaTA", "BAryA", "devatA",
    "prajA", "guhA", "niSA", "yAtrA", "sevA",
]
ADJECTIVES = ["pIta", "praBUta", "sundara", "nava", "Sveta", "dIrGa", "maDura", "uttama", "priya", "SuBa"]

# root, present stem
VERBS = [
    ("BU", "Bava"), ("gam", "gacCa"), ("paW", "paWa"), ("vad", "vada"), ("liK", "liKa"),
    ("dfS", "paSya"), ("nam", "nama"), ("car", "cara"), ("ji", "jaya"), ("tyaj", "tyaja"),
    ("Df", "Dara"), ("smf", "smara"), ("pac", "paca"), ("KAd", "KAda"), ("pat", "pata"),
    ("rakz", "rakza"), ("nI", "naya"), ("hf", "hara"), ("vas", "vasa"),
]
PERFECTS = [("upaviveSa", "upaviS"), ("uvAca", "vac"), ("jagAma", "gam"), ("baBUva", "BU"), ("cakAra", "kf")]

INDECLINABLES = [
    "ha", "ca", "api", "eva", "na", "iti", "tatra", "atra", "yadA", "tadA", "saha", "punaH",
    "sadA", "iva", "vA", "hi", "tu",
]

ASMAD = [
    ["aham", "AvAm", "vayam"], ["mAm", "AvAm", "asmAn"], ["mayA", "AvAByAm", "asmABiH"],
    ["mahyam", "AvAByAm", "asmaByam"], ["mat", "AvAByAm", "asmat"], ["mama", "AvayoH", "asmAkam"],
    ["mayi", "AvayoH", "asmAsu"],
]
YUSMAD = [
    ["tvam", "yuvAm", "yUyam"], ["tvAm", "yuvAm", "yuzmAn"], ["tvayA", "yuvAByAm", "yuzmABiH"],
    ["tuByam", "yuvAByAm", "yuzmaByam"], ["tvat", "yuvAByAm", "yuzmat"], ["tava", "yuvayoH", "yuzmAkam"],
    ["tvayi", "yuvayoH", "yuzmAsu"],
]
TAD_M = [
    ["saH", "tO", "te"], ["tam", "tO", "tAn"], ["tena", "tAByAm", "tEH"], ["tasmE", "tAByAm", "teByaH"],
    ["tasmAt", "tAByAm", "teByaH"], ["tasya", "tayoH", "tezAm"], ["tasmin", "tayoH", "tezu"],
]
TAD_F = [
    ["sA", "te", "tAH"], ["tAm", "te", "tAH"], ["tayA", "tAByAm", "tABiH"], ["tasyE", "tAByAm", "tAByaH"],
    ["tasyAH", "tAByAm", "tAByaH"], ["tasyAH", "tayoH", "tAsAm"], ["tasyAm", "tayoH", "tAsu"],
]
TAD_N = [["tat", "te", "tAni"], ["tat", "te", "tAni"]] + TAD_M[2:]

TRIGGERS = set("rfFz")
BLOCKERS = set("cCjJYSwWqQRtTdDnls")
VOWELS = set("aAiIuUfFxXeEoO")


def natva(form):
    out = list(form)
    for i, ch in enumerate(out):
        if ch != "n" or i + 1 >= len(out):
            continue
        nxt = out[i + 1]
        if not (nxt in VOWELS or nxt in "mynv"):
            continue
        j = i - 1
        while j >= 0 and out[j] not in TRIGGERS and out[j] not in BLOCKERS:
            j -= 1
        if j >= 0 and out[j] in TRIGGERS:
            out[i] = "R"
    return "".join(out)


def decline(stem_base, table):
    for ci, row in enumerate(table):
        for ni, ending in enumerate(row):
            yield natva(stem_base + ending), CASES[ci], NUMBERS[ni]


def conjugate(stem):
    base = stem[:-1]
    pres = [
        [stem + "ti", stem + "taH", base + "anti"],
        [stem + "si", stem + "TaH", stem + "Ta"],
        [base + "Ami", base + "AvaH", base + "AmaH"],
    ]
    impv = [
        [stem + "tu", stem + "tAm", base + "antu"],
        [stem, stem + "tam", stem + "ta"],
        [base + "Ani", base + "Ava", base + "Ama"],
    ]
    impf = [
        ["a" + stem + "t", "a" + stem + "tAm", "a" + base + "an"],
        ["a" + stem + "H", "a" + stem + "tam", "a" + stem + "ta"],
        ["a" + base + "am", "a" + base + "Ava", "a" + base + "Ama"],
    ]
    for tense, table in (("PRES", pres), ("IMPV", impv), ("IMPF", impf)):
        for pi, row in enumerate(table):
            person = str(3 - pi)
            for ni, form in enumerate(row):
                yield natva(form), NUMBERS[ni], person, tense


def build_lexicon():
    entries = []
    for stem in MASC_NOUNS:
        for form, case, num in decline(stem[:-1], MASC_A):
            entries.append((form, stem, f"NOUN,{case},{num},M"))
        entries.append((stem, stem, "NOUN"))
    for stem in NEUT_NOUNS:
        for form, case, num in decline(stem[:-1], NEUT_A):
            entries.append((form, stem, f"NOUN,{case},{num},N"))
        entries.append((stem, stem, "NOUN"))
    for stem in FEM_NOUNS:
        for form, case, num in decline(stem[:-1], FEM_AA):
            entries.append((form, stem, f"NOUN,{case},{num},F"))
    for stem in ADJECTIVES:
        base = stem[:-1]
        for gender, table in (("M", MASC_A), ("N", NEUT_A), ("F", FEM_AA)):
            for form, case, num in decline(base, table):
                entries.append((form, stem, f"ADJ,{case},{num},{gender}"))
        entries.append((stem, stem, "ADJ"))
    for lemma, table, gender in (("asmad", ASMAD, None), ("yuzmad", YUSMAD, None),
                                 ("tad", TAD_M, "M"), ("tad", TAD_F, "F"), ("tad", TAD_N, "N")):
        for ci, row in enumerate(table):
            for ni, form in enumerate(row):
                spec = f"PRON,{CASES[ci]},{NUMBERS[ni]}" + (f",{gender}" if gender else "")
                entries.append((form, lemma, spec))
    for root, stem in VERBS:
        for form, num, person, tense in conjugate(stem):
            entries.append((form, root, f"VERB,{num},{person},{tense}"))
    for form, root in PERFECTS:
        entries.append((form, root, "VERB,SG,3,PERF"))
    for w in INDECLINABLES:
        entries.append((w, w, "INDECL"))
    seen = set()
    out = []
    for e in entries:
        if e not in seen:
            seen.add(e)
            out.append(e)
    return out


def load_rules():
    rules = []
    with open(os.path.join(OUT, "sandhi_rules.tsv")) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            _, lf, rf, surf = line.split("\t")
            rules.append(tuple("" if x == "-" else x for x in (lf, rf, surf)))
    return rules


def join(left, right, rules):
    if not left or not right:
        return left + right
    for lf, rf, surf in rules:
        if left.endswith(lf) and right.startswith(rf):
            return left[: len(left) - len(lf)] + surf + right[len(rf):]
    return left + right


def index_forms(lexicon):
    by = {}
    for form, lemma, spec in lexicon:
        by.setdefault((lemma, spec), form)
    return by


CASE_LABEL = {"NOM": "karta", "ACC": "karma", "INS": "karana", "DAT": "sampradana",
              "ABL": "apadana", "LOC": "adhikarana"}


def noun_phrase(rng, forms, case, num, with_adj):
    kind = rng.choice(["M", "N", "F"])
    stems = {"M": MASC_NOUNS, "N": NEUT_NOUNS, "F": FEM_NOUNS}[kind]
    stem = rng.choice(stems)
    noun_spec = f"NOUN,{case},{num},{kind}"
    toks = []
    if with_adj:
        adj = rng.choice(ADJECTIVES)
        toks.append((forms[(adj, f"ADJ,{case},{num},{kind}")], adj, f"ADJ,{case},{num},{kind}", "viseshana"))
    toks.append((forms[(stem, noun_spec)], stem, noun_spec, CASE_LABEL[case]))
    return toks


def sentence(rng, forms):
    """SOV clause: subject, optional oblique, object, verb. Adjectives precede their noun."""
    num = rng.choice(NUMBERS)
    phrases = [noun_phrase(rng, forms, "NOM", num, rng.random() < 0.4)]
    if rng.random() < 0.5:
        phrases.append(noun_phrase(rng, forms, rng.choice(["INS", "DAT", "ABL", "LOC"]), rng.choice(NUMBERS),
                                   rng.random() < 0.3))
    phrases.append(noun_phrase(rng, forms, "ACC", rng.choice(NUMBERS), rng.random() < 0.4))
    root, _ = rng.choice(VERBS)
    vspec = f"VERB,{num},3,{rng.choice(['PRES', 'IMPF'])}"
    verb = (forms[(root, vspec)], root, vspec, "root")
    toks = [t for p in phrases for t in p] + [verb]
    # heads: verb is root; nouns attach to the verb; adjectives to the following token.
    n = len(toks)
    rows = []
    for i, (form, lemma, spec, label) in enumerate(toks):
        if label == "root":
            head = 0
        elif label == "viseshana":
            head = i + 2
        else:
            head = n
        rows.append((form, lemma, spec, head, label))
    return rows


def write_conllu(path, sents, with_deps):
    with open(path, "w") as f:
        for si, rows in enumerate(sents, 1):
            f.write(f"# sent_id = {si}\n")
            f.write("# text = " + " ".join(r[0] for r in rows) + "\n")
            for i, (form, lemma, spec, head, label) in enumerate(rows, 1):
                h = str(head) if with_deps else "_"
                l = label if with_deps else "_"
                f.write(f"{i}\t{form}\t{lemma}\t_\t{spec}\t_\t{h}\t{l}\t_\t_\n")
            f.write("\n")


def main():
    rng = random.Random(20230709)
    lexicon = build_lexicon()
    with open(os.path.join(OUT, "lexicon.tsv"), "w") as f:
        f.write("# Toy inflected-form lexicon (SLP1).\n")
        f.write("#script=SLP1\n")
        f.write("# surface\tlemma\ttag-spec\n")
        for e in lexicon:
            f.write("\t".join(e) + "\n")
    forms = index_forms(lexicon)

    tag_sents = [sentence(rng, forms) for _ in range(50)]
    write_conllu(os.path.join(OUT, "tagger_train.conllu"), tag_sents, with_deps=False)
    dep_sents = [sentence(rng, forms) for _ in range(50)]
    write_conllu(os.path.join(OUT, "treebank_train.conllu"), dep_sents, with_deps=True)

    # Segmentation corpus: words of each clause joined with '_'.
    seg_sents = []
    for _ in range(50):
        rows = sentence(rng, forms)
        seg_sents.append("_".join(r[0] for r in rows[: rng.choice([2, 3, 3, 4])]))
    seg_sents[0] = "dAsaH_Bava"
    with open(os.path.join(OUT, "seg_train.txt"), "w") as f:
        f.write("#script=SLP1\n")
        for s in seg_sents:
            f.write(s + "\n")

    # Embedding training text: the clauses above, one sentence per line.
    with open(os.path.join(OUT, "embedding_corpus.txt"), "w") as f:
        for rows in tag_sents + dep_sents:
            f.write(" ".join(r[0] for r in rows) + "\n")

    # Compounds: first constituent is a bare stem, the second inflected.
    pairs = [
        ("pIta", "ambaram", "TATPURUSHA"), ("rAja", "putraH", "TATPURUSHA"), ("deva", "AlayaH", "TATPURUSHA"),
        ("nara", "siMhaH", "TATPURUSHA"), ("vana", "vAsaH", "TATPURUSHA"), ("jala", "pAtram", "TATPURUSHA"),
        ("rAma", "lakzmaRO", "DVANDVA"), ("mAtA", "pitarO", "DVANDVA"), ("deva", "asurAH", "DVANDVA"),
        ("Pala", "puzpARi", "DVANDVA"), ("sUrya", "candrO", "DVANDVA"), ("gaja", "aSvAH", "DVANDVA"),
        ("mahA", "bAhuH", "BAHUVRIHI"), ("nIla", "kaRWaH", "BAHUVRIHI"), ("catur", "muKaH", "BAHUVRIHI"),
        ("dIrGa", "bAhuH", "BAHUVRIHI"), ("candra", "SeKaraH", "BAHUVRIHI"), ("Sveta", "vastraH", "BAHUVRIHI"),
        ("upa", "gaNgam", "AVYAYIBHAVA"), ("yaTA", "Sakti", "AVYAYIBHAVA"), ("prati", "dinam", "AVYAYIBHAVA"),
        ("sa", "harzam", "AVYAYIBHAVA"), ("anu", "rUpam", "AVYAYIBHAVA"), ("upa", "vanam", "AVYAYIBHAVA"),
    ]
    contexts = [
        ("aham", "DarAmi"), ("saH", "paSyati"), ("tvam", "smarasi"), ("sA", "vadati"), ("vayam", "gacCAmaH"),
        ("te", "rakzanti"),
    ]
    compounds = []
    for k, (c1, c2, label) in enumerate(pairs):
        left, right = contexts[k % len(contexts)]
        compounds.append((c1, c2, left, right, label))
    # Same constituents in a different context carry a different label.
    compounds += [
        ("pIta", "ambaram", "kfzRaH", "Bavati", "BAHUVRIHI"),
        ("pIta", "ambaram", "aham", "DarAmi", "TATPURUSHA"),
        ("mahA", "bAhuH", "saH", "gacCati", "BAHUVRIHI"),
        ("rAja", "putraH", "tvam", "paSyasi", "TATPURUSHA"),
        ("deva", "asurAH", "te", "vadanti", "DVANDVA"),
        ("upa", "vanam", "vayam", "vasAmaH", "AVYAYIBHAVA"),
    ]
    with open(os.path.join(OUT, "compounds_train.tsv"), "w") as f:
        f.write("#script=SLP1\n")
        f.write("# sentence\tspan-index\tconstituents\tlabel\n")
        rules = load_rules()
        for c1, c2, left, right, label in compounds:
            f.write(f"{left} {join(c1, c2, rules)} {right}\t1\t{c1}+{c2}\t{label}\n")


if __name__ == "__main__":
    main()
