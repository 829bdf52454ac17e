#!/usr/bin/env python3
"""Build the desk-scale fixture corpora under data/.

Every input comes from a PyPI package so the result is reproducible offline
once the wheels are cached:

  shakespeare          public-domain plays + the 1911 Britannica entry (text)
  english-words        GCIDE headword list (dictionary)
  textblob             bundled Brill lexicon tagger (silver POS tags)
  spacy-lookups-data   English lemma lookup table (silver segmentations)

Outputs:
  data/corpus.txt          continuous UTF-8 text stream, >= 1 MB
  data/words.txt           one lowercase dictionary word per line
  data/pos.conllu          silver-tagged CoNLL-U (UPOS in column 4)
  data/segmentations.tsv   surface<TAB>morph+morph silver segmentations

Usage: python3 tools/data/prepare_data.py [--out data] [--cache /tmp/morphoscope-wheels]
"""

import argparse
import collections
import glob
import gzip
import json
import os
import random
import re
import subprocess
import sys
import tarfile
import zipfile

CORPUS_CHARS = 1_200_000
POS_TOKENS = 70_000
SEG_FORMS = 2275

PENN_TO_UPOS = {
    "NN": "NOUN", "NNS": "NOUN", "NNP": "PROPN", "NNPS": "PROPN",
    "VB": "VERB", "VBD": "VERB", "VBG": "VERB", "VBN": "VERB", "VBP": "VERB", "VBZ": "VERB",
    "MD": "AUX",
    "JJ": "ADJ", "JJR": "ADJ", "JJS": "ADJ",
    "RB": "ADV", "RBR": "ADV", "RBS": "ADV", "WRB": "ADV",
    "PRP": "PRON", "PRP$": "PRON", "WP": "PRON", "WP$": "PRON", "EX": "PRON",
    "DT": "DET", "PDT": "DET", "WDT": "DET",
    "IN": "ADP", "RP": "ADP",
    "CC": "CCONJ", "CD": "NUM", "UH": "INTJ", "TO": "PART", "POS": "PART",
    "FW": "X", "LS": "X", "SYM": "SYM",
}

PREFIXES = ["over", "under", "fore", "dis", "mis", "non", "out", "pre", "un", "re", "in", "im"]
DERIV_SUFFIXES = ["ness", "ment", "ship", "hood", "less", "ful", "able", "ible", "ation",
                  "ion", "ity", "ous", "ive", "ish", "ly", "er", "ism", "ist", "ance", "ence"]
INFL_SUFFIXES = ["ing", "est", "es", "ed", "er", "s", "d"]


def fetch(pkg, cache, binary=True):
    os.makedirs(cache, exist_ok=True)
    pattern = os.path.join(cache, f"{pkg.replace('-', '_')}*")
    hits = glob.glob(pattern) + glob.glob(os.path.join(cache, f"{pkg}*"))
    if not hits:
        cmd = [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", cache, pkg]
        subprocess.run(cmd, check=True)
        hits = glob.glob(pattern) + glob.glob(os.path.join(cache, f"{pkg}*"))
    return sorted(hits)[0]


def read_member(archive, suffix):
    if archive.endswith(".whl") or archive.endswith(".zip"):
        z = zipfile.ZipFile(archive)
        name = next(n for n in z.namelist() if n.endswith(suffix))
        return z.read(name)
    t = tarfile.open(archive)
    m = next(m for m in t.getmembers() if m.name.endswith(suffix))
    return t.extractfile(m).read()


def list_members(archive, pattern):
    t = tarfile.open(archive)
    return sorted(m.name for m in t.getmembers() if re.search(pattern, m.name))


def clean_britannica(raw):
    out = []
    for line in raw.splitlines():
        s = line.strip()
        if not s or s.startswith("#") or re.fullmatch(r"p\.\d+:\d+", s):
            continue
        out.append(s)
    return " ".join(out)


def clean_play(raw):
    return " ".join(l.strip() for l in raw.splitlines() if l.strip())


def squeeze(text):
    return re.sub(r"\s+", " ", text).strip()


def build_corpus(cache):
    pkg = fetch("shakespeare", cache)
    parts = [clean_britannica(read_member(pkg, "ancillary/britannica-11th.txt").decode("utf-8", "replace"))]
    for name in list_members(pkg, r"shksprdata/texts/[^/]*_gut\.txt$"):
        parts.append(clean_play(read_member(pkg, name).decode("utf-8", "replace")))
        if sum(len(p) for p in parts) > CORPUS_CHARS:
            break
    text = squeeze(" ".join(parts))[:CORPUS_CHARS]
    return text[: text.rfind(" ")]


SENT_RE = re.compile(r"(?<=[.!?])\s+(?=[A-Z\[\"'])")
TOKEN_RE = re.compile(r"[A-Za-z]+(?:'[a-z]+)?|\d+(?:[.,]\d+)*|[^\sA-Za-z\d]")


def build_treebank(text):
    from textblob.en import tag as pattern_tag

    sentences = []
    total = 0
    for sent in SENT_RE.split(text):
        toks = TOKEN_RE.findall(sent)
        if len(toks) < 3 or len(toks) > 60:
            continue
        tagged = pattern_tag(" ".join(toks), tokenize=False)
        if len(tagged) != len(toks):
            continue
        rows = []
        for form, penn in tagged:
            if re.fullmatch(r"[^\w\s]+", form):
                upos = "PUNCT"
            else:
                upos = PENN_TO_UPOS.get(penn, "X")
            rows.append((form, upos))
        sentences.append((sent, rows))
        total += len(rows)
        if total >= POS_TOKENS:
            break
    lines = []
    for i, (sent, rows) in enumerate(sentences, 1):
        lines.append(f"# sent_id = silver-{i}")
        lines.append(f"# text = {sent}")
        for j, (form, upos) in enumerate(rows, 1):
            lines.append(f"{j}\t{form}\t_\t{upos}\t_\t_\t_\t_\t_\t_")
        lines.append("")
    return "\n".join(lines) + "\n", total


class Segmenter:
    def __init__(self, lemmas, dictionary):
        self.lemmas = lemmas
        self.dict = dictionary

    def known(self, w):
        return w in self.dict

    def segment(self, w, depth=0):
        if depth > 4 or len(w) < 4:
            return [w]
        return (self._inflection(w, depth) or self._derivation(w, depth)
                or self._prefix(w, depth) or self._compound(w) or [w])

    def _inflection(self, w, depth):
        lemma = self.lemmas.get(w)
        if not lemma or lemma == w or not lemma.isalpha() or len(lemma) < 2:
            return None
        for suf in INFL_SUFFIXES:
            if w == lemma + suf:
                return self.segment(lemma, depth + 1) + [suf]
            if suf in ("ing", "ed", "er", "est") and lemma.endswith("e") and w == lemma[:-1] + suf:
                return [lemma[:-1], suf]
            if suf in ("ing", "ed", "er", "est") and w == lemma + lemma[-1] + suf:
                return [lemma + lemma[-1], suf]
        if lemma.endswith("y") and w == lemma[:-1] + "ies":
            return [lemma[:-1] + "ie", "s"]
        if lemma.endswith("y") and w == lemma[:-1] + "ied":
            return [lemma[:-1] + "i", "ed"]
        return None

    def _derivation(self, w, depth):
        for suf in DERIV_SUFFIXES:
            if not w.endswith(suf):
                continue
            rest = w[: -len(suf)]
            if len(rest) < 3:
                continue
            if self.known(rest) or self.known(rest + "e") or (rest.endswith("i") and self.known(rest[:-1] + "y")):
                return self.segment(rest, depth + 1) + [suf]
        return None

    def _prefix(self, w, depth):
        for pre in PREFIXES:
            rest = w[len(pre):]
            if w.startswith(pre) and len(rest) >= 4 and self.known(rest):
                return [pre] + self.segment(rest, depth + 1)
        return None

    def _compound(self, w):
        for cut in range(4, len(w) - 3):
            a, b = w[:cut], w[cut:]
            if self.known(a) and self.known(b):
                return [a, b]
        return None


def build_segmentations(text, cache, gcide, seed):
    spl = fetch("spacy-lookups-data", cache)
    lemmas = json.loads(gzip.decompress(read_member(spl, "en_lemma_lookup.json.gz")))
    counts = collections.Counter(t.lower() for t in re.findall(r"[A-Za-z]+", text) if t.islower())
    dictionary = {w for w, c in counts.items() if c >= 2 and w in gcide}
    seg = Segmenter(lemmas, dictionary)
    complex_forms, simple_forms = [], []
    for w, c in sorted(counts.items()):
        if c < 3 or len(w) < 4 or w not in gcide:
            continue
        morphs = seg.segment(w)
        assert "".join(morphs) == w
        (complex_forms if len(morphs) > 1 else simple_forms).append((w, morphs))
    rng = random.Random(seed)
    rng.shuffle(complex_forms)
    rng.shuffle(simple_forms)
    n_complex = min(len(complex_forms), SEG_FORMS * 2 // 3)
    chosen = complex_forms[:n_complex] + simple_forms[: SEG_FORMS - n_complex]
    chosen.sort()
    lines = ["# surface<TAB>morph+morph (silver: lemma table + affix rules)"]
    lines += [f"{w}\t{'+'.join(m)}" for w, m in chosen]
    return "\n".join(lines) + "\n", len(chosen), n_complex


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "..", "data"))
    ap.add_argument("--cache", default="/tmp/morphoscope-wheels")
    ap.add_argument("--seed", type=int, default=17)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    text = build_corpus(args.cache)
    with open(os.path.join(args.out, "corpus.txt"), "w", encoding="utf-8") as f:
        f.write(text)
    print(f"corpus.txt: {len(text)} chars")

    from english_words import get_english_words_set
    gcide = get_english_words_set(["gcide"], lower=True, alpha=True)
    with open(os.path.join(args.out, "words.txt"), "w", encoding="utf-8") as f:
        f.write("\n".join(sorted(gcide)) + "\n")
    print(f"words.txt: {len(gcide)} words")

    conllu, ntok = build_treebank(text)
    with open(os.path.join(args.out, "pos.conllu"), "w", encoding="utf-8") as f:
        f.write(conllu)
    print(f"pos.conllu: {ntok} tokens")

    segs, nforms, ncomplex = build_segmentations(text, args.cache, gcide, args.seed)
    with open(os.path.join(args.out, "segmentations.tsv"), "w", encoding="utf-8") as f:
        f.write(segs)
    print(f"segmentations.tsv: {nforms} forms ({ncomplex} multi-morph)")


if __name__ == "__main__":
    main()
