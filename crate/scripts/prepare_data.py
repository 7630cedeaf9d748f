#!/usr/bin/env python3
"""Regenerate the bundled resources under data/.

Inputs are the extracted npm packages `great-gatsby` (public-domain novel text),
`wordnet-db` (WordNet 3.1 database files) and `word-list` (MIT-licensed English
word list):

    npm pack great-gatsby wordnet-db word-list
    mkdir gatsby wordnet wordlist
    tar xzf great-gatsby-*.tgz -C gatsby && tar xzf wordnet-db-*.tgz -C wordnet
    tar xzf word-list-*.tgz -C wordlist
    python3 scripts/prepare_data.py gatsby/package wordnet/package/dict wordlist/package/words.txt data

Outputs:
    gatsby.txt      paragraphs separated by blank lines, one paragraph per line
    dictionary.txt  word list plus WordNet lemmas, one-letter words and
                    contractions; lowercase, one per line
    lexicon.tsv     word<TAB>lemma<TAB>syn1,syn2,...<TAB>frequency
"""

import collections
import html
import os
import re
import sys

WORD_RE = re.compile(r"[A-Za-z]+(?:['’][A-Za-z]+)*")
PLAIN_RE = re.compile(r"^[a-z]+(?:'[a-z]+)*$")

# The word list omits one-letter words and contractions.
EXTRA_WORDS = ["a", "i", "o"]
CONTRACTIONS = """
ain't aren't can't couldn't didn't doesn't don't hadn't hasn't haven't isn't mightn't
mustn't needn't shan't shouldn't wasn't weren't won't wouldn't
i'm i've i'd i'll you're you've you'd you'll he's he'd he'll she's she'd she'll
it's it'd it'll we're we've we'd we'll they're they've they'd they'll
that's that'd that'll there's there'd there'll here's what's what'd what'll who's who'd
who'll where's when's why's how's let's o'clock y'know ma'am
""".split()

IRREGULAR = {
    "am": "be", "are": "be", "is": "be", "was": "be", "were": "be", "been": "be",
    "had": "have", "has": "have", "did": "do", "does": "do", "done": "do",
    "went": "go", "gone": "go", "gave": "give", "given": "give", "said": "say",
    "made": "make", "came": "come", "saw": "see", "seen": "see", "took": "take",
    "taken": "take", "knew": "know", "known": "know", "got": "get",
    "gotten": "get", "thought": "think", "told": "tell", "found": "find",
    "left": "leave", "felt": "feel", "heard": "hear", "sat": "sit",
    "stood": "stand", "ran": "run", "began": "begin", "begun": "begin",
    "brought": "bring", "bought": "buy", "caught": "catch", "drove": "drive",
    "driven": "drive", "ate": "eat", "eaten": "eat", "fell": "fall",
    "fallen": "fall", "flew": "fly", "forgot": "forget", "grew": "grow",
    "held": "hold", "kept": "keep", "laid": "lay", "lay": "lie", "led": "lead",
    "lost": "lose", "meant": "mean", "met": "meet", "paid": "pay",
    "rang": "ring", "rose": "rise", "sang": "sing", "sent": "send",
    "shook": "shake", "slept": "sleep", "spoke": "speak", "spoken": "speak",
    "spent": "spend", "stole": "steal", "struck": "strike", "swam": "swim",
    "taught": "teach", "threw": "throw", "thrown": "throw", "understood": "understand",
    "woke": "wake", "wore": "wear", "worn": "wear", "won": "win", "wrote": "write",
    "written": "write", "men": "man", "women": "woman", "children": "child",
    "feet": "foot", "teeth": "tooth", "better": "good", "best": "good",
    "worse": "bad", "worst": "bad", "broke": "break", "broken": "break",
    "chose": "choose", "drank": "drink", "drunk": "drink", "hid": "hide",
    "hidden": "hide", "rode": "ride", "ridden": "ride", "sank": "sink",
    "shot": "shoot", "shut": "shut", "stuck": "stick", "swept": "sweep",
    "tore": "tear", "torn": "tear", "wept": "weep", "withdrew": "withdraw",
}

SUFFIX_RULES = {
    "noun": [("s", ""), ("ses", "s"), ("xes", "x"), ("zes", "z"), ("ches", "ch"),
             ("shes", "sh"), ("men", "man"), ("ies", "y")],
    "verb": [("s", ""), ("ies", "y"), ("es", "e"), ("es", ""), ("ed", "e"),
             ("ed", ""), ("ing", "e"), ("ing", "")],
    "adj": [("er", ""), ("est", ""), ("er", "e"), ("est", "e")],
    "adv": [],
}

POS_FILES = {"noun": "noun", "verb": "verb", "adj": "adj", "adv": "adv"}


def read_gatsby(root):
    paragraphs = []
    for chapter in range(1, 10):
        with open(os.path.join(root, f"chapter-{chapter}.md"), encoding="utf-8") as fh:
            text = fh.read()
        lines = []
        for line in text.splitlines():
            if line.startswith("# Chapter"):
                continue
            line = re.sub(r"^>\s?", "", line)
            lines.append(line)
        text = "\n".join(lines)
        text = re.sub(r"<[^>]+>", " ", text)
        text = html.unescape(text).replace("*", "")
        for block in re.split(r"\n\s*\n", text):
            para = " ".join(block.split())
            if para and WORD_RE.search(para):
                paragraphs.append(para)
    return paragraphs


def load_wordnet(dict_dir):
    """Return (index, synsets): index[pos][lemma] -> offsets, synsets[(pos, off)] -> (words, hypernyms)."""
    index = {}
    synsets = {}
    for pos, suffix in POS_FILES.items():
        idx = {}
        with open(os.path.join(dict_dir, f"index.{suffix}"), encoding="utf-8") as fh:
            for line in fh:
                if line.startswith(" "):
                    continue
                parts = line.split()
                lemma = parts[0]
                p_cnt = int(parts[3])
                synset_cnt = int(parts[2])
                offsets = parts[4 + p_cnt + 2:]
                idx[lemma] = offsets[:synset_cnt]
        index[pos] = idx
        with open(os.path.join(dict_dir, f"data.{suffix}"), encoding="utf-8") as fh:
            for line in fh:
                if line.startswith(" "):
                    continue
                parts = line.split(" | ")[0].split()
                offset = parts[0]
                w_cnt = int(parts[3], 16)
                words = [re.sub(r"\(.*\)$", "", parts[4 + 2 * i]).lower() for i in range(w_cnt)]
                rest = 4 + 2 * w_cnt
                p_cnt = int(parts[rest])
                hypernyms = []
                for i in range(p_cnt):
                    sym, off, ppos = parts[rest + 1 + 4 * i: rest + 4 + 4 * i]
                    if sym in ("@", "@i", "&"):
                        hypernyms.append(off)
                synsets[(pos, offset)] = (words, hypernyms)
    return index, synsets


def load_tag_counts(dict_dir):
    counts = collections.Counter()
    with open(os.path.join(dict_dir, "index.sense"), encoding="utf-8") as fh:
        for line in fh:
            key, _off, _sense, tag = line.split()
            lemma = key.split("%")[0]
            counts[lemma] += int(tag)
    return counts


def lemmatize(word, index):
    if word in IRREGULAR:
        return IRREGULAR[word]
    for pos in ("noun", "verb", "adj", "adv"):
        if word in index[pos]:
            return word
    for pos in ("verb", "noun", "adj"):
        for old, new in SUFFIX_RULES[pos]:
            if word.endswith(old):
                base = word[: len(word) - len(old)] + new
                if base and base in index[pos]:
                    return base
    return word


def synonyms_of(lemma, index, synsets):
    out = []
    seen = {lemma}

    def add(words):
        for w in words:
            if w not in seen and PLAIN_RE.match(w):
                seen.add(w)
                out.append(w)

    hyper = []
    for pos in ("noun", "verb", "adj", "adv"):
        for off in index[pos].get(lemma, []):
            words, hypernyms = synsets[(pos, off)]
            add(words)
            hyper.extend((pos, h) for h in hypernyms)
    for key in hyper:
        add(synsets[key][0])
    return out


def main():
    gatsby_dir, dict_dir, word_list, out_dir = sys.argv[1:5]
    os.makedirs(out_dir, exist_ok=True)

    paragraphs = read_gatsby(gatsby_dir)
    with open(os.path.join(out_dir, "gatsby.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n\n".join(paragraphs) + "\n")

    index, synsets = load_wordnet(dict_dir)
    with open(word_list, encoding="utf-8") as fh:
        listed = {w.strip().lower() for w in fh}
    lemmas = {w for pos in index.values() for w in pos}
    words = listed | lemmas | set(EXTRA_WORDS) | set(CONTRACTIONS)
    dictionary = sorted(w for w in words if PLAIN_RE.match(w))
    with open(os.path.join(out_dir, "dictionary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(dictionary) + "\n")

    corpus_counts = collections.Counter(
        m.group(0).lower().replace("’", "'") for p in paragraphs for m in WORD_RE.finditer(p)
    )
    tag_counts = load_tag_counts(dict_dir)

    def frequency(word):
        return corpus_counts.get(word, 0) + tag_counts.get(word, 0)

    rows = {}
    pending = sorted(corpus_counts, key=lambda w: (-corpus_counts[w], w))
    extra = []
    for word in pending:
        lemma = lemmatize(word, index)
        syns = synonyms_of(lemma, index, synsets)
        syns = [s for s in syns if s != word]
        if not syns and lemma == word:
            continue
        rows[word] = (lemma, syns)
        extra.extend(syns)
    for word in extra:
        if word in rows:
            continue
        lemma = lemmatize(word, index)
        rows[word] = (lemma, [s for s in synonyms_of(lemma, index, synsets) if s != word])

    with open(os.path.join(out_dir, "lexicon.tsv"), "w", encoding="utf-8") as fh:
        fh.write("# word\tlemma\tsynonyms\tfrequency\n")
        fh.write("# generated by scripts/prepare_data.py from WordNet 3.1 and the bundled corpus\n")
        for word in sorted(rows, key=lambda w: (-frequency(w), w)):
            lemma, syns = rows[word]
            fh.write(f"{word}\t{lemma}\t{','.join(syns)}\t{frequency(word)}\n")

    print(f"paragraphs={len(paragraphs)} dictionary={len(dictionary)} lexicon={len(rows)}")


if __name__ == "__main__":
    main()
