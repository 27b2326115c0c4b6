#!/usr/bin/env python3
"""Assemble the data/ directory from public package archives.

Sources (all fetched through ordinary package managers):

  pip download cmudict            -> cmudict/data/cmudict.dict (BSD)
  pip download prosodic           -> corpora/corppoetry_en/*.txt (public-domain verse)
  npm pack @stdlib/datasets-sotu  -> package/data/*.{txt,json} (US State of the Union, public domain)
  npm pack pos                    -> package/lexicon.js (Brill's Penn-tagged lexicon)

Usage:
  python3 scripts/prepare_data.py --cmudict DIR --prosodic DIR --sotu DIR --pos DIR --out data
"""

import argparse
import collections
import glob
import gzip
import json
import os
import re
import shutil
import subprocess

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

PENN = set(
    "CC CD DT EX FW IN JJ JJR JJS LS MD NN NNS NNP NNPS PDT POS PRP PRP$ RB RBR RBS "
    "RP SYM TO UH VB VBD VBG VBN VBP VBZ WDT WP WP$ WRB".split()
)

# Early-modern forms missing from the newswire lexicon.
ARCHAIC = {
    "thou": ["PRP"],
    "thee": ["PRP"],
    "ye": ["PRP"],
    "thy": ["PRP$"],
    "thine": ["PRP$"],
    "hath": ["VBZ"],
    "doth": ["VBZ"],
    "dost": ["VBP"],
    "hast": ["VBP"],
    "art": ["VBP", "NN"],
    "shalt": ["MD"],
    "wilt": ["MD"],
    "canst": ["MD"],
    "wouldst": ["MD"],
    "couldst": ["MD"],
    "shouldst": ["MD"],
    "o": ["UH"],
    "oh": ["UH"],
    "'tis": ["PRP"],
    "'twas": ["PRP"],
    "ere": ["IN"],
    "whilst": ["IN"],
    "oft": ["RB"],
    "nay": ["UH"],
}

WORD_RE = re.compile(r"[a-z]+(?:'[a-z]+)*|'[a-z]+")


def words(text):
    return WORD_RE.findall(text.replace("’", "'").replace("‘", "'").lower())


def load_cmu_words(path):
    out = set()
    with open(path, encoding="latin-1") as f:
        for line in f:
            if line.startswith(";;;"):
                continue
            head = line.split(" ", 1)[0]
            out.add(re.sub(r"\(\d+\)$", "", head).lower())
    return out


def sotu_texts(root):
    files = sorted(glob.glob(os.path.join(root, "data", "*")), key=os.path.basename)
    for fn in files:
        with open(fn, encoding="utf-8") as f:
            raw = f.read()
        if fn.endswith(".json"):
            raw = json.loads(raw)["text"]
        yield os.path.basename(fn), raw.strip()


def build_embeddings(streams, vocab, dim, window):
    index = {w: i for i, w in enumerate(sorted(vocab))}
    counts = collections.Counter()
    for toks in streams:
        ids = [index.get(t, -1) for t in toks]
        for i, a in enumerate(ids):
            if a < 0:
                continue
            for j in range(i + 1, min(len(ids), i + 1 + window)):
                b = ids[j]
                if b < 0:
                    continue
                wgt = 1.0 / (j - i)
                counts[(a, b)] += wgt
                counts[(b, a)] += wgt
    rows = np.fromiter((k[0] for k in counts), dtype=np.int64, count=len(counts))
    cols = np.fromiter((k[1] for k in counts), dtype=np.int64, count=len(counts))
    vals = np.fromiter(counts.values(), dtype=np.float64, count=len(counts))
    n = len(index)
    m = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    total = vals.sum()
    row_sum = np.asarray(m.sum(axis=1)).ravel()
    col_sum = np.asarray(m.sum(axis=0)).ravel() ** 0.75
    col_sum /= col_sum.sum()
    coo = m.tocoo()
    pmi = np.log(coo.data * 1.0 / (row_sum[coo.row] / total * col_sum[coo.col] * total))
    keep = pmi > 0
    ppmi = sp.csr_matrix((pmi[keep], (coo.row[keep], coo.col[keep])), shape=(n, n))
    u, s, _ = svds(ppmi, k=dim, random_state=0)
    order = np.argsort(-s)
    vecs = u[:, order] * np.sqrt(s[order])
    # svds leaves the sign of each component arbitrary; fix it for reproducibility.
    signs = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(dim)])
    vecs *= signs
    words_sorted = sorted(index, key=index.get)
    return [(w, vecs[index[w]]) for w in words_sorted if np.any(vecs[index[w]] != 0)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cmudict", required=True)
    ap.add_argument("--prosodic", required=True)
    ap.add_argument("--sotu", required=True)
    ap.add_argument("--pos", required=True)
    ap.add_argument("--out", default="data")
    ap.add_argument("--dim", type=int, default=50)
    args = ap.parse_args()

    out = args.out
    for sub in ["cmudict", "corpora", "embeddings", "tags", "grammar"]:
        os.makedirs(os.path.join(out, sub), exist_ok=True)

    cmu_src = os.path.join(args.cmudict, "cmudict", "data")
    shutil.copy(os.path.join(cmu_src, "cmudict.dict"), os.path.join(out, "cmudict", "cmudict.dict"))
    shutil.copy(os.path.join(cmu_src, "LICENSE"), os.path.join(out, "cmudict", "LICENSE"))
    cmu = load_cmu_words(os.path.join(cmu_src, "cmudict.dict"))

    verse_dir = os.path.join(args.prosodic, "corpora", "corppoetry_en")
    verse = {
        "milton": "en.milton.paradise_lost.txt",
        "hopkins": "en.hopkins.txt",
        "shakespeare": "en.shakespeare.txt",
    }
    streams = []
    for name, fn in verse.items():
        with open(os.path.join(verse_dir, fn), encoding="utf-8") as f:
            text = f.read()
        with open(os.path.join(out, "corpora", name + ".txt"), "w", encoding="utf-8") as f:
            f.write(text)
        streams.extend(words(line) for line in text.splitlines())

    sotu = list(sotu_texts(args.sotu))
    full = "\n\n".join(text for _, text in sotu) + "\n"
    with gzip.GzipFile(os.path.join(out, "corpora", "sotu.txt.gz"), "wb", mtime=0) as f:
        f.write(full.encode("utf-8"))
    early = "\n\n".join(text for name, text in sotu if name[:4] < "1821") + "\n"
    with open(os.path.join(out, "corpora", "sotu_early.txt"), "w", encoding="utf-8") as f:
        f.write(early)
    for _, text in sotu:
        streams.extend(words(s) for s in re.split(r"[.!?]", text))

    vocab = set()
    for toks in streams:
        vocab.update(t for t in toks if t in cmu)
    vecs = build_embeddings(streams, vocab, args.dim, window=4)
    with gzip.GzipFile(os.path.join(out, "embeddings", "vectors.%dd.txt.gz" % args.dim), "wb", mtime=0) as f:
        for w, v in vecs:
            f.write((w + " " + " ".join("%.5f" % x for x in v) + "\n").encode("utf-8"))

    lex = json.loads(
        subprocess.check_output(
            ["node", "-e", "process.stdout.write(JSON.stringify(require(process.argv[1])))",
             os.path.abspath(os.path.join(args.pos, "lexicon.js"))]
        )
    )
    merged = {}
    for word, tags in lex.items():
        low = word.lower()
        if low not in cmu:
            continue
        tags = [t for t in tags if t in PENN]
        if not tags:
            continue
        # a lowercase headword wins over its capitalised forms
        if word == low or low not in merged or not merged[low][0]:
            merged[low] = (word == low, tags)
    for word, tags in ARCHAIC.items():
        merged[word] = (True, tags)
    with open(os.path.join(out, "tags", "lexicon.tsv"), "w", encoding="utf-8") as f:
        for word in sorted(merged):
            tags = merged[word][1]
            # the source lexicon lists tags by frequency without counts
            body = ",".join("%s:%d" % (t, max(1, 100 // (i + 1))) for i, t in enumerate(tags))
            f.write("%s\t%s\n" % (word, body))


if __name__ == "__main__":
    main()
