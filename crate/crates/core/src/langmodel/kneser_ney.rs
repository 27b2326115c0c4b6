//! Interpolated Kneser-Ney n-gram model with a single absolute discount.
//!
//! The highest order uses raw counts; lower orders use continuation counts
//! (the number of distinct left extensions of an n-gram). The unigram level
//! interpolates with the uniform distribution, so any vocabulary token has
//! nonzero probability whenever the discount is positive. With a zero
//! discount the model is maximum likelihood on every seen context and only
//! backs off when the context itself was never observed.
//!
//! Sequences are padded on the left with extra `</s>` tokens so that every
//! predicted token has a full-order window; contexts shorter than the order
//! that start at the line end are padded the same way at query time.

use rustc_hash::FxHashMap;

use super::{LanguageModel, LmError, TokenId, Vocabulary, LINE_END, LINE_END_ID, LINE_START, UNKNOWN_ID};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(super) struct ContextStats {
    /// Sum of the counts of all n-grams extending this context.
    total: u64,
    /// Number of distinct words following this context.
    distinct: u32,
}

/// Packs up to `order` token ids into one `u64` key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct KeyPacker {
    bits: u32,
}

impl KeyPacker {
    fn new(vocab: usize, order: usize) -> Result<Self, LmError> {
        // one spare code for UNKNOWN_ID
        let needed = (vocab as u64 + 1).next_power_of_two().trailing_zeros().max(1);
        if needed as usize * order > 64 {
            return Err(LmError::Capacity { vocab, order });
        }
        Ok(KeyPacker { bits: needed })
    }

    fn mask(self) -> u64 {
        (1u64 << self.bits) - 1
    }

    fn push(self, key: u64, id: TokenId) -> u64 {
        (key << self.bits) | (id as u64 & self.mask())
    }

    fn pack(self, ids: &[TokenId]) -> u64 {
        ids.iter().fold(0, |k, &id| self.push(k, id))
    }

    /// Drops the oldest id of a `len`-gram key.
    fn drop_oldest(self, key: u64, len: usize) -> u64 {
        let keep = self.bits * (len as u32 - 1);
        if keep >= 64 {
            key
        } else {
            key & ((1u64 << keep) - 1)
        }
    }

    fn unpack(self, key: u64, len: usize) -> Vec<TokenId> {
        (0..len)
            .rev()
            .map(|i| ((key >> (self.bits * i as u32)) & self.mask()) as TokenId)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct NGramModel {
    order: usize,
    discount: f64,
    vocab: Vocabulary,
    packer: KeyPacker,
    /// Raw counts of full-order n-grams; everything else derives from these.
    raw: FxHashMap<u64, u32>,
    /// `counts[k - 1]`: raw counts for k = order, continuation counts below.
    counts: Vec<FxHashMap<u64, u32>>,
    /// `contexts[k - 1]`: statistics of the (k-1)-token contexts of order k.
    contexts: Vec<FxHashMap<u64, ContextStats>>,
}

/// One interpolation level resolved for a fixed context.
#[derive(Clone, Copy, Debug)]
struct Level {
    order: usize,
    prefix: u64,
    total: f64,
    weight: f64,
}

impl NGramModel {
    /// Trains on reversed sequences, each already wrapped as `</s> ... <s>`.
    pub fn train<S: AsRef<str>>(
        sequences: &[Vec<S>],
        order: usize,
        discount: f64,
    ) -> Result<Self, LmError> {
        check_params(order, discount)?;
        if sequences.is_empty() {
            return Err(LmError::NoData);
        }
        for (i, seq) in sequences.iter().enumerate() {
            let wrapped = seq.len() >= 2
                && seq[0].as_ref() == LINE_END
                && seq[seq.len() - 1].as_ref() == LINE_START;
            if !wrapped {
                return Err(LmError::Unwrapped(i));
            }
        }
        let vocab = Vocabulary::new(sequences.iter().flatten().map(|s| s.as_ref()));
        let packer = KeyPacker::new(vocab.len(), order)?;
        let mut raw: FxHashMap<u64, u32> = FxHashMap::default();
        let mut window: Vec<TokenId> = Vec::with_capacity(order);
        for seq in sequences {
            let ids: Vec<TokenId> = std::iter::repeat_n(LINE_END_ID, order - 2)
                .chain(seq.iter().map(|t| vocab.id(t.as_ref()).expect("interned above")))
                .collect();
            for end in order - 1..ids.len() {
                window.clear();
                window.extend_from_slice(&ids[end + 1 - order..=end]);
                *raw.entry(packer.pack(&window)).or_default() += 1;
            }
        }
        Ok(Self::from_raw(order, discount, vocab, packer, raw))
    }

    fn from_raw(
        order: usize,
        discount: f64,
        vocab: Vocabulary,
        packer: KeyPacker,
        raw: FxHashMap<u64, u32>,
    ) -> Self {
        let mut counts: Vec<FxHashMap<u64, u32>> = vec![FxHashMap::default(); order];
        counts[order - 1] = raw.clone();
        for k in (1..order).rev() {
            let mut cont: FxHashMap<u64, u32> = FxHashMap::default();
            for &key in counts[k].keys() {
                *cont.entry(packer.drop_oldest(key, k + 1)).or_default() += 1;
            }
            counts[k - 1] = cont;
        }
        let contexts = counts
            .iter()
            .map(|level| {
                let mut ctx: FxHashMap<u64, ContextStats> = FxHashMap::default();
                for (&key, &c) in level {
                    let s = ctx.entry(key >> packer.bits).or_default();
                    s.total += c as u64;
                    s.distinct += 1;
                }
                ctx
            })
            .collect();
        NGramModel {
            order,
            discount,
            vocab,
            packer,
            raw,
            counts,
            contexts,
        }
    }

    pub(super) fn from_parts(
        order: usize,
        discount: f64,
        vocab: Vocabulary,
        raw: Vec<(Vec<TokenId>, u32)>,
    ) -> Result<Self, LmError> {
        check_params(order, discount)?;
        let packer = KeyPacker::new(vocab.len(), order)?;
        let raw = raw
            .into_iter()
            .map(|(ids, c)| (packer.pack(&ids), c))
            .collect();
        Ok(Self::from_raw(order, discount, vocab, packer, raw))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Full-order n-grams with their raw counts, sorted by token ids.
    pub fn raw_ngrams(&self) -> Vec<(Vec<TokenId>, u32)> {
        let mut out: Vec<(Vec<TokenId>, u32)> = self
            .raw
            .iter()
            .map(|(&k, &c)| (self.packer.unpack(k, self.order), c))
            .collect();
        out.sort_unstable();
        out
    }

    /// The `n` most frequent full-order n-grams, ties broken by token ids.
    pub fn top_ngrams(&self, n: usize) -> Vec<(Vec<String>, u32)> {
        let mut all = self.raw_ngrams();
        all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        all.into_iter()
            .take(n)
            .map(|(ids, c)| (ids.iter().map(|&i| self.vocab.token(i).to_string()).collect(), c))
            .collect()
    }

    /// Raw count of a full-order n-gram (ids oldest first).
    pub fn count(&self, ngram: &[TokenId]) -> u32 {
        if ngram.len() != self.order {
            return 0;
        }
        self.raw.get(&self.packer.pack(ngram)).copied().unwrap_or(0)
    }

    /// Effective context: the last `order - 1` tokens, left-padded with `</s>`
    /// when a short context starts at the line end.
    fn effective_context(&self, context: &[TokenId], buf: &mut Vec<TokenId>) {
        let want = self.order - 1;
        buf.clear();
        if context.len() >= want {
            buf.extend_from_slice(&context[context.len() - want..]);
        } else {
            if context.first().is_none_or(|&t| t == LINE_END_ID) {
                buf.extend(std::iter::repeat_n(LINE_END_ID, want - context.len()));
            }
            buf.extend_from_slice(context);
        }
    }

    fn levels(&self, context: &[TokenId]) -> Vec<Level> {
        let mut ctx = Vec::with_capacity(self.order);
        self.effective_context(context, &mut ctx);
        let mut out = Vec::with_capacity(self.order);
        for k in 1..=self.order {
            let hlen = k - 1;
            if hlen > ctx.len() {
                break;
            }
            let h = &ctx[ctx.len() - hlen..];
            if h.contains(&UNKNOWN_ID) {
                break;
            }
            let prefix = self.packer.pack(h);
            match self.contexts[k - 1].get(&prefix) {
                Some(s) if s.total > 0 => out.push(Level {
                    order: k,
                    prefix,
                    total: s.total as f64,
                    weight: self.discount * s.distinct as f64,
                }),
                _ => {}
            }
        }
        out
    }

    fn prob_with(&self, levels: &[Level], word: TokenId) -> f64 {
        let mut p = 1.0 / self.vocab.len() as f64;
        for lv in levels {
            let key = self.packer.push(lv.prefix, word);
            let c = self.counts[lv.order - 1].get(&key).copied().unwrap_or(0) as f64;
            p = ((c - self.discount).max(0.0) + lv.weight * p) / lv.total;
        }
        p
    }

    /// Checks that every stored context is itself a stored n-gram one order
    /// down. Pure `</s>` padding contexts are never predicted and are exempt.
    pub fn contexts_are_closed(&self) -> bool {
        (2..=self.order).all(|k| {
            self.contexts[k - 1].keys().all(|&h| {
                let padding = self.packer.unpack(h, k - 1).iter().all(|&t| t == LINE_END_ID);
                padding || self.counts[k - 2].contains_key(&h)
            })
        })
    }
}

fn check_params(order: usize, discount: f64) -> Result<(), LmError> {
    if order < 2 {
        return Err(LmError::Order(order));
    }
    if !(0.0..1.0).contains(&discount) {
        return Err(LmError::Discount(discount));
    }
    Ok(())
}

impl LanguageModel for NGramModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn context_len(&self) -> usize {
        self.order - 1
    }

    fn prob_id(&self, word: TokenId, context: &[TokenId]) -> f64 {
        self.prob_with(&self.levels(context), word)
    }

    fn observed(&self, word: TokenId) -> bool {
        self.counts[0].contains_key(&self.packer.pack(&[word]))
    }

    fn log_probs(&self, context: &[TokenId], words: &[TokenId], out: &mut Vec<f64>) {
        let levels = self.levels(context);
        out.clear();
        out.extend(words.iter().map(|&w| self.prob_with(&levels, w).ln()));
    }
}
