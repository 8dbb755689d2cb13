#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocab_lab::pipeline::ExperimentManifest;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture_lines(name: &str) -> Vec<String> {
    vocab_lab::corpus::read_lines(&fixture(name)).unwrap()
}

/// `rank<TAB>left<TAB>right<TAB>count` rows.
pub fn read_golden(name: &str) -> Vec<(String, String, u64)> {
    fs::read_to_string(fixture(name))
        .unwrap()
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[1].to_owned(), f[2].to_owned(), f[3].parse().unwrap())
        })
        .collect()
}

pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        ((self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64) < p
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }
}

// ---- brute-force BPE -------------------------------------------------

const MARK: char = '\u{2581}';

#[derive(PartialEq, Clone, Copy)]
enum Class {
    Mark,
    Letter,
    Digit,
    Other,
}

/// Only defined on the alphabet used by [`random_bpe_corpus`].
fn class(c: char) -> Class {
    match c {
        '\u{0300}'..='\u{036F}' => Class::Mark,
        'a'..='z' | 'A'..='Z' | 'ä' | 'ö' | 'å' | 'ü' | 'é' | 'ß' | 'Ä' | 'Ö' => {
            Class::Letter
        }
        '0'..='9' => Class::Digit,
        _ => Class::Other,
    }
}

fn oracle_words(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    if line.is_empty() {
        return out;
    }
    let mut cur = MARK.to_string();
    let mut cur_cls: Option<Class> = None;
    let flush = |out: &mut Vec<String>, cur: &mut String, cur_cls: &mut Option<Class>| {
        if !cur.is_empty() {
            out.push(std::mem::take(cur));
        }
        *cur_cls = None;
    };
    for c in line.chars() {
        if c == ' ' {
            flush(&mut out, &mut cur, &mut cur_cls);
            cur.push(MARK);
        } else if c.is_whitespace() || c == MARK {
            flush(&mut out, &mut cur, &mut cur_cls);
        } else {
            let k = class(c);
            if k != Class::Mark {
                if cur_cls.is_some_and(|p| p != k) {
                    flush(&mut out, &mut cur, &mut cur_cls);
                }
                cur_cls = Some(k);
            }
            cur.push(c);
        }
    }
    flush(&mut out, &mut cur, &mut cur_cls);
    out
}

/// Greedy BPE that recounts every pair on each step. Returns
/// `(left, right, count)` per merge.
pub fn brute_force_bpe(
    lines: &[String],
    target: usize,
    fallback: bool,
) -> Vec<(String, String, u64)> {
    let mut wc: BTreeMap<String, u64> = BTreeMap::new();
    for l in lines {
        for w in oracle_words(l) {
            *wc.entry(w).or_default() += 1;
        }
    }
    let mut chars: HashMap<char, u64> = HashMap::new();
    for (w, n) in &wc {
        for c in w.chars() {
            *chars.entry(c).or_default() += n;
        }
    }
    let mut pieces: Vec<String> = ["<unk>", "<s>", "</s>"].map(String::from).to_vec();
    if fallback {
        pieces.extend((0..=255u8).map(|b| format!("<0x{b:02X}>")));
    }
    let forbidden: HashSet<String> = pieces.iter().cloned().collect();
    let mut order: Vec<(char, u64)> = chars.into_iter().collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let room = target.saturating_sub(pieces.len());
    let kept: HashSet<String> = order
        .iter()
        .take(room)
        .map(|(c, _)| c.to_string())
        .collect();
    pieces.extend(order.iter().take(room).map(|(c, _)| c.to_string()));
    let mut piece_set: HashSet<String> = pieces.iter().cloned().collect();

    let mut words: Vec<(Vec<Option<String>>, u64)> = wc
        .iter()
        .map(|(w, &n)| {
            let syms = w
                .chars()
                .map(|c| Some(c.to_string()).filter(|s| kept.contains(s)))
                .collect();
            (syms, n)
        })
        .collect();
    let mut merges = Vec::new();
    let mut done: HashSet<(String, String)> = HashSet::new();
    while pieces.len() < target {
        let mut pc: HashMap<(String, String), u64> = HashMap::new();
        for (syms, n) in &words {
            for w in syms.windows(2) {
                if let (Some(a), Some(b)) = (&w[0], &w[1]) {
                    let key = (a.clone(), b.clone());
                    if !forbidden.contains(&format!("{a}{b}")) && !done.contains(&key) {
                        *pc.entry(key).or_default() += n;
                    }
                }
            }
        }
        let Some((best, count)) = pc.into_iter().min_by(|(p, c), (q, d)| {
            d.cmp(c)
                .then_with(|| format!("{}{}", p.0, p.1).cmp(&format!("{}{}", q.0, q.1)))
                .then_with(|| p.0.cmp(&q.0))
        }) else {
            break;
        };
        if count < 2 {
            break;
        }
        let new = format!("{}{}", best.0, best.1);
        merges.push((best.0.clone(), best.1.clone(), count));
        done.insert(best.clone());
        if piece_set.insert(new.clone()) {
            pieces.push(new.clone());
        }
        for (syms, _) in words.iter_mut() {
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len()
                    && syms[i].as_deref() == Some(&best.0)
                    && syms[i + 1].as_deref() == Some(&best.1)
                {
                    out.push(Some(new.clone()));
                    i += 2;
                } else {
                    out.push(syms[i].clone());
                    i += 1;
                }
            }
            *syms = out;
        }
    }
    merges
}

/// Small corpora over a restricted alphabet with punctuation, digits,
/// combining marks, tabs and repeated spaces.
pub fn random_bpe_corpus(rng: &mut Rng, max_lines: usize) -> Vec<String> {
    const SYL: &[&str] = &[
        "ab",
        "ba",
        "aa",
        "er",
        "re",
        "ä",
        "ö",
        "ung",
        "ch",
        "e\u{0301}",
        "ß",
        "st",
        "o",
        "Ä",
    ];
    const OTHER: &[&str] = &[",", ".", "!", "'", "-", "7", "42", "\t", "  "];
    let n = rng.range(1, max_lines);
    (0..n)
        .map(|_| {
            let mut s = String::new();
            for w in 0..rng.range(0, 8) {
                if w > 0 {
                    s.push(' ');
                }
                for _ in 0..rng.range(1, 3) {
                    s.push_str(rng.pick(SYL));
                }
                if rng.chance(0.2) {
                    s.push_str(rng.pick(OTHER));
                }
            }
            s
        })
        .collect()
}

// ---- fuzzed text -----------------------------------------------------

pub fn fuzz_line(rng: &mut Rng) -> String {
    const ATOMS: &[&str] = &[
        "a",
        "Z",
        "é",
        "ß",
        "ж",
        "中",
        "文",
        "ü",
        "Å",
        "ö",
        " ",
        "  ",
        "\t",
        "\r",
        "\u{3000}",
        "\u{00A0}",
        "\u{2581}",
        "\u{0301}",
        "\u{0308}",
        "\u{200D}",
        "😀",
        "👩\u{200D}💻",
        "👍🏽",
        "🇸🇪",
        "€",
        "<0xE2>",
        "<unk>",
        "<s>",
        "</s>",
        "<0x",
        ">",
        "\u{FFFD}",
        "\u{E000}",
        "\u{10FFFF}",
        "\0",
        "\u{7F}",
        "١٢",
        "٣",
        "𝔘",
        "ﬁ",
        "Ⅻ",
        "’",
        ",",
        ".",
        "!",
        "'",
        "\"",
        "-",
        "0",
        "9",
        "the",
        "och",
        "är",
    ];
    let mut s = String::new();
    for _ in 0..rng.range(0, 24) {
        if rng.chance(0.1) {
            let cp = rng.below(0x11_0000) as u32;
            if let Some(c) = char::from_u32(cp).filter(|&c| c != '\n') {
                s.push(c);
                continue;
            }
        }
        s.push_str(rng.pick(ATOMS));
    }
    s
}

// ---- chrF written from scratch ----------------------------------------

/// Sentence chrF (n = 6, beta = 2, whitespace removed), counted with
/// nested loops instead of maps.
pub fn naive_chrf(hyp: &str, reference: &str) -> f64 {
    let strip = |s: &str| -> Vec<char> { s.split_whitespace().flat_map(str::chars).collect() };
    let (h, r) = (strip(hyp), strip(reference));
    let grams = |v: &[char], n: usize| -> Vec<String> {
        if v.len() < n {
            Vec::new()
        } else {
            (0..=v.len() - n)
                .map(|i| v[i..i + n].iter().collect())
                .collect()
        }
    };
    let (mut p, mut rc, mut eff) = (0.0, 0.0, 0);
    for n in 1..=6 {
        let hg = grams(&h, n);
        let rg = grams(&r, n);
        if hg.is_empty() || rg.is_empty() {
            continue;
        }
        let mut used = vec![false; rg.len()];
        let mut hits = 0;
        for g in &hg {
            if let Some(j) = (0..rg.len()).find(|&j| !used[j] && &rg[j] == g) {
                used[j] = true;
                hits += 1;
            }
        }
        p += hits as f64 / hg.len() as f64;
        rc += hits as f64 / rg.len() as f64;
        eff += 1;
    }
    if eff == 0 {
        return 0.0;
    }
    let (p, rc) = (p / eff as f64, rc / eff as f64);
    if p + rc == 0.0 {
        return 0.0;
    }
    100.0 * 5.0 * p * rc / (4.0 * p + rc)
}

// ---- toy experiments -------------------------------------------------

const DE: &[&str] = &[
    "der", "die", "und", "nicht", "Haus", "ich", "schön", "Straße", "mit", "ein",
];
const SV: &[&str] = &[
    "och", "inte", "huset", "jag", "vacker", "gata", "med", "en", "där", "här",
];
const FI: &[&str] = &[
    "ja", "ei", "talo", "minä", "kaunis", "katu", "kanssa", "yksi", "tässä", "siellä",
];
const EN: &[&str] = &[
    "the",
    "and",
    "not",
    "house",
    "I",
    "beautiful",
    "street",
    "with",
    "a",
    "here",
];
const SHARED: &[&str] = &["in", "an", "so", "Berlin", "2024", ",", ".", "!"];

fn toy_line(rng: &mut Rng, words: &[&str]) -> String {
    let n = rng.range(1, 9);
    (0..n)
        .map(|_| {
            if rng.chance(0.2) {
                (*rng.pick(SHARED)).to_owned()
            } else if rng.chance(0.3) {
                // compounds keep the vocabularies from saturating
                (0..rng.range(2, 3))
                    .map(|_| *rng.pick(words))
                    .collect::<String>()
            } else {
                (*rng.pick(words)).to_owned()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn toy_lines(rng: &mut Rng, lang: &str, n: usize) -> Vec<String> {
    let words = match lang {
        "de" => DE,
        "sv" => SV,
        "fi" => FI,
        _ => EN,
    };
    (0..n).map(|_| toy_line(rng, words)).collect()
}

fn write(path: &Path, lines: &[String]) {
    vocab_lab::corpus::write_lines(path, lines).unwrap();
}

/// Writes a toy bitext per source-side language and returns a manifest
/// pointing at them with `out` as output directory.
pub fn toy_experiment(
    dir: &Path,
    seed: u64,
    auxiliaries: &[&str],
    lines: usize,
    disjoint: bool,
) -> ExperimentManifest {
    let mut rng = Rng::new(seed);
    let mut corpora = serde_json::Map::new();
    let mut quotas = serde_json::Map::new();
    let mut valid = serde_json::Map::new();
    for lang in std::iter::once("de").chain(auxiliaries.iter().copied()) {
        let src = toy_lines(&mut rng, lang, lines);
        let trg = toy_lines(&mut rng, "en", lines);
        write(&dir.join(format!("{lang}.src")), &src);
        write(&dir.join(format!("{lang}.en")), &trg);
        corpora.insert(
            lang.into(),
            serde_json::json!({"src": format!("{lang}.src"), "trg": format!("{lang}.en")}),
        );
        quotas.insert(lang.into(), (lines * 4 / 5).into());
        valid.insert(lang.into(), (lines / 10).into());
    }
    let json = serde_json::json!({
        "name": "toy",
        "source": "de",
        "auxiliaries": auxiliaries,
        "target": "en",
        "corpora": corpora,
        "default_vocab_size": 300,
        "disjoint": disjoint,
        "mix": {"train_lines": quotas, "valid_lines": valid, "dedup": true},
        "seed": seed,
        "output_dir": "out",
    });
    let mut m = ExperimentManifest::from_json(&json.to_string()).unwrap();
    m.base_dir = dir.to_path_buf();
    m
}

/// Relative path -> file bytes for every file under `root`.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}
