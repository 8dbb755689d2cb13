use std::collections::HashMap;

use super::pretokenize::{normalize, segments, Segment};
use super::{
    byte_piece, parse_byte_piece, BpeError, Normalization, Result, SPECIAL_PIECES, UNK_PIECE,
    WHITESPACE_MARKER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PieceKind {
    Special,
    Byte,
    Char,
    Merged,
}

impl PieceKind {
    pub(crate) fn as_str(self) -> &'static str {
        match self {
            PieceKind::Special => "special",
            PieceKind::Byte => "byte",
            PieceKind::Char => "char",
            PieceKind::Merged => "merged",
        }
    }

    pub(crate) fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "special" => PieceKind::Special,
            "byte" => PieceKind::Byte,
            "char" => PieceKind::Char,
            "merged" => PieceKind::Merged,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub text: String,
    pub kind: PieceKind,
}

/// A merge rule; its rank is its index in [`BpeModel::merges`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Merge {
    pub left: String,
    pub right: String,
}

/// A trained BPE model. Immutable once built.
#[derive(Debug, Clone)]
pub struct BpeModel {
    pieces: Vec<Piece>,
    merges: Vec<Merge>,
    target_vocab_size: usize,
    byte_fallback: bool,
    normalization: Normalization,
    piece_ids: HashMap<String, u32>,
    /// (left id, right id) -> (rank, merged id)
    merge_table: HashMap<(u32, u32), (u32, u32)>,
    byte_base: Option<u32>,
    unk_id: u32,
}

impl PartialEq for BpeModel {
    fn eq(&self, other: &Self) -> bool {
        self.pieces == other.pieces
            && self.merges == other.merges
            && self.target_vocab_size == other.target_vocab_size
            && self.byte_fallback == other.byte_fallback
            && self.normalization == other.normalization
    }
}

impl Eq for BpeModel {}

enum Sym {
    Known(u32),
    Unknown(char),
}

impl BpeModel {
    /// Assembles a model from its parts and checks every structural
    /// invariant: specials first, all 256 byte pieces when byte fallback is
    /// on, merged pieces backed by a merge, unique pieces, size bound.
    pub fn from_parts(
        pieces: Vec<Piece>,
        merges: Vec<Merge>,
        target_vocab_size: usize,
        byte_fallback: bool,
        normalization: Normalization,
    ) -> Result<Self> {
        let invalid = |m: String| Err(BpeError::InvalidModel(m));
        if pieces.len() > target_vocab_size {
            return invalid(format!(
                "{} pieces exceed target size {target_vocab_size}",
                pieces.len()
            ));
        }
        let mut piece_ids = HashMap::with_capacity(pieces.len());
        for (i, p) in pieces.iter().enumerate() {
            if p.text.is_empty() || p.text.chars().any(char::is_whitespace) {
                return invalid(format!("piece {i} is empty or contains whitespace"));
            }
            if piece_ids.insert(p.text.clone(), i as u32).is_some() {
                return invalid(format!("duplicate piece {:?}", p.text));
            }
        }
        for (i, s) in SPECIAL_PIECES.iter().enumerate() {
            match pieces.get(i) {
                Some(p) if p.text == *s && p.kind == PieceKind::Special => {}
                _ => return invalid(format!("special piece {s} must have id {i}")),
            }
        }
        let specials = SPECIAL_PIECES.len();
        let byte_base = if byte_fallback {
            for b in 0..=255u8 {
                match pieces.get(specials + b as usize) {
                    Some(p) if p.kind == PieceKind::Byte && p.text == byte_piece(b) => {}
                    _ => return invalid(format!("byte piece {} missing", byte_piece(b))),
                }
            }
            Some(specials as u32)
        } else {
            None
        };
        for p in &pieces {
            match p.kind {
                PieceKind::Special if !SPECIAL_PIECES.contains(&p.text.as_str()) => {
                    return invalid(format!("unexpected special {:?}", p.text));
                }
                PieceKind::Byte if !byte_fallback || parse_byte_piece(&p.text).is_none() => {
                    return invalid(format!("unexpected byte piece {:?}", p.text));
                }
                PieceKind::Char if p.text.chars().count() != 1 => {
                    return invalid(format!("char piece {:?} is not one character", p.text));
                }
                PieceKind::Char | PieceKind::Merged
                    if p.text.contains(WHITESPACE_MARKER)
                        && !p.text.starts_with(WHITESPACE_MARKER) =>
                {
                    return invalid(format!("marker inside piece {:?}", p.text));
                }
                _ => {}
            }
        }

        let mut merge_table = HashMap::with_capacity(merges.len());
        let mut merged_texts = std::collections::HashSet::new();
        for (rank, m) in merges.iter().enumerate() {
            let lookup = |s: &str| -> Result<u32> {
                match piece_ids.get(s) {
                    Some(&id)
                        if matches!(
                            pieces[id as usize].kind,
                            PieceKind::Char | PieceKind::Merged
                        ) =>
                    {
                        Ok(id)
                    }
                    _ => Err(BpeError::InvalidModel(format!(
                        "merge {rank} references {s:?}, which is not a char or merged piece"
                    ))),
                }
            };
            let l = lookup(&m.left)?;
            let r = lookup(&m.right)?;
            let joined = format!("{}{}", m.left, m.right);
            let out = match piece_ids.get(&joined) {
                Some(&id) if pieces[id as usize].kind == PieceKind::Merged => id,
                _ => {
                    return invalid(format!(
                        "merge {rank} result {joined:?} is not a merged piece"
                    ))
                }
            };
            if merge_table.insert((l, r), (rank as u32, out)).is_some() {
                return invalid(format!("merge {rank} duplicates an earlier rule"));
            }
            merged_texts.insert(joined);
        }
        for p in &pieces {
            if p.kind == PieceKind::Merged && !merged_texts.contains(&p.text) {
                return invalid(format!("merged piece {:?} has no merge rule", p.text));
            }
        }

        let unk_id = piece_ids[UNK_PIECE];
        Ok(Self {
            pieces,
            merges,
            target_vocab_size,
            byte_fallback,
            normalization,
            piece_ids,
            merge_table,
            byte_base,
            unk_id,
        })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn target_vocab_size(&self) -> usize {
        self.target_vocab_size
    }

    pub fn byte_fallback(&self) -> bool {
        self.byte_fallback
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn piece_id(&self, piece: &str) -> Option<u32> {
        self.piece_ids.get(piece).copied()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.piece_ids.contains_key(piece)
    }

    /// Encodes a line into piece strings.
    pub fn encode(&self, line: &str) -> Vec<String> {
        self.encode_ids(line)
            .into_iter()
            .map(|id| self.pieces[id as usize].text.clone())
            .collect()
    }

    /// Encodes a line into piece ids.
    pub fn encode_ids(&self, line: &str) -> Vec<u32> {
        let line = normalize(line, self.normalization);
        let mut out = Vec::new();
        for seg in segments(&line) {
            match seg {
                Segment::Raw(c) => self.push_unknown(c, &mut out),
                Segment::Word(chars) => self.encode_word(&chars, &mut out),
            }
        }
        out
    }

    fn push_unknown(&self, c: char, out: &mut Vec<u32>) {
        match self.byte_base {
            Some(base) => {
                let mut buf = [0u8; 4];
                for b in c.encode_utf8(&mut buf).bytes() {
                    out.push(base + b as u32);
                }
            }
            None => out.push(self.unk_id),
        }
    }

    fn encode_word(&self, chars: &[char], out: &mut Vec<u32>) {
        let mut buf = [0u8; 4];
        let mut syms: Vec<Sym> = chars
            .iter()
            .map(|&c| match self.piece_ids.get(&*c.encode_utf8(&mut buf)) {
                Some(&id) if self.pieces[id as usize].kind == PieceKind::Char => Sym::Known(id),
                _ => Sym::Unknown(c),
            })
            .collect();

        loop {
            let mut best: Option<(u32, u32, u32, u32)> = None; // rank, left, right, merged
            for w in syms.windows(2) {
                if let [Sym::Known(l), Sym::Known(r)] = w {
                    if let Some(&(rank, merged)) = self.merge_table.get(&(*l, *r)) {
                        if best.is_none_or(|b| rank < b.0) {
                            best = Some((rank, *l, *r, merged));
                        }
                    }
                }
            }
            let Some((_, l, r, merged)) = best else { break };
            let mut next = Vec::with_capacity(syms.len());
            let mut it = syms.into_iter().peekable();
            while let Some(s) = it.next() {
                if matches!(s, Sym::Known(id) if id == l)
                    && matches!(it.peek(), Some(Sym::Known(id)) if *id == r)
                {
                    it.next();
                    next.push(Sym::Known(merged));
                } else {
                    next.push(s);
                }
            }
            syms = next;
        }

        for s in syms {
            match s {
                Sym::Known(id) => out.push(id),
                // an unrepresentable marker still stands for a space
                Sym::Unknown(WHITESPACE_MARKER) => self.push_unknown(' ', out),
                Sym::Unknown(c) => self.push_unknown(c, out),
            }
        }
    }

    /// Decodes pieces back to text: markers become spaces, byte pieces are
    /// emitted as raw bytes, and the single leading space added by the
    /// encoder is stripped. `<unk>` decodes to U+2047, `<s>`/`</s>` to
    /// nothing.
    pub fn decode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<String> {
        let mut bytes: Vec<u8> = Vec::new();
        for t in tokens {
            let t = t.as_ref();
            let id = self
                .piece_id(t)
                .ok_or_else(|| BpeError::UnknownToken(t.to_owned()))?;
            let piece = &self.pieces[id as usize];
            match piece.kind {
                PieceKind::Byte => bytes.push(parse_byte_piece(t).expect("validated byte piece")),
                PieceKind::Special => {
                    if t == UNK_PIECE {
                        bytes.extend_from_slice("\u{2047}".as_bytes());
                    }
                }
                PieceKind::Char | PieceKind::Merged => {
                    for c in t.chars() {
                        let c = if c == WHITESPACE_MARKER { ' ' } else { c };
                        let mut buf = [0u8; 4];
                        bytes.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
                    }
                }
            }
        }
        let text = String::from_utf8(bytes).map_err(|_| BpeError::InvalidUtf8)?;
        Ok(match text.strip_prefix(' ') {
            Some(rest) => rest.to_owned(),
            None => text,
        })
    }
}
