//! CMU pronouncing dictionary parsing and perfect-rhyme lookup.
//!
//! Both the classic 0.7b layout (`CAT  K AE1 T`, `;;;` comments, upper-case headwords) and
//! the current release layout (`cat K AE1 T # note`, lower-case headwords) are accepted.
//! Headwords are case-folded and variant markers such as `READ(1)` are grouped under the
//! base word in file order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::exec::Execution;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("word not in lexicon: {0}")]
    UnknownWord(String),
    #[error("cannot read dictionary {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The 39 ARPABET phonemes used by the CMU dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arpabet {
    AA,
    AE,
    AH,
    AO,
    AW,
    AY,
    B,
    CH,
    D,
    DH,
    EH,
    ER,
    EY,
    F,
    G,
    HH,
    IH,
    IY,
    JH,
    K,
    L,
    M,
    N,
    NG,
    OW,
    OY,
    P,
    R,
    S,
    SH,
    T,
    TH,
    UH,
    UW,
    V,
    W,
    Y,
    Z,
    ZH,
}

impl Arpabet {
    pub const ALL: [Arpabet; 39] = {
        use Arpabet::*;
        [
            AA, AE, AH, AO, AW, AY, B, CH, D, DH, EH, ER, EY, F, G, HH, IH, IY, JH, K, L, M, N, NG, OW, OY, P, R, S,
            SH, T, TH, UH, UW, V, W, Y, Z, ZH,
        ]
    };

    pub fn is_vowel(self) -> bool {
        use Arpabet::*;
        matches!(self, AA | AE | AH | AO | AW | AY | EH | ER | EY | IH | IY | OW | OY | UH | UW)
    }

    pub fn as_str(self) -> &'static str {
        use Arpabet::*;
        match self {
            AA => "AA",
            AE => "AE",
            AH => "AH",
            AO => "AO",
            AW => "AW",
            AY => "AY",
            B => "B",
            CH => "CH",
            D => "D",
            DH => "DH",
            EH => "EH",
            ER => "ER",
            EY => "EY",
            F => "F",
            G => "G",
            HH => "HH",
            IH => "IH",
            IY => "IY",
            JH => "JH",
            K => "K",
            L => "L",
            M => "M",
            N => "N",
            NG => "NG",
            OW => "OW",
            OY => "OY",
            P => "P",
            R => "R",
            S => "S",
            SH => "SH",
            T => "T",
            TH => "TH",
            UH => "UH",
            UW => "UW",
            V => "V",
            W => "W",
            Y => "Y",
            Z => "Z",
            ZH => "ZH",
        }
    }
}

impl FromStr for Arpabet {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Arpabet::ALL.iter().copied().find(|p| p.as_str() == s).ok_or(())
    }
}

/// A phoneme with its lexical stress. Vowels always carry a stress digit, consonants never do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phone {
    symbol: Arpabet,
    stress: Option<u8>,
}

impl Phone {
    pub fn new(symbol: Arpabet, stress: Option<u8>) -> Option<Self> {
        match (symbol.is_vowel(), stress) {
            (true, Some(s)) if s <= 2 => Some(Phone { symbol, stress }),
            (false, None) => Some(Phone { symbol, stress }),
            _ => None,
        }
    }

    pub fn symbol(&self) -> Arpabet {
        self.symbol
    }

    pub fn stress(&self) -> Option<u8> {
        self.stress
    }

    pub fn is_vowel(&self) -> bool {
        self.symbol.is_vowel()
    }
}

impl FromStr for Phone {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (base, stress) = match s.as_bytes().last() {
            Some(d @ b'0'..=b'9') => (&s[..s.len() - 1], Some(d - b'0')),
            _ => (s, None),
        };
        let symbol = base.parse::<Arpabet>().map_err(|_| format!("unknown phoneme symbol `{s}`"))?;
        Phone::new(symbol, stress).ok_or_else(|| match stress {
            None => format!("vowel `{s}` has no stress digit"),
            Some(_) if symbol.is_vowel() => format!("bad stress digit in `{s}`"),
            Some(_) => format!("consonant `{s}` carries a stress digit"),
        })
    }
}

impl fmt::Display for Phone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stress {
            Some(d) => write!(f, "{}{}", self.symbol.as_str(), d),
            None => f.write_str(self.symbol.as_str()),
        }
    }
}

/// A non-empty phone sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pronunciation(Vec<Phone>);

impl Pronunciation {
    pub fn new(phones: Vec<Phone>) -> Option<Self> {
        if phones.is_empty() {
            None
        } else {
            Some(Pronunciation(phones))
        }
    }

    pub fn phones(&self) -> &[Phone] {
        &self.0
    }

    /// Suffix starting at the last primary-stressed vowel, falling back to the last vowel of
    /// any stress, and to the whole pronunciation when there is no vowel.
    pub fn rime(&self) -> &[Phone] {
        let start = self
            .0
            .iter()
            .rposition(|p| p.stress == Some(1))
            .or_else(|| self.0.iter().rposition(Phone::is_vowel))
            .unwrap_or(0);
        &self.0[start..]
    }
}

impl FromStr for Pronunciation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let phones = s.split_whitespace().map(str::parse).collect::<Result<Vec<Phone>, _>>()?;
        Pronunciation::new(phones).ok_or_else(|| "no phones".to_string())
    }
}

impl fmt::Display for Pronunciation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Rime of a pronunciation as an owned value.
pub fn rime_of(p: &Pronunciation) -> Pronunciation {
    Pronunciation(p.rime().to_vec())
}

/// A malformed dictionary line that was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineWarning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Result of parsing a dictionary: the lexicon plus any per-line warnings.
#[derive(Debug, Clone, Default)]
pub struct ParsedLexicon {
    pub lexicon: Lexicon,
    pub warnings: Vec<LineWarning>,
}

/// Case-folded headword to pronunciation variants. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<Pronunciation>>,
}

/// Parses CMU dictionary text. Malformed lines become warnings; empty input gives an empty
/// lexicon.
pub fn parse_cmudict(text: &str) -> ParsedLexicon {
    let mut entries: BTreeMap<String, Vec<Pronunciation>> = BTreeMap::new();
    let mut warnings = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with(";;;") {
            continue;
        }
        // current-release files carry trailing `# ...` annotations
        let line = match line.find(" #") {
            Some(pos) => line[..pos].trim_end(),
            None => line,
        };
        let mut fields = line.split_whitespace();
        let Some(head) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if rest.is_empty() {
            warnings.push(LineWarning { line: line_no, message: format!("entry `{head}` has no phones") });
            continue;
        }
        let phones = match rest.iter().map(|p| p.parse::<Phone>()).collect::<Result<Vec<_>, _>>() {
            Ok(p) => p,
            Err(message) => {
                warnings.push(LineWarning { line: line_no, message: format!("entry `{head}`: {message}") });
                continue;
            }
        };
        let word = base_headword(head).to_lowercase();
        entries.entry(word).or_default().push(Pronunciation(phones));
    }

    ParsedLexicon { lexicon: Lexicon { entries }, warnings }
}

/// Strips a trailing variant marker `(n)`.
fn base_headword(head: &str) -> &str {
    if let Some(open) = head.rfind('(') {
        let tail = &head[open + 1..];
        if open > 0
            && tail.len() >= 2
            && tail.ends_with(')')
            && tail[..tail.len() - 1].bytes().all(|b| b.is_ascii_digit())
        {
            return &head[..open];
        }
    }
    head
}

/// Decodes dictionary bytes as UTF-8, falling back to Latin-1.
pub fn decode_dictionary_bytes(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_owned(),
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

impl Lexicon {
    /// Reads and parses a dictionary file.
    pub fn load(path: impl AsRef<Path>) -> Result<ParsedLexicon, LexiconError> {
        let path = path.as_ref();
        let bytes =
            std::fs::read(path).map_err(|source| LexiconError::Io { path: path.display().to_string(), source })?;
        Ok(parse_cmudict(&decode_dictionary_bytes(&bytes)))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(&word.to_lowercase())
    }

    pub fn pronunciations(&self, word: &str) -> Option<&[Pronunciation]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn lookup(&self, word: &str) -> Result<(String, &[Pronunciation]), LexiconError> {
        let key = word.to_lowercase();
        match self.entries.get(&key) {
            Some(p) => Ok((key, p.as_slice())),
            None => Err(LexiconError::UnknownWord(word.to_string())),
        }
    }

    /// True iff the words differ and some pronunciation pair shares a rime.
    pub fn rhymes(&self, a: &str, b: &str) -> Result<bool, LexiconError> {
        let (ka, pa) = self.lookup(a)?;
        let (kb, pb) = self.lookup(b)?;
        Ok(ka != kb && share_rime(pa, pb))
    }

    /// Up to `limit` rhymes of `word`, sorted lexicographically.
    pub fn find_rhymes(&self, word: &str, limit: usize) -> Result<Vec<String>, LexiconError> {
        self.find_rhymes_with(word, limit, Execution::default())
    }

    pub fn find_rhymes_with(&self, word: &str, limit: usize, exec: Execution) -> Result<Vec<String>, LexiconError> {
        let (key, prons) = self.lookup(word)?;
        if limit == 0 {
            return Ok(Vec::new());
        }
        let matches = |(w, p): (&String, &Vec<Pronunciation>)| (*w != key && share_rime(prons, p)).then(|| w.clone());
        // BTreeMap iteration is sorted, so the sequential path can stop early.
        let mut found: Vec<String> = match exec {
            Execution::Sequential => self.entries.iter().filter_map(matches).take(limit).collect(),
            _ => scan_parallel(&self.entries, matches, exec),
        };
        found.sort();
        found.truncate(limit);
        Ok(found)
    }
}

#[cfg(feature = "parallel")]
fn scan_parallel<F>(entries: &BTreeMap<String, Vec<Pronunciation>>, f: F, exec: Execution) -> Vec<String>
where
    F: Fn((&String, &Vec<Pronunciation>)) -> Option<String> + Sync + Send,
{
    use rayon::prelude::*;
    let run = || entries.par_iter().filter_map(&f).collect::<Vec<_>>();
    match exec {
        Execution::Bounded { max_threads } => rayon::ThreadPoolBuilder::new()
            .num_threads(max_threads.max(1))
            .build()
            .map(|pool| pool.install(run))
            .unwrap_or_else(|_| entries.iter().filter_map(&f).collect()),
        _ => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn scan_parallel<F>(entries: &BTreeMap<String, Vec<Pronunciation>>, f: F, _exec: Execution) -> Vec<String>
where
    F: Fn((&String, &Vec<Pronunciation>)) -> Option<String>,
{
    entries.iter().filter_map(f).collect()
}

fn share_rime(a: &[Pronunciation], b: &[Pronunciation]) -> bool {
    a.iter().any(|pa| b.iter().any(|pb| pa.rime() == pb.rime()))
}
