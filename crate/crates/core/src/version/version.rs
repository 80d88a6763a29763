use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use super::VersionError;

/// Pre-release phase. `alpha`, `beta`, `c`, `pre` and `preview` are
/// accepted on input and normalized to these three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrePhase {
    Alpha,
    Beta,
    Rc,
}

impl PrePhase {
    pub fn as_str(self) -> &'static str {
        match self {
            PrePhase::Alpha => "a",
            PrePhase::Beta => "b",
            PrePhase::Rc => "rc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LocalSegment {
    Number(u64),
    Text(String),
}

impl PartialOrd for LocalSegment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LocalSegment {
    // numeric segments sort above alphanumeric ones
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (LocalSegment::Number(a), LocalSegment::Number(b)) => a.cmp(b),
            (LocalSegment::Text(a), LocalSegment::Text(b)) => a.cmp(b),
            (LocalSegment::Number(_), LocalSegment::Text(_)) => Ordering::Greater,
            (LocalSegment::Text(_), LocalSegment::Number(_)) => Ordering::Less,
        }
    }
}

impl fmt::Display for LocalSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalSegment::Number(n) => write!(f, "{n}"),
            LocalSegment::Text(s) => f.write_str(s),
        }
    }
}

/// A PEP 440 version.
///
/// Equality and ordering follow PEP 440: trailing zeros in the release are
/// insignificant (`1.0 == 1.0.0`), `dev < pre < final < post` within a
/// release, and local labels only break ties.
#[derive(Debug, Clone)]
pub struct Version {
    epoch: u64,
    release: Vec<u64>,
    pre: Option<(PrePhase, u64)>,
    post: Option<u64>,
    dev: Option<u64>,
    local: Option<Vec<LocalSegment>>,
}

impl Version {
    pub fn new(release: impl Into<Vec<u64>>) -> Self {
        let release = release.into();
        assert!(!release.is_empty(), "release must be non-empty");
        Version {
            epoch: 0,
            release,
            pre: None,
            post: None,
            dev: None,
            local: None,
        }
    }

    pub fn with_epoch(mut self, epoch: u64) -> Self {
        self.epoch = epoch;
        self
    }

    pub fn with_pre(mut self, phase: PrePhase, n: u64) -> Self {
        self.pre = Some((phase, n));
        self
    }

    pub fn with_post(mut self, n: u64) -> Self {
        self.post = Some(n);
        self
    }

    pub fn with_dev(mut self, n: u64) -> Self {
        self.dev = Some(n);
        self
    }

    pub fn with_local(mut self, local: Vec<LocalSegment>) -> Self {
        self.local = if local.is_empty() { None } else { Some(local) };
        self
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn release(&self) -> &[u64] {
        &self.release
    }

    pub fn pre(&self) -> Option<(PrePhase, u64)> {
        self.pre
    }

    pub fn post(&self) -> Option<u64> {
        self.post
    }

    pub fn dev(&self) -> Option<u64> {
        self.dev
    }

    pub fn local(&self) -> Option<&[LocalSegment]> {
        self.local.as_deref()
    }

    pub fn is_prerelease(&self) -> bool {
        self.pre.is_some() || self.dev.is_some()
    }

    pub fn is_postrelease(&self) -> bool {
        self.post.is_some()
    }

    pub fn is_devrelease(&self) -> bool {
        self.dev.is_some()
    }

    /// The version without its local label.
    pub fn public(&self) -> Version {
        Version {
            local: None,
            ..self.clone()
        }
    }

    /// Epoch and release only.
    pub fn base(&self) -> Version {
        Version {
            epoch: self.epoch,
            release: self.release.clone(),
            pre: None,
            post: None,
            dev: None,
            local: None,
        }
    }

    pub(crate) fn without_post_dev_local(&self) -> Version {
        Version {
            post: None,
            dev: None,
            local: None,
            ..self.clone()
        }
    }

    pub(crate) fn earliest_prerelease(&self) -> Version {
        Version {
            dev: Some(0),
            local: None,
            ..self.clone()
        }
    }

    fn trimmed_release(&self) -> &[u64] {
        let mut end = self.release.len();
        while end > 1 && self.release[end - 1] == 0 {
            end -= 1;
        }
        &self.release[..end]
    }

    fn cmp_key_pre(&self) -> Bound<(PrePhase, u64)> {
        match (self.pre, self.post, self.dev) {
            (None, None, Some(_)) => Bound::Low,
            (None, _, _) => Bound::High,
            (Some(p), _, _) => Bound::Value(p),
        }
    }

    fn cmp_key_post(&self) -> Bound<u64> {
        self.post.map_or(Bound::Low, Bound::Value)
    }

    fn cmp_key_dev(&self) -> Bound<u64> {
        self.dev.map_or(Bound::High, Bound::Value)
    }

    fn cmp_key_local(&self) -> Bound<&[LocalSegment]> {
        self.local.as_deref().map_or(Bound::Low, Bound::Value)
    }

    /// Parse a version string; see [`parse_version`].
    pub fn parse(text: &str) -> Result<Version, VersionError> {
        parse_version(text)
    }
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Bound<T> {
    Low,
    Value(T),
    High,
}

impl PartialEq for Version {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Version {}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        self.epoch
            .cmp(&other.epoch)
            .then_with(|| compare_release(&self.release, &other.release))
            .then_with(|| self.cmp_key_pre().cmp(&other.cmp_key_pre()))
            .then_with(|| self.cmp_key_post().cmp(&other.cmp_key_post()))
            .then_with(|| self.cmp_key_dev().cmp(&other.cmp_key_dev()))
            .then_with(|| self.cmp_key_local().cmp(&other.cmp_key_local()))
    }
}

impl Hash for Version {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.epoch.hash(state);
        self.trimmed_release().hash(state);
        self.pre.hash(state);
        self.post.hash(state);
        self.dev.hash(state);
        self.local.hash(state);
    }
}

fn compare_release(a: &[u64], b: &[u64]) -> Ordering {
    let len = a.len().max(b.len());
    for i in 0..len {
        let x = a.get(i).copied().unwrap_or(0);
        let y = b.get(i).copied().unwrap_or(0);
        match x.cmp(&y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.epoch != 0 {
            write!(f, "{}!", self.epoch)?;
        }
        for (i, part) in self.release.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{part}")?;
        }
        if let Some((phase, n)) = self.pre {
            write!(f, "{}{n}", phase.as_str())?;
        }
        if let Some(n) = self.post {
            write!(f, ".post{n}")?;
        }
        if let Some(n) = self.dev {
            write!(f, ".dev{n}")?;
        }
        if let Some(local) = &self.local {
            f.write_str("+")?;
            for (i, seg) in local.iter().enumerate() {
                if i > 0 {
                    f.write_str(".")?;
                }
                write!(f, "{seg}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Version {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_version(s)
    }
}

impl serde::Serialize for Version {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Version {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_version(&s).map_err(serde::de::Error::custom)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_separator(&mut self) -> bool {
        match self.peek() {
            Some(b'.' | b'-' | b'_') => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if self.bytes[self.pos..].starts_with(word.as_bytes()) {
            self.pos += word.len();
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Option<Result<u64, ()>> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
        Some(digits.parse::<u64>().map_err(|_| ()))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

/// Parse a PEP 440 version, normalizing case, a leading `v`, alternate
/// spellings of the pre/post/dev labels, separators and zero padding.
pub fn parse_version(text: &str) -> Result<Version, VersionError> {
    let malformed = || VersionError::Malformed(text.to_string());
    let lowered = text.trim().to_ascii_lowercase();
    let mut cur = Cursor {
        bytes: lowered.as_bytes(),
        pos: 0,
    };
    cur.eat(b'v');

    let first = cur.number().ok_or_else(malformed)?.map_err(|_| malformed())?;
    let mut epoch = 0;
    let mut release = vec![first];
    if cur.eat(b'!') {
        epoch = first;
        release.clear();
        release.push(cur.number().ok_or_else(malformed)?.map_err(|_| malformed())?);
    }
    loop {
        let save = cur.pos;
        if cur.eat(b'.') {
            if let Some(n) = cur.number() {
                release.push(n.map_err(|_| malformed())?);
                continue;
            }
        }
        cur.pos = save;
        break;
    }

    let pre = parse_pre(&mut cur).map_err(|_| malformed())?;
    let post = parse_post(&mut cur).map_err(|_| malformed())?;
    let dev = parse_dev(&mut cur).map_err(|_| malformed())?;
    let local = if cur.eat(b'+') {
        Some(parse_local(&mut cur).ok_or_else(malformed)?)
    } else {
        None
    };
    if !cur.done() {
        return Err(malformed());
    }
    Ok(Version {
        epoch,
        release,
        pre,
        post,
        dev,
        local,
    })
}

fn optional_number(cur: &mut Cursor<'_>) -> Result<u64, ()> {
    let save = cur.pos;
    cur.eat_separator();
    match cur.number() {
        Some(n) => n,
        None => {
            cur.pos = save;
            Ok(0)
        }
    }
}

fn parse_pre(cur: &mut Cursor<'_>) -> Result<Option<(PrePhase, u64)>, ()> {
    let save = cur.pos;
    cur.eat_separator();
    // longer spellings first so "preview" is not read as "pre" + "view"
    let labels = [
        ("alpha", PrePhase::Alpha),
        ("beta", PrePhase::Beta),
        ("preview", PrePhase::Rc),
        ("pre", PrePhase::Rc),
        ("rc", PrePhase::Rc),
        ("a", PrePhase::Alpha),
        ("b", PrePhase::Beta),
        ("c", PrePhase::Rc),
    ];
    for (word, phase) in labels {
        if cur.eat_word(word) {
            let n = optional_number(cur)?;
            return Ok(Some((phase, n)));
        }
    }
    cur.pos = save;
    Ok(None)
}

fn parse_post(cur: &mut Cursor<'_>) -> Result<Option<u64>, ()> {
    let save = cur.pos;
    if cur.eat(b'-') {
        if let Some(n) = cur.number() {
            return n.map(Some);
        }
        cur.pos = save;
    }
    cur.eat_separator();
    for word in ["post", "rev", "r"] {
        if cur.eat_word(word) {
            return optional_number(cur).map(Some);
        }
    }
    cur.pos = save;
    Ok(None)
}

fn parse_dev(cur: &mut Cursor<'_>) -> Result<Option<u64>, ()> {
    let save = cur.pos;
    cur.eat_separator();
    if cur.eat_word("dev") {
        return optional_number(cur).map(Some);
    }
    cur.pos = save;
    Ok(None)
}

fn parse_local(cur: &mut Cursor<'_>) -> Option<Vec<LocalSegment>> {
    let mut segments = Vec::new();
    loop {
        let start = cur.pos;
        while matches!(cur.peek(), Some(b'a'..=b'z' | b'0'..=b'9')) {
            cur.pos += 1;
        }
        if start == cur.pos {
            return None;
        }
        let text = std::str::from_utf8(&cur.bytes[start..cur.pos]).ok()?;
        let segment = if text.bytes().all(|b| b.is_ascii_digit()) {
            LocalSegment::Number(text.parse().ok()?)
        } else {
            LocalSegment::Text(text.to_string())
        };
        segments.push(segment);
        if !cur.eat_separator() {
            break;
        }
    }
    Some(segments)
}

/// Total PEP 440 ordering.
pub fn compare(a: &Version, b: &Version) -> Ordering {
    a.cmp(b)
}
