//! Residue sets over a prime modulus, affine maps, and the set file format.
//!
//! A [`ResidueSet`] is immutable once built. Its canonical storage is a
//! bit-vector of length `q` packed into 64-bit words; the sorted element list
//! is kept alongside as a derived view so iteration stays cheap.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prime::is_prime;

/// Exclusive upper bound on supported moduli. Keeps bit-vectors addressable
/// and every ordered triple count (at most q^2) inside a `u64`.
pub const MAX_MODULUS: u64 = 1 << 32;

/// Rejects anything that is not an odd prime below [`MAX_MODULUS`].
pub fn check_modulus(q: u64) -> Result<()> {
    if q >= MAX_MODULUS {
        return Err(Error::ModulusTooLarge { q });
    }
    if q < 3 || q % 2 == 0 || !is_prime(q) {
        return Err(Error::NotPrime { q });
    }
    Ok(())
}

/// Least non-negative residue of `a` modulo `q`.
#[inline]
pub fn reduce(a: i64, q: u64) -> u64 {
    (a as i128).rem_euclid(q as i128) as u64
}

/// Least absolute residue of `a` modulo `q`, in `(-q/2, q/2]`.
#[inline]
pub fn centered(a: u64, q: u64) -> i64 {
    let a = a % q;
    if a > q / 2 {
        a as i64 - q as i64
    } else {
        a as i64
    }
}

pub fn mod_inverse(a: i64, q: u64) -> Result<u64> {
    let r = reduce(a, q);
    if r == 0 {
        return Err(Error::NoInverse { a, q });
    }
    let (mut old_r, mut cur_r) = (r as i128, q as i128);
    let (mut old_s, mut cur_s) = (1i128, 0i128);
    while cur_r != 0 {
        let quot = old_r / cur_r;
        (old_r, cur_r) = (cur_r, old_r - quot * cur_r);
        (old_s, cur_s) = (cur_s, old_s - quot * cur_s);
    }
    if old_r != 1 {
        return Err(Error::NoInverse { a, q });
    }
    Ok(old_s.rem_euclid(q as i128) as u64)
}

/// SplitMix64 finalizer; used to derive independent per-worker seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ResidueSet {
    q: u64,
    words: Vec<u64>,
    elements: Vec<u64>,
}

impl std::fmt::Debug for ResidueSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ResidueSet(q={}, {:?})", self.q, self.elements)
    }
}

impl ResidueSet {
    /// Builds a set from elements in any order. Duplicates and values
    /// outside `[0, q)` are rejected.
    pub fn new(q: u64, elements: impl IntoIterator<Item = u64>) -> Result<Self> {
        check_modulus(q)?;
        let mut words = vec![0u64; word_count(q)];
        for value in elements {
            if value >= q {
                return Err(Error::ElementOutOfRange { value, q });
            }
            let (w, bit) = (value as usize / 64, 1u64 << (value % 64));
            if words[w] & bit != 0 {
                return Err(Error::DuplicateElement { value });
            }
            words[w] |= bit;
        }
        Ok(Self::from_words(q, words))
    }

    pub fn empty(q: u64) -> Result<Self> {
        Self::new(q, std::iter::empty())
    }

    pub fn full(q: u64) -> Result<Self> {
        Self::new(q, 0..q)
    }

    /// `{start, start+1, ..., start+len-1}` reduced modulo `q`.
    pub fn interval(q: u64, start: u64, len: u64) -> Result<Self> {
        if len > q {
            return Err(Error::Cardinality { m: len, q });
        }
        Self::new(q, (0..len).map(|i| (start + i) % q))
    }

    /// Keeps one representative per residue; used when collapsing multisets.
    pub fn from_residues(q: u64, values: impl IntoIterator<Item = u64>) -> Result<Self> {
        check_modulus(q)?;
        let mut words = vec![0u64; word_count(q)];
        for v in values {
            let v = v % q;
            words[v as usize / 64] |= 1u64 << (v % 64);
        }
        Ok(Self::from_words(q, words))
    }

    pub(crate) fn from_words(q: u64, words: Vec<u64>) -> Self {
        let mut elements = Vec::with_capacity(words.iter().map(|w| w.count_ones() as usize).sum());
        for (i, &w) in words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                elements.push(i as u64 * 64 + w.trailing_zeros() as u64);
                w &= w - 1;
            }
        }
        ResidueSet { q, words, elements }
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn density(&self) -> f64 {
        self.elements.len() as f64 / self.q as f64
    }

    /// Sorted ascending.
    #[inline]
    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn contains(&self, x: u64) -> bool {
        x < self.q && self.words[x as usize / 64] & (1u64 << (x % 64)) != 0
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.elements.iter().copied()
    }

    pub fn is_subset(&self, other: &ResidueSet) -> bool {
        self.q == other.q
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }

    /// 64 bits of the cyclic bit-vector starting at position `start`.
    fn window(&self, start: u64) -> u64 {
        let q = self.q;
        if start + 64 <= q {
            let (w, off) = (start as usize / 64, start % 64);
            let lo = self.words[w] >> off;
            let hi = if off > 0 && w + 1 < self.words.len() {
                self.words[w + 1] << (64 - off)
            } else {
                0
            };
            lo | hi
        } else {
            let mut out = 0u64;
            for t in 0..64 {
                if self.contains((start + t) % q) {
                    out |= 1 << t;
                }
            }
            out
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("set serialization cannot fail")
    }

    /// Parses the set file format `{"q": <int>, "elements": [<int>, ...]}`.
    /// Elements must be strictly ascending. Errors carry the offending field
    /// and its line/column in `text`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SetFile = serde_json::from_str(text).map_err(|e| Error::SetFile {
            field: "<document>".into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let at = |field: String, index: Option<usize>, message: String| {
            let (line, column) = locate_field(text, index);
            Error::SetFile {
                field,
                line,
                column,
                message,
            }
        };
        if let Err(e) = check_modulus(file.q) {
            return Err(at("q".into(), None, e.to_string()));
        }
        for (i, &v) in file.elements.iter().enumerate() {
            if v >= file.q {
                return Err(at(
                    format!("elements[{i}]"),
                    Some(i),
                    format!("{v} is not in [0, {})", file.q),
                ));
            }
            if i > 0 && file.elements[i - 1] >= v {
                return Err(at(
                    format!("elements[{i}]"),
                    Some(i),
                    format!(
                        "{v} does not exceed previous element {}",
                        file.elements[i - 1]
                    ),
                ));
            }
        }
        ResidueSet::new(file.q, file.elements)
    }
}

fn word_count(q: u64) -> usize {
    q.div_ceil(64) as usize
}

/// Line/column (1-based) of `"q"` or of the `index`-th entry of `"elements"`.
fn locate_field(text: &str, index: Option<usize>) -> (usize, usize) {
    let key = if index.is_some() {
        "\"elements\""
    } else {
        "\"q\""
    };
    let Some(key_at) = text.find(key) else {
        return (1, 1);
    };
    let mut offset = key_at;
    if let Some(i) = index {
        let Some(open) = text[key_at..].find('[') else {
            return line_col(text, key_at);
        };
        let mut pos = key_at + open + 1;
        let mut seen = 0usize;
        let bytes = text.as_bytes();
        offset = pos;
        while pos < bytes.len() {
            if bytes[pos].is_ascii_digit() || bytes[pos] == b'-' {
                if seen == i {
                    offset = pos;
                    break;
                }
                while pos < bytes.len()
                    && (bytes[pos].is_ascii_alphanumeric()
                        || bytes[pos] == b'.'
                        || bytes[pos] == b'-')
                {
                    pos += 1;
                }
                seen += 1;
                continue;
            }
            if bytes[pos] == b']' {
                break;
            }
            pos += 1;
        }
    }
    line_col(text, offset)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = offset - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetFile {
    q: u64,
    elements: Vec<u64>,
}

impl Serialize for ResidueSet {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("ResidueSet", 2)?;
        st.serialize_field("q", &self.q)?;
        st.serialize_field("elements", &self.elements)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for ResidueSet {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let file = SetFile::deserialize(deserializer)?;
        if file.elements.windows(2).any(|w| w[0] >= w[1]) {
            return Err(serde::de::Error::custom(
                "elements must be strictly ascending",
            ));
        }
        ResidueSet::new(file.q, file.elements).map_err(serde::de::Error::custom)
    }
}

/// The map `x -> scale * x + offset (mod q)` with `scale` a unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineMap {
    scale: u64,
    offset: u64,
    q: u64,
}

impl AffineMap {
    pub fn new(scale: i64, offset: i64, q: u64) -> Result<Self> {
        check_modulus(q)?;
        let s = reduce(scale, q);
        if s == 0 {
            return Err(Error::InvalidMap { scale, q });
        }
        Ok(AffineMap {
            scale: s,
            offset: reduce(offset, q),
            q,
        })
    }

    pub fn identity(q: u64) -> Result<Self> {
        Self::new(1, 0, q)
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn apply(&self, x: u64) -> u64 {
        ((self.scale as u128 * x as u128 + self.offset as u128) % self.q as u128) as u64
    }

    pub fn inverse(&self) -> AffineMap {
        let inv = mod_inverse(self.scale as i64, self.q).expect("scale is a unit");
        let off = (self.q as u128 - (inv as u128 * self.offset as u128) % self.q as u128)
            % self.q as u128;
        AffineMap {
            scale: inv,
            offset: off as u64,
            q: self.q,
        }
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        let q = self.q as u128;
        AffineMap {
            scale: (self.scale as u128 * inner.scale as u128 % q) as u64,
            offset: ((self.scale as u128 * inner.offset as u128 + self.offset as u128) % q) as u64,
            q: self.q,
        }
    }
}

pub fn affine_apply(set: &ResidueSet, map: &AffineMap) -> Result<ResidueSet> {
    if set.q != map.q {
        return Err(Error::ModulusMismatch {
            left: set.q,
            right: map.q,
        });
    }
    let mut words = vec![0u64; set.words.len()];
    for x in set.iter() {
        let y = map.apply(x);
        words[y as usize / 64] |= 1u64 << (y % 64);
    }
    Ok(ResidueSet::from_words(set.q, words))
}

/// `|S ∩ (S + b)|`, computed word-wise on the bit-vector.
pub fn shift_intersection(set: &ResidueSet, b: i64) -> u64 {
    let q = set.q;
    let b = reduce(b, q);
    if b == 0 {
        return set.len() as u64;
    }
    let mut total = 0u64;
    for (i, &w) in set.words.iter().enumerate() {
        if w == 0 {
            continue;
        }
        let start = (i as u64 * 64 + q - b) % q;
        total += (w & set.window(start)).count_ones() as u64;
    }
    total
}

/// Uniform `m`-subset of `Z/qZ`, a pure function of `(q, m, seed)`.
pub fn random_set(q: u64, m: u64, seed: u64) -> Result<ResidueSet> {
    check_modulus(q)?;
    if m > q {
        return Err(Error::Cardinality { m, q });
    }
    let mut rng = rng_from_seed(seed);
    let picked = index::sample(&mut rng, q as usize, m as usize);
    ResidueSet::new(q, picked.into_iter().map(|i| i as u64))
}
