//! Deterministic keyed primitives: the per-SP fingerprint string and the
//! five pseudorandom selection channels shared by insertion and extraction.
//!
//! Both constructions are byte-level normative so that independent
//! implementations produce identical fingerprints and selections:
//!
//! * fingerprint: `MD5(key ∥ '|' ∥ decimal(sp_id))`, 128 bits, most
//!   significant bit of byte 0 first;
//! * channel i: first 8 bytes, big-endian, of
//!   `MD5(decimal(i) ∥ '|' ∥ key ∥ '|' ∥ parts joined by '|')`.

/// Fingerprint length in bits.
pub const FINGERPRINT_BITS: usize = 128;

/// The database owner's secret key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey(Vec<u8>);

impl SecretKey {
    pub fn new(key: impl Into<Vec<u8>>) -> Option<Self> {
        let bytes = key.into();
        (!bytes.is_empty()).then_some(SecretKey(bytes))
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }
}

/// One of the five selection channels U1..U5.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionChannel(u8);

impl SelectionChannel {
    pub const ROW: SelectionChannel = SelectionChannel(1);
    pub const CELL: SelectionChannel = SelectionChannel(2);
    pub const MASK_BIT: SelectionChannel = SelectionChannel(3);
    pub const FINGERPRINT_INDEX: SelectionChannel = SelectionChannel(4);
    pub const BIT_POSITION: SelectionChannel = SelectionChannel(5);

    pub fn new(index: u8) -> Option<Self> {
        (1..=5).contains(&index).then_some(SelectionChannel(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }
}

/// A 128-bit per-SP fingerprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    digest: [u8; 16],
    sp_id: u64,
}

impl Fingerprint {
    pub fn sp_id(&self) -> u64 {
        self.sp_id
    }

    /// Bit `l` (0-based), most significant bit of byte 0 first.
    pub fn bit(&self, l: usize) -> u8 {
        debug_assert!(l < FINGERPRINT_BITS);
        (self.digest[l / 8] >> (7 - (l % 8))) & 1
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..FINGERPRINT_BITS).map(|l| self.bit(l)).collect()
    }

    /// 32 lowercase hex characters.
    pub fn to_hex(&self) -> String {
        self.digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(hex: &str, sp_id: u64) -> Option<Self> {
        if hex.len() != 32 {
            return None;
        }
        let mut digest = [0u8; 16];
        for (i, byte) in digest.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).ok()?;
        }
        Some(Fingerprint { digest, sp_id })
    }

    /// Hamming distance to another fingerprint.
    pub fn differing_bits(&self, other: &Fingerprint) -> usize {
        self.digest
            .iter()
            .zip(&other.digest)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

/// `Hash(K|n)`: the fingerprint customized for SP `sp_id`.
pub fn gen_fingerprint(key: &SecretKey, sp_id: u64) -> Fingerprint {
    let mut buf = Vec::with_capacity(key.bytes().len() + 24);
    buf.extend_from_slice(key.bytes());
    buf.push(b'|');
    buf.extend_from_slice(sp_id.to_string().as_bytes());
    Fingerprint {
        digest: md5::compute(&buf).0,
        sp_id,
    }
}

/// Channel output for the given key and message parts: the first 8 bytes of
/// the channel-prefixed MD5 digest, read big-endian.
pub fn u_select(channel: SelectionChannel, key: &SecretKey, parts: &[&[u8]]) -> u64 {
    debug_assert!(!parts.is_empty());
    let mut buf = Vec::with_capacity(key.bytes().len() + 16 + parts.iter().map(|p| p.len() + 1).sum::<usize>());
    buf.extend_from_slice(channel.index().to_string().as_bytes());
    buf.push(b'|');
    buf.extend_from_slice(key.bytes());
    for part in parts {
        buf.push(b'|');
        buf.extend_from_slice(part);
    }
    let digest = md5::compute(&buf).0;
    u64::from_be_bytes(digest[..8].try_into().unwrap())
}
