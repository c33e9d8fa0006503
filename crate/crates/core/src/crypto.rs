//! Keyed and unkeyed hash primitives plus document encryption.
//!
//! Every multi-part input is framed with [`SEPARATOR`] between parts so that
//! e.g. path `"0"` + `"01"` and `"00"` + `"1"` never hash alike.

use std::fmt;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256, Sha512};

use crate::error::{Error, Result};

/// Byte placed between framed parts of a hash or PRF input.
pub const SEPARATOR: u8 = 0x1F;

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
/// Bytes a ciphertext body carries beyond its plaintext.
pub const CIPHERTEXT_OVERHEAD: usize = NONCE_LEN + TAG_LEN;

/// PRF domain tags.
pub mod tag {
    pub const INDEX: &str = "idx";
    pub const DIGEST: &str = "dig";
    pub const TOKEN: &str = "tok";
    pub const ENCRYPTION: &str = "enc";
}

type HmacSha256 = Hmac<Sha256>;

/// The owner's 256-bit secret.
#[derive(Clone, PartialEq, Eq)]
pub struct MasterKey([u8; 32]);

impl MasterKey {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn from_hex(text: &str) -> Result<Self> {
        decode_hex32(text)
            .map(Self)
            .ok_or_else(|| Error::Config("master key must be 64 hex characters".into()))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for MasterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MasterKey(..)")
    }
}

/// A 32-byte PRF or hash output. Fixed width so XOR chaining is well defined.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrfOutput(pub [u8; 32]);

impl PrfOutput {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn xor(&self, other: &PrfOutput) -> PrfOutput {
        let mut out = [0u8; 32];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            *o = a ^ b;
        }
        PrfOutput(out)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(text: &str) -> Option<Self> {
        decode_hex32(text).map(Self)
    }
}

impl fmt::Debug for PrfOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrfOutput({})", &self.to_hex()[..16])
    }
}

impl TryFrom<&[u8]> for PrfOutput {
    type Error = Error;

    fn try_from(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; 32] = bytes.try_into().map_err(|_| {
            Error::ContractViolation(format!("expected 32 bytes, got {}", bytes.len()))
        })?;
        Ok(Self(arr))
    }
}

fn decode_hex32(text: &str) -> Option<[u8; 32]> {
    let bytes = hex::decode(text.trim()).ok()?;
    bytes.try_into().ok()
}

/// Joins parts with [`SEPARATOR`].
pub fn frame(parts: &[&[u8]]) -> Vec<u8> {
    let len = parts.iter().map(|p| p.len() + 1).sum::<usize>();
    let mut out = Vec::with_capacity(len);
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            out.push(SEPARATOR);
        }
        out.extend_from_slice(part);
    }
    out
}

/// `F_K`: HMAC-SHA256 over `tag || SEPARATOR || message`.
pub fn prf(key: &MasterKey, domain_tag: &str, message: &[u8]) -> PrfOutput {
    let mut mac = <HmacSha256 as Mac>::new_from_slice(&key.0).expect("HMAC accepts any key length");
    mac.update(domain_tag.as_bytes());
    mac.update(&[SEPARATOR]);
    mac.update(message);
    PrfOutput(mac.finalize().into_bytes().into())
}

/// `H_1`: SHA-512, used for index entry keys.
pub fn hash_h1(message: &[u8]) -> [u8; 64] {
    Sha512::digest(message).into()
}

fn prefixed_sha256(prefix: u8, input: &[u8]) -> Result<PrfOutput> {
    if input.len() != 32 {
        return Err(Error::ContractViolation(format!(
            "chain hash input must be 32 bytes, got {}",
            input.len()
        )));
    }
    let mut hasher = Sha256::new();
    hasher.update([prefix]);
    hasher.update(input);
    Ok(PrfOutput(hasher.finalize().into()))
}

/// `H_2`: chain-record lookup key.
pub fn hash_h2(t: &[u8]) -> Result<PrfOutput> {
    prefixed_sha256(0x02, t)
}

/// `H_3`: chain-record payload mask.
pub fn hash_h3(t: &[u8]) -> Result<PrfOutput> {
    prefixed_sha256(0x03, t)
}

pub(crate) fn chain_lookup(t: &PrfOutput) -> PrfOutput {
    hash_h2(&t.0).expect("PrfOutput is 32 bytes")
}

pub(crate) fn chain_mask(t: &PrfOutput) -> PrfOutput {
    hash_h3(&t.0).expect("PrfOutput is 32 bytes")
}

/// An encrypted document: `body = nonce || AES-256-GCM(plaintext)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Ciphertext {
    pub doc_id: u64,
    pub body: Vec<u8>,
}

fn data_cipher(key: &MasterKey) -> Aes256Gcm {
    let data_key = prf(key, tag::ENCRYPTION, b"document-data-key");
    Aes256Gcm::new_from_slice(&data_key.0).expect("32-byte key")
}

pub fn encrypt_doc<R: RngCore + CryptoRng>(
    key: &MasterKey,
    doc_id: u64,
    plaintext: &[u8],
    rng: &mut R,
) -> Result<Ciphertext> {
    if plaintext.is_empty() {
        return Err(Error::EmptyPlaintext);
    }
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let aad = doc_id.to_be_bytes();
    let sealed = data_cipher(key)
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: plaintext,
                aad: &aad,
            },
        )
        .expect("AES-GCM encryption of in-memory data cannot fail");
    let mut body = Vec::with_capacity(NONCE_LEN + sealed.len());
    body.extend_from_slice(&nonce);
    body.extend_from_slice(&sealed);
    Ok(Ciphertext { doc_id, body })
}

pub fn decrypt_doc(key: &MasterKey, ciphertext: &Ciphertext) -> Result<Vec<u8>> {
    if ciphertext.body.len() < CIPHERTEXT_OVERHEAD {
        return Err(Error::Decryption(ciphertext.doc_id));
    }
    let (nonce, sealed) = ciphertext.body.split_at(NONCE_LEN);
    let aad = ciphertext.doc_id.to_be_bytes();
    data_cipher(key)
        .decrypt(
            Nonce::from_slice(nonce),
            Payload {
                msg: sealed,
                aad: &aad,
            },
        )
        .map_err(|_| Error::Decryption(ciphertext.doc_id))
}
