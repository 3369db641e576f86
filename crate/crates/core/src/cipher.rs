//! PRESENT-80 block cipher and a counter-mode wrapper for arbitrary payloads.

use std::fmt;

use thiserror::Error;

const SBOX: [u8; 16] = [0xc, 0x5, 0x6, 0xb, 0x9, 0x0, 0xa, 0xd, 0x3, 0xe, 0xf, 0x8, 0x4, 0x7, 0x1, 0x2];
const SBOX_INV: [u8; 16] = [0x5, 0xe, 0xf, 0x8, 0xc, 0x1, 0x2, 0xd, 0xb, 0x4, 0x6, 0x3, 0x0, 0x7, 0x9, 0xa];

const ROUNDS: usize = 31;
const KEY_MASK: u128 = (1 << 80) - 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("key must be 10 bytes (80 bits), got {0}")]
    Length(usize),
    #[error("key value exceeds 80 bits")]
    Overflow,
    #[error("invalid hex key: {0}")]
    Hex(String),
}

/// 80-bit cipher key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CipherKey(u128);

impl CipherKey {
    pub fn new(value: u128) -> Result<Self, KeyError> {
        if value & !KEY_MASK != 0 {
            return Err(KeyError::Overflow);
        }
        Ok(Self(value))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KeyError> {
        if bytes.len() != 10 {
            return Err(KeyError::Length(bytes.len()));
        }
        Ok(Self(bytes.iter().fold(0u128, |acc, &b| (acc << 8) | u128::from(b))))
    }

    /// Parses 20 hex digits, most significant first.
    pub fn from_hex(text: &str) -> Result<Self, KeyError> {
        let text = text.trim();
        if text.len() != 20 {
            return Err(KeyError::Hex(format!("expected 20 hex digits, got {}", text.len())));
        }
        let v = u128::from_str_radix(text, 16).map_err(|e| KeyError::Hex(e.to_string()))?;
        Self::new(v)
    }

    pub fn value(self) -> u128 {
        self.0
    }

    pub fn flip_bit(self, bit: u32) -> Self {
        Self((self.0 ^ (1u128 << (bit % 80))) & KEY_MASK)
    }
}

impl fmt::Debug for CipherKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CipherKey(..)")
    }
}

/// 64-bit cipher block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Block(pub u64);

/// Expanded round keys; computing them once lets threads share a schedule.
#[derive(Clone)]
pub struct KeySchedule {
    round_keys: [u64; ROUNDS + 1],
}

impl KeySchedule {
    pub fn new(key: CipherKey) -> Self {
        let mut reg = key.0;
        let mut round_keys = [0u64; ROUNDS + 1];
        for (i, rk) in round_keys.iter_mut().enumerate() {
            *rk = (reg >> 16) as u64;
            if i == ROUNDS {
                break;
            }
            reg = ((reg << 61) | (reg >> 19)) & KEY_MASK;
            let top = (reg >> 76) as usize;
            reg = (reg & !(0xf << 76)) | (u128::from(SBOX[top]) << 76);
            reg ^= ((i as u128) + 1) << 15;
        }
        Self { round_keys }
    }

    pub fn encrypt(&self, block: Block) -> Block {
        let mut state = block.0;
        for rk in &self.round_keys[..ROUNDS] {
            state ^= rk;
            state = p_layer(s_layer(state, &SBOX));
        }
        Block(state ^ self.round_keys[ROUNDS])
    }

    pub fn decrypt(&self, block: Block) -> Block {
        let mut state = block.0 ^ self.round_keys[ROUNDS];
        for rk in self.round_keys[..ROUNDS].iter().rev() {
            state = s_layer(p_layer_inv(state), &SBOX_INV) ^ rk;
        }
        Block(state)
    }

    /// Counter-mode keystream XOR. Block `i` of the keystream is the
    /// encryption of `nonce + i` (wrapping), serialized big-endian.
    pub fn ctr_apply(&self, payload: &[u8], nonce: u64) -> Vec<u8> {
        let mut out = Vec::with_capacity(payload.len());
        for (i, chunk) in payload.chunks(8).enumerate() {
            let ks = self.encrypt(Block(nonce.wrapping_add(i as u64))).0.to_be_bytes();
            out.extend(chunk.iter().zip(ks).map(|(p, k)| p ^ k));
        }
        out
    }
}

fn s_layer(state: u64, table: &[u8; 16]) -> u64 {
    let mut out = 0u64;
    for nib in 0..16 {
        let v = (state >> (4 * nib)) & 0xf;
        out |= u64::from(table[v as usize]) << (4 * nib);
    }
    out
}

fn p_target(bit: u32) -> u32 {
    if bit == 63 {
        63
    } else {
        (bit * 16) % 63
    }
}

fn p_layer(state: u64) -> u64 {
    let mut out = 0u64;
    for bit in 0..64 {
        out |= ((state >> bit) & 1) << p_target(bit);
    }
    out
}

fn p_layer_inv(state: u64) -> u64 {
    let mut out = 0u64;
    for bit in 0..64 {
        out |= ((state >> p_target(bit)) & 1) << bit;
    }
    out
}

pub fn encrypt_block(pt: Block, key: CipherKey) -> Block {
    KeySchedule::new(key).encrypt(pt)
}

pub fn decrypt_block(ct: Block, key: CipherKey) -> Block {
    KeySchedule::new(key).decrypt(ct)
}

/// Encrypts or decrypts (the operation is its own inverse) a payload of any
/// length without expanding it.
pub fn ctr_crypt(payload: &[u8], key: CipherKey, nonce: u64) -> Vec<u8> {
    KeySchedule::new(key).ctr_apply(payload, nonce)
}
