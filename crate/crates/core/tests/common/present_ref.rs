//! Straight-line PRESENT-80 written from the cipher's published description,
//! bit by bit, sharing no code with the library. The 80-bit key register is
//! kept as a (high 16, low 64) pair.

const SBOX: [u64; 16] = [0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD, 0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2];

fn s_layer(state: u64) -> u64 {
    let mut out = 0;
    for i in 0..16 {
        out |= SBOX[((state >> (4 * i)) & 0xF) as usize] << (4 * i);
    }
    out
}

fn p_layer(state: u64) -> u64 {
    let mut out = 0;
    for i in 0..64 {
        let dest = if i == 63 { 63 } else { (i * 16) % 63 };
        out |= ((state >> i) & 1) << dest;
    }
    out
}

/// 32 round keys from the 80-bit key `k79..k0` = `hi:lo`.
fn round_keys(mut hi: u64, mut lo: u64) -> Vec<u64> {
    let mut keys = Vec::with_capacity(32);
    for round in 1..=32u64 {
        // leftmost 64 bits of the register
        keys.push((hi << 48) | (lo >> 16));
        // rotate the 80-bit register left by 61
        let full_hi = hi & 0xFFFF;
        let bits: Vec<u64> = (0..80).map(|i| if i < 64 { (lo >> i) & 1 } else { (full_hi >> (i - 64)) & 1 }).collect();
        let mut rotated = [0u64; 80];
        for (i, b) in bits.iter().enumerate() {
            rotated[(i + 61) % 80] = *b;
        }
        lo = (0..64).fold(0, |acc, i| acc | (rotated[i] << i));
        hi = (0..16).fold(0, |acc, i| acc | (rotated[64 + i] << i));
        // S-box on bits 79..76
        let top = SBOX[((hi >> 12) & 0xF) as usize];
        hi = (hi & 0x0FFF) | (top << 12);
        // round counter into bits 19..15
        let counter = round & 0x1F;
        lo ^= counter << 15;
    }
    keys
}

pub fn encrypt(plaintext: u64, key_hi: u16, key_lo: u64) -> u64 {
    let keys = round_keys(key_hi as u64, key_lo);
    let mut state = plaintext;
    for k in &keys[..31] {
        state ^= k;
        state = s_layer(state);
        state = p_layer(state);
    }
    state ^ keys[31]
}
