//! Serial framing and Manchester line code.
//!
//! ```text
//! preamble 0xAA | sync 0xF3A5 | length u16 | payload | CRC-16 over length+payload
//! ```
//!
//! All fields are sent most-significant bit first.

use crc::{Crc, CRC_16_IBM_3740};

use super::ChannelError;

pub const PREAMBLE: u8 = 0xAA;
pub const SYNC_WORD: u16 = 0xF3A5;
pub const MAX_PAYLOAD: usize = u16::MAX as usize;
/// Frame bits outside the payload: preamble, sync, length and CRC.
pub const OVERHEAD_BITS: usize = 8 + 16 + 16 + 16;

/// CRC-16/CCITT-FALSE: polynomial 0x1021, initial value 0xFFFF, no
/// reflection, no final XOR.
const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

pub fn crc16(bytes: &[u8]) -> u16 {
    CRC16.checksum(bytes)
}

pub fn frame_bits_len(payload_len: usize) -> usize {
    OVERHEAD_BITS + 8 * payload_len
}

fn push_bits(out: &mut Vec<bool>, bytes: &[u8]) {
    for b in bytes {
        out.extend((0..8).rev().map(|i| b >> i & 1 == 1));
    }
}

/// Frame as a bit sequence, before line coding.
pub fn frame_bits(payload: &[u8]) -> Result<Vec<bool>, ChannelError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(ChannelError::FrameTooLarge(payload.len()));
    }
    let mut body = Vec::with_capacity(payload.len() + 2);
    body.extend_from_slice(&(payload.len() as u16).to_be_bytes());
    body.extend_from_slice(payload);
    let crc = crc16(&body);
    let mut bits = Vec::with_capacity(frame_bits_len(payload.len()));
    push_bits(&mut bits, &[PREAMBLE]);
    push_bits(&mut bits, &SYNC_WORD.to_be_bytes());
    push_bits(&mut bits, &body);
    push_bits(&mut bits, &crc.to_be_bytes());
    Ok(bits)
}

/// 0 → (−1, +1), 1 → (+1, −1).
pub fn manchester(bits: &[bool]) -> Vec<i8> {
    bits.iter().flat_map(|&b| if b { [1, -1] } else { [-1, 1] }).collect()
}

/// Frame bits, Manchester coded into ±1 symbols.
pub fn encode_frame(payload: &[u8]) -> Result<Vec<i8>, ChannelError> {
    Ok(manchester(&frame_bits(payload)?))
}

fn read_u16(bits: &[bool]) -> u16 {
    bits.iter().fold(0, |acc, &b| acc << 1 | u16::from(b))
}

fn read_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks_exact(8).map(|c| c.iter().fold(0u8, |acc, &b| acc << 1 | u8::from(b))).collect()
}

/// Finds the first sync word, then checks length and CRC.
pub fn parse_frame(bits: &[bool]) -> Result<Vec<u8>, ChannelError> {
    let sync = (0..bits.len().saturating_sub(15))
        .find(|&i| read_u16(&bits[i..i + 16]) == SYNC_WORD)
        .ok_or(ChannelError::Sync)?;
    let rest = &bits[sync + 16..];
    if rest.len() < 16 {
        return Err(ChannelError::Truncated);
    }
    let len = read_u16(&rest[..16]) as usize;
    let needed = 16 + 8 * len + 16;
    if rest.len() < needed {
        return Err(ChannelError::Truncated);
    }
    let body = read_bytes(&rest[..16 + 8 * len]);
    let crc = read_u16(&rest[16 + 8 * len..needed]);
    if crc16(&body) != crc {
        return Err(ChannelError::Integrity);
    }
    Ok(body[2..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Bit-at-a-time CRC-16/CCITT-FALSE.
    fn crc_oracle(bytes: &[u8]) -> u16 {
        let mut crc: u16 = 0xFFFF;
        for &b in bytes {
            crc ^= (b as u16) << 8;
            for _ in 0..8 {
                crc = if crc & 0x8000 != 0 { (crc << 1) ^ 0x1021 } else { crc << 1 };
            }
        }
        crc
    }

    #[test]
    fn crc_matches_oracle() {
        assert_eq!(crc16(b"123456789"), 0x29B1);
        assert_eq!(crc16(&[0x00, 0x02, 0x41, 0x42]), crc_oracle(&[0x00, 0x02, 0x41, 0x42]));
        let bits = frame_bits(b"AB").unwrap();
        let tail = read_u16(&bits[bits.len() - 16..]);
        assert_eq!(tail, crc_oracle(&[0x00, 0x02, 0x41, 0x42]));
    }

    #[test]
    fn empty_frame_length() {
        let symbols = encode_frame(&[]).unwrap();
        assert_eq!(symbols.len(), 2 * (8 + 16 + 16 + 16));
        assert_eq!(parse_frame(&frame_bits(&[]).unwrap()).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn zero_byte_is_dc_free() {
        let s = encode_frame(&[0x00]).unwrap();
        assert_eq!(s.iter().map(|&v| v as i64).sum::<i64>(), 0);
    }

    #[test]
    fn oversize_rejected() {
        assert!(matches!(frame_bits(&vec![0; MAX_PAYLOAD + 1]), Err(ChannelError::FrameTooLarge(_))));
        assert_eq!(frame_bits(&vec![7; MAX_PAYLOAD]).unwrap().len(), frame_bits_len(MAX_PAYLOAD));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_frame(&[false; 200]), Err(ChannelError::Sync)));
        let bits = frame_bits(b"hello").unwrap();
        assert!(matches!(parse_frame(&bits[..bits.len() - 3]), Err(ChannelError::Truncated)));
    }

    #[test]
    fn leading_junk_is_skipped() {
        let mut bits = vec![true, false, false, true, true];
        bits.extend(frame_bits(b"xy").unwrap());
        assert_eq!(parse_frame(&bits).unwrap(), b"xy");
    }

    proptest! {
        #[test]
        fn crc_agrees_with_oracle(bytes in prop::collection::vec(any::<u8>(), 0..300)) {
            prop_assert_eq!(crc16(&bytes), crc_oracle(&bytes));
        }

        #[test]
        fn frames_are_dc_balanced(payload in prop::collection::vec(any::<u8>(), 0..2048)) {
            let s = encode_frame(&payload).unwrap();
            prop_assert_eq!(s.len(), 2 * frame_bits_len(payload.len()));
            prop_assert_eq!(s.iter().map(|&v| v as i64).sum::<i64>(), 0);
            prop_assert_eq!(parse_frame(&frame_bits(&payload).unwrap()).unwrap(), payload);
        }
    }
}
