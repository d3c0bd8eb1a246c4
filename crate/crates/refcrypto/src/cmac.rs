//! AES-128-CMAC straight from the RFC 4493 pseudocode.

use crate::aes;

fn left_shift(block: &[u8; 16]) -> [u8; 16] {
    let mut out = [0u8; 16];
    let mut carry = 0u8;
    for i in (0..16).rev() {
        out[i] = (block[i] << 1) | carry;
        carry = block[i] >> 7;
    }
    out
}

fn xor(a: &[u8; 16], b: &[u8; 16]) -> [u8; 16] {
    let mut out = [0u8; 16];
    for i in 0..16 {
        out[i] = a[i] ^ b[i];
    }
    out
}

fn subkeys(key: &[u8; 16]) -> ([u8; 16], [u8; 16]) {
    const RB: [u8; 16] = [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0x87];
    let l = aes::encrypt_block(key, &[0u8; 16]);
    let mut k1 = left_shift(&l);
    if l[0] & 0x80 != 0 {
        k1 = xor(&k1, &RB);
    }
    let mut k2 = left_shift(&k1);
    if k1[0] & 0x80 != 0 {
        k2 = xor(&k2, &RB);
    }
    (k1, k2)
}

/// Compute AES-128-CMAC(key, message).
pub fn cmac(key: &[u8; 16], message: &[u8]) -> [u8; 16] {
    let (k1, k2) = subkeys(key);
    let n = message.len().div_ceil(16).max(1);
    let complete = message.len() % 16 == 0 && !message.is_empty();

    let mut last = [0u8; 16];
    if complete {
        last.copy_from_slice(&message[16 * (n - 1)..]);
        last = xor(&last, &k1);
    } else {
        let tail = &message[16 * (n - 1)..];
        last[..tail.len()].copy_from_slice(tail);
        last[tail.len()] = 0x80;
        last = xor(&last, &k2);
    }

    let mut x = [0u8; 16];
    for i in 0..n - 1 {
        let mut block = [0u8; 16];
        block.copy_from_slice(&message[16 * i..16 * (i + 1)]);
        x = aes::encrypt_block(key, &xor(&x, &block));
    }
    aes::encrypt_block(key, &xor(&x, &last))
}
