//! Reed-Solomon over GF(2^8) (primitive polynomial 0x11d, first consecutive
//! root alpha^0). Systematic: parity is appended to the data. Polynomials are
//! stored highest degree first, matching codeword byte order.

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RsError {
    #[error("too many errors to correct")]
    TooManyErrors,
    #[error("codeword length {0} is outside 1..=255")]
    BadLength(usize),
}

struct Tables {
    exp: [u8; 512],
    log: [u8; 256],
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut exp = [0u8; 512];
        let mut log = [0u8; 256];
        let mut x: u16 = 1;
        for i in 0..255 {
            exp[i] = x as u8;
            log[x as usize] = i as u8;
            x <<= 1;
            if x & 0x100 != 0 {
                x ^= 0x11d;
            }
        }
        for i in 255..512 {
            exp[i] = exp[i - 255];
        }
        Tables { exp, log }
    })
}

pub(crate) fn gf_mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    let t = tables();
    t.exp[t.log[a as usize] as usize + t.log[b as usize] as usize]
}

fn gf_div(a: u8, b: u8) -> u8 {
    assert!(b != 0, "division by zero in GF(256)");
    if a == 0 {
        return 0;
    }
    let t = tables();
    t.exp[(t.log[a as usize] as usize + 255 - t.log[b as usize] as usize) % 255]
}

pub(crate) fn gf_pow(a: u8, power: i32) -> u8 {
    if a == 0 {
        return 0;
    }
    let t = tables();
    let e = (t.log[a as usize] as i32 * power).rem_euclid(255);
    t.exp[e as usize]
}

fn gf_inverse(a: u8) -> u8 {
    gf_div(1, a)
}

fn poly_scale(p: &[u8], x: u8) -> Vec<u8> {
    p.iter().map(|&c| gf_mul(c, x)).collect()
}

fn poly_add(p: &[u8], q: &[u8]) -> Vec<u8> {
    let len = p.len().max(q.len());
    let mut r = vec![0u8; len];
    for (i, &c) in p.iter().enumerate() {
        r[i + len - p.len()] = c;
    }
    for (i, &c) in q.iter().enumerate() {
        r[i + len - q.len()] ^= c;
    }
    r
}

fn poly_mul(p: &[u8], q: &[u8]) -> Vec<u8> {
    let mut r = vec![0u8; p.len() + q.len() - 1];
    for (j, &b) in q.iter().enumerate() {
        for (i, &a) in p.iter().enumerate() {
            r[i + j] ^= gf_mul(a, b);
        }
    }
    r
}

pub(crate) fn poly_eval(p: &[u8], x: u8) -> u8 {
    p.iter().fold(0u8, |acc, &c| gf_mul(acc, x) ^ c)
}

fn generator(nsym: usize) -> Vec<u8> {
    (0..nsym).fold(vec![1u8], |g, i| poly_mul(&g, &[1, gf_pow(2, i as i32)]))
}

/// Returns `nsym` parity bytes for `data`.
pub fn encode(data: &[u8], nsym: usize) -> Result<Vec<u8>, RsError> {
    if data.len() + nsym > 255 || data.len() + nsym == 0 {
        return Err(RsError::BadLength(data.len() + nsym));
    }
    let gen = generator(nsym);
    let mut buf = data.to_vec();
    buf.resize(data.len() + nsym, 0);
    for i in 0..data.len() {
        let coef = buf[i];
        if coef != 0 {
            for (j, &g) in gen.iter().enumerate().skip(1) {
                buf[i + j] ^= gf_mul(g, coef);
            }
        }
    }
    Ok(buf.split_off(data.len()))
}

fn syndromes(codeword: &[u8], nsym: usize) -> Vec<u8> {
    // Leading zero pad keeps the indexing of the locator search aligned.
    let mut s = vec![0u8; nsym + 1];
    for i in 0..nsym {
        s[i + 1] = poly_eval(codeword, gf_pow(2, i as i32));
    }
    s
}

fn error_locator(synd: &[u8], nsym: usize) -> Result<Vec<u8>, RsError> {
    let mut err_loc = vec![1u8];
    let mut old_loc = vec![1u8];
    for i in 0..nsym {
        let k = i + 1;
        let mut delta = synd[k];
        for j in 1..err_loc.len() {
            delta ^= gf_mul(err_loc[err_loc.len() - 1 - j], synd[k - j]);
        }
        old_loc.push(0);
        if delta != 0 {
            if old_loc.len() > err_loc.len() {
                let new_loc = poly_scale(&old_loc, delta);
                old_loc = poly_scale(&err_loc, gf_inverse(delta));
                err_loc = new_loc;
            }
            err_loc = poly_add(&err_loc, &poly_scale(&old_loc, delta));
        }
    }
    while err_loc.len() > 1 && err_loc[0] == 0 {
        err_loc.remove(0);
    }
    let errs = err_loc.len() - 1;
    if errs * 2 > nsym {
        return Err(RsError::TooManyErrors);
    }
    Ok(err_loc)
}

fn find_errors(err_loc_rev: &[u8], len: usize) -> Result<Vec<usize>, RsError> {
    let errs = err_loc_rev.len() - 1;
    let pos: Vec<usize> = (0..len)
        .filter(|&i| poly_eval(err_loc_rev, gf_pow(2, i as i32)) == 0)
        .map(|i| len - 1 - i)
        .collect();
    if pos.len() != errs {
        return Err(RsError::TooManyErrors);
    }
    Ok(pos)
}

fn correct_errata(codeword: &mut [u8], synd: &[u8], err_pos: &[usize]) {
    let len = codeword.len();
    let coef_pos: Vec<usize> = err_pos.iter().map(|&p| len - 1 - p).collect();
    let locator = coef_pos.iter().fold(vec![1u8], |loc, &i| {
        poly_mul(&loc, &poly_add(&[1], &[gf_pow(2, i as i32), 0]))
    });
    // Evaluator: (S(x) * Lambda(x)) mod x^(nsym+1), computed on reversed syndromes.
    let synd_rev: Vec<u8> = synd.iter().rev().copied().collect();
    let product = poly_mul(&synd_rev, &locator);
    let keep = locator.len();
    let evaluator: Vec<u8> = product[product.len() - keep..].to_vec();

    let xs: Vec<u8> = coef_pos
        .iter()
        .map(|&c| gf_pow(2, -(255 - c as i32)))
        .collect();
    for (i, &xi) in xs.iter().enumerate() {
        let xi_inv = gf_inverse(xi);
        let locator_prime = xs
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(1u8, |acc, (_, &xj)| gf_mul(acc, 1 ^ gf_mul(xi_inv, xj)));
        let y = gf_mul(xi, poly_eval(&evaluator, xi_inv));
        if locator_prime == 0 {
            continue;
        }
        codeword[err_pos[i]] ^= gf_div(y, locator_prime);
    }
}

/// Corrects up to `nsym / 2` byte errors in place and returns the number of
/// corrected bytes.
pub fn correct(codeword: &mut [u8], nsym: usize) -> Result<usize, RsError> {
    if codeword.is_empty() || codeword.len() > 255 || codeword.len() <= nsym {
        return Err(RsError::BadLength(codeword.len()));
    }
    let synd = syndromes(codeword, nsym);
    if synd.iter().all(|&s| s == 0) {
        return Ok(0);
    }
    let err_loc = error_locator(&synd, nsym)?;
    let rev: Vec<u8> = err_loc.iter().rev().copied().collect();
    let pos = find_errors(&rev, codeword.len())?;
    let mut fixed = codeword.to_vec();
    correct_errata(&mut fixed, &synd, &pos);
    if syndromes(&fixed, nsym).iter().any(|&s| s != 0) {
        return Err(RsError::TooManyErrors);
    }
    codeword.copy_from_slice(&fixed);
    Ok(pos.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent field multiply: shift-and-add carryless product reduced by
    /// the primitive polynomial.
    fn slow_mul(mut a: u8, mut b: u8) -> u8 {
        let mut p = 0u8;
        while b != 0 {
            if b & 1 != 0 {
                p ^= a;
            }
            let carry = a & 0x80 != 0;
            a <<= 1;
            if carry {
                a ^= 0x1d;
            }
            b >>= 1;
        }
        p
    }

    #[test]
    fn table_multiply_matches_carryless_oracle() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(gf_mul(a, b), slow_mul(a, b));
            }
        }
    }

    #[test]
    fn codewords_vanish_at_generator_roots() {
        let data: Vec<u8> = (0..40).map(|i| (i * 37 + 11) as u8).collect();
        let parity = encode(&data, 8).unwrap();
        let cw: Vec<u8> = data.iter().chain(&parity).copied().collect();
        // Naive Horner with the carryless multiply, root alpha^i = 2^i.
        let mut root = 1u8;
        for _ in 0..8 {
            let v = cw.iter().fold(0u8, |acc, &c| slow_mul(acc, root) ^ c);
            assert_eq!(v, 0);
            root = slow_mul(root, 2);
        }
    }

    #[test]
    fn too_many_errors_is_reported_or_detected() {
        let data = b"pairsonic acoustic frame".to_vec();
        let parity = encode(&data, 8).unwrap();
        let mut cw: Vec<u8> = data.iter().chain(&parity).copied().collect();
        let orig = cw.clone();
        for i in 0..6 {
            cw[i * 3] ^= 0x5a;
        }
        match correct(&mut cw, 8) {
            Err(_) => {}
            Ok(_) => assert_ne!(cw, orig),
        }
    }

    proptest! {
        #[test]
        fn corrects_up_to_four_errors(
            data in proptest::collection::vec(any::<u8>(), 1..70),
            errs in proptest::collection::vec((any::<prop::sample::Index>(), 1..=255u8), 0..=4),
        ) {
            let parity = encode(&data, 8).unwrap();
            let orig: Vec<u8> = data.iter().chain(&parity).copied().collect();
            let mut cw = orig.clone();
            let mut touched = std::collections::BTreeSet::new();
            for (idx, flip) in &errs {
                let i = idx.index(cw.len());
                if touched.insert(i) {
                    cw[i] ^= flip;
                }
            }
            let n = correct(&mut cw, 8).unwrap();
            prop_assert_eq!(n, touched.len());
            prop_assert_eq!(cw, orig);
        }

        #[test]
        fn never_panics_on_garbage(cw in proptest::collection::vec(any::<u8>(), 9..120)) {
            let mut cw = cw;
            let _ = correct(&mut cw, 8);
        }
    }
}
