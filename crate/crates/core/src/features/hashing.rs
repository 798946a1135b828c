//! Signed feature hashing of token n-grams with FNV-1a.

const FNV_OFFSET: u64 = 14695981039346656037;
const FNV_PRIME: u64 = 1099511628211;
const NGRAM_SEPARATOR: u8 = 0x1f;

/// Incremental 64-bit FNV-1a.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a64(u64);

impl Default for Fnv1a64 {
    fn default() -> Self {
        Fnv1a64(FNV_OFFSET)
    }
}

impl Fnv1a64 {
    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a64::default();
    h.write(bytes);
    h.finish()
}

/// Bag of signed hashed n-grams, L2-normalized unless all zero.
pub fn hashed_text_features<S: AsRef<str>>(tokens: &[S], hash_dim: usize, ngram_orders: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; hash_dim];
    accumulate(tokens, hash_dim, ngram_orders, &mut out);
    out
}

pub(crate) fn accumulate<S: AsRef<str>>(tokens: &[S], hash_dim: usize, ngram_orders: &[usize], out: &mut [f64]) {
    debug_assert_eq!(out.len(), hash_dim);
    let mut orders = ngram_orders.to_vec();
    orders.sort_unstable();
    for n in orders {
        if n == 0 || tokens.len() < n {
            continue;
        }
        for gram in tokens.windows(n) {
            let mut h = Fnv1a64::default();
            for (i, tok) in gram.iter().enumerate() {
                if i > 0 {
                    h.write(&[NGRAM_SEPARATOR]);
                }
                h.write(tok.as_ref().as_bytes());
            }
            let h = h.finish();
            let bucket = (h % hash_dim as u64) as usize;
            if h >> 63 == 0 {
                out[bucket] += 1.0;
            } else {
                out[bucket] -= 1.0;
            }
        }
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in out.iter_mut() {
            *v /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_vectors() {
        assert_eq!(fnv1a64(b""), 14695981039346656037);
        assert_eq!(fnv1a64(b"a"), 12638187200555641996);
        assert_eq!(fnv1a64(b"patent"), 18255343326114286423);
    }

    #[test]
    fn empty_tokens_give_zero_vector() {
        let v = hashed_text_features::<&str>(&[], 64, &[1, 2]);
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn repeated_token_single_bucket() {
        for k in 1..5 {
            let toks = vec!["claim"; k];
            let v = hashed_text_features(&toks, 256, &[1]);
            let nz: Vec<_> = v.iter().filter(|x| **x != 0.0).collect();
            assert_eq!(nz.len(), 1);
            assert_eq!(nz[0].abs(), 1.0);
        }
    }

    #[test]
    fn separator_prevents_join_collisions() {
        let a = hashed_text_features(&["ab", "c"], 1 << 20, &[2]);
        let b = hashed_text_features(&["a", "bc"], 1 << 20, &[2]);
        assert_ne!(a, b);
    }
}
