//! Word-level bit kernels with runtime CPU feature dispatch.
//!
//! All kernels operate on equal-length packed `u64` slices. Callers are
//! expected to have validated lengths; in debug builds a mismatch panics.

#[inline]
fn portable_xor_popcount(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

#[inline]
fn portable_andnot_popcount(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & !y).count_ones()).sum()
}

#[cfg(target_arch = "x86_64")]
mod x86 {
    #[target_feature(enable = "avx2,popcnt")]
    pub unsafe fn xor_popcount_avx2(a: &[u64], b: &[u64]) -> u32 {
        super::portable_xor_popcount(a, b)
    }

    #[target_feature(enable = "popcnt")]
    pub unsafe fn xor_popcount_popcnt(a: &[u64], b: &[u64]) -> u32 {
        super::portable_xor_popcount(a, b)
    }

    #[target_feature(enable = "avx2,popcnt")]
    pub unsafe fn andnot_popcount_avx2(a: &[u64], b: &[u64]) -> u32 {
        super::portable_andnot_popcount(a, b)
    }

    #[target_feature(enable = "popcnt")]
    pub unsafe fn andnot_popcount_popcnt(a: &[u64], b: &[u64]) -> u32 {
        super::portable_andnot_popcount(a, b)
    }

    #[target_feature(enable = "popcnt")]
    pub unsafe fn popcount_popcnt(a: &[u64]) -> u32 {
        a.iter().map(|x| x.count_ones()).sum()
    }
}

/// Number of positions where `a` and `b` differ.
#[inline]
pub fn xor_popcount(a: &[u64], b: &[u64]) -> u32 {
    debug_assert_eq!(a.len(), b.len());
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("popcnt")
        {
            // SAFETY: features checked above.
            return unsafe { x86::xor_popcount_avx2(a, b) };
        }
        if std::arch::is_x86_feature_detected!("popcnt") {
            // SAFETY: feature checked above.
            return unsafe { x86::xor_popcount_popcnt(a, b) };
        }
    }
    portable_xor_popcount(a, b)
}

/// Number of bits set in `a` but not in `b`.
#[inline]
pub fn andnot_popcount(a: &[u64], b: &[u64]) -> u32 {
    debug_assert_eq!(a.len(), b.len());
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("popcnt")
        {
            // SAFETY: features checked above.
            return unsafe { x86::andnot_popcount_avx2(a, b) };
        }
        if std::arch::is_x86_feature_detected!("popcnt") {
            // SAFETY: feature checked above.
            return unsafe { x86::andnot_popcount_popcnt(a, b) };
        }
    }
    portable_andnot_popcount(a, b)
}

#[inline]
pub fn popcount(a: &[u64]) -> u32 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("popcnt") {
            // SAFETY: feature checked above.
            return unsafe { x86::popcount_popcnt(a) };
        }
    }
    a.iter().map(|x| x.count_ones()).sum()
}

/// Popcount of the bit range `[start, end)` of a packed LSB-first bit array.
pub fn popcount_range(words: &[u64], start: usize, end: usize) -> u32 {
    if start >= end {
        return 0;
    }
    let first = start / 64;
    let last = (end - 1) / 64;
    let lo_mask = !0u64 << (start % 64);
    let hi_mask = if end % 64 == 0 { !0u64 } else { (1u64 << (end % 64)) - 1 };
    if first == last {
        return (words[first] & lo_mask & hi_mask).count_ones();
    }
    let mut total = (words[first] & lo_mask).count_ones() + (words[last] & hi_mask).count_ones();
    total += popcount(&words[first + 1..last]);
    total
}
