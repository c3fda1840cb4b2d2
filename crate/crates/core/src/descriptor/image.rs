use std::fmt;

use crate::error::{Error, Result};

/// Largest supported bit count of one image.
pub const MAX_IMAGE_BITS: usize = 1 << 16;

/// A packed binary image of `width` x `height` bits.
///
/// Bit `(row, col)` lives at flat index `row * width + col`, stored LSB-first
/// in little-endian `u64` words. Bits past `width * height` in the last word
/// are always zero, so word-wise kernels can ignore the image shape.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QuicciImage {
    width: u16,
    height: u16,
    words: Box<[u64]>,
}

pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidConfig(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if width * height > MAX_IMAGE_BITS || width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::InvalidConfig(format!(
            "image {width}x{height} exceeds {MAX_IMAGE_BITS} bits"
        )));
    }
    Ok(())
}

fn padding_mask(bits: usize) -> u64 {
    match bits % 64 {
        0 => 0,
        used => !0u64 << used,
    }
}

impl QuicciImage {
    pub fn zeroed(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width: width as u16,
            height: height as u16,
            words: vec![0u64; words_for(width * height)].into_boxed_slice(),
        })
    }

    /// Wraps packed words, rejecting wrong lengths and set padding bits.
    pub fn from_words(width: usize, height: usize, words: Vec<u64>) -> Result<Self> {
        check_dims(width, height)?;
        let bits = width * height;
        if words.len() != words_for(bits) {
            return Err(Error::DimensionMismatch {
                expected: format!("{} words", words_for(bits)),
                actual: format!("{} words", words.len()),
            });
        }
        if let Some(last) = words.last() {
            if last & padding_mask(bits) != 0 {
                return Err(Error::NonzeroPadding(0));
            }
        }
        Ok(Self {
            width: width as u16,
            height: height as u16,
            words: words.into_boxed_slice(),
        })
    }

    /// Same as [`from_words`](Self::from_words) but clears padding instead of
    /// rejecting it.
    pub fn from_words_masked(width: usize, height: usize, mut words: Vec<u64>) -> Result<Self> {
        check_dims(width, height)?;
        let bits = width * height;
        if let Some(last) = words.last_mut() {
            *last &= !padding_mask(bits);
        }
        Self::from_words(width, height, words)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut image = Self::zeroed(width, height)?;
        for r in 0..height {
            for c in 0..width {
                if f(r, c) {
                    image.set(r, c, true);
                }
            }
        }
        Ok(image)
    }

    /// Parses rows of `0`/`1` characters; all rows must have equal length.
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidConfig("ragged bit rows".into()));
        }
        Self::from_fn(width, height, |r, c| rows[r].as_bytes()[c] == b'1')
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width as usize
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height as usize
    }

    #[inline]
    pub fn bit_len(&self) -> usize {
        self.width() * self.height()
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get_flat(&self, index: usize) -> bool {
        debug_assert!(index < self.bit_len());
        self.words[index / 64] >> (index % 64) & 1 == 1
    }

    #[inline]
    pub fn set_flat(&mut self, index: usize, value: bool) {
        assert!(index < self.bit_len(), "bit index {index} out of range");
        let mask = 1u64 << (index % 64);
        if value {
            self.words[index / 64] |= mask;
        } else {
            self.words[index / 64] &= !mask;
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.height() && col < self.width());
        self.get_flat(row * self.width() + col)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        assert!(row < self.height() && col < self.width(), "bit ({row}, {col}) out of range");
        let w = self.width();
        self.set_flat(row * w + col, value);
    }

    pub fn popcount(&self) -> u32 {
        super::kernels::popcount(&self.words)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Image whose row-major order is this image's column-major order.
    pub fn transposed(&self) -> Self {
        let mut out = Self::zeroed(self.height(), self.width()).expect("valid transposed dims");
        for r in 0..self.height() {
            for c in 0..self.width() {
                if self.get(r, c) {
                    out.set(c, r, true);
                }
            }
        }
        out
    }

    pub fn iter_set_bits(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }
}

impl fmt::Debug for QuicciImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QuicciImage({}x{}, {} set)", self.width, self.height, self.popcount())
    }
}

impl fmt::Display for QuicciImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.height() {
            for c in 0..self.width() {
                f.write_str(if self.get(r, c) { "1" } else { "0" })?;
            }
            if r + 1 < self.height() {
                f.write_str("\n")?;
            }
        }
        Ok(())
    }
}
