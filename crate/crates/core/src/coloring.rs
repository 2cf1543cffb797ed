//! Palettes, proper colorings and exact uniform sampling.
//!
//! Colors are 1-based everywhere in the public API.

use crate::error::{Error, Result};
use crate::tree::TreeShape;
use rand::Rng;
use std::fmt;

pub const MAX_COLORS: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Palette {
    k: usize,
}

impl Palette {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::PaletteTooSmall(k));
        }
        if k > MAX_COLORS {
            return Err(Error::PaletteTooLarge { k, max: MAX_COLORS });
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn contains(&self, color: usize) -> bool {
        (1..=self.k).contains(&color)
    }

    pub fn check_color(&self, color: usize) -> Result<u8> {
        if self.contains(color) {
            Ok(color as u8)
        } else {
            Err(Error::ColorOutOfRange { color, k: self.k })
        }
    }

    /// Guard for running the dynamics.
    pub fn require_ergodic(&self) -> Result<()> {
        if self.k < 3 {
            Err(Error::NotErgodic(self.k))
        } else {
            Ok(())
        }
    }

    pub fn full_set(&self) -> ColorSet {
        let mut s = ColorSet::empty();
        for c in 1..=self.k {
            s.insert(c as u8);
        }
        s
    }
}

/// Bit set over colors 1..=255.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ColorSet([u64; 4]);

impl ColorSet {
    pub const fn empty() -> Self {
        Self([0; 4])
    }

    #[inline]
    pub fn insert(&mut self, c: u8) {
        self.0[(c >> 6) as usize] |= 1 << (c & 63);
    }

    #[inline]
    pub fn remove(&mut self, c: u8) {
        self.0[(c >> 6) as usize] &= !(1 << (c & 63));
    }

    #[inline]
    pub fn contains(&self, c: u8) -> bool {
        self.0[(c >> 6) as usize] & (1 << (c & 63)) != 0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0) {
            *a &= b;
        }
        out
    }

    pub fn difference(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0) {
            *a &= !b;
        }
        out
    }

    /// Colors in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            let mut bits = bits;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let t = bits.trailing_zeros();
                    bits &= bits - 1;
                    Some((w as u32 * 64 + t) as u8)
                }
            })
        })
    }

    /// The `i`-th smallest color, if any.
    pub fn nth(&self, mut i: usize) -> Option<u8> {
        for (w, &bits) in self.0.iter().enumerate() {
            let ones = bits.count_ones() as usize;
            if i < ones {
                let mut bits = bits;
                for _ in 0..i {
                    bits &= bits - 1;
                }
                return Some((w as u32 * 64 + bits.trailing_zeros()) as u8);
            }
            i -= ones;
        }
        None
    }
}

impl FromIterator<u8> for ColorSet {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        let mut s = Self::empty();
        for c in iter {
            s.insert(c);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coloring {
    shape: TreeShape,
    palette: Palette,
    colors: Vec<u8>,
}

impl Coloring {
    /// Builds a coloring after checking length and palette range. Properness
    /// is not required here; see [`Coloring::is_proper`].
    pub fn new(shape: TreeShape, palette: Palette, colors: Vec<u8>) -> Result<Self> {
        if colors.len() != shape.n() {
            return Err(Error::LengthMismatch {
                got: colors.len(),
                n: shape.n(),
            });
        }
        for &c in &colors {
            palette.check_color(c as usize)?;
        }
        Ok(Self {
            shape,
            palette,
            colors,
        })
    }

    pub fn proper(shape: TreeShape, palette: Palette, colors: Vec<u8>) -> Result<Self> {
        let c = Self::new(shape, palette, colors)?;
        if c.is_proper() {
            Ok(c)
        } else {
            Err(Error::Improper)
        }
    }

    /// Every vertex at even depth gets `even`, every odd depth gets `odd`.
    pub fn alternating(shape: TreeShape, palette: Palette, even: u8, odd: u8) -> Result<Self> {
        let mut colors = vec![0; shape.n()];
        for depth in 0..=shape.height() {
            let c = if depth % 2 == 0 { even } else { odd };
            for v in shape.level(depth) {
                colors[v] = c;
            }
        }
        Self::proper(shape, palette, colors)
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn palette(&self) -> &Palette {
        &self.palette
    }

    pub fn colors(&self) -> &[u8] {
        &self.colors
    }

    #[inline]
    pub fn get(&self, v: usize) -> u8 {
        self.colors[v]
    }

    /// Sets a color without any check; callers maintain properness.
    #[inline]
    pub(crate) fn set_unchecked(&mut self, v: usize, c: u8) {
        self.colors[v] = c;
    }

    pub fn is_proper(&self) -> bool {
        (1..self.shape.n()).all(|v| {
            let p = self.shape.parent_unchecked(v).unwrap_or(0);
            self.colors[v] != self.colors[p]
        })
    }

    /// Colors unused by every neighbor of `v`.
    pub fn available_colors(&self, v: usize) -> Result<ColorSet> {
        if v >= self.shape.n() {
            return Err(Error::VertexOutOfRange {
                v,
                n: self.shape.n(),
            });
        }
        Ok(self.available_unchecked(v, None))
    }

    /// Available colors of an in-range vertex; `boundary` acts as an extra
    /// fixed neighbor of the root.
    #[inline]
    pub fn available_unchecked(&self, v: usize, boundary: Option<u8>) -> ColorSet {
        let mut set = self.palette.full_set();
        match self.shape.parent_unchecked(v) {
            Some(p) => set.remove(self.colors[p]),
            None => {
                if let Some(c) = boundary {
                    set.remove(c);
                }
            }
        }
        for w in self.shape.children_unchecked(v) {
            set.remove(self.colors[w]);
        }
        set
    }

    /// Hamming distance to another coloring of the same tree.
    pub fn hamming(&self, other: &Self) -> usize {
        self.colors
            .iter()
            .zip(&other.colors)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Writes the `b H k` header line followed by the colors.
    pub fn to_state_string(&self) -> String {
        self.to_string()
    }

    pub fn from_state_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header".into()))?;
        let nums = |line: &str| -> Result<Vec<usize>> {
            line.split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad integer {t:?}"))))
                .collect()
        };
        let head = nums(header)?;
        let [b, h, k] = head[..] else {
            return Err(Error::Parse("header must be `b H k`".into()));
        };
        let shape = TreeShape::new(b, h)?;
        let palette = Palette::new(k)?;
        let body = lines
            .next()
            .ok_or_else(|| Error::Parse("missing color line".into()))?;
        let values = nums(body)?;
        if lines.next().is_some() {
            return Err(Error::Parse("trailing data after color line".into()));
        }
        let colors = values
            .into_iter()
            .map(|c| palette.check_color(c))
            .collect::<Result<Vec<_>>>()?;
        Self::proper(shape, palette, colors)
    }
}

impl fmt::Display for Coloring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} {} {}",
            self.shape.b(),
            self.shape.height(),
            self.palette.k()
        )?;
        let mut first = true;
        for c in &self.colors {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
            first = false;
        }
        writeln!(f)
    }
}

/// Color uniform on the palette minus `excluded`.
#[inline]
pub(crate) fn uniform_excluding<R: Rng + ?Sized>(k: usize, excluded: u8, rng: &mut R) -> u8 {
    let c = rng.random_range(1..k as u8);
    if c >= excluded {
        c + 1
    } else {
        c
    }
}

fn fill_top_down<R: Rng + ?Sized>(shape: &TreeShape, k: usize, colors: &mut [u8], rng: &mut R) {
    for v in 1..shape.n() {
        let p = (v - 1) / shape.b();
        colors[v] = uniform_excluding(k, colors[p], rng);
    }
}

/// Exact uniform sample from all proper colorings: root uniform, then each
/// vertex uniform among the colors differing from its parent.
pub fn sample_uniform<R: Rng + ?Sized>(shape: TreeShape, palette: Palette, rng: &mut R) -> Coloring {
    let mut colors = vec![0u8; shape.n()];
    colors[0] = rng.random_range(1..=palette.k() as u8);
    fill_top_down(&shape, palette.k(), &mut colors, rng);
    Coloring {
        shape,
        palette,
        colors,
    }
}

pub fn sample_uniform_given_root<R: Rng + ?Sized>(
    shape: TreeShape,
    palette: Palette,
    root_color: usize,
    rng: &mut R,
) -> Result<Coloring> {
    let root = palette.check_color(root_color)?;
    let mut colors = vec![0u8; shape.n()];
    colors[0] = root;
    fill_top_down(&shape, palette.k(), &mut colors, rng);
    Ok(Coloring {
        shape,
        palette,
        colors,
    })
}

/// k (k-1)^(n-1).
pub fn count_colorings(shape: TreeShape, palette: Palette) -> Result<u128> {
    count_with_boundary(shape, palette, None)
}

/// Number of proper colorings; with a boundary color the root has k-1 choices.
pub fn count_with_boundary(shape: TreeShape, palette: Palette, boundary: Option<u8>) -> Result<u128> {
    let k = palette.k() as u128;
    let root = if boundary.is_some() { k - 1 } else { k };
    let mut total = root;
    for _ in 1..shape.n() {
        total = total.checked_mul(k - 1).ok_or(Error::CountOverflow)?;
    }
    Ok(total)
}

/// All proper colorings in lexicographic order (vertex 0 most significant).
pub fn enumerate_colorings(
    shape: TreeShape,
    palette: Palette,
    boundary: Option<u8>,
    cap: usize,
) -> Result<Vec<Coloring>> {
    if let Some(c) = boundary {
        palette.check_color(c as usize)?;
    }
    let size = count_with_boundary(shape, palette, boundary)?;
    if size > cap as u128 {
        return Err(Error::StateSpaceTooLarge { size, cap });
    }
    let n = shape.n();
    let k = palette.k() as u8;
    let forbidden = |colors: &[u8], v: usize| -> u8 {
        match shape.parent_unchecked(v) {
            Some(p) => colors[p],
            None => boundary.unwrap_or(0),
        }
    };
    let mut out = Vec::with_capacity(size as usize);
    let mut colors = vec![0u8; n];
    // Odometer over vertices in index order; each vertex skips its parent's color.
    let mut v = 0usize;
    loop {
        let bad = forbidden(&colors, v);
        let mut next = colors[v] + 1;
        if next == bad {
            next += 1;
        }
        if next > k {
            colors[v] = 0;
            if v == 0 {
                break;
            }
            v -= 1;
            continue;
        }
        colors[v] = next;
        if v + 1 == n {
            out.push(Coloring {
                shape,
                palette,
                colors: colors.clone(),
            });
        } else {
            v += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::replica_rng;

    fn star(b: usize) -> TreeShape {
        TreeShape::star(b).unwrap()
    }

    #[test]
    fn properness() {
        let p3 = Palette::new(3).unwrap();
        assert!(Coloring::new(star(2), p3, vec![1, 2, 3]).unwrap().is_proper());
        assert!(!Coloring::new(star(2), p3, vec![1, 1, 2]).unwrap().is_proper());
        let path = TreeShape::new(1, 2).unwrap();
        assert!(Coloring::new(path, p3, vec![1, 2, 1]).unwrap().is_proper());
    }

    #[test]
    fn length_and_range_errors_are_distinct() {
        let p3 = Palette::new(3).unwrap();
        assert!(matches!(
            Coloring::new(star(2), p3, vec![1, 2]),
            Err(Error::LengthMismatch { got: 2, n: 3 })
        ));
        assert!(matches!(
            Coloring::new(star(2), p3, vec![1, 2, 4]),
            Err(Error::ColorOutOfRange { color: 4, k: 3 })
        ));
        assert_eq!(Coloring::proper(star(2), p3, vec![1, 1, 2]), Err(Error::Improper));
    }

    #[test]
    fn available_sets() {
        let p4 = Palette::new(4).unwrap();
        let c = Coloring::new(star(2), p4, vec![1, 2, 3]).unwrap();
        assert_eq!(c.available_colors(0).unwrap().iter().collect::<Vec<_>>(), vec![1, 4]);
        let p3 = Palette::new(3).unwrap();
        let c = Coloring::new(star(2), p3, vec![2, 1, 3]).unwrap();
        assert_eq!(c.available_colors(1).unwrap().iter().collect::<Vec<_>>(), vec![1, 3]);
        let c = Coloring::new(star(3), p3, vec![1, 2, 3, 2]).unwrap();
        assert_eq!(c.available_colors(0).unwrap().iter().collect::<Vec<_>>(), vec![1]);
        assert!(c.available_colors(4).is_err());
    }

    #[test]
    fn counts() {
        let p3 = Palette::new(3).unwrap();
        assert_eq!(count_colorings(star(2), p3).unwrap(), 12);
        assert_eq!(count_colorings(TreeShape::new(2, 2).unwrap(), p3).unwrap(), 192);
        let p5 = Palette::new(5).unwrap();
        assert_eq!(count_colorings(TreeShape::new(3, 0).unwrap(), p5).unwrap(), 5);
        let big = TreeShape::new(2, 8).unwrap();
        assert_eq!(count_colorings(big, p3), Err(Error::CountOverflow));
    }

    #[test]
    fn enumeration_matches_count_and_is_sorted() {
        for (b, h, k) in [(2, 1, 3), (2, 2, 3), (3, 1, 4), (1, 4, 3), (4, 0, 5)] {
            let shape = TreeShape::new(b, h).unwrap();
            let palette = Palette::new(k).unwrap();
            let all = enumerate_colorings(shape, palette, None, 100_000).unwrap();
            assert_eq!(all.len() as u128, count_colorings(shape, palette).unwrap());
            assert!(all.iter().all(Coloring::is_proper));
            assert!(all.windows(2).all(|w| w[0].colors() < w[1].colors()));
        }
        let with_boundary =
            enumerate_colorings(star(2), Palette::new(3).unwrap(), Some(1), 100).unwrap();
        assert_eq!(with_boundary.len(), 8);
        assert!(with_boundary.iter().all(|c| c.get(0) != 1));
    }

    #[test]
    fn enumeration_cap() {
        let r = enumerate_colorings(TreeShape::new(2, 2).unwrap(), Palette::new(3).unwrap(), None, 100);
        assert_eq!(r.unwrap_err(), Error::StateSpaceTooLarge { size: 192, cap: 100 });
    }

    #[test]
    fn pinned_root_sampler() {
        let p3 = Palette::new(3).unwrap();
        let mut rng = replica_rng(1, "pinned", 0);
        for _ in 0..1000 {
            let c = sample_uniform_given_root(star(2), p3, 1, &mut rng).unwrap();
            assert_eq!(c.get(0), 1);
            assert!(c.is_proper());
        }
        assert!(sample_uniform_given_root(star(2), p3, 4, &mut rng).is_err());
        let path = TreeShape::new(1, 1).unwrap();
        let mut seen = [0usize; 4];
        for _ in 0..2000 {
            let c = sample_uniform_given_root(path, p3, 2, &mut rng).unwrap();
            seen[c.get(1) as usize] += 1;
        }
        assert_eq!(seen[2], 0);
        assert!(seen[1] > 800 && seen[3] > 800);
    }

    #[test]
    fn state_serialization_round_trip() {
        let p4 = Palette::new(4).unwrap();
        let mut rng = replica_rng(3, "ser", 0);
        let c = sample_uniform(TreeShape::new(3, 2).unwrap(), p4, &mut rng);
        let text = c.to_state_string();
        assert!(text.starts_with("3 2 4\n"));
        assert_eq!(Coloring::from_state_str(&text).unwrap(), c);
        assert!(Coloring::from_state_str("2 1 3\n1 1 2\n").is_err());
        assert!(Coloring::from_state_str("2 1\n1 2 3\n").is_err());
    }

    #[test]
    fn color_set_ops() {
        let s: ColorSet = [3u8, 1, 200, 64].into_iter().collect();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 3, 64, 200]);
        assert_eq!(s.nth(2), Some(64));
        assert_eq!(s.nth(4), None);
        assert_eq!(s.len(), 4);
        let t: ColorSet = [3u8, 64].into_iter().collect();
        assert_eq!(s.intersection(&t), t);
        assert_eq!(s.difference(&t).iter().collect::<Vec<_>>(), vec![1, 200]);
    }
}
