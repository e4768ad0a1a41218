//! Rectangular block-loss patterns.

use std::fmt::Write as _;

use fse_core::Rect;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ConcealError, Result};

/// Origin-to-origin distance of the standard grid. Leaves a 40 sample gap
/// between 16 sample blocks, so no block reaches into another block's 16
/// sample support frame, and fits 9 x 9 blocks into 512 x 512.
pub const DEFAULT_SPACING: usize = 56;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossPattern {
    pub image_width: usize,
    pub image_height: usize,
    /// `(height, width)` of every block.
    pub block: (usize, usize),
    /// Top-left `(row, col)` of every block, in processing order.
    pub origins: Vec<(usize, usize)>,
}

impl LossPattern {
    /// Checks that every block lies inside the image and no two overlap.
    pub fn new(
        image_width: usize,
        image_height: usize,
        block: (usize, usize),
        origins: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if block.0 == 0 || block.1 == 0 {
            return Err(ConcealError::Pattern("empty block size".into()));
        }
        let p = Self {
            image_width,
            image_height,
            block,
            origins,
        };
        let rects = p.rects();
        for (i, r) in rects.iter().enumerate() {
            if r.row + r.height > image_height || r.col + r.width > image_width {
                return Err(ConcealError::Pattern(format!(
                    "block {i} at ({}, {}) exceeds the {image_width}x{image_height} image",
                    r.row, r.col
                )));
            }
            if let Some(j) = rects[..i].iter().position(|o| o.intersects(r)) {
                return Err(ConcealError::Pattern(format!("blocks {j} and {i} overlap")));
            }
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn rect(&self, i: usize) -> Rect {
        let (row, col) = self.origins[i];
        Rect::new(row, col, self.block.0, self.block.1)
    }

    pub fn rects(&self) -> Vec<Rect> {
        (0..self.len()).map(|i| self.rect(i)).collect()
    }

    /// True if no block intrudes into the `support` wide frame of another.
    pub fn is_isolated(&self, support: usize) -> bool {
        let rects = self.rects();
        rects.iter().enumerate().all(|(i, a)| {
            let grown = grow(a, support);
            rects[..i].iter().all(|b| !b.intersects(&grown))
        })
    }
}

// `a` extended by `by` on each side; may start left of zero, hence the shift
fn grow(a: &Rect, by: usize) -> Rect {
    let row = a.row.saturating_sub(by);
    let col = a.col.saturating_sub(by);
    Rect::new(
        row,
        col,
        a.row + a.height + by - row,
        a.col + a.width + by - col,
    )
}

/// Regular grid of isolated blocks, centered in the image. `count_limit`
/// keeps the first blocks in row-major order.
pub fn generate_grid_pattern(
    image_width: usize,
    image_height: usize,
    block: (usize, usize),
    support: usize,
    spacing: usize,
    count_limit: Option<usize>,
) -> Result<LossPattern> {
    let (bh, bw) = block;
    if spacing < support + bh.max(bw) {
        return Err(ConcealError::Pattern(format!(
            "spacing {spacing} below support {support} plus block size"
        )));
    }
    if bh == 0 || bw == 0 || bh > image_height || bw > image_width {
        return Err(ConcealError::Pattern(format!(
            "{bh}x{bw} blocks do not fit a {image_width}x{image_height} image"
        )));
    }
    let axis = |extent: usize, size: usize| {
        let n = (extent - size) / spacing + 1;
        let span = (n - 1) * spacing + size;
        let offset = (extent - span) / 2;
        (0..n).map(move |i| offset + i * spacing)
    };
    let limit = count_limit.unwrap_or(usize::MAX);
    let origins = axis(image_height, bh)
        .flat_map(|r| axis(image_width, bw).map(move |c| (r, c)))
        .take(limit)
        .collect();
    LossPattern::new(image_width, image_height, block, origins)
}

/// `count` blocks at random positions, each isolated by `support`, drawn
/// deterministically from `seed`.
pub fn generate_random_pattern(
    image_width: usize,
    image_height: usize,
    block: (usize, usize),
    support: usize,
    count: usize,
    seed: u64,
) -> Result<LossPattern> {
    let (bh, bw) = block;
    if bh == 0 || bw == 0 || bh > image_height || bw > image_width {
        return Err(ConcealError::Pattern(format!(
            "{bh}x{bw} blocks do not fit a {image_width}x{image_height} image"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rects: Vec<Rect> = Vec::with_capacity(count);
    let attempts = 1000 * count.max(1);
    for _ in 0..attempts {
        if rects.len() == count {
            break;
        }
        let r = Rect::new(
            rng.gen_range(0..=image_height - bh),
            rng.gen_range(0..=image_width - bw),
            bh,
            bw,
        );
        let grown = grow(&r, support);
        if rects.iter().all(|o| !o.intersects(&grown)) {
            rects.push(r);
        }
    }
    if rects.len() < count {
        return Err(ConcealError::Pattern(format!(
            "could only place {} of {count} isolated blocks",
            rects.len()
        )));
    }
    let origins = rects.iter().map(|r| (r.row, r.col)).collect();
    LossPattern::new(image_width, image_height, block, origins)
}

/// Parses `row col height width` lines; `#` starts a comment.
pub fn parse_pattern(text: &str, image_width: usize, image_height: usize) -> Result<LossPattern> {
    let mut block = None;
    let mut origins = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<usize> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| ConcealError::Pattern(format!("line {}: {e}", no + 1)))?;
        let [row, col, h, w] = fields[..] else {
            return Err(ConcealError::Pattern(format!(
                "line {}: expected `row col height width`",
                no + 1
            )));
        };
        match block {
            None => block = Some((h, w)),
            Some(b) if b != (h, w) => {
                return Err(ConcealError::Pattern(format!(
                    "line {}: block size {h}x{w} differs from {}x{}",
                    no + 1,
                    b.0,
                    b.1
                )))
            }
            _ => {}
        }
        origins.push((row, col));
    }
    LossPattern::new(image_width, image_height, block.unwrap_or((16, 16)), origins)
}

pub fn format_pattern(p: &LossPattern) -> String {
    let mut out = String::from("# row col height width\n");
    for &(r, c) in &p.origins {
        let _ = writeln!(out, "{r} {c} {} {}", p.block.0, p.block.1);
    }
    out
}
