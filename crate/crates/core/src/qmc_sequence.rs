//! Low-discrepancy point generation on the unit hypercube.
//!
//! The main generator is the generalized Faure sequence in a prime base `b >= s`.
//! Point `n` is obtained by writing `n` in base `b`, multiplying its digit vector
//! by a per-coordinate generator matrix modulo `b`, and radical-inverting the
//! result. Coordinate `j` uses the `j`-th power of the upper-triangular Pascal
//! matrix, `C^j[r][k] = binom(k, r) * j^(k - r) mod b`. All digit arithmetic is
//! exact integer arithmetic; the conversion to `f64` happens once per coordinate.
//!
//! Every point is a pure function of `(config, index)`, so any index range can be
//! generated independently by any worker.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of indices every sequence must be able to address.
const INDEX_CAPACITY_BITS: u32 = 40;

/// Digit scrambling applied on top of the Pascal-matrix generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scrambling {
    #[default]
    None,
    /// Tezuka's generalized Faure: each generator is left-multiplied by a random
    /// nonsingular lower-triangular matrix. Preserves the net property and maps
    /// index 0 to the origin.
    Tezuka { seed: u64 },
    /// A random permutation of `0..b` applied to every output digit.
    DigitPermutation { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceConfig {
    pub dimension: usize,
    pub base: u32,
    #[serde(default)]
    pub scrambling: Scrambling,
    #[serde(default)]
    pub skip: u64,
    #[serde(default)]
    pub coordinate_subset: Option<Vec<usize>>,
}

impl SequenceConfig {
    /// Unscrambled sequence in the smallest admissible base for `dimension`.
    pub fn new(dimension: usize) -> Self {
        SequenceConfig {
            dimension,
            base: smallest_prime_at_least(dimension.max(2) as u32),
            scrambling: Scrambling::None,
            skip: 0,
            coordinate_subset: None,
        }
    }

    pub fn with_scrambling(mut self, scrambling: Scrambling) -> Self {
        self.scrambling = scrambling;
        self
    }

    pub fn with_subset(mut self, subset: Vec<usize>) -> Self {
        self.coordinate_subset = Some(subset);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("sequence dimension must be positive".into()));
        }
        if !is_prime(self.base) {
            return Err(Error::Config(format!("base {} is not prime", self.base)));
        }
        if (self.base as usize) < self.dimension {
            return Err(Error::Config(format!(
                "base {} is smaller than dimension {}",
                self.base, self.dimension
            )));
        }
        if let Some(subset) = &self.coordinate_subset {
            let mut seen = vec![false; self.dimension];
            for &c in subset {
                if c >= self.dimension {
                    return Err(Error::Config(format!(
                        "subset coordinate {c} out of range for dimension {}",
                        self.dimension
                    )));
                }
                if std::mem::replace(&mut seen[c], true) {
                    return Err(Error::Config(format!("subset coordinate {c} repeated")));
                }
            }
        }
        Ok(())
    }

    /// Number of coordinates in each emitted point.
    pub fn output_dimension(&self) -> usize {
        self.coordinate_subset
            .as_ref()
            .map_or(self.dimension, |s| s.len())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn dimension(&self) -> usize {
        self.coords.len()
    }
}

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut k = 2u32;
    while k.saturating_mul(k) <= n {
        if n % k == 0 {
            return false;
        }
        k += 1;
    }
    true
}

pub fn smallest_prime_at_least(n: u32) -> u32 {
    let mut p = n.max(2);
    while !is_prime(p) {
        p += 1;
    }
    p
}

/// A prepared generalized Faure sequence.
#[derive(Clone, Debug)]
pub struct FaureSequence {
    config: SequenceConfig,
    base: u64,
    digits: usize,
    /// `base^digits` as a float; all numerators are strictly below it.
    scale: f64,
    /// Emitted coordinate ids, in output order.
    coords: Vec<usize>,
    /// Row-major `digits x digits` generator matrices of the emitted
    /// coordinates, concatenated.
    generators: Vec<u32>,
    /// The same matrices stored column by column, for incremental updates.
    columns: Vec<u32>,
    /// `u64::MAX / base + 1`, for reduction without division.
    reciprocal: u64,
    /// Per emitted coordinate, per digit position: a permutation of `0..base`.
    permutations: Option<Vec<Vec<Vec<u64>>>>,
}

impl FaureSequence {
    pub fn new(config: SequenceConfig) -> Result<Self> {
        config.validate()?;
        let base = config.base as u64;
        let digits = digits_for_capacity(base);
        let capacity = (base as u128).pow(digits as u32);
        if capacity >= 1u128 << 53 {
            return Err(Error::Config(format!(
                "base {base} too large for exact digit arithmetic"
            )));
        }
        if digits as u64 * (base - 1) * (base - 1) >= 1 << 32 {
            return Err(Error::Config(format!("base {base} too large for 32-bit digit sums")));
        }
        let coords: Vec<usize> = match &config.coordinate_subset {
            Some(s) => s.clone(),
            None => (0..config.dimension).collect(),
        };

        let binom = binomials_mod(digits, base);
        let mut tezuka_rng = match config.scrambling {
            Scrambling::Tezuka { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        let mut generators = Vec::with_capacity(coords.len() * digits * digits);
        // Scrambling matrices are drawn for every coordinate of the parent
        // sequence so a subset reproduces the parent's coordinates exactly.
        let mut all_generators: Vec<Vec<u64>> = Vec::with_capacity(config.dimension);
        for j in 0..config.dimension {
            let mut g = pascal_power(j as u64, digits, base, &binom);
            if let Some(rng) = tezuka_rng.as_mut() {
                let a = random_lower_triangular(rng, digits, base);
                g = mat_mul_mod(&a, &g, digits, base);
            }
            all_generators.push(g);
        }
        for &c in &coords {
            generators.extend(all_generators[c].iter().map(|&x| x as u32));
        }

        let mut columns = Vec::with_capacity(generators.len());
        for g in generators.chunks_exact(digits * digits) {
            for c in 0..digits {
                columns.extend((0..digits).map(|r| g[r * digits + c]));
            }
        }

        let permutations = match config.scrambling {
            Scrambling::DigitPermutation { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let all: Vec<Vec<Vec<u64>>> = (0..config.dimension)
                    .map(|_| (0..digits).map(|_| random_permutation(&mut rng, base)).collect())
                    .collect();
                Some(coords.iter().map(|&c| all[c].clone()).collect())
            }
            _ => None,
        };

        Ok(FaureSequence {
            base,
            digits,
            scale: capacity as f64,
            coords,
            generators,
            columns,
            reciprocal: u64::MAX / base + 1,
            permutations,
            config,
        })
    }

    pub fn config(&self) -> &SequenceConfig {
        &self.config
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    /// Number of addressable indices (after `skip`).
    pub fn capacity(&self) -> u64 {
        (self.base as u128)
            .pow(self.digits as u32)
            .min(u64::MAX as u128) as u64
    }

    pub fn point(&self, index: u64) -> Result<Point> {
        let mut coords = vec![0.0; self.dimension()];
        self.fill(index, &mut coords)?;
        Ok(Point { coords })
    }

    /// Writes point `index` into `out`, which must have `self.dimension()` entries.
    pub fn fill(&self, index: u64, out: &mut [f64]) -> Result<()> {
        if out.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: out.len(),
            });
        }
        let n = index
            .checked_add(self.config.skip)
            .filter(|&n| n < self.capacity())
            .ok_or_else(|| Error::Domain(format!("index {index} exceeds sequence capacity")))?;

        let k = self.digits;
        let mut a = [0u32; 64];
        let mut used = 0;
        let mut rest = n;
        while rest > 0 {
            a[used] = (rest % self.base) as u32;
            rest /= self.base;
            used += 1;
        }
        let digits = &a[..used];

        for (slot, (g, out)) in self.generators.chunks_exact(k * k).zip(out.iter_mut()).enumerate() {
            let mut numerator: u64 = 0;
            for (r, row) in g.chunks_exact(k).enumerate() {
                // a Tezuka factor fills the lower triangle, so scan every used digit
                let y: u32 = row[..used].iter().zip(digits).map(|(gk, ak)| gk * ak).sum();
                let mut y = self.reduce(y);
                if let Some(perms) = &self.permutations {
                    y = perms[slot][r][y as usize] as u32;
                }
                numerator = numerator * self.base + y as u64;
            }
            *out = numerator as f64 / self.scale;
        }
        Ok(())
    }

    /// Sequential reader starting at `index`; much cheaper per point than
    /// [`Self::fill`] because each step only adds the generator columns of the
    /// index digits that changed.
    pub fn cursor(&self, index: u64) -> Result<FaureCursor<'_>> {
        let n = index
            .checked_add(self.config.skip)
            .filter(|&n| n <= self.capacity())
            .ok_or_else(|| Error::Domain(format!("index {index} exceeds sequence capacity")))?;
        let k = self.digits;
        let mut a = vec![0u32; k];
        let mut rest = n;
        for d in a.iter_mut() {
            *d = (rest % self.base) as u32;
            rest /= self.base;
        }
        let mut y = vec![0u32; self.dimension() * k];
        for (g, ys) in self.generators.chunks_exact(k * k).zip(y.chunks_exact_mut(k)) {
            for (row, yr) in g.chunks_exact(k).zip(ys.iter_mut()) {
                *yr = self.reduce(row.iter().zip(&a).map(|(gk, ak)| gk * ak).sum());
            }
        }
        Ok(FaureCursor { seq: self, n, a, y })
    }

    /// `y mod base` by multiplication (exact for 32-bit `y`).
    #[inline]
    fn reduce(&self, y: u32) -> u32 {
        let low = self.reciprocal.wrapping_mul(y as u64);
        ((low as u128 * self.base as u128) >> 64) as u32
    }

    pub fn stream(&self, start: u64, count: u64) -> impl Iterator<Item = Result<Point>> + '_ {
        (start..start.saturating_add(count)).map(move |i| self.point(i))
    }
}

/// Consecutive points of a [`FaureSequence`].
#[derive(Clone, Debug)]
pub struct FaureCursor<'a> {
    seq: &'a FaureSequence,
    /// Absolute position (skip included) of the next point.
    n: u64,
    a: Vec<u32>,
    /// Output digits per coordinate, most significant first.
    y: Vec<u32>,
}

impl FaureCursor<'_> {
    /// Index (skip excluded) of the point the next call writes.
    pub fn index(&self) -> u64 {
        self.n - self.seq.config.skip
    }

    /// Writes the current point into `out` and moves to the next index.
    pub fn fill_next(&mut self, out: &mut [f64]) -> Result<()> {
        let seq = self.seq;
        if out.len() != seq.dimension() {
            return Err(Error::DimensionMismatch { expected: seq.dimension(), got: out.len() });
        }
        if self.n >= seq.capacity() {
            return Err(Error::Domain("sequence capacity exhausted".into()));
        }
        let k = seq.digits;
        for (slot, (ys, o)) in self.y.chunks_exact(k).zip(out.iter_mut()).enumerate() {
            let mut numerator: u64 = 0;
            match &seq.permutations {
                Some(perms) => {
                    for (r, &yr) in ys.iter().enumerate() {
                        numerator = numerator * seq.base + perms[slot][r][yr as usize];
                    }
                }
                None => {
                    for &yr in ys {
                        numerator = numerator * seq.base + yr as u64;
                    }
                }
            }
            *o = numerator as f64 / seq.scale;
        }
        self.n += 1;
        // increment the index digits; every wrapped digit i moves by -(b-1),
        // which is +1 mod b, so each changed digit adds its column once
        let base = seq.base as u32;
        let mut i = 0;
        while i < k {
            let wrapped = self.a[i] + 1 == base;
            self.a[i] = if wrapped { 0 } else { self.a[i] + 1 };
            for (cols, ys) in seq.columns.chunks_exact(k * k).zip(self.y.chunks_exact_mut(k)) {
                for (yr, &c) in ys.iter_mut().zip(&cols[i * k..(i + 1) * k]) {
                    let v = *yr + c;
                    *yr = if v >= base { v - base } else { v };
                }
            }
            if !wrapped {
                break;
            }
            i += 1;
        }
        Ok(())
    }
}

/// The `index`-th point of the sequence described by `config`.
pub fn faure_point(config: &SequenceConfig, index: u64) -> Result<Point> {
    FaureSequence::new(config.clone())?.point(index)
}

/// Points `start .. start + count`, projected onto `coordinate_subset` if set.
pub fn stream(config: &SequenceConfig, start: u64, count: u64) -> Result<Vec<Point>> {
    let seq = FaureSequence::new(config.clone())?;
    seq.stream(start, count).collect()
}

/// Reproducible pseudorandom points. Point `i` is drawn from ChaCha stream `i`,
/// so any shard of indices can be produced without generating its predecessors.
#[derive(Clone, Debug)]
pub struct PrngSequence {
    seed: u64,
    dimension: usize,
}

impl PrngSequence {
    pub fn new(seed: u64, dimension: usize) -> Self {
        PrngSequence { seed, dimension }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn fill(&self, index: u64, out: &mut [f64]) -> Result<()> {
        if out.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: out.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        for x in out.iter_mut() {
            *x = rng.gen::<f64>();
        }
        Ok(())
    }

    pub fn point(&self, index: u64) -> Point {
        let mut coords = vec![0.0; self.dimension];
        self.fill(index, &mut coords).expect("dimension matches");
        Point { coords }
    }
}

pub fn prng_stream(seed: u64, dimension: usize, count: u64) -> Vec<Point> {
    let seq = PrngSequence::new(seed, dimension);
    (0..count).map(|i| seq.point(i)).collect()
}

/// Either kind of point source, as used by the integration driver.
#[derive(Clone, Debug)]
pub enum PointSource {
    Faure(FaureSequence),
    Prng(PrngSequence),
}

impl PointSource {
    pub fn dimension(&self) -> usize {
        match self {
            PointSource::Faure(s) => s.dimension(),
            PointSource::Prng(s) => s.dimension(),
        }
    }

    /// Calls `f` with points `start .. start + count` in order.
    pub fn for_each<F>(&self, start: u64, count: u64, mut f: F) -> Result<()>
    where
        F: FnMut(u64, &[f64]) -> Result<()>,
    {
        let mut coords = vec![0.0; self.dimension()];
        match self {
            PointSource::Faure(s) => {
                let mut cursor = s.cursor(start)?;
                for i in start..start + count {
                    cursor.fill_next(&mut coords)?;
                    f(i, &coords)?;
                }
            }
            PointSource::Prng(s) => {
                for i in start..start + count {
                    s.fill(i, &mut coords)?;
                    f(i, &coords)?;
                }
            }
        }
        Ok(())
    }

    pub fn fill(&self, index: u64, out: &mut [f64]) -> Result<()> {
        match self {
            PointSource::Faure(s) => s.fill(index, out),
            PointSource::Prng(s) => s.fill(index, out),
        }
    }
}

fn digits_for_capacity(base: u64) -> usize {
    let mut digits = 0usize;
    let mut cap: u128 = 1;
    while cap < 1u128 << INDEX_CAPACITY_BITS {
        cap *= base as u128;
        digits += 1;
    }
    digits
}

fn binomials_mod(n: usize, base: u64) -> Vec<Vec<u64>> {
    let mut c = vec![vec![0u64; n]; n];
    for k in 0..n {
        c[k][0] = 1;
        for r in 1..=k {
            c[k][r] = (c[k - 1][r - 1] + if r < k { c[k - 1][r] } else { 0 }) % base;
        }
    }
    c
}

fn pascal_power(j: u64, k: usize, base: u64, binom: &[Vec<u64>]) -> Vec<u64> {
    let mut g = vec![0u64; k * k];
    let j = j % base;
    for r in 0..k {
        for col in r..k {
            // j^(col - r) mod base, with 0^0 = 1
            let mut p = 1u64;
            for _ in 0..(col - r) {
                p = p * j % base;
            }
            g[r * k + col] = binom[col][r] * p % base;
        }
    }
    g
}

fn random_lower_triangular(rng: &mut impl RngCore, k: usize, base: u64) -> Vec<u64> {
    let mut a = vec![0u64; k * k];
    for r in 0..k {
        for c in 0..r {
            a[r * k + c] = rng.gen_range(0..base);
        }
        a[r * k + r] = rng.gen_range(1..base);
    }
    a
}

fn mat_mul_mod(a: &[u64], b: &[u64], k: usize, base: u64) -> Vec<u64> {
    let mut out = vec![0u64; k * k];
    for r in 0..k {
        for c in 0..k {
            let mut s = 0u64;
            for m in 0..k {
                s = (s + a[r * k + m] * b[m * k + c]) % base;
            }
            out[r * k + c] = s;
        }
    }
    out
}

fn random_permutation(rng: &mut impl RngCore, base: u64) -> Vec<u64> {
    let mut p: Vec<u64> = (0..base).collect();
    for i in (1..p.len()).rev() {
        let j = rng.gen_range(0..=i);
        p.swap(i, j);
    }
    p
}

/// True when every elementary box of volume `base^-m` holds exactly one of
/// the `base^m` points.
pub fn is_zero_m_s_net(points: &[Point], base: u64, m: u32) -> bool {
    fn compositions(s: usize, m: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let used: u32 = cur.iter().sum();
        if cur.len() == s - 1 {
            cur.push(m - used);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in 0..=(m - used) {
            cur.push(e);
            compositions(s, m, cur, out);
            cur.pop();
        }
    }
    let Some(first) = points.first() else {
        return false;
    };
    let s = first.dimension();
    if s == 0 || points.len() as u64 != base.pow(m) {
        return false;
    }
    let mut all = Vec::new();
    compositions(s, m, &mut Vec::new(), &mut all);
    all.iter().all(|exps| {
        let mut seen = std::collections::HashSet::new();
        points.iter().all(|p| {
            let key: Vec<u64> = p
                .coords
                .iter()
                .zip(exps)
                .map(|(&x, &e)| (x * base.pow(e) as f64).floor() as u64)
                .collect();
            seen.insert(key)
        })
    })
}
