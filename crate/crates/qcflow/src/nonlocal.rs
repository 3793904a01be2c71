//! The compact obstacle set K and sublevel-measure queries
//! m(K ∩ {u < h}) / m(K ∩ {u <= h}) backing the nonlocal operator term.
//!
//! Cells are node-centered boxes of one cell volume; a cell belongs to K when
//! its center (the node) does. Measures are cell-counted, so a ball K carries
//! an O(h) boundary error alongside its exact total.

use crate::error::{Error, Result};
use crate::fields::{GridSpec, ScalarField};
use crate::matrix::dist;

#[derive(Clone, Debug)]
pub enum ObstacleKind {
    Ball { center: Vec<f64>, radius: f64 },
    /// One flag per grid node; true marks membership.
    Mask { cells: Vec<bool> },
}

/// Compact set K with its total measure (exact for balls, cell-counted for
/// masks).
#[derive(Clone, Debug)]
pub struct ObstacleSet {
    pub kind: ObstacleKind,
    pub measure_total: f64,
}

impl ObstacleSet {
    pub fn ball(center: Vec<f64>, radius: f64, grid: &GridSpec) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Obstacle(format!("radius must be positive, got {radius}")));
        }
        if center.len() != grid.dim() {
            return Err(Error::Obstacle("center dimension mismatch".into()));
        }
        for k in 0..grid.dim() {
            if center[k] - radius < grid.lower()[k] - 1e-12
                || center[k] + radius > grid.upper()[k] + 1e-12
            {
                return Err(Error::Obstacle("ball K is not contained in the grid box".into()));
            }
        }
        let measure_total = match grid.dim() {
            1 => 2.0 * radius,
            _ => std::f64::consts::PI * radius * radius,
        };
        Ok(ObstacleSet { kind: ObstacleKind::Ball { center, radius }, measure_total })
    }

    pub fn mask(cells: Vec<bool>, grid: &GridSpec) -> Result<Self> {
        if cells.len() != grid.num_points() {
            return Err(Error::Obstacle("mask length does not match grid".into()));
        }
        let count = cells.iter().filter(|&&b| b).count();
        Ok(ObstacleSet {
            kind: ObstacleKind::Mask { cells },
            measure_total: count as f64 * grid.cell_volume(),
        })
    }

    /// Mask from a snapshot field: nodes with value > 0.5 belong to K.
    pub fn mask_from_field(field: &ScalarField) -> Result<Self> {
        let cells = field.values().iter().map(|&v| v > 0.5).collect();
        ObstacleSet::mask(cells, field.grid())
    }

    pub fn contains(&self, grid: &GridSpec, flat: usize) -> bool {
        match &self.kind {
            ObstacleKind::Ball { center, radius } => {
                dist(&grid.point(flat), center) <= *radius
            }
            ObstacleKind::Mask { cells } => cells[flat],
        }
    }
}

/// Sorted (value, weight) pairs over the cells of K with prefix sums,
/// answering sublevel measures in logarithmic time.
#[derive(Clone, Debug)]
pub struct SublevelMeasureIndex {
    values: Vec<f64>,
    /// prefix[k] = sum of weights of the first k sorted cells.
    prefix: Vec<f64>,
}

impl SublevelMeasureIndex {
    /// Index over explicitly weighted cells.
    pub fn from_weighted(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values = Vec::with_capacity(pairs.len());
        let mut prefix = Vec::with_capacity(pairs.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for (v, w) in pairs {
            values.push(v);
            acc += w;
            prefix.push(acc);
        }
        SublevelMeasureIndex { values, prefix }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Total indexed weight (cell-counted measure of K).
    pub fn total(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    /// m(K ∩ {u < h}), cell-counted.
    pub fn measure_strict(&self, h: f64) -> f64 {
        let k = self.values.partition_point(|&v| v < h);
        self.prefix[k]
    }

    /// m(K ∩ {u <= h}), cell-counted.
    pub fn measure_nonstrict(&self, h: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= h);
        self.prefix[k]
    }

    /// Median of the indexed values; NaN when the index is empty.
    pub fn median_value(&self) -> f64 {
        if self.values.is_empty() {
            f64::NAN
        } else {
            self.values[self.values.len() / 2]
        }
    }
}

/// Index every grid cell whose center lies in K, weighted by cell volume.
pub fn build_index(field: &ScalarField, k: &ObstacleSet) -> SublevelMeasureIndex {
    let grid = field.grid();
    let w = grid.cell_volume();
    let mut pairs = Vec::new();
    match &k.kind {
        ObstacleKind::Ball { center, radius } => {
            // restrict the scan to the bounding box of the ball
            match grid.dim() {
                1 => {
                    let h = grid.spacing(0);
                    let lo = ((center[0] - radius - grid.lower()[0]) / h).floor().max(0.0) as usize;
                    let hi =
                        (((center[0] + radius - grid.lower()[0]) / h).ceil() as usize).min(grid.counts()[0] - 1);
                    for i in lo..=hi {
                        if (grid.coord(0, i) - center[0]).abs() <= *radius {
                            pairs.push((field.values()[i], w));
                        }
                    }
                }
                _ => {
                    let (hx, hy) = (grid.spacing(0), grid.spacing(1));
                    let ilo = ((center[0] - radius - grid.lower()[0]) / hx).floor().max(0.0) as usize;
                    let ihi = (((center[0] + radius - grid.lower()[0]) / hx).ceil() as usize)
                        .min(grid.counts()[0] - 1);
                    let jlo = ((center[1] - radius - grid.lower()[1]) / hy).floor().max(0.0) as usize;
                    let jhi = (((center[1] + radius - grid.lower()[1]) / hy).ceil() as usize)
                        .min(grid.counts()[1] - 1);
                    let r2 = radius * radius;
                    for i in ilo..=ihi {
                        let dx = grid.coord(0, i) - center[0];
                        for j in jlo..=jhi {
                            let dy = grid.coord(1, j) - center[1];
                            if dx * dx + dy * dy <= r2 {
                                pairs.push((field.values()[grid.flat(&[i, j])], w));
                            }
                        }
                    }
                }
            }
        }
        ObstacleKind::Mask { cells } => {
            for (flat, &inside) in cells.iter().enumerate() {
                if inside {
                    pairs.push((field.values()[flat], w));
                }
            }
        }
    }
    SublevelMeasureIndex::from_weighted(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;
    use std::f64::consts::PI;

    fn disk_setup(n: usize) -> (ScalarField, ObstacleSet) {
        let g = GridSpec::new_2d([-2.0, -2.0], [2.0, 2.0], [n, n]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| (x[0] * x[0] + x[1] * x[1]).sqrt() + 1.0)
            .unwrap();
        let k = ObstacleSet::ball(vec![0.0, 0.0], 1.0, &g).unwrap();
        (f, k)
    }

    #[test]
    fn ball_total_weight_near_pi() {
        let (f, k) = disk_setup(81); // h = 0.05
        let idx = build_index(&f, &k);
        let h = f.grid().spacing(0);
        // cell-counting error bound: 2 * perimeter * h
        assert!((idx.total() - PI).abs() <= 2.0 * (2.0 * PI) * h, "total {}", idx.total());
    }

    #[test]
    fn empty_and_single_cell_masks() {
        let g = GridSpec::new_2d([0.0, 0.0], [1.0, 1.0], [5, 5]).unwrap();
        let f = ScalarField::constant(g.clone(), 1.0).unwrap();
        let empty = ObstacleSet::mask(vec![false; 25], &g).unwrap();
        let idx = build_index(&f, &empty);
        assert!(idx.is_empty());
        assert_eq!(idx.total(), 0.0);

        let mut cells = vec![false; 25];
        cells[12] = true;
        let single = ObstacleSet::mask(cells, &g).unwrap();
        let idx = build_index(&f, &single);
        assert_eq!(idx.len(), 1);
        let h = g.spacing(0);
        assert!((idx.total() - h * h).abs() < 1e-15);
    }

    #[test]
    fn ball_outside_box_rejected() {
        let g = GridSpec::new_2d([-1.0, -1.0], [1.0, 1.0], [11, 11]).unwrap();
        assert!(ObstacleSet::ball(vec![0.5, 0.0], 1.0, &g).is_err());
        assert!(ObstacleSet::ball(vec![0.0, 0.0], -1.0, &g).is_err());
    }

    #[test]
    fn measure_strict_disk_levels() {
        // u = |x| + 1, K unit ball: sublevel {u < 1.5} is the half-radius disk
        let (f, k) = disk_setup(801); // h = 0.005
        let idx = build_index(&f, &k);
        assert!((idx.measure_strict(1.5) - PI / 4.0).abs() <= 0.02);
        assert!((idx.measure_strict(2.0) - PI).abs() <= 0.02);
        assert!((idx.measure_nonstrict(2.0) - PI).abs() <= 0.02);
        // below min and above max
        assert_eq!(idx.measure_strict(0.9), 0.0);
        assert_eq!(idx.measure_strict(10.0), idx.total());
    }

    #[test]
    fn nonstrict_vs_strict_tie_handling() {
        let g = GridSpec::new_2d([0.0, 0.0], [1.0, 1.0], [5, 5]).unwrap();
        let f = ScalarField::constant(g.clone(), 2.0).unwrap();
        let k = ObstacleSet::mask(vec![true; 25], &g).unwrap();
        let idx = build_index(&f, &k);
        assert_eq!(idx.measure_strict(2.0), 0.0);
        assert!((idx.measure_nonstrict(2.0) - idx.total()).abs() < 1e-15);

        // distinct values: nonstrict = strict + weight of exact matches
        let f2 = ScalarField::from_fn(g.clone(), |x| x[0] + 10.0 * x[1]).unwrap();
        let idx2 = build_index(&f2, &k);
        let h = f2.values()[7];
        let exact: f64 = f2
            .values()
            .iter()
            .filter(|&&v| v == h)
            .count() as f64
            * g.cell_volume();
        assert!((idx2.measure_nonstrict(h) - idx2.measure_strict(h) - exact).abs() < 1e-15);
    }

    #[test]
    fn monotonicity_and_sandwich() {
        let (f, k) = disk_setup(161);
        let idx = build_index(&f, &k);
        let mut prev_s = -1.0;
        let mut prev_n = -1.0;
        for step in 0..200 {
            let h = 0.8 + step as f64 * 0.01;
            let s = idx.measure_strict(h);
            let n = idx.measure_nonstrict(h);
            assert!(s >= prev_s && n >= prev_n, "monotone in h");
            assert!(s <= n, "strict <= nonstrict");
            assert!(n <= idx.total() && s >= 0.0);
            prev_s = s;
            prev_n = n;
        }
    }

    #[test]
    fn ball_accuracy_first_order_constant() {
        // |measured - analytic| <= 10 * h for the half-level disk across refinements
        for n in [101usize, 201, 401] {
            let (f, k) = disk_setup(n);
            let idx = build_index(&f, &k);
            let h = f.grid().spacing(0);
            let err = (idx.measure_strict(1.5) - PI / 4.0).abs();
            assert!(err <= 10.0 * h, "n={n}: err {err} vs 10h {}", 10.0 * h);
        }
    }

    #[test]
    fn mask_total_matches_exactly() {
        let g = GridSpec::new_2d([0.0, 0.0], [1.0, 1.0], [9, 9]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| x[0]).unwrap();
        let cells: Vec<bool> = (0..81).map(|k| k % 3 == 0).collect();
        let k = ObstacleSet::mask(cells, &g).unwrap();
        let idx = build_index(&f, &k);
        assert!((idx.total() - k.measure_total).abs() < 1e-12 * k.measure_total.max(1.0));
    }
}
