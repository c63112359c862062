//! Collocation sampling and per-term point pools.

use rand::seq::SliceRandom;

use crate::error::{config, Result};
use crate::pde::{Domain, Location, PdeProblem, TrainingGrid};
use crate::rng::{uniform, Rng};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SamplingMethod {
    /// Tensor grid with endpoints; `None` spreads `count` evenly over every
    /// dimension, which must then be a perfect power.
    UniformGrid(Option<Vec<usize>>),
    LatinHypercube,
}

/// Row-major `[point][dim]` tensor grid including the bounds.
pub fn uniform_grid(domain: &Domain, counts: &[usize]) -> Result<Vec<f64>> {
    if counts.len() != domain.dim() || counts.iter().any(|&c| c == 0) {
        return config("grid needs a positive node count per dimension");
    }
    let d = domain.dim();
    let total: usize = counts.iter().product();
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let (lo, hi, n) = (domain.lower[k], domain.upper[k], counts[k]);
            if n == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }
        })
        .collect();
    let mut out = Vec::with_capacity(total * d);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        out.extend((0..d).map(|k| axes[k][idx[k]]));
        // last dimension fastest
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(out)
}

/// One point per stratum `[i/n, (i+1)/n)` of every axis, strata paired by
/// independent random permutations.
pub fn latin_hypercube(domain: &Domain, count: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    if count == 0 {
        return config("sample count must be at least 1");
    }
    let d = domain.dim();
    let mut out = vec![0.0; count * d];
    let mut perm: Vec<usize> = (0..count).collect();
    for k in 0..d {
        perm.shuffle(rng);
        let (lo, w) = (domain.lower[k], domain.extent(k));
        for (i, &s) in perm.iter().enumerate() {
            let u = (s as f64 + uniform(rng, 0.0, 1.0)) / count as f64;
            out[i * d + k] = lo + w * u.min(1.0);
        }
    }
    Ok(out)
}

pub fn sample_collocation(
    domain: &Domain,
    count: usize,
    method: &SamplingMethod,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    match method {
        SamplingMethod::LatinHypercube => latin_hypercube(domain, count, rng),
        SamplingMethod::UniformGrid(Some(counts)) => uniform_grid(domain, counts),
        SamplingMethod::UniformGrid(None) => {
            let d = domain.dim() as u32;
            let side = (count as f64).powf(1.0 / d as f64).round() as usize;
            if side.pow(d) != count {
                return config(format!("{count} points do not form a {d}-dimensional grid"));
            }
            uniform_grid(domain, &vec![side; d as usize])
        }
    }
}

/// Boundary face identifier: `2 * dim + upper`.
pub fn face_id(dim: usize, upper: bool) -> usize {
    2 * dim + upper as usize
}

/// Fixed set of points drawn without replacement, reshuffled each epoch.
#[derive(Debug, Clone, Default)]
pub struct Pool {
    dim: usize,
    points: Vec<f64>,
    tags: Vec<usize>,
    order: Vec<usize>,
    cursor: usize,
}

impl Pool {
    pub fn new(dim: usize, points: Vec<f64>, tags: Vec<usize>) -> Self {
        let n = points.len() / dim.max(1);
        debug_assert_eq!(tags.len(), n);
        Pool {
            dim,
            points,
            tags,
            order: (0..n).collect(),
            cursor: n,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `n` members; a pool smaller than `n` yields every member once.
    pub fn draw(&mut self, n: usize, rng: &mut Rng) -> (Vec<f64>, Vec<usize>) {
        let len = self.len();
        let n = n.min(len);
        let mut pts = Vec::with_capacity(n * self.dim);
        let mut tags = Vec::with_capacity(n);
        if n == len {
            pts.extend_from_slice(&self.points);
            tags.extend_from_slice(&self.tags);
            return (pts, tags);
        }
        for _ in 0..n {
            if self.cursor >= len {
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            let i = self.order[self.cursor];
            self.cursor += 1;
            pts.extend_from_slice(&self.points[i * self.dim..(i + 1) * self.dim]);
            tags.push(self.tags[i]);
        }
        (pts, tags)
    }
}

/// Points for one loss evaluation. Boundary points carry their face id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub pde: Vec<f64>,
    pub ic: Vec<f64>,
    pub bc: Vec<f64>,
    pub bc_faces: Vec<usize>,
    /// Indices into the problem's observations.
    pub data: Vec<usize>,
}

/// Draws batches for a problem, either from its fixed training sample or
/// freshly at every evaluation.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    domain: Domain,
    faces: Vec<(usize, bool)>,
    has_ic: bool,
    fresh: bool,
    interior: Pool,
    initial: Pool,
    boundary: Pool,
    data: Pool,
}

fn classify(domain: &Domain, faces: &[(usize, bool)], p: &[f64]) -> Option<usize> {
    for d in domain.spatial_dims() {
        for upper in [false, true] {
            let bound = if upper { domain.upper[d] } else { domain.lower[d] };
            if p[d] == bound {
                return faces
                    .contains(&(d, upper))
                    .then_some(face_id(d, upper));
            }
        }
    }
    None
}

impl BatchSampler {
    pub fn new(problem: &PdeProblem, fresh: bool, rng: &mut Rng) -> Result<Self> {
        let domain = problem.domain.clone();
        let d = domain.dim();
        let mut faces = Vec::new();
        let mut has_ic = false;
        for c in problem.active_conditions() {
            match c.location {
                Location::Face { dim, upper } => {
                    if !faces.contains(&(dim, upper)) {
                        faces.push((dim, upper));
                    }
                }
                Location::InitialSlice => has_ic = true,
            }
        }
        if has_ic && domain.time.is_none() {
            return config("initial conditions need a time dimension");
        }
        let data_len = problem.observations.as_ref().map_or(0, |o| o.len());
        let data = Pool::new(1, (0..data_len).map(|i| i as f64).collect(), (0..data_len).collect());
        let mut sampler = BatchSampler {
            domain: domain.clone(),
            faces,
            has_ic,
            fresh,
            interior: Pool::default(),
            initial: Pool::default(),
            boundary: Pool::default(),
            data,
        };
        if fresh {
            return Ok(sampler);
        }

        let (mut interior, mut initial, mut boundary, mut faces_of) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        match &problem.defaults.grid {
            TrainingGrid::Uniform(counts) => {
                let nodes = uniform_grid(&domain, counts)?;
                for p in nodes.chunks_exact(d) {
                    if domain.time.is_some_and(|t| p[t] == domain.lower[t]) {
                        if sampler.has_ic {
                            initial.extend_from_slice(p);
                        }
                        continue;
                    }
                    match classify(&domain, &sampler.faces, p) {
                        Some(f) => {
                            boundary.extend_from_slice(p);
                            faces_of.push(f);
                        }
                        None => interior.extend_from_slice(p),
                    }
                }
            }
            TrainingGrid::Lhs(n) => {
                interior = latin_hypercube(&domain, *n, rng)?;
                let per_face = ((*n as f64).powf((d as f64 - 1.0) / d as f64).ceil() as usize).max(1);
                for &(dim, upper) in &sampler.faces.clone() {
                    let pts = sampler.face_points(dim, upper, per_face, rng)?;
                    faces_of.extend(std::iter::repeat_n(face_id(dim, upper), pts.len() / d));
                    boundary.extend(pts);
                }
                if sampler.has_ic {
                    initial = sampler.initial_points(per_face, rng)?;
                }
            }
        }
        let n_int = interior.len() / d;
        let n_ic = initial.len() / d;
        sampler.interior = Pool::new(d, interior, vec![0; n_int]);
        sampler.initial = Pool::new(d, initial, vec![0; n_ic]);
        sampler.boundary = Pool::new(d, boundary, faces_of);
        Ok(sampler)
    }

    fn face_points(&self, dim: usize, upper: bool, n: usize, rng: &mut Rng) -> Result<Vec<f64>> {
        let d = self.domain.dim();
        let value = if upper { self.domain.upper[dim] } else { self.domain.lower[dim] };
        if d == 1 {
            return Ok(vec![value]);
        }
        let mut pts = latin_hypercube(&self.domain, n, rng)?;
        for p in pts.chunks_exact_mut(d) {
            p[dim] = value;
        }
        Ok(pts)
    }

    fn initial_points(&self, n: usize, rng: &mut Rng) -> Result<Vec<f64>> {
        let d = self.domain.dim();
        let t = self.domain.time.expect("checked at construction");
        let mut pts = latin_hypercube(&self.domain, n, rng)?;
        for p in pts.chunks_exact_mut(d) {
            p[t] = self.domain.lower[t];
        }
        Ok(pts)
    }

    pub fn pool_sizes(&self) -> (usize, usize, usize) {
        (self.interior.len(), self.initial.len(), self.boundary.len())
    }

    pub fn draw(&mut self, counts: &crate::pde::BatchComposition, rng: &mut Rng) -> Result<Batch> {
        let mut batch = Batch::default();
        let d = self.domain.dim();
        if self.fresh {
            if counts.pde > 0 {
                batch.pde = latin_hypercube(&self.domain, counts.pde, rng)?;
            }
            if self.has_ic && counts.ic > 0 {
                batch.ic = self.initial_points(counts.ic, rng)?;
            }
            if !self.faces.is_empty() && counts.bc > 0 {
                // faces weighted by their measure
                let weights: Vec<f64> = self
                    .faces
                    .iter()
                    .map(|&(dim, _)| {
                        self.domain
                            .spatial_dims()
                            .chain(self.domain.time)
                            .filter(|&k| k != dim)
                            .map(|k| self.domain.extent(k))
                            .product()
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                for _ in 0..counts.bc {
                    let mut r = uniform(rng, 0.0, total);
                    let mut pick = self.faces.len() - 1;
                    for (i, w) in weights.iter().enumerate() {
                        if r < *w {
                            pick = i;
                            break;
                        }
                        r -= w;
                    }
                    let (dim, upper) = self.faces[pick];
                    let mut p: Vec<f64> = (0..d)
                        .map(|k| uniform(rng, self.domain.lower[k], self.domain.upper[k]))
                        .collect();
                    p[dim] = if upper { self.domain.upper[dim] } else { self.domain.lower[dim] };
                    batch.bc.extend(p);
                    batch.bc_faces.push(face_id(dim, upper));
                }
            }
        } else {
            batch.pde = self.interior.draw(counts.pde, rng).0;
            if self.has_ic {
                batch.ic = self.initial.draw(counts.ic, rng).0;
            }
            let (bc, faces) = self.boundary.draw(counts.bc, rng);
            batch.bc = bc;
            batch.bc_faces = faces;
        }
        batch.data = self.data.draw(counts.data, rng).1;
        Ok(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{self, BatchComposition};
    use crate::rng::stream;

    fn unit(d: usize) -> Domain {
        let labels = ["x", "y", "z"];
        Domain::new(&labels[..d], &vec![(0.0, 1.0); d], None).unwrap()
    }

    #[test]
    fn lhs_stratifies() {
        let mut rng = stream(1, 2);
        let pts = latin_hypercube(&unit(1), 4, &mut rng).unwrap();
        let mut strata: Vec<usize> = pts.iter().map(|x| (x * 4.0).floor() as usize).collect();
        strata.sort();
        assert_eq!(strata, vec![0, 1, 2, 3]);
    }

    #[test]
    fn grid_of_three() {
        let pts = sample_collocation(&unit(1), 3, &SamplingMethod::UniformGrid(None), &mut stream(0, 0)).unwrap();
        assert_eq!(pts, vec![0.0, 0.5, 1.0]);
        assert!(sample_collocation(&unit(2), 5, &SamplingMethod::UniformGrid(None), &mut stream(0, 0)).is_err());
        assert!(latin_hypercube(&unit(1), 0, &mut stream(0, 0)).is_err());
    }

    #[test]
    fn grid_order_last_dim_fastest() {
        let d = Domain::new(&["x", "t"], &[(0.0, 2.0), (0.0, 1.0)], Some(1)).unwrap();
        let pts = uniform_grid(&d, &[2, 3]).unwrap();
        assert_eq!(pts, vec![0.0, 0.0, 0.0, 0.5, 0.0, 1.0, 2.0, 0.0, 2.0, 0.5, 2.0, 1.0]);
    }

    #[test]
    fn pool_cycles_without_replacement() {
        let mut pool = Pool::new(1, (0..10).map(|i| i as f64).collect(), (0..10).collect());
        let mut rng = stream(4, 2);
        let mut seen: Vec<usize> = (0..5).flat_map(|_| pool.draw(2, &mut rng).1).collect();
        seen.sort();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        assert_eq!(pool.draw(50, &mut rng).1.len(), 10);
    }

    #[test]
    fn wave_pools_partition_the_grid() {
        let p = pde::wave();
        let s = BatchSampler::new(&p, false, &mut stream(0, 2)).unwrap();
        let (interior, initial, boundary) = s.pool_sizes();
        assert_eq!(initial, 256);
        assert_eq!(boundary, 2 * 255);
        assert_eq!(interior + initial + boundary, 256 * 256);
    }

    #[test]
    fn cavity_corners_belong_to_side_walls() {
        let p = pde::cavity();
        let mut s = BatchSampler::new(&p, false, &mut stream(0, 2)).unwrap();
        let counts = BatchComposition { pde: 0, ic: 0, bc: 52 * 4, data: 0 };
        let b = s.draw(&counts, &mut stream(0, 3)).unwrap();
        for (p, f) in b.bc.chunks(2).zip(&b.bc_faces) {
            if p[1] == 1.0 && (p[0] == 0.0 || p[0] == 1.0) {
                assert!(*f < 2);
            }
        }
    }

    #[test]
    fn convdiff_boundary_is_both_endpoints() {
        let p = pde::convdiff();
        let mut s = BatchSampler::new(&p, false, &mut stream(0, 2)).unwrap();
        let b = s.draw(&p.defaults.batch, &mut stream(0, 3)).unwrap();
        assert_eq!(b.pde.len(), 499);
        assert_eq!(b.bc, vec![0.0, 1.0]);
        assert_eq!(b.bc_faces, vec![0, 1]);
    }

    #[test]
    fn fresh_batches_stay_inside() {
        let p = pde::taylor_green();
        let mut s = BatchSampler::new(&p, true, &mut stream(0, 2)).unwrap();
        let b = s.draw(&p.defaults.batch, &mut stream(0, 3)).unwrap();
        assert_eq!(b.pde.len(), 450 * 3);
        assert_eq!(b.ic.len(), 40 * 3);
        assert_eq!(b.bc_faces.len(), 10);
        for pt in b.pde.chunks(3).chain(b.ic.chunks(3)).chain(b.bc.chunks(3)) {
            assert!(p.domain.contains(pt));
        }
        for pt in b.ic.chunks(3) {
            assert_eq!(pt[2], 0.0);
        }
    }
}
