//! Confidence-gated particle re-detection.
//!
//! When the single-window peak falls below the threshold, candidate windows
//! are drawn around the previous position, each is scored with the current
//! filter, and the candidate with the highest peak wins. Particles are
//! regenerated on every activation; no weights persist between frames.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeaturePatch;
use crate::kcf::{self, FilterModel, ResponseMap};

/// Which path resolved a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Initialization frame.
    Init,
    /// Direct correlation-filter tracking.
    Cft,
    /// Particle re-detection.
    Pft,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Init => "INIT",
            Branch::Cft => "CFT",
            Branch::Pft => "PFT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedetectParams {
    pub particle_count: usize,
    pub threshold: f64,
    /// Per-axis standard deviation in pixels; `None` uses half the target size.
    pub spread_sigma: Option<(f64, f64)>,
    pub rng_seed: u64,
}

impl Default for RedetectParams {
    fn default() -> Self {
        RedetectParams {
            particle_count: 100,
            threshold: 0.05,
            spread_sigma: None,
            rng_seed: 0,
        }
    }
}

impl RedetectParams {
    pub fn validate(&self) -> Result<()> {
        if self.particle_count == 0 {
            return Err(Error::invalid("particle count must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        if let Some((sx, sy)) = self.spread_sigma {
            if !(sx > 0.0 && sy > 0.0) {
                return Err(Error::invalid("particle spread must be positive"));
            }
        }
        Ok(())
    }

    /// Spread used for a target of size `(w, h)`.
    pub fn sigma_for(&self, size: (f64, f64)) -> (f64, f64) {
        self.spread_sigma.unwrap_or((size.0 / 2.0, size.1 / 2.0))
    }
}

/// CFT when the peak reaches the threshold, PFT otherwise.
pub fn gate(max_r: f64, theta: f64) -> Branch {
    if max_r >= theta {
        Branch::Cft
    } else {
        Branch::Pft
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub center: (f64, f64),
    pub response: Option<ResponseMap>,
}

impl Particle {
    pub fn at(center: (f64, f64)) -> Self {
        Particle {
            center,
            response: None,
        }
    }

    /// Peak response, or negative infinity when unscored or failed.
    pub fn score(&self) -> f64 {
        self.response
            .as_ref()
            .map_or(f64::NEG_INFINITY, |r| r.max_value)
    }
}

/// Draws `particle_count` centers from `N(prev_center, diag(sigma^2))`.
///
/// Particle 0 sits exactly on `prev_center`. Centers are clamped into the
/// image extent `[1, width] x [1, height]` (box coordinates), so every
/// candidate window overlaps the image. `stream` selects an independent
/// random stream, so each activation can draw fresh particles reproducibly.
pub fn sample_particles(
    prev_center: (f64, f64),
    sigma: (f64, f64),
    bounds: (usize, usize),
    params: &RedetectParams,
    stream: u64,
) -> Result<Vec<Particle>> {
    params.validate()?;
    let bad_sigma = |_| Error::invalid(format!("invalid particle spread {sigma:?}"));
    if !(sigma.0 > 0.0 && sigma.1 > 0.0) {
        return Err(Error::invalid(format!("particle spread {sigma:?} must be positive")));
    }
    let nx = Normal::new(prev_center.0, sigma.0).map_err(bad_sigma)?;
    let ny = Normal::new(prev_center.1, sigma.1).map_err(bad_sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    rng.set_stream(stream);
    let (max_x, max_y) = (bounds.0.max(1) as f64, bounds.1.max(1) as f64);
    let clamp = |(x, y): (f64, f64)| (x.clamp(1.0, max_x), y.clamp(1.0, max_y));

    let mut particles = Vec::with_capacity(params.particle_count);
    particles.push(Particle::at(clamp(prev_center)));
    for _ in 1..params.particle_count {
        let x = nx.sample(&mut rng);
        let y = ny.sample(&mut rng);
        particles.push(Particle::at(clamp((x, y))));
    }
    Ok(particles)
}

/// Scores each particle's window with the filter, in parallel.
///
/// `features` maps a window center to its feature patch. A particle whose
/// features or detection fail keeps `response: None` (score negative infinity).
/// Output order matches input order.
pub fn score_particles<F>(particles: Vec<Particle>, model: &FilterModel, features: F) -> Vec<Particle>
where
    F: Fn((f64, f64)) -> Result<FeaturePatch> + Sync,
{
    particles
        .into_par_iter()
        .map(|p| {
            let response = features(p.center).and_then(|z| kcf::detect(model, &z));
            match response {
                Ok(r) if r.max_value.is_finite() => Particle {
                    response: Some(r),
                    ..p
                },
                Ok(_) => p,
                Err(e) => {
                    log::debug!("particle at {:?} failed: {e}", p.center);
                    p
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    /// Particle center refined by its in-window peak displacement.
    pub center: (f64, f64),
    pub response: ResponseMap,
}

/// Picks the particle with the highest peak (lowest index on ties) and moves
/// its center by the decoded peak displacement times `px_per_cell = (x, y)`.
pub fn select_best(particles: &[Particle], px_per_cell: (f64, f64)) -> Result<Selection> {
    let mut best: Option<(usize, &ResponseMap)> = None;
    for (i, p) in particles.iter().enumerate() {
        if let Some(r) = &p.response {
            if best.is_none_or(|(_, b)| r.max_value > b.max_value) {
                best = Some((i, r));
            }
        }
    }
    let (index, response) = best.ok_or(Error::TrackingFailure(particles.len()))?;
    let (dy, dx) = response.displacement();
    let (cx, cy) = particles[index].center;
    Ok(Selection {
        index,
        center: (cx + dx as f64 * px_per_cell.0, cy + dy as f64 * px_per_cell.1),
        response: response.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::apply_hann;
    use crate::kcf::{make_labels, train, KcfParams};
    use ndarray::{Array2, Array3};
    use rand::Rng;

    fn response_with_peak(v: f64) -> ResponseMap {
        let mut m = Array2::zeros((4, 4));
        m[[0, 0]] = v;
        ResponseMap::from_values(m).unwrap()
    }

    fn scored(scores: &[f64]) -> Vec<Particle> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| Particle {
                center: (i as f64, 0.0),
                response: s.is_finite().then(|| response_with_peak(s)),
            })
            .collect()
    }

    #[test]
    fn gate_boundaries() {
        assert_eq!(gate(0.30, 0.05), Branch::Cft);
        assert_eq!(gate(0.05, 0.05), Branch::Cft);
        assert_eq!(gate(0.049, 0.05), Branch::Pft);
        assert_eq!(gate(-1.0, 0.05), Branch::Pft);
    }

    #[test]
    fn tiny_spread_collapses_to_previous_center() {
        let params = RedetectParams::default();
        let ps = sample_particles((50.0, 60.0), (1e-12, 1e-12), (320, 240), &params, 3).unwrap();
        assert_eq!(ps.len(), 100);
        assert!(ps
            .iter()
            .all(|p| (p.center.0 - 50.0).abs() < 1e-9 && (p.center.1 - 60.0).abs() < 1e-9));
        assert_eq!(ps[0].center, (50.0, 60.0));
    }

    #[test]
    fn sampling_is_seeded() {
        let params = RedetectParams {
            rng_seed: 42,
            ..Default::default()
        };
        let a = sample_particles((100.0, 80.0), (20.0, 15.0), (320, 240), &params, 7).unwrap();
        let b = sample_particles((100.0, 80.0), (20.0, 15.0), (320, 240), &params, 7).unwrap();
        let c = sample_particles((100.0, 80.0), (20.0, 15.0), (320, 240), &params, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_centers_stay_inside_image() {
        let params = RedetectParams::default();
        let ps = sample_particles((2.0, 239.0), (50.0, 50.0), (320, 240), &params, 1).unwrap();
        assert!(ps.iter().all(|p| (1.0..=320.0).contains(&p.center.0)
            && (1.0..=240.0).contains(&p.center.1)));
    }

    #[test]
    fn sample_mean_matches_center() {
        let n = 100_000;
        let params = RedetectParams {
            particle_count: n,
            rng_seed: 9,
            ..Default::default()
        };
        let (sx, sy) = (12.0, 7.0);
        let ps = sample_particles((500.0, 400.0), (sx, sy), (1000, 800), &params, 0).unwrap();
        let mx = ps.iter().map(|p| p.center.0).sum::<f64>() / n as f64;
        let my = ps.iter().map(|p| p.center.1).sum::<f64>() / n as f64;
        let tol = |s: f64| 3.0 * s / (n as f64).sqrt();
        assert!((mx - 500.0).abs() < tol(sx), "{mx}");
        assert!((my - 400.0).abs() < tol(sy), "{my}");
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = RedetectParams {
            particle_count: 0,
            ..Default::default()
        };
        assert!(sample_particles((1.0, 1.0), (1.0, 1.0), (10, 10), &bad, 0).is_err());
        let bad = RedetectParams {
            threshold: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn select_examples() {
        let one = select_best(&scored(&[0.2]), (4.0, 4.0)).unwrap();
        assert_eq!(one.index, 0);
        assert_eq!(select_best(&scored(&[0.1, 0.7, 0.3]), (4.0, 4.0)).unwrap().index, 1);
        assert_eq!(select_best(&scored(&[0.5, 0.2, 0.5]), (4.0, 4.0)).unwrap().index, 0);
        assert_eq!(
            select_best(&scored(&[f64::NEG_INFINITY, 0.1]), (4.0, 4.0))
                .unwrap()
                .index,
            1
        );
        assert!(matches!(
            select_best(&scored(&[f64::NEG_INFINITY; 3]), (4.0, 4.0)),
            Err(Error::TrackingFailure(3))
        ));
    }

    #[test]
    fn selection_adds_peak_displacement() {
        let mut m = Array2::zeros((10, 10));
        m[[9, 2]] = 1.0;
        let p = Particle {
            center: (50.0, 40.0),
            response: Some(ResponseMap::from_values(m).unwrap()),
        };
        let s = select_best(&[p], (4.0, 2.0)).unwrap();
        assert_eq!(s.center, (58.0, 38.0));
    }

    #[test]
    fn select_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(1..30);
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..20) as f64) / 20.0)
                .collect();
            let mut oracle = 0;
            for i in 1..n {
                if scores[i] > scores[oracle] {
                    oracle = i;
                }
            }
            let ps = scored(&scores);
            let sel = select_best(&ps, (1.0, 1.0)).unwrap();
            assert_eq!(sel.index, oracle);
            assert!(ps.iter().all(|p| p.score() <= sel.response.max_value));
            // Adding a particle never lowers the selected peak.
            let mut more = scores.clone();
            more.push(rng.random::<f64>());
            let sel2 = select_best(&scored(&more), (1.0, 1.0)).unwrap();
            assert!(sel2.response.max_value >= sel.response.max_value);
        }
    }

    fn toy_model() -> (FilterModel, Array3<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = apply_hann(FeaturePatch::new(
            Array3::from_shape_fn((2, 8, 8), |_| rng.random::<f64>()),
            4,
        ));
        let labels = make_labels(8, 8, (4.0, 4.0), 0.1).unwrap();
        let model = train(&x, &labels, &KcfParams::default()).unwrap();
        (model, x.data)
    }

    #[test]
    fn scoring_is_pure_and_order_independent() {
        let (model, base) = toy_model();
        // The window "content" is the base patch rolled by the particle's x coordinate.
        let features = |c: (f64, f64)| -> Result<FeaturePatch> {
            if c.0 < 0.0 {
                return Err(Error::invalid("off image"));
            }
            let k = c.0 as usize;
            let mut data = base.clone();
            for mut plane in data.outer_iter_mut() {
                let rolled = Array2::from_shape_fn((8, 8), |(r, col)| plane[[r, (col + k) % 8]]);
                plane.assign(&rolled);
            }
            Ok(FeaturePatch::new(data, 4))
        };
        let centers: Vec<(f64, f64)> = vec![(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (3.0, 0.0), (5.0, 0.0)];
        let forward = score_particles(centers.iter().map(|&c| Particle::at(c)).collect(), &model, features);
        let reversed = score_particles(
            centers.iter().rev().map(|&c| Particle::at(c)).collect(),
            &model,
            features,
        );
        for (a, b) in forward.iter().zip(reversed.iter().rev()) {
            assert_eq!(a, b);
        }
        assert!(forward[2].response.is_none() && forward[2].score() == f64::NEG_INFINITY);
        let own = kcf::detect(&model, &model.appearance).unwrap().max_value;
        assert_eq!(forward[0].score(), own);

        let same = score_particles(vec![Particle::at((2.0, 0.0)); 4], &model, features);
        assert!(same.windows(2).all(|w| w[0] == w[1]));
    }
}
