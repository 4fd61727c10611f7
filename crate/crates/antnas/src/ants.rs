//! Foraging agents.
//!
//! An ant carries fixed heritable traits for its lifetime and walks the
//! space from an input anchor to an output anchor, one depth band per step.
//! Trait turnover comes from generational mortality: a dying ant is replaced
//! by a freshly sampled one.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Point3, SearchSpace};

pub const SENSING_RADIUS_RANGE: (f64, f64) = (0.05, 0.5);
pub const EXPLORATION_RANGE: (f64, f64) = (0.0, 1.0);
pub const STEP_Y_RANGE: (f64, f64) = (0.05, 0.25);

/// Heritable foraging traits, fixed for an ant's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntTraits {
    /// Perception radius around the look-ahead center.
    pub sensing_radius: f64,
    /// Weight of random jitter vs pheromone attraction (0 = pure exploitation).
    pub exploration_factor: f64,
    /// Depth advance per move.
    pub step_y: f64,
}

impl AntTraits {
    pub fn within_bounds(&self) -> bool {
        (SENSING_RADIUS_RANGE.0..=SENSING_RADIUS_RANGE.1).contains(&self.sensing_radius)
            && (EXPLORATION_RANGE.0..=EXPLORATION_RANGE.1).contains(&self.exploration_factor)
            && (STEP_Y_RANGE.0..=STEP_Y_RANGE.1).contains(&self.step_y)
    }
}

/// One input-to-output walk; the raw material for genome construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntPath {
    /// Entry anchor the walk started from.
    pub feature_idx: usize,
    pub points: Vec<Point3>,
}

/// Hard cap on path length; a longer path means the step rule is broken.
pub fn path_length_cap() -> usize {
    (1.0 / STEP_Y_RANGE.0).ceil() as usize + 2
}

/// Sample fresh traits uniformly within their bounds.
pub fn spawn_ant<R: Rng>(rng: &mut R) -> AntTraits {
    AntTraits {
        sensing_radius: rng.gen_range(SENSING_RADIUS_RANGE.0..=SENSING_RADIUS_RANGE.1),
        exploration_factor: rng.gen_range(EXPLORATION_RANGE.0..=EXPLORATION_RANGE.1),
        step_y: rng.gen_range(STEP_Y_RANGE.0..=STEP_Y_RANGE.1),
    }
}

/// Pick an entry feature, weighted by pheromone strength at each input
/// anchor. Falls back to uniform when no anchor carries any strength.
pub fn pick_entry<R: Rng>(space: &SearchSpace, rng: &mut R, n_inputs: usize) -> usize {
    debug_assert!(n_inputs >= 1);
    if n_inputs == 1 {
        // Still consume a draw so the stream layout does not depend on arity.
        let _ = rng.gen::<f64>();
        return 0;
    }
    let weights: Vec<f64> = (0..n_inputs)
        .map(|i| {
            let anchor = space
                .config()
                .input_anchor(i)
                .expect("anchor index within n_inputs");
            space.strength_near(anchor)
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let draw = rng.gen::<f64>();
    if total <= 0.0 {
        return ((draw * n_inputs as f64) as usize).min(n_inputs - 1);
    }
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w / total;
        if draw < acc {
            return i;
        }
    }
    n_inputs - 1
}

/// One move: sense around the look-ahead center, blend the strength-weighted
/// centroid of what was sensed with a jittered copy of the center, force the
/// depth advance, clamp into the cube. Returns the nearest output anchor once
/// the depth coordinate would leave the cube.
pub fn step<R: Rng>(
    ant: &AntTraits,
    current: Point3,
    space: &SearchSpace,
    rng: &mut R,
) -> Point3 {
    debug_assert!(current.y < 1.0);
    let next_y = current.y + ant.step_y;
    let lookahead = Point3::clamped(current.x, next_y, current.z);

    let sensed = space.sense(lookahead, ant.sensing_radius);
    let target = if sensed.is_empty() {
        lookahead
    } else {
        let mass: f64 = sensed.iter().map(|p| p.strength).sum();
        Point3::clamped(
            sensed.iter().map(|p| p.pos.x * p.strength).sum::<f64>() / mass,
            sensed.iter().map(|p| p.pos.y * p.strength).sum::<f64>() / mass,
            sensed.iter().map(|p| p.pos.z * p.strength).sum::<f64>() / mass,
        )
    };

    // Exploratory stride scales with perception; one knob for both.
    let normal = Normal::new(0.0, ant.sensing_radius).expect("positive sigma");
    let jitter_x = normal.sample(rng);
    let jitter_z = normal.sample(rng);
    let explored = Point3::clamped(lookahead.x + jitter_x, next_y, lookahead.z + jitter_z);

    let e = ant.exploration_factor;
    let blended = Point3::clamped(
        (1.0 - e) * target.x + e * explored.x,
        next_y,
        (1.0 - e) * target.z + e * explored.z,
    );

    if next_y >= 1.0 - 1e-9 {
        nearest_output_anchor(space, Point3::clamped(blended.x, 1.0, blended.z))
    } else {
        blended
    }
}

fn nearest_output_anchor(space: &SearchSpace, from: Point3) -> Point3 {
    let n = space.config().n_outputs;
    let mut best = space.config().output_anchor(0).expect("n_outputs >= 1");
    let mut best_d = from.distance(&best);
    for o in 1..n {
        let anchor = space.config().output_anchor(o).expect("index in range");
        let d = from.distance(&anchor);
        if d < best_d {
            best = anchor;
            best_d = d;
        }
    }
    best
}

/// Walk from a pheromone-weighted entry anchor to an output anchor.
pub fn forage<R: Rng>(
    ant: &AntTraits,
    space: &SearchSpace,
    rng: &mut R,
    n_inputs: usize,
    n_outputs: usize,
) -> Result<AntPath> {
    debug_assert!(n_outputs >= 1);
    let feature_idx = pick_entry(space, rng, n_inputs);
    let start = space.config().input_anchor(feature_idx)?;
    let cap = path_length_cap();

    let mut points = vec![start];
    let mut current = start;
    while current.y < 1.0 {
        let next = step(ant, current, space, rng);
        points.push(next);
        current = next;
        if points.len() > cap {
            return Err(Error::Protocol(format!(
                "forage exceeded the path length cap of {cap}; step rule is broken"
            )));
        }
    }
    Ok(AntPath {
        feature_idx,
        points,
    })
}

/// Each ant independently dies with probability `mortality_rate` and is
/// replaced in place by a fresh spawn; roster length never changes.
pub fn apply_mortality<R: Rng>(
    ants: &mut [AntTraits],
    mortality_rate: f64,
    rng: &mut R,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&mortality_rate) || !mortality_rate.is_finite() {
        return Err(Error::InputDomain(format!(
            "mortality rate must lie in [0, 1], got {mortality_rate}"
        )));
    }
    let mut replaced = 0;
    for ant in ants.iter_mut() {
        if rng.gen::<f64>() < mortality_rate {
            *ant = spawn_ant(rng);
            replaced += 1;
        }
    }
    Ok(replaced)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SpaceConfig;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space_with(n_inputs: usize, n_outputs: usize) -> SearchSpace {
        SearchSpace::new(SpaceConfig::new(n_inputs, n_outputs, 3)).unwrap()
    }

    #[test]
    fn spawned_traits_respect_bounds_and_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = spawn_ant(&mut rng);
        let b = spawn_ant(&mut rng);
        assert!(a.within_bounds());
        assert!(b.within_bounds());
        assert_ne!(a, b);

        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(a, spawn_ant(&mut rng2));
        assert_eq!(b, spawn_ant(&mut rng2));
    }

    #[test]
    fn pick_entry_single_input_is_always_zero() {
        let space = space_with(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(pick_entry(&space, &mut rng, 1), 0);
        }
    }

    #[test]
    fn pick_entry_uniform_when_strengths_equal() {
        let space = space_with(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 4];
        let draws = 100_000;
        for _ in 0..draws {
            counts[pick_entry(&space, &mut rng, 4)] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.25).abs() < 0.01, "frequency {freq} too far from 0.25");
        }
    }

    #[test]
    fn pick_entry_weights_by_anchor_strength() {
        let mut space = space_with(2, 1);
        // Anchors seeded at 1.0 each; bring index 0 up to 3.0 total.
        let a0 = space.config().input_anchor(0).unwrap();
        space.deposit(a0, 2.0).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 100_000;
        let mut zero = 0usize;
        for _ in 0..draws {
            if pick_entry(&space, &mut rng, 2) == 0 {
                zero += 1;
            }
        }
        let freq = zero as f64 / draws as f64;
        assert!((freq - 0.75).abs() < 0.01, "frequency {freq} too far from 0.75");
    }

    #[test]
    fn step_pure_exploitation_moves_to_sensed_centroid() {
        let mut space = space_with(1, 1);
        space.deposit(Point3::clamped(0.7, 0.35, 0.4), 2.0).unwrap();
        let ant = AntTraits {
            sensing_radius: 0.3,
            exploration_factor: 0.0,
            step_y: 0.25,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let next = step(&ant, Point3::clamped(0.6, 0.1, 0.3), &space, &mut rng);
        assert!((next.x - 0.7).abs() < 1e-12);
        assert!((next.z - 0.4).abs() < 1e-12);
        assert!((next.y - 0.35).abs() < 1e-12);
    }

    #[test]
    fn step_with_nothing_sensed_goes_straight_up() {
        let space = SearchSpace::new(SpaceConfig::new(1, 1, 3)).unwrap();
        let ant = AntTraits {
            sensing_radius: 0.05,
            exploration_factor: 0.0,
            step_y: 0.1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let next = step(&ant, Point3::clamped(0.3, 0.4, 0.6), &space, &mut rng);
        assert_eq!(next, Point3::clamped(0.3, 0.5, 0.6));
    }

    #[test]
    fn step_snaps_to_output_anchor_at_the_top() {
        let space = space_with(1, 1);
        let ant = AntTraits {
            sensing_radius: 0.1,
            exploration_factor: 0.0,
            step_y: 0.1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let next = step(&ant, Point3::clamped(0.2, 0.95, 0.8), &space, &mut rng);
        assert_eq!(next, space.config().output_anchor(0).unwrap());
    }

    #[test]
    fn step_snaps_to_nearest_of_several_output_anchors() {
        let space = space_with(1, 2);
        let ant = AntTraits {
            sensing_radius: 0.05,
            exploration_factor: 0.0,
            step_y: 0.2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let next = step(&ant, Point3::clamped(0.9, 0.85, 0.0), &space, &mut rng);
        assert_eq!(next, space.config().output_anchor(1).unwrap());
    }

    #[test]
    fn forage_step_quarter_has_five_points() {
        let space = space_with(1, 1);
        let ant = AntTraits {
            sensing_radius: 0.05,
            exploration_factor: 0.0,
            step_y: 0.25,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path = forage(&ant, &space, &mut rng, 1, 1).unwrap();
        // y advances 0 -> 0.25 -> 0.5 -> 0.75 -> snap at 1.0.
        assert_eq!(path.points.len(), 5);
        assert_eq!(path.points[0], space.config().input_anchor(0).unwrap());
        assert_eq!(*path.points.last().unwrap(), space.config().output_anchor(0).unwrap());
    }

    #[test]
    fn forage_with_no_field_and_no_exploration_keeps_entry_x() {
        let mut space = space_with(1, 1);
        // Strip the anchor seeds so nothing is sensed anywhere.
        space.evaporate(0.01).unwrap();
        assert!(space.points().is_empty());
        let ant = AntTraits {
            sensing_radius: 0.05,
            exploration_factor: 0.0,
            step_y: 0.2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let path = forage(&ant, &space, &mut rng, 1, 1).unwrap();
        for p in &path.points[..path.points.len() - 1] {
            assert!((p.x - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn forage_replays_bit_identically() {
        let mut space = space_with(3, 1);
        space.deposit(Point3::clamped(0.3, 0.5, 0.2), 2.5).unwrap();
        let ant = AntTraits {
            sensing_radius: 0.2,
            exploration_factor: 0.7,
            step_y: 0.13,
        };
        let p1 = forage(&ant, &space, &mut ChaCha8Rng::seed_from_u64(21), 3, 1).unwrap();
        let p2 = forage(&ant, &space, &mut ChaCha8Rng::seed_from_u64(21), 3, 1).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn mortality_zero_and_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let original: Vec<AntTraits> = (0..8).map(|_| spawn_ant(&mut rng)).collect();

        let mut untouched = original.clone();
        assert_eq!(apply_mortality(&mut untouched, 0.0, &mut rng).unwrap(), 0);
        assert_eq!(untouched, original);

        let mut wiped = original.clone();
        assert_eq!(apply_mortality(&mut wiped, 1.0, &mut rng).unwrap(), 8);
        for (old, new) in original.iter().zip(wiped.iter()) {
            assert_ne!(old, new);
        }
    }

    #[test]
    fn mortality_replacement_count_is_binomial_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut ants: Vec<AntTraits> = (0..1000).map(|_| spawn_ant(&mut rng)).collect();
        let replaced = apply_mortality(&mut ants, 0.1, &mut rng).unwrap();
        // Binomial(1000, 0.1): P(70 <= X <= 130) > 0.99.
        assert!((70..=130).contains(&replaced), "replaced {replaced} outside [70, 130]");
        assert_eq!(ants.len(), 1000);
    }

    #[test]
    fn mortality_rejects_rates_outside_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ants = vec![spawn_ant(&mut rng)];
        assert!(apply_mortality(&mut ants, -0.01, &mut rng).is_err());
        assert!(apply_mortality(&mut ants, 1.01, &mut rng).is_err());
        assert!(apply_mortality(&mut ants, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn repeated_foraging_on_a_reinforced_trail_converges() {
        // Single trail at x ~ 0.8; a pure-exploitation ant re-deposits its own
        // path each generation. The mean x-distance between consecutive
        // generations' paths trends to zero; individual steps can jump when a
        // point hits the strength clamp, so the assertion is on the trend.
        let mut space = space_with(1, 1);
        for i in 1..10 {
            let y = i as f64 / 10.0;
            space.deposit(Point3::clamped(0.8, y, 0.0), 2.0).unwrap();
        }
        let ant = AntTraits {
            sensing_radius: 0.35,
            exploration_factor: 0.0,
            step_y: 0.1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut previous: Option<AntPath> = None;
        let mut distances = Vec::new();
        for _ in 0..20 {
            let path = forage(&ant, &space, &mut rng, 1, 1).unwrap();
            for p in &path.points {
                space.deposit(*p, 1.0).unwrap();
            }
            if let Some(prev) = &previous {
                let n = path.points.len().min(prev.points.len());
                let d: f64 = (0..n)
                    .map(|i| (path.points[i].x - prev.points[i].x).abs())
                    .sum::<f64>()
                    / n as f64;
                distances.push(d);
            }
            previous = Some(path);
        }
        let head: f64 = distances[..5].iter().sum::<f64>() / 5.0;
        let tail: f64 = distances[distances.len() - 5..].iter().sum::<f64>() / 5.0;
        assert!(
            tail <= head,
            "consecutive-path distance did not shrink: head mean {head}, tail mean {tail}"
        );
        assert!(
            distances.last().unwrap() <= distances.first().unwrap(),
            "final distance exceeds the first"
        );
    }

    proptest! {
        #[test]
        fn forage_paths_satisfy_invariants(
            seed in 0..500u64,
            sensing in 0.05..0.5f64,
            exploration in 0.0..1.0f64,
            step_y in 0.05..0.25f64,
            n_inputs in 1..6usize,
            field in prop::collection::vec(
                ((0.0..=1.0f64), (0.0..=1.0f64), (0.0..=1.0f64), 0.2..3.0f64),
                0..15,
            ),
        ) {
            let mut space = space_with(n_inputs, 1);
            for (x, y, z, s) in field {
                space.deposit(Point3::clamped(x, y, z), s).unwrap();
            }
            let ant = AntTraits { sensing_radius: sensing, exploration_factor: exploration, step_y };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let path = forage(&ant, &space, &mut rng, n_inputs, 1).unwrap();

            prop_assert!(path.points.len() >= 2);
            prop_assert!(path.points.len() <= path_length_cap());
            prop_assert_eq!(path.points[0].y, 0.0);
            prop_assert_eq!(path.points.last().unwrap().y, 1.0);
            prop_assert_eq!(path.points[0], space.config().input_anchor(path.feature_idx).unwrap());
            for w in path.points.windows(2) {
                prop_assert!(w[1].y > w[0].y);
            }
            for p in &path.points {
                prop_assert!((0.0..=1.0).contains(&p.x));
                prop_assert!((0.0..=1.0).contains(&p.z));
            }
        }

        #[test]
        fn mortality_preserves_length_and_bounds(
            seed in 0..200u64,
            rate in 0.0..=1.0f64,
            n in 1..50usize,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ants: Vec<AntTraits> = (0..n).map(|_| spawn_ant(&mut rng)).collect();
            apply_mortality(&mut ants, rate, &mut rng).unwrap();
            prop_assert_eq!(ants.len(), n);
            for ant in &ants {
                prop_assert!(ant.within_bounds());
            }
        }
    }
}
