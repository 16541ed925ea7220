//! Uncertainty measures over predicted class probabilities, and top-k
//! selection.
//!
//! The raw measures keep their natural orientation: margins are small for
//! uncertain examples, least confidence and entropy are large.
//! [`informativeness`] flips the margins so that every [`Score`] reads
//! "higher is more informative" and one selection routine serves all
//! metrics.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::ProbVector;
use crate::rng::{self, Purpose};

/// Floor applied to non-zero probabilities inside the entropy logarithm.
pub const ENTROPY_PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Metric {
    /// Best-versus-worst margin, lowest first.
    LargestMargin,
    /// Best-versus-second-best margin, lowest first.
    SmallestMargin,
    /// One minus the top probability, highest first.
    LeastConfidence,
    /// Shannon entropy in nats, highest first.
    Entropy,
    /// Uniform scores from a seeded stream.
    Random { stream: u64 },
}

impl Metric {
    pub const RANDOM: Metric = Metric::Random { stream: 0 };
    /// Every metric, uncertainty measures first.
    pub const ALL: [Metric; 5] =
        [Metric::LargestMargin, Metric::SmallestMargin, Metric::LeastConfidence, Metric::Entropy, Metric::RANDOM];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::LargestMargin => "lmu",
            Metric::SmallestMargin => "smu",
            Metric::LeastConfidence => "lcu",
            Metric::Entropy => "entropy",
            Metric::Random { .. } => "random",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Random { stream } if *stream != 0 => write!(f, "random:{stream}"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric {0:?} (expected lmu, smu, lcu, entropy or random)")]
pub struct UnknownMetric(pub String);

impl FromStr for Metric {
    type Err = UnknownMetric;

    /// Case-insensitive; `random:N` selects random stream `N`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "lmu" => Ok(Metric::LargestMargin),
            "smu" => Ok(Metric::SmallestMargin),
            "lcu" => Ok(Metric::LeastConfidence),
            "entropy" => Ok(Metric::Entropy),
            "random" => Ok(Metric::RANDOM),
            _ => lower
                .strip_prefix("random:")
                .and_then(|n| n.parse().ok())
                .map(|stream| Metric::Random { stream })
                .ok_or_else(|| UnknownMetric(s.to_string())),
        }
    }
}

impl TryFrom<String> for Metric {
    type Error = UnknownMetric;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Metric> for String {
    fn from(m: Metric) -> Self {
        m.to_string()
    }
}

fn max_entry(p: &[f64]) -> f64 {
    p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `max(p) - min(p)`.
pub fn lmu(p: &ProbVector) -> f64 {
    let p = p.as_slice();
    max_entry(p) - p.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Largest minus second-largest entry; zero on a tie for the top.
pub fn smu(p: &ProbVector) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in p.as_slice() {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    first - second
}

/// `1 - max(p)`.
pub fn lcu(p: &ProbVector) -> f64 {
    1.0 - max_entry(p.as_slice())
}

/// `-sum p ln p`, with exact zeros contributing nothing.
pub fn entropy(p: &ProbVector) -> f64 {
    -p.as_slice().iter().filter(|&&v| v != 0.0).map(|&v| v * v.max(ENTROPY_PROB_FLOOR).ln()).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    /// Higher means more informative.
    pub value: f64,
    pub metric: Metric,
}

/// Where a random score is drawn from: the run seed and round pick a
/// stream; the example id picks the position within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DrawContext {
    pub seed: u64,
    pub round: u64,
}

/// Orients a raw measure so that the maximum score is the example each
/// metric would pick: `-lmu`, `-smu`, `+lcu`, `+entropy`, or a uniform draw
/// in `[0, 1)` for the random baseline.
pub fn informativeness(metric: Metric, p: &ProbVector, ctx: DrawContext, example_id: u64) -> Score {
    let value = match metric {
        Metric::LargestMargin => -lmu(p),
        Metric::SmallestMargin => -smu(p),
        Metric::LeastConfidence => lcu(p),
        Metric::Entropy => entropy(p),
        Metric::Random { stream } => {
            rng::uniform_at(ctx.seed ^ stream.rotate_left(32), Purpose::RandomScore, ctx.round, example_id)
        }
    };
    Score { value, metric }
}

/// Descending score, then ascending index.
fn rank(values: &[f64], a: usize, b: usize) -> Ordering {
    values[b].total_cmp(&values[a]).then(a.cmp(&b))
}

/// Indices of the `k` highest scores, ties broken toward the lowest index,
/// returned in ascending order. Returns every index when `k` exceeds the
/// number of scores.
pub fn select_k(scores: &[Score], k: usize) -> Vec<usize> {
    let values: Vec<f64> = scores.iter().map(|s| s.value).collect();
    select_top_k(&values, k)
}

/// [`select_k`] over bare values.
pub fn select_top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| rank(values, a, b));
        idx.truncate(k);
    }
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    fn one_hot(k: usize, at: usize) -> ProbVector {
        let mut v = vec![0.0; k];
        v[at] = 1.0;
        pv(&v)
    }

    const CTX: DrawContext = DrawContext { seed: 1, round: 1 };

    #[test]
    fn fixture_values() {
        let u = ProbVector::uniform(10).unwrap();
        assert!(lmu(&u).abs() < 1e-15);
        assert!(smu(&u).abs() < 1e-15);
        assert!((lcu(&u) - 0.9).abs() < 1e-15);
        assert!((entropy(&u) - 10f64.ln()).abs() < 1e-12);

        let h = one_hot(4, 2);
        assert_eq!((lmu(&h), smu(&h), lcu(&h), entropy(&h)), (1.0, 1.0, 0.0, 0.0));

        let p = pv(&[0.5, 0.3, 0.2]);
        assert!((lmu(&p) - 0.3).abs() < 1e-12);
        assert!((smu(&p) - 0.2).abs() < 1e-12);
        assert!((lcu(&p) - 0.5).abs() < 1e-12);
        // -(0.5 ln 0.5 + 0.3 ln 0.3 + 0.2 ln 0.2), evaluated at 50 digits
        assert!((entropy(&p) - 1.029_653_014_064_573_5).abs() < 1e-12);
    }

    #[test]
    fn tie_for_top_gives_zero_smallest_margin() {
        assert_eq!(smu(&pv(&[0.5, 0.5])), 0.0);
        assert_eq!(smu(&pv(&[0.1, 0.45, 0.45])), 0.0);
    }

    #[test]
    fn zero_outcomes_do_not_change_entropy() {
        let a = entropy(&pv(&[0.5, 0.3, 0.2]));
        let b = entropy(&pv(&[0.5, 0.3, 0.2, 0.0]));
        assert_eq!(a, b);
    }

    #[test]
    fn orientation() {
        let u = ProbVector::uniform(10).unwrap();
        assert!((informativeness(Metric::Entropy, &u, CTX, 0).value - std::f64::consts::LN_10).abs() < 1e-6);
        assert_eq!(informativeness(Metric::SmallestMargin, &one_hot(3, 0), CTX, 0).value, -1.0);
        let r = informativeness(Metric::RANDOM, &u, CTX, 5).value;
        assert!((0.0..1.0).contains(&r));
        assert_eq!(r, informativeness(Metric::RANDOM, &u, CTX, 5).value);
        assert_ne!(r, informativeness(Metric::RANDOM, &u, DrawContext { round: 2, ..CTX }, 5).value);
        assert_ne!(r, informativeness(Metric::Random { stream: 1 }, &u, CTX, 5).value);
    }

    #[test]
    fn metric_names_parse_case_insensitively() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
            assert_eq!(m.name().to_uppercase().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("Random:7".parse::<Metric>().unwrap(), Metric::Random { stream: 7 });
        assert!("bogus".parse::<Metric>().is_err());
        assert_eq!(serde_json::to_string(&Metric::Entropy).unwrap(), "\"entropy\"");
        assert_eq!(serde_json::from_str::<Metric>("\"LCU\"").unwrap(), Metric::LeastConfidence);
    }

    #[test]
    fn select_examples() {
        assert_eq!(select_top_k(&[0.2, 0.9, 0.9, 0.1], 2), vec![1, 2]);
        assert_eq!(select_top_k(&[0.5, 0.5, 0.5], 1), vec![0]);
        assert_eq!(select_top_k(&[0.5, 0.1], 5), vec![0, 1]);
        assert_eq!(select_top_k(&[0.3, 0.8, 0.1, 0.8, 0.8], 2), vec![1, 3]);
        assert!(select_top_k(&[0.1], 0).is_empty());
    }

    fn brute_force_top_k(values: &[f64], k: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..values.len()).collect();
        // stable sort keeps equal scores in index order
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
        let mut top: Vec<usize> = order.into_iter().take(k).collect();
        top.sort();
        top
    }

    fn arb_prob(max_k: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 2..=max_k).prop_filter_map("all zero", |raw| {
            let sum: f64 = raw.iter().sum();
            (sum > 0.0).then(|| raw.iter().map(|v| v / sum).collect())
        })
    }

    proptest! {
        #[test]
        fn select_matches_brute_force(values in proptest::collection::vec(prop_oneof![0u8..4, 0u8..=255].prop_map(|v| f64::from(v) / 8.0), 1..64),
                                      k in 1usize..70) {
            prop_assert_eq!(select_top_k(&values, k), brute_force_top_k(&values, k));
        }

        #[test]
        fn bounds_hold(p in arb_prob(12)) {
            let k = p.len() as f64;
            let p = ProbVector::new(p).unwrap();
            prop_assert!(0.0 <= smu(&p) && smu(&p) <= lmu(&p) && lmu(&p) <= 1.0);
            prop_assert!(0.0 <= lcu(&p) && lcu(&p) <= 1.0 - 1.0 / k + 1e-12);
            prop_assert!(0.0 <= entropy(&p) && entropy(&p) <= k.ln() + 1e-12);
        }

        #[test]
        fn measures_are_permutation_invariant(p in arb_prob(10), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut q = p.clone();
            q.shuffle(&mut rng::stream(seed, Purpose::Shuffle, 0));
            let (p, q) = (ProbVector::new(p).unwrap(), ProbVector::new(q).unwrap());
            prop_assert_eq!(lmu(&p), lmu(&q));
            prop_assert_eq!(smu(&p), smu(&q));
            prop_assert_eq!(lcu(&p), lcu(&q));
            prop_assert!((entropy(&p) - entropy(&q)).abs() < 1e-12);
        }

        #[test]
        fn binary_margins_coincide(a in 0.0f64..=1.0) {
            let p = ProbVector::new(vec![a, 1.0 - a]).unwrap();
            prop_assert_eq!(lmu(&p), smu(&p));
        }

        #[test]
        fn informativeness_argmax_reproduces_each_rule(pool in proptest::collection::vec(arb_prob(4).prop_filter("K=4", |p| p.len() == 4), 1..20)) {
            let pool: Vec<ProbVector> = pool.into_iter().map(|p| ProbVector::new(p).unwrap()).collect();
            let best = |m: Metric| select_k(&pool.iter().map(|p| informativeness(m, p, CTX, 0)).collect::<Vec<_>>(), 1)[0];
            let argmin = |f: fn(&ProbVector) -> f64| (0..pool.len()).min_by(|&a, &b| f(&pool[a]).total_cmp(&f(&pool[b])).then(a.cmp(&b))).unwrap();
            let argmax = |f: fn(&ProbVector) -> f64| (0..pool.len()).min_by(|&a, &b| f(&pool[b]).total_cmp(&f(&pool[a])).then(a.cmp(&b))).unwrap();
            prop_assert_eq!(best(Metric::LargestMargin), argmin(lmu));
            prop_assert_eq!(best(Metric::SmallestMargin), argmin(smu));
            prop_assert_eq!(best(Metric::LeastConfidence), argmax(lcu));
            prop_assert_eq!(best(Metric::Entropy), argmax(entropy));
        }
    }
}
