//! Synthetic corpora with known ground truth: bag-of-words documents drawn
//! from the LDA generative process, and a small hotel-review generator used
//! for end-to-end runs.

use super::{BowDocument, CorpusError, Review, SentenceKey};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Normal};

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub docs: Vec<BowDocument>,
    /// K rows of length V, each summing to one.
    pub topic_word: Vec<Vec<f64>>,
    pub doc_topic: Vec<Vec<f64>>,
}

impl SyntheticCorpus {
    /// Corpus-wide token distribution implied by the ground truth.
    pub fn expected_word_distribution(&self) -> Vec<f64> {
        let v = self.topic_word.first().map_or(0, Vec::len);
        let mut out = vec![0.0; v];
        let mut total = 0.0;
        for (doc, theta) in self.docs.iter().zip(&self.doc_topic) {
            let n = doc.total_tokens() as f64;
            total += n;
            for (k, &t) in theta.iter().enumerate() {
                for (w, &p) in self.topic_word[k].iter().enumerate() {
                    out[w] += n * t * p;
                }
            }
        }
        if total > 0.0 {
            out.iter_mut().for_each(|x| *x /= total);
        }
        out
    }

    /// Observed corpus-wide token distribution.
    pub fn empirical_word_distribution(&self) -> Vec<f64> {
        let v = self.topic_word.first().map_or(0, Vec::len);
        let mut out = vec![0.0; v];
        let mut total = 0.0;
        for doc in &self.docs {
            for &(id, c) in &doc.counts {
                out[id as usize] += c as f64;
                total += c as f64;
            }
        }
        if total > 0.0 {
            out.iter_mut().for_each(|x| *x /= total);
        }
        out
    }
}

/// Symmetric Dirichlet draw via normalized Gamma variates. When every
/// variate underflows, all mass goes to one uniformly chosen coordinate.
pub(crate) fn sample_dirichlet<R: Rng>(concentration: f64, dim: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    let mut draw: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draw.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        draw.iter_mut().for_each(|x| *x /= sum);
    } else {
        draw.iter_mut().for_each(|x| *x = 0.0);
        draw[rng.random_range(0..dim)] = 1.0;
    }
    draw
}

fn doc_key(i: usize) -> SentenceKey {
    SentenceKey::new(format!("d{i:06}"), 0)
}

/// Draws documents for fixed topic-word distributions.
pub fn sample_corpus(
    topic_word: &[Vec<f64>],
    n_docs: usize,
    doc_len: usize,
    alpha: f64,
    seed: u64,
) -> Result<SyntheticCorpus, CorpusError> {
    let k = topic_word.len();
    if k == 0 || !(alpha > 0.0) {
        return Err(CorpusError::InvalidSynthetic(
            "need at least one topic and alpha > 0".into(),
        ));
    }
    let word_dists = topic_word
        .iter()
        .map(|row| WeightedIndex::new(row))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CorpusError::InvalidSynthetic(format!("bad topic-word row: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(n_docs);
    let mut doc_topic = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let theta = if k == 1 {
            vec![1.0]
        } else {
            sample_dirichlet(alpha, k, &mut rng)
        };
        let topic_dist = WeightedIndex::new(&theta).expect("valid theta");
        let ids: Vec<u32> = (0..doc_len)
            .map(|_| word_dists[topic_dist.sample(&mut rng)].sample(&mut rng) as u32)
            .collect();
        docs.push(BowDocument::from_ids(doc_key(i), ids));
        doc_topic.push(theta);
    }
    Ok(SyntheticCorpus {
        docs,
        topic_word: topic_word.to_vec(),
        doc_topic,
    })
}

/// Samples K topic-word rows from Dirichlet(eta) and then a corpus from the
/// LDA generative process.
pub fn generate_synthetic(
    k: usize,
    v: usize,
    n_docs: usize,
    doc_len: usize,
    alpha: f64,
    eta: f64,
    seed: u64,
) -> Result<SyntheticCorpus, CorpusError> {
    if k < 1 || v < k {
        return Err(CorpusError::InvalidSynthetic(format!(
            "need K >= 1 and V >= K (got K={k}, V={v})"
        )));
    }
    if !(alpha > 0.0 && eta > 0.0) {
        return Err(CorpusError::InvalidSynthetic("alpha and eta must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topic_word: Vec<Vec<f64>> = (0..k).map(|_| sample_dirichlet(eta, v, &mut rng)).collect();
    sample_corpus(&topic_word, n_docs, doc_len, alpha, rng.random())
}

struct Aspect {
    nouns: &'static [&'static str],
    positive: &'static [&'static str],
    negative: &'static [&'static str],
    weight: f64,
}

const ASPECTS: [Aspect; 7] = [
    Aspect {
        nouns: &["pool", "spa", "beach", "gym", "garden", "swimming", "resort", "view"],
        positive: &["relaxing", "beautiful", "lovely", "amazing"],
        negative: &["crowded", "boring", "dirty", "disappointing"],
        weight: 0.6,
    },
    Aspect {
        nouns: &["location", "area", "market", "station", "airport", "city", "distance", "neighbourhood"],
        positive: &["convenient", "great", "perfect", "quiet"],
        negative: &["inconvenient", "noisy", "poor", "bad"],
        weight: 0.8,
    },
    Aspect {
        nouns: &["staff", "service", "reception", "housekeeping", "waiter", "receptionist", "team"],
        positive: &["friendly", "helpful", "courteous", "polite"],
        negative: &["rude", "unhelpful", "slow", "terrible"],
        weight: 1.1,
    },
    Aspect {
        nouns: &["room", "bed", "bathroom", "shower", "towel", "linen", "balcony", "mattress"],
        positive: &["clean", "spacious", "comfortable", "spotless"],
        negative: &["dirty", "smelly", "small", "uncomfortable"],
        weight: 1.5,
    },
    Aspect {
        nouns: &["manager", "chef", "concierge", "butler", "mr", "host", "supervisor"],
        positive: &["wonderful", "helpful", "excellent", "warm"],
        negative: &["rude", "unhelpful", "awful", "disappointing"],
        weight: 0.5,
    },
    Aspect {
        nouns: &["stay", "visit", "family", "trip", "decor", "night", "weekend", "experience"],
        positive: &["wonderful", "lovely", "pleasant", "memorable"],
        negative: &["disappointing", "expensive", "overpriced", "mediocre"],
        weight: 0.7,
    },
    Aspect {
        nouns: &["food", "breakfast", "buffet", "dinner", "restaurant", "spread", "lunch", "menu"],
        positive: &["delicious", "tasty", "fresh", "excellent"],
        negative: &["bland", "stale", "cold", "awful"],
        weight: 1.0,
    },
];

const STATES: [&str; 6] = ["Goa", "Kerala", "Rajasthan", "Maharashtra", "Karnataka", "Delhi"];

fn pick<'a, R: Rng>(items: &'a [&'a str], rng: &mut R) -> &'a str {
    items[rng.random_range(0..items.len())]
}

fn aspect_sentence<R: Rng>(aspect: &Aspect, sentiment: f64, rng: &mut R) -> String {
    let adjectives = if sentiment >= 0.0 {
        aspect.positive
    } else {
        aspect.negative
    };
    let n1 = pick(aspect.nouns, rng);
    let n2 = pick(aspect.nouns, rng);
    let a1 = pick(adjectives, rng);
    let a2 = pick(adjectives, rng);
    let strong = sentiment.abs() > 1.0;
    let mut s = match rng.random_range(0..4) {
        0 => format!("The {n1} was {a1}"),
        1 => format!("We found the {n1} and the {n2} {a1}"),
        2 => format!("{} {n1} at this place", capitalize(a1)),
        _ => format!("Honestly the {n1} here is {a1}"),
    };
    if strong {
        s.push_str(&format!(" and really {a2}"));
    }
    if rng.random_bool(0.1) {
        s.push_str(&format!(" on day {}", rng.random_range(1..8)));
    }
    s.push(if strong { '!' } else { '.' });
    s
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    chars
        .next()
        .map(|c| c.to_uppercase().chain(chars).collect())
        .unwrap_or_default()
}

/// Rating shares for stars 1..=5, echoing a five-star-heavy review site.
pub const RATING_SHARES: [f64; 5] = [0.05, 0.04, 0.10, 0.17, 0.64];

/// Star ratings 1..=shares.len() assigned by ascending rank of `latent`, so
/// that the lowest `shares[0]` fraction gets one star and so on. Ties keep
/// input order.
pub fn ratings_by_rank(latent: &[f64], shares: &[f64]) -> Vec<u8> {
    let n = latent.len();
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| latent[a].total_cmp(&latent[b]).then(a.cmp(&b)));
    let mut rating = vec![shares.len() as u8; n];
    let mut cumulative = 0.0;
    let mut cut = 0;
    for (star, share) in shares.iter().enumerate() {
        cumulative += share;
        let upto = ((cumulative * n as f64).round() as usize).clamp(cut, n);
        for &idx in &ranked[cut..upto] {
            rating[idx] = star as u8 + 1;
        }
        cut = upto;
    }
    rating
}

/// Hotel reviews whose sentences each discuss one of seven aspects, with
/// ratings driven by a weighted mix of the aspect sentiments. Ratings are
/// assigned by rank so the star distribution follows [`RATING_SHARES`].
pub fn synthetic_reviews(n: usize, seed: u64) -> Vec<Review> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.9).expect("valid sd");
    let n_hotels = 12;
    let hotel_effect: Vec<f64> = (0..n_hotels).map(|_| noise.sample(&mut rng) * 0.5).collect();

    let mut drafts = Vec::with_capacity(n);
    for i in 0..n {
        let hotel = rng.random_range(0..n_hotels);
        let mood = 0.6 + noise.sample(&mut rng) + hotel_effect[hotel];
        let mut order: Vec<usize> = (0..ASPECTS.len()).collect();
        order.shuffle(&mut rng);
        let mentioned = rng.random_range(2..=5);
        let mut sentences = Vec::new();
        let mut latent = 0.0;
        let mut weight = 0.0;
        for &a in &order[..mentioned] {
            let aspect = &ASPECTS[a];
            let sentiment = mood + noise.sample(&mut rng);
            latent += aspect.weight * sentiment;
            weight += aspect.weight;
            sentences.push(aspect_sentence(aspect, sentiment, &mut rng));
        }
        if rng.random_bool(0.05) {
            sentences.push("👍👍".to_owned());
        }
        let latent = latent / weight + 0.3 * noise.sample(&mut rng);
        drafts.push((i, hotel, sentences.join(" "), latent));
    }

    let latent: Vec<f64> = drafts.iter().map(|d| d.3).collect();
    let rating = ratings_by_rank(&latent, &RATING_SHARES);

    drafts
        .into_iter()
        .map(|(i, hotel, text, _)| Review {
            review_id: format!("rv{i:05}"),
            hotel_id: format!("h{hotel:02}"),
            state: Some(STATES[hotel % STATES.len()].to_owned()),
            rating: rating[i],
            text,
        })
        .collect()
}
