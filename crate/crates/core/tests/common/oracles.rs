//! Brute-force references for the contrastive losses, written as explicit
//! sums over pair terms on plain slices.

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn intra(positives: &[Vec<f64>], weights: &[f64], negatives: &[Vec<f64>], query: &[f64], tau: f64) -> f64 {
    let mut denom = 0.0;
    for p in positives.iter().chain(negatives) {
        denom += (cosine(p, query) / tau).exp();
    }
    let mut loss = 0.0;
    for (p, w) in positives.iter().zip(weights) {
        let num = (cosine(p, query) / tau).exp();
        loss -= w * (num / denom).ln();
    }
    loss / positives.len() as f64
}

/// One video: positives, their weights and the query.
pub struct Video {
    pub positives: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub query: Vec<f64>,
}

pub fn inter(batch: &[Video], tau: f64) -> f64 {
    let e = |a: &[f64], b: &[f64]| (cosine(a, b) / tau).exp();
    let k = batch[0].positives.len();
    let mut loss = 0.0;
    for (b, video) in batch.iter().enumerate() {
        for (i, p) in video.positives.iter().enumerate() {
            let mut denom = 0.0;
            for own in &video.positives {
                denom += e(own, &video.query);
            }
            for (c, other) in batch.iter().enumerate() {
                if c == b {
                    continue;
                }
                denom += e(p, &other.query);
                for q in &other.positives {
                    denom += e(q, &video.query);
                }
            }
            loss -= video.weights[i] * (e(p, &video.query) / denom).ln();
        }
    }
    loss / (k * batch.len()) as f64
}
