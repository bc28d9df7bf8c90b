use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use crate::error::{Error, Result};

type Counts<T> = HashMap<Vec<T>, f64>;

fn ngrams<T: Clone + Eq + Hash>(tokens: &[T], n: usize) -> Vec<Vec<T>> {
    if tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(<[T]>::to_vec).collect()
}

fn count<T: Clone + Eq + Hash>(grams: &[Vec<T>], weight: f64) -> Counts<T> {
    let mut c = HashMap::new();
    for g in grams {
        *c.entry(g.clone()).or_insert(0.0) += weight;
    }
    c
}

fn get<T: Eq + Hash>(c: &Counts<T>, g: &[T]) -> f64 {
    c.get(g).copied().unwrap_or(0.0)
}

/// Pointwise minimum, keeping positive entries.
fn min<T: Clone + Eq + Hash>(a: &Counts<T>, b: &Counts<T>) -> Counts<T> {
    a.iter()
        .filter_map(|(g, &x)| {
            let m = x.min(get(b, g));
            (m > 0.0).then(|| (g.clone(), m))
        })
        .collect()
}

/// Pointwise difference, keeping positive entries.
fn sub<T: Clone + Eq + Hash>(a: &Counts<T>, b: &Counts<T>) -> Counts<T> {
    a.iter()
        .filter_map(|(g, &x)| {
            let d = x - get(b, g);
            (d > 0.0).then(|| (g.clone(), d))
        })
        .collect()
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Ratio with the empty-set convention: 1.0 when there is nothing to score.
fn ratio(num: f64, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num / den as f64
    }
}

/// Keep F1, deletion precision and addition F1 at one n-gram order.
fn components<T: Clone + Eq + Hash>(src: &[Vec<T>], hyp: &[Vec<T>], refs: &[Vec<Vec<T>>]) -> (f64, f64, f64) {
    let k = refs.len() as f64;
    let all_refs: Vec<Vec<T>> = refs.iter().flatten().cloned().collect();
    let rc = count(&all_refs, 1.0);
    let sc = count(src, k);
    let cc = count(hyp, k);

    let keep = min(&sc, &cc);
    let keep_good = min(&keep, &rc);
    let keep_all = min(&sc, &rc);
    let kp = ratio(keep.iter().map(|(g, &v)| get(&keep_good, g) / v).sum(), keep.len());
    let kr = ratio(keep_all.iter().map(|(g, &v)| get(&keep_good, g) / v).sum(), keep_all.len());

    let del = sub(&sc, &cc);
    let del_good = sub(&del, &rc);
    let dp = ratio(del.iter().map(|(g, &v)| get(&del_good, g) / v).sum(), del.len());

    let src_set: HashSet<&Vec<T>> = src.iter().collect();
    let hyp_set: HashSet<&Vec<T>> = hyp.iter().collect();
    let ref_set: HashSet<&Vec<T>> = all_refs.iter().collect();
    let add: HashSet<&Vec<T>> = hyp_set.difference(&src_set).copied().collect();
    let add_good = add.iter().filter(|g| ref_set.contains(*g)).count();
    let add_all = ref_set.difference(&src_set).count();
    let ap = ratio(add_good as f64, add.len());
    let ar = ratio(add_good as f64, add_all);

    (f1(kp, kr), dp, f1(ap, ar))
}

/// Sentence-level SARI on a 0–100 scale: keep F1, deletion precision and
/// addition F1, each averaged over n-gram orders 1–4, then averaged.
/// Keep and delete use reference-weighted counts over all references.
pub fn sari<T: Clone + Eq + Hash>(src: &[T], hyp: &[T], refs: &[Vec<T>]) -> Result<f64> {
    if refs.is_empty() {
        return Err(Error::EmptyReferences(0));
    }
    let (mut keep, mut del, mut add) = (0.0, 0.0, 0.0);
    for n in 1..=4 {
        let ref_grams: Vec<Vec<Vec<T>>> = refs.iter().map(|r| ngrams(r, n)).collect();
        let (k, d, a) = components(&ngrams(src, n), &ngrams(hyp, n), &ref_grams);
        keep += k;
        del += d;
        add += a;
    }
    Ok(100.0 * (keep / 4.0 + del / 4.0 + add / 4.0) / 3.0)
}

/// Mean sentence SARI.
pub fn corpus_sari<T: Clone + Eq + Hash>(sources: &[Vec<T>], hyps: &[Vec<T>], refs: &[Vec<Vec<T>>]) -> Result<f64> {
    super::check_lengths(sources.len(), hyps.len())?;
    super::check_lengths(sources.len(), refs.len())?;
    let mut total = 0.0;
    for (i, ((s, h), r)) in sources.iter().zip(hyps).zip(refs).enumerate() {
        if r.is_empty() {
            return Err(Error::EmptyReferences(i));
        }
        total += sari(s, h, r)?;
    }
    Ok(total / sources.len() as f64)
}
