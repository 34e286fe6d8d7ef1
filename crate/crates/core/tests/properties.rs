use cccl_core::inventory::{ConceptId, ConceptInventory, LanguageCode};
use cccl_core::pseudo::{eligible_donors, generate_pseudocorrections};
use cccl_core::similarity::{cosine_similarity, cross_consistency, delta_sem, delta_xc};
use cccl_core::stats::{linear_fit, p_value, pearson};
use cccl_core::{EmbeddingVector, ImagePopulation, PairedSeries};
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::collections::BTreeMap;

/// Straightforward normalize-then-average reference.
fn naive_xc(test: &[Vec<f64>], source: &[Vec<f64>]) -> f64 {
    let unit = |v: &Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect::<Vec<_>>()
    };
    let mut total = 0.0;
    for a in test {
        for b in source {
            total += unit(a).iter().zip(unit(b)).map(|(x, y)| x * y).sum::<f64>();
        }
    }
    total / (test.len() * source.len()) as f64
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, dim)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
}

fn population(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(vector(dim), 1..6)
}

fn wrap(vs: &[Vec<f64>]) -> Vec<EmbeddingVector> {
    vs.iter()
        .map(|v| EmbeddingVector::new(v.clone()).unwrap())
        .collect()
}

fn series_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
        )
    })
}

proptest! {
    #[test]
    fn xc_matches_naive((test, source) in (1usize..12).prop_flat_map(|d| (population(d), population(d)))) {
        let (t, s) = (wrap(&test), wrap(&source));
        let got = cross_consistency(
            &ImagePopulation::new(t.iter().collect()).unwrap(),
            &ImagePopulation::new(s.iter().collect()).unwrap(),
        ).unwrap();
        prop_assert!((got - naive_xc(&test, &source)).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&got));
    }

    #[test]
    fn xc_is_scale_invariant(
        (test, source) in (1usize..8).prop_flat_map(|d| (population(d), population(d))),
        scale in 1e-3..1e3f64,
    ) {
        let scaled: Vec<Vec<f64>> = test.iter().map(|v| v.iter().map(|x| x * scale).collect()).collect();
        let (t, ts, s) = (wrap(&test), wrap(&scaled), wrap(&source));
        let sp = ImagePopulation::new(s.iter().collect()).unwrap();
        let a = cross_consistency(&ImagePopulation::new(t.iter().collect()).unwrap(), &sp).unwrap();
        let b = cross_consistency(&ImagePopulation::new(ts.iter().collect()).unwrap(), &sp).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn cosine_is_symmetric((a, b) in (1usize..10).prop_flat_map(|d| (vector(d), vector(d)))) {
        let (a, b) = (EmbeddingVector::new(a).unwrap(), EmbeddingVector::new(b).unwrap());
        prop_assert_eq!(cosine_similarity(&a, &b).unwrap(), cosine_similarity(&b, &a).unwrap());
    }

    #[test]
    fn delta_sem_is_antisymmetric((s, o, c) in (1usize..10).prop_flat_map(|d| (vector(d), vector(d), vector(d)))) {
        let (s, o, c) = (
            EmbeddingVector::new(s).unwrap(),
            EmbeddingVector::new(o).unwrap(),
            EmbeddingVector::new(c).unwrap(),
        );
        prop_assert_eq!(delta_sem(&s, &o, &c).unwrap(), -delta_sem(&s, &c, &o).unwrap());
        prop_assert_eq!(delta_sem(&s, &o, &o).unwrap(), 0.0);
    }

    #[test]
    fn delta_xc_is_difference_and_antisymmetric(
        (o, c, s) in (1usize..6).prop_flat_map(|d| (population(d), population(d), population(d)))
    ) {
        let (o, c, s) = (wrap(&o), wrap(&c), wrap(&s));
        let (po, pc, ps) = (
            ImagePopulation::new(o.iter().collect()).unwrap(),
            ImagePopulation::new(c.iter().collect()).unwrap(),
            ImagePopulation::new(s.iter().collect()).unwrap(),
        );
        let d = delta_xc(&po, &pc, &ps).unwrap();
        let expected = cross_consistency(&pc, &ps).unwrap() - cross_consistency(&po, &ps).unwrap();
        prop_assert_eq!(d, expected);
        prop_assert_eq!(d, -delta_xc(&pc, &po, &ps).unwrap());
    }

    #[test]
    fn pearson_affine_invariant(
        (xs, ys) in series_strategy(),
        a in 0.1..10.0f64, b in -5.0..5.0f64, c in 0.1..10.0f64, d in -5.0..5.0f64,
    ) {
        let Ok(r) = pearson(&PairedSeries::new(xs.clone(), ys.clone()).unwrap()) else {
            return Ok(());
        };
        let xt: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let yt: Vec<f64> = ys.iter().map(|y| c * y + d).collect();
        let r2 = pearson(&PairedSeries::new(xt.clone(), yt).unwrap()).unwrap();
        prop_assert!((r - r2).abs() < 1e-9);
        let yneg: Vec<f64> = ys.iter().map(|y| -y).collect();
        let r3 = pearson(&PairedSeries::new(xt, yneg).unwrap()).unwrap();
        prop_assert!((r + r3).abs() < 1e-9);
    }

    #[test]
    fn p_value_monotone_in_abs_r(r1 in 0.0..1.0f64, r2 in 0.0..1.0f64, n in 3usize..200) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let (p_lo, p_hi) = (p_value(lo, n).unwrap(), p_value(hi, n).unwrap());
        prop_assert!(p_hi <= p_lo + 1e-15);
        prop_assert!((0.0..=1.0).contains(&p_lo));
        prop_assert_eq!(p_value(-hi, n).unwrap(), p_hi);
    }

    #[test]
    fn ols_residuals_orthogonal((xs, ys) in series_strategy()) {
        let series = PairedSeries::new(xs.clone(), ys.clone()).unwrap();
        let Ok(fit) = linear_fit(&series) else { return Ok(()); };
        let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - fit.predict(*x)).collect();
        let scale: f64 = ys.iter().map(|y| y.abs()).sum::<f64>() + 1.0;
        prop_assert!(residuals.iter().sum::<f64>().abs() < 1e-10 * scale);
        prop_assert!(residuals.iter().zip(&xs).map(|(r, x)| r * x).sum::<f64>().abs() < 1e-10 * scale);
        if let Ok(r) = pearson(&series) {
            prop_assert!(r * fit.slope >= 0.0);
        }
    }
}

fn lang(s: &str) -> LanguageCode {
    LanguageCode::new(s).unwrap()
}

fn inventory(n: usize) -> ConceptInventory {
    let mut inv =
        ConceptInventory::new("v1", lang("en"), vec![lang("en"), lang("de"), lang("id")]).unwrap();
    for i in 0..n {
        inv.add_concept(
            ConceptId::new(format!("c{i:02}")).unwrap(),
            vec![format!("w{i}"), format!("wort{i}"), format!("kata{i}")],
        )
        .unwrap();
    }
    inv
}

#[test]
fn donor_frequencies_are_uniform() {
    // 21 concepts → 20 eligible donors per target; k = 10 without replacement
    // selects each donor with probability 1/2 per seed.
    let inv = inventory(21);
    let target = ConceptId::new("c07").unwrap();
    let seeds = 4000u64;
    let mut counts: BTreeMap<ConceptId, u64> = BTreeMap::new();
    let mut first: BTreeMap<ConceptId, u64> = BTreeMap::new();
    for seed in 0..seeds {
        let samples = generate_pseudocorrections(&inv, &lang("id"), 10, seed).unwrap();
        for s in samples.iter().filter(|s| s.concept == target) {
            *counts.entry(s.donor_concept.clone()).or_default() += 1;
            if s.sample_index == 0 {
                *first.entry(s.donor_concept.clone()).or_default() += 1;
            }
        }
    }
    assert_eq!(counts.len(), 20);
    let (p, n) = (0.5, seeds as f64);
    let (mean, sd) = (n * p, (n * p * (1.0 - p)).sqrt());
    for (donor, &c) in &counts {
        assert!((c as f64 - mean).abs() < 3.0 * sd, "{donor}: {c}");
    }
    // first draw is uniform over 20 donors: chi-square with 19 df, 0.999 quantile 43.82
    let expected = n / 20.0;
    let chi2: f64 = first
        .values()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    assert!(chi2 < 43.82, "chi2 = {chi2}");
}

#[test]
fn pseudo_samples_ignore_other_languages() {
    let inv = inventory(15);
    let before = generate_pseudocorrections(&inv, &lang("id"), 5, 99).unwrap();

    let mut changed =
        ConceptInventory::new("v1", lang("en"), vec![lang("en"), lang("de"), lang("id")]).unwrap();
    for (i, c) in inv.concepts().enumerate() {
        changed
            .add_concept(
                c.clone(),
                vec![format!("w{i}"), format!("anders{i}"), format!("kata{i}")],
            )
            .unwrap();
    }
    assert_eq!(
        generate_pseudocorrections(&changed, &lang("id"), 5, 99).unwrap(),
        before
    );
}

#[test]
fn pseudo_samples_ignore_concept_order() {
    let inv = inventory(15);
    let mut reversed =
        ConceptInventory::new("v1", lang("en"), vec![lang("en"), lang("de"), lang("id")]).unwrap();
    let ids: Vec<_> = inv.concepts().cloned().collect();
    for c in ids.iter().rev() {
        let row = inv
            .languages()
            .iter()
            .map(|l| inv.surface(c, l).unwrap().to_owned())
            .collect();
        reversed.add_concept(c.clone(), row).unwrap();
    }
    assert_eq!(
        generate_pseudocorrections(&reversed, &lang("de"), 4, 3).unwrap(),
        generate_pseudocorrections(&inv, &lang("de"), 4, 3).unwrap()
    );
    assert_eq!(eligible_donors(&inv, &ids[0], &lang("de")).len(), 14);
}

/// Permutation test of H0: ρ = 0 agrees with the t-based p-value on small samples.
#[test]
fn permutation_sanity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut uniform = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    for (n, slope) in [(8usize, 0.0), (10, 0.5), (12, 1.0), (12, 0.2)] {
        let xs: Vec<f64> = (0..n).map(|_| uniform()).collect();
        // noise: sum of 4 uniforms, roughly normal
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| slope * x + (0..4).map(|_| uniform() - 0.5).sum::<f64>() * 0.3)
            .collect();
        let r = pearson(&PairedSeries::new(xs.clone(), ys.clone()).unwrap()).unwrap();
        let p_t = p_value(r, n).unwrap();

        let trials = 20_000;
        let mut perm = ys.clone();
        let mut extreme = 0;
        for _ in 0..trials {
            for i in (1..n).rev() {
                let j = (uniform() * (i + 1) as f64) as usize;
                perm.swap(i, j.min(i));
            }
            let rp = pearson(&PairedSeries::new(xs.clone(), perm.clone()).unwrap()).unwrap();
            if rp.abs() >= r.abs() - 1e-12 {
                extreme += 1;
            }
        }
        let p_perm = extreme as f64 / trials as f64;
        assert!(
            (p_perm - p_t).abs() < 0.05,
            "n={n}: perm {p_perm} vs t {p_t}"
        );
    }
}
