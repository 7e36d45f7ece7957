use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use occexpo::annotate::{
    annotate_occupation, parse_category, AnnotateOptions, Capability, ClassifierClient, ClientError, CompletionRequest,
    MockClient,
};
use occexpo::exposure::{demographic_exposure, industry_exposure, DemographicShares, IntensityMatrix, ShareMatrix};
use occexpo::model::{
    adopt_decision, adoption_threshold, aggregate_growth, bisect_threshold, growth_factor, optimal_decisions,
    GrowthLaw, GrowthTable, Sector,
};
use occexpo::scores::{ensemble, model_score};
use occexpo::stats::{pearson, summarize, StarThresholds};
use occexpo::taxonomy::{OccupationCode, Taxonomy, TaxonomyRow};
use occexpo::ExposureCategory;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn code(s: &str) -> OccupationCode {
    s.parse().unwrap()
}

/// Tree shape: for each large category, for each medium, the number of
/// small children (0 makes the medium a leaf).
fn shape() -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0usize..4, 0..4), 1..4)
}

fn build_rows(shape: &[Vec<usize>]) -> Vec<TaxonomyRow> {
    let mut rows = Vec::new();
    for (l, mediums) in shape.iter().enumerate() {
        let lc = format!("{}", l + 1);
        rows.push(TaxonomyRow::new(&lc, "large"));
        for (m, &smalls) in mediums.iter().enumerate() {
            let mc = format!("{lc}-{:02}", m + 1);
            rows.push(TaxonomyRow::new(&mc, "medium"));
            for s in 0..smalls {
                rows.push(TaxonomyRow::new(&format!("{mc}-{:02}", s + 1), "small"));
            }
        }
    }
    rows
}

fn leaf_scores(t: &Taxonomy, pool: &[f64]) -> BTreeMap<OccupationCode, f64> {
    t.scored_leaves()
        .enumerate()
        .map(|(i, n)| (n.code.clone(), pool[i % pool.len()]))
        .collect()
}

proptest! {
    #[test]
    fn aggregation_bounded_by_descendant_leaves(shape in shape(), pool in prop::collection::vec(0.0f64..=1.0, 1..40)) {
        let t = Taxonomy::from_rows(build_rows(&shape)).unwrap();
        let leaves = leaf_scores(&t, &pool);
        let agg = t.aggregate_up(&leaves).unwrap();
        for (c, v) in &agg {
            let desc: Vec<f64> = leaves.iter().filter(|(l, _)| *l == c || c.is_ancestor_of(l)).map(|(_, v)| *v).collect();
            let lo = desc.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = desc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12, "{c}: {v} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn aggregation_is_idempotent(shape in shape(), pool in prop::collection::vec(0.0f64..=1.0, 1..40)) {
        let t = Taxonomy::from_rows(build_rows(&shape)).unwrap();
        let leaves = leaf_scores(&t, &pool);
        let once = t.aggregate_up(&leaves).unwrap();
        prop_assert_eq!(&t.aggregate_up(&leaves).unwrap(), &once);
        // feeding the output back in changes nothing: internal values are ignored
        prop_assert_eq!(&t.aggregate_up(&once).unwrap(), &once);
    }

    #[test]
    fn aggregation_ignores_row_order(shape in shape(), pool in prop::collection::vec(0.0f64..=1.0, 1..40), seed: u64) {
        let rows = build_rows(&shape);
        let t = Taxonomy::from_rows(rows.clone()).unwrap();
        let leaves = leaf_scores(&t, &pool);
        let mut shuffled = rows;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let u = Taxonomy::from_rows(shuffled).unwrap();
        let a = t.aggregate_up(&leaves).unwrap();
        let b = u.aggregate_up(&leaves).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (k, v) in &a {
            prop_assert!((v - b[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn excluded_subtrees_drop_out(shape in shape(), pool in prop::collection::vec(0.0f64..=1.0, 1..40), which in 0usize..4) {
        let mut rows = build_rows(&shape);
        let target = format!("{}", which % shape.len() + 1);
        for r in rows.iter_mut().filter(|r| r.code == target) {
            r.excluded = true;
        }
        let t = Taxonomy::from_rows(rows).unwrap();
        let leaves = leaf_scores(&t, &pool);
        let agg = t.aggregate_up(&leaves).unwrap();
        let root = code(&target);
        prop_assert!(agg.keys().all(|c| c != &root && !root.is_ancestor_of(c)));
    }
}

fn stochastic(rows: usize, cols: usize, raw: &[f64]) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|i| {
            let w: Vec<f64> = (0..cols).map(|j| raw[(i * cols + j) % raw.len()] + 1e-3).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

fn intensity(rows: usize, cols: usize, raw: &[f64]) -> (IntensityMatrix, Vec<OccupationCode>) {
    let codes: Vec<OccupationCode> = (0..cols).map(|j| code(&format!("2-{:02}", j + 1))).collect();
    let m = ShareMatrix::new(
        IntensityMatrix::KEY,
        (0..rows).map(|i| (i + 1).to_string()).collect(),
        codes.iter().map(ToString::to_string).collect(),
        stochastic(rows, cols, raw),
    )
    .unwrap();
    (IntensityMatrix::from_shares(m).unwrap(), codes)
}

fn demographics(groups: usize, industries: usize, raw: &[f64]) -> DemographicShares {
    let m = ShareMatrix::new(
        DemographicShares::KEY,
        (0..groups).map(|g| format!("g{g}")).collect(),
        (0..industries).map(|i| (i + 1).to_string()).collect(),
        stochastic(groups, industries, raw),
    )
    .unwrap();
    DemographicShares { matrix: m }
}

proptest! {
    #[test]
    fn projections_are_convex(
        rows in 1usize..8, cols in 1usize..12, groups in 1usize..5,
        raw in prop::collection::vec(0.0f64..1.0, 1..64),
        scores in prop::collection::vec(0.0f64..=1.0, 12),
    ) {
        let (beta, codes) = intensity(rows, cols, &raw);
        let occ: BTreeMap<_, _> = codes.iter().cloned().zip(scores.iter().cloned()).collect();
        let lo = occ.values().cloned().fold(f64::INFINITY, f64::min);
        let hi = occ.values().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ind = industry_exposure(&beta, &occ).unwrap();
        for (_, v) in &ind {
            prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
        let ilo = ind.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let ihi = ind.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let demo = demographic_exposure(&demographics(groups, rows, &raw), &ind.into_iter().collect()).unwrap();
        for (_, v) in &demo {
            prop_assert!(*v >= ilo - 1e-12 && *v <= ihi + 1e-12);
        }
    }

    #[test]
    fn constant_scores_propagate(rows in 1usize..8, cols in 1usize..12, raw in prop::collection::vec(0.0f64..1.0, 1..64), c in 0.0f64..=1.0) {
        let (beta, codes) = intensity(rows, cols, &raw);
        let occ: BTreeMap<_, _> = codes.iter().map(|k| (k.clone(), c)).collect();
        let ind = industry_exposure(&beta, &occ).unwrap();
        for (_, v) in &ind {
            prop_assert!((v - c).abs() < 1e-12);
        }
        let demo = demographic_exposure(&demographics(3, rows, &raw), &ind.into_iter().collect()).unwrap();
        for (_, v) in &demo {
            prop_assert!((v - c).abs() < 1e-12);
        }
    }

    #[test]
    fn projections_scale_linearly(
        rows in 1usize..8, cols in 1usize..12,
        raw in prop::collection::vec(0.0f64..1.0, 1..64),
        scores in prop::collection::vec(0.0f64..=1.0, 12),
        lambda in 0.0f64..1.0,
    ) {
        let (beta, codes) = intensity(rows, cols, &raw);
        let demo = demographics(3, rows, &raw);
        let occ: BTreeMap<_, _> = codes.iter().cloned().zip(scores.iter().cloned()).collect();
        let scaled: BTreeMap<_, _> = occ.iter().map(|(k, v)| (k.clone(), v * lambda)).collect();
        let a = industry_exposure(&beta, &occ).unwrap();
        let b = industry_exposure(&beta, &scaled).unwrap();
        for ((_, x), (_, y)) in a.iter().zip(&b) {
            prop_assert!((x * lambda - y).abs() < 1e-12);
        }
        let da = demographic_exposure(&demo, &a.into_iter().collect()).unwrap();
        let db = demographic_exposure(&demo, &b.into_iter().collect()).unwrap();
        for ((_, x), (_, y)) in da.iter().zip(&db) {
            prop_assert!((x * lambda - y).abs() < 1e-12);
        }
    }
}

fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
    })
}

fn spread(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
}

proptest! {
    #[test]
    fn pearson_is_symmetric((x, y) in series()) {
        prop_assume!(spread(&x) > 1e-6 && spread(&y) > 1e-6);
        let th = StarThresholds::default();
        let a = pearson(&x, &y, &th).unwrap();
        let b = pearson(&y, &x, &th).unwrap();
        prop_assert!((a.r - b.r).abs() < 1e-12);
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.p_value));
    }

    #[test]
    fn pearson_survives_positive_affine_maps((x, y) in series(), a in 0.01f64..100.0, b in -50.0f64..50.0) {
        prop_assume!(spread(&x) > 1e-3 && spread(&y) > 1e-3);
        let th = StarThresholds::default();
        let base = pearson(&x, &y, &th).unwrap().r;
        let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let yt: Vec<f64> = y.iter().map(|v| a * v - b).collect();
        prop_assert!((pearson(&xt, &y, &th).unwrap().r - base).abs() < 1e-9);
        prop_assert!((pearson(&x, &yt, &th).unwrap().r - base).abs() < 1e-9);
    }

    #[test]
    fn lower_p_never_gets_fewer_stars(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
        let th = StarThresholds::default();
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(th.stars(lo).len() >= th.stars(hi).len());
    }

    #[test]
    fn mean_shift_moves_mean_only(x in prop::collection::vec(-10.0f64..10.0, 2..60), c in -100.0f64..100.0) {
        let a = summarize(&x).unwrap();
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let b = summarize(&shifted).unwrap();
        prop_assert!((b.mean - (a.mean + c)).abs() < 1e-9);
        prop_assert!((b.std - a.std).abs() < 1e-9);
    }
}

fn category() -> impl Strategy<Value = ExposureCategory> {
    prop::sample::select(ExposureCategory::ALL.to_vec())
}

proptest! {
    #[test]
    fn model_score_ignores_sample_order(samples in prop::collection::vec(category(), 1..20), seed: u64) {
        let a = model_score(&samples).unwrap();
        let mut shuffled = samples.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!((a - model_score(&shuffled).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn ensemble_ignores_model_names(scores in prop::collection::vec(0.0f64..=1.0, 1..6)) {
        let a: BTreeMap<String, f64> = scores.iter().enumerate().map(|(i, v)| (format!("m{i}"), *v)).collect();
        let b: BTreeMap<String, f64> = scores.iter().enumerate().map(|(i, v)| (format!("z{}", 9 - i), *v)).collect();
        let ea = ensemble(&a).unwrap();
        prop_assert!((ea - ensemble(&b).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ea));
    }

    #[test]
    fn labels_parse_inside_free_text(c in category(), before in "[\\u4e00-\\u9fa5 ,.:：。]{0,8}", after in "[\\u4e00-\\u9fa5 ,.:：。]{0,8}") {
        let response = format!("{before}{c}{after}");
        prop_assert_eq!(parse_category(&response).unwrap(), c);
    }
}

/// Fails every other request, then answers from a fixed cycle.
struct Flaky {
    calls: AtomicUsize,
    answers: Vec<&'static str>,
}

impl ClassifierClient for Flaky {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        let i = self.calls.fetch_add(1, Ordering::SeqCst);
        if request.attempt == 0 && i.is_multiple_of(2) {
            return Err(ClientError("transient".into()));
        }
        Ok(self.answers[request.sample % self.answers.len()].to_owned())
    }

    fn capability(&self) -> Capability {
        Capability::Concurrent
    }
}

fn node_taxonomy() -> Taxonomy {
    let mut rows = vec![TaxonomyRow::new("2", "large"), TaxonomyRow::new("2-01", "medium")];
    rows[1].description = "描述".into();
    Taxonomy::from_rows(rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn retries_never_inflate_sample_count(n in 1usize..12, in_flight in 1usize..6) {
        let t = node_taxonomy();
        let node = t.get_str("2-01").unwrap();
        let client = Flaky { calls: AtomicUsize::new(0), answers: vec!["E1", "E0", "E2"] };
        let opts = AnnotateOptions { n_samples: n, max_in_flight: in_flight, ..AnnotateOptions::default() };
        let run = annotate_occupation(&client, node, &opts).unwrap();
        prop_assert_eq!(run.samples.len(), n);
        prop_assert_eq!(run.raw_responses.len(), n);
        // sample order follows request order however requests complete
        for (i, s) in run.samples.iter().enumerate() {
            prop_assert_eq!(s.as_str(), ["E1", "E0", "E2"][i % 3]);
        }
    }

    #[test]
    fn seeded_mock_is_a_pure_function(seed: u64, n in 1usize..10, in_flight in 1usize..6) {
        let t = node_taxonomy();
        let node = t.get_str("2-01").unwrap();
        let opts = AnnotateOptions { n_samples: n, max_in_flight: in_flight, ..AnnotateOptions::default() };
        let serial = AnnotateOptions { max_in_flight: 1, ..opts.clone() };
        let a = annotate_occupation(&MockClient::seeded(seed, "m"), node, &opts).unwrap();
        let b = annotate_occupation(&MockClient::seeded(seed, "m"), node, &serial).unwrap();
        prop_assert_eq!(a.samples, b.samples);
    }
}

fn exp(rho: f64) -> GrowthLaw {
    GrowthLaw::exponential(rho).unwrap()
}

fn economy() -> impl Strategy<Value = (Vec<Sector>, f64)> {
    (1usize..9, 0.1f64..4.0).prop_flat_map(|(n, rho)| {
        (
            prop::collection::vec((0.01f64..1.0, 0.0f64..0.95, 0.0f64..=1.0), n),
            Just(rho),
        )
            .prop_map(|(raw, rho)| {
                let total: f64 = raw.iter().map(|r| r.0).sum();
                let sectors = raw
                    .iter()
                    .enumerate()
                    .map(|(i, &(w, d, r))| Sector::new(i.to_string(), w / total, d, r))
                    .collect();
                (sectors, rho)
            })
    })
}

proptest! {
    #[test]
    fn decision_matches_threshold_test(r in 0.0f64..=1.0, delta in 0.0f64..0.95, rho in 0.05f64..5.0) {
        let law = exp(rho);
        let thr = adoption_threshold(delta, &law).unwrap();
        prop_assume!((r - thr).abs() > 1e-12);
        let s = Sector::new("x", 1.0, delta, r);
        prop_assert_eq!(adopt_decision(&s, &law).unwrap(), r > thr);
    }

    #[test]
    fn optimal_decisions_beat_every_alternative((sectors, rho) in economy()) {
        let law = exp(rho);
        let best = aggregate_growth(&sectors, &law, &optimal_decisions(&sectors, &law).unwrap()).unwrap();
        let n = sectors.len();
        for mask in 0u32..(1 << n) {
            let d: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            prop_assert!(aggregate_growth(&sectors, &law, &d).unwrap() <= best + 1e-12);
        }
    }

    #[test]
    fn one_more_adopter_changes_growth_by_its_margin((sectors, rho) in economy(), mask: u32, k in 0usize..9) {
        let law = exp(rho);
        let n = sectors.len();
        let k = k % n;
        let mut d: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        d[k] = false;
        let before = aggregate_growth(&sectors, &law, &d).unwrap();
        d[k] = true;
        let after = aggregate_growth(&sectors, &law, &d).unwrap();
        let s = &sectors[k];
        let margin = s.output_share * ((1.0 - s.damage_ratio) * growth_factor(&law, s.exposure).unwrap() - 1.0);
        prop_assert!((after - before - margin).abs() < 1e-12);
        if margin.abs() > 1e-12 {
            prop_assert_eq!(margin > 0.0, adopt_decision(s, &law).unwrap());
        }
    }

    #[test]
    fn growth_ignores_sector_order((sectors, rho) in economy(), mask: u32, seed: u64) {
        let law = exp(rho);
        let n = sectors.len();
        let d: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let ps: Vec<Sector> = idx.iter().map(|&i| sectors[i].clone()).collect();
        let pd: Vec<bool> = idx.iter().map(|&i| d[i]).collect();
        let a = aggregate_growth(&sectors, &law, &d).unwrap();
        let b = aggregate_growth(&ps, &law, &pd).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn nobody_adopting_means_no_growth((sectors, rho) in economy()) {
        let none = vec![false; sectors.len()];
        prop_assert_eq!(aggregate_growth(&sectors, &exp(rho), &none).unwrap(), 1.0);
        let table = GrowthLaw::Custom { table: GrowthTable::new(vec![(0.0, 1.0), (0.5, 1.3), (1.0, 2.0)]).unwrap() };
        prop_assert_eq!(aggregate_growth(&sectors, &table, &none).unwrap(), 1.0);
    }

    #[test]
    fn bisection_agrees_with_closed_form(delta in 0.0f64..0.6, rho in 0.3f64..2.0) {
        let law = exp(rho);
        let closed = adoption_threshold(delta, &law).unwrap();
        prop_assume!(closed < 0.99);
        let found = bisect_threshold(delta, &law, 1.0).unwrap().unwrap();
        prop_assert!((found - closed).abs() < 1e-9);
    }
}
