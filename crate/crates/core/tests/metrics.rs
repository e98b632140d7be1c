use casemix_core::datagen::{expit, gen_diagnosis, gen_prognosis, logit, DiagnosisEnvSpec, PrognosisEnvSpec};
use casemix_core::metrics::{
    auc, calibration_curve, calibration_in_the_large, confusion_at, ici_oracle, pair_counts, roc_curve,
    sensitivity, specificity,
};
use casemix_core::model::{OracleModel, RiskModel};
use casemix_core::numerics::beta_pdf;
use casemix_core::transport::{exact_operating_point, DiscreteJoint, TabulatedModel};
use casemix_core::{Error, Seed};
use casemix_oracles as oracle;
use proptest::prelude::*;

fn scored_sample() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..12).prop_map(|k| f64::from(k) / 11.0), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
    .prop_filter("both classes", |(_, ys)| ys.iter().any(|&y| y) && ys.iter().any(|&y| !y))
}

proptest! {
    #[test]
    fn auc_agrees_with_pairs_and_trapezoid((preds, labels) in scored_sample()) {
        let a = auc(&preds, &labels).unwrap();
        let tally = oracle::enumerate_pairs(&preds, &labels);
        prop_assert_eq!(a, tally.auc());
        let counts = pair_counts(&preds, &labels).unwrap();
        prop_assert_eq!(counts.concordant, tally.wins as u128);
        prop_assert_eq!(counts.tied, tally.ties as u128);
        let roc = roc_curve(&preds, &labels).unwrap();
        prop_assert!((roc.trapezoid_area() - a).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_maps((preds, labels) in scored_sample(), shift in -3.0f64..3.0) {
        let a = auc(&preds, &labels).unwrap();
        let mapped: Vec<f64> = preds.iter().map(|&p| (3.0 * p + shift).exp()).collect();
        prop_assert_eq!(auc(&mapped, &labels).unwrap(), a);
        let flipped: Vec<f64> = preds.iter().map(|p| -p).collect();
        prop_assert!((auc(&flipped, &labels).unwrap() - (1.0 - a)).abs() < 1e-12);
    }

    #[test]
    fn auc_ignores_positive_duplication((preds, labels) in scored_sample(), k in prop::sample::select(vec![2usize, 3, 5])) {
        let a = auc(&preds, &labels).unwrap();
        let (mut p2, mut y2) = (preds.clone(), labels.clone());
        for (&p, &y) in preds.iter().zip(&labels) {
            if y {
                for _ in 1..k {
                    p2.push(p);
                    y2.push(true);
                }
            }
        }
        prop_assert!((auc(&p2, &y2).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn roc_is_monotone_staircase((preds, labels) in scored_sample()) {
        let roc = roc_curve(&preds, &labels).unwrap();
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in roc.points.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }
}

#[test]
fn auc_rejects_single_class() {
    assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedMetric(_))));
}

#[test]
fn ici_matches_quadrature_for_shifted_model() {
    // Model expit(x + 0.5) on prognosis data whose true risk is expit(x).
    let spec = PrognosisEnvSpec::new("gp", 5.0, 10.0).unwrap();
    let d = gen_prognosis(&spec, 200_000, Seed(41)).unwrap();
    let preds: Vec<f64> = d.xs().iter().map(|&x| expit(x + 0.5)).collect();
    let risks = d.true_risks().unwrap();
    let expected = oracle::integrate(
        |p| (expit(logit(p).unwrap() + 0.5) - p).abs() * beta_pdf(p, 5.0, 10.0).unwrap(),
        1e-12,
        1.0 - 1e-12,
        1e-13,
    );
    let full = ici_oracle(&preds, &risks).unwrap();
    assert!((full - expected).abs() < 0.002, "{full} vs {expected}");

    // Disjoint subsamples scatter around the same value.
    let chunk = preds.len() / 100;
    let mut worst: f64 = 0.0;
    let mut mean = 0.0;
    for k in 0..100 {
        let r = k * chunk..(k + 1) * chunk;
        let ici = ici_oracle(&preds[r.clone()], &risks[r]).unwrap();
        mean += ici / 100.0;
        worst = worst.max((ici - expected).abs());
    }
    assert!((mean - full).abs() < 1e-12);
    assert!(worst < 0.01, "{worst}");

    let oracle_preds: Vec<f64> = d.xs().iter().map(|&x| expit(x)).collect();
    assert_eq!(ici_oracle(&oracle_preds, &risks).unwrap(), 0.0);
}

#[test]
fn empirical_sens_spec_match_exact_joint() {
    let mut rng = Seed(42).stream();
    for _ in 0..10 {
        let joint = DiscreteJoint::random(&mut rng);
        let model = TabulatedModel::random_for(&joint, &mut rng);
        let (xs, ys) = joint.sample(200_000, &mut rng);
        let preds = model.predict_all(&xs);
        for tau in [0.25, 0.5, 0.75] {
            let exact = exact_operating_point(&joint, &model, tau).unwrap();
            let c = confusion_at(&preds, &ys, tau).unwrap();
            let npos = (c.true_pos + c.false_neg) as f64;
            let nneg = (c.true_neg + c.false_pos) as f64;
            let se_sens = (exact.sensitivity * (1.0 - exact.sensitivity) / npos).sqrt().max(1e-9);
            let se_spec = (exact.specificity * (1.0 - exact.specificity) / nneg).sqrt().max(1e-9);
            let sens = sensitivity(&c).unwrap();
            let spec = specificity(&c).unwrap();
            assert!((sens - exact.sensitivity).abs() <= 4.0 * se_sens, "sens {sens} vs {}", exact.sensitivity);
            assert!((spec - exact.specificity).abs() <= 4.0 * se_spec, "spec {spec} vs {}", exact.specificity);
        }
    }
}

#[test]
fn calibrated_model_bins_lie_on_diagonal() {
    let spec = PrognosisEnvSpec::new("hospital", 10.0, 20.0).unwrap();
    let d = gen_prognosis(&spec, 200_000, Seed(43)).unwrap();
    let preds = d.true_risks().unwrap();
    let curve = calibration_curve(&preds, &d.labels(), 10).unwrap();
    assert_eq!(curve.bins.len(), 10);
    assert_eq!(curve.total_count(), 200_000);
    for b in &curve.bins {
        let se = (b.mean_predicted * (1.0 - b.mean_predicted) / b.count as f64).sqrt();
        assert!((b.observed_rate - b.mean_predicted).abs() <= 3.0 * se, "{b:?}");
    }
}

#[test]
fn calibration_in_the_large_offsets() {
    let spec = PrognosisEnvSpec::new("gp", 5.0, 10.0).unwrap();
    let d = gen_prognosis(&spec, 100_000, Seed(44)).unwrap();
    let labels = d.labels();
    let calibrated: Vec<f64> = d.xs().iter().map(|&x| expit(x)).collect();
    assert!(calibration_in_the_large(&calibrated, &labels).unwrap().abs() < 0.02);
    let over: Vec<f64> = d.xs().iter().map(|&x| expit(x + 0.7)).collect();
    let under: Vec<f64> = d.xs().iter().map(|&x| expit(x - 0.7)).collect();
    let (c_over, c_under) = (
        calibration_in_the_large(&over, &labels).unwrap(),
        calibration_in_the_large(&under, &labels).unwrap(),
    );
    assert!(c_over < 0.0 && c_under > 0.0);
    assert!((c_over + 0.7).abs() < 0.03 && (c_under - 0.7).abs() < 0.03);

    // Model matched to 20% prevalence applied where prevalence is 50%.
    let trained = DiagnosisEnvSpec::new("screening", 0.2).unwrap();
    let eval = gen_diagnosis(&DiagnosisEnvSpec::new("hospital", 0.5).unwrap(), 100_000, Seed(45)).unwrap();
    let preds = OracleModel::Diagnosis(trained).predict_all(&eval.xs());
    let c = calibration_in_the_large(&preds, &eval.labels()).unwrap();
    let expected = logit(0.5).unwrap() - logit(0.2).unwrap();
    assert!((expected - 1.386_294_361).abs() < 1e-9);
    assert!((c - expected).abs() < 0.05, "{c}");
}
