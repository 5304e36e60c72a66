use rfreg::flm::Estimator;
use rfreg::simlab::{run_study, Model, SimConfig, SimResult};

fn study(model: Model, eps: f64, reps: usize, estimators: Vec<Estimator>) -> SimResult {
    let cfg = SimConfig {
        model,
        eps,
        replications: reps,
        seed: 17,
        estimators,
        ..SimConfig::default()
    };
    run_study(&cfg).unwrap()
}

#[test]
fn fpcr_degrades_with_contamination() {
    for model in [Model::Sinusoid, Model::Wiener] {
        let med: Vec<f64> = [0.0, 0.1, 0.2]
            .iter()
            .map(|&eps| study(model, eps, 50, vec![Estimator::Fpcr]).summary(Estimator::Fpcr).unwrap().pred_median)
            .collect();
        assert!(med.windows(2).all(|w| w[0] <= w[1]), "{model:?}: {med:?}");
    }
}

fn dominance(model: Model) {
    let r = study(model, 0.2, 50, vec![Estimator::Rfpcpr, Estimator::Fpcr]);
    let robust = r.summary(Estimator::Rfpcpr).unwrap().pred_median;
    let classical = r.summary(Estimator::Fpcr).unwrap().pred_median;
    assert!(robust <= 0.2 * classical, "{model:?}: {robust} vs {classical}");
}

#[test]
fn robust_fit_dominates_model1() {
    dominance(Model::Sinusoid);
}

#[test]
fn robust_fit_dominates_model2() {
    dominance(Model::Wiener);
}

#[test]
fn model2_estimation_cells_at_ten_percent() {
    let r = study(Model::Wiener, 0.1, 100, vec![Estimator::Rfpcpr, Estimator::Fpcr]);
    let robust = r.summary(Estimator::Rfpcpr).unwrap().est_mean;
    let classical = r.summary(Estimator::Fpcr).unwrap().est_mean;
    assert!(robust <= 2.0, "RFPCPR estimation error {robust}");
    assert!(classical >= 8.0, "FPCR estimation error {classical}");
}

#[test]
fn model1_prediction_cells_at_ten_percent() {
    let r = study(Model::Sinusoid, 0.1, 100, vec![Estimator::Rfpcpr, Estimator::Fpcr]);
    let robust = r.summary(Estimator::Rfpcpr).unwrap().pred_mean;
    let classical = r.summary(Estimator::Fpcr).unwrap().pred_mean;
    assert!(robust <= 5.0 && classical >= 30.0, "RFPCPR {robust} (<= 5), FPCR {classical} (>= 30)");
}

#[test]
fn model1_fpcr_prediction_at_twenty_percent() {
    let r = study(Model::Sinusoid, 0.2, 100, vec![Estimator::Fpcr]);
    let med = r.summary(Estimator::Fpcr).unwrap().pred_median;
    assert!((156.69 / 2.0..=156.69 * 2.0).contains(&med), "median {med}");
}
