use sloshlab::actuator::ActuatorModel;
use sloshlab::dynamics::{calibrated_default, I_SAT_SLEW};
use sloshlab::predictor::{
    evaluate, generate_dataset, nrmse, train_narx, DatasetConfig, FeedbackMode, GridAxis, NarxHyper, NarxModel,
    SloshDataset,
};
use sloshlab::Error;

fn small(prefix: &str, seed: u64) -> SloshDataset {
    let cfg = DatasetConfig {
        torque: GridAxis::new(0.003, 0.006, 2),
        duration: GridAxis::new(5.0, 10.0, 2),
        dwell: GridAxis::new(25.0, 30.0, 2),
        id_prefix: prefix.into(),
        ..DatasetConfig::default()
    };
    generate_dataset(&cfg, &calibrated_default(I_SAT_SLEW).unwrap(), ActuatorModel::Filtered, seed).unwrap()
}

fn quick() -> NarxHyper {
    NarxHyper { epochs: 20, ..NarxHyper::default() }
}

#[test]
fn datasets_are_deterministic_and_sampled_at_10hz() {
    let a = small("run", 1);
    assert_eq!(a, small("run", 1));
    assert_eq!(a.len(), 8);
    assert_eq!(a.sample_rate, 10.0);
    assert!(a.runs.iter().all(|r| r.meta.in_range));
    assert!(a.runs.iter().any(|r| r.meta.sign < 0.0) && a.runs.iter().any(|r| r.meta.sign > 0.0));
}

#[test]
fn training_is_seeded_and_improves_on_the_start() {
    let data = small("run", 1);
    let (a, ra) = train_narx(&data, &quick(), 3).unwrap();
    let (b, _) = train_narx(&data, &quick(), 3).unwrap();
    assert_eq!(a, b);
    assert!(ra.best().val_nrmse < ra.epochs[0].val_nrmse || ra.best_epoch == 1);
    assert_eq!(ra.train_ids.len() + ra.validation_ids.len(), data.len());
}

#[test]
fn evaluation_refuses_training_runs() {
    let data = small("run", 1);
    let (m, _) = train_narx(&data, &quick(), 0).unwrap();
    assert!(matches!(evaluate(&[&m], &data, &[None], 0), Err(Error::DatasetOverlap(_))));
    let rows = evaluate(&[&m], &small("test", 2), &[None, Some(16.5)], 0).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.nrmse.is_finite()));
}

#[test]
fn closed_feedback_is_no_worse_than_open() {
    let data = small("run", 1);
    let (m, _) = train_narx(&data, &quick(), 0).unwrap();
    let test = small("test", 9);
    let score = |mode| {
        let (mut p, mut t) = (Vec::new(), Vec::new());
        for r in &test.runs {
            p.extend(m.predict_run(r, mode).unwrap());
            t.extend_from_slice(&r.gamma_s);
        }
        nrmse(&p, &t).value
    };
    assert!(score(FeedbackMode::Closed) <= score(FeedbackMode::Open) * 1.05);
}

#[test]
fn models_survive_a_file_round_trip() {
    let (m, _) = train_narx(&small("run", 1), &NarxHyper { epochs: 2, ..NarxHyper::default() }, 0).unwrap();
    let dir = std::env::temp_dir().join(format!("sloshlab-model-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("m.json");
    m.save(&path).unwrap();
    assert_eq!(NarxModel::load(&path).unwrap(), m);
    std::fs::remove_dir_all(&dir).unwrap();

    let mut v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
    v["version"] = 99.into();
    assert!(matches!(NarxModel::from_json(&v.to_string()), Err(Error::ModelVersion { found: 99, .. })));
    let mut v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
    v["w2"] = serde_json::json!([0.0]);
    assert!(NarxModel::from_json(&v.to_string()).is_err());
}

#[test]
fn bad_hyperparameters_are_rejected() {
    let data = small("run", 1);
    for h in [
        NarxHyper { n_b: 0, ..quick() },
        NarxHyper { epochs: 0, ..quick() },
        NarxHyper { momentum: 1.0, ..quick() },
        NarxHyper { validation_split: 1.0, ..quick() },
    ] {
        assert!(train_narx(&data, &h, 0).unwrap_err().is_validation());
    }
}
