use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Subcommand, ValueEnum};
use num_rational::Rational64;
use sloshlab::actuator::ActuatorModel;
use sloshlab::campaign::{build_plan, run_campaign, CampaignConfig, ExperimentManifest, PlanConfig};
use sloshlab::control::{paired_grid, ClosedLoopConfig, Contender, ControllerKind, SloshPredictor};
use sloshlab::dynamics::{calibrate_emm, calibration_profile, CalibrationOptions, I_SAT_SLEW};
use sloshlab::EmmParams;
use sloshlab::predictor::{
    evaluate as eval_models, generate_dataset, render_eval_table, train_narx, DatasetConfig, GridAxis,
    NarxHyper, NarxModel, SloshDataset, REFERENCE_SNR,
};
use sloshlab::telemetry::{decode_frame, encode_frame, BudgetConfig, BudgetMode, BudgetReport, PressureFrame};

use crate::config::{emit_json, read_json, resolve_seed, to_json, write_text, PredictorSpec, RunConfig};
use crate::{CmdResult, Failure, PredictorChoice, SeedArg};

fn load_model(path: &Path) -> Result<NarxModel, Failure> {
    Ok(NarxModel::load(path)?)
}

fn load_params(path: &Option<PathBuf>) -> Result<EmmParams, Failure> {
    match path {
        Some(p) => {
            let params: EmmParams = read_json(p)?;
            params.validate()?;
            Ok(params)
        }
        None => Ok(sloshlab::dynamics::calibrated_default(I_SAT_SLEW)?),
    }
}

fn predictor(choice: Option<PredictorChoice>, model: &Option<PathBuf>) -> Result<SloshPredictor, Failure> {
    match (choice, model) {
        (Some(PredictorChoice::Zero), _) => Ok(SloshPredictor::Zero),
        (Some(PredictorChoice::Oracle), _) => Ok(SloshPredictor::Oracle),
        (Some(PredictorChoice::Narx) | None, Some(p)) => Ok(SloshPredictor::Narx(Arc::new(load_model(p)?))),
        (Some(PredictorChoice::Narx), None) => {
            Err(Failure::Validation("--predictor narx needs --model".into()))
        }
        (None, None) => Ok(SloshPredictor::Zero),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Args)]
pub struct SimulateArgs {
    /// Run configuration (JSON); unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,
    /// Output directory for `record.csv` and `metrics.json`; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

pub fn simulate(a: SimulateArgs) -> CmdResult {
    let mut cfg: RunConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    cfg.seed = Some(resolve_seed(a.seed.seed, cfg.seed)?);
    if a.out.is_some() {
        cfg.output_dir = a.out.clone();
    }
    cfg.validate()?;
    if a.dump_config {
        println!("{}", to_json(&cfg)?);
        return Ok(());
    }
    let pred = match &cfg.predictor {
        PredictorSpec::Zero => SloshPredictor::Zero,
        PredictorSpec::Oracle => SloshPredictor::Oracle,
        PredictorSpec::Narx { model } => SloshPredictor::Narx(Arc::new(load_model(model)?)),
    };
    let maneuver = cfg.maneuver.maneuver(cfg.axis)?;
    let seed = cfg.seed.unwrap_or(0);
    let rec = sloshlab::control::run_closed_loop(&cfg.closed_loop, &cfg.controller, &maneuver, &pred, cfg.axis, seed)?;
    let metrics = rec.metrics_json()?;
    match &cfg.output_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
            let csv = dir.join("record.csv");
            let file = fs::File::create(&csv).map_err(|e| Failure::io(&csv, e))?;
            rec.write_csv(std::io::BufWriter::new(file)).map_err(|e| Failure::io(&csv, e))?;
            write_text(&dir.join("metrics.json"), &(metrics + "\n"))?;
        }
        None => println!("{metrics}"),
    }
    Ok(())
}

// ---------------------------------------------------------------- calibrate

#[derive(Args)]
pub struct CalibrateArgs {
    /// Moment of inertia about the maneuver axis, kg·m².
    #[arg(long, default_value_t = I_SAT_SLEW)]
    i_sat: f64,
    /// Target band for the peak slosh torque, N·m.
    #[arg(long, default_value_t = 1e-4)]
    lo: f64,
    #[arg(long, default_value_t = 1e-3)]
    hi: f64,
    /// Write the parameters here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

pub fn calibrate(a: CalibrateArgs) -> CmdResult {
    resolve_seed(a.seed.seed, None)?;
    if !(a.i_sat > 0.0) {
        return Err(Failure::Validation("--i-sat must be positive".into()));
    }
    let params = calibrate_emm(
        (a.lo, a.hi),
        &calibration_profile(),
        &EmmParams::uncalibrated(a.i_sat),
        &CalibrationOptions::default(),
    )?;
    emit_json(&params, a.out.as_deref())
}

// ---------------------------------------------------------------- budget

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    AsPublished,
    Derived,
}

#[derive(Args)]
pub struct BudgetArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::AsPublished)]
    mode: ModeArg,
    /// Experiments with camera data.
    #[arg(long, default_value_t = 76)]
    camera: u64,
    /// Experiments without camera data.
    #[arg(long, default_value_t = 153)]
    no_camera: u64,
    /// Emit JSON instead of the text table.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    seed: SeedArg,
}

pub fn budget(a: BudgetArgs) -> CmdResult {
    resolve_seed(a.seed.seed, None)?;
    let mode = match a.mode {
        ModeArg::AsPublished => BudgetMode::AsPublished,
        ModeArg::Derived => BudgetMode::Derived,
    };
    let cfg = BudgetConfig::<Rational64> { mode, ..BudgetConfig::default() };
    let report = BudgetReport::build(&cfg, a.camera, a.no_camera);
    if a.json {
        emit_json(&report, None)
    } else {
        print!("{}", report.render_text());
        Ok(())
    }
}

// ---------------------------------------------------------------- frames

#[derive(Subcommand)]
pub enum FramesAction {
    /// JSON frames (one object or an array) to concatenated binary frames.
    Encode {
        /// JSON input; omit with `--zero`.
        #[arg(long, required_unless_present = "zero")]
        input: Option<PathBuf>,
        /// Encode one all-zero frame of the given shape instead of reading input.
        #[arg(long)]
        zero: bool,
        #[arg(long, default_value_t = 8)]
        strips: usize,
        #[arg(long, default_value_t = 16)]
        pads: usize,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Concatenated binary frames to a JSON array.
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        strips: usize,
        #[arg(long, default_value_t = 16)]
        pads: usize,
        /// Write JSON here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum FrameInput {
    One(PressureFrame),
    Many(Vec<PressureFrame>),
}

pub fn frames(action: FramesAction) -> CmdResult {
    match action {
        FramesAction::Encode { input, zero, strips, pads, output, seed } => {
            resolve_seed(seed.seed, None)?;
            let frames = if zero {
                vec![PressureFrame::zeroed(strips, pads)]
            } else {
                let path = input.expect("clap requires input without --zero");
                match read_json::<FrameInput>(&path)? {
                    FrameInput::One(f) => vec![f],
                    FrameInput::Many(v) => v,
                }
            };
            let mut bytes = Vec::new();
            for f in &frames {
                bytes.extend(encode_frame(f).map_err(sloshlab::Error::from)?);
            }
            if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
            }
            fs::write(&output, bytes).map_err(|e| Failure::io(&output, e))
        }
        FramesAction::Decode { input, strips, pads, output, seed } => {
            resolve_seed(seed.seed, None)?;
            let bytes = fs::read(&input).map_err(|e| Failure::io(&input, e))?;
            let len = strips * pads * 2 + 1;
            if strips == 0 || pads == 0 || bytes.is_empty() || bytes.len() % len != 0 {
                return Err(Failure::Validation(format!(
                    "{} bytes is not a whole number of {len}-byte frames",
                    bytes.len()
                )));
            }
            let frames = bytes
                .chunks(len)
                .enumerate()
                .map(|(i, c)| {
                    let mut f = decode_frame(c, strips, pads).map_err(sloshlab::Error::from)?;
                    f.sequence = i as u64;
                    Ok(f)
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            emit_json(&frames, output.as_deref())
        }
    }
}

// ---------------------------------------------------------------- dataset

#[derive(Args)]
pub struct DatasetArgs {
    /// Dataset configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the out-of-range grid (longer bangs and dwells) instead of the default.
    #[arg(long, conflicts_with = "config")]
    out_of_range: bool,
    /// Add input noise at this SNR.
    #[arg(long)]
    snr: Option<f64>,
    /// Plant parameters from `calibrate`; defaults to the built-in calibration.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Dataset JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Also write the samples as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

pub fn dataset(a: DatasetArgs) -> CmdResult {
    let cfg: DatasetConfig = match (&a.config, a.out_of_range) {
        (Some(p), _) => read_json(p)?,
        (None, true) => DatasetConfig::out_of_range(),
        (None, false) => DatasetConfig::default(),
    };
    let seed = resolve_seed(a.seed.seed, None)?;
    let params = load_params(&a.params)?;
    let mut data = generate_dataset(&cfg, &params, ActuatorModel::Filtered, seed)?;
    if let Some(snr) = a.snr {
        data = data.with_noise(snr, sloshlab::seed::derive_seed(seed, 99))?;
    }
    emit_json(&data, Some(&a.out))?;
    if let Some(p) = &a.csv {
        let file = fs::File::create(p).map_err(|e| Failure::io(p, e))?;
        data.write_csv(std::io::BufWriter::new(file)).map_err(|e| Failure::io(p, e))?;
    }
    println!("{} runs, {} samples", data.len(), data.sample_count());
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Hyperparameters (JSON).
    #[arg(long)]
    hyper: Option<PathBuf>,
    /// Train a feedforward network without output feedback.
    #[arg(long)]
    feedforward: bool,
    #[arg(long)]
    epochs: Option<usize>,
    /// Model JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch training log (JSON).
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

pub fn train(a: TrainArgs) -> CmdResult {
    let seed = resolve_seed(a.seed.seed, None)?;
    let data: SloshDataset = read_json(&a.dataset)?;
    let mut hyper: NarxHyper = match &a.hyper {
        Some(p) => read_json(p)?,
        None => NarxHyper::default(),
    };
    if let Some(e) = a.epochs {
        hyper.epochs = e;
    }
    if a.feedforward {
        hyper = hyper.feedforward();
    }
    let (model, report) = train_narx(&data, &hyper, seed)?;
    model.save(&a.out)?;
    if let Some(p) = &a.log {
        emit_json(&report, Some(p))?;
    }
    let best = report.best();
    println!(
        "{}: best epoch {} of {}, train NRMSE {:.4}, validation NRMSE {:.4}",
        model.name,
        report.best_epoch,
        report.epochs.len(),
        best.train_nrmse,
        best.val_nrmse
    );
    Ok(())
}

// ---------------------------------------------------------------- evaluate

#[derive(Args)]
pub struct EvaluateArgs {
    /// Model file; repeat for several.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    /// Test dataset; must not share run ids with any model's training data.
    #[arg(long)]
    dataset: PathBuf,
    /// Input SNR levels; `inf` means clean. Defaults to clean and the reference level.
    #[arg(long = "snr")]
    snr: Vec<String>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

pub fn evaluate(a: EvaluateArgs) -> CmdResult {
    let seed = resolve_seed(a.seed.seed, None)?;
    let models = a.models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>, _>>()?;
    let data: SloshDataset = read_json(&a.dataset)?;
    let levels = if a.snr.is_empty() {
        vec![None, Some(REFERENCE_SNR)]
    } else {
        a.snr
            .iter()
            .map(|s| match s.as_str() {
                "inf" | "clean" => Ok(None),
                v => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| Failure::Validation(format!("bad --snr value {v:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    let refs: Vec<&NarxModel> = models.iter().collect();
    let rows = eval_models(&refs, &data, &levels, seed)?;
    if let Some(p) = &a.json {
        emit_json(&rows, Some(p))?;
    }
    print!("{}", render_eval_table(&rows));
    Ok(())
}

// ---------------------------------------------------------------- compare

#[derive(Args)]
pub struct CompareArgs {
    /// Closed-loop configuration (JSON). The safe-mode trigger is always
    /// disabled here: the default grid slews faster than its rate limit.
    #[arg(long)]
    config: Option<PathBuf>,
    /// NARX model for the learned-compensation column.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Add the oracle-compensation column.
    #[arg(long)]
    oracle: bool,
    /// Grid points per axis (torque, duration, dwell).
    #[arg(long, default_value_t = 3)]
    points: usize,
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

pub fn compare(a: CompareArgs) -> CmdResult {
    let seed = resolve_seed(a.seed.seed, None)?;
    let mut cfg: ClosedLoopConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ClosedLoopConfig::default(),
    };
    cfg.recovery = None;
    if a.points == 0 {
        return Err(Failure::Validation("--points must be at least 1".into()));
    }
    let mut contenders = vec![
        Contender::new(ControllerKind::Baseline, SloshPredictor::Zero),
        Contender::new(ControllerKind::OutputFeedbackAdaptive, SloshPredictor::Zero),
    ];
    if let Some(p) = &a.model {
        contenders.push(Contender::new(ControllerKind::MachineLearning, SloshPredictor::Narx(Arc::new(load_model(p)?))));
    }
    if a.oracle {
        contenders.push(Contender::new(ControllerKind::MachineLearning, SloshPredictor::Oracle));
    }
    let grid = DatasetConfig::default();
    let axis = |g: &GridAxis| GridAxis::new(g.lo, g.hi, a.points);
    let cmp = paired_grid(&cfg, &axis(&grid.torque), &axis(&grid.duration), &axis(&grid.dwell), &contenders, grid.t_start, seed)?;
    if let Some(p) = &a.json {
        emit_json(&cmp, Some(p))?;
    }
    print!("{}", cmp.render_text());
    Ok(())
}

// ---------------------------------------------------------------- plan

#[derive(Args)]
pub struct PlanArgs {
    /// Plan configuration (JSON); defaults to the 229-experiment plan.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifest JSON output; standard output without it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

pub fn plan(a: PlanArgs) -> CmdResult {
    let seed = resolve_seed(a.seed.seed, None)?;
    let cfg: PlanConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => PlanConfig::default(),
    };
    let plan = build_plan(&cfg, seed)?;
    emit_json(&plan, a.out.as_deref())?;
    if a.out.is_some() {
        let camera = plan.iter().filter(|m| m.camera).count();
        println!("{} experiments: {} with camera, {} without", plan.len(), camera, plan.len() - camera);
    }
    Ok(())
}

// ---------------------------------------------------------------- campaign

#[derive(Args)]
pub struct CampaignArgs {
    /// Manifest file from `plan`; without it the plan is built here.
    #[arg(long, conflicts_with = "plan_config")]
    plan: Option<PathBuf>,
    /// Plan configuration used when no manifest file is given.
    #[arg(long)]
    plan_config: Option<PathBuf>,
    /// Campaign configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Slosh predictor for learned compensation. Defaults to narx with
    /// `--model`; plans with learned compensation need one of the two.
    #[arg(long, value_enum)]
    predictor: Option<PredictorChoice>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Report JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

pub fn campaign(a: CampaignArgs) -> CmdResult {
    let seed = resolve_seed(a.seed.seed, None)?;
    if a.jobs == 0 {
        return Err(Failure::Validation("--jobs must be at least 1".into()));
    }
    let plan: Vec<ExperimentManifest> = match (&a.plan, &a.plan_config) {
        (Some(p), _) => read_json(p)?,
        (None, Some(p)) => build_plan(&read_json(p)?, seed)?,
        (None, None) => build_plan(&PlanConfig::default(), seed)?,
    };
    let cfg: CampaignConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => CampaignConfig::default(),
    };
    let needs_predictor = plan.iter().any(|m| {
        let kinds: BTreeSet<_> = [m.controller.inner().clone(), m.controller.resolve(&cfg.closed_loop.combined, m.excitation.label()).inner().clone()].into();
        kinds.contains(&ControllerKind::MachineLearning)
    });
    if needs_predictor && a.predictor.is_none() && a.model.is_none() {
        return Err(Failure::Validation(
            "plan includes learned compensation: pass --model, or --predictor zero|oracle".into(),
        ));
    }
    let pred = predictor(a.predictor, &a.model)?;
    let report = run_campaign(&plan, &cfg, &pred, a.jobs)?;
    if let Some(p) = &a.out {
        emit_json(&report, Some(p))?;
    }
    print!("{}", report.render_text());
    Ok(())
}
