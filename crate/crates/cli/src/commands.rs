use std::fs;
use std::path::Path;

use log::info;

use radloc::diagnostics::{mse_slope_experiment, MseSetup};
use radloc::geometry::{convex_hull, ConvexHull};
use radloc::io::{
    export_results, ingest_counts, load_scenario, match_background, write_counts, ExportInput,
    MobilitySettings, Scenario,
};
use radloc::measurement::{prepare_replay, simulate_background, simulate_frames};
use radloc::mobility::{run_sir_mobile, MobilityStrategy, MoveConfig};
use radloc::{run_sir, Error, Particle, Point2, RandomStream, Result, StreamName};

use crate::{Command, Common, DiagnoseArgs, LocalizeArgs, MobilityArg, PhiArg, ReplayArgs, SimulateArgs};

/// Stream id for simulated background surveys, kept apart from the named
/// streams so a survey never shares draws with the run it feeds.
const SURVEY_STREAM: u64 = 100;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Localize(a) => localize(a),
        Command::Replay(a) => replay(a),
        Command::Diagnose(a) => diagnose(a),
    }
}

fn load(common: &Common) -> Result<Scenario> {
    let mut sc = load_scenario(&common.scenario)?;
    if let Some(seed) = common.seed {
        sc.filter.seed = seed;
    }
    if let Some(n) = common.n_particles {
        sc.filter.n_particles = n;
    }
    if let Some(n) = common.frames {
        sc.filter.n_frames = n;
    }
    if let Some(m) = common.model {
        sc.filter.model = m;
    }
    if let Some(l) = common.likelihood {
        sc.filter.likelihood = l;
    }
    if let Some(p) = common.prior {
        sc.filter.prior = p;
    }
    sc.validate()?;
    Ok(sc)
}

fn truth(sc: &Scenario) -> Result<Particle> {
    sc.source_truth
        .ok_or_else(|| Error::config("source", "this command needs a [source] section"))
}

fn ids(sc: &Scenario) -> Vec<String> {
    sc.detectors.iter().map(|d| d.id.clone()).collect()
}

fn hull(sc: &Scenario) -> Option<ConvexHull> {
    convex_hull(&sc.network()).ok()
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let sc = load(&a.common)?;
    let seed = sc.filter.seed;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut rng = RandomStream::named(seed, StreamName::Measurement);
    let frames = if a.background_only {
        simulate_background(&sc.detectors, sc.filter.n_frames, &mut rng)?
    } else {
        simulate_frames(&truth(&sc)?, &sc.detectors, &sc.scene, sc.filter.model, sc.filter.n_frames, &mut rng)?
    };
    let path = a.out.join("counts.csv");
    write_counts(&path, &ids(&sc), &frames)?;
    info!("wrote {} frames to {}", frames.len(), path.display());
    if let Some(n) = a.background {
        let bg = simulate_background(&sc.detectors, n, &mut RandomStream::new(seed, SURVEY_STREAM))?;
        write_counts(a.out.join("background.csv"), &ids(&sc), &bg)?;
    }
    Ok(())
}

fn apply_mobility(sc: &mut Scenario, arg: Option<MobilityArg>) {
    let strategy = match arg {
        None => return,
        Some(MobilityArg::Off) => {
            sc.mobility = None;
            return;
        }
        Some(MobilityArg::MeanPursuit) => MobilityStrategy::MeanPursuit,
        Some(MobilityArg::Kde) => MobilityStrategy::Kde,
    };
    // Keep the scenario's step settings when it already names this strategy.
    let moves = match &sc.mobility {
        Some(m) if m.strategy == strategy => m.moves,
        _ => MoveConfig::for_strategy(strategy),
    };
    sc.mobility = Some(MobilitySettings { strategy, moves });
}

fn localize(a: LocalizeArgs) -> Result<()> {
    let mut sc = load(&a.common)?;
    apply_mobility(&mut sc, a.mobility);
    let source = truth(&sc)?;
    let seed = sc.filter.seed;
    let mut config = sc.sir_config();
    config.record_history = a.history;

    let (run, history) = match &sc.mobility {
        Some(m) => {
            let mobile = run_sir_mobile(&config, &sc.scene, &sc.detectors, &source, sc.filter.n_frames, &m.moves, seed)?;
            (mobile.run, Some(mobile.detector_history))
        }
        None => {
            let frames = simulate_frames(
                &source,
                &sc.detectors,
                &sc.scene,
                sc.filter.model,
                sc.filter.n_frames,
                &mut RandomStream::named(seed, StreamName::Measurement),
            )?;
            (run_sir(&config, &sc.scene, &sc.detectors, &frames, seed)?, None)
        }
    };
    let hull = hull(&sc);
    let files = export_results(
        &ExportInput {
            scene: &sc.scene,
            detectors: &sc.detectors,
            run: &run,
            truth: Some(source),
            hull: hull.as_ref(),
            detector_history: history.as_deref(),
            seed,
        },
        &a.out,
    )?;
    report_final(&run, Some(&source), &files.summary);
    Ok(())
}

fn replay(a: ReplayArgs) -> Result<()> {
    let sc = load(&a.common)?;
    let seed = sc.filter.seed;
    let data = ingest_counts(&a.counts, a.bin_mode)?.reorder(&ids(&sc))?;
    if data.frames.is_empty() {
        return Err(Error::DegenerateInput(format!("{} has no frames", a.counts.display())));
    }
    let bg_means = match &a.background {
        Some(path) => {
            let bg = ingest_counts(path, a.bin_mode)?;
            // Without a surveyed layout, the survey is taken at the detectors.
            let layout: Vec<(String, Point2)> = if sc.background_detectors.is_empty() {
                sc.detectors.iter().map(|d| (d.id.clone(), d.position)).collect()
            } else {
                sc.background_detectors.iter().map(|b| (b.id.clone(), b.position)).collect()
            };
            Some(match_background(&sc.network(), &layout, &bg)?)
        }
        None => None,
    };
    let frames = prepare_replay(&data.frames, bg_means.as_deref(), a.augment, seed)?;
    // The record sets the frame count unless --frames asks for fewer.
    let frames: Vec<_> = match a.common.frames {
        Some(n) if n < frames.len() => frames[..n].to_vec(),
        _ => frames,
    };
    let mut config = sc.sir_config();
    config.record_history = a.history;
    if bg_means.is_some() {
        config.include_background = false;
    }
    let run = run_sir(&config, &sc.scene, &sc.detectors, &frames, seed)?;
    let hull = hull(&sc);
    let files = export_results(
        &ExportInput {
            scene: &sc.scene,
            detectors: &sc.detectors,
            run: &run,
            truth: sc.source_truth,
            hull: hull.as_ref(),
            detector_history: None,
            seed,
        },
        &a.out,
    )?;
    report_final(&run, sc.source_truth.as_ref(), &files.summary);
    Ok(())
}

fn report_final(run: &radloc::SirRun, truth: Option<&Particle>, summary: &Path) {
    if let Some(s) = run.final_summary() {
        let m = s.mean_position();
        match truth {
            Some(t) => println!(
                "posterior mean ({:.2}, {:.2}), error {:.2} m; summary in {}",
                m.x,
                m.y,
                m.distance(t.position()),
                summary.display()
            ),
            None => println!("posterior mean ({:.2}, {:.2}); summary in {}", m.x, m.y, summary.display()),
        }
    }
}

fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let sc = load(&a.common)?;
    let source = truth(&sc)?;
    let seed = sc.filter.seed;
    let frames = simulate_frames(
        &source,
        &sc.detectors,
        &sc.scene,
        sc.filter.model,
        sc.filter.n_frames,
        &mut RandomStream::named(seed, StreamName::Measurement),
    )?;
    let setup = MseSetup {
        config: sc.sir_config(),
        scene: sc.scene.clone(),
        detectors: sc.detectors.clone(),
        frames,
        truth: Some(source),
    };
    let largest = a.n.iter().copied().max().unwrap_or(0);
    let reference_n = a.reference_n.unwrap_or(64 * largest);
    let phi: fn(&Particle) -> f64 = match a.phi {
        PhiArg::X => |p: &Particle| p.x,
        PhiArg::Y => |p: &Particle| p.y,
        PhiArg::Intensity => |p: &Particle| p.intensity,
        PhiArg::One => |_: &Particle| 1.0,
    };
    let report = mse_slope_experiment(&setup, &phi, &a.n, reference_n, a.seeds, seed)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::DegenerateInput(format!("report: {e}")))?;
    println!("{json}");
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("diagnose.json");
        fs::write(&path, &json).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
