//! Implementations of the CLI subcommands.

use crate::io;
use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DVector;
use polyreach::dynamics::{simulate, InputSignal, NonlinearSystem, SystemSpec};
use polyreach::extract::{
    alpha_box_image, extract, falsify, optimize_initial_box, parameterize_point, partition_safe,
    HalfspaceSpec,
};
use polyreach::lp::point_in_zonotope_margin;
use polyreach::reach::{reach, ReachResult, ReachSettings};
use polyreach::{IdGenerator, IntervalVector, PolyZonotope, Zonotope};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub struct CommonOpts {
    pub out: PathBuf,
    pub seed: u64,
    pub verbose: bool,
}

impl CommonOpts {
    fn prepare(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating output directory {}", self.out.display()))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn note(&self, msg: &str) {
        if self.verbose {
            eprintln!("{msg}");
        }
    }
}

#[derive(Serialize)]
struct Timing {
    wall_time_s: f64,
}

/// Reads an initial or input set: a polynomial zonotope, a zonotope, or an
/// interval, recognized by their JSON keys.
fn load_set(path: &Path) -> Result<PolyZonotope> {
    let value: serde_json::Value = io::read_json(path)?;
    if value.get("E").is_some() {
        let pz: PolyZonotope = serde_json::from_value(value)
            .with_context(|| format!("parsing {} as a polynomial zonotope", path.display()))?;
        if pz.num_independent() > 0 {
            let idgen = IdGenerator::starting_after(pz.max_id());
            return Ok(pz.remove_independent(&idgen));
        }
        return Ok(pz);
    }
    let idgen = IdGenerator::new();
    if value.get("c").is_some() {
        let z: Zonotope = serde_json::from_value(value)
            .with_context(|| format!("parsing {} as a zonotope", path.display()))?;
        return Ok(PolyZonotope::from_zonotope(&z, &idgen));
    }
    if value.get("l").is_some() {
        let iv: IntervalVector = serde_json::from_value(value)
            .with_context(|| format!("parsing {} as an interval", path.display()))?;
        return Ok(PolyZonotope::from_interval(&iv, &idgen));
    }
    bail!(
        "{}: unknown set shape; expected keys G/GI/E/id, c/G, or l/u",
        path.display()
    )
}

fn load_input_zonotope(path: &Path) -> Result<Zonotope> {
    let value: serde_json::Value = io::read_json(path)?;
    if value.get("c").is_some() {
        return serde_json::from_value(value)
            .with_context(|| format!("parsing {} as a zonotope", path.display()));
    }
    if value.get("l").is_some() {
        let iv: IntervalVector = serde_json::from_value(value)
            .with_context(|| format!("parsing {} as an interval", path.display()))?;
        return Ok(Zonotope::from_interval(&iv));
    }
    bail!("{}: input set must be a zonotope or an interval", path.display())
}

fn load_system(path: &Path) -> Result<(SystemSpec, NonlinearSystem)> {
    let spec: SystemSpec = io::read_json(path)?;
    let sys = spec
        .build()
        .with_context(|| format!("building the system from {}", path.display()))?;
    Ok((spec, sys))
}

fn load_result(path: &Path) -> Result<ReachResult> {
    let res: ReachResult = io::read_json(path)?;
    res.validate()
        .with_context(|| format!("validating {}", path.display()))?;
    Ok(res)
}

fn stored_sets(res: &ReachResult) -> Vec<(f64, usize, PolyZonotope)> {
    let mut sets: Vec<(f64, usize, PolyZonotope)> = Vec::new();
    for (k, (t, set)) in res.time_points.iter().enumerate() {
        sets.push((*t, k, set.clone()));
    }
    let offset = res.time_points.len();
    for (k, (t0, _, set)) in res.time_intervals.iter().enumerate() {
        sets.push((*t0, offset + k, set.clone()));
    }
    sets
}

fn parse_number_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| anyhow!("bad number `{v}`: {e}"))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// reach
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_reach(
    system_path: &Path,
    x0_path: &Path,
    settings_path: &Path,
    input_set: Option<&Path>,
    samples: Option<usize>,
    common: &CommonOpts,
) -> Result<()> {
    // fail fast: parse and validate every input before computing
    let (system_spec, sys) = load_system(system_path)?;
    let settings: ReachSettings = io::read_json(settings_path)?;
    settings.validate()?;
    let x0 = load_set(x0_path)?;
    let u = match input_set {
        Some(path) => load_input_zonotope(path)?,
        None => Zonotope::zero(sys.input_dim()),
    };
    if sys.input_dim() > 0 && input_set.is_none() {
        bail!("the system has {} inputs; provide --input-set", sys.input_dim());
    }
    common.prepare()?;

    common.note("running reachability analysis");
    let t0 = Instant::now();
    let result = reach(&sys, &x0, &u, &settings)?;
    let wall = t0.elapsed().as_secs_f64();
    common.note(&format!("finished in {wall:.3} s"));

    io::write_json(&common.path("result.json"), &result)?;
    io::write_json(&common.path("system.json"), &system_spec)?;
    io::write_json(&common.path("timing.json"), &Timing { wall_time_s: wall })?;
    let sets = stored_sets(&result);
    io::write_polygons_csv(&common.path("reach2d.csv"), &sets)?;
    if let Some(n) = samples {
        io::write_samples_csv(&common.path("samples.csv"), &sets, n, common.seed)?;
    }
    io::write_json(
        &common.path("manifest.json"),
        &json!({
            "command": "reach",
            "inputs": {
                "system": system_path.display().to_string(),
                "x0": x0_path.display().to_string(),
                "settings": settings_path.display().to_string(),
                "input_set": input_set.map(|p| p.display().to_string()),
            },
            "settings": settings,
            "out": common.out.display().to_string(),
            "seed": common.seed,
        }),
    )?;
    println!(
        "reach: {} steps, final set with {} dependent / {} independent generators ({wall:.3} s)",
        result.time_intervals.len(),
        result.final_set().num_dependent(),
        result.final_set().num_independent(),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

pub fn cmd_extract(
    result_path: &Path,
    alpha_arg: Option<&str>,
    point_arg: Option<&str>,
    common: &CommonOpts,
) -> Result<()> {
    let res = load_result(result_path)?;
    let alpha: Vec<f64> = match (alpha_arg, point_arg) {
        (Some(a), None) => parse_number_list(a)?,
        (None, Some(p)) => {
            let coords = parse_number_list(p)?;
            let alpha = parameterize_point(res.initial_set(), &DVector::from_vec(coords))?;
            let printed: Vec<String> = alpha.iter().map(|v| format!("{v:.6}")).collect();
            println!("point parameterized by alpha = [{}]", printed.join(", "));
            alpha
        }
        _ => bail!("provide exactly one of --alpha or --point"),
    };
    common.prepare()?;

    let t0 = Instant::now();
    let sets = extract(&res, &alpha)?;
    let wall = t0.elapsed().as_secs_f64();

    let stored_wall: Option<f64> = result_path
        .parent()
        .map(|dir| dir.join("timing.json"))
        .filter(|p| p.exists())
        .and_then(|p| io::read_json::<serde_json::Value>(&p).ok())
        .and_then(|v| v.get("wall_time_s").and_then(|x| x.as_f64()));

    let mut listed: Vec<(f64, usize, PolyZonotope)> = Vec::new();
    for (k, (t, set)) in sets.time_points.iter().enumerate() {
        listed.push((*t, k, set.clone()));
    }
    let offset = sets.time_points.len();
    for (k, (t0s, _, set)) in sets.time_intervals.iter().enumerate() {
        listed.push((*t0s, offset + k, set.clone()));
    }
    io::write_polygons_csv(&common.path("extract2d.csv"), &listed)?;
    io::write_json(
        &common.path("extract.json"),
        &json!({
            "alpha": alpha,
            "time_points": sets.time_points.iter()
                .map(|(t, s)| json!({"t": t, "set": s})).collect::<Vec<_>>(),
            "time_intervals": sets.time_intervals.iter()
                .map(|(t0, t1, s)| json!({"t0": t0, "t1": t1, "set": s})).collect::<Vec<_>>(),
        }),
    )?;
    io::write_json(
        &common.path("manifest.json"),
        &json!({
            "command": "extract",
            "inputs": { "result": result_path.display().to_string() },
            "alpha": alpha,
            "out": common.out.display().to_string(),
            "seed": common.seed,
        }),
    )?;
    match stored_wall {
        Some(stored) => println!(
            "extraction wall time: {wall:.6} s; stored reach wall time: {stored:.3} s"
        ),
        None => println!("extraction wall time: {wall:.6} s; stored reach wall time: unknown"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// falsify
// ---------------------------------------------------------------------------

pub fn cmd_falsify(
    result_path: &Path,
    spec_str: &str,
    system_path: Option<&Path>,
    common: &CommonOpts,
) -> Result<()> {
    let res = load_result(result_path)?;
    let spec = HalfspaceSpec::parse(spec_str)?;
    let sys = resolve_system(result_path, system_path)?;
    if sys.input_dim() > 0 {
        bail!("falsification supports autonomous systems only");
    }
    common.prepare()?;

    let t0 = Instant::now();
    let outcome = falsify(&res, &sys, &spec, common.seed)?;
    let wall = t0.elapsed().as_secs_f64();

    let endpoint = outcome.witness.endpoint().clone();
    let violation = spec.normal().dot(&endpoint) - spec.b;
    io::write_trajectory_csv(&common.path("witness.csv"), &outcome.witness)?;
    io::write_json(
        &common.path("verdict.json"),
        &json!({
            "verified": outcome.verified,
            "alpha_star": outcome.alpha_star,
            "x0_star": outcome.x0_star.as_slice(),
            "objective": outcome.objective,
            "endpoint": endpoint.as_slice(),
            "violation": violation,
            "spec": spec,
        }),
    )?;
    io::write_json(
        &common.path("manifest.json"),
        &json!({
            "command": "falsify",
            "inputs": { "result": result_path.display().to_string() },
            "spec": spec_str,
            "out": common.out.display().to_string(),
            "seed": common.seed,
        }),
    )?;
    println!(
        "falsify: verified = {}, worst-case objective {:.6}, endpoint violation {violation:.6} ({wall:.3} s)",
        outcome.verified, outcome.objective
    );
    Ok(())
}

fn resolve_system(result_path: &Path, system_path: Option<&Path>) -> Result<NonlinearSystem> {
    let path = match system_path {
        Some(p) => p.to_path_buf(),
        None => {
            let sibling = result_path
                .parent()
                .map(|d| d.join("system.json"))
                .filter(|p| p.exists());
            sibling.ok_or_else(|| {
                anyhow!("no system.json next to the result; pass --system explicitly")
            })?
        }
    };
    Ok(load_system(&path)?.1)
}

// ---------------------------------------------------------------------------
// partition
// ---------------------------------------------------------------------------

pub fn cmd_partition(
    result_path: &Path,
    spec_str: &str,
    depth: usize,
    common: &CommonOpts,
) -> Result<()> {
    let res = load_result(result_path)?;
    let spec = HalfspaceSpec::parse(spec_str)?;
    common.prepare()?;

    let (safe, unknown) = partition_safe(&res, &spec, depth)?;
    let x0 = res.initial_set();
    let image = |b: &polyreach::extract::AlphaBox| alpha_box_image(x0, b).ok();
    let safe_images: Vec<_> = safe.iter().map(image).collect();
    let unknown_images: Vec<_> = unknown.iter().map(image).collect();
    io::write_json(
        &common.path("partition.json"),
        &json!({
            "depth": depth,
            "spec": spec,
            "safe": safe,
            "unknown": unknown,
            "safe_images": safe_images,
            "unknown_images": unknown_images,
        }),
    )?;
    io::write_json(
        &common.path("manifest.json"),
        &json!({
            "command": "partition",
            "inputs": { "result": result_path.display().to_string() },
            "spec": spec_str,
            "depth": depth,
            "out": common.out.display().to_string(),
            "seed": common.seed,
        }),
    )?;
    let vol_safe: f64 = safe.iter().map(|b| b.volume()).sum();
    println!(
        "partition: {} safe boxes (volume {vol_safe:.4}), {} unknown boxes",
        safe.len(),
        unknown.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

pub fn cmd_optimize(
    result_path: &Path,
    spec_str: &str,
    tol: f64,
    common: &CommonOpts,
) -> Result<()> {
    let res = load_result(result_path)?;
    let spec = HalfspaceSpec::parse(spec_str)?;
    common.prepare()?;

    let best = optimize_initial_box(&res, &spec, tol)?;
    let image = alpha_box_image(res.initial_set(), &best).ok();
    io::write_json(
        &common.path("optimize.json"),
        &json!({
            "spec": spec,
            "box": best,
            "volume": best.volume(),
            "feasible": !best.is_empty(),
            "image": image,
        }),
    )?;
    io::write_json(
        &common.path("manifest.json"),
        &json!({
            "command": "optimize",
            "inputs": { "result": result_path.display().to_string() },
            "spec": spec_str,
            "tol": tol,
            "out": common.out.display().to_string(),
            "seed": common.seed,
        }),
    )?;
    println!(
        "optimize: certified box with volume {:.6} (empty = {})",
        best.volume(),
        best.is_empty()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

pub struct CheckOutcome {
    pub all_pass: bool,
}

pub fn cmd_check(
    system_path: &Path,
    result_path: &Path,
    samples: usize,
    common: &CommonOpts,
) -> Result<CheckOutcome> {
    let (_, sys) = load_system(system_path)?;
    if sys.input_dim() > 0 {
        bail!("check supports autonomous systems only");
    }
    let res = load_result(result_path)?;
    common.prepare()?;

    if samples == 0 {
        eprintln!("warning: 0 samples requested; the check passes vacuously");
        io::write_json(
            &common.path("check.json"),
            &json!({"samples": [], "all_pass": true, "vacuous": true}),
        )?;
        println!("check: vacuous pass (0 samples)");
        return Ok(CheckOutcome { all_pass: true });
    }

    let x0 = res.initial_set().clone();
    let p = res.x0_ids.len();
    let r = res.settings.r;
    let dt = r / 5.0;
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(common.seed);

    let mut reports = Vec::with_capacity(samples);
    let mut failures: Vec<Vec<f64>> = Vec::new();
    for i in 0..samples {
        let alpha: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let p0 = x0.point_at(&alpha, &[]);
        let traj = simulate(&sys, &p0, &InputSignal::none(), res.settings.tf, dt)?;
        let sets = extract(&res, &alpha)?;
        let mut min_margin = f64::INFINITY;
        let mut pass = true;

        for ((t, sub), (_, full)) in sets.time_points.iter().zip(&res.time_points) {
            let idx = ((t / dt).round() as usize).min(traj.states.len() - 1);
            let state = &traj.states[idx];
            for zono in [sub.enclose_zonotope(), full.enclose_zonotope()] {
                match point_in_zonotope_margin(&zono, state) {
                    Some(m) => min_margin = min_margin.min(m),
                    None => {
                        pass = false;
                        min_margin = f64::NEG_INFINITY;
                    }
                }
            }
        }
        for (t0, _, set) in &sets.time_intervals {
            let idx = (((t0 + 0.5 * r) / dt).round() as usize).min(traj.states.len() - 1);
            let state = &traj.states[idx];
            match point_in_zonotope_margin(&set.enclose_zonotope(), state) {
                Some(m) => min_margin = min_margin.min(m),
                None => {
                    pass = false;
                    min_margin = f64::NEG_INFINITY;
                }
            }
        }
        if !pass {
            failures.push(alpha.clone());
        }
        common.note(&format!("sample {i}: pass = {pass}, margin = {min_margin:.3e}"));
        reports.push(json!({"alpha": alpha, "margin": min_margin, "pass": pass}));
    }
    let all_pass = failures.is_empty();
    io::write_json(
        &common.path("check.json"),
        &json!({"samples": reports, "all_pass": all_pass, "vacuous": false}),
    )?;
    io::write_json(
        &common.path("manifest.json"),
        &json!({
            "command": "check",
            "inputs": {
                "system": system_path.display().to_string(),
                "result": result_path.display().to_string(),
            },
            "samples": samples,
            "out": common.out.display().to_string(),
            "seed": common.seed,
        }),
    )?;
    if all_pass {
        println!("check: {samples}/{samples} samples contained at every stored set");
    } else {
        eprintln!("check: containment failed for {} samples:", failures.len());
        for alpha in &failures {
            eprintln!("  alpha = {alpha:?}");
        }
    }
    Ok(CheckOutcome { all_pass })
}
