//! compile / verify / depth: lowering to netlists, replaying netlists
//! against the reference semantics, and checking measured depth against
//! the closed-form formulas.

use std::fs;
use std::path::{Path, PathBuf};

use hopcirc_core::circuit::Circuit;
use hopcirc_core::encoding;
use hopcirc_core::fp::FpFlags;
use hopcirc_core::linalg::FpMatrix;
use hopcirc_core::lower::{
    random_network, random_positive_matrix, random_signed_matrix, LowerConfig, NetworkDesc,
    ResolvedNetwork,
};
use hopcirc_core::rng::SplitMix64;
use serde_json::{json, Value};

use crate::reports;
use crate::{AppError, ConstructArgs};

const KINDS: [&str; 8] = [
    "matmul",
    "attn",
    "hop_layer",
    "fnn",
    "mhn",
    "kattn",
    "khop",
    "khn",
];

/// Build the network description this invocation asked for: either load
/// the `--desc` file or generate a seeded random network for
/// `--construct`. Returns the description, the directory matrix paths
/// resolve against, and the config block for reports.
fn build_desc(args: &ConstructArgs) -> Result<(NetworkDesc, PathBuf, Value), AppError> {
    if let Some(path) = &args.desc {
        let text = fs::read_to_string(path)
            .map_err(|e| AppError::usage(format!("cannot read {}: {e}", path.display())))?;
        let desc = NetworkDesc::from_json(&text)
            .map_err(|e| AppError::usage(format!("bad description {}: {e}", path.display())))?;
        let base = path
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        let config = json!({ "desc": path.display().to_string() });
        Ok((desc, base, config))
    } else {
        let kind = args
            .construct
            .as_deref()
            .ok_or_else(|| AppError::usage("pass --construct <tag> or --desc <file>"))?;
        if !KINDS.contains(&kind) {
            return Err(AppError::usage(format!(
                "unknown construct {kind:?} (expected one of {})",
                KINDS.join(", ")
            )));
        }
        let desc = random_network(kind, args.p, args.n, args.d, args.m, args.seed)
            .map_err(|e| AppError::usage(format!("cannot generate network: {e}")))?;
        let config = json!({
            "construct": kind,
            "n": args.n,
            "d": args.d,
            "m": args.m,
            "p": args.p,
            "seed": args.seed,
        });
        Ok((desc, base_dir(), config))
    }
}

fn base_dir() -> PathBuf {
    PathBuf::from(".")
}

fn resolve(desc: &NetworkDesc, base: &Path) -> Result<ResolvedNetwork, AppError> {
    desc.resolve(base)
        .map_err(|e| AppError::usage(format!("cannot resolve description: {e}")))
}

/// Depth facts shared by compile and depth: the measured expression, the
/// formula verdict, and (when the construct has one) the stated collapsed
/// form that the emitted chain is known to exceed.
fn depth_body(
    net: &ResolvedNetwork,
    low: &hopcirc_core::lower::Lowered,
) -> Result<(Value, &'static str), AppError> {
    let report = low
        .circuit
        .measure()
        .map_err(|vs| AppError::failure(format!("compiled circuit is not well-formed: {vs:?}")))?;
    let formula = net.depth_formula();
    let verdict = match &formula {
        Some(f) if *f == report.depth => "PASS",
        Some(_) => "FAIL",
        None => "N/A",
    };
    let mut body = json!({
        "construct": net.construct_name(),
        "p": net.precision(),
        "input_shapes": net.input_shapes(),
        "output_shape": low.output_shape,
        "size": report.size,
        "concrete_depth": report.concrete_depth,
        "measured_depth": report.depth.to_string(),
        "formula": formula.as_ref().map(|f| f.to_string()),
        "formula_verdict": verdict,
    });
    if let Some(stated) = net.depth_formula_stated() {
        let obj = body.as_object_mut().unwrap();
        obj.insert("stated_formula".into(), json!(stated.to_string()));
        obj.insert(
            "stated_matches_measured".into(),
            json!(stated == report.depth),
        );
    }
    Ok((body, verdict))
}

fn print_depth_line(body: &Value, verdict: &str) {
    println!(
        "construct {} p={}: size {}, depth {}",
        body["construct"].as_str().unwrap(),
        body["p"],
        body["size"],
        body["measured_depth"].as_str().unwrap(),
    );
    match body["formula"].as_str() {
        Some(f) => println!("formula {f}: {verdict}"),
        None => println!("formula: none for this normalization ({verdict})"),
    }
    if let Some(stated) = body["stated_formula"].as_str() {
        println!(
            "stated form {stated}: emitted chain keeps the weight-only products, so the measured depth is larger"
        );
    }
}

pub fn compile(
    args: &ConstructArgs,
    out: &Path,
    desc_out: Option<PathBuf>,
    report_path: Option<PathBuf>,
) -> Result<(), AppError> {
    let (desc, base, config) = build_desc(args)?;
    let net = resolve(&desc, &base)?;
    let low = net.compile(&LowerConfig::from_env());
    let (body, verdict) = depth_body(&net, &low)?;

    fs::write(out, low.circuit.to_netlist())?;
    let desc_path =
        desc_out.unwrap_or_else(|| PathBuf::from(format!("{}.desc.json", out.display())));
    fs::write(&desc_path, NetworkDesc::inlined(&net).to_json())?;
    let report_path =
        report_path.unwrap_or_else(|| PathBuf::from(format!("{}.report.json", out.display())));
    reports::write_json(&report_path, &reports::wrap(config, body.clone()))?;

    print_depth_line(&body, verdict);
    println!("netlist -> {}", out.display());
    println!("desc    -> {}", desc_path.display());
    println!("report  -> {}", report_path.display());
    if verdict == "FAIL" {
        return Err(AppError::failure(format!(
            "measured depth {} does not match the formula {}",
            body["measured_depth"].as_str().unwrap(),
            body["formula"].as_str().unwrap_or("-"),
        )));
    }
    Ok(())
}

pub fn depth(args: &ConstructArgs, report_path: Option<PathBuf>) -> Result<(), AppError> {
    let (desc, base, config) = build_desc(args)?;
    let net = resolve(&desc, &base)?;
    let low = net.compile(&LowerConfig::from_env());
    let (body, verdict) = depth_body(&net, &low)?;
    if let Some(path) = report_path {
        reports::write_json(&path, &reports::wrap(config, body.clone()))?;
        println!("report  -> {}", path.display());
    }
    print_depth_line(&body, verdict);
    if verdict == "FAIL" {
        return Err(AppError::failure(format!(
            "measured depth {} does not match the formula {}",
            body["measured_depth"].as_str().unwrap(),
            body["formula"].as_str().unwrap_or("-"),
        )));
    }
    Ok(())
}

/// Load the fixture matrices named by `--input`, insisting they match the
/// expected shapes and precision.
fn load_fixtures(
    paths: &[PathBuf],
    shapes: &[(usize, usize)],
    p: u32,
) -> Result<Vec<FpMatrix>, AppError> {
    if paths.len() != shapes.len() {
        return Err(AppError::usage(format!(
            "expected {} --input fixture(s), got {}",
            shapes.len(),
            paths.len()
        )));
    }
    let mut out = Vec::new();
    for (path, &(r, c)) in paths.iter().zip(shapes) {
        let text = fs::read_to_string(path)
            .map_err(|e| AppError::usage(format!("cannot read {}: {e}", path.display())))?;
        let m = FpMatrix::parse_fixture(&text)
            .map_err(|e| AppError::usage(format!("bad fixture {}: {e}", path.display())))?;
        if (m.rows(), m.cols()) != (r, c) {
            return Err(AppError::usage(format!(
                "fixture {} has shape {}x{}, expected {r}x{c}",
                path.display(),
                m.rows(),
                m.cols()
            )));
        }
        if m.precision() != p {
            return Err(AppError::usage(format!(
                "fixture {} has precision {}, expected {p}",
                path.display(),
                m.precision()
            )));
        }
        out.push(m);
    }
    Ok(out)
}

/// One verification trial: reference semantics vs. the loaded circuit,
/// entry by entry. Returns the divergence message if any.
fn run_trial(
    net: &ResolvedNetwork,
    circuit: &Circuit,
    ms: &[FpMatrix],
    t: usize,
) -> Result<(), AppError> {
    let mut flags = FpFlags::default();
    let want = net
        .reference_eval(ms, &mut flags)
        .map_err(|e| AppError::failure(format!("reference evaluation rejected trial {t}: {e}")))?;
    let mut bits = Vec::new();
    for m in ms {
        bits.extend(encoding::encode_all(m.entries()));
    }
    let out_bits = circuit
        .evaluate(&bits)
        .map_err(|e| AppError::failure(format!("circuit evaluation failed on trial {t}: {e}")))?;
    let got = encoding::decode_all(&out_bits, circuit.precision()).map_err(|e| {
        AppError::failure(format!(
            "circuit produced an invalid output encoding on trial {t}: {e}"
        ))
    })?;
    let want_entries = want.entries();
    if got.len() != want_entries.len() {
        return Err(AppError::failure(format!(
            "circuit produced {} output value(s) on trial {t}, reference has {}",
            got.len(),
            want_entries.len()
        )));
    }
    for (idx, (w, g)) in want_entries.iter().zip(&got).enumerate() {
        if w != g {
            let (i, j) = (idx / want.cols(), idx % want.cols());
            return Err(AppError::failure(format!(
                "output diverges on trial {t} at entry ({i},{j}): reference {w}, circuit {g}"
            )));
        }
    }
    Ok(())
}

fn verify_inner(
    netlist: &Path,
    desc_path: &Path,
    random: usize,
    seed: u64,
    inputs: &[PathBuf],
) -> Result<Value, AppError> {
    let text = fs::read_to_string(netlist)
        .map_err(|e| AppError::usage(format!("cannot read {}: {e}", netlist.display())))?;
    let circuit = Circuit::from_netlist_validated(&text)
        .map_err(|e| AppError::failure(format!("netlist rejected: {e}")))?;

    let desc_text = fs::read_to_string(desc_path)
        .map_err(|e| AppError::usage(format!("cannot read {}: {e}", desc_path.display())))?;
    let desc = NetworkDesc::from_json(&desc_text)
        .map_err(|e| AppError::usage(format!("bad description {}: {e}", desc_path.display())))?;
    let base = desc_path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let net = resolve(&desc, &base)?;

    if circuit.precision() != net.precision() {
        return Err(AppError::usage(format!(
            "netlist precision p={} does not match the description's p={}",
            circuit.precision(),
            net.precision()
        )));
    }
    let shapes = net.input_shapes();

    let trials: Vec<Vec<FpMatrix>> = if !inputs.is_empty() {
        vec![load_fixtures(inputs, &shapes, net.precision())?]
    } else {
        // The attention constructs divide by row sums of exponentials, so
        // their state inputs stay positive like the generated weights;
        // matmul and fnn take signed inputs.
        let signed = matches!(net.construct_name(), "matmul" | "fnn");
        let mut rng = SplitMix64::new(seed);
        (0..random)
            .map(|_| {
                shapes
                    .iter()
                    .map(|&(r, c)| {
                        if signed {
                            random_signed_matrix(&mut rng, r, c, net.precision())
                        } else {
                            random_positive_matrix(&mut rng, r, c, net.precision())
                        }
                    })
                    .collect()
            })
            .collect()
    };

    for (t, ms) in trials.iter().enumerate() {
        run_trial(&net, &circuit, ms, t)?;
    }
    Ok(json!({
        "verdict": "PASS",
        "construct": net.construct_name(),
        "p": net.precision(),
        "trials": trials.len(),
        "tolerance": "bit-exact",
    }))
}

pub fn verify(
    netlist: &Path,
    desc_path: &Path,
    random: usize,
    seed: u64,
    inputs: &[PathBuf],
    report_path: Option<PathBuf>,
) -> Result<(), AppError> {
    let config = json!({
        "netlist": netlist.display().to_string(),
        "desc": desc_path.display().to_string(),
        "random": random,
        "seed": seed,
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    match verify_inner(netlist, desc_path, random, seed, inputs) {
        Ok(body) => {
            let trials = body["trials"].clone();
            if let Some(path) = report_path {
                reports::write_json(&path, &reports::wrap(config, body))?;
                println!("report  -> {}", path.display());
            }
            println!("PASS: circuit matches the reference on {trials} trial(s)");
            Ok(())
        }
        Err(AppError::Failure(msg)) => {
            if let Some(path) = report_path {
                let body = json!({ "verdict": "FAIL", "error": msg });
                reports::write_json(&path, &reports::wrap(config, body))?;
                println!("report  -> {}", path.display());
            }
            println!("FAIL");
            Err(AppError::Failure(msg))
        }
        Err(e) => Err(e),
    }
}
