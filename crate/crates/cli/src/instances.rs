//! gen / cot-run: decision-problem instance batches as JSON lines, and
//! greedy chain-of-thought decoding from a saved model description.

use std::fs;
use std::path::Path;

use hopcirc_core::cot::{cot_generate, run_word_problem, CotDesc, CotError};
use hopcirc_core::fp::FpFlags;
use hopcirc_core::problems::{self, ProblemInstance};

use crate::AppError;

pub fn gen(
    family: &str,
    count: usize,
    size: usize,
    seed: u64,
    colored: bool,
    out: Option<&Path>,
) -> Result<(), AppError> {
    if colored && family != "tree_iso" {
        return Err(AppError::usage("--colored only applies to tree_iso"));
    }
    let mut lines = String::new();
    for i in 0..count {
        // Alternate the ground-truth label so batches are balanced;
        // connectivity draws its own query and balances itself.
        let want_true = i % 2 == 0;
        let inst_seed = seed + i as u64;
        let inst = match family {
            "connectivity" => problems::gen_connectivity(size, inst_seed),
            "tree_iso" => problems::gen_tree_pair(size, want_true, colored, inst_seed),
            "s5_word" => problems::gen_s5_word(size, want_true, inst_seed),
            other => {
                return Err(AppError::usage(format!(
                    "unknown family {other:?} (expected connectivity, tree_iso, or s5_word)"
                )))
            }
        }
        .map_err(|e| AppError::usage(format!("cannot generate instance {i}: {e}")))?;
        lines.push_str(&serde_json::to_string(&inst).expect("instance serializes"));
        lines.push('\n');
    }
    match out {
        Some(path) => {
            fs::write(path, lines)?;
            println!("wrote {count} {family} instance(s) -> {}", path.display());
        }
        None => print!("{lines}"),
    }
    Ok(())
}

/// Malformed inputs and budget violations are the caller's fault; model
/// and arithmetic failures are the run's.
fn map_cot(e: CotError) -> AppError {
    match e {
        CotError::UnknownToken(_)
        | CotError::LengthBudget { .. }
        | CotError::ZeroSteps
        | CotError::WrongInstanceKind(_)
        | CotError::Invalid(_) => AppError::usage(format!("{e}")),
        CotError::Model(_) | CotError::Fp(_) => AppError::failure(format!("{e}")),
    }
}

pub fn cot_run(
    params_path: &Path,
    instance: Option<&Path>,
    prompt: Option<&str>,
    steps: usize,
) -> Result<(), AppError> {
    let text = fs::read_to_string(params_path)
        .map_err(|e| AppError::usage(format!("cannot read {}: {e}", params_path.display())))?;
    let desc = CotDesc::from_json(&text)
        .map_err(|e| AppError::usage(format!("bad parameters {}: {e}", params_path.display())))?;
    let params = desc.to_params().map_err(map_cot)?;
    let mut flags = FpFlags::default();
    match (instance, prompt) {
        (Some(path), _) => {
            let itext = fs::read_to_string(path)
                .map_err(|e| AppError::usage(format!("cannot read {}: {e}", path.display())))?;
            let inst: ProblemInstance = serde_json::from_str(&itext)
                .map_err(|e| AppError::usage(format!("bad instance {}: {e}", path.display())))?;
            let outcome = run_word_problem(&inst, &params, steps, &mut flags).map_err(map_cot)?;
            println!("prompt:    {}", inst.tokens.join(" "));
            println!("generated: {}", outcome.trace.join(" "));
            println!(
                "answer: {} (instance label: {})",
                outcome.answer.as_str(),
                if inst.label { "yes" } else { "no" }
            );
        }
        (None, Some(ptext)) => {
            let tokens: Vec<String> = ptext.split_whitespace().map(str::to_string).collect();
            if tokens.is_empty() {
                return Err(AppError::usage("the prompt has no tokens"));
            }
            let out = cot_generate(&params, &tokens, steps, &mut flags).map_err(map_cot)?;
            println!("prompt:    {}", tokens.join(" "));
            println!("generated: {}", out.generated.join(" "));
            println!("forward passes: {}", out.forward_passes);
        }
        (None, None) => {
            return Err(AppError::usage(
                "pass --instance <file> or --prompt \"tok tok ...\"",
            ))
        }
    }
    Ok(())
}
