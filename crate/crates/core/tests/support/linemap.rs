//! Random batch groups with one marked position per statement, and a
//! compiler double that reports an error at every marker.

use std::sync::Arc;

use autoformal::backends::{BackendError, LeanClient};
use autoformal::syntax::{SyntaxChecker, SyntaxStage};
use autoformal::types::{Diagnostic, FormalStatement, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MARK: &str = "XMARK";

/// Reports `unknown identifier` at each occurrence of the marker.
pub struct MarkerLean;

impl LeanClient for MarkerLean {
    fn execute(&self, code: &str, _: f64) -> Result<Vec<Diagnostic>, BackendError> {
        Ok(code
            .lines()
            .enumerate()
            .filter_map(|(i, line)| {
                let byte = line.find(MARK)?;
                let col = line[..byte].chars().count() as u32;
                let l = i as u32 + 1;
                Some(Diagnostic::error((l, col), (l, col + MARK.len() as u32), "unknown identifier 'XMARK'"))
            })
            .collect())
    }
}

/// A statement of `lines` lines with the marker on line `mark.0`, column `mark.1`.
pub struct Marked {
    pub statement: FormalStatement,
    pub mark: (u32, u32),
}

fn marked(rng: &mut ChaCha8Rng, with_imports: bool) -> Marked {
    let header = if with_imports { 2 } else { 0 };
    let total = rng.gen_range(header + 1..=50);
    let body = total - header;
    let mark_line = rng.gen_range(0..body);
    let indent = " ".repeat(rng.gen_range(2..12));
    let mut lines: Vec<String> = Vec::with_capacity(total);
    if with_imports {
        lines.push("import Mathlib".into());
        lines.push("import Aesop".into());
    }
    for i in 0..body {
        let name = if i == mark_line { MARK.to_string() } else { format!("x{i}") };
        let line = match (i, body) {
            (0, 1) => format!("theorem {name} : True := by sorry"),
            (0, _) => format!("theorem {name} :"),
            (i, b) if i == b - 1 => format!("{indent}{name} = {name} := by sorry"),
            _ => format!("{indent}∀ {name} : ℕ, {name} = {name} →"),
        };
        lines.push(line);
    }
    let mark_text = &lines[header + mark_line];
    let col = mark_text[..mark_text.find(MARK).unwrap()].chars().count() as u32;
    let required = if with_imports { vec!["Mathlib".into(), "Aesop".into()] } else { vec![] };
    Marked {
        statement: FormalStatement::with_imports(lines.join("\n"), required).unwrap(),
        mark: ((header + mark_line + 1) as u32, col),
    }
}

/// 1–20 statements of 1–50 lines sharing one import set.
pub fn random_group(seed: u64) -> Vec<Marked> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_imports = rng.gen_bool(0.5);
    let n = rng.gen_range(1..=20);
    (0..n).map(|_| marked(&mut rng, with_imports)).collect()
}

/// Compiles one group as a single batch and checks that every statement
/// gets exactly its own marker back, in its own coordinates.
pub fn round_trip(seed: u64) -> Result<(), String> {
    let group = random_group(seed);
    let config = RunConfig { batch_size: 20, ..RunConfig::default() };
    let checker = SyntaxChecker::new(Arc::new(MarkerLean), &config)
        .with_nonce(format!("s{seed}"))
        .with_workers(1);
    let statements: Vec<FormalStatement> = group.iter().map(|m| m.statement.clone()).collect();
    let reports = checker.check(&statements);
    if checker.counters().snapshot()["groups_compiled"] != 1 {
        return Err(format!("seed {seed}: expected one compiled group"));
    }
    for (i, (m, r)) in group.iter().zip(&reports).enumerate() {
        if r.stage != SyntaxStage::Batch {
            return Err(format!("seed {seed}: statement {i} reported from {:?}", r.stage));
        }
        let got: Vec<(u32, u32)> = r.errors.iter().map(|d| (d.start_line, d.start_col)).collect();
        if got != vec![m.mark] {
            return Err(format!("seed {seed}: statement {i} expected {:?}, got {got:?}", m.mark));
        }
    }
    Ok(())
}
