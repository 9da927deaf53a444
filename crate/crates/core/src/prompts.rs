//! Shipped prompt templates and placeholder substitution.

pub const CONSISTENCY_CHECK: &str = include_str!("../prompts/consistency_check.txt");
pub const PERTURBATION: &str = include_str!("../prompts/perturbation.txt");
pub const SYSTEM_INFERENCE: &str = include_str!("../prompts/system_inference.txt");
pub const SYSTEM_COLD_START: &str = include_str!("../prompts/system_cold_start.txt");

/// Replaces each `{name}` whose name is in `values` in a single pass, so
/// substituted text is never re-scanned. Other braces are left alone.
pub fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
