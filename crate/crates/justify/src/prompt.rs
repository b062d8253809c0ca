//! Prompt templates. Output depends only on the inputs.

use crate::evidence::EvidenceBundle;
use std::fmt::Write;
use thiserror::Error;
use tkg_core::corpus::{DatasetRecord, PaperRecord};

pub const MAX_WORDS: usize = 180;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("no evidence papers since 2017 for author `{0}`")]
    EmptyEvidence(String),
}

fn require(bundle: &EvidenceBundle) -> Result<(), PromptError> {
    if bundle.is_empty() {
        return Err(PromptError::EmptyEvidence(bundle.author_id.clone()));
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn paper_line(out: &mut String, p: &PaperRecord) {
    let journal = if p.journal.trim().is_empty() { "unknown venue".to_owned() } else { one_line(&p.journal) };
    let _ = writeln!(
        out,
        "- \"{}\" ({journal}, {}; {} citations)",
        one_line(&p.title),
        p.year,
        p.citation_count
    );
}

fn evidence_block(out: &mut String, label: &str, b: &EvidenceBundle) {
    let _ = writeln!(out, "{label}: {} (id {})", one_line(&b.display_name), b.author_id);
    let _ = writeln!(out, "Recent papers:");
    if b.recent_papers.is_empty() {
        let _ = writeln!(out, "- none");
    }
    for p in &b.recent_papers {
        paper_line(out, p);
    }
    let _ = writeln!(out, "Most-cited papers:");
    if b.cited_papers.is_empty() {
        let _ = writeln!(out, "- none");
    }
    for p in &b.cited_papers {
        paper_line(out, p);
    }
}

fn rules(out: &mut String) {
    let _ = writeln!(
        out,
        "Base every claim only on the papers listed above. Do not invent papers, results or affiliations."
    );
    let _ = write!(out, "Answer in at most {MAX_WORDS} words of plain prose.");
}

/// Asks why `target` would be a promising first-time collaborator for `source`.
pub fn build_collaborator_prompt(source: &EvidenceBundle, target: &EvidenceBundle) -> Result<String, PromptError> {
    require(source)?;
    require(target)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Explain why {} would be a promising collaborator for {}. The two have never published together.",
        one_line(&target.display_name),
        one_line(&source.display_name)
    );
    let _ = writeln!(out, "Point out the concrete benefits of working together.\n");
    evidence_block(&mut out, "Researcher", source);
    out.push('\n');
    evidence_block(&mut out, "Suggested collaborator", target);
    out.push('\n');
    rules(&mut out);
    Ok(out)
}

/// Asks why `author` should consider using `dataset`.
pub fn build_dataset_user_prompt(author: &EvidenceBundle, dataset: &DatasetRecord) -> Result<String, PromptError> {
    require(author)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Explain why {} should consider using the dataset \"{}\". They have not used it before.\n",
        one_line(&author.display_name),
        one_line(&dataset.name)
    );
    let _ = writeln!(out, "Dataset: {} (id {})", one_line(&dataset.name), dataset.dataset_id);
    if !dataset.description.trim().is_empty() {
        let _ = writeln!(out, "Description: {}", dataset.description);
    }
    out.push('\n');
    evidence_block(&mut out, "Researcher", author);
    out.push('\n');
    rules(&mut out);
    Ok(out)
}
