//! Few-shot prompt layouts for exemplar generation and code summarization.

use serde::Serialize;

use crate::corpus::Language;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    /// Description in, code out.
    Generate,
    /// Code in, one-sentence purpose out.
    Summarize,
}

/// One in-context example: a natural-language description and its code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Shot {
    pub description: String,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub language: Language,
    pub instruction: String,
    pub shots: Vec<Shot>,
    /// Description for `Generate`, code for `Summarize`.
    pub target: String,
}

fn count_word(n: usize) -> String {
    const WORDS: [&str; 11] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    WORDS.get(n).map(|w| w.to_string()).unwrap_or_else(|| n.to_string())
}

fn ordinal_word(n: usize) -> String {
    const WORDS: [&str; 12] = [
        "zeroth", "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth",
        "ninth", "tenth", "eleventh",
    ];
    if let Some(w) = WORDS.get(n) {
        return w.to_string();
    }
    let suffix = match (n % 10, n % 100) {
        (1, r) if r != 11 => "st",
        (2, r) if r != 12 => "nd",
        (3, r) if r != 13 => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn examples_sentence(k: usize) -> String {
    match k {
        0 => String::new(),
        1 => " I will show you one example first.".to_string(),
        k => format!(" I will show you {} examples first.", count_word(k)),
    }
}

pub fn gen_instruction(language: Language, k: usize) -> String {
    format!(
        "Please generate a {language} code snippet according to the last given description. \
         Only output the code snippets. Do not explain the code.{}",
        examples_sentence(k)
    )
}

pub fn sum_instruction(language: Language, k: usize) -> String {
    format!(
        "What is the main purpose of the {} {language} code snippet? \
         Summarize in one sentence and be concise.{}",
        ordinal_word(k + 1),
        examples_sentence(k)
    )
}

/// Prompt asking for code matching `query`, preceded by description/code shots.
pub fn build_gen_prompt(query: &str, shots: &[Shot], language: Language) -> Result<PromptTemplate> {
    if query.trim().is_empty() {
        return Err(Error::invalid("generation target description is empty"));
    }
    Ok(PromptTemplate {
        kind: PromptKind::Generate,
        language,
        instruction: gen_instruction(language, shots.len()),
        shots: shots.to_vec(),
        target: query.trim().to_string(),
    })
}

/// Prompt asking for the purpose of `code`, preceded by code/purpose shots.
pub fn build_sum_prompt(code: &str, shots: &[Shot], language: Language) -> Result<PromptTemplate> {
    if code.trim().is_empty() {
        return Err(Error::invalid("code to summarize is empty"));
    }
    Ok(PromptTemplate {
        kind: PromptKind::Summarize,
        language,
        instruction: sum_instruction(language, shots.len()),
        shots: shots.to_vec(),
        target: code.trim_end().to_string(),
    })
}

impl PromptTemplate {
    /// The exact text sent to the model as the user message.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.instruction);
        out.push_str("\n\n");
        match self.kind {
            PromptKind::Generate => {
                for shot in &self.shots {
                    out.push_str("Description: ");
                    out.push_str(shot.description.trim());
                    out.push_str("\nCode:\n");
                    out.push_str(shot.code.trim_end());
                    out.push_str("\n\n");
                }
                out.push_str("Description: ");
                out.push_str(&self.target);
                out.push_str("\nCode:\n");
            }
            PromptKind::Summarize => {
                for shot in &self.shots {
                    out.push_str("Code:\n");
                    out.push_str(shot.code.trim_end());
                    out.push_str("\nPurpose: ");
                    out.push_str(shot.description.trim());
                    out.push_str("\n\n");
                }
                out.push_str("Code:\n");
                out.push_str(&self.target);
                out.push_str("\nPurpose:");
            }
        }
        out
    }
}
