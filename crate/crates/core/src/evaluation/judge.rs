//! Judges produce the statement decompositions, support verdicts, relevance
//! verdicts and regenerated questions the answer metrics are built from.

use std::collections::HashSet;
use std::sync::Arc;

use crate::chunking::{is_content_token, split_sentences, tokenize};
use crate::generation::{generate_answer, GenerationError, Generator, Prompt};

pub const DEFAULT_TAU: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("judge failure: {0}")]
    Failure(String),
    #[error(transparent)]
    Generation(#[from] GenerationError),
}

pub trait Judge: Send + Sync {
    fn name(&self) -> &str;
    /// Splits an answer into standalone statements (at least one for a non-empty answer).
    fn decompose(&self, answer: &str) -> Result<Vec<String>, JudgeError>;
    /// Whether `statement` is supported by `context`.
    fn supported(&self, statement: &str, context: &str) -> Result<bool, JudgeError>;
    /// Whether a retrieved chunk is relevant to the reference context.
    fn relevant(&self, chunk: &str, reference: &str) -> Result<bool, JudgeError>;
    /// Exactly `n` questions that `answer` would answer.
    fn generate_questions(&self, answer: &str, n: usize) -> Result<Vec<String>, JudgeError>;
}

fn content_set(text: &str) -> HashSet<String> {
    tokenize(text).into_iter().filter(|t| is_content_token(t)).collect()
}

fn trimmed_sentences(text: &str) -> Vec<String> {
    split_sentences(text)
        .into_iter()
        .map(|s| s.text.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Fraction of `needle`'s distinct content tokens found in `haystack`.
/// Text without content tokens is fully contained.
pub fn containment(needle: &str, haystack: &str) -> f64 {
    let wanted = content_set(needle);
    if wanted.is_empty() {
        return 1.0;
    }
    let have: HashSet<String> = tokenize(haystack).into_iter().collect();
    wanted.iter().filter(|t| have.contains(*t)).count() as f64 / wanted.len() as f64
}

/// Token-containment judge for offline evaluation.
///
/// Statements are the answer's sentences. A statement is supported when at
/// least `tau` of its distinct content tokens occur in the context; a chunk
/// is relevant when it holds at least `tau` of the reference's content
/// tokens. Regenerated questions are the answer's first `n` sentences,
/// repeated cyclically when there are fewer.
#[derive(Debug, Clone)]
pub struct ContainmentJudge {
    tau: f64,
}

impl ContainmentJudge {
    pub fn new(tau: f64) -> Self {
        Self { tau }
    }
}

impl Default for ContainmentJudge {
    fn default() -> Self {
        Self::new(DEFAULT_TAU)
    }
}

impl Judge for ContainmentJudge {
    fn name(&self) -> &str {
        "containment"
    }

    fn decompose(&self, answer: &str) -> Result<Vec<String>, JudgeError> {
        let sentences = trimmed_sentences(answer);
        if sentences.is_empty() {
            return Err(JudgeError::Failure("cannot decompose an empty answer".into()));
        }
        Ok(sentences)
    }

    fn supported(&self, statement: &str, context: &str) -> Result<bool, JudgeError> {
        Ok(containment(statement, context) >= self.tau)
    }

    fn relevant(&self, chunk: &str, reference: &str) -> Result<bool, JudgeError> {
        Ok(containment(reference, chunk) >= self.tau)
    }

    fn generate_questions(&self, answer: &str, n: usize) -> Result<Vec<String>, JudgeError> {
        let sentences = trimmed_sentences(answer);
        if sentences.is_empty() {
            return Err(JudgeError::Failure("cannot generate questions from an empty answer".into()));
        }
        Ok(sentences.into_iter().cycle().take(n).collect())
    }
}

const DECOMPOSE_TEMPLATE: &str = "\
Break the answer below into short standalone factual statements.
Write one statement per line, with no numbering and no other text.

Answer:
{answer}

Statements:";

const SUPPORT_TEMPLATE: &str = "\
Context:
{context}

Statement: {statement}

Can the statement be directly inferred from the context? Reply with a single word: Yes or No.";

const RELEVANCE_TEMPLATE: &str = "\
Reference context:
{reference}

Retrieved passage:
{chunk}

Does the retrieved passage contain information from the reference context that is needed to answer the question? Reply with a single word: Yes or No.";

const QUESTIONS_TEMPLATE: &str = "\
Write {n} different questions that the answer below directly answers.
Write one question per line, with no numbering and no other text.

Answer:
{answer}

Questions:";

/// Drops a leading "-", "*", "•", "1." or "1)" list marker.
fn strip_list_marker(line: &str) -> &str {
    let rest = line.trim_start_matches(['-', '*', '•']);
    let digits = rest.len() - rest.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    let rest = match rest[digits..].chars().next() {
        Some('.' | ')') if digits > 0 => &rest[digits + 1..],
        _ => rest,
    };
    rest.trim()
}

/// Judge that delegates every decision to a language model through the
/// [`Generator`] contract, using fixed prompt templates.
pub struct LlmJudge {
    generator: Arc<dyn Generator>,
}

impl LlmJudge {
    pub fn new(generator: Arc<dyn Generator>) -> Self {
        Self { generator }
    }

    fn ask(&self, prompt: String) -> Result<String, JudgeError> {
        Ok(generate_answer(self.generator.as_ref(), &Prompt::plain(prompt))?)
    }

    fn lines(output: &str) -> Vec<String> {
        output
            .lines()
            .map(|l| strip_list_marker(l.trim()).to_string())
            .filter(|l| !l.is_empty())
            .collect()
    }

    fn verdict(output: &str) -> Result<bool, JudgeError> {
        let word = output
            .split(|c: char| !c.is_alphanumeric())
            .find(|w| !w.is_empty())
            .unwrap_or("")
            .to_lowercase();
        match word.as_str() {
            "yes" | "sim" => Ok(true),
            "no" | "não" | "nao" => Ok(false),
            _ => Err(JudgeError::Failure(format!("unparseable verdict: {output:?}"))),
        }
    }
}

impl Judge for LlmJudge {
    fn name(&self) -> &str {
        "llm"
    }

    fn decompose(&self, answer: &str) -> Result<Vec<String>, JudgeError> {
        let statements = Self::lines(&self.ask(DECOMPOSE_TEMPLATE.replace("{answer}", answer))?);
        if statements.is_empty() {
            return Err(JudgeError::Failure("judge returned no statements".into()));
        }
        Ok(statements)
    }

    fn supported(&self, statement: &str, context: &str) -> Result<bool, JudgeError> {
        let prompt = SUPPORT_TEMPLATE
            .replacen("{context}", context, 1)
            .replacen("{statement}", statement, 1);
        Self::verdict(&self.ask(prompt)?)
    }

    fn relevant(&self, chunk: &str, reference: &str) -> Result<bool, JudgeError> {
        let prompt = RELEVANCE_TEMPLATE
            .replacen("{reference}", reference, 1)
            .replacen("{chunk}", chunk, 1);
        Self::verdict(&self.ask(prompt)?)
    }

    fn generate_questions(&self, answer: &str, n: usize) -> Result<Vec<String>, JudgeError> {
        let prompt = QUESTIONS_TEMPLATE
            .replacen("{n}", &n.to_string(), 1)
            .replacen("{answer}", answer, 1);
        let questions = Self::lines(&self.ask(prompt)?);
        if questions.is_empty() {
            return Err(JudgeError::Failure("judge returned no questions".into()));
        }
        Ok(questions.into_iter().cycle().take(n).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn containment_rules() {
        let j = ContainmentJudge::default();
        assert!(j.supported("Fixar em formol.", "Deve-se fixar a peça em formol tamponado.").unwrap());
        assert!(!j.supported("Fixar em álcool absoluto.", "Fixar em formol.").unwrap());
        // 4 of 5 content tokens = 0.8, exactly at tau.
        assert!(j.supported("a b c d e", "a b c d").unwrap());
        assert!(!j.supported("a b c d e", "a b c").unwrap());
        assert!(j.relevant("texto com a referência inteira e mais", "referência inteira").unwrap());
    }

    #[test]
    fn questions_pad_by_repetition() {
        let j = ContainmentJudge::default();
        assert_eq!(
            j.generate_questions("Um. Dois.", 3).unwrap(),
            vec!["Um.", "Dois.", "Um."]
        );
        assert_eq!(j.generate_questions("Um. Dois. Três. Quatro.", 2).unwrap().len(), 2);
    }

    struct Scripted(&'static str);
    impl Generator for Scripted {
        fn name(&self) -> &str {
            "scripted"
        }
        fn generate(&self, _: &Prompt) -> Result<String, GenerationError> {
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn llm_judge_parsing() {
        let j = LlmJudge::new(Arc::new(Scripted("1. Fixar em formol.\n- Lavar em água.\n\n")));
        assert_eq!(j.decompose("x").unwrap(), vec!["Fixar em formol.", "Lavar em água."]);
        assert_eq!(j.generate_questions("x", 3).unwrap().len(), 3);
        assert_eq!(strip_list_marker("10 minutos em formol"), "10 minutos em formol");
        assert_eq!(strip_list_marker("2) Lavar"), "Lavar");
        assert!(LlmJudge::new(Arc::new(Scripted("Yes."))).supported("s", "c").unwrap());
        assert!(!LlmJudge::new(Arc::new(Scripted("Não"))).relevant("s", "c").unwrap());
        assert!(LlmJudge::new(Arc::new(Scripted("maybe"))).supported("s", "c").is_err());
    }
}
