//! Grounded prompt assembly and pluggable answer generation.

mod generator;
mod limit;

use serde::{Deserialize, Serialize};

pub use generator::{
    generate_answer, ExtractiveGenerator, GenerationError, Generator, HttpGenerator,
    HttpGeneratorConfig, NO_CONTEXT,
};
pub use limit::ConcurrencyLimit;

/// English answer template. Answers must come from the context alone.
pub const DEFAULT_TEMPLATE_EN: &str = "\
You are an assistant for anatomical pathology laboratory technicians.
Answer the question using only the protocol excerpts in the context below.
Cite the source line of each excerpt you rely on.
If the context is empty or does not contain the answer, reply exactly: NO_CONTEXT

Context:
{context}

Question: {question}
Answer:";

/// Portuguese answer template, same contract as [`DEFAULT_TEMPLATE_EN`].
pub const DEFAULT_TEMPLATE_PT: &str = "\
És um assistente para técnicos de laboratório de anatomia patológica.
Responde à pergunta usando apenas os excertos de protocolo no contexto abaixo.
Indica a linha de origem de cada excerto em que te baseias.
Se o contexto estiver vazio ou não contiver a resposta, responde exatamente: NO_CONTEXT

Contexto:
{context}

Pergunta: {question}
Resposta:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptLanguage {
    #[default]
    En,
    Pt,
}

impl PromptLanguage {
    pub fn template(self) -> &'static str {
        match self {
            Self::En => DEFAULT_TEMPLATE_EN,
            Self::Pt => DEFAULT_TEMPLATE_PT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextPassage {
    pub chunk_id: String,
    pub doc_id: String,
    pub title: String,
    pub text: String,
}

/// A rendered prompt together with the parts it was built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    pub question: String,
    pub passages: Vec<ContextPassage>,
}

impl Prompt {
    /// A prompt with no retrieval context, used for judge calls.
    pub fn plain(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            question: String::new(),
            passages: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedAnswer {
    pub question: String,
    pub answer_text: String,
    pub context_chunk_ids: Vec<String>,
    pub prompt_chars: usize,
}

/// Context block: passages in rank order, each under a `[doc_id · title]` line.
pub fn render_context(passages: &[ContextPassage]) -> String {
    passages
        .iter()
        .map(|p| format!("[{} · {}]\n{}", p.doc_id, p.title, p.text.trim()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Substitutes `{context}` and `{question}`; each must occur exactly once.
pub fn assemble_prompt(
    question: &str,
    passages: &[ContextPassage],
    template: &str,
) -> Result<Prompt, GenerationError> {
    for placeholder in ["{context}", "{question}"] {
        let n = template.matches(placeholder).count();
        if n != 1 {
            return Err(GenerationError::Template(format!(
                "template must contain {placeholder} exactly once, found {n}"
            )));
        }
    }
    let context = render_context(passages);
    // Single pass so placeholder-like text inside passages is left alone.
    let (first, first_value, rest) = {
        let c = template.find("{context}").unwrap();
        let q = template.find("{question}").unwrap();
        if c < q {
            ("{context}", context.as_str(), ("{question}", question))
        } else {
            ("{question}", question, ("{context}", context.as_str()))
        }
    };
    let (head, tail) = template.split_once(first).unwrap();
    let (middle, end) = tail.split_once(rest.0).unwrap();
    let text = format!("{head}{first_value}{middle}{}{end}", rest.1);
    Ok(Prompt {
        text,
        question: question.to_string(),
        passages: passages.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn passage(doc: &str, title: &str, text: &str) -> ContextPassage {
        ContextPassage {
            chunk_id: format!("{doc}#0"),
            doc_id: doc.into(),
            title: title.into(),
            text: text.into(),
        }
    }

    #[test]
    fn empty_context_keeps_instruction() {
        let p = assemble_prompt("Como fixar?", &[], DEFAULT_TEMPLATE_EN).unwrap();
        assert!(p.text.contains("Context:\n\n\nQuestion: Como fixar?"));
        assert!(p.text.contains("reply exactly: NO_CONTEXT"));
        let p = assemble_prompt("Como fixar?", &[], DEFAULT_TEMPLATE_PT).unwrap();
        assert!(p.text.contains("responde exatamente: NO_CONTEXT"));
    }

    #[test]
    fn sources_in_rank_order() {
        let ps = [passage("p1", "Fixação", "Formol 10%."), passage("p2", "Coloração", "H&E.")];
        let p = assemble_prompt("q", &ps, DEFAULT_TEMPLATE_EN).unwrap();
        let a = p.text.find("[p1 · Fixação]").unwrap();
        let b = p.text.find("[p2 · Coloração]").unwrap();
        assert!(a < b);
        let swapped = [ps[1].clone(), ps[0].clone()];
        assert_ne!(assemble_prompt("q", &swapped, DEFAULT_TEMPLATE_EN).unwrap().text, p.text);
    }

    #[test]
    fn template_errors() {
        assert!(matches!(
            assemble_prompt("q", &[], "Context: {context}"),
            Err(GenerationError::Template(_))
        ));
        assert!(matches!(
            assemble_prompt("q", &[], "{context}{context}{question}"),
            Err(GenerationError::Template(_))
        ));
    }

    #[test]
    fn placeholders_inside_passages_survive() {
        let ps = [passage("p", "t", "literal {question} here")];
        let p = assemble_prompt("Q?", &ps, "Q: {question}\nC: {context}").unwrap();
        assert_eq!(p.text, "Q: Q?\nC: [p · t]\nliteral {question} here");
    }
}
