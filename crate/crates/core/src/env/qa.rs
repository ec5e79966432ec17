//! Retrieval QA world over a small local corpus.
//!
//! `Search` is keyword overlap over every paragraph of the corpus, which
//! keeps episodes deterministic and offline.

use std::collections::{BTreeMap, BTreeSet};

use super::metrics::{exact_match, f1_score};
use super::{Environment, Feedback};
use crate::trajectory::{ActionInvocation, Outcome, OutcomeMetric};

/// Entity title -> paragraphs, each an ordered list of sentences.
pub type Corpus = BTreeMap<String, Vec<Vec<String>>>;

pub const NO_PASSAGE_YET: &str = "There is no passage to look up yet. Use Search or Retrieve first.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Passage {
    pub sentences: Vec<String>,
    /// Number of sentences already scanned by `Lookup`.
    pub cursor: usize,
    pub keyword: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QaError {
    NoPassageYet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaStep {
    pub observation: String,
    pub done: bool,
    pub error: Option<QaError>,
}

#[derive(Debug, Clone)]
pub struct QaWorld {
    pub task_id: String,
    pub question: String,
    pub corpus: Corpus,
    pub gold_answer: String,
    pub last_passage: Option<Passage>,
    pub answer: Option<String>,
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "and", "or", "is", "was", "were", "to", "for", "by", "with", "what", "which",
    "who", "whom", "when", "where", "how", "did", "does", "do", "at", "as", "from",
];

fn keywords(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !STOPWORDS.contains(t))
        .map(str::to_string)
        .collect()
}

impl QaWorld {
    pub fn new(
        task_id: impl Into<String>,
        question: impl Into<String>,
        corpus: Corpus,
        gold_answer: impl Into<String>,
    ) -> Self {
        Self {
            task_id: task_id.into(),
            question: question.into(),
            corpus,
            gold_answer: gold_answer.into(),
            last_passage: None,
            answer: None,
        }
    }

    fn set_passage(&mut self, sentences: Vec<String>) -> String {
        let text = sentences.join(" ");
        self.last_passage = Some(Passage {
            sentences,
            cursor: 0,
            keyword: None,
        });
        text
    }

    fn retrieve(&mut self, entity: &str) -> String {
        let wanted = entity.trim().to_lowercase();
        let hit = self
            .corpus
            .iter()
            .find(|(title, _)| title.to_lowercase() == wanted)
            .and_then(|(_, paras)| paras.first().cloned());
        match hit {
            Some(first) => self.set_passage(first),
            None => {
                let similar: Vec<String> = self
                    .corpus
                    .keys()
                    .filter(|t| {
                        let t = t.to_lowercase();
                        !wanted.is_empty() && (t.contains(&wanted) || wanted.contains(&t))
                    })
                    .map(|t| format!("'{t}'"))
                    .collect();
                format!("Could not find [{}]. Similar: [{}].", entity.trim(), similar.join(", "))
            }
        }
    }

    fn search(&mut self, topic: &str) -> String {
        let query = keywords(topic);
        let mut best: Option<(usize, Vec<String>)> = None;
        for (title, paras) in &self.corpus {
            let title_kw = keywords(title);
            let title_hits = query.intersection(&title_kw).count();
            for para in paras {
                let body_kw = keywords(&para.join(" "));
                let score = 2 * title_hits + query.intersection(&body_kw).count();
                if score > 0 && best.as_ref().is_none_or(|(s, _)| score > *s) {
                    best = Some((score, para.clone()));
                }
            }
        }
        match best {
            Some((_, para)) => self.set_passage(para),
            None => format!("No results found for [{}].", topic.trim()),
        }
    }

    fn lookup(&mut self, keyword: &str) -> QaStep {
        let Some(passage) = self.last_passage.as_mut() else {
            return QaStep {
                observation: NO_PASSAGE_YET.to_string(),
                done: false,
                error: Some(QaError::NoPassageYet),
            };
        };
        let kw = keyword.trim().to_lowercase();
        if passage.keyword.as_deref() != Some(kw.as_str()) {
            passage.keyword = Some(kw.clone());
            passage.cursor = 0;
        }
        let matching: Vec<usize> = passage
            .sentences
            .iter()
            .enumerate()
            .filter(|(_, s)| s.to_lowercase().contains(&kw))
            .map(|(i, _)| i)
            .collect();
        let observation = match matching.iter().position(|&i| i >= passage.cursor) {
            Some(k) => {
                let idx = matching[k];
                passage.cursor = idx + 1;
                format!("(Result {} / {}) {}", k + 1, matching.len(), passage.sentences[idx])
            }
            None => "No more results.".to_string(),
        };
        QaStep {
            observation,
            done: false,
            error: None,
        }
    }

    pub fn qa_step(&mut self, action: &ActionInvocation) -> QaStep {
        let arg = action.args.first().map(String::as_str).unwrap_or("");
        let ok = |observation: String| QaStep {
            observation,
            done: false,
            error: None,
        };
        match (action.name.as_str(), action.args.len()) {
            ("Retrieve", 1) => ok(self.retrieve(arg)),
            ("Search", 1) => ok(self.search(arg)),
            ("Lookup", 1) => self.lookup(arg),
            ("Finish", 1) => {
                self.answer = Some(arg.trim().to_string());
                QaStep {
                    observation: format!("Answer: {}", arg.trim()),
                    done: true,
                    error: None,
                }
            }
            _ => ok(format!("Invalid action: {}", action.raw.trim())),
        }
    }
}

impl Environment for QaWorld {
    fn task_id(&self) -> &str {
        &self.task_id
    }

    fn task_text(&self) -> String {
        self.question.clone()
    }

    fn step(&mut self, action: &ActionInvocation) -> Feedback {
        let s = self.qa_step(action);
        Feedback {
            observation: s.observation,
            done: s.done,
        }
    }

    fn outcome(&self) -> Outcome {
        let answer = self.answer.clone();
        let reward = answer.as_deref().map_or(0.0, |a| f1_score(a, &self.gold_answer));
        Outcome {
            reward,
            success: answer.as_deref().is_some_and(|a| exact_match(a, &self.gold_answer)),
            answer,
            metric: OutcomeMetric::F1,
        }
    }

    fn default_max_steps(&self) -> usize {
        10
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> QaWorld {
        let mut corpus = Corpus::new();
        corpus.insert(
            "Gary Harrison".into(),
            vec![vec![
                "Gary Steven Harrison is an American songwriter.".into(),
                "Harrison began his career in the 1970s, and has written over 300 major-label recorded songs, including several number one hits.".into(),
            ]],
        );
        corpus.insert(
            "Bryan White".into(),
            vec![vec![
                "Bryan Shelton White (born February 17, 1974) is an American country music singer and songwriter."
                    .into(),
                "Signed to Asylum Records in 1994 at age 20, White released his self-titled debut album that year."
                    .into(),
            ]],
        );
        QaWorld::new("gh", "how many songs?", corpus, "300")
    }

    #[test]
    fn retrieve_exact_title() {
        let mut w = world();
        let s = w.qa_step(&ActionInvocation::bracket("Retrieve", "Gary Harrison"));
        assert!(s
            .observation
            .starts_with("Gary Steven Harrison is an American songwriter."));
        assert!(!s.done);
    }

    #[test]
    fn retrieve_miss_lists_similar() {
        let mut w = world();
        let s = w.qa_step(&ActionInvocation::bracket("Retrieve", "Harrison"));
        assert_eq!(s.observation, "Could not find [Harrison]. Similar: ['Gary Harrison'].");
        assert!(w.last_passage.is_none());
    }

    #[test]
    fn lookup_before_passage() {
        let mut w = world();
        let s = w.qa_step(&ActionInvocation::bracket("Lookup", "songs"));
        assert_eq!(s.error, Some(QaError::NoPassageYet));
        assert_eq!(s.observation, NO_PASSAGE_YET);
    }

    #[test]
    fn lookup_advances_cursor() {
        let mut w = world();
        w.qa_step(&ActionInvocation::bracket("Search", "Bryan White singer"));
        let a = w.qa_step(&ActionInvocation::bracket("Lookup", "White"));
        let b = w.qa_step(&ActionInvocation::bracket("Lookup", "White"));
        let c = w.qa_step(&ActionInvocation::bracket("Lookup", "White"));
        assert!(a.observation.starts_with("(Result 1 / 2) Bryan Shelton White"));
        assert!(b.observation.starts_with("(Result 2 / 2) Signed"));
        assert_eq!(c.observation, "No more results.");
    }

    #[test]
    fn search_picks_best_overlap() {
        let mut w = world();
        let s = w.qa_step(&ActionInvocation::bracket("Search", "Gary Harrison"));
        assert!(s
            .observation
            .contains("has written over 300 major-label recorded songs"));
    }

    #[test]
    fn finish_echoes_and_scores() {
        let mut w = world();
        let s = w.qa_step(&ActionInvocation::bracket("Finish", "300"));
        assert!(s.done);
        assert_eq!(s.observation, "Answer: 300");
        let o = w.outcome();
        assert_eq!(o.reward, 1.0);
        assert!(o.success);
    }

    #[test]
    fn deterministic_replay() {
        let actions = [
            ActionInvocation::bracket("Search", "American songwriter"),
            ActionInvocation::bracket("Lookup", "19"),
            ActionInvocation::bracket("Retrieve", "Bryan"),
        ];
        let run = || {
            let mut w = world();
            actions.iter().map(|a| w.qa_step(a).observation).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
