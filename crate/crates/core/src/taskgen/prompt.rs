use super::PromptId;

/// A fixed wrapper placed around a statement before activations are
/// extracted. Instruction prompts put the statement on its own line; the
/// two control prompts use a single space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: PromptId,
    pub prefix: &'static str,
    pub separator: &'static str,
    pub suffix: &'static str,
}

const ANSWER: &str = " Answer:";

impl PromptTemplate {
    pub const fn get(id: PromptId) -> Self {
        let (prefix, separator, suffix) = match id {
            PromptId::NoPrompt => ("", "", ""),
            PromptId::AskCorrect => ("Is the following correct?", "\n", ANSWER),
            PromptId::AskTf => ("Is the following statement TRUE or FALSE?", "\n", ANSWER),
            PromptId::AskAble => (
                "Are you able to evaluate the truthfulness of the following statement?",
                "\n",
                ANSWER,
            ),
            PromptId::AskArith => (
                "Are you able to evaluate the correctness of the following arithmetic expression?",
                "\n",
                ANSWER,
            ),
            PromptId::RandomPrompt => ("Green table running bright.", " ", ANSWER),
            PromptId::ReadPrompt => ("Read the following sentence.", " ", ANSWER),
        };
        Self {
            id,
            prefix,
            separator,
            suffix,
        }
    }

    pub fn render(&self, statement: &str) -> String {
        let mut s = String::with_capacity(self.prefix.len() + statement.len() + 16);
        s.push_str(self.prefix);
        s.push_str(self.separator);
        s.push_str(statement);
        s.push_str(self.suffix);
        s
    }
}

pub fn apply_prompt(id: PromptId, statement: &str) -> String {
    PromptTemplate::get(id).render(statement)
}
