use std::path::PathBuf;
use std::sync::Mutex;

use super::{LlmError, Provider, RawCompletion};

/// Plays back a fixed sequence of responses, one per call.
#[derive(Debug)]
pub struct MockProvider {
    responses: Vec<String>,
    next: Mutex<usize>,
    prompts: Mutex<Vec<String>>,
}

impl MockProvider {
    pub fn from_texts(responses: Vec<String>) -> Self {
        MockProvider { responses, next: Mutex::new(0), prompts: Mutex::new(Vec::new()) }
    }

    /// Reads every script file up front so a missing file fails early.
    pub fn from_files(paths: &[PathBuf]) -> Result<Self, LlmError> {
        let responses = paths
            .iter()
            .map(|p| std::fs::read_to_string(p).map_err(|e| LlmError::io(p, e)))
            .collect::<Result<_, _>>()?;
        Ok(MockProvider::from_texts(responses))
    }

    pub fn calls(&self) -> usize {
        *self.next.lock().expect("mock lock")
    }

    /// Every prompt received so far, in call order.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("mock lock").clone()
    }
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn call(&self, prompt: &str) -> Result<RawCompletion, LlmError> {
        self.prompts.lock().expect("mock lock").push(prompt.to_string());
        let mut next = self.next.lock().expect("mock lock");
        let text = self.responses.get(*next).cloned().ok_or(LlmError::ScriptExhausted { calls: *next })?;
        *next += 1;
        Ok(RawCompletion { text, usage: None })
    }
}
