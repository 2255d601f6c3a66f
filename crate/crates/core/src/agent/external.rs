use std::collections::BTreeMap;
use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::{Action, AgentError, DecisionContext, DecisionPolicy, Result, RetrievalRequest};
use crate::graph::{NodeId, ToolGraph};

/// One field of a recall description: `name:type/description`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecallField {
    pub name: String,
    pub ty: String,
    pub description: String,
}

/// `Name(description: ..., input: a:type/desc, ...; output: b:type/desc)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecallDescription {
    pub name: String,
    pub description: String,
    pub inputs: Vec<RecallField>,
    pub outputs: Vec<RecallField>,
}

fn parse_fields(text: &str) -> Vec<RecallField> {
    let mut fields: Vec<RecallField> = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        match part.split_once(':') {
            Some((name, rest)) if !name.trim().is_empty() && !name.contains(' ') => {
                let (ty, desc) = rest.split_once('/').unwrap_or((rest, ""));
                fields.push(RecallField {
                    name: name.trim().to_owned(),
                    ty: ty.trim().to_owned(),
                    description: desc.trim().to_owned(),
                });
            }
            // A comma inside a field description.
            _ => {
                if let Some(last) = fields.last_mut() {
                    last.description.push_str(", ");
                    last.description.push_str(part);
                }
            }
        }
    }
    fields
}

/// Parses the retrieval description format; `None` if there is no
/// `Name(...)` shape.
pub fn parse_recall_description(text: &str) -> Option<RecallDescription> {
    let text = text.trim();
    let open = text.find('(')?;
    let body = text[open + 1..].strip_suffix(')')?;
    let name = text[..open].trim().to_owned();
    if name.is_empty() {
        return None;
    }
    let out_at = body.find("output:");
    let in_at = body.find("input:");
    let head_end = [in_at, out_at].into_iter().flatten().min().unwrap_or(body.len());
    let description = body[..head_end]
        .trim()
        .trim_start_matches("description:")
        .trim()
        .trim_end_matches([',', ';'])
        .trim()
        .to_owned();
    let inputs = match in_at {
        Some(i) => {
            let end = out_at.filter(|&o| o > i).unwrap_or(body.len());
            parse_fields(body[i + "input:".len()..end].trim().trim_end_matches(';'))
        }
        None => Vec::new(),
    };
    let outputs = match out_at {
        Some(o) => {
            let end = in_at.filter(|&i| i > o).unwrap_or(body.len());
            parse_fields(body[o + "output:".len()..end].trim().trim_end_matches(';'))
        }
        None => Vec::new(),
    };
    Some(RecallDescription {
        name,
        description,
        inputs,
        outputs,
    })
}

/// Response record of an external policy process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyResponse {
    pub action: String,
    #[serde(default)]
    pub target_api: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub recall_description: String,
    #[serde(default)]
    pub answer: String,
    /// Whether a `direct_answer` ends the episode.
    #[serde(default, rename = "final")]
    pub final_answer: Option<bool>,
}

impl PolicyResponse {
    pub fn into_action(self) -> Result<Action> {
        let protocol = |m: String| Err(AgentError::Protocol(m));
        match self.action.as_str() {
            "direct_answer" => Ok(Action::DirectResponse {
                answer: self.answer,
                final_answer: self.final_answer.unwrap_or(true),
            }),
            "clarify_intent" => Ok(Action::IntentClarification { question: self.answer }),
            "retrieve_api" => {
                if self.recall_description.trim().is_empty() {
                    return protocol("retrieve_api without recall_description".into());
                }
                let req = match parse_recall_description(&self.recall_description) {
                    Some(r) => RetrievalRequest::new(
                        format!("{} {}", r.name, r.description),
                        r.inputs.into_iter().map(|f| f.name).collect(),
                        r.outputs.into_iter().map(|f| f.name).collect(),
                    ),
                    None => RetrievalRequest::new(self.recall_description, Default::default(), Default::default()),
                };
                Ok(Action::ToolchainRetrieval(req))
            }
            "call_api" => {
                if self.target_api.is_empty() {
                    return protocol("call_api without target_api".into());
                }
                let params = self
                    .params
                    .into_iter()
                    .map(|(k, v)| {
                        let v = match v {
                            serde_json::Value::String(s) => s,
                            other => other.to_string(),
                        };
                        (k, v)
                    })
                    .collect();
                Ok(Action::ToolExecution {
                    api: NodeId::new(self.target_api),
                    params,
                })
            }
            other => protocol(format!("unknown action {other:?}")),
        }
    }
}

/// Runs a command per decision: the context goes to stdin as JSON, one
/// [`PolicyResponse`] JSON object is read from stdout.
#[derive(Debug, Clone)]
pub struct ExternalPolicy {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalPolicy {
    /// Splits a command line on whitespace.
    pub fn from_command_line(cmd: &str) -> Option<Self> {
        let mut parts = cmd.split_whitespace().map(str::to_owned);
        let program = parts.next()?;
        Some(ExternalPolicy {
            program,
            args: parts.collect(),
        })
    }
}

impl DecisionPolicy for ExternalPolicy {
    fn propose(&mut self, ctx: &DecisionContext, _: &ToolGraph) -> Result<Vec<(Action, f64)>> {
        let protocol = |m: String| AgentError::Protocol(m);
        let request = serde_json::to_vec(ctx).map_err(|e| protocol(e.to_string()))?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| protocol(format!("cannot start {}: {e}", self.program)))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(&request)
            .map_err(|e| protocol(e.to_string()))?;
        let out = child.wait_with_output().map_err(|e| protocol(e.to_string()))?;
        if !out.status.success() {
            return Err(protocol(format!("policy exited with {}", out.status)));
        }
        let resp: PolicyResponse =
            serde_json::from_slice(&out.stdout).map_err(|e| protocol(format!("malformed response: {e}")))?;
        Ok(vec![(resp.into_action()?, 1.0)])
    }
}
