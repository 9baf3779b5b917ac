//! JSON network and evidence files.
//!
//! Network: `{"variables":[{"name","states"}],"tables":[{"child","parents","rows"}]}`.
//! Rows are ordered by parent configuration with the last-listed parent
//! varying fastest.
//!
//! Evidence: `{"observations":[{"at_step":n,"set":{"Var":"state"}}]}`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use bcond_core::network::EvidenceError;
use bcond_core::{
    BeliefNetwork, Evidence, EvidenceStream, NetworkDescription, TableDescription,
    ValidationReport, Variable,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid network:\n{0}")]
    Semantic(ValidationReport),
    #[error("observation {index}: {source}")]
    Evidence {
        index: usize,
        #[source]
        source: EvidenceError,
    },
    #[error(transparent)]
    Stream(EvidenceError),
}

impl FormatError {
    pub fn is_io(&self) -> bool {
        matches!(self, FormatError::Io { .. })
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableFile {
    name: String,
    states: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    child: String,
    #[serde(default)]
    parents: Vec<String>,
    rows: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    variables: Vec<VariableFile>,
    tables: Vec<TableFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Observation {
    at_step: usize,
    set: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvidenceFile {
    observations: Vec<Observation>,
}

pub fn read_file(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses the file structure without checking it is a valid network.
pub fn parse_description(text: &str) -> Result<NetworkDescription, FormatError> {
    let file: NetworkFile = serde_json::from_str(text)?;
    Ok(NetworkDescription {
        variables: file
            .variables
            .into_iter()
            .map(|v| Variable {
                name: v.name,
                states: v.states,
            })
            .collect(),
        tables: file
            .tables
            .into_iter()
            .map(|t| TableDescription {
                child: t.child,
                parents: t.parents,
                rows: t.rows,
            })
            .collect(),
    })
}

pub fn parse_network(text: &str) -> Result<BeliefNetwork, FormatError> {
    parse_description(text)?
        .build()
        .map_err(FormatError::Semantic)
}

pub fn load_network(path: &Path) -> Result<BeliefNetwork, FormatError> {
    parse_network(&read_file(path)?)
}

pub fn serialize_description(desc: &NetworkDescription) -> String {
    let file = NetworkFile {
        variables: desc
            .variables
            .iter()
            .map(|v| VariableFile {
                name: v.name.clone(),
                states: v.states.clone(),
            })
            .collect(),
        tables: desc
            .tables
            .iter()
            .map(|t| TableFile {
                child: t.child.clone(),
                parents: t.parents.clone(),
                rows: t.rows.clone(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("network serializes");
    out.push('\n');
    out
}

pub fn serialize_network(net: &BeliefNetwork) -> String {
    serialize_description(&net.to_description())
}

pub fn parse_evidence(net: &BeliefNetwork, text: &str) -> Result<EvidenceStream, FormatError> {
    let file: EvidenceFile = serde_json::from_str(text)?;
    let items = file
        .observations
        .iter()
        .enumerate()
        .map(|(index, o)| {
            Evidence::from_labels(net, o.set.iter().map(|(k, v)| (k.as_str(), v.as_str())))
                .map(|ev| (ev, o.at_step))
                .map_err(|source| FormatError::Evidence { index, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    EvidenceStream::new(items).map_err(FormatError::Stream)
}

pub fn load_evidence(net: &BeliefNetwork, path: &Path) -> Result<EvidenceStream, FormatError> {
    parse_evidence(net, &read_file(path)?)
}

/// Inverse of [`parse_evidence`].
pub fn serialize_evidence(net: &BeliefNetwork, stream: &EvidenceStream) -> String {
    let observations: Vec<serde_json::Value> = stream
        .items()
        .iter()
        .map(|(ev, at)| {
            let set: serde_json::Map<String, serde_json::Value> = ev
                .iter()
                .map(|(v, s)| {
                    let var = net.variable(v);
                    (var.name.clone(), var.states[s].clone().into())
                })
                .collect();
            serde_json::json!({ "at_step": at, "set": set })
        })
        .collect();
    let mut out =
        serde_json::to_string_pretty(&serde_json::json!({ "observations": observations }))
            .expect("evidence serializes");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use bcond_core::fixtures::diamond;
    use bcond_core::VarId;

    const ONE: &str = r#"{"variables":[{"name":"X","states":["t","f"]}],
        "tables":[{"child":"X","parents":[],"rows":[[0.5,0.5]]}]}"#;

    #[test]
    fn minimal_network() {
        let net = parse_network(ONE).unwrap();
        assert_eq!(net.len(), 1);
    }

    #[test]
    fn round_trip() {
        let net = diamond();
        let text = serialize_network(&net);
        let back = parse_network(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(serialize_network(&back), text);
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_network("{\n  \"variables\": [,]\n}").unwrap_err();
        match err {
            FormatError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 17)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn row_sum_reported() {
        let text = ONE.replace("[0.5,0.5]", "[0.6,0.5]");
        let err = parse_network(&text).unwrap_err();
        assert!(err.to_string().contains("row sum 1.1"), "{err}");
    }

    #[test]
    fn unknown_parent_reported() {
        let text = ONE.replace("\"parents\":[]", "\"parents\":[\"Y\"]");
        assert!(matches!(
            parse_network(&text),
            Err(FormatError::Semantic(_))
        ));
    }

    #[test]
    fn evidence_file() {
        let net = diamond();
        let text = r#"{"observations":[{"at_step":0,"set":{"D":"t"}},
            {"at_step":3,"set":{"B":"f","C":"t"}}]}"#;
        let stream = parse_evidence(&net, text).unwrap();
        assert_eq!(stream.len(), 2);
        assert_eq!(stream.items()[1].0.get(VarId(1)), Some(1));
        assert_eq!(stream.items()[1].1, 3);
        let again = parse_evidence(&net, &serialize_evidence(&net, &stream)).unwrap();
        assert_eq!(again, stream);

        let bad = r#"{"observations":[{"at_step":0,"set":{"D":"maybe"}}]}"#;
        assert!(matches!(
            parse_evidence(&net, bad),
            Err(FormatError::Evidence { index: 0, .. })
        ));
        let backwards =
            r#"{"observations":[{"at_step":4,"set":{"D":"t"}},{"at_step":2,"set":{"B":"t"}}]}"#;
        assert!(matches!(
            parse_evidence(&net, backwards),
            Err(FormatError::Stream(_))
        ));
    }
}
