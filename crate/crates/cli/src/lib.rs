//! Library side of the `spanrel` binary: run configuration, subcommands
//! and error classification.

pub mod commands;
pub mod config;

use spanrel::brat::{BratError, DatasetError};
use spanrel::encoder::EncoderError;
use spanrel::import::ImportError;
use spanrel::model::ModelError;

/// Exit status of a command.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FORMAT: i32 = 2;

fn dataset_format(e: &DatasetError) -> Option<String> {
    match e {
        DatasetError::Parse {
            file,
            source: BratError::MalformedLine { line, reason },
        } => Some(format!("FormatError line {line} in {}: {reason}", file.display())),
        DatasetError::Parse { file, source } => Some(format!("FormatError in {}: {source}", file.display())),
        DatasetError::Io { .. } => None,
    }
}

fn encoder_format(e: &EncoderError) -> Option<String> {
    match e {
        EncoderError::Pretrained { path, line, reason } if *line > 0 => {
            Some(format!("FormatError line {line} in {}: {reason}", path.display()))
        }
        _ => None,
    }
}

/// Message of a malformed-input error anywhere in the chain, if any.
pub fn format_error(err: &anyhow::Error) -> Option<String> {
    err.chain().find_map(|e| {
        if let Some(e) = e.downcast_ref::<ImportError>() {
            return match e {
                ImportError::Format { .. } | ImportError::InconsistentTree { .. } => Some(e.to_string()),
                ImportError::Dataset(d) => dataset_format(d),
                _ => None,
            };
        }
        if let Some(e) = e.downcast_ref::<DatasetError>() {
            return dataset_format(e);
        }
        if let Some(e) = e.downcast_ref::<EncoderError>() {
            return encoder_format(e);
        }
        if let Some(ModelError::Encoder(e)) = e.downcast_ref::<ModelError>() {
            return encoder_format(e);
        }
        None
    })
}

/// Exit code and message for a failed command.
pub fn classify(err: &anyhow::Error) -> (i32, String) {
    match format_error(err) {
        Some(msg) => (EXIT_FORMAT, msg),
        None => (EXIT_ERROR, format!("{err:#}")),
    }
}
