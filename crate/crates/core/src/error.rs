use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Annotation or detection text that is not well-formed.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("annotation {annotation_id}: {message}")]
    Integrity { annotation_id: u64, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    Dimension {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("box does not cover any pixel of the image")]
    EmptyBox,

    #[error("mask has no foreground pixels")]
    EmptyMask,

    #[error("IoU is undefined for two empty masks")]
    UndefinedIou,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Converts a serde_json error into a [`Error::Parse`] carrying the byte
    /// offset of the failure within `text`.
    pub(crate) fn from_json(err: serde_json::Error, text: &str) -> Self {
        Error::Parse {
            offset: byte_offset(text, err.line(), err.column()),
            message: err.to_string(),
        }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_points_at_failure() {
        let text = "{\n  \"a\": ,\n}";
        let err = serde_json::from_str::<serde_json::Value>(text).unwrap_err();
        match Error::from_json(err, text) {
            Error::Parse { offset, .. } => assert_eq!(&text[offset..offset + 1], ","),
            other => panic!("unexpected {other:?}"),
        }
    }
}
