use ldctree::Error;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const USAGE: u8 = 1;
    pub const DATA: u8 = 2;
    pub const MODEL: u8 = 3;

    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: Self::USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            code: Self::DATA,
            message: message.into(),
        }
    }

    pub fn model(message: impl Into<String>) -> Self {
        Failure {
            code: Self::MODEL,
            message: message.into(),
        }
    }
}

/// Classifies a library error raised while handling data (CSV, splits, training).
pub fn data_error(e: Error) -> Failure {
    match e {
        Error::InvalidConfig(m) => Failure::usage(m),
        other => Failure::data(other.to_string()),
    }
}

/// Classifies a library error raised while loading or applying a model.
pub fn model_error(e: Error) -> Failure {
    match e {
        Error::InvalidConfig(m) => Failure::usage(m),
        other => Failure::model(other.to_string()),
    }
}
