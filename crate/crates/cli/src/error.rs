use thiserror::Error;

/// Invalid or inconsistent experiment configuration.
#[derive(Debug, Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

/// TV was requested but the exact marginal cannot be enumerated; the metric is omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Warning(pub String);

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_ENUMERATION: i32 = 4;

/// Exit code for an error chain: configuration problems, numeric guards, or anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<pdhams::Error>() {
        Some(
            pdhams::Error::NonFinite(_)
            | pdhams::Error::NotPositiveDefinite(_)
            | pdhams::Error::RankDeficient { .. },
        ) => EXIT_NUMERIC,
        Some(pdhams::Error::InvalidArgument(_) | pdhams::Error::Contract(_) | pdhams::Error::EmptyGrid(_)) => {
            EXIT_CONFIG
        }
        _ => EXIT_OTHER,
    }
}
