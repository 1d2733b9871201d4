use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("parameter `{name}` = {value}: must satisfy {constraint}")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("time grid: {0}")]
    Grid(String),
    #[error("lattice alignment: {0}")]
    Alignment(String),
    #[error("function outside the derivative-matching class: {0}")]
    DomainClass(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("path batch format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
