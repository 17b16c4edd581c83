//! Fourth-order diffusion on graphs and metric graphs: the discrete operator
//! `L^2`, self-adjoint vertex conditions for the bi-Laplacian, a Hermite
//! finite element solver and eventual positivity diagnostics.

pub mod conditions;
pub mod discrete;
pub mod fem;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod qualitative;
pub mod reproduce;

use thiserror::Error;

/// Any failure of the library, with the process exit code it maps to.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Discrete(#[from] discrete::DiscreteError),
    #[error(transparent)]
    Condition(#[from] conditions::ConditionError),
    #[error(transparent)]
    Fem(#[from] fem::FemError),
    #[error(transparent)]
    Analysis(#[from] qualitative::AnalysisError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}

fn analysis_is_numerical(e: &qualitative::AnalysisError) -> bool {
    use qualitative::AnalysisError::*;
    !matches!(e, BoundaryConditionViolated { .. } | InvalidInput(_))
}

impl Error {
    /// 2 for invalid input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        let numerical = match self {
            Error::Fem(e) => match e {
                fem::FemError::SolverFailure(_) | fem::FemError::AmbiguousGap { .. } => true,
                fem::FemError::Analysis(a) => analysis_is_numerical(a),
                _ => false,
            },
            Error::Analysis(a) => analysis_is_numerical(a),
            Error::Discrete(discrete::DiscreteError::Transition(a)) => analysis_is_numerical(a),
            _ => false,
        };
        if numerical {
            3
        } else {
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let e: Error = conditions::ConditionError::NotSelfAdjoint("CB* not Hermitian".into()).into();
        assert_eq!(e.exit_code(), 2);
        let e: Error = fem::FemError::AmbiguousGap { below: 1.0, above: 2.0 }.into();
        assert_eq!(e.exit_code(), 3);
        let e: Error = graph::GraphError::Empty.into();
        assert_eq!(e.exit_code(), 2);
        let e: Error = qualitative::AnalysisError::InsufficientDecay { ratio: 2.0 }.into();
        assert_eq!(e.exit_code(), 3);
    }
}
