//! Name-keyed registries of test-potential generators and verification
//! suites, so front ends can list and dispatch them uniformly.

pub mod generators;
pub mod suites;

pub use generators::{
    sample, AnalyticPotential, GeneratorParams, PerturbedQuadratic, Polynomial, PotentialGenerator, Quadratic,
    SampledPotential,
};
pub use suites::{CheckResult, SuiteContext, SuiteSummary, VerifySuite};

pub struct Registry {
    generators: Vec<Box<dyn PotentialGenerator>>,
    suites: Vec<Box<dyn VerifySuite>>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry {
            generators: generators::builtin(),
            suites: suites::builtin(),
        }
    }
}

impl Registry {
    pub fn generator(&self, name: &str) -> Option<&dyn PotentialGenerator> {
        self.generators.iter().find(|g| g.name() == name).map(|g| g.as_ref())
    }

    pub fn generator_names(&self) -> Vec<&'static str> {
        self.generators.iter().map(|g| g.name()).collect()
    }

    pub fn suite(&self, name: &str) -> Option<&dyn VerifySuite> {
        self.suites.iter().find(|s| s.name() == name).map(|s| s.as_ref())
    }

    pub fn suite_names(&self) -> Vec<&'static str> {
        self.suites.iter().map(|s| s.name()).collect()
    }
}
