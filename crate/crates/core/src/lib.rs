pub mod claims;
pub mod cones;
pub mod decompose;
pub mod exactlp;
pub mod jsonfmt;
pub mod linalg;
pub mod pricing;
pub mod rational;
pub mod scenario;
pub mod suite;
pub mod verdicts;
