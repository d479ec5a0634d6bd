pub mod rdf;
pub mod ingest;
pub mod mapping;
pub mod shapes;
pub mod query;
pub mod analytics;
pub mod estimator;
