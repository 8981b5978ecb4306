pub mod analysis;
pub mod brat;
pub mod decoders;
pub mod encoder;
pub mod import;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod schema;
pub mod synthetic;
pub mod trainer;
