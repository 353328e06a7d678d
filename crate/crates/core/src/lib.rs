pub mod export;
pub mod harvest;
pub mod model;
pub mod persistence;
pub mod store;
pub mod sync;
pub mod xml;
