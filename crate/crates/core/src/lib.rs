//! Complex-data ETL toolkit: pull descriptive attributes out of heterogeneous
//! source files, wrap them as complex objects, serialize those as XML against
//! a fixed DTD, and shred the XML into an embedded relational store.

pub mod agent;
pub mod batch;
pub mod dtd;
pub mod extract;
pub mod model;
pub mod ods;
pub mod rdb;
pub mod xml;
