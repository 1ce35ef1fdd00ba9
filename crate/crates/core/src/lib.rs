pub mod alloc;
pub mod benchgen;
pub mod ir;
pub mod machine;
pub mod metrics;
pub mod policy;
pub mod run;
pub mod sched;
