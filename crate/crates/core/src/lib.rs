pub mod ccg;
pub mod market;
pub mod model;
pub mod optim;
pub mod pricing;
pub mod report;
pub mod scuc;
pub mod settlement;
pub mod storage;
pub mod uncertainty;
