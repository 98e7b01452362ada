pub mod assemble;
pub mod evaluate;
pub mod generate;
pub mod perturb;
pub mod stats;
