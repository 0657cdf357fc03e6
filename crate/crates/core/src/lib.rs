pub mod analysis;
pub mod channels;
pub mod cli;
pub mod clifford;
pub mod matrix;
pub mod protocol;
pub mod qudit;
pub mod ring;
pub mod twirl;
